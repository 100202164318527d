//! Closed-form reference formulas shared by the oracle and acceptance
//! suites. Everything here is scalar arithmetic, independent of the
//! library's jets, matrices, and root finding.

#![allow(dead_code)]

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

/// Scalar LST of the single-phase constant-headway service time: a driver
/// needing a headway `t_cross` against Poisson traffic of rate `q`.
pub fn scalar_service_lst(s: f64, q: f64, t_cross: f64) -> f64 {
    let e = (-(s + q) * t_cross).exp();
    (s + q) * e / (s + q * e)
}

/// First two raw moments of the same service time, by the compound
/// geometric decomposition: `F ~ Geom(p)` failed attempts, each a fresh
/// exponential conditioned below `t_cross`, then the crossing itself.
pub fn scalar_service_moments(q: f64, t_cross: f64) -> (f64, f64) {
    let t = t_cross;
    let p = (-q * t).exp();
    // E[X; X < t] and E[X^2; X < t] for X ~ Exp(q).
    let m1_trunc = (1.0 - (-q * t).exp() * (1.0 + q * t)) / q;
    let m2_trunc = 2.0 / (q * q) - (-q * t).exp() * (t * t + 2.0 * t / q + 2.0 / (q * q));
    let ey = m1_trunc / (1.0 - p);
    let ey2 = m2_trunc / (1.0 - p);
    let ef = (1.0 - p) / p;
    let eff = 2.0 * ef * ef; // E[F(F-1)] for the geometric on {0,1,...}
    let es = ef * ey;
    let es2 = ef * ey2 + eff * ey * ey;
    let m1 = t + es;
    let m2 = t * t + 2.0 * t * es + es2;
    (m1, m2)
}

/// `e^{At}` for a 2x2 `A` with distinct real eigenvalues, by Lagrange
/// interpolation on the spectrum.
pub fn expm_2x2(a: [[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    assert!(disc > 1e-12, "eigenvalues must be distinct");
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            // e1 (A - l2 I)/(l1 - l2) + e2 (A - l1 I)/(l2 - l1)
            out[i][j] = (e1 * (a[i][j] - l2 * id) - e2 * (a[i][j] - l1 * id)) / (l1 - l2);
        }
    }
    out
}

/// Mean queue length at departures and mean wait for an M/G/1 queue where
/// the service opening a busy period follows `G*` and all later services
/// follow `G`. Standard embedded-chain algebra: with `a = lambda E[G]`,
/// `a2 = lambda^2 E[G^2]` (and starred versions for `G*`),
///   f0    = (1 - a) / (1 + a* - a)
///   E[X]  = f0 [(2a* + a2* - a2)(1 - a) + (1 + a* - a) a2] / (2 (1-a)^2)
///   E[W]  = E[X]/lambda - (f0 E[G*] + (1 - f0) E[G]).
/// When `G* = G` in law this collapses to Pollaczek-Khinchine.
pub fn exceptional_mg1(lambda: f64, g1: f64, g2: f64, gs1: f64, gs2: f64) -> (f64, f64, f64) {
    let a = lambda * g1;
    let a2 = lambda * lambda * g2;
    let a_s = lambda * gs1;
    let a2_s = lambda * lambda * gs2;
    let f0 = (1.0 - a) / (1.0 + a_s - a);
    let ex = f0 * ((2.0 * a_s + a2_s - a2) * (1.0 - a) + (1.0 + a_s - a) * a2)
        / (2.0 * (1.0 - a) * (1.0 - a));
    let ew = ex / lambda - (f0 * gs1 + (1.0 - f0) * g1);
    (f0, ex, ew)
}
