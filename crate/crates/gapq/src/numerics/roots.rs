//! Zeros of an analytic function strictly inside the unit disk.
//!
//! The embedded-chain boundary conditions need the `N-1` zeros of
//! `det(zI - A(z))` with `|z| < 1`; the zero at `z = 1` is handled
//! analytically by the caller and never searched for. Two stages:
//!
//! 1. Fast path: fixed-point iteration on the eigenvalue branches of
//!    `A(z)` (the classical approach for kernels of this type), when the
//!    caller can supply eigenvalues.
//! 2. Fallback: recursive rectangle subdivision driven by argument-principle
//!    counts. Rectangles tile the search region exactly, so every zero lands
//!    in one tile and multiplicities add up without any deduplication.
//!
//! Every result, from either path, is certified by an argument-principle
//! count over `|z| = 1 - eps`; a mismatch is an error, not a warning.

use num_complex::Complex64;

use super::matrix::SquareMatrix;
use super::policy::Tolerances;
use super::NumericsError;

pub struct DiskRootProblem<'a> {
    /// `z -> (g(z), g'(z))`.
    pub value_and_derivative: &'a dyn Fn(Complex64) -> (Complex64, Complex64),
    /// Number of zeros strictly inside the disk, counted with multiplicity.
    pub expected: usize,
    /// Optional `z -> eigenvalues of A(z)` for the fast path.
    pub eigen_seed: Option<&'a dyn Fn(Complex64) -> Vec<Complex64>>,
}

/// All zeros with `|z| < 1 - contour_eps`, multiplicity included.
pub fn unit_disk_roots(
    p: &DiskRootProblem,
    tol: &Tolerances,
) -> Result<Vec<Complex64>, NumericsError> {
    let radius = 1.0 - tol.contour_eps;
    let g = |z: Complex64| (p.value_and_derivative)(z).0;
    let circle = |t: f64| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * t);
    let (winding, probe) = path_winding(&g, &circle, 1 << 20)?;
    if winding < 0 || winding as usize != p.expected {
        return Err(NumericsError::RootCountMismatch {
            found: p.expected,
            expected: p.expected,
            winding,
        });
    }
    if p.expected == 0 {
        return Ok(Vec::new());
    }
    let target = tol.root_residual * probe.gmax.max(1.0);

    // Fast path: eigenvalue fixed points, polished by Newton.
    if let Some(eigs) = p.eigen_seed {
        let mut found: Vec<Complex64> = Vec::new();
        let starts = eigs(Complex64::new(0.0, 0.0));
        for &start in &starts {
            let mut z = start;
            let mut converged = false;
            for _ in 0..300 {
                if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 4.0 {
                    break;
                }
                let next = closest_to(&eigs(z), z);
                if (next - z).norm() < 1e-13 {
                    z = next;
                    converged = true;
                    break;
                }
                z = next;
            }
            if !converged {
                continue;
            }
            if let Some(zp) = newton_polish(p.value_and_derivative, z, target) {
                if zp.norm() < radius && !found.iter().any(|f| (f - zp).norm() < 1e-8) {
                    found.push(zp);
                }
            }
        }
        if found.len() == p.expected {
            return Ok(found);
        }
    }

    // Fallback: tile a square cover of the disk. The square's corners poke
    // outside the certification circle, so the cover can legitimately hold
    // more zeros than `expected`; they are filtered by modulus at the end.
    let mut half = radius;
    let outer = loop {
        let r = Rect {
            x0: -half,
            x1: half,
            y0: -half,
            y1: half,
        };
        match path_winding(&g, &rect_path(&r), 1 << 16) {
            Ok((c, _)) => break (r, c),
            Err(NumericsError::RootOnContour | NumericsError::ContourUnresolved)
                if half < radius * 1.1 =>
            {
                half *= 1.0041
            }
            Err(e) => return Err(e),
        }
    };
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    cover_rect(p.value_and_derivative, &outer.0, outer.1, target, 0, &mut clusters)?;
    let mut roots = Vec::new();
    for (z, m) in &clusters {
        if z.norm() < radius {
            for _ in 0..*m {
                roots.push(*z);
            }
        }
    }
    if roots.len() != p.expected {
        return Err(NumericsError::RootCountMismatch {
            found: roots.len(),
            expected: p.expected,
            winding,
        });
    }
    Ok(roots)
}

/// Eigenvalues of the constant part of a small matrix: characteristic
/// polynomial by Faddeev-LeVerrier, then closed forms for degree <= 2 and
/// Durand-Kerner above.
pub fn eigenvalues(m: &SquareMatrix) -> Vec<Complex64> {
    let p = m.char_poly();
    let coeffs: Vec<Complex64> = p.iter().map(|j| j.value()).collect();
    monic_poly_roots(&coeffs)
}

/// Roots of `x^n + c[1] x^(n-1) + ... + c[n]` (`c[0]` is 1 and ignored).
pub fn monic_poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    match n {
        0 => Vec::new(),
        1 => vec![-c[1]],
        2 => {
            let (b, q) = (c[1], c[2]);
            let disc = (b * b - q * 4.0).sqrt();
            // Pick the sign that avoids cancellation in -b -+ disc.
            let s = if (b + disc).norm() >= (b - disc).norm() {
                b + disc
            } else {
                b - disc
            };
            if s.norm() == 0.0 {
                return vec![Complex64::new(0.0, 0.0); 2];
            }
            let r1 = -s / 2.0;
            let r2 = q / r1;
            vec![r1, r2]
        }
        _ => {
            let eval = |x: Complex64| {
                let mut v = Complex64::new(1.0, 0.0);
                for ck in &c[1..] {
                    v = v * x + ck;
                }
                v
            };
            let mut xs: Vec<Complex64> = (0..n)
                .map(|k| Complex64::new(0.4, 0.9).powu(k as u32 + 1))
                .collect();
            for _ in 0..500 {
                let mut delta: f64 = 0.0;
                for i in 0..n {
                    let mut denom = Complex64::new(1.0, 0.0);
                    for j in 0..n {
                        if j != i {
                            denom *= xs[i] - xs[j];
                        }
                    }
                    if denom.norm() == 0.0 {
                        // Coincident iterates: nudge apart and retry.
                        xs[i] += Complex64::new(1e-6, 1e-6);
                        continue;
                    }
                    let step = eval(xs[i]) / denom;
                    xs[i] -= step;
                    delta = delta.max(step.norm());
                }
                if delta < 1e-13 {
                    break;
                }
            }
            xs
        }
    }
}

fn closest_to(candidates: &[Complex64], z: Complex64) -> Complex64 {
    *candidates
        .iter()
        .min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm()))
        .expect("eigenvalue list is never empty")
}

fn newton_polish(
    f: &dyn Fn(Complex64) -> (Complex64, Complex64),
    start: Complex64,
    target: f64,
) -> Option<Complex64> {
    let mut z = start;
    let (mut val, mut der) = f(z);
    for _ in 0..60 {
        // Iterate to step stagnation, not just to the residual target, so a
        // simple root comes back at machine precision even when the residual
        // scale would allow stopping early.
        if der.norm() == 0.0 {
            break;
        }
        let mut step = val / der;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            break;
        }
        // Damping: shrink until the residual actually decreases.
        let mut moved = false;
        for _ in 0..8 {
            let zn = z - step;
            let (vn, dn) = f(zn);
            if vn.norm() < val.norm() {
                z = zn;
                val = vn;
                der = dn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if val.norm() <= target {
        Some(z)
    } else {
        None
    }
}

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

/// Counterclockwise boundary of a rectangle, parametrized over `[0, 1)` with
/// one quarter of the parameter per edge.
fn rect_path(r: &Rect) -> impl Fn(f64) -> Complex64 {
    let r = *r;
    move |t: f64| {
        let s = t * 4.0;
        let k = (s.floor() as usize).min(3);
        let u = s - k as f64;
        match k {
            0 => Complex64::new(r.x0 + (r.x1 - r.x0) * u, r.y0),
            1 => Complex64::new(r.x1, r.y0 + (r.y1 - r.y0) * u),
            2 => Complex64::new(r.x1 - (r.x1 - r.x0) * u, r.y1),
            _ => Complex64::new(r.x0, r.y1 - (r.y1 - r.y0) * u),
        }
    }
}

/// Recursive tiling of a rectangle whose boundary count is already known.
/// Tiles never overlap, so each zero is reported exactly once; a leaf that
/// still holds several zeros is an unresolved cluster reported at its
/// centroid with the full multiplicity.
fn cover_rect(
    f: &dyn Fn(Complex64) -> (Complex64, Complex64),
    r: &Rect,
    count: i64,
    target: f64,
    depth: usize,
    out: &mut Vec<(Complex64, usize)>,
) -> Result<(), NumericsError> {
    if count <= 0 {
        return Ok(());
    }
    if depth > 60 {
        return Err(NumericsError::ContourUnresolved);
    }
    let g = |z: Complex64| f(z).0;
    let (w, h) = (r.x1 - r.x0, r.y1 - r.y0);
    let (cx, cy) = ((r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0);
    if w.max(h) < 1e-7 {
        // Cluster leaf: localize by the first moment of the zeros inside,
        // contour integral of z g'/g over 2 pi i, divided by the count. If
        // the probe fails this close to the
        // zeros, the center is still within the leaf diameter of all of them.
        let z = match path_winding(&g, &rect_path(r), 1 << 12) {
            Ok((_, probe)) => path_moment(&probe) / count as f64,
            Err(_) => Complex64::new(cx, cy),
        };
        out.push((z, count as usize));
        return Ok(());
    }
    if count == 1 {
        if let Some(z) = newton_polish(f, Complex64::new(cx, cy), target) {
            // Accept only inside this tile; a polish that drifted into a
            // neighbor would both double-count it and orphan ours.
            if z.re > r.x0 && z.re < r.x1 && z.im > r.y0 && z.im < r.y1 {
                out.push((z, 1));
                return Ok(());
            }
        }
    }
    // Split into four exact sub-tiles. A zero sitting on a split line stalls
    // the child counts, so retry with the cross shifted off-center.
    const OFFS: [(f64, f64); 5] = [
        (0.0, 0.0),
        (0.083, 0.047),
        (-0.071, 0.059),
        (0.049, -0.088),
        (-0.064, -0.077),
    ];
    'split: for (ox, oy) in OFFS {
        let sx = cx + ox * w;
        let sy = cy + oy * h;
        let quads = [
            Rect { x0: r.x0, x1: sx, y0: r.y0, y1: sy },
            Rect { x0: sx, x1: r.x1, y0: r.y0, y1: sy },
            Rect { x0: r.x0, x1: sx, y0: sy, y1: r.y1 },
            Rect { x0: sx, x1: r.x1, y0: sy, y1: r.y1 },
        ];
        let mut counts = [0i64; 4];
        for (i, q) in quads.iter().enumerate() {
            // A zero on or near a child edge shows up as either error kind;
            // both mean "this cross is badly placed", so move it and retry.
            match path_winding(&g, &rect_path(q), 1 << 16) {
                Ok((c, _)) => counts[i] = c,
                Err(NumericsError::RootOnContour | NumericsError::ContourUnresolved) => {
                    continue 'split
                }
                Err(e) => return Err(e),
            }
        }
        if counts.iter().sum::<i64>() != count {
            continue 'split;
        }
        for (q, c) in quads.iter().zip(counts) {
            cover_rect(f, q, c, target, depth + 1, out)?;
        }
        return Ok(());
    }
    Err(NumericsError::ContourUnresolved)
}

/// Samples of g along a closed path, refined until every successive phase
/// step is below pi/2 so the discrete winding number is trustworthy.
struct PathProbe {
    zs: Vec<Complex64>,
    gs: Vec<Complex64>,
    gmax: f64,
}

/// Argument-principle count of zeros enclosed by the path, with the probe
/// that produced it. A near-zero of g on the path itself is `RootOnContour`;
/// refinement past `max_m` samples is `ContourUnresolved`.
fn path_winding(
    g: &dyn Fn(Complex64) -> Complex64,
    path: &dyn Fn(f64) -> Complex64,
    max_m: usize,
) -> Result<(i64, PathProbe), NumericsError> {
    let mut m = 64usize;
    loop {
        let mut zs = Vec::with_capacity(m);
        let mut gs = Vec::with_capacity(m);
        let mut gmax: f64 = 0.0;
        let mut gmin = f64::INFINITY;
        let mut kmin = 0usize;
        for k in 0..m {
            let z = path(k as f64 / m as f64);
            let v = g(z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(NumericsError::NonFinite("contour sample"));
            }
            gmax = gmax.max(v.norm());
            if v.norm() < gmin {
                gmin = v.norm();
                kmin = k;
            }
            zs.push(z);
            gs.push(v);
        }
        if gmin <= 1e-290 || gmin < 1e-13 * gmax {
            return Err(NumericsError::RootOnContour);
        }
        // Once the path is finely sampled, |g|/|g'| at the minimum estimates
        // the distance to the nearest zero. A zero within a fraction of one
        // sample spacing would force refinement far past any cap, so report
        // it as on the contour and let the caller move the path instead.
        if m >= 8192 {
            let prev = (kmin + m - 1) % m;
            let next = (kmin + 1) % m;
            let slope = ((gs[next] - gs[kmin]).norm() / (zs[next] - zs[kmin]).norm())
                .max((gs[kmin] - gs[prev]).norm() / (zs[kmin] - zs[prev]).norm());
            let spacing = (zs[next] - zs[kmin]).norm();
            if slope > 0.0 && gmin < 0.35 * slope * spacing {
                return Err(NumericsError::RootOnContour);
            }
        }
        let mut total = 0.0f64;
        let mut ok = true;
        for k in 0..m {
            let (a, b) = (gs[k], gs[(k + 1) % m]);
            let d = (b / a).arg();
            // The angle bound alone can alias: a full turn between adjacent
            // samples folds to a small principal value. Passing near a zero
            // always dents |g|, so also require the magnitude to move slowly.
            if d.abs() > std::f64::consts::FRAC_PI_2
                || (b - a).norm() > 0.9 * a.norm().min(b.norm())
            {
                ok = false;
                break;
            }
            total += d;
        }
        if ok {
            let turns = total / (2.0 * std::f64::consts::PI);
            let rounded = turns.round();
            if (turns - rounded).abs() <= 0.1 {
                return Ok((rounded as i64, PathProbe { zs, gs, gmax }));
            }
        }
        m *= 2;
        if m > max_m {
            return Err(NumericsError::ContourUnresolved);
        }
    }
}

/// `(1/(2 pi i)) int z d(log g)` over the probe's path: the sum of the enclosed
/// zeros. Uses the discrete log increments that the probe already certified
/// to be small, so no derivative of g is needed.
fn path_moment(probe: &PathProbe) -> Complex64 {
    let m = probe.zs.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..m {
        let (za, zb) = (probe.zs[k], probe.zs[(k + 1) % m]);
        let (ga, gb) = (probe.gs[k], probe.gs[(k + 1) % m]);
        let ratio = gb / ga;
        let dlog = Complex64::new(ratio.norm().ln(), ratio.arg());
        acc += (za + zb) * 0.5 * dlog;
    }
    acc / Complex64::new(0.0, 2.0 * std::f64::consts::PI)
}
