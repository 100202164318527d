//! Matrix exponential and the finite-horizon Laplace kernel built on it.

use num_complex::Complex64;

use super::jet::Jet;
use super::matrix::SquareMatrix;
use super::NumericsError;

/// Norm threshold after scaling; Taylor converges fast below it and the
/// squaring count stays small for every matrix this crate produces.
const SCALING_THETA: f64 = 0.25;
const MAX_TAYLOR_TERMS: usize = 40;

/// `exp(M * t)` by scaling-and-squaring with an error-controlled Taylor sum.
///
/// Entries may be jets; the scaling norm includes derivative coefficients, so
/// truncation control covers them too. With the post-scaling norm at 0.25 the
/// Taylor remainder is far below 1e-16 before squaring amplification.
pub fn mat_exp(m: &SquareMatrix, t: f64) -> Result<SquareMatrix, NumericsError> {
    if !m.is_finite() || !t.is_finite() {
        return Err(NumericsError::NonFinite("mat_exp input"));
    }
    let a = m.scale_complex(Complex64::new(t, 0.0));
    let norm = a.norm();
    let squarings = if norm <= SCALING_THETA {
        0
    } else {
        (norm / SCALING_THETA).log2().ceil() as u32
    };
    let r = a.scale_complex(Complex64::new(0.5f64.powi(squarings as i32), 0.0));

    let mut sum = SquareMatrix::identity(m.n());
    let mut term = SquareMatrix::identity(m.n());
    for k in 1..=MAX_TAYLOR_TERMS {
        term = term.matmul(&r).scale_complex(Complex64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.norm() <= 1e-18 * sum.norm().max(1.0) {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if !result.is_finite() {
        return Err(NumericsError::NonFinite("mat_exp result"));
    }
    Ok(result)
}

/// `int_0^T exp((M - sI) t) dt`, valid even when `M - sI` is singular.
///
/// Computed from the exponential of the augmented block matrix
/// `[[(M-sI)T, IT], [0, 0]]`: its top-right block is the integral. `s` may be
/// a jet, in which case the integral carries derivatives with respect to s.
pub fn transient_integral(
    m: &SquareMatrix,
    s: &Jet,
    t_end: f64,
) -> Result<SquareMatrix, NumericsError> {
    if t_end < 0.0 || !t_end.is_finite() {
        return Err(NumericsError::NegativeDuration(t_end));
    }
    let n = m.n();
    let shifted = m.sub(&SquareMatrix::identity(n).scale_jet(s));
    let mut aug = SquareMatrix::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, shifted.get(i, j).clone());
        }
        aug.set(i, n + i, Jet::constant(1.0));
    }
    let e = mat_exp(&aug, t_end)?;
    Ok(SquareMatrix::from_fn(n, |i, j| e.get(i, n + j).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_zero_is_identity() {
        let z = SquareMatrix::zero(3);
        let e = mat_exp(&z, 5.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e.get(i, j).value() - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let d = SquareMatrix::diag_real(&[-1.0, -2.0]);
        let e = mat_exp(&d, 1.0).unwrap();
        assert!((e.get(0, 0).value().re - (-1.0f64).exp()).abs() < 1e-14);
        assert!((e.get(1, 1).value().re - (-2.0f64).exp()).abs() < 1e-14);
        assert!(e.get(0, 1).value().norm() < 1e-16);
    }

    #[test]
    fn transient_integral_zero_matrix_zero_s() {
        let z = SquareMatrix::zero(2);
        let s = Jet::constant(0.0);
        let i3 = transient_integral(&z, &s, 3.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { 3.0 } else { 0.0 };
                assert!((i3.get(r, c).value().re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transient_integral_large_t_approaches_one_over_s() {
        // M = 0, s = 1: integral over [0, T] of e^{-t} -> 1.
        let z = SquareMatrix::zero(1);
        let s = Jet::constant(1.0);
        let v = transient_integral(&z, &s, 60.0).unwrap();
        assert!((v.get(0, 0).value().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_closed_form_with_jet_s() {
        // N=1, M = -q: integral = (1 - e^{-(s+q)T})/(s+q), including derivatives.
        let q = 0.35;
        let t_end = 4.0;
        let m = SquareMatrix::from_real_rows(1, &[-q]);
        let s = Jet::variable(0.2, 3);
        let got = transient_integral(&m, &s, t_end).unwrap();
        let spq = &s + &Jet::constant(q);
        let want = (&Jet::constant_at(1.0, 3)
            - &spq.scale(Complex64::new(-t_end, 0.0)).exp())
            .try_div(&spq)
            .unwrap();
        for k in 0..=3 {
            assert!(
                (got.get(0, 0).coeff(k) - want.coeff(k)).norm() < 1e-12,
                "k={k}"
            );
        }
    }

    #[test]
    fn negative_duration_is_an_error() {
        let z = SquareMatrix::zero(1);
        assert!(transient_integral(&z, &Jet::constant(0.0), -1.0).is_err());
    }
}
