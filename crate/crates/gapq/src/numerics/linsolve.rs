//! Linear solves over jet entries, plus null spaces of plain complex
//! matrices (needed at the determinant roots, where the system is singular
//! by construction).

use num_complex::Complex64;

use super::jet::Jet;
use super::matrix::SquareMatrix;
use super::policy::Tolerances;
use super::NumericsError;

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
///
/// Pivots are chosen by constant-term magnitude: a jet is invertible exactly
/// when its constant term is nonzero, so the constant part decides
/// conditioning. Returns an error when the best pivot falls below
/// `pivot_rel_tol` times the row scale.
pub fn solve_linear(
    a: &SquareMatrix,
    b: &[Jet],
    tol: &Tolerances,
) -> Result<Vec<Jet>, NumericsError> {
    let x = solve_many(a, &[b.to_vec()], tol)?;
    Ok(x.into_iter().next().unwrap())
}

/// Solve for several right-hand sides with one factorization pass.
pub fn solve_many(
    a: &SquareMatrix,
    bs: &[Vec<Jet>],
    tol: &Tolerances,
) -> Result<Vec<Vec<Jet>>, NumericsError> {
    let n = a.n();
    let mut m: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).clone()).collect())
        .collect();
    let mut rhs: Vec<Vec<Jet>> = bs.to_vec();
    for r in &rhs {
        assert_eq!(r.len(), n);
    }

    let row_scale: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| m[i][j].value().norm())
                .fold(0.0, f64::max)
                .max(1e-300)
        })
        .collect();
    let mut perm_scale: Vec<f64> = row_scale.clone();

    for col in 0..n {
        let (piv, piv_mag) = (col..n)
            .map(|r| (r, m[r][col].value().norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if piv_mag < tol.pivot_rel_tol * perm_scale[piv] {
            return Err(NumericsError::SingularMatrix {
                pivot: piv_mag,
                scale: perm_scale[piv],
            });
        }
        m.swap(col, piv);
        perm_scale.swap(col, piv);
        for r in &mut rhs {
            r.swap(col, piv);
        }
        let inv_piv = m[col][col].try_recip()?;
        for r in (col + 1)..n {
            let factor = &m[r][col] * &inv_piv;
            if factor.norm1() == 0.0 {
                continue;
            }
            for c2 in col..n {
                let upd = &m[r][c2] - &(&factor * &m[col][c2]);
                m[r][c2] = upd;
            }
            for rhsv in &mut rhs {
                let upd = &rhsv[r] - &(&factor * &rhsv[col]);
                rhsv[r] = upd;
            }
        }
    }

    let mut solutions = Vec::with_capacity(rhs.len());
    for rhsv in &rhs {
        let mut x = vec![Jet::constant(0.0); n];
        for row in (0..n).rev() {
            let mut acc = rhsv[row].clone();
            for c2 in (row + 1)..n {
                acc = &acc - &(&m[row][c2] * &x[c2]);
            }
            x[row] = acc.try_div(&m[row][row])?;
        }
        solutions.push(x);
    }

    // Residual check on constant terms; one refinement attempt is not needed
    // at these sizes, so a failure is surfaced instead.
    for (x, b) in solutions.iter().zip(bs) {
        let ax = a.mul_col_vec(x);
        let bnorm: f64 = b.iter().map(|j| j.value().norm()).sum::<f64>().max(1.0);
        let res: f64 = ax
            .iter()
            .zip(b)
            .map(|(l, r)| (l.value() - r.value()).norm())
            .sum();
        if res > tol.linear_residual * bnorm * a.n() as f64 {
            return Err(NumericsError::ResidualTooLarge { residual: res });
        }
    }
    Ok(solutions)
}

/// Inverse via n simultaneous solves.
pub fn invert(a: &SquareMatrix, tol: &Tolerances) -> Result<SquareMatrix, NumericsError> {
    let n = a.n();
    let cols: Vec<Vec<Jet>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| Jet::constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let sols = solve_many(a, &cols, tol)?;
    Ok(SquareMatrix::from_fn(n, |i, j| sols[j][i].clone()))
}

/// Right null space of a plain complex matrix, by row reduction with
/// full-magnitude pivoting. `rank_tol` is relative to the largest entry.
pub fn null_space(m: &[Complex64], n: usize, rank_tol: f64) -> Vec<Vec<Complex64>> {
    assert_eq!(m.len(), n * n);
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| m[i * n..(i + 1) * n].to_vec()).collect();
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let (piv, mag) = (row..n)
            .map(|r| (r, a[r][col].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((row, 0.0));
        if mag <= rank_tol * scale {
            continue;
        }
        a.swap(row, piv);
        let inv = Complex64::new(1.0, 0.0) / a[row][col];
        for c2 in col..n {
            a[row][c2] *= inv;
        }
        for r2 in 0..n {
            if r2 != row {
                let f = a[r2][col];
                if f.norm() > 0.0 {
                    for c2 in col..n {
                        let sub = f * a[row][c2];
                        a[r2][c2] -= sub;
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == n {
            break;
        }
    }
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    free_cols
        .iter()
        .map(|&fc| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[fc] = Complex64::new(1.0, 0.0);
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -a[r][fc];
            }
            v
        })
        .collect()
}
