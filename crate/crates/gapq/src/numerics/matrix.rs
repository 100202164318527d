//! Small dense square matrices with [`Jet`] entries.
//!
//! Everything in the transform pipeline is an N-by-N matrix whose entries
//! carry derivatives, so the one matrix type stores jets; plain complex
//! matrices are the order-0 special case. Sizes stay tiny (N phases, or 2N
//! for the augmented exponential), so the representation is a flat row-major
//! `Vec` and the algorithms are the straightforward cubic ones.

use num_complex::Complex64;

use super::jet::Jet;

#[derive(Clone, Debug)]
pub struct SquareMatrix {
    n: usize,
    e: Vec<Jet>,
}

impl SquareMatrix {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1);
        SquareMatrix {
            n,
            e: vec![Jet::constant(0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.e[i * n + i] = Jet::constant(1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut e = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                e.push(f(i, j));
            }
        }
        SquareMatrix { n, e }
    }

    /// Order-0 matrix from row-major real entries.
    pub fn from_real_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n);
        SquareMatrix {
            n,
            e: rows.iter().map(|&v| Jet::constant(v)).collect(),
        }
    }

    pub fn diag_real(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zero(n);
        for i in 0..n {
            m.e[i * n + i] = Jet::constant(d[i]);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Jet) {
        self.e[i * self.n + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(Jet::is_finite)
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> SquareMatrix {
        SquareMatrix {
            n: self.n,
            e: self.e.iter().map(f).collect(),
        }
    }

    pub fn add(&self, o: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, o.n);
        SquareMatrix {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, o.n);
        SquareMatrix {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, o: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, o.n);
        let n = self.n;
        SquareMatrix::from_fn(n, |i, j| {
            let mut acc = self.get(i, 0) * o.get(0, j);
            for k in 1..n {
                acc = &acc + &(self.get(i, k) * o.get(k, j));
            }
            acc
        })
    }

    pub fn scale_complex(&self, k: Complex64) -> SquareMatrix {
        self.map(|j| j.scale(k))
    }

    pub fn scale_jet(&self, k: &Jet) -> SquareMatrix {
        self.map(|j| j * k)
    }

    /// Right-multiply by diag(d).
    pub fn mul_diag_real(&self, d: &[f64]) -> SquareMatrix {
        assert_eq!(d.len(), self.n);
        SquareMatrix::from_fn(self.n, |i, j| self.get(i, j).scale(Complex64::new(d[j], 0.0)))
    }

    /// Row vector times matrix.
    pub fn row_vec_mul(row: &[Jet], m: &SquareMatrix) -> Vec<Jet> {
        assert_eq!(row.len(), m.n);
        (0..m.n)
            .map(|j| {
                let mut acc = &row[0] * m.get(0, j);
                for k in 1..m.n {
                    acc = &acc + &(&row[k] * m.get(k, j));
                }
                acc
            })
            .collect()
    }

    /// Matrix times column vector.
    pub fn mul_col_vec(&self, col: &[Jet]) -> Vec<Jet> {
        assert_eq!(col.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = self.get(i, 0) * &col[0];
                for k in 1..self.n {
                    acc = &acc + &(self.get(i, k) * &col[k]);
                }
                acc
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<Jet> {
        (0..self.n)
            .map(|i| {
                let mut acc = self.get(i, 0).clone();
                for j in 1..self.n {
                    acc = &acc + self.get(i, j);
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> SquareMatrix {
        SquareMatrix::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    /// Induced infinity-style norm: max row sum of entry 1-norms.
    pub fn norm(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).norm1()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Constant parts as a plain complex matrix (row-major).
    pub fn constant_part(&self) -> Vec<Complex64> {
        self.e.iter().map(Jet::value).collect()
    }

    /// Characteristic polynomial `det(xI - A) = x^n + p[1] x^(n-1) + ... + p[n]`
    /// by the Faddeev-LeVerrier recursion. Division-free except by integers,
    /// so it is safe on jets with singular constant part.
    pub fn char_poly(&self) -> Vec<Jet> {
        let n = self.n;
        let mut coeffs = vec![Jet::constant(1.0)];
        let mut m = SquareMatrix::identity(n);
        for k in 1..=n {
            m = self.matmul(&m);
            // trace / k
            let mut tr = m.get(0, 0).clone();
            for i in 1..n {
                tr = &tr + m.get(i, i);
            }
            let ck = tr.scale(Complex64::new(-1.0 / k as f64, 0.0));
            for i in 0..n {
                let d = m.get(i, i) + &ck;
                m.set(i, i, d);
            }
            coeffs.push(ck);
        }
        coeffs
    }

    /// det(A) from the characteristic polynomial: `det = (-1)^n p[n]`.
    pub fn det(&self) -> Jet {
        let p = self.char_poly();
        let sign = if self.n % 2 == 0 { 1.0 } else { -1.0 };
        p[self.n].scale(Complex64::new(sign, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_multiplication() {
        let a = SquareMatrix::from_real_rows(2, &[1.0, 2.0, 3.0, 4.0]);
        let i = SquareMatrix::identity(2);
        let p = a.matmul(&i);
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(p.get(r, c).value(), a.get(r, c).value());
            }
        }
    }

    #[test]
    fn det_of_diagonal() {
        let a = SquareMatrix::diag_real(&[2.0, 3.0, 4.0]);
        assert!((a.det().value() - Complex64::new(24.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn det_of_singular_with_jet_entries_keeps_derivative() {
        // A(x) = [[x, 0], [0, 1]]: det = x, so at x=0 value 0, derivative 1.
        let x = Jet::variable(0.0, 1);
        let mut a = SquareMatrix::identity(2);
        a.set(0, 0, x);
        let d = a.det();
        assert!(d.value().norm() < 1e-15);
        assert!((d.coeff(1) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn char_poly_of_2x2() {
        // [[1,2],[3,4]]: x^2 - 5x - 2.
        let a = SquareMatrix::from_real_rows(2, &[1.0, 2.0, 3.0, 4.0]);
        let p = a.char_poly();
        assert!((p[1].value() - Complex64::new(-5.0, 0.0)).norm() < 1e-12);
        assert!((p[2].value() - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
    }
}
