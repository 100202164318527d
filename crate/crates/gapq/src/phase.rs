//! The major road: Poisson traffic whose rate is modulated by a background
//! continuous-time Markov chain.
//!
//! While the environment sits in phase `i`, cars pass a fixed point of the
//! major road as a Poisson stream with rate `rates[i]` (per second). The
//! phase jumps according to the conservative generator `generator`. Two
//! kernels drive everything downstream:
//!
//! * `phi(t)`: entry `(i, j)` is the probability that no car passes during
//!   `[0, t]` and the phase is `j` at time `t`, starting from phase `i`.
//! * `psi(t)`: entry `(i, j)` is the density of the first passing car
//!   arriving at time `t` with the phase then being `j`.
//!
//! `phi` solves the linear system with the arrival-killed generator
//! `generator - diag(rates)`, and `psi(t) = phi(t) diag(rates)`.

use num_complex::Complex64;

use crate::numerics::{
    mat_exp, null_space, transient_integral, Jet, NumericsError, SquareMatrix,
};
use crate::ModelError;

/// Markov-modulated Poisson process for the high-priority stream.
#[derive(Clone, Debug)]
pub struct PhaseProcess {
    n: usize,
    /// Row-major conservative generator; rows sum to zero.
    generator: Vec<f64>,
    /// Poisson rate per phase, cars per second.
    rates: Vec<f64>,
}

impl PhaseProcess {
    pub fn new(generator: Vec<Vec<f64>>, rates: Vec<f64>) -> Result<Self, ModelError> {
        let n = generator.len();
        if n == 0 {
            return Err(ModelError::EmptyPhaseSet);
        }
        if generator.iter().any(|row| row.len() != n) {
            return Err(ModelError::GeneratorNotSquare);
        }
        if rates.len() != n {
            return Err(ModelError::RateCountMismatch {
                rates: rates.len(),
                phases: n,
            });
        }
        let scale = generator
            .iter()
            .flatten()
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in generator.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ModelError::NonFiniteGeneratorEntry { row: i, col: j });
                }
                if i != j && v < 0.0 {
                    return Err(ModelError::NegativeTransitionRate { row: i, col: j });
                }
                if i == j && v > 0.0 {
                    return Err(ModelError::PositiveDiagonal { row: i });
                }
                sum += v;
            }
            if sum.abs() > 1e-9 * scale {
                return Err(ModelError::RowSumNotZero { row: i, sum });
            }
            flat.extend_from_slice(row);
        }
        for (i, &q) in rates.iter().enumerate() {
            if !q.is_finite() || q < 0.0 {
                return Err(ModelError::NegativeFlowRate { phase: i, rate: q });
            }
        }
        let p = Self {
            n,
            generator: flat,
            rates,
        };
        if !p.strongly_connected() {
            return Err(ModelError::ReduciblePhaseGraph);
        }
        Ok(p)
    }

    /// Two phases with sojourn rates `mu1`, `mu2` and flow rates `q1`, `q2`.
    pub fn two_phase(mu1: f64, mu2: f64, q1: f64, q2: f64) -> Result<Self, ModelError> {
        Self::new(
            vec![vec![-mu1, mu1], vec![mu2, -mu2]],
            vec![q1, q2],
        )
    }

    /// A single phase: plain Poisson traffic with rate `q`.
    pub fn poisson(q: f64) -> Result<Self, ModelError> {
        Self::new(vec![vec![0.0]], vec![q])
    }

    pub fn n_phases(&self) -> usize {
        self.n
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn generator_entry(&self, i: usize, j: usize) -> f64 {
        self.generator[i * self.n + j]
    }

    /// Total jump-out rate of phase `i`.
    pub fn sojourn_rate(&self, i: usize) -> f64 {
        -self.generator_entry(i, i)
    }

    /// Probability that the first jump out of phase `i` lands in each phase.
    /// Zero vector entry at `i`; caller must not sample when the sojourn rate
    /// vanishes (single-phase processes never jump).
    pub fn jump_probabilities(&self, i: usize) -> Vec<f64> {
        let mu = self.sojourn_rate(i);
        (0..self.n)
            .map(|j| {
                if j == i || mu == 0.0 {
                    0.0
                } else {
                    self.generator_entry(i, j) / mu
                }
            })
            .collect()
    }

    /// Generator of the phase process killed at the first passing car:
    /// `generator - diag(rates)`.
    fn killed_generator(&self) -> SquareMatrix {
        let mut m = SquareMatrix::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut v = self.generator_entry(i, j);
                if i == j {
                    v -= self.rates[i];
                }
                m.set(i, j, Jet::constant(Complex64::new(v, 0.0)));
            }
        }
        m
    }

    /// `phi(t)`: no car passes in `[0, t]`, phase `j` at `t`, from phase `i`.
    pub fn phi(&self, t: f64) -> Result<SquareMatrix, NumericsError> {
        mat_exp(&self.killed_generator(), t)
    }

    /// `psi(t) = phi(t) diag(rates)`: first-car density at `t` in phase `j`.
    pub fn psi(&self, t: f64) -> Result<SquareMatrix, NumericsError> {
        Ok(self.phi(t)?.mul_diag_real(&self.rates))
    }

    /// Laplace transform of `psi` truncated at `t`:
    /// `int_0^t e^{-su} psi(u) du`, entrywise in the jet variable `s`.
    pub fn psi_hat(&self, s: &Jet, t: f64) -> Result<SquareMatrix, NumericsError> {
        Ok(transient_integral(&self.killed_generator(), s, t)?.mul_diag_real(&self.rates))
    }

    /// Stationary phase distribution of the generator.
    pub fn stationary(&self) -> Result<Vec<f64>, ModelError> {
        if self.n == 1 {
            return Ok(vec![1.0]);
        }
        // Left null vector of the generator = null space of its transpose.
        let mut qt = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        let mut scale = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.generator_entry(j, i);
                scale = scale.max(v.abs());
                qt[i * self.n + j] = Complex64::new(v, 0.0);
            }
        }
        let basis = null_space(&qt, self.n, 1e-10 * scale.max(1.0));
        if basis.len() != 1 {
            // Irreducibility was checked at construction, so a degenerate
            // null space can only come from numerical trouble.
            return Err(ModelError::StationaryVectorNotUnique {
                dimension: basis.len(),
            });
        }
        let total: f64 = basis[0].iter().map(|c| c.re).sum();
        let pi: Vec<f64> = basis[0].iter().map(|c| c.re / total).collect();
        if pi.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(ModelError::StationaryVectorNotPositive);
        }
        Ok(pi)
    }

    /// Long-run car flow rate on the major road, cars per second.
    pub fn mean_flow_rate(&self) -> Result<f64, ModelError> {
        let pi = self.stationary()?;
        Ok(pi
            .iter()
            .zip(&self.rates)
            .map(|(p, q)| p * q)
            .sum())
    }

    /// Phase transition kernel over one exponential clock with rate
    /// `lambda`: entry `(i, k)` is the probability of seeing phase `k` at
    /// the clock's ring, starting from phase `i`. Equals
    /// `(I - generator/lambda)^{-1}`; strict diagonal dominance makes the
    /// inverse safe for every `lambda > 0`.
    pub fn phase_at_exponential(&self, lambda: f64) -> Result<SquareMatrix, NumericsError> {
        let mut m = SquareMatrix::identity(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = if i == j { 1.0 } else { 0.0 } - self.generator_entry(i, j) / lambda;
                m.set(i, j, Jet::constant(Complex64::new(v, 0.0)));
            }
        }
        crate::numerics::invert(&m, &crate::numerics::Tolerances::default())
    }

    /// Strong connectivity of the jump graph (edges where the rate is
    /// positive), by forward and backward breadth-first search from phase 0.
    fn strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..self.n {
                    let edge = if forward {
                        self.generator_entry(i, j)
                    } else {
                        self.generator_entry(j, i)
                    };
                    if i != j && edge > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Example traffic mix used throughout the tests: mean sojourns of one
    /// and four minutes, flow rates of 150 and 50 cars per hour.
    fn two_phase_road() -> PhaseProcess {
        PhaseProcess::two_phase(1.0 / 60.0, 1.0 / 240.0, 150.0 / 3600.0, 50.0 / 3600.0)
            .unwrap()
    }

    /// Independent closed form for the two-phase `phi(t)`: the resolvent of
    /// the killed generator has two real distinct non-positive poles
    /// `w1 > w2`, and partial fractions give each entry as a mix of
    /// `e^{w1 t}` and `e^{w2 t}`.
    fn phi_closed_form(
        q1: f64,
        q2: f64,
        mu1: f64,
        mu2: f64,
        t: f64,
    ) -> [[f64; 2]; 2] {
        let b = q1 + mu1 + q2 + mu2;
        let disc = (q1 * q1 + q2 * q2 + mu1 * mu1 + mu2 * mu2 + 2.0 * q1 * mu1
            + 2.0 * mu1 * mu2
            + 2.0 * q2 * mu2
            - 2.0 * mu1 * q2
            - 2.0 * q1 * mu2
            - 2.0 * q1 * q2)
            .sqrt();
        let w1 = (-b + disc) / 2.0;
        let w2 = (-b - disc) / 2.0;
        let (e1, e2) = ((w1 * t).exp(), (w2 * t).exp());
        let d = w1 - w2;
        let diag = |qo: f64, muo: f64| ((w1 + qo + muo) * e1 - (w2 + qo + muo) * e2) / d;
        [
            [diag(q2, mu2), mu1 * (e1 - e2) / d],
            [mu2 * (e1 - e2) / d, diag(q1, mu1)],
        ]
    }

    #[test]
    fn phi_matches_two_phase_closed_form() {
        let road = two_phase_road();
        let (q1, q2) = (150.0 / 3600.0, 50.0 / 3600.0);
        let (mu1, mu2) = (1.0 / 60.0, 1.0 / 240.0);
        for &t in &[1.0, 7.0, 30.0] {
            let got = road.phi(t).unwrap();
            let want = phi_closed_form(q1, q2, mu1, mu2, t);
            for i in 0..2 {
                for j in 0..2 {
                    let g = got.get(i, j).value().re;
                    assert!(
                        (g - want[i][j]).abs() < 1e-12,
                        "phi[{i}][{j}](t={t}): got {g}, want {}",
                        want[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn psi_is_phi_times_rates() {
        let road = two_phase_road();
        let phi = road.phi(7.0).unwrap();
        let psi = road.psi(7.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = phi.get(i, j).value().re * road.rates()[j];
                assert!((psi.get(i, j).value().re - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn psi_hat_matches_quadrature() {
        let road = two_phase_road();
        let t_end = 7.0;
        let s0 = 0.3;
        let s = Jet::variable(Complex64::new(s0, 0.0), 2);
        let got = road.psi_hat(&s, t_end).unwrap();
        // Simpson quadrature of e^{-st} psi(t) entrywise, 2000 panels.
        let panels = 2000;
        let h = t_end / panels as f64;
        let mut acc = [[0.0f64; 2]; 2];
        let mut dacc = [[0.0f64; 2]; 2];
        for k in 0..=panels {
            let t = k as f64 * h;
            let w = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let psi = road.psi(t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let v = psi.get(i, j).value().re * (-s0 * t).exp();
                    acc[i][j] += w * v;
                    // d/ds of e^{-st} brings down -t.
                    dacc[i][j] += w * v * (-t);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let val = acc[i][j] * h / 3.0;
                let der = dacc[i][j] * h / 3.0;
                assert!(
                    (got.get(i, j).value().re - val).abs() < 1e-8,
                    "value ({i},{j})"
                );
                assert!(
                    (got.get(i, j).derivative(1).re - der).abs() < 1e-8,
                    "derivative ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn stationary_and_mean_flow() {
        let road = two_phase_road();
        let pi = road.stationary().unwrap();
        // pi is proportional to (mu2, mu1).
        assert!((pi[0] - 0.2).abs() < 1e-12);
        assert!((pi[1] - 0.8).abs() < 1e-12);
        let qbar = road.mean_flow_rate().unwrap();
        assert!((qbar - 70.0 / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn phase_at_exponential_symmetric_case() {
        // Symmetric two-phase generator with jump rate equal to the clock
        // rate: the kernel is (1/3) [[2, 1], [1, 2]].
        let lambda = 0.5;
        let road = PhaseProcess::two_phase(lambda, lambda, 1.0, 2.0).unwrap();
        let p = road.phase_at_exponential(lambda).unwrap();
        let want = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.get(i, j).value().re - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_at_exponential_rows_sum_to_one() {
        let road = two_phase_road();
        let p = road.phase_at_exponential(50.0 / 3600.0).unwrap();
        for i in 0..2 {
            let sum: f64 = (0..2).map(|j| p.get(i, j).value().re).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for j in 0..2 {
                assert!(p.get(i, j).value().re >= 0.0);
            }
        }
    }

    #[test]
    fn phi_semigroup_property() {
        let road = two_phase_road();
        let a = road.phi(3.0).unwrap();
        let b = road.phi(4.0).unwrap();
        let ab = a.matmul(&b);
        let c = road.phi(7.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((ab.get(i, j).value() - c.get(i, j).value()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn validation_rejects_bad_generators() {
        assert!(matches!(
            PhaseProcess::new(vec![], vec![]),
            Err(ModelError::EmptyPhaseSet)
        ));
        assert!(matches!(
            PhaseProcess::new(vec![vec![0.0, 0.0]], vec![1.0]),
            Err(ModelError::GeneratorNotSquare)
        ));
        assert!(matches!(
            PhaseProcess::new(
                vec![vec![-1.0, 1.0], vec![1.0, -0.5]],
                vec![1.0, 1.0]
            ),
            Err(ModelError::RowSumNotZero { .. })
        ));
        assert!(matches!(
            PhaseProcess::new(
                vec![vec![-1.0, 1.0], vec![-1.0, 1.0]],
                vec![1.0, 1.0]
            ),
            Err(ModelError::NegativeTransitionRate { .. })
        ));
        assert!(matches!(
            PhaseProcess::new(
                vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                vec![1.0, 1.0]
            ),
            Err(ModelError::ReduciblePhaseGraph)
        ));
        assert!(matches!(
            PhaseProcess::two_phase(1.0, 1.0, -0.1, 1.0),
            Err(ModelError::NegativeFlowRate { .. })
        ));
    }

    #[test]
    fn single_phase_process_is_poisson() {
        let road = PhaseProcess::poisson(0.1).unwrap();
        assert_eq!(road.stationary().unwrap(), vec![1.0]);
        let phi = road.phi(5.0).unwrap();
        assert!((phi.get(0, 0).value().re - (-0.5f64).exp()).abs() < 1e-12);
    }
}
