//! Service of one minor-road vehicle: scan the major road until a gap of at
//! least the critical headway appears, then cross.
//!
//! A service that starts in phase `i` ends at the crossing instant; the
//! matrix transform `G[i][j](s) = E[e^{-s G}; phase j at crossing | phase i]`
//! carries both the service length and the phase coupling to the next
//! service. Three driver behaviors:
//!
//! * `Constant`: every attempt needs the same headway `T`. A failed attempt
//!   restarts the scan at the arrival that blocked it, so
//!   `G(s) = (I - psi_hat(s, T))^{-1} e^{-sT} phi(T)`.
//! * `Inconsistent`: the driver samples a fresh headway from a finite
//!   mixture at every attempt; the mixture averages inside the resolvent.
//! * `Consistent`: the driver samples one headway per vehicle and keeps it,
//!   so the constant-headway transform is averaged over the mixture.
//!
//! The first vehicle of a busy period starts scanning at its own arrival
//! epoch rather than at a major-road arrival; conditioning the phase through
//! one exponential interarrival gives the exceptional transform
//! `G*(s) = Pbar G(s)`.

use num_complex::Complex64;

use crate::numerics::{
    invert, null_space, Jet, NumericsError, SquareMatrix, Tolerances,
};
use crate::phase::PhaseProcess;
use crate::ModelError;

/// Finite mixture of critical headways, seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct GapMixture {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl GapMixture {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if points.is_empty() {
            return Err(ModelError::EmptyGapMixture);
        }
        let mut values = Vec::with_capacity(points.len());
        let mut probs = Vec::with_capacity(points.len());
        for (index, &(value, prob)) in points.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::NonPositiveHeadway { index, value });
            }
            if !prob.is_finite() || prob <= 0.0 {
                return Err(ModelError::NonPositiveGapWeight {
                    index,
                    weight: prob,
                });
            }
            values.push(value);
            probs.push(prob);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::GapWeightsNotNormalized { sum });
        }
        // Remove the last rounding residue so mixture sums are exact.
        for p in &mut probs {
            *p /= sum;
        }
        Ok(Self { values, probs })
    }

    pub fn single(value: f64) -> Result<Self, ModelError> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(v, p)| v * p).sum()
    }
}

/// Driver behavior at the head of the minor-road queue.
#[derive(Clone, Debug)]
pub enum GapPolicy {
    /// Same critical headway on every attempt.
    Constant { headway: f64 },
    /// Fresh headway sampled from the mixture at every attempt.
    Inconsistent { gaps: GapMixture },
    /// One headway sampled per vehicle and kept for all its attempts.
    Consistent { gaps: GapMixture },
}

impl GapPolicy {
    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        if let GapPolicy::Constant { headway } = self {
            if !headway.is_finite() || *headway <= 0.0 {
                return Err(ModelError::NonPositiveHeadway {
                    index: 0,
                    value: *headway,
                });
            }
        }
        Ok(())
    }
}

/// Service transform machinery for one road and one driver behavior.
#[derive(Clone, Debug)]
pub struct ServiceTransform {
    road: PhaseProcess,
    policy: GapPolicy,
}

impl ServiceTransform {
    pub fn new(road: PhaseProcess, policy: GapPolicy) -> Result<Self, ModelError> {
        policy.validate()?;
        Ok(Self { road, policy })
    }

    pub fn road(&self) -> &PhaseProcess {
        &self.road
    }

    pub fn policy(&self) -> &GapPolicy {
        &self.policy
    }

    pub fn n_phases(&self) -> usize {
        self.road.n_phases()
    }

    /// `G(s)`: transform of a service that starts at a major-road arrival.
    pub fn transform(&self, s: &Jet) -> Result<SquareMatrix, NumericsError> {
        let tol = Tolerances::default();
        match &self.policy {
            GapPolicy::Constant { headway } => self.blocked_resolvent(s, &[(*headway, 1.0)], &tol),
            GapPolicy::Inconsistent { gaps } => {
                let pts: Vec<(f64, f64)> = gaps.points().collect();
                self.blocked_resolvent(s, &pts, &tol)
            }
            GapPolicy::Consistent { gaps } => {
                let n = self.n_phases();
                let mut acc = SquareMatrix::zero(n);
                for (value, prob) in gaps.points() {
                    let one = self.blocked_resolvent(s, &[(value, 1.0)], &tol)?;
                    acc = acc.add(&one.scale_complex(Complex64::new(prob, 0.0)));
                }
                Ok(acc)
            }
        }
    }

    /// Shared core: with attempt headways drawn independently from `points`,
    /// `G(s) = (I - sum_k p_k psi_hat(s, T_k))^{-1} sum_k p_k e^{-s T_k} phi(T_k)`.
    fn blocked_resolvent(
        &self,
        s: &Jet,
        points: &[(f64, f64)],
        tol: &Tolerances,
    ) -> Result<SquareMatrix, NumericsError> {
        let n = self.n_phases();
        let mut blocked = SquareMatrix::zero(n);
        let mut crossed = SquareMatrix::zero(n);
        for &(t, p) in points {
            let w = Complex64::new(p, 0.0);
            blocked = blocked.add(&self.road.psi_hat(s, t)?.scale_complex(w));
            // e^{-sT} as a jet in s multiplies the whole phi(T) block.
            let decay = s.scale(Complex64::new(-t, 0.0)).exp();
            crossed = crossed.add(&self.road.phi(t)?.scale_jet(&decay).scale_complex(w));
        }
        let resolvent = invert(&SquareMatrix::identity(n).sub(&blocked), tol)?;
        Ok(resolvent.matmul(&crossed))
    }

    /// `G*(s) = Pbar G(s)`: the first service of a busy period, whose scan
    /// starts at the vehicle's own arrival. `lambda` is the minor-road batch
    /// arrival rate per second.
    pub fn exceptional_transform(
        &self,
        s: &Jet,
        lambda: f64,
    ) -> Result<SquareMatrix, NumericsError> {
        let pbar = self.road.phase_at_exponential(lambda)?;
        Ok(pbar.matmul(&self.transform(s)?))
    }

    /// Stationary distribution of the phase seen at service starts, i.e. of
    /// the stochastic kernel `G(0)`.
    pub fn start_phase_stationary(&self) -> Result<Vec<f64>, ModelError> {
        let n = self.n_phases();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let kernel = self.transform(&Jet::constant(Complex64::new(0.0, 0.0)))?;
        // Left null vector of (kernel - I), via the transpose.
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let v = kernel.get(j, i).value();
                m[i * n + j] = v - if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            }
        }
        let basis = null_space(&m, n, 1e-10);
        if basis.len() != 1 {
            return Err(ModelError::StationaryVectorNotUnique {
                dimension: basis.len(),
            });
        }
        let total: f64 = basis[0].iter().map(|c| c.re).sum();
        let theta: Vec<f64> = basis[0].iter().map(|c| c.re / total).collect();
        if theta.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(ModelError::StationaryVectorNotPositive);
        }
        Ok(theta)
    }

    /// Raw moments `E[G^m]` for `m = 1..=order` of the stationary service
    /// time, from the jet of `theta G(s) 1` at `s = 0`.
    pub fn service_moments(&self, order: usize) -> Result<Vec<f64>, ModelError> {
        let theta = self.start_phase_stationary()?;
        let s = Jet::variable(Complex64::new(0.0, 0.0), order);
        let g = self.transform(&s)?;
        let mut scalar = Jet::constant_at(Complex64::new(0.0, 0.0), order);
        for i in 0..self.n_phases() {
            for j in 0..self.n_phases() {
                scalar = &scalar + &g.get(i, j).scale(Complex64::new(theta[i], 0.0));
            }
        }
        let mut out = Vec::with_capacity(order);
        let mut factorial = 1.0;
        for m in 1..=order {
            factorial *= m as f64;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out.push(sign * factorial * scalar.coeff(m).re);
        }
        Ok(out)
    }

    /// Mean stationary service time, seconds.
    pub fn mean_service(&self) -> Result<f64, ModelError> {
        Ok(self.service_moments(1)?[0])
    }
}
