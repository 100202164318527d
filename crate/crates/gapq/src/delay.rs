//! Waiting and sojourn times of individual minor-road vehicles.
//!
//! Vehicles of one batch cross back to back, so the whole batch behaves as
//! one "super customer" whose service is a batch-size mixture of chained
//! crossing attempts. Solving the embedded chain of super-customer
//! departures and applying the distributional form of Little's law turns
//! the departure-epoch PGF into the super customer's waiting and sojourn
//! transforms. A vehicle in position `m` of its batch then waits its super
//! customer's wait plus the `m - 1` services ahead of it, and position
//! probabilities weight the positions into the delay of an arbitrary
//! vehicle.
//!
//! All transforms are Laplace-Stieltjes, handled as jets in `s` at `s = 0`
//! (or at any regular point); means and variances read off the first two
//! coefficients.

use num_complex::Complex64;

use crate::numerics::{Jet, NumericsError, SquareMatrix, Tolerances};
use crate::queue::{pgf_jets, BatchDistribution, ChainUnit, MarkedPgfSystem, QueueSolution};
use crate::service::ServiceTransform;
use crate::ModelError;

/// Service of one whole batch: `Gsup(s) = E[G(s)^B]`, with the exceptional
/// variant `Gsup*(s) = Pbar Gsup(s)` for the batch opening a busy period.
pub struct SuperServiceTransform {
    sys: MarkedPgfSystem,
}

/// Batch-service transforms for the given vehicle-level service and batch
/// size distribution.
pub fn super_service(
    service: ServiceTransform,
    batch: BatchDistribution,
    lambda: f64,
) -> Result<SuperServiceTransform, ModelError> {
    Ok(SuperServiceTransform {
        sys: MarkedPgfSystem::new(service, lambda, batch, ChainUnit::Batch)?,
    })
}

impl SuperServiceTransform {
    /// `Gsup(s) = sum_k P(B=k) G(s)^k`.
    pub fn transform(&self, s: &Jet) -> Result<SquareMatrix, NumericsError> {
        self.sys.unit_service(s)
    }

    /// `Gsup*(s) = Pbar Gsup(s)`.
    pub fn exceptional(&self, s: &Jet) -> Result<SquareMatrix, NumericsError> {
        let pbar = self
            .sys
            .service()
            .road()
            .phase_at_exponential(self.sys.lambda())?;
        Ok(pbar.matmul(&self.transform(s)?))
    }

    pub fn system(&self) -> &MarkedPgfSystem {
        &self.sys
    }
}

/// Stationary chain of queue length (in batches) at super-customer
/// departures.
pub fn super_chain(ss: &SuperServiceTransform) -> Result<QueueSolution, ModelError> {
    ss.sys.solve()
}

/// Everything needed to evaluate waiting and sojourn transforms: the solved
/// super-customer chain plus the vehicle-level service it was built from.
pub struct DelayTransforms {
    sys: MarkedPgfSystem,
    qs: QueueSolution,
}

impl DelayTransforms {
    pub fn new(
        service: ServiceTransform,
        batch: BatchDistribution,
        lambda: f64,
    ) -> Result<Self, ModelError> {
        Self::with_tolerances(service, batch, lambda, Tolerances::default())
    }

    pub fn with_tolerances(
        service: ServiceTransform,
        batch: BatchDistribution,
        lambda: f64,
        tol: Tolerances,
    ) -> Result<Self, ModelError> {
        let sys =
            MarkedPgfSystem::new(service, lambda, batch, ChainUnit::Batch)?.with_tolerances(tol);
        let qs = sys.solve()?;
        Ok(Self { sys, qs })
    }

    pub fn super_solution(&self) -> &QueueSolution {
        &self.qs
    }

    pub fn system(&self) -> &MarkedPgfSystem {
        &self.sys
    }

    fn n_phases(&self) -> usize {
        self.sys.n_phases()
    }

    /// Jets of `z(s) = 1 - s/lambda`, the distributional-Little
    /// substitution: batches arrive Poisson, so the batches left behind at a
    /// departure are exactly those that arrived during the sojourn.
    fn little_z(&self, s: &Jet) -> Jet {
        let one = Jet::constant(Complex64::new(1.0, 0.0));
        &one - &s.scale(Complex64::new(1.0 / self.sys.lambda(), 0.0))
    }

    /// Row of jets `f_i(1 - s/lambda)` in the variable `s`.
    fn departure_row(&self, s: &Jet) -> Result<Vec<Jet>, ModelError> {
        let zj = self.little_z(s);
        let z0 = zj.value();
        let inner = &zj - &Jet::constant(z0);
        let jets = pgf_jets(&self.sys, &self.qs, z0, s.order())?;
        Ok(jets.iter().map(|j| j.compose(&inner)).collect())
    }

    /// The two summands of the begin-service queue decomposition at `z`:
    /// the empty-at-arrival mass `f_i(0)` (no queue seen, position known)
    /// and `(f_i(z) - f_i(0)) / z`, the queue left by the previous departure
    /// with the served batch removed.
    pub fn begin_service_split(&self, z: &Jet) -> Result<(Vec<Jet>, Vec<Jet>), ModelError> {
        let n = self.n_phases();
        let z0 = z.value();
        let inner = z - &Jet::constant(z0);
        let jets = pgf_jets(&self.sys, &self.qs, z0, z.order())?;
        let empty: Vec<Jet> = (0..n)
            .map(|i| Jet::constant(Complex64::new(self.qs.boundary()[i], 0.0)))
            .collect();
        let mut nonempty = Vec::with_capacity(n);
        for i in 0..n {
            let shifted = &jets[i].compose(&inner) - &empty[i];
            nonempty.push(divide_by_variable(&shifted, z)?);
        }
        Ok((empty, nonempty))
    }

    /// Row `n_i(1 - s/lambda)`: the nonempty begin-service part after the
    /// Little substitution, as jets in `s`.
    fn nonempty_row(&self, s: &Jet) -> Result<Vec<Jet>, ModelError> {
        let zj = self.little_z(s);
        let f = self.departure_row(s)?;
        let mut out = Vec::with_capacity(f.len());
        for (i, fi) in f.iter().enumerate() {
            let shifted = fi - &Jet::constant(Complex64::new(self.qs.boundary()[i], 0.0));
            out.push(divide_by_variable(&shifted, &zj)?);
        }
        Ok(out)
    }

    /// `E[exp(-s W_sc)]`: the super customer's wait. The empty part carries
    /// mass `f_i(0)` at zero wait; the nonempty part is the Little
    /// substitution of the begin-service queue.
    pub fn sc_wait_lst(&self, s: &Jet) -> Result<Jet, ModelError> {
        self.position_wait_lst(1, s)
    }

    /// `E[exp(-s S_sc)]`: the super customer's sojourn, read directly off
    /// the departure-epoch PGF at `z = 1 - s/lambda`.
    pub fn sc_sojourn_lst(&self, s: &Jet) -> Result<Jet, ModelError> {
        let f = self.departure_row(s)?;
        Ok(sum_jets(&f))
    }

    /// `E[exp(-s W_(m))]` for the vehicle in position `m >= 1` of its batch:
    /// the super customer's wait plus the `m - 1` crossings ahead of it. The
    /// empty part's first crossing is the exceptional one (idle evolution
    /// folded in through `Pbar`); every later crossing is a plain service
    /// step from the phase the previous one left.
    pub fn position_wait_lst(&self, m: usize, s: &Jet) -> Result<Jet, ModelError> {
        assert!(m >= 1, "positions are 1-based");
        let n = self.n_phases();
        let mut nrow = self.nonempty_row(s)?;
        let mut erow: Vec<Jet> = (0..n)
            .map(|i| Jet::constant(Complex64::new(self.qs.boundary()[i], 0.0)))
            .collect();
        if m >= 2 {
            let g = self.sys.service().transform(s)?;
            let pbar = self
                .sys
                .service()
                .road()
                .phase_at_exponential(self.sys.lambda())?;
            erow = SquareMatrix::row_vec_mul(&erow, &pbar);
            for _ in 2..=m {
                erow = SquareMatrix::row_vec_mul(&erow, &g);
            }
            for _ in 1..m {
                nrow = SquareMatrix::row_vec_mul(&nrow, &g);
            }
        }
        Ok(&sum_jets(&erow) + &sum_jets(&nrow))
    }

    /// `E[exp(-s S_(m))]`: the position-`m` vehicle leaves when its own
    /// crossing ends, which is exactly the wait of a hypothetical position
    /// `m + 1`.
    pub fn position_sojourn_lst(&self, m: usize, s: &Jet) -> Result<Jet, ModelError> {
        self.position_wait_lst(m + 1, s)
    }

    pub fn position_probabilities(&self) -> Vec<f64> {
        position_probabilities(self.sys.batch())
    }

    /// Wait and sojourn transforms of an arbitrary vehicle: position
    /// mixtures under `r_m`.
    pub fn arbitrary_delay(&self, s: &Jet) -> Result<(Jet, Jet), ModelError> {
        let r = self.position_probabilities();
        let mut w = Jet::constant(Complex64::new(0.0, 0.0));
        let mut soj = Jet::constant(Complex64::new(0.0, 0.0));
        for (idx, &rm) in r.iter().enumerate() {
            let m = idx + 1;
            let wm = self.position_wait_lst(m, s)?;
            let sm = self.position_sojourn_lst(m, s)?;
            w = &w + &wm.scale(Complex64::new(rm, 0.0));
            soj = &soj + &sm.scale(Complex64::new(rm, 0.0));
        }
        Ok((w, soj))
    }

    /// Means and variances of the arbitrary vehicle's wait and sojourn,
    /// from the first two jet coefficients at `s = 0`.
    pub fn delay_moments(&self) -> Result<DelayMoments, ModelError> {
        let order = self.sys.tolerances().jet_order.min(4).max(2);
        let s = Jet::variable(Complex64::new(0.0, 0.0), order);
        let (w, soj) = self.arbitrary_delay(&s)?;
        Ok(DelayMoments {
            mean_wait: -w.coeff(1).re,
            var_wait: 2.0 * w.coeff(2).re - w.coeff(1).re * w.coeff(1).re,
            mean_sojourn: -soj.coeff(1).re,
            var_sojourn: 2.0 * soj.coeff(2).re - soj.coeff(1).re * soj.coeff(1).re,
        })
    }
}

/// First and second delay moments of an arbitrary vehicle, in seconds and
/// seconds squared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayMoments {
    pub mean_wait: f64,
    pub var_wait: f64,
    pub mean_sojourn: f64,
    pub var_sojourn: f64,
}

/// `r_m`: probability that a uniformly chosen vehicle sits in position `m`
/// of its batch, `r_m = P(B >= m) / E[B]`. The last entry is the residual
/// so the vector sums to one exactly.
pub fn position_probabilities(batch: &BatchDistribution) -> Vec<f64> {
    let m = batch.max_size();
    let eb = batch.mean();
    let mut r = Vec::with_capacity(m);
    let mut acc = 0.0;
    for pos in 1..m {
        let tail: f64 = (pos..=m).map(|k| batch.prob(k)).sum();
        let rm = tail / eb;
        r.push(rm);
        acc += rm;
    }
    r.push(1.0 - acc);
    r
}

/// `(f(z) - f(0)) / z` handling the `z = 0` expansion point, where the
/// quotient is the analytic shift of coefficients.
fn divide_by_variable(numer: &Jet, z: &Jet) -> Result<Jet, ModelError> {
    if z.value().norm() > 1e-12 {
        return Ok(numer.try_div(z).map_err(ModelError::Numerics)?);
    }
    if numer.value().norm() > 1e-9 {
        return Err(ModelError::Numerics(NumericsError::NonFinite(
            "begin-service split numerator at z = 0",
        )));
    }
    if numer.order() == 0 {
        return Ok(Jet::constant(Complex64::new(0.0, 0.0)));
    }
    Ok(Jet::from_coeffs(
        (1..=numer.order()).map(|k| numer.coeff(k)).collect(),
    ))
}

fn sum_jets(row: &[Jet]) -> Jet {
    let mut acc = row[0].clone();
    for j in &row[1..] {
        acc = &acc + j;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseProcess;
    use crate::service::{GapMixture, GapPolicy};

    fn example_road() -> PhaseProcess {
        PhaseProcess::two_phase(1.0 / 60.0, 1.0 / 240.0, 150.0 / 3600.0, 50.0 / 3600.0)
            .unwrap()
    }

    fn example_service() -> ServiceTransform {
        ServiceTransform::new(
            example_road(),
            GapPolicy::Inconsistent {
                gaps: GapMixture::new(vec![(6.22, 0.9), (14.0, 0.1)]).unwrap(),
            },
        )
        .unwrap()
    }

    fn example_delay() -> DelayTransforms {
        DelayTransforms::new(
            example_service(),
            BatchDistribution::uniform(7).unwrap(),
            50.0 / 3600.0,
        )
        .unwrap()
    }

    #[test]
    fn super_service_degenerates_to_single_service() {
        let lambda = 50.0 / 3600.0;
        let ss = super_service(
            example_service(),
            BatchDistribution::deterministic(1).unwrap(),
            lambda,
        )
        .unwrap();
        let s = Jet::variable(Complex64::new(0.3, 0.1), 2);
        let sup = ss.transform(&s).unwrap();
        let single = example_service().transform(&s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..=2 {
                    assert!(
                        (sup.get(i, j).coeff(k) - single.get(i, j).coeff(k)).norm() < 1e-13
                    );
                }
            }
        }
    }

    #[test]
    fn super_service_squares_scalar_transform() {
        let road = PhaseProcess::poisson(500.0 / 3600.0).unwrap();
        let st = ServiceTransform::new(road, GapPolicy::Constant { headway: 7.0 }).unwrap();
        let ss = super_service(
            st.clone(),
            BatchDistribution::deterministic(2).unwrap(),
            0.01,
        )
        .unwrap();
        let s = Jet::variable(Complex64::new(0.2, 0.0), 3);
        let sup = ss.transform(&s).unwrap().get(0, 0).clone();
        let g = st.transform(&s).unwrap().get(0, 0).clone();
        let g2 = &g * &g;
        for k in 0..=3 {
            assert!((sup.coeff(k) - g2.coeff(k)).norm() < 1e-13);
        }
    }

    #[test]
    fn super_transform_at_zero_is_stochastic() {
        let ss = super_service(
            example_service(),
            BatchDistribution::uniform(7).unwrap(),
            50.0 / 3600.0,
        )
        .unwrap();
        let zero = Jet::constant(Complex64::new(0.0, 0.0));
        for m in [ss.transform(&zero).unwrap(), ss.exceptional(&zero).unwrap()] {
            for i in 0..2 {
                let row: Complex64 = (0..2).map(|j| m.get(i, j).value()).sum();
                assert!((row - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn position_probability_vectors() {
        let r = position_probabilities(&BatchDistribution::uniform(7).unwrap());
        assert!((r[0] - 0.25).abs() < 1e-12);
        for (idx, &rm) in r.iter().enumerate().skip(1) {
            let m = idx + 1;
            assert!((rm - (8 - m) as f64 / 28.0).abs() < 1e-12, "r_{m} = {rm}");
        }
        assert_eq!(r.iter().sum::<f64>(), 1.0);

        let r = position_probabilities(&BatchDistribution::two_point(1, 0.5, 7).unwrap());
        assert!((r[0] - 0.25).abs() < 1e-12);
        for &rm in &r[1..] {
            assert!((rm - 0.125).abs() < 1e-12);
        }
        assert_eq!(r.iter().sum::<f64>(), 1.0);

        assert_eq!(
            position_probabilities(&BatchDistribution::deterministic(1).unwrap()),
            vec![1.0]
        );
    }

    #[test]
    fn transforms_are_one_at_zero() {
        let dt = example_delay();
        let zero = Jet::constant(Complex64::new(0.0, 0.0));
        for m in 1..=8 {
            let w = dt.position_wait_lst(m, &zero).unwrap();
            assert!((w.value() - Complex64::new(1.0, 0.0)).norm() < 1e-10, "m={m}");
        }
        let (w, s) = dt.arbitrary_delay(&zero).unwrap();
        assert!((w.value() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!((s.value() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    /// The sojourn transform from the departure PGF must agree with the
    /// batch-size mixture of position waits: a super customer's sojourn ends
    /// when its last vehicle crosses, and a size-k batch's last vehicle has
    /// the wait of position k + 1.
    #[test]
    fn sojourn_is_batch_mixture_of_position_waits() {
        let dt = example_delay();
        let s = Jet::variable(Complex64::new(0.0, 0.0), 3);
        let direct = dt.sc_sojourn_lst(&s).unwrap();
        let mut mixed = Jet::constant(Complex64::new(0.0, 0.0));
        for k in 1..=7 {
            let p = dt.system().batch().prob(k);
            let wk = dt.position_wait_lst(k + 1, &s).unwrap();
            mixed = &mixed + &wk.scale(Complex64::new(p, 0.0));
        }
        for k in 0..=3 {
            assert!(
                (direct.coeff(k) - mixed.coeff(k)).norm() < 1e-9,
                "coeff {k}: {} vs {}",
                direct.coeff(k),
                mixed.coeff(k)
            );
        }
    }

    /// With a degenerate batch size the mixture collapses and the last
    /// position's sojourn IS the super customer's sojourn.
    #[test]
    fn degenerate_batch_last_position_sojourn_is_super_sojourn() {
        let dt = DelayTransforms::new(
            example_service(),
            BatchDistribution::deterministic(2).unwrap(),
            50.0 / 3600.0,
        )
        .unwrap();
        let s = Jet::variable(Complex64::new(0.0, 0.0), 3);
        let last = dt.position_sojourn_lst(2, &s).unwrap();
        let sup = dt.sc_sojourn_lst(&s).unwrap();
        for k in 0..=3 {
            assert!((last.coeff(k) - sup.coeff(k)).norm() < 1e-9);
        }
    }

    #[test]
    fn position_waits_increase_by_service_means() {
        let dt = example_delay();
        let s = Jet::variable(Complex64::new(0.0, 0.0), 2);
        let mut prev = None;
        for m in 1..=8 {
            let w = dt.position_wait_lst(m, &s).unwrap();
            let mean = -w.coeff(1).re;
            if let Some(p) = prev {
                assert!(mean > p, "position {m}: {mean} <= {p}");
            }
            prev = Some(mean);
        }
    }

    /// Single phase, no batches: the pipeline must reproduce the classical
    /// mean wait lambda E[G^2] / (2 (1 - rho)) of the M/G/1 queue (the
    /// exceptional first service coincides with the regular one when the
    /// road has one phase).
    #[test]
    fn single_phase_single_arrivals_mean_wait_matches_pollaczek() {
        let road = PhaseProcess::poisson(500.0 / 3600.0).unwrap();
        let st = ServiceTransform::new(road, GapPolicy::Constant { headway: 7.0 }).unwrap();
        let lambda = 0.02;
        let moments = st.service_moments(2).unwrap();
        let (eg, eg2) = (moments[0], moments[1]);
        let rho = lambda * eg;
        let dt = DelayTransforms::new(
            st,
            BatchDistribution::deterministic(1).unwrap(),
            lambda,
        )
        .unwrap();
        let dm = dt.delay_moments().unwrap();
        let want = lambda * eg2 / (2.0 * (1.0 - rho));
        assert!(
            (dm.mean_wait - want).abs() < 1e-9 * want.max(1.0),
            "EW {} vs {}",
            dm.mean_wait,
            want
        );
        // Sojourn = wait + one full service.
        assert!((dm.mean_sojourn - dm.mean_wait - eg).abs() < 1e-9);
    }

    /// One more service step adds exactly one mean service time when the
    /// road has a single phase (no phase coupling).
    #[test]
    fn single_phase_position_step_adds_mean_service() {
        let road = PhaseProcess::poisson(500.0 / 3600.0).unwrap();
        let st = ServiceTransform::new(road, GapPolicy::Constant { headway: 7.0 }).unwrap();
        let eg = st.mean_service().unwrap();
        let dt = DelayTransforms::new(st, BatchDistribution::uniform(3).unwrap(), 0.004)
            .unwrap();
        let s = Jet::variable(Complex64::new(0.0, 0.0), 2);
        let w1 = dt.position_wait_lst(1, &s).unwrap();
        let w2 = dt.position_wait_lst(2, &s).unwrap();
        let step = -(w2.coeff(1).re - w1.coeff(1).re);
        assert!((step - eg).abs() < 1e-9, "step {step} vs E[G] {eg}");
    }

    /// Distributional Little's law ties the vehicle chain's mean queue
    /// length to the delay pipeline's mean sojourn:
    /// E[S] = (E[X] - B''(1) / (2 E[B])) / (lambda E[B]).
    #[test]
    fn mean_sojourn_matches_queue_length_identity() {
        let lambda = 50.0 / 3600.0;
        let batch = BatchDistribution::uniform(7).unwrap();
        let vehicle_sys = crate::queue::build_system(
            example_service(),
            lambda,
            batch.clone(),
        )
        .unwrap();
        let (ex, _) = crate::queue::queue_length_moments(&vehicle_sys.solve().unwrap());
        let dt = example_delay();
        let dm = dt.delay_moments().unwrap();
        let want =
            (ex - batch.second_factorial() / (2.0 * batch.mean())) / (lambda * batch.mean());
        let rel = (dm.mean_sojourn - want).abs() / want;
        assert!(
            rel < 1e-6,
            "E[S] {} vs queue-length identity {} (rel {rel})",
            dm.mean_sojourn,
            want
        );
    }

    #[test]
    fn wait_below_sojourn_and_transforms_in_unit_interval() {
        let dt = example_delay();
        let dm = dt.delay_moments().unwrap();
        assert!(dm.mean_wait > 0.0);
        assert!(dm.mean_sojourn > dm.mean_wait);
        assert!(dm.var_wait > 0.0);
        assert!(dm.var_sojourn > 0.0);
        for &s0 in &[0.001, 0.01, 0.05, 0.3] {
            let s = Jet::constant(Complex64::new(s0, 0.0));
            let (w, soj) = dt.arbitrary_delay(&s).unwrap();
            for v in [w.value(), soj.value()] {
                assert!(v.im.abs() < 1e-10);
                assert!(v.re > 0.0 && v.re <= 1.0, "s={s0}: {v}");
            }
            assert!(soj.value().re <= w.value().re + 1e-12);
        }
    }

    #[test]
    fn begin_service_split_sums_to_one_at_z_one() {
        let dt = example_delay();
        let z = Jet::constant(Complex64::new(1.0, 0.0));
        let (empty, nonempty) = dt.begin_service_split(&z).unwrap();
        let total: Complex64 = empty
            .iter()
            .chain(nonempty.iter())
            .map(|j| j.value())
            .sum();
        assert!((total - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn begin_service_split_at_zero_takes_analytic_limit() {
        let dt = example_delay();
        let z = Jet::variable(Complex64::new(0.0, 0.0), 2);
        let (_, nonempty) = dt.begin_service_split(&z).unwrap();
        // Compare against a nearby evaluation of (f(z) - f(0))/z.
        let eps = 1e-6;
        let znear = Jet::constant(Complex64::new(eps, 0.0));
        let (_, near) = dt.begin_service_split(&znear).unwrap();
        for i in 0..2 {
            assert!(
                (nonempty[i].value() - near[i].value()).norm() < 1e-4,
                "phase {i}: {} vs {}",
                nonempty[i].value(),
                near[i].value()
            );
        }
    }
}
