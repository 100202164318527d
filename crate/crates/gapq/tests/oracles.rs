//! Closed-form oracles for the transform pipeline.
//!
//! Three island computations that never touch the library's numerics:
//! a scalar renewal argument for the single-phase constant-headway service,
//! a 2x2 spectral decomposition for the two-phase gap-survival kernel, and
//! the classical mean-wait formula for an M/G/1 queue whose first service
//! of each busy period has its own law. The pipeline must land on them.

use gapq::numerics::{Jet, Tolerances};
use gapq::phase::PhaseProcess;
use gapq::queue::{queue_length_moments, BatchDistribution};
use gapq::service::{GapPolicy, ServiceTransform};
use gapq::DelayTransforms;
use num_complex::Complex64;

mod common;
use common::{exceptional_mg1, expm_2x2, rel_err, scalar_service_lst, scalar_service_moments};

#[test]
fn single_phase_constant_headway_lst_matches_renewal_formula() {
    for &q in &[0.01, 0.05, 0.1, 0.3] {
        for &t_cross in &[2.0, 5.0, 7.0, 12.0] {
            let road = PhaseProcess::poisson(q).unwrap();
            let st = ServiceTransform::new(road, GapPolicy::Constant { headway: t_cross })
                .unwrap();
            for &s in &[0.0, 0.1, 0.5, 1.5] {
                let jet = Jet::constant(Complex64::new(s, 0.0));
                let got = st.transform(&jet).unwrap().get(0, 0).value();
                let want = scalar_service_lst(s, q, t_cross);
                assert!(
                    (got.re - want).abs() <= 1e-10 && got.im.abs() <= 1e-12,
                    "LST mismatch at q={q} T={t_cross} s={s}: got {got}, want {want}"
                );
            }

            let moments = st.service_moments(2).unwrap();
            let mean_want = ((q * t_cross).exp() - 1.0) / q;
            let (m1, m2) = scalar_service_moments(q, t_cross);
            assert!(
                rel_err(moments[0], mean_want) <= 1e-10,
                "mean mismatch at q={q} T={t_cross}: got {}, want {mean_want}",
                moments[0]
            );
            assert!(
                rel_err(m1, mean_want) <= 1e-12,
                "oracle self-check: compound-geometric mean disagrees with (e^{{qT}}-1)/q"
            );
            assert!(
                rel_err(moments[1], m2) <= 1e-10,
                "second moment mismatch at q={q} T={t_cross}: got {}, want {m2}",
                moments[1]
            );
        }
    }
}


#[test]
fn two_phase_gap_survival_matches_spectral_closed_form() {
    // Fast/slow road with mean sojourns 60 s and 240 s, at two mean flows.
    for &qbar_vph in &[70.0, 420.0] {
        let q2 = qbar_vph / 1.4 / 3600.0;
        let q1 = 3.0 * q2;
        let road = PhaseProcess::two_phase(1.0 / 60.0, 1.0 / 240.0, q1, q2).unwrap();
        let a = [
            [-1.0 / 60.0 - q1, 1.0 / 60.0],
            [1.0 / 240.0, -1.0 / 240.0 - q2],
        ];
        for &t in &[1.0, 7.0, 30.0] {
            let got = road.phi(t).unwrap();
            let want = expm_2x2(a, t);
            for i in 0..2 {
                for j in 0..2 {
                    let g = got.get(i, j).value();
                    assert!(
                        (g.re - want[i][j]).abs() <= 1e-10 && g.im.abs() <= 1e-12,
                        "phi({t})[{i}][{j}] = {g}, want {}",
                        want[i][j]
                    );
                }
            }
        }
    }
}


#[test]
fn single_phase_unit_batch_pipeline_matches_classical_queue() {
    // (q, t_cross, lambda) with loads from 0.2 to 0.77.
    let cases = [
        (0.05, 7.0, 0.02),
        (0.1, 7.0, 0.05),
        (0.2, 4.0, 0.05),
        (0.01, 12.0, 0.06),
    ];
    for &(q, t_cross, lambda) in &cases {
        let road = PhaseProcess::poisson(q).unwrap();
        let st = ServiceTransform::new(road, GapPolicy::Constant { headway: t_cross })
            .unwrap();
        let batch = BatchDistribution::deterministic(1).unwrap();
        let dt = DelayTransforms::new(st, batch, lambda).unwrap();

        let (g1, g2) = scalar_service_moments(q, t_cross);
        let rho = lambda * g1;
        assert!(rho < 1.0, "test case must be stable, got rho = {rho}");
        // One phase: the busy-period opener sees the same law as everyone
        // else, so the starred moments coincide with the plain ones.
        let (f0, ex, ew) = exceptional_mg1(lambda, g1, g2, g1, g2);

        let boundary = dt.super_solution().boundary();
        assert_eq!(boundary.len(), 1);
        assert!(
            rel_err(boundary[0], f0) <= 1e-8,
            "empty-at-departure mass: got {}, want {f0}",
            boundary[0]
        );

        let (ex_got, _) = queue_length_moments(dt.super_solution());
        assert!(
            rel_err(ex_got, ex) <= 1e-8,
            "mean queue at departures: got {ex_got}, want {ex} (q={q} T={t_cross} lambda={lambda})"
        );

        let dm = dt.delay_moments().unwrap();
        assert!(
            rel_err(dm.mean_wait, ew) <= 1e-8,
            "mean wait: got {}, want {ew} (q={q} T={t_cross} lambda={lambda})",
            dm.mean_wait
        );
        // Unit batches make sojourn = wait + a full service.
        assert!(
            rel_err(dm.mean_sojourn, ew + g1) <= 1e-8,
            "mean sojourn: got {}, want {}",
            dm.mean_sojourn,
            ew + g1
        );
    }
}

#[test]
fn jet_order_does_not_move_the_first_two_moments() {
    let road = PhaseProcess::two_phase(1.0 / 60.0, 1.0 / 240.0, 0.25, 1.0 / 12.0).unwrap();
    let st = ServiceTransform::new(road, GapPolicy::Constant { headway: 7.0 }).unwrap();
    let batch = BatchDistribution::uniform(7).unwrap();
    let lambda = 50.0 / 3600.0;
    let base = DelayTransforms::new(st.clone(), batch.clone(), lambda)
        .unwrap()
        .delay_moments()
        .unwrap();
    let high = DelayTransforms::with_tolerances(
        st,
        batch,
        lambda,
        Tolerances::default().with_jet_order(6),
    )
    .unwrap()
    .delay_moments()
    .unwrap();
    assert!(rel_err(high.mean_wait, base.mean_wait) <= 1e-9);
    assert!(rel_err(high.var_wait, base.var_wait) <= 1e-9);
}
