//! Experiment orchestration: validated configs in, CSV rows and a
//! human-readable summary out.
//!
//! Every emitter shares one row schema so downstream plotting never has to
//! branch on the experiment kind. Analytic rows that would sit at or above
//! the stable-load limit are emitted with the load filled in and the delay
//! columns empty; the summary calls them out. That keeps instability
//! visible in the data instead of aborting a whole sweep.

use serde::Serialize;
use std::fmt::Write as _;

use crate::approx::{self, ApproxParams};
use crate::config::{
    BatchSpec, BehaviorSpec, ConfigError, ExperimentSpec, SimulateSpec, SECONDS_PER_HOUR,
};
use crate::delay::DelayTransforms;
use crate::numerics::Tolerances;
use crate::queue::BatchDistribution;
use crate::service::{GapPolicy, ServiceTransform};
use crate::sim::{simulate, SimConfig};
use crate::{ModelError, PhaseProcess};

pub const CSV_HEADER: &str =
    "case,behavior,batch_dist,qbar_vph,lambda_bph,rho,EW_s,VarW_s2,ES_s,VarS_s2,source";

/// One output record. Delay columns are empty when the point is flagged
/// unstable rather than solved.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub case: String,
    pub behavior: String,
    pub batch_dist: String,
    pub qbar_vph: f64,
    pub lambda_bph: f64,
    pub rho: f64,
    #[serde(rename = "EW_s")]
    pub ew_s: Option<f64>,
    #[serde(rename = "VarW_s2")]
    pub varw_s2: Option<f64>,
    #[serde(rename = "ES_s")]
    pub es_s: Option<f64>,
    #[serde(rename = "VarS_s2")]
    pub vars_s2: Option<f64>,
    pub source: &'static str,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub summary: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("config has no `{section}` section, required by this command")]
    MissingSection { section: &'static str },
}

impl RunError {
    /// Stable machine-readable category for exit-code mapping.
    pub fn category(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Io { .. }) => "io",
            RunError::Config(_) => "config",
            RunError::MissingSection { .. } => "config",
            RunError::Model(_) => "model",
        }
    }
}

pub fn emit_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serializes");
    }
    let bytes = w.into_inner().expect("csv buffer");
    String::from_utf8(bytes).expect("csv is utf8")
}

/// Solved delay metrics for one analytic point.
struct Point {
    rho: f64,
    moments: Option<crate::delay::DelayMoments>,
}

/// Solve one configuration, flagging instead of failing when the load is
/// at or above the tractable limit.
fn analytic_point(
    road: &PhaseProcess,
    policy: &GapPolicy,
    batch: &BatchDistribution,
    lambda: f64,
    tol: Tolerances,
) -> Result<Point, ModelError> {
    let st = ServiceTransform::new(road.clone(), policy.clone())?;
    let rho = lambda * batch.mean() * st.mean_service()?;
    if rho >= tol.max_load {
        return Ok(Point { rho, moments: None });
    }
    let moments = DelayTransforms::with_tolerances(st, batch.clone(), lambda, tol)?
        .delay_moments()?;
    Ok(Point {
        rho,
        moments: Some(moments),
    })
}

fn push_analytic_row(
    rows: &mut Vec<Row>,
    case: impl Into<String>,
    behavior: &BehaviorSpec,
    batch: &BatchSpec,
    qbar_vph: f64,
    lambda_bph: f64,
    point: &Point,
) {
    let m = point.moments.as_ref();
    rows.push(Row {
        case: case.into(),
        behavior: behavior.label().to_string(),
        batch_dist: batch.label(),
        qbar_vph,
        lambda_bph,
        rho: point.rho,
        ew_s: m.map(|m| m.mean_wait),
        varw_s2: m.map(|m| m.var_wait),
        es_s: m.map(|m| m.mean_sojourn),
        vars_s2: m.map(|m| m.var_sojourn),
        source: "analytic",
    });
}

/// Solve the configured model once and report all delay moments.
pub fn run_analyze(spec: &ExperimentSpec, tol: Tolerances) -> Result<ExperimentOutput, RunError> {
    let road = spec.model.road.build()?;
    let policy = spec.model.behavior.build()?;
    let batch = spec.model.batch.build()?;
    let lambda = spec.model.lambda_per_s();
    let qbar = spec.model.road.mean_flow_vph()?;

    let point = analytic_point(&road, &policy, &batch, lambda, tol)?;
    let mut rows = Vec::new();
    push_analytic_row(
        &mut rows,
        "analyze",
        &spec.model.behavior,
        &spec.model.batch,
        qbar,
        spec.model.lambda_bph,
        &point,
    );

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "behavior {}, batches {}, mean major flow {:.2} veh/h, {} batches/h",
        spec.model.behavior.label(),
        spec.model.batch.label(),
        qbar,
        spec.model.lambda_bph,
    );
    let _ = writeln!(summary, "offered load rho = {:.6}", point.rho);
    match &point.moments {
        Some(m) => {
            let _ = writeln!(summary, "E[W]   = {:>12.4} s", m.mean_wait);
            let _ = writeln!(summary, "Var(W) = {:>12.4} s^2", m.var_wait);
            let _ = writeln!(summary, "E[S]   = {:>12.4} s", m.mean_sojourn);
            let _ = writeln!(summary, "Var(S) = {:>12.4} s^2", m.var_sojourn);
        }
        None => {
            let _ = writeln!(summary, "UNSTABLE: load at or above the tractable limit");
        }
    }
    Ok(ExperimentOutput { rows, summary })
}

/// Mean-wait curves over the flow grid, optionally with unbatched and
/// single-stream-road comparison variants.
pub fn run_sweep(spec: &ExperimentSpec, tol: Tolerances) -> Result<ExperimentOutput, RunError> {
    let sweep = spec
        .sweep
        .as_ref()
        .ok_or(RunError::MissingSection { section: "sweep" })?;
    let behaviors = sweep
        .behaviors
        .clone()
        .unwrap_or_else(|| vec![spec.model.behavior.clone()]);

    // Variant: (case label, collapse road to one phase?, drop batching?).
    let mut variants: Vec<(&'static str, bool, bool)> = vec![("modulated", false, false)];
    if sweep.include_unbatched {
        variants.push(("no_batches", false, true));
    }
    if sweep.include_poisson_road {
        variants.push(("poisson_road", true, false));
    }

    let base_batch = spec.model.batch.build()?;
    let unbatched_lambda_bph = spec.model.lambda_bph * base_batch.mean();
    let single = BatchSpec::Deterministic { size: 1 };

    let mut rows = Vec::new();
    let mut unstable: Vec<String> = Vec::new();
    for &qbar in &sweep.qbar_grid_vph {
        for &(label, collapse_road, unbatch) in &variants {
            let road_spec = if collapse_road {
                crate::config::RoadSpec::Poisson { flow_vph: qbar }
            } else {
                spec.model.road.scaled_to_mean_flow(qbar)?
            };
            let road = road_spec.build()?;
            let (batch_spec, lambda_bph) = if unbatch {
                (&single, unbatched_lambda_bph)
            } else {
                (&spec.model.batch, spec.model.lambda_bph)
            };
            let batch = batch_spec.build()?;
            for behavior in &behaviors {
                let policy = behavior.build()?;
                let point = analytic_point(
                    &road,
                    &policy,
                    &batch,
                    lambda_bph / SECONDS_PER_HOUR,
                    tol,
                )?;
                if point.moments.is_none() {
                    unstable.push(format!(
                        "{label}/{} unstable at qbar = {qbar} veh/h (rho = {:.4})",
                        behavior.label(),
                        point.rho
                    ));
                }
                push_analytic_row(&mut rows, label, behavior, batch_spec, qbar, lambda_bph, &point);
            }
        }
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "swept {} flow points x {} variants x {} behaviors = {} rows",
        sweep.qbar_grid_vph.len(),
        variants.len(),
        behaviors.len(),
        rows.len(),
    );
    let solved = rows.iter().filter(|r| r.ew_s.is_some()).count();
    let _ = writeln!(
        summary,
        "{solved} solved, {} flagged unstable",
        rows.len() - solved
    );
    for line in &unstable {
        let _ = writeln!(summary, "  {line}");
    }
    Ok(ExperimentOutput { rows, summary })
}

/// Run the simulator on the configured model and set the analytic solution
/// beside it. Emits one row per replication plus aggregates.
pub fn run_simulate(
    spec: &ExperimentSpec,
    tol: Tolerances,
    seed_override: Option<u64>,
    replications_override: Option<usize>,
) -> Result<ExperimentOutput, RunError> {
    let section = spec.simulate.clone().unwrap_or(SimulateSpec {
        warmup_s: 1_600.0,
        measure_s: 16_000.0,
        replications: 20,
        seed: 7,
    });
    let cfg = SimConfig {
        warmup_s: section.warmup_s,
        measure_s: section.measure_s,
        replications: replications_override.unwrap_or(section.replications),
        seed: seed_override.unwrap_or(section.seed),
    };

    let road = spec.model.road.build()?;
    let policy = spec.model.behavior.build()?;
    let batch = spec.model.batch.build()?;
    let lambda = spec.model.lambda_per_s();
    let qbar = spec.model.road.mean_flow_vph()?;

    let report = simulate(&road, &policy, &batch, lambda, &cfg)?;
    let point = analytic_point(&road, &policy, &batch, lambda, tol)?;

    let mut rows = Vec::new();
    for (i, rep) in report.reps.iter().enumerate() {
        rows.push(Row {
            case: format!("rep{:03}", i + 1),
            behavior: spec.model.behavior.label().to_string(),
            batch_dist: spec.model.batch.label(),
            qbar_vph: qbar,
            lambda_bph: spec.model.lambda_bph,
            rho: point.rho,
            ew_s: Some(rep.mean_wait),
            varw_s2: Some(rep.var_wait),
            es_s: Some(rep.mean_sojourn),
            vars_s2: Some(rep.var_sojourn),
            source: "simulated",
        });
    }
    let (w, w_se) = report.wait();
    let (vw, vw_se) = report.wait_variance();
    let (s, s_se) = report.sojourn();
    let (vs, vs_se) = report.sojourn_variance();
    rows.push(Row {
        case: "aggregate".to_string(),
        behavior: spec.model.behavior.label().to_string(),
        batch_dist: spec.model.batch.label(),
        qbar_vph: qbar,
        lambda_bph: spec.model.lambda_bph,
        rho: point.rho,
        ew_s: Some(w),
        varw_s2: Some(vw),
        es_s: Some(s),
        vars_s2: Some(vs),
        source: "simulated",
    });
    push_analytic_row(
        &mut rows,
        "aggregate",
        &spec.model.behavior,
        &spec.model.batch,
        qbar,
        spec.model.lambda_bph,
        &point,
    );

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "{} replications, warmup {} s + measurement {} s each, seed {}",
        cfg.replications, cfg.warmup_s, cfg.measure_s, cfg.seed,
    );
    let _ = writeln!(summary, "simulated E[W]   = {w:>12.4} s  (se {w_se:.4})");
    let _ = writeln!(summary, "simulated Var(W) = {vw:>12.4} s^2 (se {vw_se:.4})");
    let _ = writeln!(summary, "simulated E[S]   = {s:>12.4} s  (se {s_se:.4})");
    let _ = writeln!(summary, "simulated Var(S) = {vs:>12.4} s^2 (se {vs_se:.4})");
    match &point.moments {
        Some(m) => {
            let _ = writeln!(
                summary,
                "analytic  E[W] = {:.4} s ({:+.2} se), Var(W) = {:.4} ({:+.2} se)",
                m.mean_wait,
                (m.mean_wait - w) / w_se,
                m.var_wait,
                (m.var_wait - vw) / vw_se,
            );
        }
        None => {
            let _ = writeln!(
                summary,
                "analytic solution not computed: load {:.4} at or above limit",
                point.rho
            );
        }
    }
    Ok(ExperimentOutput { rows, summary })
}

/// Exact-versus-approximate mean sojourn over the configured load grid.
pub fn run_approx(spec: &ExperimentSpec, tol: Tolerances) -> Result<ExperimentOutput, RunError> {
    let section = spec
        .approx
        .as_ref()
        .ok_or(RunError::MissingSection { section: "approx" })?;
    let road = spec.model.road.build()?;
    let policy = spec.model.behavior.build()?;
    let batch = spec.model.batch.build()?;
    let qbar = spec.model.road.mean_flow_vph()?;
    let st = ServiceTransform::new(road.clone(), policy.clone())?;
    let unit_work = batch.mean() * st.mean_service()?;

    let exact_moments = |rho: f64| -> Result<crate::delay::DelayMoments, ModelError> {
        DelayTransforms::with_tolerances(st.clone(), batch.clone(), rho / unit_work, tol)?
            .delay_moments()
    };

    let (eta, eta_estimated) = match section.eta {
        Some(eta) => (eta, false),
        None => {
            let exact_ex = |rho: f64| -> Result<f64, ModelError> {
                let sys = crate::queue::build_system(
                    st.clone(),
                    rho / unit_work,
                    batch.clone(),
                )?;
                Ok(crate::queue::queue_length_moments(&sys.solve()?).0)
            };
            let eta = approx::estimate_eta(&exact_ex, &[0.95, 0.97, 0.99])?;
            (eta, true)
        }
    };
    let delta = approx::lt_limit_delta(&batch);

    let mut rows = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "delta = {delta:.6}, eta = {eta:.6}{}",
        if eta_estimated {
            " (estimated numerically by heavy-traffic extrapolation)"
        } else {
            " (supplied)"
        }
    );
    let mut worst: (f64, f64) = (0.0, 0.0);
    for &rho in &section.rho_grid {
        let lambda = rho / unit_work;
        let lambda_bph = lambda * SECONDS_PER_HOUR;
        let exact = exact_moments(rho)?;
        let params = ApproxParams::new(delta, eta, rho)?;
        let es_approx = approx::sojourn_approx(&params, lambda, &batch);
        let ew_approx = approx::wait_approx(&params, lambda, &batch, &st)?;
        rows.push(Row {
            case: "approx".to_string(),
            behavior: spec.model.behavior.label().to_string(),
            batch_dist: spec.model.batch.label(),
            qbar_vph: qbar,
            lambda_bph,
            rho,
            ew_s: Some(exact.mean_wait),
            varw_s2: Some(exact.var_wait),
            es_s: Some(exact.mean_sojourn),
            vars_s2: Some(exact.var_sojourn),
            source: "analytic",
        });
        rows.push(Row {
            case: "approx".to_string(),
            behavior: spec.model.behavior.label().to_string(),
            batch_dist: spec.model.batch.label(),
            qbar_vph: qbar,
            lambda_bph,
            rho,
            ew_s: Some(ew_approx),
            varw_s2: None,
            es_s: Some(es_approx),
            vars_s2: None,
            source: "approx",
        });
        let rel = (es_approx - exact.mean_sojourn).abs() / exact.mean_sojourn;
        if rel > worst.1 {
            worst = (rho, rel);
        }
        let _ = writeln!(
            summary,
            "rho {rho:>5.3}: exact E[S] = {:>10.4} s, approx = {:>10.4} s ({:+.2}%)",
            exact.mean_sojourn,
            es_approx,
            100.0 * (es_approx - exact.mean_sojourn) / exact.mean_sojourn,
        );
    }
    let _ = writeln!(
        summary,
        "largest relative gap {:.2}% at rho = {}",
        100.0 * worst.1,
        worst.0
    );
    Ok(ExperimentOutput { rows, summary })
}

/// Mean/variance grid over batch cases x behaviors x mean flows.
pub fn run_table(spec: &ExperimentSpec, tol: Tolerances) -> Result<ExperimentOutput, RunError> {
    let table = spec
        .table
        .as_ref()
        .ok_or(RunError::MissingSection { section: "table" })?;

    let mut rows = Vec::new();
    let mut summary = String::new();
    for case in &table.cases {
        let batch = case.batch.build()?;
        let _ = writeln!(summary, "case {} ({}):", case.label, case.batch.label());
        for behavior in &table.behaviors {
            let policy = behavior.build()?;
            for &qbar in &table.qbar_grid_vph {
                let road = spec.model.road.scaled_to_mean_flow(qbar)?.build()?;
                let point = analytic_point(
                    &road,
                    &policy,
                    &batch,
                    case.lambda_bph / SECONDS_PER_HOUR,
                    tol,
                )?;
                match &point.moments {
                    Some(m) => {
                        let _ = writeln!(
                            summary,
                            "  {:>12} qbar {qbar:>6.1}: E[W] = {:>9.2} s, Var(W) = {:>11.2} s^2",
                            behavior.label(),
                            m.mean_wait,
                            m.var_wait,
                        );
                    }
                    None => {
                        let _ = writeln!(
                            summary,
                            "  {:>12} qbar {qbar:>6.1}: unstable (rho = {:.4})",
                            behavior.label(),
                            point.rho,
                        );
                    }
                }
                push_analytic_row(
                    &mut rows,
                    case.label.clone(),
                    behavior,
                    &case.batch,
                    qbar,
                    case.lambda_bph,
                    &point,
                );
            }
        }
    }
    Ok(ExperimentOutput { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GapPoint, ModelSpec, RoadSpec, SweepSpec, TableCase, TableSpec};

    fn example1_spec() -> ExperimentSpec {
        ExperimentSpec {
            model: ModelSpec {
                road: RoadSpec::TwoPhase {
                    mean_sojourn_phase1_s: 60.0,
                    mean_sojourn_phase2_s: 240.0,
                    flow_phase1_vph: 150.0,
                    flow_phase2_vph: 50.0,
                },
                behavior: BehaviorSpec::Constant { headway_s: 7.0 },
                batch: BatchSpec::Uniform { max: 7 },
                lambda_bph: 50.0,
            },
            sweep: None,
            simulate: None,
            approx: None,
            table: None,
        }
    }

    #[test]
    fn analyze_emits_one_solved_row() {
        let out = run_analyze(&example1_spec(), Tolerances::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        let row = &out.rows[0];
        assert_eq!(row.source, "analytic");
        assert!(row.ew_s.unwrap() > 0.0);
        assert!(row.rho > 0.0 && row.rho < 1.0);
        assert!(out.summary.contains("E[W]"));
    }

    #[test]
    fn csv_layout_is_stable() {
        let out = run_analyze(&example1_spec(), Tolerances::default()).unwrap();
        let csv = emit_csv(&out.rows);
        let header = csv.lines().next().unwrap();
        assert_eq!(header, CSV_HEADER);
        assert_eq!(csv.lines().count(), 1 + out.rows.len());
    }

    #[test]
    fn sweep_flags_unstable_points_instead_of_failing() {
        let mut spec = example1_spec();
        spec.model.behavior = BehaviorSpec::Consistent {
            gaps: vec![
                GapPoint {
                    headway_s: 5.0,
                    prob: 0.9,
                },
                GapPoint {
                    headway_s: 25.0,
                    prob: 0.1,
                },
            ],
        };
        spec.sweep = Some(SweepSpec {
            qbar_grid_vph: vec![100.0, 420.0],
            behaviors: None,
            include_unbatched: false,
            include_poisson_road: true,
        });
        let out = run_sweep(&spec, Tolerances::default()).unwrap();
        assert_eq!(out.rows.len(), 4);
        let poisson_heavy = out
            .rows
            .iter()
            .find(|r| r.case == "poisson_road" && r.qbar_vph == 420.0)
            .unwrap();
        assert!(poisson_heavy.ew_s.is_none(), "expected a flagged row");
        assert!(poisson_heavy.rho >= 1.0);
        assert!(out.summary.contains("unstable"));
        let modulated_heavy = out
            .rows
            .iter()
            .find(|r| r.case == "modulated" && r.qbar_vph == 420.0)
            .unwrap();
        assert!(modulated_heavy.ew_s.is_some());
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let mut spec = example1_spec();
        spec.simulate = Some(SimulateSpec {
            warmup_s: 200.0,
            measure_s: 2_000.0,
            replications: 2,
            seed: 9,
        });
        let a = run_simulate(&spec, Tolerances::default(), None, None).unwrap();
        let b = run_simulate(&spec, Tolerances::default(), None, None).unwrap();
        assert_eq!(emit_csv(&a.rows), emit_csv(&b.rows));
        let c = run_simulate(&spec, Tolerances::default(), Some(10), None).unwrap();
        assert_ne!(emit_csv(&a.rows), emit_csv(&c.rows));
    }

    #[test]
    fn table_covers_the_grid() {
        let mut spec = example1_spec();
        spec.table = Some(TableSpec {
            qbar_grid_vph: vec![70.0, 420.0],
            behaviors: vec![BehaviorSpec::Constant { headway_s: 7.0 }],
            cases: vec![
                TableCase {
                    label: "uniform".to_string(),
                    batch: BatchSpec::Uniform { max: 7 },
                    lambda_bph: 50.0,
                },
                TableCase {
                    label: "no_batches".to_string(),
                    batch: BatchSpec::Deterministic { size: 1 },
                    lambda_bph: 200.0,
                },
            ],
        });
        let out = run_table(&spec, Tolerances::default()).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert!(out.rows.iter().all(|r| r.ew_s.is_some()));
        assert!(out.rows.iter().any(|r| r.case == "no_batches"));
    }

    #[test]
    fn approx_requires_its_section() {
        let err = run_approx(&example1_spec(), Tolerances::default()).unwrap_err();
        assert!(matches!(err, RunError::MissingSection { section: "approx" }));
        assert_eq!(err.category(), "config");
    }
}
