//! Experiment configuration files.
//!
//! Configs are JSON with units spelled out in every key name: `_vph` is
//! vehicles per hour, `_bph` batches per hour, `_s` seconds, `_per_s` a
//! rate per second. All conversion to internal per-second units happens
//! here, at ingestion, so the model layer never sees an hour. Unknown keys
//! are rejected rather than ignored, and every validation failure names
//! the offending key.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::phase::PhaseProcess;
use crate::queue::BatchDistribution;
use crate::service::{GapMixture, GapPolicy};
use crate::ModelError;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{key}: {source}")]
    Model {
        key: &'static str,
        #[source]
        source: ModelError,
    },
    #[error("{key}: {message}")]
    Constraint { key: &'static str, message: String },
}

fn constraint(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key,
        message: message.into(),
    }
}

/// Whole experiment file: the model plus optional per-command sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx: Option<ApproxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub road: RoadSpec,
    pub behavior: BehaviorSpec,
    pub batch: BatchSpec,
    pub lambda_bph: f64,
}

/// Major-road phase process. Flow rates are vehicles per hour; phase
/// sojourns either as mean seconds (two-phase shorthand) or as a full
/// generator in per-second units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RoadSpec {
    TwoPhase {
        mean_sojourn_phase1_s: f64,
        mean_sojourn_phase2_s: f64,
        flow_phase1_vph: f64,
        flow_phase2_vph: f64,
    },
    Poisson {
        flow_vph: f64,
    },
    General {
        generator_per_s: Vec<Vec<f64>>,
        flows_vph: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BehaviorSpec {
    Constant { headway_s: f64 },
    Inconsistent { gaps: Vec<GapPoint> },
    Consistent { gaps: Vec<GapPoint> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapPoint {
    pub headway_s: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BatchSpec {
    /// Every batch has exactly this many vehicles.
    Deterministic { size: usize },
    /// Uniform on 1..=max.
    Uniform { max: usize },
    /// Two-point mixture on sizes a and b.
    TwoPoint { size_a: usize, prob_a: f64, size_b: usize },
    /// Explicit pmf; entry k-1 is the probability of size k.
    Pmf { probs: Vec<f64> },
}

/// Mean-wait curves over a grid of mean major-road flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Strictly increasing mean flow rates (veh/h). Phase flows are scaled
    /// proportionally, preserving their ratios.
    pub qbar_grid_vph: Vec<f64>,
    /// Behaviors to sweep; defaults to the model's behavior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behaviors: Option<Vec<BehaviorSpec>>,
    /// Also run each point with batches replaced by single vehicles at the
    /// same vehicle rate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub include_unbatched: bool,
    /// Also run each point with the phase structure collapsed to a single
    /// Poisson stream at the same mean flow.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub include_poisson_road: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub warmup_s: f64,
    pub measure_s: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Exact-versus-approximate sojourn comparison over a load grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSpec {
    /// Strictly increasing loads in (0, 1); the arrival rate is derived
    /// from each.
    pub rho_grid: Vec<f64>,
    /// Heavy-traffic constant when known; omitted means it is estimated
    /// numerically and the output says so.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

/// Mean/variance grid over batch cases, behaviors, and mean flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub qbar_grid_vph: Vec<f64>,
    pub behaviors: Vec<BehaviorSpec>,
    pub cases: Vec<TableCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCase {
    pub label: String,
    pub batch: BatchSpec,
    pub lambda_bph: f64,
}

impl ExperimentSpec {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("spec serializes");
        out.push('\n');
        out
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.model.road.build().map(|_| ())?;
        self.model.behavior.build().map(|_| ())?;
        self.model.batch.build().map(|_| ())?;
        if !self.model.lambda_bph.is_finite() || self.model.lambda_bph <= 0.0 {
            return Err(constraint(
                "model.lambda_bph",
                format!("must be finite and positive, got {}", self.model.lambda_bph),
            ));
        }
        if let Some(sweep) = &self.sweep {
            require_strictly_increasing("sweep.qbar_grid_vph", &sweep.qbar_grid_vph)?;
            require_positive_grid("sweep.qbar_grid_vph", &sweep.qbar_grid_vph)?;
            if let Some(behaviors) = &sweep.behaviors {
                if behaviors.is_empty() {
                    return Err(constraint("sweep.behaviors", "must not be empty"));
                }
                for b in behaviors {
                    b.build().map(|_| ())?;
                }
            }
        }
        if let Some(sim) = &self.simulate {
            if !sim.measure_s.is_finite() || sim.measure_s <= 0.0 {
                return Err(constraint(
                    "simulate.measure_s",
                    format!("must be finite and positive, got {}", sim.measure_s),
                ));
            }
            if !sim.warmup_s.is_finite() || sim.warmup_s < 0.0 {
                return Err(constraint(
                    "simulate.warmup_s",
                    format!("must be finite and nonnegative, got {}", sim.warmup_s),
                ));
            }
            if sim.replications == 0 {
                return Err(constraint("simulate.replications", "must be at least 1"));
            }
        }
        if let Some(approx) = &self.approx {
            require_strictly_increasing("approx.rho_grid", &approx.rho_grid)?;
            if approx
                .rho_grid
                .iter()
                .any(|&r| !r.is_finite() || r <= 0.0 || r >= 1.0)
            {
                return Err(constraint(
                    "approx.rho_grid",
                    "every load must lie strictly between 0 and 1",
                ));
            }
            if let Some(eta) = approx.eta {
                if !eta.is_finite() || eta <= 0.0 {
                    return Err(constraint(
                        "approx.eta",
                        format!("must be finite and positive, got {eta}"),
                    ));
                }
            }
        }
        if let Some(table) = &self.table {
            require_strictly_increasing("table.qbar_grid_vph", &table.qbar_grid_vph)?;
            require_positive_grid("table.qbar_grid_vph", &table.qbar_grid_vph)?;
            if table.behaviors.is_empty() {
                return Err(constraint("table.behaviors", "must not be empty"));
            }
            for b in &table.behaviors {
                b.build().map(|_| ())?;
            }
            if table.cases.is_empty() {
                return Err(constraint("table.cases", "must not be empty"));
            }
            for case in &table.cases {
                case.batch.build().map(|_| ())?;
                if !case.lambda_bph.is_finite() || case.lambda_bph <= 0.0 {
                    return Err(constraint(
                        "table.cases[].lambda_bph",
                        format!("must be finite and positive, got {}", case.lambda_bph),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn require_strictly_increasing(key: &'static str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(constraint(key, "must not be empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(constraint(key, "must be strictly increasing"));
    }
    Ok(())
}

fn require_positive_grid(key: &'static str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(constraint(key, "every entry must be finite and positive"));
    }
    Ok(())
}

impl ModelSpec {
    /// Batch arrival rate in events per second.
    pub fn lambda_per_s(&self) -> f64 {
        self.lambda_bph / SECONDS_PER_HOUR
    }
}

impl RoadSpec {
    pub fn build(&self) -> Result<PhaseProcess, ConfigError> {
        let wrap = |source| ConfigError::Model {
            key: "model.road",
            source,
        };
        match self {
            RoadSpec::TwoPhase {
                mean_sojourn_phase1_s,
                mean_sojourn_phase2_s,
                flow_phase1_vph,
                flow_phase2_vph,
            } => {
                for (key, &v) in [
                    ("model.road.two_phase.mean_sojourn_phase1_s", mean_sojourn_phase1_s),
                    ("model.road.two_phase.mean_sojourn_phase2_s", mean_sojourn_phase2_s),
                ] {
                    if !v.is_finite() || v <= 0.0 {
                        return Err(constraint(
                            key,
                            format!("must be finite and positive, got {v}"),
                        ));
                    }
                }
                PhaseProcess::two_phase(
                    1.0 / mean_sojourn_phase1_s,
                    1.0 / mean_sojourn_phase2_s,
                    flow_phase1_vph / SECONDS_PER_HOUR,
                    flow_phase2_vph / SECONDS_PER_HOUR,
                )
                .map_err(wrap)
            }
            RoadSpec::Poisson { flow_vph } => {
                PhaseProcess::poisson(flow_vph / SECONDS_PER_HOUR).map_err(wrap)
            }
            RoadSpec::General {
                generator_per_s,
                flows_vph,
            } => PhaseProcess::new(
                generator_per_s.clone(),
                flows_vph
                    .iter()
                    .map(|q| q / SECONDS_PER_HOUR)
                    .collect(),
            )
            .map_err(wrap),
        }
    }

    /// Mean major-road flow in veh/h implied by this spec.
    pub fn mean_flow_vph(&self) -> Result<f64, ConfigError> {
        let road = self.build()?;
        let per_s = road.mean_flow_rate().map_err(|source| ConfigError::Model {
            key: "model.road",
            source,
        })?;
        Ok(per_s * SECONDS_PER_HOUR)
    }

    /// Same phase structure with all flow rates scaled so the mean flow is
    /// `qbar_vph`.
    pub fn scaled_to_mean_flow(&self, qbar_vph: f64) -> Result<RoadSpec, ConfigError> {
        let current = self.mean_flow_vph()?;
        if current <= 0.0 {
            return Err(constraint(
                "model.road",
                "cannot rescale a road with zero mean flow",
            ));
        }
        let c = qbar_vph / current;
        Ok(match self.clone() {
            RoadSpec::TwoPhase {
                mean_sojourn_phase1_s,
                mean_sojourn_phase2_s,
                flow_phase1_vph,
                flow_phase2_vph,
            } => RoadSpec::TwoPhase {
                mean_sojourn_phase1_s,
                mean_sojourn_phase2_s,
                flow_phase1_vph: c * flow_phase1_vph,
                flow_phase2_vph: c * flow_phase2_vph,
            },
            RoadSpec::Poisson { flow_vph } => RoadSpec::Poisson {
                flow_vph: c * flow_vph,
            },
            RoadSpec::General {
                generator_per_s,
                flows_vph,
            } => RoadSpec::General {
                generator_per_s,
                flows_vph: flows_vph.into_iter().map(|q| c * q).collect(),
            },
        })
    }
}

impl BehaviorSpec {
    pub fn build(&self) -> Result<GapPolicy, ConfigError> {
        let wrap = |source| ConfigError::Model {
            key: "model.behavior",
            source,
        };
        match self {
            BehaviorSpec::Constant { headway_s } => {
                if !headway_s.is_finite() || *headway_s <= 0.0 {
                    return Err(constraint(
                        "model.behavior.constant.headway_s",
                        format!("must be finite and positive, got {headway_s}"),
                    ));
                }
                Ok(GapPolicy::Constant {
                    headway: *headway_s,
                })
            }
            BehaviorSpec::Inconsistent { gaps } => Ok(GapPolicy::Inconsistent {
                gaps: build_mixture(gaps).map_err(wrap)?,
            }),
            BehaviorSpec::Consistent { gaps } => Ok(GapPolicy::Consistent {
                gaps: build_mixture(gaps).map_err(wrap)?,
            }),
        }
    }

    /// Stable one-word name used in output files.
    pub fn label(&self) -> &'static str {
        match self {
            BehaviorSpec::Constant { .. } => "constant",
            BehaviorSpec::Inconsistent { .. } => "inconsistent",
            BehaviorSpec::Consistent { .. } => "consistent",
        }
    }
}

fn build_mixture(gaps: &[GapPoint]) -> Result<GapMixture, ModelError> {
    GapMixture::new(gaps.iter().map(|g| (g.headway_s, g.prob)).collect())
}

impl BatchSpec {
    pub fn build(&self) -> Result<BatchDistribution, ConfigError> {
        let wrap = |source| ConfigError::Model {
            key: "model.batch",
            source,
        };
        match self {
            BatchSpec::Deterministic { size } => {
                BatchDistribution::deterministic(*size).map_err(wrap)
            }
            BatchSpec::Uniform { max } => BatchDistribution::uniform(*max).map_err(wrap),
            BatchSpec::TwoPoint {
                size_a,
                prob_a,
                size_b,
            } => BatchDistribution::two_point(*size_a, *prob_a, *size_b).map_err(wrap),
            BatchSpec::Pmf { probs } => BatchDistribution::new(probs.clone()).map_err(wrap),
        }
    }

    /// Stable short name used in output files.
    pub fn label(&self) -> String {
        match self {
            BatchSpec::Deterministic { size } => format!("deterministic({size})"),
            BatchSpec::Uniform { max } => format!("uniform(1..{max})"),
            BatchSpec::TwoPoint {
                size_a,
                prob_a,
                size_b,
            } => format!("two_point({size_a}@{prob_a},{size_b})"),
            BatchSpec::Pmf { probs } => format!("pmf(max {})", probs.len()),
        }
    }
}
