//! Analytic solver and cross-validating simulator for gap acceptance at a
//! priority intersection whose major road carries Markov-modulated traffic.
//!
//! Minor-road vehicles arrive in Poisson batches and cross one at a time
//! whenever the gap to the next major-road vehicle exceeds a critical
//! headway. That makes the minor road a single-server queue with batch
//! arrivals, semi-Markov services (the road phase couples consecutive
//! services), and an exceptional first service in each busy period. This
//! crate computes queue-length, waiting-time, and sojourn-time moments
//! exactly via transform methods and checks them against a discrete-event
//! simulation of the physical intersection.

pub mod approx;
pub mod config;
pub mod delay;
pub mod experiment;
pub mod numerics;
pub mod phase;
pub mod queue;
pub mod service;
pub mod sim;

pub use delay::{DelayMoments, DelayTransforms, SuperServiceTransform};
pub use phase::PhaseProcess;
pub use queue::{BatchDistribution, ChainUnit, MarkedPgfSystem, QueueSolution};
pub use service::{GapMixture, GapPolicy, ServiceTransform};
pub use sim::{simulate, RepStats, SimConfig, SimReport};

/// Validation and solve failures for the intersection model.
///
/// Construction errors name the violated constraint; numeric errors wrap the
/// kernel failure that produced them.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("phase set is empty")]
    EmptyPhaseSet,
    #[error("generator is not square")]
    GeneratorNotSquare,
    #[error("{rates} flow rates given for {phases} phases")]
    RateCountMismatch { rates: usize, phases: usize },
    #[error("generator entry ({row}, {col}) is not finite")]
    NonFiniteGeneratorEntry { row: usize, col: usize },
    #[error("generator off-diagonal ({row}, {col}) is negative")]
    NegativeTransitionRate { row: usize, col: usize },
    #[error("generator diagonal of row {row} is positive")]
    PositiveDiagonal { row: usize },
    #[error("generator row {row} sums to {sum}, not zero")]
    RowSumNotZero { row: usize, sum: f64 },
    #[error("flow rate of phase {phase} is {rate}, must be finite and nonnegative")]
    NegativeFlowRate { phase: usize, rate: f64 },
    #[error("phase jump graph is not strongly connected")]
    ReduciblePhaseGraph,
    #[error("stationary vector space has dimension {dimension}, expected 1")]
    StationaryVectorNotUnique { dimension: usize },
    #[error("stationary vector has a non-positive entry")]
    StationaryVectorNotPositive,
    #[error("gap mixture has no support points")]
    EmptyGapMixture,
    #[error("critical headway {index} is {value}, must be finite and positive")]
    NonPositiveHeadway { index: usize, value: f64 },
    #[error("gap mixture weight {index} is {weight}, must be positive")]
    NonPositiveGapWeight { index: usize, weight: f64 },
    #[error("gap mixture weights sum to {sum}, not 1")]
    GapWeightsNotNormalized { sum: f64 },
    #[error("batch size distribution is empty")]
    EmptyBatchDistribution,
    #[error("probability of batch size {size} is {prob}, must be finite and nonnegative")]
    BatchProbabilityNegative { size: usize, prob: f64 },
    #[error("batch size probabilities sum to {sum}, not 1")]
    BatchProbabilitiesNotNormalized { sum: f64 },
    #[error("arrival rate {rate} must be finite and positive")]
    NonPositiveArrivalRate { rate: f64 },
    #[error("offered load {load} is at or above the tractable limit {limit}")]
    LoadExceedsStableLimit { load: f64, limit: f64 },
    #[error("null space dimension {nullity} cannot supply {multiplicity} boundary conditions")]
    DegenerateRootCondition { nullity: usize, multiplicity: usize },
    #[error("boundary probability of phase {phase} came out {re}+{im}i")]
    BoundaryVectorInvalid { phase: usize, re: f64, im: f64 },
    #[error("chain equation solvability residual {residual} at z = 1")]
    NormalizationInconsistent { residual: f64 },
    #[error("approximation parameter {name} out of range: {value}")]
    ApproxParamOutOfRange { name: &'static str, value: f64 },
    #[error("simulation parameter {name} out of range: {value}")]
    SimParamOutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

/// Compile and run every code block in the guide and the README as part of
/// `cargo test`, so the documentation cannot drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Readme, "../../../README.md");
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Road, "../../../book/src/road.md");
    chapter!(Service, "../../../book/src/service.md");
    chapter!(Queue, "../../../book/src/queue.md");
    chapter!(Delays, "../../../book/src/delays.md");
    chapter!(Approx, "../../../book/src/approx.md");
    chapter!(Simulation, "../../../book/src/simulation.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
