//! Closed-form interpolation for the mean queue length and sojourn time.
//!
//! The exact pipeline needs a transform solve per load point. For quick
//! sizing there is a two-parameter interpolation that is exact in both
//! limits: at vanishing load the departure-epoch queue holds only the
//! same-batch followers of the departing vehicle (mean `delta`), and toward
//! saturation `(1 - rho) E[X]` tends to a heavy-traffic constant `1/eta`.
//! Interpolating linearly between those endpoints before dividing by
//! `1 - rho` gives
//!
//! `E[X~] = (delta + rho (1/eta - delta)) / (1 - rho)`
//!
//! and the queue-length-to-sojourn identity turns that into mean sojourn
//! and waiting approximations. `eta` comes from the caller; when it is not
//! known, `estimate_eta` extrapolates it from exact solves near saturation
//! and is clearly labeled as doing so.

use crate::queue::BatchDistribution;
use crate::service::ServiceTransform;
use crate::ModelError;

/// Inputs of the interpolation at one load point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxParams {
    /// Light-traffic limit of the mean departure-epoch queue length.
    pub delta: f64,
    /// Heavy-traffic constant: `(1 - rho) E[X] -> 1/eta` as `rho -> 1`.
    pub eta: f64,
    /// Offered load.
    pub rho: f64,
}

impl ApproxParams {
    pub fn new(delta: f64, eta: f64, rho: f64) -> Result<Self, ModelError> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(ModelError::ApproxParamOutOfRange {
                name: "delta",
                value: delta,
            });
        }
        if !eta.is_finite() || eta <= 0.0 {
            return Err(ModelError::ApproxParamOutOfRange {
                name: "eta",
                value: eta,
            });
        }
        if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(ModelError::ApproxParamOutOfRange {
                name: "rho",
                value: rho,
            });
        }
        Ok(Self { delta, eta, rho })
    }
}

/// Light-traffic limit of the mean departure-epoch queue length: the mean
/// number of same-batch vehicles served after a uniformly chosen vehicle,
/// `delta = sum_k k r_{k+1}`.
pub fn lt_limit_delta(batch: &BatchDistribution) -> f64 {
    let r = crate::delay::position_probabilities(batch);
    r.iter()
        .enumerate()
        .skip(1)
        .map(|(idx, &rm)| idx as f64 * rm)
        .sum()
}

/// `E[X~] = (delta + rho (1/eta - delta)) / (1 - rho)`.
pub fn ex_approx(p: &ApproxParams) -> f64 {
    (p.delta + p.rho * (1.0 / p.eta - p.delta)) / (1.0 - p.rho)
}

/// Mean-sojourn approximation via the queue-length identity
/// `E[S] = (E[X] - B''(1)/(2 E[B])) / (lambda E[B])`.
pub fn sojourn_approx(p: &ApproxParams, lambda: f64, batch: &BatchDistribution) -> f64 {
    (ex_approx(p) - batch.second_factorial() / (2.0 * batch.mean())) / (lambda * batch.mean())
}

/// Mean-wait approximation: the sojourn approximation minus one regular
/// (stationary) mean service time.
pub fn wait_approx(
    p: &ApproxParams,
    lambda: f64,
    batch: &BatchDistribution,
    st: &ServiceTransform,
) -> Result<f64, ModelError> {
    Ok(sojourn_approx(p, lambda, batch) - st.mean_service()?)
}

/// Numerical fallback for `eta`: polynomial extrapolation of
/// `(1 - rho) E[X](rho)` to `rho = 1` over the given grid (Neville's
/// scheme), using exact solves supplied by the caller. Returns the
/// extrapolated `eta`; this estimator is for when the heavy-traffic
/// constant is not known in closed form, and callers should label results
/// accordingly.
pub fn estimate_eta(
    exact_ex: impl Fn(f64) -> Result<f64, ModelError>,
    rho_grid: &[f64],
) -> Result<f64, ModelError> {
    if rho_grid.len() < 2 {
        return Err(ModelError::ApproxParamOutOfRange {
            name: "rho_grid",
            value: rho_grid.len() as f64,
        });
    }
    let mut y: Vec<f64> = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        if !(0.0..1.0).contains(&rho) || rho <= 0.0 {
            return Err(ModelError::ApproxParamOutOfRange { name: "rho", value: rho });
        }
        y.push((1.0 - rho) * exact_ex(rho)?);
    }
    // Neville extrapolation of y(rho) to rho = 1.
    let x = rho_grid;
    let mut t = y.clone();
    let n = t.len();
    for level in 1..n {
        for i in 0..n - level {
            let (x0, x1) = (x[i], x[i + level]);
            t[i] = ((1.0 - x0) * t[i + 1] - (1.0 - x1) * t[i]) / (x1 - x0);
        }
    }
    let limit = t[0];
    if !limit.is_finite() || limit <= 0.0 {
        return Err(ModelError::ApproxParamOutOfRange {
            name: "eta_extrapolation",
            value: limit,
        });
    }
    Ok(1.0 / limit)
}
