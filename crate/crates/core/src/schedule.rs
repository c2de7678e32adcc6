//! Step sizes for the arithmetic, geometric and COLTS schedules, PORT, and
//! the tuning formulas that place competitors inside a testing frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PowerFit;
use crate::scheme::{geometric_step, snapped_ceil, LearningScheme, StepFunction};

/// Step chosen for the transition into `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    pub level: usize,
    pub step: u64,
    pub mu: Option<f64>,
    pub port: Option<f64>,
}

/// Distance from `x` to where the tangent of `fit` at `x` meets the
/// asymptote: `(c - value(x)) / slope(x)`.
pub fn mu(fit: &PowerFit, x: f64) -> Result<f64> {
    let slope = fit.slope(x)?;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::NonPositiveSlope(x));
    }
    let gap = fit.asymptote() - fit.value(x)?;
    Ok(gap / slope)
}

/// Probability of relevant training for a step of `step` items.
pub fn port_of(step: u64, mu: f64) -> f64 {
    let step = step as f64;
    if step >= mu {
        1.0
    } else {
        step / mu
    }
}

/// Smallest integer step whose PORT reaches `port`.
pub fn smallest_step(port: f64, mu: f64) -> Result<u64> {
    if !(port > 0.0 && port <= 1.0) {
        return Err(Error::PortOutOfRange(port));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::NonPositiveSlope(mu));
    }
    let mut step = snapped_ceil(port * mu);
    while step > 1 && port_of(step - 1, mu) >= port {
        step -= 1;
    }
    while port_of(step, mu) < port {
        step += 1;
    }
    Ok(step)
}

pub fn colts_step(fit: &PowerFit, x: f64, port: f64) -> Result<u64> {
    if !(port > 0.0 && port <= 1.0) {
        return Err(Error::PortOutOfRange(port));
    }
    smallest_step(port, mu(fit, x)?)
}

/// Common ratio making the first geometric step at the PLevel equal `eta`.
pub fn tune_geometric(eta: u64, plevel_position: u64) -> f64 {
    let p = plevel_position as f64;
    (eta as f64 + p) / p
}

/// PORT giving a first COLTS step of about `eta`, given the trial step
/// `step_at_plevel` computed with PORT `psi` and the data left after the PLevel.
pub fn tune_port(eta: u64, step_at_plevel: u64, remaining: u64) -> f64 {
    let denominator = step_at_plevel.min(remaining).max(1) as f64;
    (eta as f64 / denominator).min(1.0)
}

/// Step for the transition from `level` (observed at `position`) into
/// `level + 1`. `trend` is the effective trend at `level`.
pub fn next_step(
    scheme: &LearningScheme,
    level: usize,
    position: u64,
    trend: Option<&PowerFit>,
) -> Result<StepDecision> {
    let next = level + 1;
    if scheme.uses_uniform_step(level) {
        return Ok(StepDecision {
            level: next,
            step: scheme.eta,
            mu: None,
            port: None,
        });
    }
    let decision = match scheme.step {
        StepFunction::Arithmetic { eta } => StepDecision {
            level: next,
            step: eta,
            mu: None,
            port: None,
        },
        StepFunction::Geometric { ratio } => StepDecision {
            level: next,
            step: geometric_step(position, ratio),
            mu: None,
            port: None,
        },
        StepFunction::Colts { port } => {
            let trend = trend.ok_or(Error::MissingTrend(level))?;
            let m = mu(trend, position as f64)?;
            StepDecision {
                level: next,
                step: smallest_step(port, m)?,
                mu: Some(m),
                port: Some(port),
            }
        }
    };
    Ok(decision)
}
