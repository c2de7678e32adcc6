//! Working and prediction levels, the layer of convergence and the halting
//! rule built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PowerFit;
use crate::trace::BackbonePoint;

pub const DEFAULT_NU: f64 = 2e-5;
pub const DEFAULT_SLOWDOWN: u32 = 1;
pub const DEFAULT_LOOKAHEAD: usize = 5;
pub const DEFAULT_TAU: f64 = 1.0;
/// Scope end used when the scoped layer is requested without a position.
pub const DEFAULT_SCOPE_END: u64 = 800_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    /// Verticality threshold `nu`, in (0, 1).
    pub nu: f64,
    /// Slowdown `varsigma`, at least 1.
    pub slowdown: u32,
    /// Look-ahead `lambda`.
    pub lookahead: usize,
    /// Convergence threshold `tau`, in accuracy points.
    pub tau: f64,
    /// Word position evaluated in place of the asymptote by the scoped layer.
    pub scope_end: Option<u64>,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            nu: DEFAULT_NU,
            slowdown: DEFAULT_SLOWDOWN,
            lookahead: DEFAULT_LOOKAHEAD,
            tau: DEFAULT_TAU,
            scope_end: None,
        }
    }
}

impl ConvergenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidParams(format!(
                "nu {} is outside (0, 1)",
                self.nu
            )));
        }
        if self.slowdown == 0 {
            return Err(Error::InvalidParams("slowdown must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "tau {} must be positive",
                self.tau
            )));
        }
        if self.scope_end == Some(0) {
            return Err(Error::InvalidParams("scope end must be positive".into()));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        verticality_threshold(self.nu, self.slowdown)
    }
}

/// `nu^(1/varsigma) / (1 - nu)`, the bound on the backbone's per-item
/// variation inside a working window.
pub fn verticality_threshold(nu: f64, slowdown: u32) -> f64 {
    nu.powf(1.0 / slowdown as f64) / (1.0 - nu)
}

/// Smallest level `omega` such that for every `i` in `[omega, omega + lambda]`
/// the backbone moves by at most the verticality threshold per item between
/// levels `i` and `i + 1`. Levels must be consecutive across each window.
pub fn wlevel(backbone: &[BackbonePoint], params: &ConvergenceParams) -> Option<usize> {
    let threshold = params.threshold();
    let pairs = params.lookahead + 1;
    let flat: Vec<Option<bool>> = backbone
        .windows(2)
        .map(|w| {
            if w[1].level != w[0].level + 1 || w[1].position <= w[0].position {
                return None;
            }
            let variation =
                (w[1].alpha - w[0].alpha).abs() / (w[1].position - w[0].position) as f64;
            Some(variation <= threshold)
        })
        .collect();
    (0..flat.len())
        .find(|&start| {
            start + pairs <= flat.len()
                && flat[start..start + pairs].iter().all(|f| *f == Some(true))
        })
        .map(|start| backbone[start].level)
}

/// Smallest level at or after `omega` whose asymptote does not exceed 100.
pub fn plevel(backbone: &[BackbonePoint], omega: usize) -> Option<usize> {
    backbone
        .iter()
        .find(|p| p.level >= omega && p.alpha <= 100.0)
        .map(|p| p.level)
}

/// Layer of convergence of `trend` at `x`: the accuracy still to be gained,
/// up to the asymptote or, when scoped, up to the trend's value at
/// `scope_end`.
pub fn layer(trend: &PowerFit, x: f64, scope_end: Option<u64>) -> Result<f64> {
    let here = trend.value(x)?;
    match scope_end {
        None => Ok((here - trend.asymptote()).abs()),
        Some(end) => {
            if (end as f64) < x {
                return Err(Error::ScopeBeforeX {
                    scope: end,
                    position: x as u64,
                });
            }
            Ok((here - trend.value(end as f64)?).abs())
        }
    }
}

pub fn halted(chi: f64, tau: f64) -> bool {
    chi <= tau
}

/// First level at or after `plevel` whose layer is within `tau`.
pub fn clevel(layers: &[(usize, f64)], plevel: usize, tau: f64) -> Option<usize> {
    layers
        .iter()
        .find(|(level, chi)| *level >= plevel && halted(*chi, tau))
        .map(|(level, _)| *level)
}
