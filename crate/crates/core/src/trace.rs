//! Learning traces: the trend fitted at every level, the asymptotic backbone
//! those trends induce, and the canonically anchored variant of both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{fit, fit_from, Observation, PowerFit};

/// Absolute tolerance, in accuracy points per item, under which two slopes
/// count as equal.
pub const RELEVANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLevel {
    pub observation: Observation,
    pub trend: Option<PowerFit>,
    pub anchor: Option<f64>,
    pub anchored_trend: Option<PowerFit>,
}

/// Asymptote of one level together with where it was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackbonePoint {
    pub level: usize,
    pub position: u64,
    pub alpha: f64,
}

/// Levels are 1-based throughout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    levels: Vec<TraceLevel>,
    anchored_after: Option<usize>,
}

impl LearningTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[TraceLevel] {
        &self.levels
    }

    pub fn level(&self, level: usize) -> Option<&TraceLevel> {
        level.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn position(&self, level: usize) -> Option<u64> {
        self.level(level).map(|l| l.observation.position)
    }

    pub fn positions(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.observation.position).collect()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.levels.iter().map(|l| l.observation).collect()
    }

    /// The WLevel after which fits are anchored, if anchoring is on.
    pub fn anchored_after(&self) -> Option<usize> {
        self.anchored_after
    }

    /// Appends an observation and fits the trend of the new level. The
    /// observation is kept even when the fit fails; the level then has no
    /// trend and the fit error is returned.
    pub fn extend(&mut self, observation: Observation) -> Result<()> {
        if let Some(last) = self.levels.last() {
            if observation.position <= last.observation.position {
                return Err(Error::NonMonotonePositions {
                    previous: last.observation.position,
                    next: observation.position,
                });
            }
        }
        let previous = self.levels.last().and_then(|l| l.trend);
        self.levels.push(TraceLevel {
            observation,
            trend: None,
            anchor: None,
            anchored_trend: None,
        });
        let level = self.levels.len();
        if level < 3 {
            return Ok(());
        }
        let observations = self.observations();
        let trend = fit_warm(&observations, None, previous.as_ref());
        let mut outcome = Ok(());
        match trend {
            Ok(t) => self.levels[level - 1].trend = Some(t),
            Err(e) => outcome = Err(e),
        }
        if let Some(omega) = self.anchored_after {
            if level > omega {
                if let Err(e) = self.fit_anchored_level(level, &observations) {
                    outcome = outcome.and(Err(e));
                }
            }
        }
        outcome
    }

    /// Turns on canonical anchoring after level `omega`, fitting anchored
    /// trends for every level already present beyond it.
    pub fn enable_anchoring(&mut self, omega: usize) -> Result<()> {
        if self.alpha(omega).is_none() {
            return Err(Error::WLevelUndefined);
        }
        self.anchored_after = Some(omega);
        for l in self.levels.iter_mut() {
            l.anchor = None;
            l.anchored_trend = None;
        }
        let observations = self.observations();
        let mut outcome = Ok(());
        for level in omega + 1..=self.len() {
            if let Err(e) = self.fit_anchored_level(level, &observations) {
                outcome = outcome.and(Err(e));
            }
        }
        outcome
    }

    fn fit_anchored_level(&mut self, level: usize, observations: &[Observation]) -> Result<()> {
        let anchor = self.anchor_source(level).ok_or(Error::WLevelUndefined)?;
        let start = self.levels[level - 2]
            .anchored_trend
            .or(self.levels[level - 1].trend);
        self.levels[level - 1].anchor = Some(anchor);
        let fitted = fit_warm(&observations[..level], Some(anchor), start.as_ref())?;
        self.levels[level - 1].anchored_trend = Some(fitted);
        Ok(())
    }

    // Canonical anchor of `level`: the effective asymptote of the closest
    // earlier level that has one.
    fn anchor_source(&self, level: usize) -> Option<f64> {
        (1..level).rev().find_map(|l| self.effective_alpha(l))
    }

    /// Anchors `A_{omega+1} = alpha_omega`, `A_{i+1} = anchored alpha_i`,
    /// computed afresh for every level beyond `omega`.
    pub fn canonical_anchor_sequence(&self, omega: usize) -> Result<Vec<(usize, f64)>> {
        if self.anchored_after == Some(omega) {
            return Ok(self
                .levels
                .iter()
                .enumerate()
                .skip(omega)
                .filter_map(|(i, l)| l.anchor.map(|a| (i + 1, a)))
                .collect());
        }
        let mut copy = self.clone();
        if let Err(Error::WLevelUndefined) = copy.enable_anchoring(omega) {
            return Err(Error::WLevelUndefined);
        }
        copy.canonical_anchor_sequence(omega)
    }

    /// Unanchored asymptote at `level`.
    pub fn alpha(&self, level: usize) -> Option<f64> {
        self.level(level)
            .and_then(|l| l.trend)
            .map(|t| t.asymptote())
    }

    pub fn anchored_alpha(&self, level: usize) -> Option<f64> {
        self.level(level)
            .and_then(|l| l.anchored_trend)
            .map(|t| t.asymptote())
    }

    /// The trend a run relies on at `level`: anchored beyond the anchoring
    /// level, the plain fit otherwise.
    pub fn effective_trend(&self, level: usize) -> Option<PowerFit> {
        let l = self.level(level)?;
        match self.anchored_after {
            Some(omega) if level > omega => l.anchored_trend,
            _ => l.trend,
        }
    }

    pub fn effective_alpha(&self, level: usize) -> Option<f64> {
        self.effective_trend(level).map(|t| t.asymptote())
    }

    pub fn backbone(&self) -> Vec<Option<f64>> {
        (1..=self.len()).map(|l| self.alpha(l)).collect()
    }

    pub fn anchored_backbone(&self) -> Vec<Option<f64>> {
        (1..=self.len()).map(|l| self.anchored_alpha(l)).collect()
    }

    /// Defined unanchored backbone points, in level order.
    pub fn backbone_points(&self) -> Vec<BackbonePoint> {
        self.points(|l| self.alpha(l))
    }

    pub fn effective_backbone_points(&self) -> Vec<BackbonePoint> {
        self.points(|l| self.effective_alpha(l))
    }

    fn points(&self, alpha: impl Fn(usize) -> Option<f64>) -> Vec<BackbonePoint> {
        (1..=self.len())
            .filter_map(|level| {
                alpha(level).map(|alpha| BackbonePoint {
                    level,
                    position: self.levels[level - 1].observation.position,
                    alpha,
                })
            })
            .collect()
    }

    /// Whether the case at `level + 1` is relevant for the trend at `level`.
    pub fn is_relevant(&self, level: usize) -> Result<bool> {
        let here = self
            .effective_trend(level)
            .ok_or(Error::MissingTrend(level))?;
        let next = self
            .effective_trend(level + 1)
            .ok_or(Error::MissingTrend(level + 1))?;
        slopes_differ(
            &here,
            self.levels[level - 1].observation.position as f64,
            &next,
            self.levels[level].observation.position as f64,
        )
    }
}

pub fn slopes_differ(here: &PowerFit, x: f64, next: &PowerFit, next_x: f64) -> Result<bool> {
    Ok((here.slope(x)? - next.slope(next_x)?).abs() > RELEVANCE_TOLERANCE)
}

fn fit_warm(
    observations: &[Observation],
    anchor: Option<f64>,
    start: Option<&PowerFit>,
) -> Result<PowerFit> {
    match start {
        Some(s) => fit_from(observations, anchor, s),
        None => fit(observations, anchor),
    }
}
