//! Executing one learning scheme against an accuracy source until it
//! converges or runs out of data.

use serde::{Deserialize, Serialize};

use crate::convergence::{halted, layer, plevel, wlevel, ConvergenceParams};
use crate::error::{Error, Result};
use crate::learners::AccuracySource;
use crate::pattern::Observation;
use crate::schedule::{next_step, StepDecision};
use crate::scheme::LearningScheme;
use crate::trace::LearningTrace;

/// Working and prediction levels shared by every run of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLevels {
    pub wlevel: usize,
    pub plevel: usize,
}

/// Replaces the accuracy observed at `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inflation {
    pub level: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonViable {
    NoWLevel,
    NoPLevel,
    NoCLevel,
    /// An adaptive step was due at a level whose fit failed.
    MissingTrend {
        level: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub label: String,
    pub scheme: LearningScheme,
    pub params: ConvergenceParams,
    pub anchoring: bool,
    /// Levels fixed by the frame; detected by the run itself when absent.
    pub context: Option<FrameLevels>,
    pub inflation: Option<Inflation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub level: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub setup: RunSetup,
    pub trace: LearningTrace,
    /// Step taken out of each level, when one was taken.
    pub steps: Vec<Option<StepDecision>>,
    /// Layer of convergence at each level where it was evaluated.
    pub chis: Vec<Option<f64>>,
    pub wlevel: Option<usize>,
    pub plevel: Option<usize>,
    pub clevel: Option<usize>,
    /// The last requested individual overran the data and was truncated.
    pub exhausted: bool,
    pub non_viable: Option<NonViable>,
    pub fit_failures: Vec<FitFailure>,
}

impl Run {
    pub fn label(&self) -> &str {
        &self.setup.label
    }

    pub fn positions(&self) -> Vec<u64> {
        self.trace.positions()
    }

    pub fn position(&self, level: usize) -> Option<u64> {
        self.trace.position(level)
    }

    pub fn accuracy(&self, level: usize) -> Option<f64> {
        self.trace.level(level).map(|l| l.observation.accuracy)
    }

    pub fn clevel_position(&self) -> Option<u64> {
        self.clevel.and_then(|l| self.position(l))
    }

    pub fn is_viable(&self) -> bool {
        self.non_viable.is_none()
    }
}

/// Highest position a run may observe: the data size, or the scope end when
/// the layer is scoped. Returns the limit and the aligned scope end.
fn limits(source: &dyn AccuracySource, params: &ConvergenceParams) -> Result<(u64, Option<u64>)> {
    let alignment = source.alignment();
    let total = alignment.total();
    match params.scope_end {
        None => Ok((total, None)),
        Some(end) => {
            if end > total {
                return Err(Error::InvalidParams(format!(
                    "scope end {end} exceeds the {total} available items"
                )));
            }
            let aligned = alignment.align(end)?;
            Ok((aligned, Some(aligned)))
        }
    }
}

pub fn execute_run(source: &dyn AccuracySource, setup: &RunSetup) -> Result<Run> {
    setup.params.validate()?;
    if let Some(ctx) = setup.context {
        if ctx.plevel < ctx.wlevel {
            return Err(Error::InvalidParams(format!(
                "PLevel {} precedes WLevel {}",
                ctx.plevel, ctx.wlevel
            )));
        }
    }
    let (limit, scope) = limits(source, &setup.params)?;
    let alignment = source.alignment();
    let scheme = &setup.scheme;
    let tau = setup.params.tau;

    let mut run = Run {
        setup: setup.clone(),
        trace: LearningTrace::new(),
        steps: Vec::new(),
        chis: Vec::new(),
        wlevel: setup.context.map(|c| c.wlevel),
        plevel: setup.context.map(|c| c.plevel),
        clevel: None,
        exhausted: false,
        non_viable: None,
        fit_failures: Vec::new(),
    };
    let mut target = scheme.kernel;
    let mut next_check = 1usize;

    loop {
        let level = run.trace.len() + 1;
        let previous = run.trace.positions().last().copied().unwrap_or(0);
        let (x, truncated) = if target > limit {
            (limit, true)
        } else {
            let aligned = alignment.align(target)?;
            // the scoped layer vanishes at the scope end itself
            if aligned > limit || (scope.is_some() && aligned == limit) {
                (limit, true)
            } else {
                (aligned, false)
            }
        };
        if x <= previous {
            run.exhausted = true;
            break;
        }
        let accuracy = match setup.inflation {
            Some(inf) if inf.level == level => inf.accuracy,
            _ => source.accuracy_at(x)?,
        };
        match run.trace.extend(Observation::new(x, accuracy)?) {
            Ok(()) => {}
            Err(e @ Error::NonMonotonePositions { .. }) => return Err(e),
            Err(e) => run.fit_failures.push(FitFailure {
                level,
                message: e.to_string(),
            }),
        }
        run.steps.push(None);
        run.chis.push(None);

        if run.wlevel.is_none() {
            run.wlevel = wlevel(&run.trace.backbone_points(), &setup.params);
        }
        if let Some(omega) = run.wlevel {
            if setup.anchoring && run.trace.anchored_after().is_none() && run.trace.len() >= omega {
                match run.trace.enable_anchoring(omega) {
                    Ok(()) => {}
                    Err(Error::WLevelUndefined) => {
                        run.non_viable = Some(NonViable::NoWLevel);
                        break;
                    }
                    Err(e) => run.fit_failures.push(FitFailure {
                        level,
                        message: e.to_string(),
                    }),
                }
            }
            if run.plevel.is_none() {
                run.plevel = plevel(&run.trace.effective_backbone_points(), omega);
            }
        }
        if let Some(p) = run.plevel {
            let last_checkable = if truncated { level - 1 } else { level };
            for l in next_check.max(p)..=last_checkable {
                let Some(trend) = run.trace.effective_trend(l) else {
                    continue;
                };
                let position = run.trace.position(l).expect("level observed");
                let chi = layer(&trend, position as f64, scope)?;
                run.chis[l - 1] = Some(chi);
                if halted(chi, tau) {
                    run.clevel = Some(l);
                    break;
                }
            }
            next_check = last_checkable + 1;
        }
        if run.clevel.is_some() {
            break;
        }
        if truncated {
            run.exhausted = true;
            break;
        }
        let trend = run.trace.effective_trend(level);
        let decision = match next_step(scheme, level, x, trend.as_ref()) {
            Ok(d) => d,
            Err(Error::MissingTrend(l)) => {
                run.non_viable = Some(NonViable::MissingTrend { level: l });
                break;
            }
            Err(e) => return Err(e),
        };
        run.steps[level - 1] = Some(decision);
        target = target
            .checked_add(decision.step)
            .ok_or_else(|| Error::InvalidStep(format!("position after level {level} overflows")))?;
    }

    if run.non_viable.is_none() && run.clevel.is_none() {
        run.non_viable = Some(if run.wlevel.is_none() {
            NonViable::NoWLevel
        } else if run.plevel.is_none() {
            NonViable::NoPLevel
        } else {
            NonViable::NoCLevel
        });
    }
    Ok(run)
}
