//! Local testing frames: an arithmetic baseline plus competitors tuned to
//! the baseline's PLevel, optionally stress-tested by inflating one
//! observation per run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::ConvergenceParams;
use crate::error::{Error, Result};
use crate::harness::metrics::{evaluate, MetricsReport};
use crate::harness::run::{execute_run, FrameLevels, Inflation, NonViable, Run, RunSetup};
use crate::learners::AccuracySource;
use crate::schedule::{colts_step, tune_geometric, tune_port};
use crate::scheme::{LearningScheme, StepFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub kernel: u64,
    pub eta: u64,
    pub params: ConvergenceParams,
    pub anchoring: bool,
    pub geometric: bool,
    /// One COLTS competitor per trial PORT.
    pub psis: Vec<f64>,
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.kernel == 0 || self.eta == 0 {
            return Err(Error::InvalidParams(
                "kernel and eta must be positive".into(),
            ));
        }
        if let Some(psi) = self.psis.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::PortOutOfRange(*psi));
        }
        Ok(())
    }
}

pub fn colts_label(psi: f64) -> String {
    format!("colts_psi{psi}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub eta: u64,
    pub tau: f64,
    pub levels: Option<FrameLevels>,
    pub baseline: Run,
    pub competitors: Vec<Run>,
    /// Multiplier used when this frame is an inflated variant.
    pub iota: Option<f64>,
}

impl LocalFrame {
    pub fn runs(&self) -> impl Iterator<Item = &Run> {
        std::iter::once(&self.baseline).chain(self.competitors.iter())
    }

    pub fn run(&self, label: &str) -> Option<&Run> {
        self.runs().find(|r| r.label() == label)
    }

    pub fn is_viable(&self) -> bool {
        self.levels.is_some() && self.baseline.is_viable()
    }

    /// Metrics of every run against the baseline; `None` for runs that did
    /// not converge or when the frame itself is not viable.
    pub fn metrics(&self) -> Result<Vec<(String, Option<MetricsReport>)>> {
        let base_cl = self.baseline.clevel;
        let base_positions = self.baseline.positions();
        self.runs()
            .map(|run| {
                let report = match (self.levels, base_cl, run.clevel) {
                    (Some(levels), Some(bcl), Some(rcl)) => Some(evaluate(
                        &run.positions(),
                        rcl,
                        &base_positions,
                        bcl,
                        levels.plevel,
                        self.eta,
                    )?),
                    _ => None,
                };
                Ok((run.label().to_string(), report))
            })
            .collect()
    }

    pub fn metrics_of(&self, label: &str) -> Result<Option<MetricsReport>> {
        Ok(self
            .metrics()?
            .into_iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, m)| m))
    }
}

fn baseline_setup(spec: &FrameSpec) -> Result<RunSetup> {
    Ok(RunSetup {
        label: "arithmetic".into(),
        scheme: LearningScheme::arithmetic(spec.kernel, spec.eta)?,
        params: spec.params,
        anchoring: spec.anchoring,
        context: None,
        inflation: None,
    })
}

/// Competitor setups tuned so that their first own step is about `eta`.
pub fn competitor_setups(
    source: &dyn AccuracySource,
    spec: &FrameSpec,
    baseline: &Run,
    levels: FrameLevels,
) -> Result<Vec<RunSetup>> {
    let p = levels.plevel;
    let x = baseline.position(p).ok_or(Error::MissingTrend(p))?;
    let remaining = source.alignment().total().saturating_sub(x);
    let mut steps = Vec::new();
    if spec.geometric {
        steps.push((
            "geometric".to_string(),
            StepFunction::geometric(tune_geometric(spec.eta, x))?,
        ));
    }
    if !spec.psis.is_empty() {
        let trend = baseline
            .trace
            .effective_trend(p)
            .ok_or(Error::MissingTrend(p))?;
        for &psi in &spec.psis {
            let trial = colts_step(&trend, x as f64, psi)?;
            let port = tune_port(spec.eta, trial, remaining);
            steps.push((colts_label(psi), StepFunction::colts(port)?));
        }
    }
    steps
        .into_iter()
        .map(|(label, step)| {
            Ok(RunSetup {
                label,
                scheme: LearningScheme::new(spec.kernel, step, spec.eta, p)?,
                params: spec.params,
                anchoring: spec.anchoring,
                context: Some(levels),
                inflation: None,
            })
        })
        .collect()
}

fn run_all(source: &dyn AccuracySource, setups: &[RunSetup]) -> Result<Vec<Run>> {
    setups.par_iter().map(|s| execute_run(source, s)).collect()
}

pub fn execute_frame(source: &dyn AccuracySource, spec: &FrameSpec) -> Result<LocalFrame> {
    spec.validate()?;
    let baseline = execute_run(source, &baseline_setup(spec)?)?;
    let levels = match (baseline.wlevel, baseline.plevel) {
        (Some(wlevel), Some(plevel)) if baseline.clevel.is_some() => {
            Some(FrameLevels { wlevel, plevel })
        }
        _ => None,
    };
    let competitors = match levels {
        Some(l) => run_all(source, &competitor_setups(source, spec, &baseline, l)?)?,
        None => Vec::new(),
    };
    Ok(LocalFrame {
        eta: spec.eta,
        tau: spec.params.tau,
        levels,
        baseline,
        competitors,
        iota: None,
    })
}

/// The observation to inflate in `run`: the last level strictly before both
/// the run's and the baseline's convergence positions, raised by `iota`
/// percent and capped by the run's asymptote at its CLevel.
pub fn inflation_for(run: &Run, baseline: &Run, plevel: usize, iota: f64) -> Result<Inflation> {
    let not_viable = |why: String| Error::NonViableInflation(format!("{}: {why}", run.label()));
    let own = run
        .clevel_position()
        .ok_or_else(|| not_viable("run has no CLevel".into()))?;
    let base = baseline
        .clevel_position()
        .ok_or_else(|| not_viable("baseline has no CLevel".into()))?;
    let bound = own.min(base);
    let level = run
        .positions()
        .iter()
        .rposition(|&p| p < bound)
        .map(|i| i + 1)
        .ok_or_else(|| not_viable("no level precedes convergence".into()))?;
    if level <= plevel {
        return Err(not_viable(format!(
            "inflated level {level} does not follow PLevel {plevel}"
        )));
    }
    let observed = run.accuracy(level).expect("level observed");
    let cap = run
        .clevel
        .and_then(|cl| run.trace.effective_alpha(cl))
        .ok_or_else(|| not_viable("no asymptote at CLevel".into()))?;
    let accuracy = ((1.0 + iota / 100.0) * observed).min(cap).min(100.0);
    Ok(Inflation { level, accuracy })
}

/// Re-runs every run of a viable frame with one inflated observation each,
/// keeping the frame's WLevel and PLevel.
pub fn inflate_frame(
    source: &dyn AccuracySource,
    frame: &LocalFrame,
    iota: f64,
) -> Result<LocalFrame> {
    if !(iota > 0.0 && iota.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "inflation index {iota} must be positive"
        )));
    }
    let levels = frame
        .levels
        .filter(|_| frame.is_viable())
        .ok_or_else(|| Error::NonViableInflation("frame is not viable".into()))?;
    let setups = frame
        .runs()
        .map(|run| {
            let inflation = inflation_for(run, &frame.baseline, levels.plevel, iota)?;
            Ok(RunSetup {
                context: Some(levels),
                inflation: Some(inflation),
                ..run.setup.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = run_all(source, &setups)?;
    let competitors = runs.split_off(1);
    let baseline = runs.pop().expect("baseline run");
    debug_assert!(baseline.plevel == Some(levels.plevel));
    Ok(LocalFrame {
        eta: frame.eta,
        tau: frame.tau,
        levels: (baseline.non_viable != Some(NonViable::NoCLevel)).then_some(levels),
        baseline,
        competitors,
        iota: Some(iota),
    })
}
