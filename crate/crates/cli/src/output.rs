//! Result artifacts: one iteration CSV per run, a summary document and
//! two-column plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use colts::harness::{FrameLevels, LocalFrame, MetricsReport, NonViable, Run};
use colts::scheme::StepFunction;

use crate::config::ExperimentConfig;

pub const CSV_HEADER: &str =
    "level,position,accuracy,fit_a,fit_b,fit_c,alpha,anchored_alpha,mu,step,port,chi,halted";

const TREND_SAMPLES: usize = 200;

fn field(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Iteration table of a run. Accuracy is printed with four decimals; every
/// other real number round-trips exactly.
pub fn run_csv(run: &Run) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, level) in run.trace.levels().iter().enumerate() {
        let n = i + 1;
        let trend = level.trend.as_ref();
        let step = run.steps.get(i).copied().flatten();
        let chi = run.chis.get(i).copied().flatten();
        let halted = match chi {
            Some(_) => (run.clevel == Some(n)).to_string(),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{n},{},{:.4},{},{},{},{},{},{},{},{},{},{halted}",
            level.observation.position,
            level.observation.accuracy,
            field(trend.map(|t| t.a)),
            field(trend.map(|t| t.b)),
            field(trend.map(|t| t.c)),
            field(run.trace.alpha(n)),
            field(run.trace.anchored_alpha(n)),
            field(step.and_then(|s| s.mu)),
            step.map(|s| s.step.to_string()).unwrap_or_default(),
            field(step.and_then(|s| s.port)),
            field(chi),
        );
    }
    out
}

fn curve_dat(run: &Run) -> String {
    let mut out = String::from("# position accuracy\n");
    for level in run.trace.levels() {
        let _ = writeln!(
            out,
            "{} {}",
            level.observation.position, level.observation.accuracy
        );
    }
    out
}

fn backbone_dat(run: &Run, values: &[Option<f64>]) -> String {
    let mut out = String::from("# position alpha\n");
    for (i, alpha) in values.iter().enumerate() {
        if let (Some(alpha), Some(position)) = (alpha, run.position(i + 1)) {
            let _ = writeln!(out, "{position} {alpha}");
        }
    }
    out
}

/// The trend the run relied on last, at its CLevel when it has one.
fn trend_dat(run: &Run) -> String {
    let mut out = String::from("# position value\n");
    let last = run.clevel.unwrap_or(run.trace.len());
    let Some(trend) = (1..=last).rev().find_map(|l| run.trace.effective_trend(l)) else {
        return out;
    };
    let positions = run.positions();
    let (Some(&first), Some(&end)) = (positions.first(), positions.last()) else {
        return out;
    };
    for k in 0..TREND_SAMPLES {
        let x = first as f64 + (end - first) as f64 * k as f64 / (TREND_SAMPLES - 1) as f64;
        if let Ok(v) = trend.value(x) {
            let _ = writeln!(out, "{x} {v}");
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub schedule: &'static str,
    pub parameter: f64,
    pub csv: String,
    pub wlevel: Option<usize>,
    pub plevel: Option<usize>,
    pub clevel: Option<usize>,
    pub plevel_position: Option<u64>,
    pub clevel_position: Option<u64>,
    pub exhausted: bool,
    pub non_viable: Option<NonViable>,
    pub fit_failures: usize,
    pub positions: Vec<u64>,
    pub delta: Option<i64>,
    pub dacsr: Option<f64>,
    pub icsr: Option<f64>,
    pub lcsr: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FrameSummary {
    pub variant: String,
    pub viable: bool,
    pub eta: u64,
    pub tau: f64,
    pub iota: Option<f64>,
    pub levels: Option<FrameLevels>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Serialize)]
pub struct InflationFailure {
    pub variant: String,
    pub iota: f64,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub config: &'a ExperimentConfig,
    pub original: FrameSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflated: Option<FrameSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inflation_failure: Option<InflationFailure>,
}

fn schedule_of(run: &Run) -> (&'static str, f64) {
    match run.setup.scheme.step {
        StepFunction::Arithmetic { eta } => ("arithmetic", eta as f64),
        StepFunction::Geometric { ratio } => ("geometric", ratio),
        StepFunction::Colts { port } => ("colts", port),
    }
}

pub fn csv_name(variant: &str, label: &str) -> String {
    format!("runs/{variant}_{label}.csv")
}

pub fn summarize(variant: &str, frame: &LocalFrame) -> Result<FrameSummary> {
    let metrics = frame.metrics()?;
    let runs = frame
        .runs()
        .zip(metrics)
        .map(|(run, (_, report))| {
            let (schedule, parameter) = schedule_of(run);
            let r: Option<MetricsReport> = report;
            RunSummary {
                label: run.label().to_string(),
                schedule,
                parameter,
                csv: csv_name(variant, run.label()),
                wlevel: run.wlevel,
                plevel: run.plevel,
                clevel: run.clevel,
                plevel_position: run.plevel.and_then(|l| run.position(l)),
                clevel_position: run.clevel_position(),
                exhausted: run.exhausted,
                non_viable: run.non_viable,
                fit_failures: run.fit_failures.len(),
                positions: run.positions(),
                delta: r.map(|m| m.delta),
                dacsr: r.map(|m| m.dacsr),
                icsr: r.map(|m| m.icsr),
                lcsr: r.map(|m| m.lcsr),
            }
        })
        .collect();
    Ok(FrameSummary {
        variant: variant.to_string(),
        viable: frame.is_viable(),
        eta: frame.eta,
        tau: frame.tau,
        iota: frame.iota,
        levels: frame.levels,
        runs,
    })
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes the CSV and plot files of every run in `frame`.
pub fn write_frame(out: &Path, variant: &str, frame: &LocalFrame) -> Result<()> {
    fs::create_dir_all(out.join("runs")).with_context(|| format!("creating {}", out.display()))?;
    fs::create_dir_all(out.join("plots")).with_context(|| format!("creating {}", out.display()))?;
    for run in frame.runs() {
        let stem = format!("{variant}_{}", run.label());
        write(out.join(csv_name(variant, run.label())), &run_csv(run))?;
        let plots = out.join("plots");
        write(plots.join(format!("{stem}_curve.dat")), &curve_dat(run))?;
        write(
            plots.join(format!("{stem}_backbone.dat")),
            &backbone_dat(run, &run.trace.backbone()),
        )?;
        write(
            plots.join(format!("{stem}_anchored_backbone.dat")),
            &backbone_dat(run, &run.trace.anchored_backbone()),
        )?;
        write(plots.join(format!("{stem}_trend.dat")), &trend_dat(run))?;
    }
    Ok(())
}

pub fn write_summary(out: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    write(out.join("summary.json"), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use colts::convergence::ConvergenceParams;
    use colts::harness::{execute_frame, FrameSpec};
    use colts::learners::{SyntheticLearner, SyntheticSource};
    use colts::scheme::Alignment;

    fn frame() -> LocalFrame {
        let learner = SyntheticLearner::from_parameters(542.5451, 0.3838, 99.2876, 0.0, 0).unwrap();
        let source =
            SyntheticSource::new(learner, Alignment::Words { total: 1_170_000 }, 1).unwrap();
        let spec = FrameSpec {
            kernel: 5000,
            eta: 5000,
            params: ConvergenceParams {
                scope_end: Some(800_000),
                ..ConvergenceParams::default()
            },
            anchoring: true,
            geometric: true,
            psis: vec![0.5],
        };
        execute_frame(&source, &spec).unwrap()
    }

    #[test]
    fn csv_has_one_row_per_level() {
        let f = frame();
        let csv = run_csv(&f.baseline);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), f.baseline.trace.len() + 1);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 13, "{line}");
        }
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[1], "5000");
        assert_eq!(first[2].split('.').nth(1).map(str::len), Some(4));
        let halted = lines.iter().filter(|l| l.ends_with(",true")).count();
        assert_eq!(halted, 1);
    }

    #[test]
    fn summary_carries_metrics_of_converged_runs() {
        let f = frame();
        let s = summarize("original", &f).unwrap();
        assert!(s.viable);
        assert_eq!(s.runs.len(), 3);
        assert!(s.runs.iter().all(|r| r.lcsr.is_some()));
        assert_eq!(s.runs[0].delta, Some(0));
        assert_eq!(s.runs[2].schedule, "colts");
        assert_eq!(s.runs[2].csv, "runs/original_colts_psi0.5.csv");
    }
}
