mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use colts::error::Error;
use colts::harness::{execute_frame, inflate_frame};

use config::{prepare, ExperimentConfig, Prepared, RawConfig};
use output::{summarize, write_frame, write_summary, InflationFailure, Summary};

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Adaptive sampling experiments on learning curves.
#[derive(Debug, Parser)]
#[command(name = "colts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the baseline and competitor schedules and write their results.
    Run(Overrides),
    /// Check the configuration and report every problem found.
    Validate(Overrides),
}

/// Each flag overrides the key of the same name from the config file and
/// from `COLTS_<KEY>` environment variables.
#[derive(Debug, Args)]
struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long, env = "COLTS_CONFIG")]
    config: Option<PathBuf>,
    /// Tagged corpus of `word<TAB>tag` lines, sentences separated by blank lines.
    #[arg(long)]
    corpus: Option<String>,
    /// Fixed evaluation corpus; k-fold cross validation when absent.
    #[arg(long)]
    heldout: Option<String>,
    /// synthetic, baseline or external.
    #[arg(long)]
    learner: Option<String>,
    /// Synthetic curve parameters `a,b,c` of `c - a * x^-b`.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// External learner command with `{train}` and `{test}` placeholders.
    #[arg(long = "command")]
    command_template: Option<String>,
    /// Training words available to the synthetic learner without a corpus.
    #[arg(long)]
    corpus_words: Option<String>,
    #[arg(long)]
    scramble: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    varsigma: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Word position of the scoped convergence layer, or `none`.
    #[arg(long)]
    scope_end: Option<String>,
    #[arg(long)]
    anchoring: Option<String>,
    /// Comma separated subset of arithmetic, geometric, colts.
    #[arg(long)]
    schedules: Option<String>,
    /// Comma separated trial PORTs.
    #[arg(long)]
    psi: Option<String>,
    /// Inflation multiplier in percent, or `none`.
    #[arg(long)]
    inflate: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("corpus", &self.corpus),
            ("heldout", &self.heldout),
            ("learner", &self.learner),
            ("curve", &self.curve),
            ("noise", &self.noise),
            ("command", &self.command_template),
            ("corpus_words", &self.corpus_words),
            ("scramble", &self.scramble),
            ("kernel", &self.kernel),
            ("eta", &self.eta),
            ("nu", &self.nu),
            ("varsigma", &self.varsigma),
            ("lambda", &self.lambda),
            ("tau", &self.tau),
            ("scope_end", &self.scope_end),
            ("anchoring", &self.anchoring),
            ("schedules", &self.schedules),
            ("psi", &self.psi),
            ("inflate", &self.inflate),
            ("folds", &self.folds),
            ("seed", &self.seed),
            ("out", &self.out),
        ]
    }

    fn resolve(&self) -> Result<ExperimentConfig, Vec<String>> {
        let mut raw = RawConfig::default();
        let mut diagnostics = Vec::new();
        if let Some(path) = &self.config {
            match std::fs::read_to_string(path) {
                Ok(text) => diagnostics.extend(raw.apply_file(&text)),
                Err(e) => diagnostics.push(format!("config {}: {e}", path.display())),
            }
        }
        diagnostics.extend(raw.apply_env(std::env::vars()));
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                raw.set(key, v.clone()).expect("flag keys are known");
            }
        }
        if !diagnostics.is_empty() {
            return Err(diagnostics);
        }
        ExperimentConfig::from_raw(&raw)
    }

    fn prepare(&self) -> Result<Prepared, Vec<String>> {
        prepare(self.resolve()?)
    }
}

fn report(diagnostics: &[String]) {
    for d in diagnostics {
        eprintln!("error: {d}");
    }
}

fn run(prepared: Prepared) -> Result<()> {
    let Prepared {
        config,
        source,
        spec,
    } = prepared;
    let out = config.out.clone();
    let frame = execute_frame(source.as_ref(), &spec).context("running the original frame")?;
    write_frame(&out, "original", &frame)?;
    let mut summary = Summary {
        config: &config,
        original: summarize("original", &frame)?,
        inflated: None,
        inflation_failure: None,
    };
    match config.inflate {
        Some(iota) if frame.is_viable() => match inflate_frame(source.as_ref(), &frame, iota) {
            Ok(inflated) => {
                write_frame(&out, "inflated", &inflated)?;
                summary.inflated = Some(summarize("inflated", &inflated)?);
            }
            Err(Error::NonViableInflation(reason)) => {
                summary.inflation_failure = Some(InflationFailure {
                    variant: "inflated".into(),
                    iota,
                    reason,
                });
            }
            Err(e) => return Err(e).context("running the inflated frame"),
        },
        _ => {}
    }
    write_summary(&out, &summary)?;
    for r in &summary.original.runs {
        match (r.clevel, r.lcsr) {
            (Some(cl), Some(lcsr)) => println!("{}: clevel {cl}, lcsr {lcsr:.4}", r.label),
            _ => println!("{}: not converged", r.label),
        }
    }
    if !summary.original.viable {
        println!("frame not viable: the baseline found no convergence level");
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(o) => match o.prepare() {
            Ok(p) => {
                println!(
                    "configuration valid: {} training items, {} schedules",
                    p.source.alignment().total(),
                    1 + usize::from(p.spec.geometric) + p.spec.psis.len()
                );
                ExitCode::SUCCESS
            }
            Err(d) => {
                report(&d);
                ExitCode::from(EXIT_INVALID)
            }
        },
        Command::Run(o) => match o.prepare() {
            Err(d) => {
                report(&d);
                ExitCode::from(EXIT_INVALID)
            }
            Ok(p) => match run(p) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            },
        },
    }
}
