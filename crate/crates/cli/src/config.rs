//! Experiment configuration: built-in defaults, then a flat `key = value`
//! file, then `COLTS_*` environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use colts::convergence::{
    ConvergenceParams, DEFAULT_LOOKAHEAD, DEFAULT_NU, DEFAULT_SCOPE_END, DEFAULT_SLOWDOWN,
    DEFAULT_TAU,
};
use colts::harness::FrameSpec;
use colts::learners::{
    partition, AccuracySource, CorpusSource, Evaluation, ExternalLearner, LearnerSpec,
    SyntheticLearner, SyntheticSource,
};
use colts::scheme::{Alignment, SentenceCorpus};

pub const ENV_PREFIX: &str = "COLTS_";

/// Every key accepted in files, environment variables and flags.
pub const KEYS: &[&str] = &[
    "corpus",
    "heldout",
    "learner",
    "curve",
    "noise",
    "command",
    "corpus_words",
    "scramble",
    "kernel",
    "eta",
    "nu",
    "varsigma",
    "lambda",
    "tau",
    "scope_end",
    "anchoring",
    "schedules",
    "psi",
    "inflate",
    "folds",
    "seed",
    "out",
];

fn defaults() -> BTreeMap<String, String> {
    let pairs = [
        ("learner", "synthetic".to_string()),
        ("curve", "542.5451,0.3838,99.2876".to_string()),
        ("noise", "0".to_string()),
        ("corpus_words", "1170000".to_string()),
        ("scramble", "true".to_string()),
        ("kernel", "5000".to_string()),
        ("eta", "5000".to_string()),
        ("nu", DEFAULT_NU.to_string()),
        ("varsigma", DEFAULT_SLOWDOWN.to_string()),
        ("lambda", DEFAULT_LOOKAHEAD.to_string()),
        ("tau", DEFAULT_TAU.to_string()),
        ("scope_end", DEFAULT_SCOPE_END.to_string()),
        ("anchoring", "true".to_string()),
        ("schedules", "arithmetic,geometric,colts".to_string()),
        ("psi", "0.2,0.5,0.8".to_string()),
        ("inflate", "1".to_string()),
        ("folds", "10".to_string()),
        ("seed", "0".to_string()),
        ("out", "colts-out".to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Raw string values by key, each layer overriding the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig { values: defaults() }
    }
}

fn unquote(value: &str) -> &str {
    let v = value.trim();
    if v.len() >= 2
        && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\'')))
    {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl RawConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key `{key}`"));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, text: &str) -> Vec<String> {
        let mut diagnostics = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                diagnostics.push(format!("config line {}: expected `key = value`", n + 1));
                continue;
            };
            if let Err(e) = self.set(key.trim(), unquote(value)) {
                diagnostics.push(format!("config line {}: {e}", n + 1));
            }
        }
        diagnostics
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Vec<String> {
        let mut diagnostics = Vec::new();
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if key == "config" {
                continue;
            }
            if let Err(e) = self.set(&key, value) {
                diagnostics.push(format!("environment {name}: {e}"));
            }
        }
        diagnostics
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Synthetic,
    Baseline,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Arithmetic,
    Geometric,
    Colts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub learner: LearnerKind,
    pub curve: (f64, f64, f64),
    pub noise: f64,
    pub command: Option<String>,
    pub corpus_words: u64,
    pub scramble: bool,
    pub kernel: u64,
    pub eta: u64,
    pub nu: f64,
    pub varsigma: u32,
    pub lambda: usize,
    pub tau: f64,
    pub scope_end: Option<u64>,
    pub anchoring: bool,
    pub schedules: Vec<Schedule>,
    pub psi: Vec<f64>,
    pub inflate: Option<f64>,
    pub folds: usize,
    pub seed: u64,
    pub out: PathBuf,
}

struct Parser<'a> {
    raw: &'a RawConfig,
    diagnostics: Vec<String>,
}

impl<'a> Parser<'a> {
    fn text(&self, key: &str) -> Option<&'a str> {
        self.raw.get(key).map(str::trim).filter(|v| !v.is_empty())
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, fallback: T) -> T
    where
        T::Err: fmt::Display,
    {
        match self.text(key) {
            None => fallback,
            Some(v) => v.parse().unwrap_or_else(|e| {
                self.diagnostics
                    .push(format!("{key}: cannot parse `{v}`: {e}"));
                fallback
            }),
        }
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        match self.text(key) {
            None | Some("none") => None,
            Some(v) => match v.parse() {
                Ok(x) => Some(x),
                Err(e) => {
                    self.diagnostics
                        .push(format!("{key}: cannot parse `{v}`: {e}"));
                    None
                }
            },
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Vec<T>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.text(key) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse() {
                Ok(x) => out.push(x),
                Err(e) => self
                    .diagnostics
                    .push(format!("{key}: cannot parse `{item}`: {e}")),
            }
        }
        out
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Vec<String>> {
        let mut p = Parser {
            raw,
            diagnostics: Vec::new(),
        };
        let learner = match p.text("learner") {
            Some("synthetic") | None => LearnerKind::Synthetic,
            Some("baseline") => LearnerKind::Baseline,
            Some("external") => LearnerKind::External,
            Some(other) => {
                p.diagnostics.push(format!(
                    "learner: `{other}` is not one of synthetic, baseline, external"
                ));
                LearnerKind::Synthetic
            }
        };
        let curve_values: Vec<f64> = p.list("curve");
        let curve = match curve_values.as_slice() {
            [a, b, c] => (*a, *b, *c),
            _ => {
                p.diagnostics
                    .push("curve: expected three values `a,b,c`".into());
                (1.0, 1.0, 1.0)
            }
        };
        let schedules = p
            .text("schedules")
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "arithmetic" => Ok(Schedule::Arithmetic),
                "geometric" => Ok(Schedule::Geometric),
                "colts" => Ok(Schedule::Colts),
                other => Err(format!("schedules: unknown schedule `{other}`")),
            })
            .collect::<Vec<_>>();
        let mut parsed_schedules = Vec::new();
        for s in schedules {
            match s {
                Ok(s) => parsed_schedules.push(s),
                Err(e) => p.diagnostics.push(e),
            }
        }
        let inflate = match p.text("inflate") {
            None | Some("none") => None,
            Some(_) => Some(p.parse("inflate", 0.0f64)).filter(|v| *v != 0.0),
        };
        let config = ExperimentConfig {
            corpus: p.text("corpus").map(PathBuf::from),
            heldout: p.text("heldout").map(PathBuf::from),
            learner,
            curve,
            noise: p.parse("noise", 0.0),
            command: p.text("command").map(str::to_string),
            corpus_words: p.parse("corpus_words", 0),
            scramble: p.parse("scramble", true),
            kernel: p.parse("kernel", 0),
            eta: p.parse("eta", 0),
            nu: p.parse("nu", DEFAULT_NU),
            varsigma: p.parse("varsigma", DEFAULT_SLOWDOWN),
            lambda: p.parse("lambda", DEFAULT_LOOKAHEAD),
            tau: p.parse("tau", DEFAULT_TAU),
            scope_end: p.optional("scope_end"),
            anchoring: p.parse("anchoring", true),
            schedules: parsed_schedules,
            psi: p.list("psi"),
            inflate,
            folds: p.parse("folds", 10),
            seed: p.parse("seed", 0),
            out: PathBuf::from(p.text("out").unwrap_or("colts-out")),
        };
        if p.diagnostics.is_empty() {
            Ok(config)
        } else {
            Err(p.diagnostics)
        }
    }

    pub fn params(&self) -> ConvergenceParams {
        ConvergenceParams {
            nu: self.nu,
            slowdown: self.varsigma,
            lookahead: self.lambda,
            tau: self.tau,
            scope_end: self.scope_end,
        }
    }

    pub fn frame_spec(&self) -> FrameSpec {
        let colts = self.schedules.contains(&Schedule::Colts);
        FrameSpec {
            kernel: self.kernel,
            eta: self.eta,
            params: self.params(),
            anchoring: self.anchoring,
            geometric: self.schedules.contains(&Schedule::Geometric),
            psis: if colts { self.psi.clone() } else { Vec::new() },
        }
    }

    fn learner_spec(&self) -> Result<LearnerSpec, String> {
        Ok(match self.learner {
            LearnerKind::Synthetic => LearnerSpec::Synthetic(self.synthetic()?),
            LearnerKind::Baseline => LearnerSpec::BaselineTagger,
            LearnerKind::External => {
                let command = self
                    .command
                    .as_deref()
                    .ok_or("command: the external learner needs a command template")?;
                LearnerSpec::External(
                    ExternalLearner::new(command).map_err(|e| format!("command: {e}"))?,
                )
            }
        })
    }

    fn synthetic(&self) -> Result<SyntheticLearner, String> {
        let (a, b, c) = self.curve;
        SyntheticLearner::from_parameters(a, b, c, self.noise, self.seed)
            .map_err(|e| format!("curve: {e}"))
    }
}

/// A configuration checked and turned into an accuracy source.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub source: Box<dyn AccuracySource>,
    pub spec: FrameSpec,
}

fn load_corpus(path: &PathBuf, what: &str) -> Result<SentenceCorpus, String> {
    SentenceCorpus::from_path(path).map_err(|e| format!("{what} {}: {e}", path.display()))
}

/// Checks parameter ranges, parses corpora and runs the viability preflight.
/// Returns every problem found.
pub fn prepare(config: ExperimentConfig) -> Result<Prepared, Vec<String>> {
    let mut d = Vec::new();
    if config.kernel == 0 {
        d.push("kernel must be positive".to_string());
    }
    if config.eta == 0 {
        d.push("eta must be positive".to_string());
    }
    if let Err(e) = config.params().validate() {
        d.push(e.to_string());
    }
    for psi in &config.psi {
        if !(*psi > 0.0 && *psi <= 1.0) {
            d.push(format!("PORT out of (0,1]: psi {psi}"));
        }
    }
    if config.schedules.contains(&Schedule::Colts) && config.psi.is_empty() {
        d.push("psi: the colts schedule needs at least one trial PORT".into());
    }
    if !config.schedules.contains(&Schedule::Arithmetic) {
        d.push("schedules: the arithmetic baseline is required".into());
    }
    if let Some(iota) = config.inflate {
        if !(iota > 0.0 && iota.is_finite()) {
            d.push(format!("inflate: {iota} must be positive"));
        }
    }
    let learner = config.learner_spec();
    if let Err(e) = &learner {
        d.push(e.clone());
    }

    let source: Option<Box<dyn AccuracySource>> = match &config.corpus {
        None => {
            if config.learner != LearnerKind::Synthetic {
                d.push("corpus: required for the baseline and external learners".into());
            }
            if config.folds == 0 {
                d.push("folds must be at least 1".into());
            }
            if config.corpus_words == 0 {
                d.push("corpus_words must be positive".into());
            }
            match (config.synthetic(), config.folds, config.corpus_words) {
                (Ok(l), f, w) if f > 0 && w > 0 => {
                    SyntheticSource::new(l, Alignment::Words { total: w }, f)
                        .ok()
                        .map(|s| Box::new(s) as Box<dyn AccuracySource>)
                }
                _ => None,
            }
        }
        Some(path) => match load_corpus(path, "corpus") {
            Err(e) => {
                d.push(e);
                None
            }
            Ok(corpus) => {
                let corpus = if config.scramble {
                    corpus.scramble(config.seed)
                } else {
                    corpus
                };
                let evaluation = match &config.heldout {
                    Some(h) => match load_corpus(h, "heldout") {
                        Ok(h) => Some(Evaluation::Heldout(h)),
                        Err(e) => {
                            d.push(e);
                            None
                        }
                    },
                    None => {
                        if config.folds < 2 || config.folds > corpus.len() {
                            d.push(format!(
                                "folds: k-fold needs 2 <= k <= {} sentences, got {}",
                                corpus.len(),
                                config.folds
                            ));
                            None
                        } else {
                            let _ = partition(corpus.len(), config.folds, config.seed);
                            Some(Evaluation::KFold {
                                folds: config.folds,
                                seed: config.seed,
                            })
                        }
                    }
                };
                match (learner.clone(), evaluation) {
                    (Ok(l), Some(e)) => match CorpusSource::new(l, corpus, e) {
                        Ok(s) => Some(Box::new(s) as Box<dyn AccuracySource>),
                        Err(e) => {
                            d.push(format!("corpus: {e}"));
                            None
                        }
                    },
                    _ => None,
                }
            }
        },
    };

    if let Some(s) = &source {
        let total = s.alignment().total();
        if config.kernel >= total {
            d.push(format!(
                "kernel exceeds corpus: kernel {} >= {total} training items",
                config.kernel
            ));
        }
        if let Some(end) = config.scope_end {
            if end > total {
                d.push(format!(
                    "scope end exceeds corpus: scope_end {end} > {total} training items (use `none` to disable)"
                ));
            }
        }
    }
    match source {
        Some(source) if d.is_empty() => Ok(Prepared {
            spec: config.frame_spec(),
            config,
            source,
        }),
        _ => Err(d),
    }
}
