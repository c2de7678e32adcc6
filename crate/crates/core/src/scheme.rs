//! Learning schemes: a kernel, a step function and the nested individuals
//! they induce over the training data, plus the sentence-level corpus they
//! are aligned to.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the size of each new training increment is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepFunction {
    /// Uniform increments of `eta` items.
    Arithmetic { eta: u64 },
    /// Each individual is `ratio` times the previous one.
    Geometric { ratio: f64 },
    /// Adaptive increments `ceil(port * mu)` computed from the current trend.
    Colts { port: f64 },
}

impl StepFunction {
    pub fn arithmetic(eta: u64) -> Result<Self> {
        if eta == 0 {
            return Err(Error::InvalidStep(
                "common difference must be at least 1".into(),
            ));
        }
        Ok(StepFunction::Arithmetic { eta })
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::InvalidStep(format!(
                "common ratio {ratio} must exceed 1"
            )));
        }
        Ok(StepFunction::Geometric { ratio })
    }

    pub fn colts(port: f64) -> Result<Self> {
        if !(port > 0.0 && port <= 1.0) {
            return Err(Error::PortOutOfRange(port));
        }
        Ok(StepFunction::Colts { port })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepFunction::Arithmetic { .. } => "arithmetic",
            StepFunction::Geometric { .. } => "geometric",
            StepFunction::Colts { .. } => "colts",
        }
    }
}

/// Kernel plus step function. Every transition into a level `<= plevel_guard`
/// uses the uniform step `eta`; the scheme's own step function engages from
/// the guard level onwards, so all schemes sharing kernel, `eta` and guard
/// produce identical positions up to and including the guard level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningScheme {
    pub kernel: u64,
    pub step: StepFunction,
    pub eta: u64,
    pub plevel_guard: usize,
}

impl LearningScheme {
    pub fn new(kernel: u64, step: StepFunction, eta: u64, plevel_guard: usize) -> Result<Self> {
        if kernel == 0 {
            return Err(Error::InvalidStep(
                "kernel must hold at least one item".into(),
            ));
        }
        if eta == 0 {
            return Err(Error::InvalidStep("uniform step must be at least 1".into()));
        }
        // re-validate through the constructors
        match step {
            StepFunction::Arithmetic { eta } => StepFunction::arithmetic(eta)?,
            StepFunction::Geometric { ratio } => StepFunction::geometric(ratio)?,
            StepFunction::Colts { port } => StepFunction::colts(port)?,
        };
        Ok(LearningScheme {
            kernel,
            step,
            eta,
            plevel_guard: plevel_guard.max(1),
        })
    }

    pub fn arithmetic(kernel: u64, eta: u64) -> Result<Self> {
        Self::new(kernel, StepFunction::arithmetic(eta)?, eta, 1)
    }

    /// True when the transition from `level` to `level + 1` uses the uniform
    /// step rather than the scheme's own step function.
    pub fn uses_uniform_step(&self, level: usize) -> bool {
        if level < self.plevel_guard {
            return true;
        }
        // adaptive steps need a trend, which exists from level 3 on
        matches!(self.step, StepFunction::Colts { .. }) && level < 3
    }

    /// Position of the individual of `level` (1-based) for a word-aligned
    /// scheme: `kernel + sum of steps`. Adaptive schemes only have static
    /// positions while the uniform step is in force.
    pub fn position_of(&self, level: usize) -> Result<u64> {
        if level == 0 {
            return Err(Error::InvalidStep("levels start at 1".into()));
        }
        let mut position = self.kernel;
        for current in 1..level {
            let step = if self.uses_uniform_step(current) {
                self.eta
            } else {
                match self.step {
                    StepFunction::Arithmetic { eta } => eta,
                    StepFunction::Geometric { ratio } => geometric_step(position, ratio),
                    StepFunction::Colts { .. } => return Err(Error::AdaptivePosition(level)),
                }
            };
            position = position.checked_add(step).ok_or_else(|| {
                Error::InvalidStep(format!("position of level {level} overflows"))
            })?;
        }
        Ok(position)
    }
}

/// Smallest count not below `value`, treating values within floating-point
/// noise of an integer as that integer.
pub(crate) fn snapped_ceil(value: f64) -> u64 {
    let nearest = value.round();
    if (value - nearest).abs() <= 1e-9 * value.abs().max(1.0) {
        nearest.max(1.0) as u64
    } else {
        value.ceil().max(1.0) as u64
    }
}

/// Geometric increment from `position`: `ceil(position * (ratio - 1))`.
pub fn geometric_step(position: u64, ratio: f64) -> u64 {
    snapped_ceil(position as f64 * (ratio - 1.0))
}

/// One tagged token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub tag: String,
}

impl Token {
    pub fn new(word: impl Into<String>, tag: impl Into<String>) -> Self {
        Token {
            word: word.into(),
            tag: tag.into(),
        }
    }
}

pub type Sentence = Vec<Token>;

/// A pre-tokenized, pre-tagged corpus kept in sentence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceCorpus {
    sentences: Vec<Sentence>,
    ends: Vec<u64>,
}

impl SentenceCorpus {
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus("corpus has no sentences".into()));
        }
        let mut ends = Vec::with_capacity(sentences.len());
        let mut total = 0u64;
        for (i, s) in sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::EmptyCorpus(format!("sentence {i} is empty")));
            }
            total += s.len() as u64;
            ends.push(total);
        }
        Ok(SentenceCorpus { sentences, ends })
    }

    /// Parses `word<TAB>tag` lines; a blank line terminates a sentence.
    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        for (index, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                if !current.is_empty() {
                    sentences.push(std::mem::take(&mut current));
                }
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| Error::CorpusParse {
                line: index + 1,
                message: "expected `word<TAB>tag`".into(),
            })?;
            if word.is_empty() || tag.is_empty() || tag.contains('\t') {
                return Err(Error::CorpusParse {
                    line: index + 1,
                    message: "expected exactly one non-empty word and tag".into(),
                });
            }
            current.push(Token::new(word, tag));
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        Self::new(sentences)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        write_sentences(&mut out, &self.sentences)
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn total_words(&self) -> u64 {
        *self.ends.last().unwrap_or(&0)
    }

    /// Word positions of every sentence-final token.
    pub fn sentence_ends(&self) -> &[u64] {
        &self.ends
    }

    /// Position of the first sentence end at or beyond `word_position`.
    pub fn align_to_sentences(&self, word_position: u64) -> Result<u64> {
        align_to_ends(&self.ends, word_position)
    }

    /// Number of leading sentences covering the first `word_position` words.
    pub fn sentences_covering(&self, word_position: u64) -> Result<usize> {
        let aligned = self.align_to_sentences(word_position)?;
        Ok(self.ends.partition_point(|&e| e < aligned) + 1)
    }

    /// Sentence-level permutation, deterministic per seed.
    pub fn scramble(&self, seed: u64) -> SentenceCorpus {
        let mut sentences = self.sentences.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sentences.shuffle(&mut rng);
        SentenceCorpus::new(sentences).expect("permutation of a valid corpus")
    }

    pub fn alignment(&self) -> Alignment {
        Alignment::Sentences {
            ends: self.ends.clone(),
        }
    }
}

impl fmt::Display for SentenceCorpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for sentence in &self.sentences {
            for t in sentence {
                writeln!(f, "{}\t{}", t.word, t.tag)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub(crate) fn write_sentences<'a>(
    out: &mut impl Write,
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Result<()> {
    for sentence in sentences {
        for t in sentence {
            writeln!(out, "{}\t{}", t.word, t.tag)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn align_to_ends(ends: &[u64], word_position: u64) -> Result<u64> {
    let total = *ends.last().unwrap_or(&0);
    if word_position == 0 || word_position > total {
        return Err(Error::PositionBeyondCorpus {
            position: word_position,
            total,
        });
    }
    let index = ends.partition_point(|&e| e < word_position);
    Ok(ends[index])
}

/// How nominal word positions map onto training individuals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alignment {
    /// Word-aligned training data of the given size.
    Words { total: u64 },
    /// Individuals are extended to the next sentence end.
    Sentences { ends: Vec<u64> },
}

impl Alignment {
    pub fn total(&self) -> u64 {
        match self {
            Alignment::Words { total } => *total,
            Alignment::Sentences { ends } => *ends.last().unwrap_or(&0),
        }
    }

    pub fn align(&self, word_position: u64) -> Result<u64> {
        match self {
            Alignment::Words { total } => {
                if word_position == 0 || word_position > *total {
                    Err(Error::PositionBeyondCorpus {
                        position: word_position,
                        total: *total,
                    })
                } else {
                    Ok(word_position)
                }
            }
            Alignment::Sentences { ends } => align_to_ends(ends, word_position),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_with_lengths(lengths: &[usize]) -> SentenceCorpus {
        let sentences = lengths
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                (0..n)
                    .map(|j| Token::new(format!("w{i}_{j}"), "T"))
                    .collect()
            })
            .collect();
        SentenceCorpus::new(sentences).unwrap()
    }

    #[test]
    fn arithmetic_positions() {
        let s = LearningScheme::arithmetic(5000, 5000).unwrap();
        assert_eq!(s.position_of(1).unwrap(), 5000);
        assert_eq!(s.position_of(18).unwrap(), 90000);
    }

    #[test]
    fn geometric_positions_match_loop_oracle() {
        let s =
            LearningScheme::new(5000, StepFunction::geometric(1.056).unwrap(), 5000, 18).unwrap();
        assert_eq!(s.position_of(18).unwrap(), 90000);
        assert_eq!(s.position_of(19).unwrap(), 90000 + 5040);
        let mut x = 5000u64;
        for level in 2..=40 {
            x += if level <= 18 {
                5000
            } else {
                (x as f64 * 0.056 - 1e-7).ceil() as u64
            };
            assert_eq!(s.position_of(level).unwrap(), x, "level {level}");
        }
    }

    #[test]
    fn colts_positions_are_static_only_under_the_guard() {
        let s = LearningScheme::new(5000, StepFunction::colts(0.5).unwrap(), 5000, 10).unwrap();
        assert_eq!(s.position_of(10).unwrap(), 50000);
        assert_eq!(s.position_of(11), Err(Error::AdaptivePosition(11)));
    }

    #[test]
    fn invalid_steps() {
        assert!(StepFunction::arithmetic(0).is_err());
        assert!(StepFunction::geometric(1.0).is_err());
        assert_eq!(StepFunction::colts(1.5), Err(Error::PortOutOfRange(1.5)));
        assert!(StepFunction::colts(0.0).is_err());
        assert!(StepFunction::colts(1.0).is_ok());
    }

    #[test]
    fn alignment_examples() {
        let c = corpus_with_lengths(&[4, 3, 5]);
        assert_eq!(c.total_words(), 12);
        assert_eq!(c.align_to_sentences(5).unwrap(), 7);
        assert_eq!(c.align_to_sentences(7).unwrap(), 7);
        assert_eq!(c.align_to_sentences(1).unwrap(), 4);
        assert_eq!(c.sentences_covering(5).unwrap(), 2);
        assert!(matches!(
            c.align_to_sentences(13),
            Err(Error::PositionBeyondCorpus { .. })
        ));
    }

    #[test]
    fn parse_and_write() {
        let text = "The\tDT\ncat\tNN\n.\t.\n\n\nIt\tPRP\nran\tVBD\n";
        let c = SentenceCorpus::parse(text).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.total_words(), 5);
        let again = SentenceCorpus::parse(&c.to_string()).unwrap();
        assert_eq!(again, c);
        let bad = SentenceCorpus::parse("The DT\n");
        assert!(matches!(bad, Err(Error::CorpusParse { line: 1, .. })));
        assert!(SentenceCorpus::parse("\n\n").is_err());
    }

    #[test]
    fn scramble_is_a_seeded_permutation() {
        let c = corpus_with_lengths(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]);
        let a = c.scramble(1);
        assert_eq!(a, c.scramble(1));
        assert_ne!(a.sentences(), c.scramble(2).sentences());
        let mut x = a.sentences().to_vec();
        let mut y = c.sentences().to_vec();
        x.sort();
        y.sort();
        assert_eq!(x, y);
    }

    #[test]
    fn snapped_ceil_ignores_float_noise() {
        assert_eq!(snapped_ceil(5000.000000000002), 5000);
        assert_eq!(snapped_ceil(5000.2), 5001);
        assert_eq!(snapped_ceil(0.2), 1);
        assert_eq!(geometric_step(90000, 95000.0 / 90000.0), 5000);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn alignment_never_truncates(lengths in prop::collection::vec(1usize..30, 1..40), pick in 0.0f64..1.0) {
                let c = corpus_with_lengths(&lengths);
                let total = c.total_words();
                let w = ((pick * total as f64) as u64).clamp(1, total);
                let aligned = c.align_to_sentences(w).unwrap();
                prop_assert!(aligned >= w);
                prop_assert!(c.sentence_ends().contains(&aligned));
                // the gap is shorter than the containing sentence
                let idx = c.sentence_ends().partition_point(|&e| e < w);
                prop_assert!(((aligned - w) as usize) < lengths[idx]);
            }

            #[test]
            fn positions_are_nested(kernel in 1u64..10_000, eta in 1u64..10_000, ratio in 1.001f64..1.5, guard in 1usize..30) {
                let s = LearningScheme::new(kernel, StepFunction::geometric(ratio).unwrap(), eta, guard).unwrap();
                let mut prev = 0;
                for level in 1..40 {
                    let p = s.position_of(level).unwrap();
                    prop_assert!(p > prev);
                    prev = p;
                }
                let base = LearningScheme::arithmetic(kernel, eta).unwrap();
                for level in 1..=guard {
                    prop_assert_eq!(s.position_of(level).unwrap(), base.position_of(level).unwrap());
                }
            }
        }
    }
}
