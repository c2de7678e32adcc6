//! Learners whose accuracy drives a run: a synthetic power-curve learner, a
//! most-frequent-tag baseline tagger and an adapter for external commands,
//! plus k-fold evaluation over sentence corpora.

mod external;
mod kfold;
mod synthetic;
mod tagger;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use external::ExternalLearner;
pub use kfold::{kfold_curve, partition, training_prefix, Fold};
pub use synthetic::SyntheticLearner;
pub use tagger::MostFrequentTagger;

use crate::error::{Error, Result};
use crate::scheme::{Alignment, Sentence, SentenceCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Correctly tagged tokens over all tokens, as a percentage.
    pub accuracy: f64,
    pub tokens_evaluated: u64,
}

impl AccuracyReport {
    pub fn from_counts(correct: u64, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::EmptyCorpus("nothing to evaluate".into()));
        }
        Ok(AccuracyReport {
            accuracy: 100.0 * correct as f64 / total as f64,
            tokens_evaluated: total,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Synthetic(SyntheticLearner),
    BaselineTagger,
    External(ExternalLearner),
}

impl LearnerSpec {
    /// Trains on `train` and scores on `heldout`.
    pub fn measure(&self, train: &[Sentence], heldout: &[Sentence]) -> Result<AccuracyReport> {
        if train.is_empty() || heldout.is_empty() {
            return Err(Error::EmptyCorpus(
                "train and heldout must be nonempty".into(),
            ));
        }
        match self {
            LearnerSpec::Synthetic(s) => {
                let words = word_count(train);
                let tokens = word_count(heldout);
                Ok(AccuracyReport {
                    accuracy: s.accuracy_at(words, content_hash(heldout)),
                    tokens_evaluated: tokens,
                })
            }
            LearnerSpec::BaselineTagger => MostFrequentTagger::train(train).evaluate(heldout),
            LearnerSpec::External(e) => e.measure(train, heldout),
        }
    }
}

pub fn word_count(sentences: &[Sentence]) -> u64 {
    sentences.iter().map(|s| s.len() as u64).sum()
}

// FNV-1a over the words and tags, so a learner sees the same noise stream
// for the same heldout data.
fn content_hash(sentences: &[Sentence]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for token in sentences.iter().flatten() {
        for byte in token
            .word
            .bytes()
            .chain([0])
            .chain(token.tag.bytes())
            .chain([1])
        {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
    hash
}

/// Where a run gets its accuracies from.
pub trait AccuracySource: Send + Sync {
    /// Positions a run may visit and how they snap to individuals.
    fn alignment(&self) -> &Alignment;
    /// Accuracy after training on the first `position` items.
    fn accuracy_at(&self, position: u64) -> Result<f64>;
}

/// A synthetic learner over an abstract training set of a given layout,
/// averaged over `folds` independent noise draws.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    learner: SyntheticLearner,
    alignment: Alignment,
    folds: usize,
}

impl SyntheticSource {
    pub fn new(learner: SyntheticLearner, alignment: Alignment, folds: usize) -> Result<Self> {
        if folds == 0 {
            return Err(Error::InvalidFolds("at least one fold is required".into()));
        }
        if alignment.total() == 0 {
            return Err(Error::EmptyCorpus("synthetic training set is empty".into()));
        }
        Ok(SyntheticSource {
            learner,
            alignment,
            folds,
        })
    }

    pub fn learner(&self) -> &SyntheticLearner {
        &self.learner
    }
}

impl AccuracySource for SyntheticSource {
    fn alignment(&self) -> &Alignment {
        &self.alignment
    }

    fn accuracy_at(&self, position: u64) -> Result<f64> {
        if position == 0 || position > self.alignment.total() {
            return Err(Error::PositionBeyondCorpus {
                position,
                total: self.alignment.total(),
            });
        }
        let sum: f64 = (0..self.folds as u64)
            .map(|fold| self.learner.accuracy_at(position, fold))
            .sum();
        Ok(sum / self.folds as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    /// k-fold cross validation over the corpus itself.
    KFold { folds: usize, seed: u64 },
    /// A fixed heldout corpus; training uses prefixes of the main corpus.
    Heldout(SentenceCorpus),
}

/// A learner evaluated on a real corpus. Measurements are cached by position
/// so that runs sharing positions train only once.
#[derive(Debug)]
pub struct CorpusSource {
    learner: LearnerSpec,
    corpus: SentenceCorpus,
    evaluation: Evaluation,
    folds: Vec<Fold>,
    alignment: Alignment,
    cache: Mutex<HashMap<u64, f64>>,
}

impl CorpusSource {
    pub fn new(
        learner: LearnerSpec,
        corpus: SentenceCorpus,
        evaluation: Evaluation,
    ) -> Result<Self> {
        let (folds, limit) = match &evaluation {
            Evaluation::KFold { folds, seed } => {
                let parts = partition(corpus.len(), *folds, *seed)?;
                let smallest = parts
                    .iter()
                    .map(|f| {
                        f.train
                            .iter()
                            .map(|&i| corpus.sentences()[i].len() as u64)
                            .sum()
                    })
                    .min()
                    .unwrap_or(0);
                (parts, smallest)
            }
            Evaluation::Heldout(h) => {
                if h.is_empty() {
                    return Err(Error::EmptyCorpus("heldout corpus is empty".into()));
                }
                (Vec::new(), corpus.total_words())
            }
        };
        let ends: Vec<u64> = corpus
            .sentence_ends()
            .iter()
            .copied()
            .take_while(|&e| e <= limit)
            .collect();
        if ends.is_empty() {
            return Err(Error::EmptyCorpus(
                "no training sentences fit in every fold".into(),
            ));
        }
        Ok(CorpusSource {
            learner,
            corpus,
            evaluation,
            folds,
            alignment: Alignment::Sentences { ends },
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn corpus(&self) -> &SentenceCorpus {
        &self.corpus
    }

    fn measure_uncached(&self, position: u64) -> Result<f64> {
        match &self.evaluation {
            Evaluation::KFold { .. } => {
                let curve =
                    kfold::curve_over(&self.learner, &self.corpus, &self.folds, &[position])?;
                Ok(curve[0])
            }
            Evaluation::Heldout(heldout) => {
                let n = self.corpus.sentences_covering(position)?;
                let report = self
                    .learner
                    .measure(&self.corpus.sentences()[..n], heldout.sentences())?;
                Ok(report.accuracy)
            }
        }
    }
}

impl AccuracySource for CorpusSource {
    fn alignment(&self) -> &Alignment {
        &self.alignment
    }

    fn accuracy_at(&self, position: u64) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&position) {
            return Ok(*v);
        }
        let value = self.measure_uncached(position)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(position, value);
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::PowerFit;
    use crate::scheme::Token;

    fn sentence(words: &[(&str, &str)]) -> Sentence {
        words.iter().map(|(w, t)| Token::new(*w, *t)).collect()
    }

    #[test]
    fn synthetic_measure_uses_train_size() {
        let learner =
            SyntheticLearner::new(PowerFit::new(100.0, 0.5, 99.0).unwrap(), 0.0, 1).unwrap();
        let spec = LearnerSpec::Synthetic(learner);
        let train: Vec<Sentence> = (0..25).map(|_| sentence(&[("a", "A"); 4])).collect();
        let heldout = vec![sentence(&[("b", "B"), ("c", "C")])];
        let report = spec.measure(&train, &heldout).unwrap();
        assert!((report.accuracy - 89.0).abs() < 1e-12);
        assert_eq!(report.tokens_evaluated, 2);
        assert!(spec.measure(&[], &heldout).is_err());
    }

    #[test]
    fn synthetic_source_is_noiseless_without_noise() {
        let learner =
            SyntheticLearner::new(PowerFit::new(542.5451, 0.3838, 99.2876).unwrap(), 0.0, 3)
                .unwrap();
        let source =
            SyntheticSource::new(learner, Alignment::Words { total: 1_000_000 }, 10).unwrap();
        let expected = 99.2876 - 542.5451 * 800_000f64.powf(-0.3838);
        assert!((source.accuracy_at(800_000).unwrap() - expected).abs() < 1e-12);
        assert!(source.accuracy_at(1_000_001).is_err());
    }

    #[test]
    fn corpus_source_caches_and_aligns() {
        let corpus = SentenceCorpus::new(
            (0..12)
                .map(|i| {
                    sentence(&[
                        ("the", "DT"),
                        (if i % 2 == 0 { "dog" } else { "cat" }, "NN"),
                    ])
                })
                .collect(),
        )
        .unwrap();
        let source = CorpusSource::new(
            LearnerSpec::BaselineTagger,
            corpus,
            Evaluation::KFold { folds: 3, seed: 5 },
        )
        .unwrap();
        // 8 training sentences per fold, 2 words each
        assert_eq!(source.alignment().total(), 16);
        let a = source.accuracy_at(4).unwrap();
        assert_eq!(a, source.accuracy_at(4).unwrap());
        assert!(a > 0.0 && a <= 100.0);
    }
}
