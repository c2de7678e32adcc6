use std::collections::{BTreeMap, HashMap};

use crate::error::Result;
use crate::learners::AccuracyReport;
use crate::scheme::Sentence;

const MAX_SUFFIX: usize = 5;

/// Tags each word with its most frequent training tag, backing off to the
/// longest known suffix (up to five characters) and then to the globally
/// most frequent tag. Ties go to the lexicographically smallest tag.
#[derive(Debug, Clone, Default)]
pub struct MostFrequentTagger {
    words: HashMap<String, String>,
    suffixes: HashMap<String, String>,
    fallback: String,
}

type Counts = HashMap<String, BTreeMap<String, u64>>;

fn best(counts: &BTreeMap<String, u64>) -> Option<String> {
    let mut top: Option<(&String, u64)> = None;
    for (tag, &n) in counts {
        if top.is_none_or(|(_, m)| n > m) {
            top = Some((tag, n));
        }
    }
    top.map(|(t, _)| t.clone())
}

fn suffix(word: &str, len: usize) -> Option<&str> {
    let start = word.char_indices().rev().nth(len - 1)?.0;
    Some(&word[start..])
}

impl MostFrequentTagger {
    pub fn train(sentences: &[Sentence]) -> Self {
        let mut words: Counts = HashMap::new();
        let mut suffixes: Counts = HashMap::new();
        let mut global: BTreeMap<String, u64> = BTreeMap::new();
        for token in sentences.iter().flatten() {
            *words
                .entry(token.word.clone())
                .or_default()
                .entry(token.tag.clone())
                .or_default() += 1;
            *global.entry(token.tag.clone()).or_default() += 1;
            for len in 1..=MAX_SUFFIX {
                if let Some(s) = suffix(&token.word, len) {
                    *suffixes
                        .entry(s.to_string())
                        .or_default()
                        .entry(token.tag.clone())
                        .or_default() += 1;
                }
            }
        }
        let resolve = |m: Counts| -> HashMap<String, String> {
            m.into_iter()
                .filter_map(|(k, v)| best(&v).map(|t| (k, t)))
                .collect()
        };
        MostFrequentTagger {
            words: resolve(words),
            suffixes: resolve(suffixes),
            fallback: best(&global).unwrap_or_default(),
        }
    }

    pub fn tag(&self, word: &str) -> &str {
        if let Some(t) = self.words.get(word) {
            return t;
        }
        for len in (1..=MAX_SUFFIX).rev() {
            if let Some(t) = suffix(word, len).and_then(|s| self.suffixes.get(s)) {
                return t;
            }
        }
        &self.fallback
    }

    pub fn evaluate(&self, heldout: &[Sentence]) -> Result<AccuracyReport> {
        let mut correct = 0;
        let mut total = 0;
        for token in heldout.iter().flatten() {
            total += 1;
            if self.tag(&token.word) == token.tag {
                correct += 1;
            }
        }
        AccuracyReport::from_counts(correct, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Token;

    #[test]
    fn memorizes_unique_words() {
        let s: Sentence = ["The", "quick", "fox", "jumps", "."]
            .iter()
            .zip(["DT", "JJ", "NN", "VBZ", "."])
            .map(|(w, t)| Token::new(*w, t))
            .collect();
        let tagger = MostFrequentTagger::train(std::slice::from_ref(&s));
        let report = tagger.evaluate(&[s]).unwrap();
        assert_eq!(report.accuracy, 100.0);
        assert_eq!(report.tokens_evaluated, 5);
    }

    #[test]
    fn most_frequent_hit_rate() {
        // word i carries tag A in (i + 1) of every 7 occurrences
        let mut corpus = Vec::new();
        for i in 0..6u64 {
            let mut s = Vec::new();
            for k in 0..70u64 {
                let tag = if k % 7 <= i { "A" } else { "B" };
                s.push(Token::new(format!("w{i}"), tag));
            }
            corpus.push(s);
        }
        let mut expected_correct = 0;
        let mut total = 0;
        for s in &corpus {
            let a = s.iter().filter(|t| t.tag == "A").count();
            expected_correct += a.max(s.len() - a);
            total += s.len();
        }
        let expected = 100.0 * expected_correct as f64 / total as f64;
        let tagger = MostFrequentTagger::train(&corpus);
        let got = tagger.evaluate(&corpus).unwrap().accuracy;
        assert!((got - expected).abs() < 0.1, "{got} vs {expected}");
    }

    #[test]
    fn suffix_backoff() {
        let train = vec![vec![
            Token::new("walking", "VBG"),
            Token::new("talking", "VBG"),
            Token::new("dog", "NN"),
            Token::new("cat", "NN"),
            Token::new("hat", "NN"),
        ]];
        let tagger = MostFrequentTagger::train(&train);
        assert_eq!(tagger.tag("singing"), "VBG");
        assert_eq!(tagger.tag("bat"), "NN");
        assert_eq!(tagger.tag("xyz"), "NN");
        assert_eq!(tagger.tag("é"), "NN");
    }

    #[test]
    fn empty_heldout_is_an_error() {
        let tagger = MostFrequentTagger::train(&[]);
        assert!(tagger.evaluate(&[]).is_err());
    }
}
