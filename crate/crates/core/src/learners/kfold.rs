use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::scheme::{Sentence, SentenceCorpus};

/// Sentence indices of one fold, both lists in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub heldout: Vec<usize>,
    pub train: Vec<usize>,
}

/// Deals a seeded permutation of the sentences round-robin into `k` heldout
/// sets; each fold trains on everything else.
pub fn partition(sentences: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!(
            "k = {k}, need at least 2 folds"
        )));
    }
    if k > sentences {
        return Err(Error::InvalidFolds(format!(
            "k = {k} exceeds the {sentences} available sentences"
        )));
    }
    let mut order: Vec<usize> = (0..sentences).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut owner = vec![0; sentences];
    for (rank, &index) in order.iter().enumerate() {
        owner[index] = rank % k;
    }
    Ok((0..k)
        .map(|f| {
            let (heldout, train) = (0..sentences).partition(|&i| owner[i] == f);
            Fold { heldout, train }
        })
        .collect())
}

/// Smallest leading run of the fold's training sentences holding at least
/// `position` words.
pub fn training_prefix(
    corpus: &SentenceCorpus,
    fold: &Fold,
    position: u64,
) -> Result<Vec<Sentence>> {
    let mut words = 0u64;
    let mut prefix = Vec::new();
    for &i in &fold.train {
        if words >= position {
            break;
        }
        let s = &corpus.sentences()[i];
        words += s.len() as u64;
        prefix.push(s.clone());
    }
    if words < position || position == 0 {
        return Err(Error::PositionBeyondFold {
            position,
            available: words,
        });
    }
    Ok(prefix)
}

pub(crate) fn curve_over(
    learner: &LearnerSpec,
    corpus: &SentenceCorpus,
    folds: &[Fold],
    positions: &[u64],
) -> Result<Vec<f64>> {
    let jobs: Vec<(u64, &Fold)> = positions
        .iter()
        .flat_map(|&p| folds.iter().map(move |f| (p, f)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(position, fold)| {
            let train = training_prefix(corpus, fold, position)?;
            let heldout: Vec<Sentence> = fold
                .heldout
                .iter()
                .map(|&i| corpus.sentences()[i].clone())
                .collect();
            Ok(learner.measure(&train, &heldout)?.accuracy)
        })
        .collect();
    let mut means = Vec::with_capacity(positions.len());
    for chunk in results.chunks(folds.len()) {
        let mut sum = 0.0;
        for r in chunk {
            sum += r.clone()?;
        }
        means.push(sum / folds.len() as f64);
    }
    Ok(means)
}

/// Mean k-fold accuracy at each training size in `positions`.
pub fn kfold_curve(
    learner: &LearnerSpec,
    corpus: &SentenceCorpus,
    positions: &[u64],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let folds = partition(corpus.len(), k, seed)?;
    curve_over(learner, corpus, &folds, positions)
}
