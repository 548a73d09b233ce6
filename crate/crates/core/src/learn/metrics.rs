use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{train, Dataset, Hyper, LearnError, Model, ModelKind};
use crate::rng;

/// Counts indexed `[predicted][actual]`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self { classes, counts: vec![vec![0; k]; k] }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        Self { classes, counts }
    }

    pub fn record(&mut self, predicted: usize, actual: usize) {
        self.counts[predicted][actual] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|k| self.counts[k][k]).sum()
    }

    pub fn predicted(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn actual(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.correct(), self.total())
    }

    pub fn precision(&self, k: usize) -> f64 {
        ratio(self.counts[k][k], self.predicted(k))
    }

    pub fn recall(&self, k: usize) -> f64 {
        ratio(self.counts[k][k], self.actual(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

/// Scores `model` on `ds`. Labels the model never saw are added as extra
/// classes, which it can only get wrong.
pub fn evaluate(model: &Model, ds: &Dataset) -> Evaluation {
    let mut classes = model.classes.clone();
    for c in ds.classes() {
        if classes.binary_search(&c).is_err() {
            classes.push(c);
        }
    }
    let mut cm = ConfusionMatrix::new(classes);
    for r in &ds.rows {
        let p = model.predict_index(&r.features);
        let a = cm.classes.iter().position(|c| *c == r.label).unwrap_or(0);
        cm.record(p, a);
    }
    let per_class = (0..cm.classes.len())
        .map(|k| ClassMetrics { class: cm.classes[k].clone(), precision: cm.precision(k), recall: cm.recall(k), support: cm.actual(k) })
        .collect();
    Evaluation { accuracy: cm.accuracy(), per_class, confusion: cm }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std_dev: f64,
}

/// k-fold cross-validated accuracy over a seeded shuffle.
pub fn kfold_accuracy(ds: &Dataset, kind: ModelKind, hyper: &Hyper, k: usize, seed: u64) -> Result<FoldSummary, LearnError> {
    if k < 2 || ds.len() < k {
        return Err(LearnError::TooFewRows { needed: k.max(2), folds: k });
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut accuracies = Vec::with_capacity(k);
    for f in 0..k {
        let lo = f * ds.len() / k;
        let hi = (f + 1) * ds.len() / k;
        let test = ds.subset(&idx[lo..hi]);
        let rest: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
        let model = train(&ds.subset(&rest), kind, hyper)?;
        accuracies.push(evaluate(&model, &test).accuracy);
    }
    let mean = accuracies.iter().sum::<f64>() / k as f64;
    let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (k - 1) as f64;
    Ok(FoldSummary { accuracies, mean, std_dev: libm::sqrt(var) })
}
