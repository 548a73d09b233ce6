use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;

use super::tree::{ClassTree, ClassTreeBuilder, TreeParams};
use super::{Dataset, GradientBoosted, LearnError, NaiveBayes, RandomForest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    GradientBoosting,
    NaiveBayes,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::GradientBoosting, ModelKind::NaiveBayes];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::GradientBoosting => "gbt",
            ModelKind::NaiveBayes => "nb",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "dt" | "tree" | "decision_tree" => ModelKind::DecisionTree,
            "rf" | "forest" | "random_forest" => ModelKind::RandomForest,
            "gbt" | "gradient_boosting" => ModelKind::GradientBoosting,
            "nb" | "naive_bayes" => ModelKind::NaiveBayes,
            _ => return Err(LearnError::InvalidHyper(alloc::format!("unknown model kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct Hyper {
    /// Depth limit for single trees and forest members; `None` is unbounded.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    /// Features tried per forest split; `None` means `ceil(sqrt(F))`.
    pub max_features: Option<usize>,
    pub boost_rounds: usize,
    pub learning_rate: f64,
    pub boost_depth: usize,
    pub max_bins: usize,
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            max_depth: Some(12),
            min_samples_leaf: 2,
            n_trees: 100,
            max_features: None,
            boost_rounds: 100,
            learning_rate: 0.1,
            boost_depth: 4,
            max_bins: 256,
            var_floor: 1e-9,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidHyper(m.into()));
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_bins < 2 {
            return bad("max_bins must be >= 2");
        }
        if !(self.var_floor > 0.0) {
            return bad("var_floor must be positive");
        }
        if self.max_features == Some(0) {
            return bad("max_features must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(tag = "kind", rename_all = "snake_case"))]
pub enum ModelInner {
    DecisionTree(ClassTree),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosted),
    NaiveBayes(NaiveBayes),
}

/// A trained classifier over string labels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Model {
    pub classes: Vec<String>,
    pub schema: Vec<String>,
    pub inner: ModelInner,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self.inner {
            ModelInner::DecisionTree(_) => ModelKind::DecisionTree,
            ModelInner::RandomForest(_) => ModelKind::RandomForest,
            ModelInner::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelInner::NaiveBayes(_) => ModelKind::NaiveBayes,
        }
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        match &self.inner {
            ModelInner::DecisionTree(t) => t.predict(x),
            ModelInner::RandomForest(f) => f.predict(x),
            ModelInner::GradientBoosting(g) => g.predict(x),
            ModelInner::NaiveBayes(b) => b.predict(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> &str {
        &self.classes[self.predict_index(x)]
    }
}

/// Fits a model of the given kind. A single-class dataset yields a model
/// that always predicts that class.
pub fn train(ds: &Dataset, kind: ModelKind, hyper: &Hyper) -> Result<Model, LearnError> {
    hyper.validate()?;
    if ds.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    let classes = ds.classes();
    let x: Vec<Vec<f64>> = ds.rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<usize> = ds.rows.iter().map(|r| classes.binary_search(&r.label).unwrap_or(0)).collect();
    let k = classes.len();
    let nf = ds.schema.len();
    let params = TreeParams { max_depth: hyper.max_depth.unwrap_or(usize::MAX), min_leaf: hyper.min_samples_leaf, mtry: None };
    let inner = match kind {
        ModelKind::DecisionTree => {
            let mut rows: Vec<usize> = (0..x.len()).collect();
            ModelInner::DecisionTree(ClassTreeBuilder::<ChaCha8Rng>::new(&x, &y, k, params, None).build(&mut rows))
        }
        ModelKind::RandomForest => {
            let mtry = hyper.max_features.unwrap_or_else(|| libm::ceil(libm::sqrt(nf as f64)) as usize).max(1);
            let p = TreeParams { mtry: Some(mtry), ..params };
            ModelInner::RandomForest(RandomForest::fit(&x, &y, k, hyper.n_trees, p, hyper.seed))
        }
        ModelKind::GradientBoosting => ModelInner::GradientBoosting(GradientBoosted::fit(
            &x,
            &y,
            k,
            hyper.boost_rounds,
            hyper.learning_rate,
            hyper.boost_depth,
            hyper.min_samples_leaf,
            hyper.max_bins,
        )),
        ModelKind::NaiveBayes => ModelInner::NaiveBayes(NaiveBayes::fit(&x, &y, k, hyper.var_floor)),
    };
    Ok(Model { classes, schema: ds.schema.clone(), inner })
}
