use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tree::{ClassTree, ClassTreeBuilder, TreeParams};
use crate::rng;

/// Bagged CART ensemble with per-split feature subsampling.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomForest {
    pub trees: Vec<ClassTree>,
    pub n_classes: usize,
}

impl RandomForest {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, n_trees: usize, params: TreeParams, seed: u64) -> Self {
        let n = x.len();
        let trees = (0..n_trees)
            .map(|t| {
                let mut r = rng::seeded(rng::derive_seed(seed, t as u64));
                let mut rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                ClassTreeBuilder::new(x, y, n_classes, params, Some(&mut r)).build(&mut rows)
            })
            .collect();
        Self { trees, n_classes }
    }

    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let mut v = vec![0u32; self.n_classes];
        for t in &self.trees {
            v[t.predict(x)] += 1;
        }
        v
    }

    /// Plurality vote, lowest class index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let v = self.votes(x);
        let mut best = 0;
        for (k, &c) in v.iter().enumerate() {
            if c > v[best] {
                best = k;
            }
        }
        best
    }
}
