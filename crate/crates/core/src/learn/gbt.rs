use alloc::vec;
use alloc::vec::Vec;

use super::tree::{fit_newton_tree, Binned, RegTree};

/// Probability clamp used for the initial log-odds.
const P_EPS: f64 = 1e-6;

/// One-vs-rest logistic gradient boosting; class scores are combined with a
/// softmax at prediction time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradientBoosted {
    pub init: Vec<f64>,
    /// `trees[k]` are the stages for class `k`, already shrunk.
    pub trees: Vec<Vec<RegTree>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

impl GradientBoosted {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        rounds: usize,
        learning_rate: f64,
        max_depth: usize,
        min_leaf: usize,
        max_bins: usize,
    ) -> Self {
        let n = x.len();
        let mut init = vec![0.0; n_classes];
        let mut trees = vec![Vec::new(); n_classes];
        if n_classes < 2 {
            return Self { init, trees };
        }
        let data = Binned::new(x, max_bins);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for k in 0..n_classes {
            let pos = y.iter().filter(|&&c| c == k).count() as f64;
            let p = (pos / n as f64).clamp(P_EPS, 1.0 - P_EPS);
            init[k] = libm::log(p / (1.0 - p));
            let mut f = vec![init[k]; n];
            for _ in 0..rounds {
                for i in 0..n {
                    let p = sigmoid(f[i]);
                    g[i] = (y[i] == k) as u8 as f64 - p;
                    h[i] = p * (1.0 - p);
                }
                let (tree, fitted) = fit_newton_tree(&data, &g, &h, max_depth, min_leaf, learning_rate);
                for i in 0..n {
                    f[i] += fitted[i];
                }
                trees[k].push(tree);
            }
        }
        Self { init, trees }
    }

    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        self.init.iter().zip(&self.trees).map(|(&b, ts)| b + ts.iter().map(|t| t.predict(x)).sum::<f64>()).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let s = self.raw_scores(x);
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|&v| libm::exp(v - m)).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.raw_scores(x);
        let mut best = 0;
        for (k, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = k;
            }
        }
        best
    }
}
