use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

/// Gaussian naive Bayes with a variance floor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NaiveBayes {
    pub log_prior: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl NaiveBayes {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, var_floor: f64) -> Self {
        let nf = x.first().map_or(0, |r| r.len());
        let mut count = vec![0usize; n_classes];
        let mut mean = vec![vec![0.0; nf]; n_classes];
        for (r, &c) in x.iter().zip(y) {
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(r) {
                *m += v;
            }
        }
        for (m, &n) in mean.iter_mut().zip(&count) {
            m.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        }
        let mut var = vec![vec![0.0; nf]; n_classes];
        for (r, &c) in x.iter().zip(y) {
            for f in 0..nf {
                let d = r[f] - mean[c][f];
                var[c][f] += d * d;
            }
        }
        for (v, &n) in var.iter_mut().zip(&count) {
            v.iter_mut().for_each(|s| *s = (*s / n.max(1) as f64).max(var_floor));
        }
        let total = x.len() as f64;
        let log_prior = count.iter().map(|&n| libm::log(n as f64 / total)).collect();
        Self { log_prior, mean, var }
    }

    pub fn log_posterior(&self, x: &[f64]) -> Vec<f64> {
        (0..self.log_prior.len())
            .map(|c| {
                self.log_prior[c]
                    + x.iter()
                        .zip(&self.mean[c])
                        .zip(&self.var[c])
                        .map(|((&v, &m), &s)| -0.5 * (libm::log(TAU * s) + (v - m) * (v - m) / s))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let lp = self.log_posterior(x);
        let mut best = 0;
        for (k, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = k;
            }
        }
        best
    }
}
