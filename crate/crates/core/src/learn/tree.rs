//! CART trees: exact Gini classification trees and histogram regression
//! trees used by gradient boosting.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::RngCore;

const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ClassNode {
    Leaf { class: u32 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

/// Flattened classification tree; node 0 is the root and `x ≤ threshold`
/// goes left.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassTree {
    pub nodes: Vec<ClassNode>,
}

impl ClassTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                ClassNode::Leaf { class } => return class as usize,
                ClassNode::Split { feature, threshold, left, right } => {
                    i = if x[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[ClassNode], i: usize) -> usize {
            match nodes[i] {
                ClassNode::Leaf { .. } => 0,
                ClassNode::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, ClassNode::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub mtry: Option<usize>,
}

pub(crate) struct ClassTreeBuilder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<ClassNode>,
    scratch: Vec<usize>,
}

fn majority(counts: &[u64]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

impl<'a, R: RngCore> ClassTreeBuilder<'a, R> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [usize], n_classes: usize, params: TreeParams, rng: Option<&'a mut R>) -> Self {
        Self { x, y, n_classes, params, rng, nodes: Vec::new(), scratch: Vec::new() }
    }

    /// Fits on the given row indices (repeats allowed, as in a bootstrap).
    pub fn build(mut self, rows: &mut [usize]) -> ClassTree {
        self.grow(rows, 0);
        ClassTree { nodes: self.nodes }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let mut counts = vec![0u64; self.n_classes];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let class = majority(&counts) as u32;
        self.nodes.push(ClassNode::Leaf { class });
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts) else {
            return id;
        };
        let mut lo = 0;
        for i in 0..n {
            if self.x[rows[i]][feature] <= threshold {
                rows.swap(i, lo);
                lo += 1;
            }
        }
        let (l, r) = rows.split_at_mut(lo);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = ClassNode::Split { feature: feature as u32, threshold, left, right };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let f = self.x.first().map_or(0, |r| r.len());
        match (self.params.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < f => {
                let mut v = index::sample(rng, f, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..f).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: &[u64]) -> Option<(usize, f64)> {
        let n = rows.len();
        let nf = n as f64;
        let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        let parent = total_sq / nf;
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut left = vec![0u64; self.n_classes];
        let mut right = vec![0u64; self.n_classes];
        let features = self.candidate_features();
        let mut order = core::mem::take(&mut self.scratch);
        for f in features {
            order.clear();
            order.extend_from_slice(rows);
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            let (mut sl, mut sr) = (0.0f64, total_sq);
            for i in 0..n - 1 {
                let c = self.y[order[i]];
                // (k+1)^2 - k^2 = 2k + 1
                sl += (2 * left[c] + 1) as f64;
                sr -= (2 * right[c] - 1) as f64;
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x[order[i]][f], self.x[order[i + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let score = sl / nl as f64 + sr / nr as f64;
                if best.is_none_or(|(s, _, _)| score > s + MIN_GAIN) {
                    let mid = a + (b - a) / 2.0;
                    // guard against rounding up onto b
                    let thr = if mid < b { mid } else { a };
                    best = Some((score, f, thr));
                }
            }
        }
        self.scratch = order;
        best.filter(|&(s, _, _)| s - parent > MIN_GAIN).map(|(_, f, t)| (f, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegNode::Leaf { value } => return value,
                RegNode::Split { feature, threshold, left, right } => {
                    i = if x[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }
}

/// Features quantized to at most `max_bins` bins per column. Bin `b` of
/// feature `f` holds values in `(cuts[f][b-1], cuts[f][b]]`.
pub(crate) struct Binned {
    pub n_rows: usize,
    pub n_features: usize,
    pub bins: Vec<u16>,
    pub cuts: Vec<Vec<f64>>,
}

impl Binned {
    pub fn new(x: &[Vec<f64>], max_bins: usize) -> Binned {
        let n_rows = x.len();
        let n_features = x.first().map_or(0, |r| r.len());
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let mut cuts = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mids: Vec<f64> = vals.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
            let c = if mids.len() < max_bins {
                mids
            } else {
                let k = max_bins - 1;
                let mut picked: Vec<f64> = (0..k).map(|i| mids[(i * mids.len()) / k]).collect();
                picked.dedup();
                picked
            };
            cuts.push(c);
        }
        let mut bins = vec![0u16; n_rows * n_features];
        for (r, row) in x.iter().enumerate() {
            for f in 0..n_features {
                bins[r * n_features + f] = cuts[f].partition_point(|&c| c < row[f]) as u16;
            }
        }
        Binned { n_rows, n_features, bins, cuts }
    }

    #[inline]
    fn bin(&self, row: usize, f: usize) -> usize {
        self.bins[row * self.n_features + f] as usize
    }
}

/// Fits a regression tree to gradients `g` with Newton leaves `Σg / Σh`,
/// scaled by `shrink`. Returns the tree and each row's leaf value.
pub(crate) fn fit_newton_tree(data: &Binned, g: &[f64], h: &[f64], max_depth: usize, min_leaf: usize, shrink: f64) -> (RegTree, Vec<f64>) {
    let mut rows: Vec<usize> = (0..data.n_rows).collect();
    let mut out = vec![0.0; data.n_rows];
    let mut nodes = Vec::new();
    let mut hist = Vec::new();
    grow_reg(data, g, h, &mut rows, 0, max_depth, min_leaf.max(1), shrink, &mut nodes, &mut out, &mut hist);
    (RegTree { nodes }, out)
}

#[allow(clippy::too_many_arguments)]
fn grow_reg(
    data: &Binned,
    g: &[f64],
    h: &[f64],
    rows: &mut [usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    shrink: f64,
    nodes: &mut Vec<RegNode>,
    out: &mut [f64],
    hist: &mut Vec<(f64, u32)>,
) -> u32 {
    let id = nodes.len() as u32;
    let n = rows.len();
    let gs: f64 = rows.iter().map(|&r| g[r]).sum();
    let hs: f64 = rows.iter().map(|&r| h[r]).sum();
    let value = if hs > 1e-12 { shrink * gs / hs } else { 0.0 };
    nodes.push(RegNode::Leaf { value });

    let mut best: Option<(f64, usize, usize)> = None;
    if depth < max_depth && n >= 2 * min_leaf {
        let parent = gs * gs / n as f64;
        for f in 0..data.n_features {
            let nb = data.cuts[f].len() + 1;
            if nb < 2 {
                continue;
            }
            hist.clear();
            hist.resize(nb, (0.0, 0));
            for &r in rows.iter() {
                let e = &mut hist[data.bin(r, f)];
                e.0 += g[r];
                e.1 += 1;
            }
            let (mut gl, mut nl) = (0.0, 0usize);
            for (b, bin) in hist.iter().enumerate().take(nb - 1) {
                gl += bin.0;
                nl += bin.1 as usize;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let gr = gs - gl;
                let gain = gl * gl / nl as f64 + gr * gr / nr as f64 - parent;
                if gain > MIN_GAIN && best.is_none_or(|(bg, _, _)| gain > bg + MIN_GAIN) {
                    best = Some((gain, f, b));
                }
            }
        }
    }
    let Some((_, f, b)) = best else {
        for &r in rows.iter() {
            out[r] = value;
        }
        return id;
    };
    let mut lo = 0;
    for i in 0..n {
        if data.bin(rows[i], f) <= b {
            rows.swap(i, lo);
            lo += 1;
        }
    }
    let (l, r) = rows.split_at_mut(lo);
    let left = grow_reg(data, g, h, l, depth + 1, max_depth, min_leaf, shrink, nodes, out, hist);
    let right = grow_reg(data, g, h, r, depth + 1, max_depth, min_leaf, shrink, nodes, out, hist);
    nodes[id as usize] = RegNode::Split { feature: f as u32, threshold: data.cuts[f][b], left, right };
    id
}
