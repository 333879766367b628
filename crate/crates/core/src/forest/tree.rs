use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{BinnedData, ForestParams};
use crate::rng::Rng;

pub const LEAF: i32 = -1;

/// Flat array encoding of a binary tree; node 0 is the root. Internal nodes
/// send `x[feature] <= threshold` to `left`. Leaves have `feature == -1` and a
/// label index in `leaf_label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub leaf_label: Vec<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
    },
}

impl DecisionTree {
    fn with_capacity(n: usize) -> Self {
        Self {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            leaf_label: Vec::with_capacity(n),
        }
    }

    fn push_placeholder(&mut self) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.leaf_label.push(0);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn node(&self, i: usize) -> Node {
        if self.feature[i] == LEAF {
            Node::Leaf {
                label: self.leaf_label[i] as usize,
            }
        } else {
            Node::Split {
                feature: self.feature[i] as usize,
                threshold: self.threshold[i],
                left: self.left[i] as usize,
                right: self.right[i] as usize,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let f = self.feature[i];
            if f == LEAF {
                return self.leaf_label[i] as usize;
            }
            i = if x[f as usize] <= self.threshold[i] {
                self.left[i]
            } else {
                self.right[i]
            } as usize;
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.feature.iter().filter(|&&f| f != LEAF).map(|&f| f as usize)
    }
}

fn majority(counts: [u32; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    best
}

fn sum_sq_over_n(c: [u32; 3], n: u32) -> f64 {
    let s: u64 = c.iter().map(|&v| u64::from(v) * u64::from(v)).sum();
    s as f64 / f64::from(n)
}

struct BestSplit {
    feature: usize,
    bin: usize,
    score: f64,
}

/// Grow one tree; returns it with its per-feature weighted Gini decrease.
pub(super) fn grow(
    data: &BinnedData,
    subset: &[usize],
    params: &ForestParams,
    rng: &mut Rng,
) -> (DecisionTree, Vec<f64>) {
    let n = data.n_rows();
    let mut samples: Vec<u32> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n as u32)).collect()
    } else {
        (0..n as u32).collect()
    };
    let labels = data.labels();
    let total = samples.len() as f64;
    let n_candidates = (subset.len() as f64).sqrt().ceil() as usize;
    let mut importances = vec![0.0; data.n_features()];
    let mut tree = DecisionTree::with_capacity(2 * n);
    let mut order = subset.to_vec();
    let max_bins = subset.iter().map(|&f| data.n_bins(f)).max().unwrap_or(1);
    let mut hist = vec![[0u32; 3]; max_bins];

    let root = tree.push_placeholder();
    let mut stack = vec![(root, 0usize, samples.len())];
    while let Some((node, start, end)) = stack.pop() {
        let node_samples = &mut samples[start..end];
        let size = node_samples.len() as u32;
        let mut counts = [0u32; 3];
        for &s in node_samples.iter() {
            counts[labels[s as usize] as usize] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let leaf = params.min_samples_leaf.max(1) as u32;
        if pure || (size as usize) < params.min_samples_split || size < 2 * leaf {
            tree.leaf_label[node] = majority(counts) as i8;
            continue;
        }

        let parent_score = sum_sq_over_n(counts, size);
        let mut best: Option<BestSplit> = None;
        for i in 0..order.len() {
            if i >= n_candidates && best.is_some() {
                break;
            }
            let j = rng.random_range(i..order.len());
            order.swap(i, j);
            let f = order[i];

            let nb = data.n_bins(f);
            let h = &mut hist[..nb];
            h.iter_mut().for_each(|b| *b = [0; 3]);
            let codes = data.codes(f);
            for &s in node_samples.iter() {
                h[codes[s as usize] as usize][labels[s as usize] as usize] += 1;
            }
            // Candidate boundaries sit between consecutive non-empty bins; the
            // cut is taken halfway between them.
            let mut left = [0u32; 3];
            let mut left_n = 0u32;
            let mut prev_bin = 0usize;
            for (b, cell) in h.iter().enumerate() {
                let add = cell[0] + cell[1] + cell[2];
                if add == 0 {
                    continue;
                }
                if left_n >= leaf && size - left_n >= leaf {
                    let right = [counts[0] - left[0], counts[1] - left[1], counts[2] - left[2]];
                    let score = sum_sq_over_n(left, left_n) + sum_sq_over_n(right, size - left_n);
                    if best.as_ref().is_none_or(|bs| score > bs.score) {
                        best = Some(BestSplit {
                            feature: f,
                            bin: (prev_bin + b - 1) / 2,
                            score,
                        });
                    }
                }
                for c in 0..3 {
                    left[c] += cell[c];
                }
                left_n += add;
                prev_bin = b;
            }
        }

        let Some(split) = best else {
            tree.leaf_label[node] = majority(counts) as i8;
            continue;
        };
        // n·gini = n − Σc²/n, so the decrease is the score difference.
        importances[split.feature] += (split.score - parent_score).max(0.0) / total;

        let codes = data.codes(split.feature);
        let mut mid = 0;
        for k in 0..node_samples.len() {
            if usize::from(codes[node_samples[k] as usize]) <= split.bin {
                node_samples.swap(mid, k);
                mid += 1;
            }
        }
        let l = tree.push_placeholder();
        let r = tree.push_placeholder();
        tree.feature[node] = split.feature as i32;
        tree.threshold[node] = data.cut(split.feature, split.bin);
        tree.left[node] = l as u32;
        tree.right[node] = r as u32;
        stack.push((r, start + mid, end));
        stack.push((l, start, start + mid));
    }
    (tree, importances)
}
