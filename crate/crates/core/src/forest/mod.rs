//! Seeded bagged decision-tree ensemble (the classification oracle) and the
//! classification metrics built on it.

mod binned;
mod metrics;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binned::BinnedData;
pub use metrics::{f_score, MetricsReport};
pub use tree::{DecisionTree, Node};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::{derive_seed, rng_from};
use crate::synth::AdhesionLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Draw a bootstrap sample of the training set size for each tree.
    pub bootstrap: bool,
    /// Nodes with fewer samples become leaves.
    pub min_samples_split: usize,
    /// Splits leaving fewer samples on either side are not considered.
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
    /// Upper bound on distinct split thresholds per feature.
    pub max_bins: usize,
}

fn default_min_leaf() -> usize {
    2
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            min_samples_split: 2,
            min_samples_leaf: 2,
            max_bins: 64,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize) -> Self {
        Self {
            n_trees,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub feature_subset: Vec<usize>,
    pub seed: u64,
    /// Set when the training set held a single label; every tree is a leaf.
    pub degenerate: bool,
    /// Mean over trees of the weighted Gini decrease per feature (indexed by
    /// full feature index).
    pub importances: Vec<f64>,
}

/// Train on the listed feature columns of `train` with default parameters.
pub fn train_forest(
    train: &FeatureMatrix,
    subset: &[usize],
    n_trees: usize,
    seed: u64,
) -> Result<ForestModel> {
    let params = ForestParams::with_trees(n_trees);
    let binned = BinnedData::from_matrix(train, params.max_bins)?;
    train_forest_binned(&binned, subset, &params, seed)
}

/// Train on pre-binned data, the fast path used by the reward oracle.
pub fn train_forest_binned(
    data: &BinnedData,
    subset: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if subset.is_empty() {
        return Err(Error::NoFeatures);
    }
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    if data.n_rows() == 0 {
        return Err(Error::Schema("empty training set".into()));
    }
    if let Some(&bad) = subset.iter().find(|&&f| f >= data.n_features()) {
        return Err(Error::Schema(format!("feature index {bad} out of range")));
    }
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();

    let present = data.label_counts().iter().filter(|&&c| c > 0).count();
    let trees: Vec<(DecisionTree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive_seed(seed, "tree", t as u64));
            tree::grow(data, &subset, params, &mut rng)
        })
        .collect();

    let mut importances = vec![0.0; data.n_features()];
    for (_, imp) in &trees {
        for (acc, v) in importances.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    importances.iter_mut().for_each(|v| *v /= params.n_trees as f64);

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        trees: trees.into_iter().map(|(t, _)| t).collect(),
        n_trees: params.n_trees,
        feature_subset: subset,
        seed,
        degenerate: present < 2,
        importances,
    })
}

impl ForestModel {
    /// Majority vote; ties go to the label with the lower index
    /// (Safe, then PotentialHazard, then HazardOccurred).
    pub fn predict_row(&self, values: &[f64]) -> AdhesionLabel {
        let mut votes = [0usize; 3];
        for t in &self.trees {
            votes[t.predict(values)] += 1;
        }
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate().skip(1) {
            if v > votes[best] {
                best = i;
            }
        }
        AdhesionLabel::from_index(best).expect("three labels")
    }

    /// Per-tree vote counts for one row.
    pub fn votes(&self, values: &[f64]) -> [usize; 3] {
        let mut votes = [0usize; 3];
        for t in &self.trees {
            votes[t.predict(values)] += 1;
        }
        votes
    }

    /// Importances normalized to sum to one (all zero if no split was made).
    pub fn normalized_importances(&self) -> Vec<f64> {
        let total: f64 = self.importances.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.importances.len()];
        }
        self.importances.iter().map(|v| v / total).collect()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        match self.feature_subset.last() {
            Some(&max) if max >= width => Err(Error::Schema(format!(
                "rows have {width} columns but the model uses feature {max}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

pub fn predict(model: &ForestModel, rows: &FeatureMatrix) -> Result<Vec<AdhesionLabel>> {
    model.check_width(rows.n_features())?;
    if let Some(r) = rows.rows.iter().find(|r| r.values.len() != rows.n_features()) {
        return Err(Error::Schema(format!(
            "row with {} values in a {}-column matrix",
            r.values.len(),
            rows.n_features()
        )));
    }
    Ok(rows.rows.iter().map(|r| model.predict_row(&r.values)).collect())
}

pub fn evaluate(model: &ForestModel, test: &FeatureMatrix) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Schema("empty test set".into()));
    }
    let pred = predict(model, test)?;
    Ok(MetricsReport::from_predictions(&test.labels(), &pred))
}
