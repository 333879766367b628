use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Column-major quantized copy of a feature matrix.
///
/// Each feature gets at most `max_bins` bins; `cuts[f][b]` is the real-valued
/// threshold separating bin `b` from bin `b + 1`, so `code ≤ b ⟺ x ≤ cuts[b]`.
/// When a column has no more distinct values than `max_bins` the cuts are the
/// midpoints between consecutive distinct values and splits are exact.
#[derive(Debug, Clone)]
pub struct BinnedData {
    codes: Vec<Vec<u16>>,
    cuts: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl BinnedData {
    pub fn from_matrix(mat: &FeatureMatrix, max_bins: usize) -> Result<Self> {
        let labels: Vec<u8> = mat.rows.iter().map(|r| r.label.index() as u8).collect();
        let columns: Vec<Vec<f64>> = (0..mat.n_features()).map(|j| mat.column(j)).collect();
        Self::from_columns(&columns, labels, max_bins)
    }

    pub fn from_columns(columns: &[Vec<f64>], labels: Vec<u8>, max_bins: usize) -> Result<Self> {
        if !(2..=u16::MAX as usize).contains(&max_bins) {
            return Err(Error::Config(format!(
                "max_bins {max_bins} must be in [2, 65535]"
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != labels.len()) {
            return Err(Error::Schema(format!(
                "column of length {} for {} labels",
                c.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 2) {
            return Err(Error::Schema("label index out of range".into()));
        }
        let mut codes = Vec::with_capacity(columns.len());
        let mut cuts = Vec::with_capacity(columns.len());
        for col in columns {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema("non-finite feature value".into()));
            }
            let c = column_cuts(col, max_bins);
            codes.push(
                col.iter()
                    .map(|&x| c.partition_point(|&t| t < x) as u16)
                    .collect(),
            );
            cuts.push(c);
        }
        Ok(Self { codes, cuts, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.codes.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub(crate) fn codes(&self, feature: usize) -> &[u16] {
        &self.codes[feature]
    }

    pub(crate) fn cut(&self, feature: usize, bin: usize) -> f64 {
        self.cuts[feature][bin]
    }

    pub(crate) fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    /// Restrict to a subset of rows, keeping the bin layout.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            codes: self
                .codes
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            cuts: self.cuts.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn column_cuts(col: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() <= 1 {
        return Vec::new();
    }
    let midpoint = |i: usize| sorted[i] + (sorted[i + 1] - sorted[i]) / 2.0;
    if sorted.len() <= max_bins {
        return (0..sorted.len() - 1).map(midpoint).collect();
    }
    // Quantile cuts over the full (non-deduplicated) column.
    let mut all = col.to_vec();
    all.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for b in 1..max_bins {
        let q = all[b * all.len() / max_bins];
        // First distinct value >= q, cut just below it.
        let i = sorted.partition_point(|&v| v < q);
        if i == 0 {
            continue;
        }
        let c = midpoint(i - 1);
        if cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    cuts
}
