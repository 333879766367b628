//! Classical feature selectors: univariate ANOVA filter, recursive
//! elimination and forest-importance ranking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::{train_forest_binned, BinnedData, ForestParams};
use crate::rng::derive_seed;
use crate::synth::AdhesionLabel;

/// Stand-in for an infinite F statistic (zero within-group variance with
/// distinct group means).
pub const F_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SKB")]
    Skb,
    #[serde(rename = "RFE")]
    Rfe,
    #[serde(rename = "RFFI")]
    Rffi,
    #[serde(rename = "PPO")]
    Ppo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Skb, Method::Rfe, Method::Rffi, Method::Ppo];
    pub const BASELINES: [Method; 3] = [Method::Skb, Method::Rfe, Method::Rffi];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Skb => "SKB",
            Method::Rfe => "RFE",
            Method::Rffi => "RFFI",
            Method::Ppo => "PPO",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}; expected SKB, RFE, RFFI or PPO")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Selected feature indices in selection order.
    pub subset: Vec<usize>,
    /// Per-feature score: F value, survival round or normalized importance.
    pub scores: Vec<f64>,
    pub k_requested: usize,
}

impl SelectionResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One-way ANOVA F statistic of `column` grouped by label. Labels with no
/// rows are ignored.
pub fn anova_f(column: &[f64], labels: &[AdhesionLabel]) -> Result<f64> {
    if column.len() != labels.len() {
        return Err(Error::Schema("column and labels differ in length".into()));
    }
    let mut groups: [Vec<f64>; 3] = Default::default();
    for (&x, l) in column.iter().zip(labels) {
        groups[l.index()].push(x);
    }
    let present: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::Schema("ANOVA needs at least two labels".into()));
    }
    if present.iter().any(|g| g.len() < 2) {
        return Err(Error::Schema("ANOVA needs two rows per present label".into()));
    }
    let n = column.len() as f64;
    let grand = column.iter().sum::<f64>() / n;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for g in &present {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_b = (present.len() - 1) as f64;
    let df_w = n - present.len() as f64;
    // Relative floors absorb rounding in the group means.
    let scale = column.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let tiny = 1e-24 * scale;
    if ssw <= tiny {
        return Ok(if ssb <= tiny { 0.0 } else { F_MAX });
    }
    Ok(((ssb / df_b) / (ssw / df_w)).min(F_MAX))
}

fn check_k(k: usize, width: usize) -> Result<()> {
    if k == 0 || k > width {
        return Err(Error::OutOfRange {
            what: "k",
            value: k.to_string(),
            allowed: "[1, number of features]",
        });
    }
    Ok(())
}

/// Indices of the `k` largest scores; ties go to the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn skb_select(train: &FeatureMatrix, k: usize) -> Result<SelectionResult> {
    check_k(k, train.n_features())?;
    let labels = train.labels();
    let scores = (0..train.n_features())
        .map(|j| anova_f(&train.column(j), &labels))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionResult {
        method: Method::Skb,
        subset: top_k(&scores, k),
        scores,
        k_requested: k,
    })
}

/// Drop the least important remaining feature, one per round, until `k`
/// remain. A feature's score is the round in which it was dropped; the
/// survivors share the score `rounds + 1`.
pub fn rfe_select(train: &FeatureMatrix, k: usize, n_trees: usize, seed: u64) -> Result<SelectionResult> {
    check_k(k, train.n_features())?;
    let params = ForestParams::with_trees(n_trees);
    let data = BinnedData::from_matrix(train, params.max_bins)?;
    let width = train.n_features();
    let mut remaining: Vec<usize> = (0..width).collect();
    let mut scores = vec![0.0; width];
    let mut round = 0;
    while remaining.len() > k {
        round += 1;
        let model = train_forest_binned(&data, &remaining, &params, derive_seed(seed, "rfe", round))?;
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                model.importances[a]
                    .total_cmp(&model.importances[b])
                    .then(a.cmp(&b))
            })
            .expect("remaining is non-empty");
        scores[remaining.remove(pos)] = round as f64;
    }
    for &f in &remaining {
        scores[f] = (round + 1) as f64;
    }
    Ok(SelectionResult {
        method: Method::Rfe,
        subset: remaining,
        scores,
        k_requested: k,
    })
}

pub fn rffi_select(train: &FeatureMatrix, k: usize, n_trees: usize, seed: u64) -> Result<SelectionResult> {
    check_k(k, train.n_features())?;
    let params = ForestParams::with_trees(n_trees);
    let data = BinnedData::from_matrix(train, params.max_bins)?;
    let all: Vec<usize> = (0..train.n_features()).collect();
    let model = train_forest_binned(&data, &all, &params, derive_seed(seed, "rffi", 0))?;
    let scores = model.normalized_importances();
    Ok(SelectionResult {
        method: Method::Rffi,
        subset: top_k(&scores, k),
        scores,
        k_requested: k,
    })
}

/// Baseline selection at the requested cardinality.
pub fn select(
    method: Method,
    train: &FeatureMatrix,
    k: usize,
    n_trees: usize,
    seed: u64,
) -> Result<SelectionResult> {
    match method {
        Method::Skb => skb_select(train, k),
        Method::Rfe => rfe_select(train, k, n_trees, seed),
        Method::Rffi => rffi_select(train, k, n_trees, seed),
        Method::Ppo => Err(Error::Config("PPO selection comes from a trained policy".into())),
    }
}

/// Default baseline sweep cardinalities.
pub const K_SWEEP: [usize; 4] = [4, 6, 8, 10];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, SplitTag, FEATURE_NAMES, N_FEATURES};
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng as _;
    use AdhesionLabel::*;

    fn matrix(rows: Vec<(Vec<f64>, usize)>) -> FeatureMatrix {
        FeatureMatrix {
            rows: rows
                .into_iter()
                .map(|(values, l)| FeatureVector {
                    values,
                    label: AdhesionLabel::from_index(l).unwrap(),
                    condition_tag: "t".into(),
                })
                .collect(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            split: SplitTag::Train,
        }
    }

    /// Column `signal` separates the labels; every other column is noise.
    fn planted(n: usize, signal: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rng_from(seed);
        matrix(
            (0..n)
                .map(|i| {
                    let l = i % 3;
                    let mut v: Vec<f64> = (0..N_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
                    v[signal] = l as f64 + rng.random_range(-0.6..0.6);
                    (v, l)
                })
                .collect(),
        )
    }

    #[test]
    fn anova_hand_case() {
        let f = anova_f(
            &[1.0, 2.0, 3.0, 4.0],
            &[Safe, Safe, PotentialHazard, PotentialHazard],
        )
        .unwrap();
        assert!((f - 8.0).abs() < 1e-9);
    }

    #[test]
    fn anova_equal_means_is_zero() {
        let f = anova_f(
            &[1.0, 3.0, 0.0, 4.0, 2.0, 2.0],
            &[
                Safe,
                Safe,
                PotentialHazard,
                PotentialHazard,
                HazardOccurred,
                HazardOccurred,
            ],
        )
        .unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn anova_degenerate_conventions() {
        let labels = [Safe, Safe, PotentialHazard, PotentialHazard];
        assert_eq!(anova_f(&[5.0; 4], &labels).unwrap(), 0.0);
        assert_eq!(anova_f(&[1.0, 1.0, 2.0, 2.0], &labels).unwrap(), F_MAX);
        assert!(anova_f(&[1.0, 2.0], &[Safe, Safe]).is_err());
        assert!(anova_f(&[1.0, 2.0, 3.0], &[Safe, Safe, PotentialHazard]).is_err());
    }

    #[test]
    fn skb_full_and_single() {
        let m = planted(90, 7, 1);
        let all = skb_select(&m, 23).unwrap();
        let mut s = all.subset.clone();
        s.sort_unstable();
        assert_eq!(s, (0..23).collect::<Vec<_>>());
        let one = skb_select(&m, 1).unwrap();
        assert_eq!(one.subset, vec![7]);
        // Brute-force ordering: the planted column has the largest F.
        let best = (0..23)
            .max_by(|&a, &b| one.scores[a].total_cmp(&one.scores[b]))
            .unwrap();
        assert_eq!(best, 7);
    }

    #[test]
    fn skb_ignores_row_order() {
        let m = planted(60, 3, 2);
        let mut rev = m.clone();
        rev.rows.reverse();
        assert_eq!(
            skb_select(&m, 5).unwrap().subset,
            skb_select(&rev, 5).unwrap().subset
        );
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        assert_eq!(top_k(&[1.0, 3.0, 3.0, 0.0, 3.0], 2), vec![1, 2]);
    }

    #[test]
    fn rfe_without_elimination() {
        let m = planted(60, 4, 3);
        let r = rfe_select(&m, 23, 10, 1).unwrap();
        assert_eq!(r.subset, (0..23).collect::<Vec<_>>());
        assert!(r.scores.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn rfe_single_round_drops_the_least_important() {
        let m = planted(60, 4, 4);
        let r = rfe_select(&m, 22, 20, 9).unwrap();
        let params = ForestParams::with_trees(20);
        let data = BinnedData::from_matrix(&m, params.max_bins).unwrap();
        let all: Vec<usize> = (0..23).collect();
        let full = train_forest_binned(&data, &all, &params, derive_seed(9, "rfe", 1)).unwrap();
        let weakest = (0..23)
            .min_by(|&a, &b| {
                full.importances[a]
                    .total_cmp(&full.importances[b])
                    .then(a.cmp(&b))
            })
            .unwrap();
        assert!(!r.subset.contains(&weakest));
        assert_eq!(r.scores[weakest], 1.0);
        assert_eq!(r.subset.len(), 22);
    }

    #[test]
    fn rfe_keeps_the_planted_column() {
        let m = planted(90, 11, 5);
        assert!(rfe_select(&m, 3, 20, 2).unwrap().subset.contains(&11));
    }

    #[test]
    fn rffi_scores_are_normalized() {
        let m = planted(90, 2, 6);
        let r = rffi_select(&m, 4, 30, 1).unwrap();
        assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(r.subset[0], 2);
    }

    #[test]
    fn unused_feature_scores_zero() {
        // A constant column can never be split on.
        let mut m = planted(60, 2, 7);
        m.rows.iter_mut().for_each(|r| r.values[15] = 1.0);
        let r = rffi_select(&m, 4, 30, 1).unwrap();
        assert_eq!(r.scores[15], 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("lasso".parse::<Method>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn skb_is_nested(seed in 0u64..500, k in 1usize..22) {
            let m = planted(45, (seed % 23) as usize, seed);
            let a = skb_select(&m, k).unwrap().subset;
            let b = skb_select(&m, k + 1).unwrap().subset;
            prop_assert!(a.iter().all(|f| b.contains(f)));
        }

        #[test]
        fn anova_is_non_negative(xs in proptest::collection::vec(-50.0f64..50.0, 6..40)) {
            let labels: Vec<AdhesionLabel> = (0..xs.len()).map(|i| AdhesionLabel::from_index(i % 3).unwrap()).collect();
            let f = anova_f(&xs, &labels).unwrap();
            prop_assert!(f >= 0.0 && f.is_finite());
        }
    }
}
