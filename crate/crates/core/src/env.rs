//! Feature-subset selection as a sequential decision process. A state is the
//! set of chosen features, an action adds one unchosen feature, and a subset
//! is scored by a held-out forest plus size and redundancy penalties.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{correlation_matrix, stratified_split_indices, FeatureMatrix, SplitTag, N_FEATURES};
use crate::forest::{evaluate, train_forest_binned, BinnedData, ForestParams, MetricsReport};
use crate::rng::{derive_seed, derived_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub lambda_feat: f64,
    pub alpha_corr: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub init_subset_max: usize,
    pub oracle_trees: usize,
    /// Fraction of the outer training rows the reward forest trains on.
    pub eval_split: f64,
    /// Penalize absolute rather than signed correlation.
    pub corr_abs: bool,
    pub step_budget: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            w1: 0.4,
            w2: 0.2,
            w3: 0.2,
            w4: 0.2,
            lambda_feat: 0.02,
            alpha_corr: 0.1,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            init_subset_max: 3,
            oracle_trees: 50,
            eval_split: 0.75,
            corr_abs: false,
            step_budget: N_FEATURES,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("env.w1", self.w1),
            ("env.w2", self.w2),
            ("env.w3", self.w3),
            ("env.w4", self.w4),
            ("env.lambda_feat", self.lambda_feat),
            ("env.alpha_corr", self.alpha_corr),
            ("env.lambda1", self.lambda1),
            ("env.lambda2", self.lambda2),
            ("env.lambda3", self.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    what,
                    value: v.to_string(),
                    allowed: "[0, inf)",
                });
            }
        }
        if !(self.eval_split > 0.0 && self.eval_split < 1.0) {
            return Err(Error::OutOfRange {
                what: "env.eval_split",
                value: self.eval_split.to_string(),
                allowed: "(0, 1)",
            });
        }
        if self.oracle_trees == 0 {
            return Err(Error::OutOfRange {
                what: "env.oracle_trees",
                value: "0".into(),
                allowed: ">= 1",
            });
        }
        if self.step_budget == 0 {
            return Err(Error::OutOfRange {
                what: "env.step_budget",
                value: "0".into(),
                allowed: ">= 1",
            });
        }
        if self.init_subset_max > N_FEATURES {
            return Err(Error::OutOfRange {
                what: "env.init_subset_max",
                value: self.init_subset_max.to_string(),
                allowed: "[0, 23]",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsetState {
    pub mask: [bool; N_FEATURES],
    /// Additions since reset.
    pub step: usize,
}

impl SubsetState {
    pub fn empty() -> Self {
        Self {
            mask: [false; N_FEATURES],
            step: 0,
        }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut s = Self::empty();
        for &i in indices {
            s.mask[i] = true;
        }
        s
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..N_FEATURES).filter(|&i| self.mask[i]).collect()
    }

    pub fn bits(&self) -> u32 {
        mask_bits(&self.mask)
    }
}

pub fn mask_bits(mask: &[bool; N_FEATURES]) -> u32 {
    mask.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| if b { acc | (1 << i) } else { acc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_class: f64,
    pub r_feat: f64,
    pub r_corr: f64,
    pub r_total: f64,
    /// Held-out metrics of the oracle; absent for the empty subset.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: SubsetState,
    pub reward: f64,
    pub done: bool,
    pub info: RewardBreakdown,
}

/// Environment bound to one outer-training matrix. Rewards are memoized by
/// subset; the oracle seed is fixed per environment, so a subset's reward
/// does not depend on the path that reached it.
#[derive(Debug)]
pub struct FeatureSelectionEnv {
    cfg: EnvConfig,
    inner_train: BinnedData,
    inner_valid: FeatureMatrix,
    corr: Vec<Vec<f64>>,
    oracle_seed: u64,
    cache: Mutex<HashMap<u32, RewardBreakdown>>,
}

impl FeatureSelectionEnv {
    pub fn new(data: &FeatureMatrix, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        if data.n_features() != N_FEATURES {
            return Err(Error::Schema(format!(
                "environment expects {N_FEATURES} features, got {}",
                data.n_features()
            )));
        }
        let (tr, va) = stratified_split_indices(
            &data.labels(),
            cfg.eval_split,
            derive_seed(cfg.seed, "inner-split", 0),
        )?;
        let params = ForestParams::with_trees(cfg.oracle_trees);
        let inner_train = BinnedData::from_matrix(&data.select_rows(&tr, SplitTag::Train), params.max_bins)?;
        Ok(Self {
            inner_valid: data.select_rows(&va, SplitTag::Test),
            inner_train,
            corr: correlation_matrix(data),
            oracle_seed: derive_seed(cfg.seed, "oracle", 0),
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Pairwise Pearson correlations of the environment's data.
    pub fn correlations(&self) -> &[Vec<f64>] {
        &self.corr
    }

    /// Random initial subset: size uniform on `0..=init_subset_max`, members
    /// uniform without replacement.
    pub fn reset(&self, episode_seed: u64) -> SubsetState {
        let mut rng = derived_rng(episode_seed, "reset", 0);
        let size = rng.random_range(0..=self.cfg.init_subset_max);
        let picked = sample(&mut rng, N_FEATURES, size).into_vec();
        SubsetState::from_indices(&picked)
    }

    pub fn valid_actions(state: &SubsetState) -> Vec<usize> {
        (0..N_FEATURES).filter(|&i| !state.mask[i]).collect()
    }

    /// Number of distinct subsets scored so far.
    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("reward cache poisoned").len()
    }

    pub fn reward(&self, mask: &[bool; N_FEATURES]) -> Result<RewardBreakdown> {
        let key = mask_bits(mask);
        if let Some(hit) = self.cache.lock().expect("reward cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let subset: Vec<usize> = (0..N_FEATURES).filter(|&i| mask[i]).collect();
        let out = self.reward_components(&subset)?;
        self.cache
            .lock()
            .expect("reward cache poisoned")
            .insert(key, out.clone());
        Ok(out)
    }

    /// Uncached scoring of one subset.
    pub fn reward_components(&self, subset: &[usize]) -> Result<RewardBreakdown> {
        let cfg = &self.cfg;
        if subset.is_empty() {
            return Ok(RewardBreakdown {
                r_class: 0.0,
                r_feat: 0.0,
                r_corr: 0.0,
                r_total: 0.0,
                metrics: None,
            });
        }
        let params = ForestParams::with_trees(cfg.oracle_trees);
        let model = train_forest_binned(&self.inner_train, subset, &params, self.oracle_seed)?;
        let m = evaluate(&model, &self.inner_valid)?;
        let r_class =
            cfg.w1 * m.accuracy + cfg.w2 * m.macro_precision + cfg.w3 * m.macro_recall + cfg.w4 * m.macro_f1;
        let r_feat = -cfg.lambda_feat * subset.len() as f64;
        let r_corr = -cfg.alpha_corr * mean_pairwise(&self.corr, subset, cfg.corr_abs);
        Ok(RewardBreakdown {
            r_class,
            r_feat,
            r_corr,
            r_total: cfg.lambda1 * r_class + cfg.lambda2 * r_feat + cfg.lambda3 * r_corr,
            metrics: Some(m),
        })
    }

    pub fn step(&self, state: &SubsetState, action: usize) -> Result<StepOutcome> {
        if action >= N_FEATURES || state.mask[action] {
            return Err(Error::InvalidAction { action });
        }
        let mut next = *state;
        next.mask[action] = true;
        next.step += 1;
        let info = self.reward(&next.mask)?;
        Ok(StepOutcome {
            done: next.is_full() || next.step >= self.cfg.step_budget,
            reward: info.r_total,
            next,
            info,
        })
    }
}

/// Mean correlation over ordered pairs `i != j` of `subset`; 0 below two
/// members.
pub fn mean_pairwise(corr: &[Vec<f64>], subset: &[usize], absolute: bool) -> f64 {
    let n = subset.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for &i in subset {
        for &j in subset {
            if i != j {
                let c = corr[i][j];
                sum += if absolute { c.abs() } else { c };
            }
        }
    }
    sum / (n * (n - 1)) as f64
}
