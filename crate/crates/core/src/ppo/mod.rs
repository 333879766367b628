//! PPO agent for the subset-growing environment: rollout collection,
//! clipped-surrogate updates, training diagnostics and subset decoding.
//!
//! The agent learns from marginal rewards, the change in subset score caused
//! by each addition, and ends an episode once `patience` consecutive
//! additions have lowered the score. The episode's subset is the mask held
//! before that losing run.

mod gae;
mod network;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gae::compute_gae;
pub use network::{
    clip_grad_norm, clipped_surrogate, gradient_check, Adam, Forward, LossTerms, LossWeights, NetShape,
    PolicyNet, Sample,
};

use crate::env::{FeatureSelectionEnv, SubsetState};
use crate::error::{Error, Result};
use crate::features::N_FEATURES;
use crate::rng::{derive_seed, derived_rng, rng_from};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    #[serde(alias = "clip")]
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs_per_update: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub episodes: usize,
    /// Episodes collected with fixed parameters before each update.
    pub episodes_per_update: usize,
    /// Global gradient-norm bound; 0 disables clipping.
    pub max_grad_norm: f64,
    pub hidden: [usize; 2],
    /// Consecutive score-lowering additions that end an episode.
    pub patience: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            clip_epsilon: 0.2,
            gamma: 0.95,
            gae_lambda: 0.95,
            epochs_per_update: 4,
            minibatch: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            episodes: 2000,
            episodes_per_update: 8,
            max_grad_norm: 0.5,
            hidden: [64, 64],
            patience: 2,
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// Episode count of the long training preset.
    pub const LONG_RUN_EPISODES: usize = 8595;

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, v: String, allowed: &'static str| {
            Err(Error::OutOfRange {
                what,
                value: v,
                allowed,
            })
        };
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("ppo.clip_epsilon", self.clip_epsilon.to_string(), "(0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("ppo.gamma", self.gamma.to_string(), "(0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("ppo.gae_lambda", self.gae_lambda.to_string(), "[0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("ppo.learning_rate", self.learning_rate.to_string(), "(0, inf)");
        }
        for (what, v) in [
            ("ppo.entropy_coef", self.entropy_coef),
            ("ppo.value_coef", self.value_coef),
            ("ppo.max_grad_norm", self.max_grad_norm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(what, v.to_string(), "[0, inf)");
            }
        }
        for (what, v) in [
            ("ppo.epochs_per_update", self.epochs_per_update),
            ("ppo.minibatch", self.minibatch),
            ("ppo.episodes_per_update", self.episodes_per_update),
            ("ppo.patience", self.patience),
            ("ppo.hidden", self.hidden[0].min(self.hidden[1])),
        ] {
            if v == 0 {
                return bad(what, "0".into(), ">= 1");
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            inputs: N_FEATURES + 1,
            hidden1: self.hidden[0],
            hidden2: self.hidden[1],
            actions: N_FEATURES,
        }
    }

    fn loss_weights(&self) -> LossWeights {
        LossWeights {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Mask bits followed by the step count scaled to `[0, 1]`.
pub fn encode_state(state: &SubsetState) -> Vec<f64> {
    let mut x: Vec<f64> = state.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    x.push(state.step as f64 / N_FEATURES as f64);
    x
}

fn valid_mask(state: &SubsetState) -> Vec<bool> {
    state.mask.iter().map(|&b| !b).collect()
}

/// Aligned per-step series of one or more episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub valid: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn extend(&mut self, other: Trajectory) {
        self.states.extend(other.states);
        self.valid.extend(other.valid);
        self.actions.extend(other.actions);
        self.rewards.extend(other.rewards);
        self.values.extend(other.values);
        self.log_probs.extend(other.log_probs);
        self.dones.extend(other.dones);
    }
}

#[derive(Debug, Clone)]
struct Episode {
    traj: Trajectory,
    /// Subset held before the final losing run.
    subset: Vec<usize>,
}

fn run_episode(net: &PolicyNet, env: &FeatureSelectionEnv, cfg: &PpoConfig, index: usize) -> Result<Episode> {
    let mut rng = derived_rng(cfg.seed, "episode", index as u64);
    let mut state = env.reset(derive_seed(cfg.seed, "reset", index as u64));
    let mut prev = env.reward(&state.mask)?.r_total;
    let mut kept = state;
    let mut losing = 0;
    let mut traj = Trajectory::default();
    while !state.is_full() {
        let input = encode_state(&state);
        let valid = valid_mask(&state);
        let f = net.forward(&input, &valid)?;
        let u: f64 = rng.random();
        let action = sample_index(&f.probs, u);
        let out = env.step(&state, action)?;
        let marginal = out.reward - prev;
        prev = out.reward;
        if marginal < 0.0 {
            losing += 1;
        } else {
            losing = 0;
            kept = out.next;
        }
        let done = out.done || losing >= cfg.patience;
        traj.states.push(input);
        traj.valid.push(valid);
        traj.actions.push(action);
        traj.rewards.push(marginal);
        traj.values.push(f.value);
        traj.log_probs.push(f.log_prob(action));
        traj.dones.push(done);
        state = out.next;
        if done {
            break;
        }
    }
    Ok(Episode {
        traj,
        subset: kept.indices(),
    })
}

/// Inverse-CDF draw; never returns a zero-probability index.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Correlation matrix of one episode's subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSnapshot {
    pub episode: usize,
    pub subset: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
}

/// One addition made during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub feature: usize,
    pub marginal: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Sum of marginal rewards per episode.
    pub episode_rewards: Vec<f64>,
    /// Size of each episode's final subset.
    pub feature_counts: Vec<usize>,
    pub final_subsets: Vec<Vec<usize>>,
    /// Jaccard similarity of episode `i + 1`'s subset with episode `i`'s.
    pub jaccard: Vec<f64>,
    pub policy_losses: Vec<f64>,
    pub value_losses: Vec<f64>,
    pub entropies: Vec<f64>,
    pub steps: Vec<Vec<StepRecord>>,
    pub snapshot_every: usize,
    /// Largest-subset episode of each slice of `snapshot_every` episodes.
    pub correlation_snapshots: Vec<CorrelationSnapshot>,
}

impl TrainLog {
    /// Mean feature count per full slice of `width` episodes, and the mean
    /// of the leftover partial slice if any.
    pub fn feature_count_slices(&self, width: usize) -> (Vec<f64>, Option<f64>) {
        let mean = |c: &[usize]| c.iter().sum::<usize>() as f64 / c.len() as f64;
        let chunks = self.feature_counts.chunks_exact(width);
        let rest = chunks.remainder();
        let full = chunks.map(mean).collect();
        (full, (!rest.is_empty()).then(|| mean(rest)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `|a ∩ b| / |a ∪ b|`, 1 when both are empty.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Train from a seeded initialization.
pub fn train(env: &FeatureSelectionEnv, cfg: &PpoConfig) -> Result<(PolicyNet, TrainLog)> {
    cfg.validate()?;
    let net = PolicyNet::init(cfg.shape(), &mut derived_rng(cfg.seed, "init", 0));
    train_from(net, env, cfg)
}

pub fn train_from(
    mut net: PolicyNet,
    env: &FeatureSelectionEnv,
    cfg: &PpoConfig,
) -> Result<(PolicyNet, TrainLog)> {
    cfg.validate()?;
    let mut opt = Adam::new(net.params.len(), cfg.learning_rate);
    let mut log = TrainLog {
        snapshot_every: 5,
        ..Default::default()
    };
    let weights = cfg.loss_weights();
    let mut start = 0;
    let mut update = 0u64;
    while start < cfg.episodes {
        let end = (start + cfg.episodes_per_update).min(cfg.episodes);
        let episodes: Vec<Episode> = (start..end)
            .into_par_iter()
            .map(|i| {
                run_episode(&net, env, cfg, i).map_err(|e| Error::Episode {
                    episode: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;

        let mut batch = Trajectory::default();
        for ep in episodes {
            log.episode_rewards.push(ep.traj.rewards.iter().sum());
            log.steps.push(
                ep.traj
                    .actions
                    .iter()
                    .zip(&ep.traj.rewards)
                    .map(|(&feature, &marginal)| StepRecord { feature, marginal })
                    .collect(),
            );
            if let Some(prev) = log.final_subsets.last() {
                log.jaccard.push(jaccard(prev, &ep.subset));
            }
            log.feature_counts.push(ep.subset.len());
            log.final_subsets.push(ep.subset);
            batch.extend(ep.traj);
        }
        if !batch.is_empty() {
            let losses = ppo_update(&mut net, &mut opt, &batch, cfg, &weights, update).map_err(|e| {
                Error::Episode {
                    episode: end - 1,
                    source: Box::new(e),
                }
            })?;
            log.policy_losses.push(losses.policy);
            log.value_losses.push(losses.value);
            log.entropies.push(losses.entropy);
        }
        update += 1;
        start = end;
    }
    log.correlation_snapshots = correlation_snapshots(&log, env.correlations());
    Ok((net, log))
}

fn correlation_snapshots(log: &TrainLog, corr: &[Vec<f64>]) -> Vec<CorrelationSnapshot> {
    let width = log.snapshot_every.max(1);
    log.final_subsets
        .chunks(width)
        .enumerate()
        .map(|(c, chunk)| {
            // First episode of the slice with the most features.
            let (off, subset) = chunk
                .iter()
                .enumerate()
                .rev()
                .max_by_key(|(_, s)| s.len())
                .expect("chunks are non-empty");
            CorrelationSnapshot {
                episode: c * width + off,
                subset: subset.clone(),
                matrix: subset
                    .iter()
                    .map(|&i| {
                        subset
                            .iter()
                            .map(|&j| if i == j { 1.0 } else { corr[i][j] })
                            .collect()
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Advantage normalization, then `epochs_per_update` passes of shuffled
/// minibatch Adam steps. Returns the mean loss terms over all minibatches.
fn ppo_update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    batch: &Trajectory,
    cfg: &PpoConfig,
    weights: &LossWeights,
    update: u64,
) -> Result<LossTerms> {
    let (mut adv, ret) = compute_gae(
        &batch.rewards,
        &batch.values,
        &batch.dones,
        cfg.gamma,
        cfg.gae_lambda,
    );
    normalize(&mut adv);
    let samples: Vec<Sample> = (0..batch.len())
        .map(|t| Sample {
            input: batch.states[t].clone(),
            valid: batch.valid[t].clone(),
            action: batch.actions[t],
            old_log_prob: batch.log_probs[t],
            advantage: adv[t],
            ret: ret[t],
        })
        .collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng_from(derive_seed(cfg.seed, "minibatch", update));
    let mut sum = LossTerms {
        policy: 0.0,
        value: 0.0,
        entropy: 0.0,
        total: 0.0,
    };
    let mut count = 0.0;
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mb: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (terms, mut grad) = net.loss_and_grad(&mb, weights)?;
            if cfg.max_grad_norm > 0.0 {
                clip_grad_norm(&mut grad, cfg.max_grad_norm);
            }
            opt.step(&mut net.params, &grad);
            if net.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("parameters after optimizer step".into()));
            }
            sum.policy += terms.policy;
            sum.value += terms.value;
            sum.entropy += terms.entropy;
            sum.total += terms.total;
            count += 1.0;
        }
    }
    Ok(LossTerms {
        policy: sum.policy / count,
        value: sum.value / count,
        entropy: sum.entropy / count,
        total: sum.total / count,
    })
}

/// Shift to mean 0 and scale to unit standard deviation (scale skipped for
/// a constant batch).
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) * scale);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    GreedyStop,
    ScoreThreshold,
}

/// Grow a subset from empty by repeatedly taking `choose(state)`; stop once
/// `patience` consecutive additions lower the score or the mask is full.
/// Returns the subset held before the losing run.
pub fn greedy_stop(
    mut choose: impl FnMut(&SubsetState) -> Result<usize>,
    mut score: impl FnMut(&SubsetState) -> Result<f64>,
    patience: usize,
) -> Result<Vec<usize>> {
    let mut state = SubsetState::empty();
    let mut prev = score(&state)?;
    let mut kept = state;
    let mut losing = 0;
    while !state.is_full() {
        let action = choose(&state)?;
        if state.mask[action] {
            return Err(Error::InvalidAction { action });
        }
        state.mask[action] = true;
        state.step += 1;
        let now = score(&state)?;
        if now - prev < 0.0 {
            losing += 1;
            if losing >= patience {
                break;
            }
        } else {
            losing = 0;
            kept = state;
        }
        prev = now;
    }
    Ok(kept.indices())
}

/// Most probable valid action; ties go to the lower index.
pub fn argmax_action(net: &PolicyNet, state: &SubsetState) -> Result<usize> {
    let f = net.forward(&encode_state(state), &valid_mask(state))?;
    let mut best = None;
    for (i, &p) in f.probs.iter().enumerate() {
        if state.mask[i] {
            continue;
        }
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((i, p)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Terminal)
}

pub fn decode_greedy(net: &PolicyNet, env: &FeatureSelectionEnv, patience: usize) -> Result<Vec<usize>> {
    greedy_stop(
        |s| argmax_action(net, s),
        |s| Ok(env.reward(&s.mask)?.r_total),
        patience,
    )
}

/// Features whose mean marginal reward over the last `tail` fraction of
/// training episodes exceeds the mean of those per-feature averages.
/// Features never added in that window are not averaged.
pub fn decode_score_threshold(log: &TrainLog, tail: f64) -> Vec<usize> {
    let n = log.steps.len();
    let from = n - ((n as f64 * tail).ceil() as usize).min(n);
    let mut sum = [0.0; N_FEATURES];
    let mut cnt = [0usize; N_FEATURES];
    for rec in log.steps[from..].iter().flatten() {
        sum[rec.feature] += rec.marginal;
        cnt[rec.feature] += 1;
    }
    let avgs: Vec<(usize, f64)> = (0..N_FEATURES)
        .filter(|&f| cnt[f] > 0)
        .map(|f| (f, sum[f] / cnt[f] as f64))
        .collect();
    if avgs.is_empty() {
        return Vec::new();
    }
    let mean = avgs.iter().map(|(_, a)| a).sum::<f64>() / avgs.len() as f64;
    avgs.into_iter()
        .filter(|&(_, a)| a > mean)
        .map(|(f, _)| f)
        .collect()
}

pub fn decode_subset(
    net: &PolicyNet,
    env: &FeatureSelectionEnv,
    log: &TrainLog,
    mode: DecodeMode,
    patience: usize,
) -> Result<Vec<usize>> {
    match mode {
        DecodeMode::GreedyStop => decode_greedy(net, env, patience),
        DecodeMode::ScoreThreshold => Ok(decode_score_threshold(log, 0.2)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub format_version: u32,
    pub shape: NetShape,
    pub params: Vec<f64>,
}

impl PolicyCheckpoint {
    pub fn from_net(net: &PolicyNet) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            shape: net.shape,
            params: net.params.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse and validate; any mismatch is a schema error.
    pub fn from_json(s: &str) -> Result<PolicyNet> {
        let c: PolicyCheckpoint =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("policy checkpoint: {e}")))?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version {}",
                c.format_version
            )));
        }
        if c.params.len() != c.shape.n_params() {
            return Err(Error::Schema(format!(
                "checkpoint holds {} parameters, shape needs {}",
                c.params.len(),
                c.shape.n_params()
            )));
        }
        if c.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Schema("checkpoint holds non-finite parameters".into()));
        }
        Ok(PolicyNet {
            shape: c.shape,
            params: c.params,
        })
    }
}
