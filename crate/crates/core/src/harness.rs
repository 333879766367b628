//! Benchmark harness: pooled-condition comparison of the selectors,
//! per-label scores, salt-and-pepper sweep and training-stability tables.
//!
//! A cell is one (condition combination, repetition) pair. Every method in
//! a cell sees the same split, the same evaluation forest seed and the same
//! corrupted test sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{select, Method, SelectionResult};
use crate::dataset::{Benchmark, DatasetConfig};
use crate::env::{EnvConfig, FeatureSelectionEnv};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::{evaluate, train_forest, MetricsReport};
use crate::ppo::{decode_subset, train, DecodeMode, PolicyNet, PpoConfig, TrainLog};
use crate::rng::derive_seed;
use crate::synth::{AdhesionLabel, SignalRecord};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Episodes per feature-count slice in the stability tables.
pub const SLICE_WIDTH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KMode {
    /// Baselines select as many features as the PPO subset of the same cell.
    #[default]
    Matched,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub k_mode: KMode,
    /// Cardinality for `fixed` mode, and for `matched` mode when no PPO
    /// subset is available.
    pub k: usize,
    pub n_trees: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            k_mode: KMode::Matched,
            k: 6,
            n_trees: 100,
        }
    }
}

/// Benchmark grid. Combination `i` pools the first `i + 1` condition tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSpec {
    pub condition_tags: Vec<String>,
    pub methods: Vec<Method>,
    pub noise_densities: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    /// Trees in the forest that scores each selected subset.
    pub eval_trees: usize,
    pub decode: DecodeMode,
    pub dataset: DatasetConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub baselines: BaselineConfig,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            condition_tags: ["1kg", "2kg", "3kg", "5kg"].map(String::from).to_vec(),
            methods: Method::ALL.to_vec(),
            noise_densities: vec![0.0, 0.02, 0.06, 0.10],
            repetitions: 3,
            seed: 0,
            eval_trees: 100,
            decode: DecodeMode::GreedyStop,
            dataset: DatasetConfig::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub combo: usize,
    pub repetition: usize,
}

impl CellId {
    /// File-name stem, e.g. `combo2_rep0`.
    pub fn key(&self) -> String {
        format!("combo{}_rep{}", self.combo, self.repetition)
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.condition_tags.is_empty() {
            return Err(Error::Config("eval.condition_tags must not be empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("eval.methods must not be empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::OutOfRange {
                what: "eval.repetitions",
                value: "0".into(),
                allowed: ">= 1",
            });
        }
        if let Some(d) = self.noise_densities.iter().find(|d| !(0.0..=0.5).contains(*d)) {
            return Err(Error::OutOfRange {
                what: "eval.noise_densities",
                value: d.to_string(),
                allowed: "[0, 0.5]",
            });
        }
        if self.eval_trees == 0 || self.baselines.n_trees == 0 {
            return Err(Error::OutOfRange {
                what: "eval.eval_trees / baselines.n_trees",
                value: "0".into(),
                allowed: ">= 1",
            });
        }
        if self.baselines.k == 0 || self.baselines.k > crate::N_FEATURES {
            return Err(Error::OutOfRange {
                what: "baselines.k",
                value: self.baselines.k.to_string(),
                allowed: "[1, 23]",
            });
        }
        self.dataset.validate()?;
        self.env.validate()?;
        self.ppo.validate()
    }

    pub fn combos(&self) -> Vec<Vec<String>> {
        (1..=self.condition_tags.len())
            .map(|n| self.condition_tags[..n].to_vec())
            .collect()
    }

    /// Combination-major cell order.
    pub fn cells(&self) -> Vec<CellId> {
        (0..self.condition_tags.len())
            .flat_map(|combo| (0..self.repetitions).map(move |repetition| CellId { combo, repetition }))
            .collect()
    }

    pub fn cell_seed(&self, cell: CellId) -> u64 {
        derive_seed(self.seed, &format!("cell/{}", cell.combo), cell.repetition as u64)
    }

    pub fn has_ppo(&self) -> bool {
        self.methods.contains(&Method::Ppo)
    }
}

/// Pool the records of `tags` in the given order.
pub fn pool_records(
    records: &BTreeMap<String, Vec<SignalRecord>>,
    tags: &[String],
) -> Result<Vec<SignalRecord>> {
    let mut out = Vec::new();
    for t in tags {
        let recs = records
            .get(t)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::MissingCondition(t.clone()))?;
        out.extend(recs.iter().cloned());
    }
    Ok(out)
}

pub fn build_cell(
    spec: &BenchmarkSpec,
    records: &BTreeMap<String, Vec<SignalRecord>>,
    cell: CellId,
) -> Result<Benchmark> {
    let tags = &spec.condition_tags[..=cell.combo];
    Benchmark::build(
        pool_records(records, tags)?,
        &spec.dataset.dsp,
        spec.dataset.train_frac,
        spec.cell_seed(cell),
    )
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    pub net: PolicyNet,
    pub log: TrainLog,
    pub subset: Vec<usize>,
    pub evaluations: usize,
}

/// Train the policy of one cell on its training partition and decode a subset.
pub fn train_cell_ppo(spec: &BenchmarkSpec, cell: CellId, train_rows: &FeatureMatrix) -> Result<PpoOutcome> {
    let seed = spec.cell_seed(cell);
    let env = FeatureSelectionEnv::new(
        train_rows,
        EnvConfig {
            seed: derive_seed(seed, "env", 0),
            ..spec.env.clone()
        },
    )?;
    let cfg = PpoConfig {
        seed: derive_seed(seed, "ppo", 0),
        ..spec.ppo.clone()
    };
    let (net, log) = train(&env, &cfg)?;
    let subset = decode_subset(&net, &env, &log, spec.decode, cfg.patience)?;
    Ok(PpoOutcome {
        net,
        log,
        subset,
        evaluations: env.evaluations(),
    })
}

/// Cardinality the baselines select in a cell.
pub fn baseline_k(spec: &BenchmarkSpec, ppo_subset: Option<&[usize]>) -> usize {
    match (spec.baselines.k_mode, ppo_subset) {
        (KMode::Matched, Some(s)) if !s.is_empty() => s.len(),
        _ => spec.baselines.k,
    }
}

/// Selections of every configured method, in `spec.methods` order. The PPO
/// entry wraps `ppo_subset`, which must be given when PPO is configured.
pub fn select_cell(
    spec: &BenchmarkSpec,
    cell: CellId,
    train_rows: &FeatureMatrix,
    ppo_subset: Option<&[usize]>,
) -> Result<Vec<SelectionResult>> {
    let k = baseline_k(spec, ppo_subset);
    let seed = spec.cell_seed(cell);
    spec.methods
        .iter()
        .map(|&m| match m {
            Method::Ppo => {
                let subset = ppo_subset
                    .ok_or_else(|| Error::Config("PPO is configured but no PPO subset was given".into()))?
                    .to_vec();
                let mut scores = vec![0.0; crate::N_FEATURES];
                subset.iter().for_each(|&i| scores[i] = 1.0);
                Ok(SelectionResult {
                    method: m,
                    k_requested: subset.len(),
                    subset,
                    scores,
                })
            }
            _ => select(
                m,
                train_rows,
                k,
                spec.baselines.n_trees,
                derive_seed(seed, "baseline", m as u64),
            ),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEvaluation {
    pub method: Method,
    pub subset: Vec<usize>,
    pub metrics: MetricsReport,
    /// Accuracy per noise density, in `spec.noise_densities` order.
    pub noise_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellId,
    pub evaluations: Vec<MethodEvaluation>,
}

/// Predicts the most frequent training label for every row; stands in for
/// a model on an empty subset.
fn majority_label(train_rows: &FeatureMatrix) -> AdhesionLabel {
    let counts = train_rows.label_counts();
    let best = (0..3).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
    AdhesionLabel::from_index(best).expect("index below 3")
}

/// Score every selection on the clean and the corrupted test partitions.
pub fn evaluate_cell(
    spec: &BenchmarkSpec,
    cell: CellId,
    bench: &Benchmark,
    selections: &[SelectionResult],
) -> Result<CellResult> {
    let seed = spec.cell_seed(cell);
    let noisy: Vec<FeatureMatrix> = spec
        .noise_densities
        .iter()
        .enumerate()
        .map(|(j, &d)| bench.corrupted_test(d, derive_seed(seed, "noise", j as u64)))
        .collect::<Result<_>>()?;
    let eval_seed = derive_seed(seed, "eval", 0);
    let evaluations = selections
        .iter()
        .map(|sel| {
            let score =
                |rows: &FeatureMatrix, model: Option<&crate::forest::ForestModel>| -> Result<MetricsReport> {
                    match model {
                        Some(m) => evaluate(m, rows),
                        None => {
                            let pred = vec![majority_label(&bench.train); rows.n_rows()];
                            Ok(MetricsReport::from_predictions(&rows.labels(), &pred))
                        }
                    }
                };
            let model = if sel.subset.is_empty() {
                None
            } else {
                Some(train_forest(
                    &bench.train,
                    &sel.subset,
                    spec.eval_trees,
                    eval_seed,
                )?)
            };
            let metrics = score(&bench.test, model.as_ref())?;
            let noise_accuracy = noisy
                .iter()
                .map(|rows| Ok(score(rows, model.as_ref())?.accuracy))
                .collect::<Result<_>>()?;
            Ok(MethodEvaluation {
                method: sel.method,
                subset: sel.subset.clone(),
                metrics,
                noise_accuracy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CellResult { cell, evaluations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub combo: usize,
    pub conditions: Vec<String>,
    pub method: Method,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
    pub accuracy_mean: f64,
    pub macro_f1: Vec<f64>,
    pub subsets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerLabelRow {
    pub combo: usize,
    pub method: Method,
    pub label: AdhesionLabel,
    /// `None` when the label is absent from every test fold.
    pub fscore_mean: Option<f64>,
    pub fscore_variance: Option<f64>,
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub combo: usize,
    pub method: Method,
    pub densities: Vec<f64>,
    pub accuracy_mean: Vec<f64>,
    pub accuracy: Vec<Vec<f64>>,
}

impl NoiseCurve {
    /// Mean accuracy lost between the first and last density.
    pub fn drop(&self) -> f64 {
        self.accuracy_mean.first().copied().unwrap_or(0.0) - self.accuracy_mean.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub combo: usize,
    pub best_baseline: Method,
    /// PPO mean macro F-score minus the best baseline's.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub format_version: u32,
    pub seed: u64,
    pub condition_tags: Vec<String>,
    pub noise_densities: Vec<f64>,
    pub repetitions: usize,
    pub cells: Vec<CellReport>,
    pub per_label: Vec<PerLabelRow>,
    pub noise_curves: Vec<NoiseCurve>,
    pub stability_refs: Vec<String>,
    pub margins: Vec<Margin>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance; 0 for fewer than two values.
fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Per-label F-score mean and across-repetition variance for each method.
/// Repetitions whose test fold lacks the label are skipped; a label missing
/// from every fold is flagged undefined.
pub fn per_label_report(combo: usize, results: &[(Method, Vec<MetricsReport>)]) -> Vec<PerLabelRow> {
    let mut rows = Vec::new();
    for label in AdhesionLabel::ALL {
        for (method, reps) in results {
            let vals: Vec<f64> = reps
                .iter()
                .filter(|m| m.support()[label.index()] > 0)
                .map(|m| m.per_label_fscore[&label])
                .collect();
            let defined = !vals.is_empty();
            rows.push(PerLabelRow {
                combo,
                method: *method,
                label,
                fscore_mean: defined.then(|| mean(&vals)),
                fscore_variance: defined.then(|| variance(&vals)),
                undefined: !defined,
            });
        }
    }
    rows
}

/// Collapse cell results into the report; `results` must cover `spec.cells()`.
pub fn assemble_report(spec: &BenchmarkSpec, results: &[CellResult]) -> Result<SelectionReport> {
    let mut by_cell: BTreeMap<CellId, &CellResult> = BTreeMap::new();
    for r in results {
        by_cell.insert(r.cell, r);
    }
    let mut cells = Vec::new();
    let mut per_label = Vec::new();
    let mut noise_curves = Vec::new();
    let mut margins = Vec::new();
    for (combo, conditions) in spec.combos().into_iter().enumerate() {
        let mut label_input = Vec::new();
        for &method in &spec.methods {
            let evals: Vec<&MethodEvaluation> = (0..spec.repetitions)
                .map(|repetition| {
                    let cell = CellId { combo, repetition };
                    by_cell
                        .get(&cell)
                        .and_then(|r| r.evaluations.iter().find(|e| e.method == method))
                        .ok_or_else(|| Error::Schema(format!("no {method} result for cell {}", cell.key())))
                })
                .collect::<Result<_>>()?;
            let f1: Vec<f64> = evals.iter().map(|e| e.metrics.macro_f1).collect();
            let acc: Vec<f64> = evals.iter().map(|e| e.metrics.accuracy).collect();
            cells.push(CellReport {
                combo,
                conditions: conditions.clone(),
                method,
                macro_f1_mean: mean(&f1),
                macro_f1_std: variance(&f1).sqrt(),
                accuracy_mean: mean(&acc),
                macro_f1: f1,
                subsets: evals.iter().map(|e| e.subset.clone()).collect(),
            });
            label_input.push((method, evals.iter().map(|e| e.metrics.clone()).collect()));
            let accuracy: Vec<Vec<f64>> = evals.iter().map(|e| e.noise_accuracy.clone()).collect();
            noise_curves.push(NoiseCurve {
                combo,
                method,
                densities: spec.noise_densities.clone(),
                accuracy_mean: (0..spec.noise_densities.len())
                    .map(|j| mean(&accuracy.iter().map(|a| a[j]).collect::<Vec<_>>()))
                    .collect(),
                accuracy,
            });
        }
        per_label.extend(per_label_report(combo, &label_input));
        let combo_cells = &cells[cells.len() - spec.methods.len()..];
        let ppo = combo_cells.iter().find(|c| c.method == Method::Ppo);
        let best = combo_cells
            .iter()
            .filter(|c| Method::BASELINES.contains(&c.method))
            .max_by(|a, b| a.macro_f1_mean.total_cmp(&b.macro_f1_mean));
        if let (Some(p), Some(b)) = (ppo, best) {
            margins.push(Margin {
                combo,
                best_baseline: b.method,
                margin: p.macro_f1_mean - b.macro_f1_mean,
            });
        }
    }
    let stability_refs = if spec.has_ppo() {
        spec.cells()
            .iter()
            .map(|c| format!("stability/{}", c.key()))
            .collect()
    } else {
        Vec::new()
    };
    Ok(SelectionReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: spec.seed,
        condition_tags: spec.condition_tags.clone(),
        noise_densities: spec.noise_densities.clone(),
        repetitions: spec.repetitions,
        cells,
        per_label,
        noise_curves,
        stability_refs,
        margins,
    })
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: SelectionReport,
    pub cells: Vec<CellResult>,
    /// Training logs keyed by cell; empty when PPO is not configured.
    pub logs: Vec<(CellId, TrainLog)>,
}

/// All stages for every cell. Cells run in parallel; results do not depend
/// on the thread count.
pub fn run_condition_benchmark(
    spec: &BenchmarkSpec,
    records: &BTreeMap<String, Vec<SignalRecord>>,
) -> Result<BenchmarkRun> {
    spec.validate()?;
    for t in &spec.condition_tags {
        pool_records(records, std::slice::from_ref(t))?;
    }
    let outcomes: Vec<(CellResult, Option<TrainLog>)> = spec
        .cells()
        .into_par_iter()
        .map(|cell| {
            let bench = build_cell(spec, records, cell)?;
            let ppo = if spec.has_ppo() {
                Some(train_cell_ppo(spec, cell, &bench.train)?)
            } else {
                None
            };
            let selections = select_cell(
                spec,
                cell,
                &bench.train,
                ppo.as_ref().map(|p| p.subset.as_slice()),
            )?;
            let result = evaluate_cell(spec, cell, &bench, &selections)?;
            Ok((result, ppo.map(|p| p.log)))
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut logs = Vec::new();
    for (r, log) in outcomes {
        if let Some(l) = log {
            logs.push((r.cell, l));
        }
        cells.push(r);
    }
    let report = assemble_report(spec, &cells)?;
    Ok(BenchmarkRun { report, cells, logs })
}

/// Accuracy-versus-density curves of every method and combination.
pub fn run_noise_sweep(
    spec: &BenchmarkSpec,
    records: &BTreeMap<String, Vec<SignalRecord>>,
) -> Result<Vec<NoiseCurve>> {
    Ok(run_condition_benchmark(spec, records)?.report.noise_curves)
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s).map_err(|e| Error::Schema(format!("selection report: {e}")))?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported report version {}",
                r.format_version
            )));
        }
        Ok(r)
    }

    pub fn cell(&self, combo: usize, method: Method) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.combo == combo && c.method == method)
    }

    pub fn curve(&self, combo: usize, method: Method) -> Option<&NoiseCurve> {
        self.noise_curves
            .iter()
            .find(|c| c.combo == combo && c.method == method)
    }

    pub fn last_combo(&self) -> usize {
        self.condition_tags.len().saturating_sub(1)
    }

    /// Mean macro F-score lost between the single-condition and the full mix.
    pub fn combo_drop(&self, method: Method) -> Option<f64> {
        Some(self.cell(0, method)?.macro_f1_mean - self.cell(self.last_combo(), method)?.macro_f1_mean)
    }

    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let cells = dir.join("cells.csv");
        let mut w = csv::Writer::from_path(&cells)?;
        w.write_record([
            "combo",
            "conditions",
            "method",
            "macro_f1_mean",
            "macro_f1_std",
            "accuracy_mean",
            "subsets",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.combo.to_string(),
                c.conditions.join("+"),
                c.method.to_string(),
                c.macro_f1_mean.to_string(),
                c.macro_f1_std.to_string(),
                c.accuracy_mean.to_string(),
                c.subsets
                    .iter()
                    .map(|s| join_indices(s))
                    .collect::<Vec<_>>()
                    .join("|"),
            ])?;
        }
        w.flush()?;

        let labels = dir.join("per_label.csv");
        let mut w = csv::Writer::from_path(&labels)?;
        w.write_record(["combo", "method", "label", "fscore_mean", "fscore_variance"])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        for r in &self.per_label {
            w.write_record([
                r.combo.to_string(),
                r.method.to_string(),
                r.label.to_string(),
                opt(r.fscore_mean),
                opt(r.fscore_variance),
            ])?;
        }
        w.flush()?;

        let noise = dir.join("noise_curves.csv");
        let mut w = csv::Writer::from_path(&noise)?;
        w.write_record(["combo", "method", "density", "accuracy_mean"])?;
        for c in &self.noise_curves {
            for (d, a) in c.densities.iter().zip(&c.accuracy_mean) {
                w.write_record([
                    c.combo.to_string(),
                    c.method.to_string(),
                    d.to_string(),
                    a.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let margins = dir.join("margins.csv");
        let mut w = csv::Writer::from_path(&margins)?;
        w.write_record(["combo", "best_baseline", "ppo_margin"])?;
        for m in &self.margins {
            w.write_record([
                m.combo.to_string(),
                m.best_baseline.to_string(),
                m.margin.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(vec![cells, labels, noise, margins])
    }
}

pub fn join_indices(s: &[usize]) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Plot-ready stability tables of one training log: per-episode curve,
/// per-slice mean feature counts (partial slice flagged), Jaccard series
/// and the periodic correlation matrices in long form.
pub fn export_stability(log: &TrainLog, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let curve = dir.join("episodes.csv");
    let mut w = csv::Writer::from_path(&curve)?;
    w.write_record(["episode", "reward", "feature_count", "subset"])?;
    for (i, ((r, c), s)) in log
        .episode_rewards
        .iter()
        .zip(&log.feature_counts)
        .zip(&log.final_subsets)
        .enumerate()
    {
        w.write_record([i.to_string(), r.to_string(), c.to_string(), join_indices(s)])?;
    }
    w.flush()?;

    let slices = dir.join("feature_count_slices.csv");
    let mut w = csv::Writer::from_path(&slices)?;
    w.write_record([
        "slice",
        "first_episode",
        "episodes",
        "mean_feature_count",
        "partial",
    ])?;
    let (full, rest) = log.feature_count_slices(SLICE_WIDTH);
    for (i, m) in full.iter().enumerate() {
        w.write_record([
            i.to_string(),
            (i * SLICE_WIDTH).to_string(),
            SLICE_WIDTH.to_string(),
            m.to_string(),
            "false".into(),
        ])?;
    }
    if let Some(m) = rest {
        let first = full.len() * SLICE_WIDTH;
        w.write_record([
            full.len().to_string(),
            first.to_string(),
            (log.feature_counts.len() - first).to_string(),
            m.to_string(),
            "true".into(),
        ])?;
    }
    w.flush()?;

    let jac = dir.join("jaccard.csv");
    let mut w = csv::Writer::from_path(&jac)?;
    w.write_record(["episode", "jaccard_with_previous"])?;
    for (i, j) in log.jaccard.iter().enumerate() {
        w.write_record([(i + 1).to_string(), j.to_string()])?;
    }
    w.flush()?;

    let corr = dir.join("correlation_snapshots.csv");
    let mut w = csv::Writer::from_path(&corr)?;
    w.write_record(["snapshot", "episode", "row_feature", "col_feature", "correlation"])?;
    for (k, s) in log.correlation_snapshots.iter().enumerate() {
        for (a, row) in s.subset.iter().zip(&s.matrix) {
            for (b, v) in s.subset.iter().zip(row) {
                w.write_record([
                    k.to_string(),
                    s.episode.to_string(),
                    a.to_string(),
                    b.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(vec![curve, slices, jac, corr])
}

#[cfg(test)]
mod tests;
