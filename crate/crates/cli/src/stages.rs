//! Stage commands. Each stage reads the manifests of the stages it depends
//! on, writes its artifacts under its own directory and finishes with the
//! effective config and a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use featsel_core::baselines::{Method, SelectionResult};
use featsel_core::dataset::record_seed;
use featsel_core::features::{FeatureMatrix, SplitTag};
use featsel_core::harness::{
    assemble_report, build_cell, evaluate_cell, export_stability, select_cell, train_cell_ppo, CellId,
    CellResult, SelectionReport,
};
use featsel_core::io::{read_feature_csv, read_record_csv, write_feature_csv, write_record_csv};
use featsel_core::ppo::{PolicyCheckpoint, TrainLog};
use featsel_core::rng::derive_seed;
use featsel_core::synth::{synthesize_record, SignalRecord};
use featsel_core::verify::{run_all, OracleCheck};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::{require, write_file, ManifestBuilder};
use crate::summary::render_summary;
use crate::CliError;

pub const RECORDS: &str = "records";
pub const FEATURES: &str = "features";
pub const PPO: &str = "ppo";
pub const SELECTIONS: &str = "selections";
pub const EVALUATION: &str = "evaluation";
pub const REPORT: &str = "report";

pub const REPORT_FILE: &str = "selection_report.json";

/// Decoded policy subset of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetFile {
    pub subset: Vec<usize>,
    /// Distinct subsets the reward oracle scored during training.
    pub evaluations: usize,
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub root: PathBuf,
    pub config_toml: String,
}

impl Ctx {
    pub fn new(cfg: RunConfig, root: PathBuf) -> Result<Self, CliError> {
        let config_toml = cfg.effective_toml()?;
        Ok(Self {
            cfg,
            root,
            config_toml,
        })
    }

    fn manifest(&self, stage: &str) -> ManifestBuilder {
        ManifestBuilder::new(&self.root, stage, self.cfg.master_seed, &self.config_toml)
    }

    fn dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    fn cell_dir(&self, stage: &str, cell: CellId) -> PathBuf {
        self.dir(stage).join(cell.key())
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Compute(e.into()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Compute(featsel_core::Error::Schema(format!("{}: {e}", path.display()))))
}

fn record_path(dir: &Path, tag: &str, pads: u32) -> PathBuf {
    dir.join(format!("{tag}_pads{pads}.csv"))
}

pub fn synth(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let dir = ctx.dir(RECORDS);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let s = &ctx.cfg.synth;
    let jobs: Vec<(usize, u32)> = (0..s.conditions.len())
        .flat_map(|c| s.pad_counts.iter().map(move |&p| (c, p)))
        .collect();
    let written: Vec<(PathBuf, u64)> = jobs
        .par_iter()
        .map(|&(c, pads)| {
            let cond = &s.conditions[c];
            let seed = record_seed(ctx.cfg.master_seed, &cond.tag, pads);
            let rec = synthesize_record(cond, pads, s.duration_s, seed)?;
            let path = record_path(&dir, &cond.tag, pads);
            write_record_csv(&rec, &path)?;
            Ok((path, seed))
        })
        .collect::<Result<_, CliError>>()?;
    let mut m = ctx.manifest("synth");
    for (path, seed) in &written {
        m.artifact(path, Some(*seed))?;
    }
    m.finish(&dir, &ctx.config_toml)
}

/// Records of every configured condition, grouped by tag in pad order.
fn load_records(ctx: &Ctx) -> Result<(PathBuf, BTreeMap<String, Vec<SignalRecord>>), CliError> {
    let (manifest_path, _) = require(&ctx.root, RECORDS, "synth")?;
    let dir = ctx.dir(RECORDS);
    let mut out = BTreeMap::new();
    for tag in &ctx.cfg.eval.condition_tags {
        let recs = ctx
            .cfg
            .synth
            .pad_counts
            .par_iter()
            .map(|&p| {
                let path = record_path(&dir, tag, p);
                if !path.is_file() {
                    return Err(CliError::MissingInput(format!(
                        "records/{tag}_pads{p}.csv (run `featsel synth` first)"
                    )));
                }
                Ok(read_record_csv(&path)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        out.insert(tag.clone(), recs);
    }
    Ok((manifest_path, out))
}

pub fn extract(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let (records_manifest, records) = load_records(ctx)?;
    let spec = ctx.cfg.benchmark_spec();
    let cells = spec.cells();
    let written: Vec<[PathBuf; 2]> = cells
        .par_iter()
        .map(|&cell| {
            let bench = build_cell(&spec, &records, cell)?;
            let dir = ctx.cell_dir(FEATURES, cell);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let (train, test) = (dir.join("train.csv"), dir.join("test.csv"));
            write_feature_csv(&bench.train, &train)?;
            write_feature_csv(&bench.test, &test)?;
            Ok([train, test])
        })
        .collect::<Result<_, CliError>>()?;
    let mut m = ctx.manifest("extract");
    m.input(&records_manifest)?;
    for (cell, paths) in cells.iter().zip(&written) {
        for p in paths {
            m.artifact(p, Some(spec.cell_seed(*cell)))?;
        }
    }
    m.finish(&ctx.dir(FEATURES), &ctx.config_toml)
}

fn load_split(ctx: &Ctx, cell: CellId, split: SplitTag) -> Result<FeatureMatrix, CliError> {
    let name = if split == SplitTag::Train {
        "train.csv"
    } else {
        "test.csv"
    };
    let path = ctx.cell_dir(FEATURES, cell).join(name);
    if !path.is_file() {
        return Err(CliError::MissingInput(format!(
            "features/{}/{name} (run `featsel extract` first)",
            cell.key()
        )));
    }
    Ok(read_feature_csv(&path, split)?)
}

pub fn train_ppo(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let (features_manifest, _) = require(&ctx.root, FEATURES, "extract")?;
    let spec = ctx.cfg.benchmark_spec();
    let cells = if spec.has_ppo() { spec.cells() } else { Vec::new() };
    let written: Vec<[PathBuf; 3]> = cells
        .par_iter()
        .map(|&cell| {
            let train = load_split(ctx, cell, SplitTag::Train)?;
            let out = train_cell_ppo(&spec, cell, &train)?;
            let dir = ctx.cell_dir(PPO, cell);
            let policy = dir.join("policy.json");
            let log = dir.join("train_log.json");
            let subset = dir.join("subset.json");
            write_file(
                &policy,
                PolicyCheckpoint::from_net(&out.net).to_json()?.as_bytes(),
            )?;
            write_file(&log, out.log.to_json()?.as_bytes())?;
            let sf = SubsetFile {
                subset: out.subset,
                evaluations: out.evaluations,
            };
            write_file(&subset, to_json(&sf)?.as_bytes())?;
            Ok([policy, log, subset])
        })
        .collect::<Result<_, CliError>>()?;
    let mut m = ctx.manifest("train-ppo");
    m.input(&features_manifest)?;
    for (cell, paths) in cells.iter().zip(&written) {
        let seed = derive_seed(spec.cell_seed(*cell), "ppo", 0);
        for p in paths {
            m.artifact(p, Some(seed))?;
        }
    }
    let dir = ctx.dir(PPO);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    m.finish(&dir, &ctx.config_toml)
}

fn load_subset(ctx: &Ctx, cell: CellId) -> Result<SubsetFile, CliError> {
    let path = ctx.cell_dir(PPO, cell).join("subset.json");
    if !path.is_file() {
        return Err(CliError::MissingInput(format!(
            "ppo/{}/subset.json (run `featsel train-ppo` first)",
            cell.key()
        )));
    }
    read_json(&path)
}

fn selection_path(ctx: &Ctx, cell: CellId, method: Method) -> PathBuf {
    ctx.cell_dir(SELECTIONS, cell).join(format!("{method}.json"))
}

pub fn select(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let (features_manifest, _) = require(&ctx.root, FEATURES, "extract")?;
    let spec = ctx.cfg.benchmark_spec();
    let ppo_manifest = if spec.has_ppo() {
        Some(require(&ctx.root, PPO, "train-ppo")?.0)
    } else {
        None
    };
    let cells = spec.cells();
    let written: Vec<Vec<PathBuf>> = cells
        .par_iter()
        .map(|&cell| {
            let train = load_split(ctx, cell, SplitTag::Train)?;
            let ppo = if spec.has_ppo() {
                Some(load_subset(ctx, cell)?.subset)
            } else {
                None
            };
            let results = select_cell(&spec, cell, &train, ppo.as_deref())?;
            results
                .iter()
                .map(|r| {
                    let path = selection_path(ctx, cell, r.method);
                    write_file(&path, r.to_json()?.as_bytes())?;
                    Ok(path)
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;
    let mut m = ctx.manifest("select");
    m.input(&features_manifest)?;
    if let Some(p) = &ppo_manifest {
        m.input(p)?;
    }
    for (cell, paths) in cells.iter().zip(&written) {
        for p in paths {
            m.artifact(p, Some(spec.cell_seed(*cell)))?;
        }
    }
    let dir = ctx.dir(SELECTIONS);
    m.finish(&dir, &ctx.config_toml)
}

pub fn evaluate(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let (selections_manifest, _) = require(&ctx.root, SELECTIONS, "select")?;
    let (features_manifest, _) = require(&ctx.root, FEATURES, "extract")?;
    let (records_manifest, records) = load_records(ctx)?;
    let spec = ctx.cfg.benchmark_spec();
    let results: Vec<CellResult> = spec
        .cells()
        .par_iter()
        .map(|&cell| {
            let bench = build_cell(&spec, &records, cell)?;
            if load_split(ctx, cell, SplitTag::Train)? != bench.train
                || load_split(ctx, cell, SplitTag::Test)? != bench.test
            {
                return Err(CliError::Compute(featsel_core::Error::Schema(format!(
                    "features/{} do not match the records; rerun `featsel extract`",
                    cell.key()
                ))));
            }
            let selections = spec
                .methods
                .iter()
                .map(|&m| {
                    let path = selection_path(ctx, cell, m);
                    if !path.is_file() {
                        return Err(CliError::MissingInput(format!(
                            "selections/{}/{m}.json (run `featsel select` first)",
                            cell.key()
                        )));
                    }
                    read_json::<SelectionResult>(&path)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(evaluate_cell(&spec, cell, &bench, &selections)?)
        })
        .collect::<Result<_, CliError>>()?;
    let report = assemble_report(&spec, &results)?;
    let dir = ctx.dir(EVALUATION);
    let report_path = dir.join(REPORT_FILE);
    write_file(&report_path, report.to_json()?.as_bytes())?;
    let cells_path = dir.join("cell_results.json");
    write_file(&cells_path, to_json(&results)?.as_bytes())?;
    let csvs = report.write_csv(&dir)?;
    let mut m = ctx.manifest("evaluate");
    for p in [&records_manifest, &features_manifest, &selections_manifest] {
        m.input(p)?;
    }
    for p in [&report_path, &cells_path].into_iter().chain(&csvs) {
        m.artifact(p, None)?;
    }
    m.finish(&dir, &ctx.config_toml)
}

pub fn report(ctx: &Ctx) -> Result<(PathBuf, String), CliError> {
    let (evaluation_manifest, _) = require(&ctx.root, EVALUATION, "evaluate")?;
    let report = SelectionReport::from_json(
        &std::fs::read_to_string(ctx.dir(EVALUATION).join(REPORT_FILE))
            .map_err(|e| CliError::io(&ctx.dir(EVALUATION).join(REPORT_FILE), e))?,
    )?;
    let spec = ctx.cfg.benchmark_spec();
    let dir = ctx.dir(REPORT);
    let mut m = ctx.manifest("report");
    m.input(&evaluation_manifest)?;
    let mut artifacts = report.write_csv(&dir)?;
    if spec.has_ppo() {
        let (ppo_manifest, _) = require(&ctx.root, PPO, "train-ppo")?;
        m.input(&ppo_manifest)?;
        for cell in spec.cells() {
            let log: TrainLog = read_json(&ctx.cell_dir(PPO, cell).join("train_log.json"))?;
            artifacts.extend(export_stability(&log, &dir.join("stability").join(cell.key()))?);
        }
    }
    let summary = render_summary(&report);
    let summary_path = dir.join("summary.txt");
    write_file(&summary_path, summary.as_bytes())?;
    artifacts.push(summary_path);
    for p in &artifacts {
        m.artifact(p, None)?;
    }
    Ok((m.finish(&dir, &ctx.config_toml)?, summary))
}

/// Oracle suite, plus a schema check of `checkpoint` when given.
pub fn verify(ctx: &Ctx, checkpoint: Option<&Path>) -> Result<Vec<OracleCheck>, CliError> {
    if let Some(p) = checkpoint {
        if !p.is_file() {
            return Err(CliError::MissingInput(p.display().to_string()));
        }
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        PolicyCheckpoint::from_json(&text)?;
    }
    Ok(run_all(ctx.cfg.master_seed))
}
