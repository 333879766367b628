//! Run configuration: one TOML document with namespaced tables. Dotted keys
//! (`ppo.clip = 0.1`) and `[ppo]` sections are equivalent. Unknown keys are
//! rejected and every default is materialized in the effective config.

use std::path::{Path, PathBuf};

use featsel_core::baselines::Method;
use featsel_core::dataset::DatasetConfig;
use featsel_core::dsp::DspConfig;
use featsel_core::env::EnvConfig;
use featsel_core::harness::{BaselineConfig, BenchmarkSpec};
use featsel_core::ppo::{DecodeMode, PpoConfig};
use featsel_core::synth::{canonical_conditions, ConditionSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "FEATSEL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub duration_s: f64,
    pub pad_counts: Vec<u32>,
    pub conditions: Vec<ConditionSpec>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            duration_s: d.duration_s,
            pad_counts: d.pad_counts,
            conditions: canonical_conditions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub train_frac: f64,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            train_frac: DatasetConfig::default().train_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub condition_tags: Vec<String>,
    pub methods: Vec<Method>,
    pub noise_densities: Vec<f64>,
    pub repetitions: usize,
    pub eval_trees: usize,
    pub decode: DecodeMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        let s = BenchmarkSpec::default();
        Self {
            condition_tags: s.condition_tags,
            methods: s.methods,
            noise_densities: s.noise_densities,
            repetitions: s.repetitions,
            eval_trees: s.eval_trees,
            decode: s.decode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormatSection {
    pub record_csv: u32,
    pub feature_csv: u32,
    pub checkpoint: u32,
    pub report: u32,
    pub manifest: u32,
}

impl Default for FormatSection {
    fn default() -> Self {
        Self {
            record_csv: 1,
            feature_csv: 1,
            checkpoint: featsel_core::ppo::CHECKPOINT_FORMAT_VERSION,
            report: featsel_core::harness::REPORT_FORMAT_VERSION,
            manifest: crate::manifest::MANIFEST_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Artifact root; `--out` takes precedence. Not part of the effective
    /// config, which must not depend on where it is written.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Worker threads, 0 for one per core; `--jobs` takes precedence.
    /// Artifacts do not depend on it, so it is not written either.
    #[serde(skip_serializing)]
    pub jobs: usize,
    pub format: FormatSection,
    pub synth: SynthSection,
    pub dsp: DspConfig,
    pub features: FeaturesSection,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("featsel-out"),
            jobs: 0,
            format: FormatSection::default(),
            synth: SynthSection::default(),
            dsp: DspConfig::default(),
            features: FeaturesSection::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            baselines: BaselineConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Read `path` (or defaults), apply the seed override and validate.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.master_seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV} = {v:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let defaults = FormatSection::default();
        if self.format != defaults {
            return Err(CliError::Config(format!(
                "format versions {:?} are not supported; this build writes {:?}",
                self.format, defaults
            )));
        }
        let mut tags: Vec<&str> = self.synth.conditions.iter().map(|c| c.tag.as_str()).collect();
        tags.sort_unstable();
        if tags.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("synth.conditions has duplicate tags".into()));
        }
        for c in &self.synth.conditions {
            c.validate().map_err(CliError::config)?;
            self.dsp.validate(c.fs).map_err(CliError::config)?;
        }
        for t in &self.eval.condition_tags {
            if !tags.contains(&t.as_str()) {
                return Err(CliError::Config(format!(
                    "eval.condition_tags names `{t}`, which is not in synth.conditions"
                )));
            }
        }
        self.benchmark_spec().validate().map_err(CliError::config)
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            duration_s: self.synth.duration_s,
            pad_counts: self.synth.pad_counts.clone(),
            train_frac: self.features.train_frac,
            dsp: self.dsp,
        }
    }

    pub fn benchmark_spec(&self) -> BenchmarkSpec {
        BenchmarkSpec {
            condition_tags: self.eval.condition_tags.clone(),
            methods: self.eval.methods.clone(),
            noise_densities: self.eval.noise_densities.clone(),
            repetitions: self.eval.repetitions,
            seed: self.master_seed,
            eval_trees: self.eval.eval_trees,
            decode: self.eval.decode,
            dataset: self.dataset(),
            env: self.env.clone(),
            ppo: self.ppo.clone(),
            baselines: self.baselines.clone(),
        }
    }

    /// Every setting that determines the artifacts, defaults included.
    pub fn effective_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}
