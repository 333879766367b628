//! Benchmark assembly: synthesize one record per (condition, pad count),
//! window it, split the segments, normalize with training statistics and
//! extract features. Test segments stay addressable so they can be
//! re-extracted from corrupted copies of their source records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{preprocess_record, DspConfig, Segment, ZScore};
use crate::error::{Error, Result};
use crate::features::{assemble_matrix, stratified_split_indices, FeatureExtractor, FeatureMatrix, SplitTag};
use crate::rng::derive_seed;
use crate::synth::{inject_salt_pepper, synthesize_record, ConditionSpec, SignalRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Length of each (condition, pad count) record in seconds.
    pub duration_s: f64,
    pub pad_counts: Vec<u32>,
    pub train_frac: f64,
    pub dsp: DspConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            pad_counts: vec![6, 5, 4],
            train_frac: 0.7,
            dsp: DspConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::OutOfRange {
                what: "duration_s",
                value: self.duration_s.to_string(),
                allowed: "> 0",
            });
        }
        if self.pad_counts.is_empty() {
            return Err(Error::Config("pad_counts must not be empty".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::OutOfRange {
                what: "train_frac",
                value: self.train_frac.to_string(),
                allowed: "(0, 1)",
            });
        }
        Ok(())
    }
}

/// Seed of the record for `(tag, pads)`; independent of which other
/// conditions are pooled with it.
pub fn record_seed(master: u64, tag: &str, pads: u32) -> u64 {
    derive_seed(master, &format!("record/{tag}"), u64::from(pads))
}

/// One record per (condition, pad count), in condition-major order.
pub fn synthesize_records(
    conditions: &[ConditionSpec],
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    cfg.validate()?;
    let jobs: Vec<(&ConditionSpec, u32)> = conditions
        .iter()
        .flat_map(|c| cfg.pad_counts.iter().map(move |&p| (c, p)))
        .collect();
    jobs.par_iter()
        .map(|(c, p)| synthesize_record(c, *p, cfg.duration_s, record_seed(seed, &c.tag, *p)))
        .collect()
}

/// Position of a segment: source record and first sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentId {
    pub record: usize,
    pub origin: usize,
    /// Index in the pooled segment list; keys the feature seed.
    pub pooled: usize,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub records: Vec<SignalRecord>,
    pub dsp: DspConfig,
    pub zscore: ZScore,
    pub train_ids: Vec<SegmentId>,
    pub test_ids: Vec<SegmentId>,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub feature_seed: u64,
}

fn segment_records(records: &[SignalRecord], fs: f64, dsp: &DspConfig) -> Result<Vec<Vec<Segment>>> {
    records
        .par_iter()
        .map(|r| preprocess_record(r, fs, dsp))
        .collect()
}

/// Sampling rate implied by the first record's time axis.
pub fn sample_rate(records: &[SignalRecord]) -> Result<f64> {
    let r = records
        .first()
        .ok_or_else(|| Error::Schema("no records".into()))?;
    if r.t.len() < 2 {
        return Err(Error::Schema("record shorter than two samples".into()));
    }
    Ok(1.0 / (r.t[1] - r.t[0]))
}

impl Benchmark {
    /// Split the pooled segments of `records`, fit the normalization on the
    /// training samples and extract both partitions.
    pub fn build(records: Vec<SignalRecord>, dsp: &DspConfig, train_frac: f64, seed: u64) -> Result<Self> {
        let fs = sample_rate(&records)?;
        dsp.validate(fs)?;
        let per_record = segment_records(&records, fs, dsp)?;
        let mut ids = Vec::new();
        let mut segments = Vec::new();
        for (r, segs) in per_record.into_iter().enumerate() {
            for s in segs {
                ids.push(SegmentId {
                    record: r,
                    origin: s.origin_index,
                    pooled: segments.len(),
                });
                segments.push(s);
            }
        }
        let labels: Vec<_> = segments.iter().map(|s| s.label).collect();
        let (tr, te) = stratified_split_indices(&labels, train_frac, derive_seed(seed, "split", 0))?;
        let train_samples: Vec<f64> = tr
            .iter()
            .flat_map(|&i| segments[i].samples.iter().copied())
            .collect();
        let zscore = ZScore::fit(&train_samples)?;
        let feature_seed = derive_seed(seed, "features", 0);
        let fx = FeatureExtractor::new(fs, dsp.window);
        let extract = |idx: &[usize], split: SplitTag| -> Result<FeatureMatrix> {
            let rows = idx
                .par_iter()
                .map(|&i| {
                    let mut s = segments[i].clone();
                    zscore.apply_slice(&mut s.samples);
                    fx.extract(&s, derive_seed(feature_seed, "segment", ids[i].pooled as u64))
                })
                .collect();
            let mut m = assemble_matrix(rows)?;
            m.split = split;
            Ok(m)
        };
        let train = extract(&tr, SplitTag::Train)?;
        let test = extract(&te, SplitTag::Test)?;
        Ok(Self {
            train_ids: tr.iter().map(|&i| ids[i]).collect(),
            test_ids: te.iter().map(|&i| ids[i]).collect(),
            records,
            dsp: *dsp,
            zscore,
            train,
            test,
            feature_seed,
        })
    }

    /// Test features re-extracted after corrupting every source record with
    /// salt-and-pepper noise. Density 0 reproduces `self.test` exactly.
    pub fn corrupted_test(&self, density: f64, corruption_seed: u64) -> Result<FeatureMatrix> {
        let fs = sample_rate(&self.records)?;
        let corrupted: Vec<SignalRecord> = self
            .records
            .par_iter()
            .enumerate()
            .map(|(r, rec)| {
                inject_salt_pepper(rec, density, derive_seed(corruption_seed, "record", r as u64))
            })
            .collect::<Result<_>>()?;
        let per_record = segment_records(&corrupted, fs, &self.dsp)?;
        let fx = FeatureExtractor::new(fs, self.dsp.window);
        let rows = self
            .test_ids
            .par_iter()
            .map(|id| {
                let seg = per_record[id.record]
                    .iter()
                    .find(|s| s.origin_index == id.origin)
                    .ok_or_else(|| {
                        Error::Schema(format!(
                            "segment at {} of record {} vanished after corruption",
                            id.origin, id.record
                        ))
                    })?;
                let mut s = seg.clone();
                self.zscore.apply_slice(&mut s.samples);
                Ok(fx.extract(&s, derive_seed(self.feature_seed, "segment", id.pooled as u64)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = assemble_matrix(rows)?;
        m.split = SplitTag::Test;
        Ok(m)
    }
}
