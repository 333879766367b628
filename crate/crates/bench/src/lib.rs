//! Shared fixtures for the criterion benches.

use featsel_core::dataset::{sample_rate, synthesize_records, Benchmark, DatasetConfig};
use featsel_core::dsp::Segment;
use featsel_core::synth::canonical_conditions;

pub const SEED: u64 = 17;

/// Four-condition benchmark built from `duration_s`-second records.
pub fn benchmark(duration_s: f64) -> Benchmark {
    let cfg = DatasetConfig {
        duration_s,
        ..DatasetConfig::default()
    };
    let records = synthesize_records(&canonical_conditions(), &cfg, SEED).expect("records");
    Benchmark::build(records, &cfg.dsp, cfg.train_frac, SEED).expect("benchmark")
}

/// Every windowed training and test segment of `b`.
pub fn segments(b: &Benchmark) -> Vec<Segment> {
    let fs = sample_rate(&b.records).expect("sample rate");
    b.records
        .iter()
        .flat_map(|r| featsel_core::dsp::preprocess_record(r, fs, &b.dsp).expect("segments"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_nonempty() {
        let b = benchmark(4.0);
        assert!(b.train.n_rows() > 0 && b.test.n_rows() > 0);
        assert!(!segments(&b).is_empty());
    }
}
