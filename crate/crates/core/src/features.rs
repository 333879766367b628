//! The 23-dimensional feature vector: 17 time/frequency features of a
//! segment followed by 6 synthetic noise features, plus matrix assembly,
//! stratified splitting and Pearson correlation.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::Segment;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_rng, rng_from};
use crate::synth::AdhesionLabel;

pub const N_FEATURES: usize = 23;
pub const N_REAL_FEATURES: usize = 17;
/// Indices (0-based) of the synthetic noise features.
pub const NOISE_FEATURES: std::ops::Range<usize> = 17..23;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean",
    "std",
    "max",
    "min",
    "norm",
    "energy",
    "kurtosis",
    "skewness",
    "mean_abs",
    "autocorr_lag1",
    "autocorr_lag2",
    "autocorr_lag3",
    "mean_power_freq",
    "median_freq",
    "total_power",
    "max_psd",
    "zero_crossing_rate",
    "random_noise_1",
    "random_noise_2",
    "perturbation_noise_1",
    "perturbation_noise_2",
    "temporal_noise_1",
    "temporal_noise_2",
];

pub const MEAN_POWER_FREQ: usize = 12;
pub const MEDIAN_FREQ: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    TimeDomain,
    FrequencyDomain,
    SyntheticNoise,
}

/// Catalogue category of each feature. Zero-crossing rate is catalogued as a
/// frequency-domain feature although it is computed on the time series.
pub fn feature_category(index: usize) -> FeatureCategory {
    match index {
        0..=11 => FeatureCategory::TimeDomain,
        12..=16 => FeatureCategory::FrequencyDomain,
        _ => FeatureCategory::SyntheticNoise,
    }
}

pub fn is_noise_feature(index: usize) -> bool {
    NOISE_FEATURES.contains(&index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: AdhesionLabel,
    pub condition_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub feature_names: Vec<String>,
    pub split: SplitTag,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    pub fn labels(&self) -> Vec<AdhesionLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn select_rows(&self, idx: &[usize], split: SplitTag) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            split,
        }
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.rows {
            c[r.label.index()] += 1;
        }
        c
    }
}

/// Computes feature vectors; holds the FFT plan for the window length.
#[derive(Clone)]
pub struct FeatureExtractor {
    fs: f64,
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("fs", &self.fs)
            .field("len", &self.len)
            .finish()
    }
}

/// One-sided power spectrum, `P_k = |X_k|² / n²` with interior bins doubled,
/// so that the bins sum to the mean square of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(fs: f64, len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fs, len, fft }
    }

    pub fn power_spectrum(&self, x: &[f64]) -> PowerSpectrum {
        assert_eq!(x.len(), self.len, "window length does not match the FFT plan");
        let n = x.len();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        let nn = (n * n) as f64;
        let half = n / 2;
        let mut freqs = Vec::with_capacity(half + 1);
        let mut power = Vec::with_capacity(half + 1);
        for (k, c) in buf.iter().enumerate().take(half + 1) {
            let mut p = c.norm_sqr() / nn;
            let is_nyquist = n.is_multiple_of(2) && k == half;
            if k != 0 && !is_nyquist {
                p *= 2.0;
            }
            freqs.push(k as f64 * self.fs / n as f64);
            power.push(p);
        }
        PowerSpectrum { freqs, power }
    }

    pub fn extract(&self, seg: &Segment, seed: u64) -> FeatureVector {
        FeatureVector {
            values: self.extract_values(&seg.samples, seed),
            label: seg.label,
            condition_tag: seg.condition_tag.clone(),
        }
    }

    pub fn extract_values(&self, x: &[f64], seed: u64) -> Vec<f64> {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = m2.sqrt();
        let degenerate = std < 1e-12;
        let (kurtosis, skewness) = if degenerate {
            (0.0, 0.0)
        } else {
            let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            (m4 / (m2 * m2) - 3.0, m3 / m2.powf(1.5))
        };
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let energy = x.iter().map(|v| v * v).sum::<f64>();
        let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / n;

        let spec = self.power_spectrum(x);
        let (mpf, mdf, total, peak) = spectral_summary(&spec);

        let mut out = Vec::with_capacity(N_FEATURES);
        out.extend([
            mean,
            std,
            max,
            min,
            energy.sqrt(),
            energy,
            kurtosis,
            skewness,
            mean_abs,
        ]);
        out.extend((1..=3).map(|lag| autocorrelation(x, lag)));
        out.extend([mpf, mdf, total, peak, zero_crossing_rate(x)]);

        let mut rng = rng_from(seed);
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
        let perturb = 0.5 * std + 1e-6;
        let (r1, r2) = (gauss(), gauss());
        let (p1, p2) = (mean + perturb * gauss(), std + perturb * gauss());
        out.extend([r1, r2, p1, p2]);
        let mut shuffled = x.to_vec();
        shuffled.shuffle(&mut derived_rng(seed, "temporal-noise", 0));
        out.push(autocorrelation(&shuffled, 1));
        out.push(autocorrelation(&shuffled, 2));
        debug_assert!(out.iter().all(|v| v.is_finite()));
        out
    }
}

/// Mean power frequency, median frequency, total power and peak bin power,
/// all excluding DC.
fn spectral_summary(spec: &PowerSpectrum) -> (f64, f64, f64, f64) {
    let bins = spec.freqs.iter().zip(&spec.power).skip(1);
    let total: f64 = spec.power.iter().skip(1).sum();
    let peak = spec.power.iter().skip(1).copied().fold(0.0, f64::max);
    if total <= 0.0 {
        return (0.0, 0.0, 0.0, peak);
    }
    let mpf = bins.clone().map(|(f, p)| f * p).sum::<f64>() / total;
    let mut cum = 0.0;
    let mut median = *spec.freqs.last().unwrap_or(&0.0);
    for (f, p) in bins {
        cum += p;
        if cum >= total / 2.0 {
            median = *f;
            break;
        }
    }
    (mpf, median, total, peak)
}

/// `Σ(x_i − x̄)(x_{i+lag} − x̄) / Σ(x_i − x̄)²`, 0 for a constant window.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if den < 1e-24 * n as f64 {
        return 0.0;
    }
    let num: f64 = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
    num / den
}

/// Sign changes of the mean-removed window over `n − 1` transitions.
pub fn zero_crossing_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let spread = centered.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if spread < 1e-12 {
        return 0.0;
    }
    let crossings = centered
        .windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
        .count();
    crossings as f64 / (x.len() - 1) as f64
}

pub fn extract_features(seg: &Segment, fs: f64, seed: u64) -> FeatureVector {
    FeatureExtractor::new(fs, seg.samples.len()).extract(seg, seed)
}

/// Extract every segment in parallel; segment `i` uses a seed derived from
/// `(seed, i)` so the result does not depend on the thread count.
pub fn extract_all(segments: &[Segment], fs: f64, seed: u64) -> Vec<FeatureVector> {
    let Some(first) = segments.first() else {
        return Vec::new();
    };
    let fx = FeatureExtractor::new(fs, first.samples.len());
    segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| fx.extract(s, derive_seed(seed, "segment-features", i as u64)))
        .collect()
}

pub fn assemble_matrix(vectors: Vec<FeatureVector>) -> Result<FeatureMatrix> {
    if vectors.is_empty() {
        return Err(Error::Schema("cannot assemble an empty feature matrix".into()));
    }
    if let Some((i, v)) = vectors
        .iter()
        .enumerate()
        .find(|(_, v)| v.values.len() != N_FEATURES)
    {
        return Err(Error::Schema(format!(
            "row {i} has {} values, expected {N_FEATURES}",
            v.values.len()
        )));
    }
    Ok(FeatureMatrix {
        rows: vectors,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        split: SplitTag::Unsplit,
    })
}

/// Stratified seeded split of row indices; each present label contributes
/// `round(frac · n_label)` rows to the first partition, clamped so both
/// partitions keep at least one row of it.
pub fn stratified_split_indices(
    labels: &[AdhesionLabel],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_frac} must lie in (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in AdhesionLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        match idx.len() {
            0 => continue,
            1 => {
                return Err(Error::Stratification {
                    label: label.to_string(),
                    count: 1,
                })
            }
            n => {
                idx.shuffle(&mut derived_rng(seed, "stratified-split", label.index() as u64));
                let k = ((train_frac * n as f64).round() as usize).clamp(1, n - 1);
                train.extend_from_slice(&idx[..k]);
                test.extend_from_slice(&idx[k..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(
    mat: &FeatureMatrix,
    train_frac: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (tr, te) = stratified_split_indices(&mat.labels(), train_frac, seed)?;
    Ok((
        mat.select_rows(&tr, SplitTag::Train),
        mat.select_rows(&te, SplitTag::Test),
    ))
}

pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Schema(format!(
            "column lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Schema("correlation needs at least 2 samples".into()));
    }
    Ok(pearson_unchecked(x, y))
}

pub(crate) fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let scale_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let scale_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if sxx <= 1e-24 * n * scale_x * scale_x || syy <= 1e-24 * n * scale_y * scale_y {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Full 23×23 Pearson matrix of a feature matrix's columns.
pub fn correlation_matrix(mat: &FeatureMatrix) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..mat.n_features()).map(|j| mat.column(j)).collect();
    let d = cols.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        out[i][i] = 1.0;
        for j in i + 1..d {
            let r = pearson_unchecked(&cols[i], &cols[j]);
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(samples: Vec<f64>) -> Segment {
        Segment {
            samples,
            label: AdhesionLabel::Safe,
            condition_tag: "t".into(),
            origin_index: 0,
        }
    }

    /// Direct O(n²) DFT, independent of the FFT path.
    fn naive_power(x: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut f = Vec::new();
        let mut p = Vec::new();
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -std::f64::consts::TAU * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            let mut pk = (re * re + im * im) / (n * n) as f64;
            if k != 0 && k != n / 2 {
                pk *= 2.0;
            }
            f.push(k as f64 * fs / n as f64);
            p.push(pk);
        }
        (f, p)
    }

    #[test]
    fn constant_segment_conventions() {
        let v = extract_features(&seg(vec![2.0; 32]), 100.0, 1).values;
        assert_eq!(v[0], 2.0);
        assert_eq!(v[1], 0.0);
        assert_eq!((v[2], v[3]), (2.0, 2.0));
        assert!((v[4] - 2.0 * 32f64.sqrt()).abs() < 1e-12);
        assert_eq!(v[5], 128.0);
        assert_eq!((v[6], v[7]), (0.0, 0.0));
        assert_eq!(v[8], 2.0);
        assert_eq!(&v[9..12], &[0.0, 0.0, 0.0]);
        assert_eq!(v[16], 0.0);
        assert_eq!(v.len(), N_FEATURES);
    }

    #[test]
    fn alternating_segment() {
        let x: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let v = extract_features(&seg(x), 100.0, 1).values;
        assert_eq!(v[0], 0.0);
        assert_eq!(v[5], 32.0);
        assert_eq!(v[8], 1.0);
        assert_eq!(v[16], 1.0);
        // Σ_{i<31} x_i x_{i+1} / Σ x_i² = -31 / 32
        assert!((v[9] + 31.0 / 32.0).abs() < 1e-15);
        assert!((v[10] - 30.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_spectral_features_match_naive_dft() {
        let x: Vec<f64> = (0..32)
            .map(|i| (std::f64::consts::TAU * 25.0 * i as f64 / 100.0).sin())
            .collect();
        let v = extract_features(&seg(x.clone()), 100.0, 1).values;
        let (f, p) = naive_power(&x, 100.0);
        let total: f64 = p[1..].iter().sum();
        let mpf: f64 = f.iter().zip(&p).skip(1).map(|(a, b)| a * b).sum::<f64>() / total;
        assert_eq!(v[MEDIAN_FREQ], 25.0);
        assert!((v[MEAN_POWER_FREQ] - mpf).abs() < 1e-9);
        assert!((v[MEAN_POWER_FREQ] - 25.0).abs() < 3.125);
        assert!((v[14] - total).abs() < 1e-12);
    }

    #[test]
    fn assemble_rules() {
        let fv = extract_features(&seg(vec![1.0; 32]), 100.0, 3);
        let m = assemble_matrix(vec![fv.clone(), fv.clone(), fv.clone()]).unwrap();
        assert_eq!((m.n_rows(), m.n_features()), (3, 23));
        assert_eq!(m.rows[0], m.rows[2]);
        assert_eq!(m.feature_names[16], "zero_crossing_rate");
        assert!(matches!(assemble_matrix(vec![]), Err(Error::Schema(_))));
        let short = FeatureVector {
            values: vec![0.0; 5],
            ..fv
        };
        assert!(matches!(assemble_matrix(vec![short]), Err(Error::Schema(_))));
    }

    fn toy_matrix(per_label: usize) -> FeatureMatrix {
        let rows = (0..3 * per_label)
            .map(|i| FeatureVector {
                values: vec![i as f64; N_FEATURES],
                label: AdhesionLabel::from_index(i % 3).unwrap(),
                condition_tag: "t".into(),
            })
            .collect();
        assemble_matrix(rows).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut m = toy_matrix(34);
        m.rows.truncate(100);
        let (tr, te) = split_train_test(&m, 0.7, 5).unwrap();
        assert!((tr.n_rows() as i64 - 70).abs() <= 2, "{}", tr.n_rows());
        assert_eq!(tr.n_rows() + te.n_rows(), 100);
        assert_eq!((tr.split, te.split), (SplitTag::Train, SplitTag::Test));
        let (tr2, _) = split_train_test(&m, 0.7, 5).unwrap();
        assert_eq!(tr, tr2);
        assert!(matches!(split_train_test(&m, 1.0, 5), Err(Error::Config(_))));
        let lonely = m.select_rows(&[0, 1, 2, 3, 4], SplitTag::Unsplit);
        assert!(matches!(
            split_train_test(&lonely, 0.7, 5),
            Err(Error::Stratification { .. })
        ));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson_corr(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_corr(&x, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        // cov = 1/3·(1·(-1)·... ) hand-computed: r = 0.5
        assert!((pearson_corr(&x, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(pearson_corr(&x, &[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(pearson_corr(&x, &[1.0]), Err(Error::Schema(_))));
    }

    #[test]
    fn noise_dimensions_are_standard_normal() {
        let fx = FeatureExtractor::new(100.0, 32);
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin()).collect();
        let n = 10_000;
        let (mut s, mut ss) = ([0.0; 2], [0.0; 2]);
        for i in 0..n {
            let v = fx.extract_values(&x, derive_seed(99, "t", i));
            for d in 0..2 {
                s[d] += v[17 + d];
                ss[d] += v[17 + d] * v[17 + d];
            }
        }
        for d in 0..2 {
            let mean = s[d] / n as f64;
            let std = (ss[d] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((std - 1.0).abs() < 0.05, "std {std}");
        }
    }

    #[test]
    fn extraction_is_seed_deterministic() {
        let x: Vec<f64> = (0..32).map(|i| (i as f64).cos()).collect();
        let a = extract_features(&seg(x.clone()), 100.0, 4);
        assert_eq!(a, extract_features(&seg(x.clone()), 100.0, 4));
        assert_ne!(a, extract_features(&seg(x), 100.0, 5));
    }

    proptest! {
        #[test]
        fn pearson_bounded(x in proptest::collection::vec(-1e6f64..1e6, 2..50), seed in 0u64..100) {
            let mut rng = rng_from(seed);
            let mut y = x.clone();
            y.shuffle(&mut rng);
            let r = pearson_corr(&x, &y).unwrap();
            prop_assert!(r.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn energy_is_norm_squared_and_parseval_holds(x in proptest::collection::vec(-50.0f64..50.0, 32)) {
            let fx = FeatureExtractor::new(100.0, 32);
            let v = fx.extract_values(&x, 0);
            prop_assert!((v[4] * v[4] - v[5]).abs() <= 1e-9 * v[5].max(1e-300));
            let spec = fx.power_spectrum(&x);
            let lhs = v[14] + spec.power[0];
            let rhs = x.iter().map(|a| a * a).sum::<f64>() / 32.0;
            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.max(1e-300));
            let (_, naive) = naive_power(&x, 100.0);
            for (a, b) in spec.power.iter().zip(&naive) {
                prop_assert!((a - b).abs() <= 1e-9 * rhs.max(1.0));
            }
        }

        #[test]
        fn all_features_finite(x in proptest::collection::vec(-1e3f64..1e3, 32), seed in 0u64..1000) {
            let v = FeatureExtractor::new(100.0, 32).extract_values(&x, seed);
            prop_assert!(v.iter().all(|a| a.is_finite()));
        }
    }
}
