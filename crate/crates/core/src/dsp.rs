//! Preprocessing: magnitude channel, low-pass filtering, z-score
//! normalization and fixed-size windowing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{AdhesionLabel, SignalRecord};

pub const SEGMENT_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarStream {
    pub values: Vec<f64>,
    pub fs: f64,
    pub labels: Vec<AdhesionLabel>,
    pub condition_tag: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub label: AdhesionLabel,
    pub condition_tag: String,
    /// Index of the first sample in the source stream.
    pub origin_index: usize,
}

/// Affine normalization parameters, estimated on training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: f64,
    pub std: f64,
}

impl ZScore {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::OutOfRange {
                what: "stream length",
                value: values.len().to_string(),
                allowed: ">= 2",
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std >= 1e-12) {
            return Err(Error::DegenerateStream { std });
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_slice(&self, values: &mut [f64]) {
        values.iter_mut().for_each(|v| *v = self.apply(*v));
    }
}

pub fn magnitude_channel(rec: &SignalRecord) -> Result<ScalarStream> {
    if rec.is_empty() {
        return Err(Error::Schema("empty record".into()));
    }
    rec.validate()?;
    let values = rec
        .ax
        .iter()
        .zip(&rec.ay)
        .zip(&rec.az)
        .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
        .collect();
    Ok(ScalarStream {
        values,
        fs: rec.t.get(1).map_or(100.0, |t1| 1.0 / (t1 - rec.t[0])),
        labels: rec.label.clone(),
        condition_tag: rec.condition_tag.clone(),
    })
}

impl ScalarStream {
    pub fn from_record(rec: &SignalRecord, fs: f64) -> Result<Self> {
        Ok(Self {
            fs,
            ..magnitude_channel(rec)?
        })
    }
}

/// Single-pole recursive low-pass with unit DC gain, seeded with the first
/// sample.
pub fn lowpass(stream: &ScalarStream, cutoff_hz: f64) -> Result<ScalarStream> {
    if !(cutoff_hz > 0.0 && cutoff_hz < stream.fs / 2.0) {
        return Err(Error::Config(format!(
            "lowpass cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            stream.fs / 2.0
        )));
    }
    let beta = 1.0 - (-std::f64::consts::TAU * cutoff_hz / stream.fs).exp();
    let mut out = Vec::with_capacity(stream.values.len());
    let mut y = match stream.values.first() {
        Some(&x0) => x0,
        None => 0.0,
    };
    for &x in &stream.values {
        y += beta * (x - y);
        out.push(y);
    }
    Ok(ScalarStream {
        values: out,
        ..stream.clone()
    })
}

/// Subtract the stream mean (drift removal).
pub fn remove_mean(stream: &ScalarStream) -> ScalarStream {
    let n = stream.values.len().max(1) as f64;
    let mean = stream.values.iter().sum::<f64>() / n;
    ScalarStream {
        values: stream.values.iter().map(|v| v - mean).collect(),
        ..stream.clone()
    }
}

pub fn zscore_normalize(stream: &ScalarStream) -> Result<(ScalarStream, ZScore)> {
    let z = ZScore::fit(&stream.values)?;
    let mut values = stream.values.clone();
    z.apply_slice(&mut values);
    Ok((
        ScalarStream {
            values,
            ..stream.clone()
        },
        z,
    ))
}

/// Non-overlapping windows of `size`; windows spanning a label change and the
/// trailing remainder are dropped.
pub fn window_segments(stream: &ScalarStream, size: usize) -> Vec<Segment> {
    if size == 0 {
        return Vec::new();
    }
    stream
        .values
        .chunks_exact(size)
        .zip(stream.labels.chunks_exact(size))
        .enumerate()
        .filter(|(_, (_, labels))| labels.iter().all(|&l| l == labels[0]))
        .map(|(i, (samples, labels))| Segment {
            samples: samples.to_vec(),
            label: labels[0],
            condition_tag: stream.condition_tag.clone(),
            origin_index: i * size,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub lowpass_hz: f64,
    pub lowpass_enabled: bool,
    pub remove_mean: bool,
    pub window: usize,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            lowpass_hz: 20.0,
            lowpass_enabled: true,
            remove_mean: false,
            window: SEGMENT_LEN,
        }
    }
}

impl DspConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.lowpass_enabled && !(self.lowpass_hz > 0.0 && self.lowpass_hz < fs / 2.0) {
            return Err(Error::Config(format!(
                "dsp.lowpass_hz = {} must lie in (0, {})",
                self.lowpass_hz,
                fs / 2.0
            )));
        }
        if self.window < 2 {
            return Err(Error::Config("dsp.window must be >= 2".into()));
        }
        Ok(())
    }
}

/// Magnitude, optional filtering and drift removal, then windowing. The
/// returned segments are not yet normalized.
pub fn preprocess_record(rec: &SignalRecord, fs: f64, cfg: &DspConfig) -> Result<Vec<Segment>> {
    let mut stream = ScalarStream::from_record(rec, fs)?;
    if cfg.lowpass_enabled {
        stream = lowpass(&stream, cfg.lowpass_hz)?;
    }
    if cfg.remove_mean {
        stream = remove_mean(&stream);
    }
    Ok(window_segments(&stream, cfg.window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn stream(values: Vec<f64>) -> ScalarStream {
        let n = values.len();
        ScalarStream {
            values,
            fs: 100.0,
            labels: vec![AdhesionLabel::Safe; n],
            condition_tag: "t".into(),
        }
    }

    fn record(rows: &[[f64; 3]]) -> SignalRecord {
        let n = rows.len();
        SignalRecord {
            t: (0..n).map(|i| i as f64 / 100.0).collect(),
            ax: rows.iter().map(|r| r[0]).collect(),
            ay: rows.iter().map(|r| r[1]).collect(),
            az: rows.iter().map(|r| r[2]).collect(),
            pads: vec![6; n],
            label: vec![AdhesionLabel::Safe; n],
            condition_tag: "t".into(),
            seed: 0,
        }
    }

    #[test]
    fn magnitude_examples() {
        let s = magnitude_channel(&record(&[[0.0, 0.0, 1.0], [3.0, 4.0, 0.0], [1.0, 1.0, 1.0]])).unwrap();
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.values[1], 5.0);
        assert_eq!(s.values[2], 3f64.sqrt());
        assert!((s.fs - 100.0).abs() < 1e-9);
    }

    #[test]
    fn lowpass_passes_dc_exactly() {
        let out = lowpass(&stream(vec![2.5; 200]), 20.0).unwrap();
        assert!(out.values.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn lowpass_impulse_decays_geometrically() {
        let mut x = vec![0.0; 20];
        x[1] = 1.0;
        let out = lowpass(&stream(x), 20.0).unwrap();
        let beta = 1.0 - (-std::f64::consts::TAU * 20.0 / 100.0).exp();
        assert_eq!(out.values[0], 0.0);
        assert!((out.values[1] - beta).abs() < 1e-15);
        for i in 2..20 {
            let expected = beta * (1.0 - beta).powi(i as i32 - 1);
            assert!((out.values[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn lowpass_reduces_white_noise_variance() {
        let mut rng = crate::rng::rng_from(42);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let out = lowpass(&stream(x.clone()), 50.0 - 1e-6).unwrap();
        assert!(var(&out.values) < var(&x));
    }

    #[test]
    fn lowpass_rejects_bad_cutoff() {
        assert!(matches!(
            lowpass(&stream(vec![1.0; 4]), 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            lowpass(&stream(vec![1.0; 4]), 50.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zscore_examples() {
        let (out, z) = zscore_normalize(&stream(vec![1.0, 3.0])).unwrap();
        assert_eq!(out.values, vec![-1.0, 1.0]);
        assert_eq!((z.mean, z.std), (2.0, 1.0));
        let (again, _) = zscore_normalize(&out).unwrap();
        for (a, b) in again.values.iter().zip(&out.values) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(matches!(
            zscore_normalize(&stream(vec![4.0; 10])),
            Err(Error::DegenerateStream { .. })
        ));
        assert!(zscore_normalize(&stream(vec![4.0])).is_err());
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_segments(&stream(vec![0.0; 1000]), 32).len(), 31);
        assert_eq!(window_segments(&stream(vec![0.0; 32]), 32).len(), 1);
        let mut s = stream(vec![0.0; 64]);
        for l in &mut s.labels[40..] {
            *l = AdhesionLabel::HazardOccurred;
        }
        let segs = window_segments(&s, 32);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].origin_index, 0);
        assert_eq!(segs[0].label, AdhesionLabel::Safe);
    }

    fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        [
            [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
            [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
            [-sb, cb * sc, cb * cc],
        ]
    }

    proptest! {
        #[test]
        fn magnitude_is_rotation_invariant(seed in 0u64..1000) {
            let mut rng = crate::rng::rng_from(seed);
            let rows: Vec<[f64; 3]> = (0..16).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let rotated: Vec<[f64; 3]> = rows.iter().map(|r| {
                let m = rotation(rng.random_range(0.0..6.3), rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));
                [0, 1, 2].map(|i| m[i][0] * r[0] + m[i][1] * r[1] + m[i][2] * r[2])
            }).collect();
            let a = magnitude_channel(&record(&rows)).unwrap();
            let b = magnitude_channel(&record(&rotated)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn zscore_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
            if let Ok((out, z)) = zscore_normalize(&stream(values.clone())) {
                let mean = out.values.iter().sum::<f64>() / out.values.len() as f64;
                let std = (out.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / out.values.len() as f64).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((std - 1.0).abs() < 1e-9);
                for (orig, n) in values.iter().zip(&out.values) {
                    prop_assert!((z.invert(*n) - orig).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn segments_are_homogeneous(flips in proptest::collection::vec(0usize..300, 0..6)) {
            let mut s = stream(vec![1.0; 300]);
            for &f in &flips {
                for l in &mut s.labels[f..] {
                    *l = AdhesionLabel::from_index((l.index() + 1) % 3).unwrap();
                }
            }
            for seg in window_segments(&s, 32) {
                prop_assert_eq!(seg.samples.len(), 32);
                let slice = &s.labels[seg.origin_index..seg.origin_index + 32];
                prop_assert!(slice.iter().all(|&l| l == seg.label));
            }
        }
    }
}
