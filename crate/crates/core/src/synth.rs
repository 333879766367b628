//! Synthetic three-axis vibration records for a tracked robot with 4, 5 or 6
//! attached pads.
//!
//! The generative model is a gravity offset plus the response of the pad
//! contact oscillator (natural frequency set by the attached pad count and the
//! loaded mass) to a jittered track-link impulse train and broadband forcing,
//! scaled by the sensor rod's gain at the damped modal frequency, plus white
//! sensor noise on each axis.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adhesion::{rod_response, system_params, RodModel, VibrationSystem};
use crate::error::{Error, Result};
use crate::rng::derived_rng;

const STANDARD_GRAVITY: f64 = 9.806_65;

/// Hazard class, ordered by tie-break priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdhesionLabel {
    Safe,
    PotentialHazard,
    HazardOccurred,
}

impl AdhesionLabel {
    pub const ALL: [AdhesionLabel; 3] = [
        AdhesionLabel::Safe,
        AdhesionLabel::PotentialHazard,
        AdhesionLabel::HazardOccurred,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdhesionLabel::Safe => "safe",
            AdhesionLabel::PotentialHazard => "potential_hazard",
            AdhesionLabel::HazardOccurred => "hazard_occurred",
        }
    }

    pub fn pads(self) -> u32 {
        match self {
            AdhesionLabel::Safe => 6,
            AdhesionLabel::PotentialHazard => 5,
            AdhesionLabel::HazardOccurred => 4,
        }
    }
}

impl fmt::Display for AdhesionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdhesionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown label `{s}`")))
    }
}

pub fn label_from_pads(n_pads: u32) -> Result<AdhesionLabel> {
    match n_pads {
        6 => Ok(AdhesionLabel::Safe),
        5 => Ok(AdhesionLabel::PotentialHazard),
        4 => Ok(AdhesionLabel::HazardOccurred),
        other => Err(Error::OutOfRange {
            what: "n_pads",
            value: other.to_string(),
            allowed: "{4, 5, 6}",
        }),
    }
}

/// One operating condition of the robot plus every constant of the
/// generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub tag: String,
    pub load_kg: f64,
    /// Wall angle from vertical (degrees).
    pub angle_deg: f64,
    /// Contact stiffness of one pad (N/m).
    pub pad_stiffness: f64,
    /// Unloaded robot mass (kg).
    pub base_mass_kg: f64,
    /// System damping (N·s/m).
    pub damping: f64,
    pub rod: RodModel,
    /// Sampling frequency (Hz).
    pub fs: f64,
    /// Travel speed (m/s).
    pub speed: f64,
    /// Track link pitch (m); one impulse per link passing the adhesion zone.
    pub link_pitch_m: f64,
    /// Median impulse per link (N·s).
    pub impulse_ns: f64,
    /// Relative timing jitter of the impulse train, in [0, 1).
    pub impulse_jitter: f64,
    /// Log-normal spread of impulse magnitudes.
    pub impulse_spread: f64,
    /// Broadband forcing density (N·√s).
    pub forcing_std: f64,
    /// White measurement noise per axis (g).
    pub sensor_noise_g: f64,
    /// Direction of the modal vibration in the sensor frame (normalized on use).
    pub vibration_axis: [f64; 3],
}

impl ConditionSpec {
    /// Canonical condition with the calibrated model constants.
    pub fn canonical(tag: &str, load_kg: f64, angle_deg: f64) -> Self {
        Self {
            tag: tag.to_string(),
            load_kg,
            angle_deg,
            pad_stiffness: 21_000.0,
            base_mass_kg: 9.0,
            damping: 110.0,
            rod: RodModel {
                stiffness: 250.0,
                damping: 0.05,
                tip_mass: 0.004,
            },
            fs: 100.0,
            speed: 0.02,
            link_pitch_m: 0.004,
            impulse_ns: 1.0,
            impulse_jitter: 0.3,
            impulse_spread: 0.3,
            forcing_std: 0.5,
            sensor_noise_g: 0.01,
            vibration_axis: [0.2, 0.6, 0.77],
        }
    }

    /// Same condition without broadband forcing and sensor noise; only the
    /// jittered impulse train drives the oscillator.
    pub fn noise_free(&self) -> Self {
        Self {
            forcing_std: 0.0,
            sensor_noise_g: 0.0,
            ..self.clone()
        }
    }

    pub fn effective_mass(&self) -> f64 {
        self.base_mass_kg + self.load_kg
    }

    pub fn system(&self, n_pads: u32) -> VibrationSystem {
        VibrationSystem {
            n_pads,
            pad_stiffness: self.pad_stiffness,
            mass: self.effective_mass(),
            damping: self.damping,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, v: f64, allowed: &'static str| Error::OutOfRange {
            what,
            value: v.to_string(),
            allowed,
        };
        if !(self.fs > 0.0) {
            return Err(bad("fs", self.fs, "> 0"));
        }
        if !(self.load_kg >= 0.0) {
            return Err(bad("load_kg", self.load_kg, ">= 0"));
        }
        if !(self.speed > 0.0) {
            return Err(bad("speed", self.speed, "> 0"));
        }
        if !(self.link_pitch_m > 0.0) {
            return Err(bad("link_pitch_m", self.link_pitch_m, "> 0"));
        }
        if !(0.0..1.0).contains(&self.impulse_jitter) {
            return Err(bad("impulse_jitter", self.impulse_jitter, "[0, 1)"));
        }
        for (what, v) in [
            ("impulse_ns", self.impulse_ns),
            ("impulse_spread", self.impulse_spread),
            ("forcing_std", self.forcing_std),
            ("sensor_noise_g", self.sensor_noise_g),
        ] {
            if !(v >= 0.0) {
                return Err(bad(what, v, ">= 0"));
            }
        }
        if self.vibration_axis.iter().map(|x| x * x).sum::<f64>() == 0.0 {
            return Err(Error::Config("vibration_axis must be non-zero".into()));
        }
        self.rod.validate()
    }
}

/// Four canonical conditions, one per payload, alternating the two limit
/// wall angles.
pub fn canonical_conditions() -> Vec<ConditionSpec> {
    vec![
        ConditionSpec::canonical("1kg", 1.0, 55.0),
        ConditionSpec::canonical("2kg", 2.0, 65.0),
        ConditionSpec::canonical("3kg", 3.0, 55.0),
        ConditionSpec::canonical("5kg", 5.0, 65.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub t: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub az: Vec<f64>,
    pub pads: Vec<u32>,
    pub label: Vec<AdhesionLabel>,
    pub condition_tag: String,
    pub seed: u64,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.ax, &self.ay, &self.az]
    }

    /// Checks equal channel lengths and pad/label agreement.
    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if [
            self.ax.len(),
            self.ay.len(),
            self.az.len(),
            self.pads.len(),
            self.label.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::Schema("record channels differ in length".into()));
        }
        for (i, (&p, &l)) in self.pads.iter().zip(&self.label).enumerate() {
            if label_from_pads(p)? != l {
                return Err(Error::Schema(format!(
                    "sample {i}: label {l} inconsistent with {p} pads"
                )));
            }
        }
        Ok(())
    }
}

pub fn synthesize_record(
    cond: &ConditionSpec,
    n_pads: u32,
    duration_s: f64,
    seed: u64,
) -> Result<SignalRecord> {
    cond.validate()?;
    let label = label_from_pads(n_pads)?;
    let n = (duration_s * cond.fs).round();
    if !(n >= 1.0) {
        return Err(Error::OutOfRange {
            what: "duration_s * fs",
            value: n.to_string(),
            allowed: ">= 1 sample",
        });
    }
    let n = n as usize;
    let modal = system_params(&cond.system(n_pads))?;
    let nyquist_hz = cond.fs / 2.0;
    let freq_hz = modal.omega_nat / std::f64::consts::TAU;
    if freq_hz >= nyquist_hz {
        return Err(Error::UnresolvableMode { freq_hz, nyquist_hz });
    }
    if modal.zeta >= 1.0 {
        return Err(Error::OutOfRange {
            what: "damping ratio",
            value: modal.zeta.to_string(),
            allowed: "< 1 (underdamped)",
        });
    }

    let dt = 1.0 / cond.fs;
    let mass = cond.effective_mass();
    let forcing = excitation(cond, n, seed);

    // Displacement per unit impulse: e^{-σt} sin(ω_d t) / (m ω_d), realized as
    // a two-pole resonator.
    let omega_d = modal.omega_nat * (1.0 - modal.zeta * modal.zeta).sqrt();
    let r = (-modal.zeta * modal.omega_nat * dt).exp();
    let a1 = 2.0 * r * (omega_d * dt).cos();
    let a2 = r * r;
    let b1 = r * (omega_d * dt).sin() / (mass * omega_d);
    let rod_gain = rod_response(&cond.rod, omega_d)?.gain;
    let accel_scale = -modal.omega_nat * modal.omega_nat * rod_gain / STANDARD_GRAVITY;

    let mut modal_accel = vec![0.0; n];
    let (mut y1, mut y2) = (0.0, 0.0);
    for i in 0..n {
        let u_prev = if i > 0 { forcing[i - 1] } else { 0.0 };
        let y = a1 * y1 - a2 * y2 + b1 * u_prev;
        modal_accel[i] = accel_scale * y;
        y2 = y1;
        y1 = y;
    }

    let norm = cond.vibration_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let axis = cond.vibration_axis.map(|x| x / norm);
    let angle = cond.angle_deg.to_radians();
    let gravity = [0.0, angle.sin(), angle.cos()];

    let mut noise_rng = derived_rng(seed, "sensor-noise", 0);
    let mut chans = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        for (c, chan) in chans.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            chan[i] = gravity[c] + axis[c] * modal_accel[i] + cond.sensor_noise_g * e;
        }
    }
    let [ax, ay, az] = chans;
    Ok(SignalRecord {
        t: (0..n).map(|i| i as f64 * dt).collect(),
        ax,
        ay,
        az,
        pads: vec![n_pads; n],
        label: vec![label; n],
        condition_tag: cond.tag.clone(),
        seed,
    })
}

/// Per-sample impulse (N·s) delivered to the contact oscillator.
fn excitation(cond: &ConditionSpec, n: usize, seed: u64) -> Vec<f64> {
    let dt = 1.0 / cond.fs;
    let mut u = vec![0.0; n];
    let mut rng = derived_rng(seed, "impulse-train", 0);
    let period = cond.link_pitch_m / cond.speed;
    let mut t = period * rng.random::<f64>();
    let horizon = n as f64 * dt;
    while t < horizon {
        let idx = ((t / dt).round() as usize).min(n - 1);
        let z: f64 = StandardNormal.sample(&mut rng);
        u[idx] += cond.impulse_ns * (cond.impulse_spread * z).exp();
        let jitter = cond.impulse_jitter * (2.0 * rng.random::<f64>() - 1.0);
        t += period * (1.0 + jitter);
    }
    if cond.forcing_std > 0.0 {
        let mut frng = derived_rng(seed, "broadband-forcing", 0);
        let scale = cond.forcing_std * dt.sqrt();
        for v in &mut u {
            let z: f64 = StandardNormal.sample(&mut frng);
            *v += scale * z;
        }
    }
    u
}

/// Replace each sample of each axis with the channel maximum (probability
/// `density / 2`) or the channel minimum (probability `density / 2`).
pub fn inject_salt_pepper(rec: &SignalRecord, density: f64, seed: u64) -> Result<SignalRecord> {
    if !(0.0..=0.5).contains(&density) {
        return Err(Error::OutOfRange {
            what: "density",
            value: density.to_string(),
            allowed: "[0, 0.5]",
        });
    }
    let mut out = rec.clone();
    if density == 0.0 || rec.is_empty() {
        return Ok(out);
    }
    let half = density / 2.0;
    for (axis, chan) in [&mut out.ax, &mut out.ay, &mut out.az].into_iter().enumerate() {
        let (lo, hi) = chan
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut rng = derived_rng(seed, "salt-pepper", axis as u64);
        for v in chan.iter_mut() {
            let draw: f64 = rng.random();
            if draw < half {
                *v = hi;
            } else if draw < density {
                *v = lo;
            }
        }
    }
    Ok(out)
}
