//! Pad adhesion force balance, contact-stiffness modal parameters and the
//! sensor-rod transmissibility.
//!
//! Everything here is a pure closed-form evaluation; the signal synthesizer
//! builds on [`system_params`] and [`rod_response`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forces acting on a pad entering the adhesion zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadForceConfig {
    /// Lumped magnetic force coefficient; `k_mag / gap²` is in newtons.
    pub k_mag: f64,
    /// Pad-to-wall gap (m).
    pub gap: f64,
    /// Track restoring force (N).
    pub restoring: f64,
    /// Track tension force (N).
    pub tension: f64,
    /// Track bending angle (rad).
    pub theta: f64,
    /// Robot weight (N).
    pub robot_weight: f64,
    /// Load weight (N).
    pub load_weight: f64,
    /// Wall inclination (rad).
    pub alpha_wall: f64,
}

impl PadForceConfig {
    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.gap > 0.0) {
            return Err(out_of_range("gap", self.gap, "> 0"));
        }
        if !(0.0..=half_pi).contains(&self.theta) {
            return Err(out_of_range("theta", self.theta, "[0, pi/2]"));
        }
        if !(0.0..=half_pi).contains(&self.alpha_wall) {
            return Err(out_of_range("alpha_wall", self.alpha_wall, "[0, pi/2]"));
        }
        for (what, v) in [
            ("k_mag", self.k_mag),
            ("restoring", self.restoring),
            ("tension", self.tension),
            ("robot_weight", self.robot_weight),
            ("load_weight", self.load_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(out_of_range(what, v, ">= 0"));
            }
        }
        Ok(())
    }
}

/// Lumped mass-spring-damper formed by the attached pads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationSystem {
    pub n_pads: u32,
    /// Contact stiffness of a single pad (N/m).
    pub pad_stiffness: f64,
    /// System mass (kg).
    pub mass: f64,
    /// System damping (N·s/m).
    pub damping: f64,
}

/// Carbon-fiber sensor rod treated as a base-excited spring-damper-mass stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodModel {
    pub stiffness: f64,
    pub damping: f64,
    pub tip_mass: f64,
}

impl RodModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0) {
            return Err(out_of_range("rod.stiffness", self.stiffness, "> 0"));
        }
        if !(self.tip_mass > 0.0) {
            return Err(out_of_range("rod.tip_mass", self.tip_mass, "> 0"));
        }
        if !(self.damping >= 0.0) {
            return Err(out_of_range("rod.damping", self.damping, ">= 0"));
        }
        Ok(())
    }

    /// Undamped resonance of the rod (rad/s).
    pub fn resonance(&self) -> f64 {
        (self.stiffness / self.tip_mass).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBalance {
    pub magnetic_norm: f64,
    pub gravity_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalParams {
    pub k_total: f64,
    pub omega_nat: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodResponse {
    pub gain: f64,
    pub phase: f64,
}

fn out_of_range(what: &'static str, value: f64, allowed: &'static str) -> Error {
    Error::OutOfRange {
        what,
        value: value.to_string(),
        allowed,
    }
}

/// Euclidean norms of the adhesion-side force column and the gravity term.
pub fn force_balance(cfg: &PadForceConfig) -> Result<ForceBalance> {
    cfg.validate()?;
    let magnetic = cfg.k_mag / (cfg.gap * cfg.gap);
    let cos_t = cfg.theta.cos();
    let components = [magnetic, cfg.restoring * cos_t, cfg.tension * cos_t];
    let magnetic_norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
    let gravity_norm = ((cfg.robot_weight + cfg.load_weight) * (cfg.theta + cfg.alpha_wall).sin()).abs();
    if !magnetic_norm.is_finite() || !gravity_norm.is_finite() {
        return Err(Error::Domain(format!(
            "force balance is not finite (gap = {:e})",
            cfg.gap
        )));
    }
    Ok(ForceBalance {
        magnetic_norm,
        gravity_norm,
    })
}

/// A pad holds when the adhesion norm is at least the gravity norm.
pub fn is_attached(cfg: &PadForceConfig) -> Result<bool> {
    let fb = force_balance(cfg)?;
    Ok(fb.magnetic_norm >= fb.gravity_norm)
}

pub fn system_params(sys: &VibrationSystem) -> Result<ModalParams> {
    if sys.n_pads == 0 {
        return Err(Error::FullyDetached);
    }
    if !(sys.pad_stiffness > 0.0) {
        return Err(out_of_range("pad_stiffness", sys.pad_stiffness, "> 0"));
    }
    if !(sys.mass > 0.0) {
        return Err(out_of_range("mass", sys.mass, "> 0"));
    }
    if !(sys.damping >= 0.0) {
        return Err(out_of_range("damping", sys.damping, ">= 0"));
    }
    let k_total = f64::from(sys.n_pads) * sys.pad_stiffness;
    Ok(ModalParams {
        k_total,
        omega_nat: (k_total / sys.mass).sqrt(),
        zeta: sys.damping / (2.0 * (sys.mass * k_total).sqrt()),
    })
}

/// Gain and phase of the rod transmissibility at angular frequency `omega`.
///
/// The phase uses quadrant-aware arctangents so it stays continuous through
/// the rod resonance `k = M ω²`.
pub fn rod_response(rod: &RodModel, omega: f64) -> Result<RodResponse> {
    rod.validate()?;
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(out_of_range("omega", omega, ">= 0"));
    }
    let wc = omega * rod.damping;
    let detune = rod.stiffness - rod.tip_mass * omega * omega;
    let den = detune.hypot(wc);
    if den == 0.0 {
        return Err(Error::ResonanceSingularity { omega });
    }
    let gain = rod.stiffness.hypot(wc) / den;
    let phase = wc.atan2(rod.stiffness) - wc.atan2(detune);
    Ok(RodResponse { gain, phase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pad(k_mag: f64, gap: f64, fd: f64, fa: f64, theta: f64) -> PadForceConfig {
        PadForceConfig {
            k_mag,
            gap,
            restoring: fd,
            tension: fa,
            theta,
            robot_weight: 80.0,
            load_weight: 20.0,
            alpha_wall: 0.0,
        }
    }

    #[test]
    fn level_track_on_vertical_reference_has_no_gravity_term() {
        let fb = force_balance(&pad(1.0, 1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(fb.gravity_norm, 0.0);
        assert_eq!(fb.magnetic_norm, 1.0);
        assert!(is_attached(&pad(1.0, 1.0, 0.0, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn magnetic_norm_matches_closed_form() {
        // sqrt(64 + 9 + 16)
        let fb = force_balance(&pad(2.0, 0.5, 3.0, 4.0, 0.0)).unwrap();
        assert_relative_eq!(fb.magnetic_norm, 9.433_981_132_056_603, max_relative = 1e-15);
    }

    #[test]
    fn tie_counts_as_attached() {
        // |F_m| = 10 from the magnetic term alone; |F_g| = 10·sin(pi/2) = 10.
        let cfg = PadForceConfig {
            k_mag: 10.0,
            gap: 1.0,
            restoring: 0.0,
            tension: 0.0,
            theta: 0.0,
            robot_weight: 6.0,
            load_weight: 4.0,
            alpha_wall: std::f64::consts::FRAC_PI_2,
        };
        let fb = force_balance(&cfg).unwrap();
        assert_eq!(fb.magnetic_norm, fb.gravity_norm);
        assert!(is_attached(&cfg).unwrap());
    }

    #[test]
    fn weak_magnet_under_heavy_load_detaches() {
        let cfg = PadForceConfig {
            k_mag: 1e-6,
            gap: 0.01,
            restoring: 1.0,
            tension: 1.0,
            theta: 1.2,
            robot_weight: 300.0,
            load_weight: 50.0,
            alpha_wall: 0.3,
        };
        let fb = force_balance(&cfg).unwrap();
        assert!(fb.gravity_norm > fb.magnetic_norm);
        assert!(!is_attached(&cfg).unwrap());
    }

    #[test]
    fn gap_underflow_is_a_domain_error() {
        let cfg = pad(1.0, 1e-200, 0.0, 0.0, 0.0);
        assert!(matches!(force_balance(&cfg), Err(Error::Domain(_))));
        assert!(matches!(
            force_balance(&pad(1.0, 0.0, 0.0, 0.0, 0.0)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn modal_identities() {
        let crit = system_params(&VibrationSystem {
            n_pads: 1,
            pad_stiffness: 1.0,
            mass: 1.0,
            damping: 2.0,
        })
        .unwrap();
        assert_eq!((crit.k_total, crit.omega_nat, crit.zeta), (1.0, 1.0, 1.0));

        let undamped = system_params(&VibrationSystem {
            n_pads: 4,
            pad_stiffness: 250.0,
            mass: 10.0,
            damping: 0.0,
        })
        .unwrap();
        assert_eq!(
            (undamped.k_total, undamped.omega_nat, undamped.zeta),
            (1000.0, 10.0, 0.0)
        );

        // High-precision reference values
        let p = system_params(&VibrationSystem {
            n_pads: 5,
            pad_stiffness: 1800.0,
            mass: 12.0,
            damping: 30.0,
        })
        .unwrap();
        assert_eq!(p.k_total, 9000.0);
        assert_relative_eq!(p.omega_nat, 27.386_127_875_258_307, max_relative = 1e-15);
        assert_relative_eq!(p.zeta, 0.045_643_546_458_763_84, max_relative = 1e-14);
    }

    #[test]
    fn zero_pads_is_fully_detached() {
        let sys = VibrationSystem {
            n_pads: 0,
            pad_stiffness: 1.0,
            mass: 1.0,
            damping: 0.0,
        };
        assert!(matches!(system_params(&sys), Err(Error::FullyDetached)));
    }

    #[test]
    fn rod_static_and_resonant_response() {
        let rod = RodModel {
            stiffness: 100.0,
            damping: 2.0,
            tip_mass: 1.0,
        };
        let r0 = rod_response(&rod, 0.0).unwrap();
        assert_eq!((r0.gain, r0.phase), (1.0, 0.0));

        let res = rod_response(&rod, 10.0).unwrap();
        assert_relative_eq!(res.gain, 5.099_019_513_592_784_5, max_relative = 1e-14);
        // atan(0.2) - pi/2
        assert_relative_eq!(
            res.phase,
            0.197_395_559_849_880_75 - std::f64::consts::FRAC_PI_2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn undamped_rod_at_resonance_is_singular() {
        let rod = RodModel {
            stiffness: 100.0,
            damping: 0.0,
            tip_mass: 1.0,
        };
        assert!(matches!(
            rod_response(&rod, 10.0),
            Err(Error::ResonanceSingularity { .. })
        ));
    }

    #[test]
    fn rod_gain_tail_decays_monotonically() {
        let rod = RodModel {
            stiffness: 100.0,
            damping: 2.0,
            tip_mass: 1.0,
        };
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let w = 20.0 * 1.5f64.powi(i);
            let g = rod_response(&rod, w).unwrap().gain;
            assert!(g < prev);
            prev = g;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn phase_is_continuous_through_rod_resonance() {
        let rod = RodModel {
            stiffness: 100.0,
            damping: 2.0,
            tip_mass: 1.0,
        };
        let mut prev = rod_response(&rod, 9.0).unwrap().phase;
        for i in 1..=2000 {
            let w = 9.0 + 2.0 * f64::from(i) / 2000.0;
            let p = rod_response(&rod, w).unwrap().phase;
            assert!((p - prev).abs() < 0.01, "jump at omega = {w}");
            prev = p;
        }
    }

    proptest! {
        #[test]
        fn static_gain_is_unity(k in 1e-3f64..1e6, c in 0.0f64..1e3, m in 1e-3f64..1e3) {
            let rod = RodModel { stiffness: k, damping: c, tip_mass: m };
            let r = rod_response(&rod, 0.0).unwrap();
            prop_assert!((r.gain - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn modal_monotone_in_pad_count(k in 1.0f64..1e5, m in 0.1f64..100.0, c in 0.1f64..100.0, n in 1u32..6) {
            let a = system_params(&VibrationSystem { n_pads: n, pad_stiffness: k, mass: m, damping: c }).unwrap();
            let b = system_params(&VibrationSystem { n_pads: n + 1, pad_stiffness: k, mass: m, damping: c }).unwrap();
            prop_assert!(b.omega_nat > a.omega_nat);
            prop_assert!(b.zeta < a.zeta);
        }

        // Holds whenever the stiffness gap exceeds 2c²/M (light rod damping).
        #[test]
        fn softer_rod_amplifies_more_at_its_resonance(k1 in 10.0f64..1e4, dk in 20.5f64..1e4, c in 0.01f64..1.0, m in 0.1f64..2.0) {
            let soft = RodModel { stiffness: k1, damping: c, tip_mass: m };
            let stiff = RodModel { stiffness: k1 + dk, damping: c, tip_mass: m };
            let w = soft.resonance();
            prop_assert!(rod_response(&soft, w).unwrap().gain > rod_response(&stiff, w).unwrap().gain);
        }

        #[test]
        fn attachment_monotone_in_magnet(k_mag in 0.0f64..100.0, dk in 0.0f64..100.0, gap in 0.01f64..2.0, shrink in 0.1f64..1.0,
                                         theta in 0.0f64..1.5, alpha in 0.0f64..1.5) {
            let base = PadForceConfig { k_mag, gap, restoring: 5.0, tension: 3.0, theta, robot_weight: 50.0, load_weight: 10.0, alpha_wall: alpha };
            if is_attached(&base).unwrap() {
                let stronger = PadForceConfig { k_mag: k_mag + dk, ..base };
                let closer = PadForceConfig { gap: gap * shrink, ..base };
                prop_assert!(is_attached(&stronger).unwrap());
                prop_assert!(is_attached(&closer).unwrap());
            }
        }
    }
}
