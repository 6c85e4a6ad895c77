//! Proper-time bookkeeping for the two detectors: interaction durations,
//! acceleration separations, clock ratios per stage and the lower energy gap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for treating an acceleration ratio as exactly one.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Parallel,
    AntiParallel,
}

impl MotionKind {
    pub const ALL: [MotionKind; 2] = [MotionKind::Parallel, MotionKind::AntiParallel];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionKind::Parallel => "parallel",
            MotionKind::AntiParallel => "anti-parallel",
        }
    }
}

impl std::fmt::Display for MotionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MotionKind {
    type Err = KinematicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "parallel" | "p" => Ok(MotionKind::Parallel),
            "anti-parallel" | "antiparallel" | "ap" => Ok(MotionKind::AntiParallel),
            other => Err(KinematicsError::Domain(format!(
                "unknown motion kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("acceleration ratio {0} is degenerate (|alpha - 1| < 1e-9)")]
    DegenerateKappa(f64),
    #[error("lower energy gap is undetermined: both acceleration ratios equal one")]
    UnderdeterminedOmega1,
    #[error(
        "lower energy gap {0} is not positive: acceleration ratios lie on opposite sides of one"
    )]
    NonPositiveOmega1(f64),
    #[error("lower energy gap diverges: cooling ratio is one while heating ratio {0} is not")]
    DivergentOmega1(f64),
}

/// Clock ratios entering the free Hamiltonian during each stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageAlphas {
    /// Free-flight stages.
    pub alpha_v: f64,
    pub alpha_heat_signed: f64,
    pub alpha_cool_signed: f64,
}

/// Dimensionless `a·T = 2 artanh(v)` reached when the stage ends at speed `v`.
pub fn interaction_time_dimensionless(v: f64) -> Result<f64, KinematicsError> {
    if !(v > 0.0 && v < 1.0) {
        return Err(KinematicsError::Domain(format!(
            "speed v = {v} outside (0, 1)"
        )));
    }
    Ok(2.0 * v.atanh())
}

/// `a_A κ` solving `cosh(a_A κ) = (α + 1/α)/2`.
pub fn kappa_hat(alpha: f64) -> Result<f64, KinematicsError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(KinematicsError::Domain(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if (alpha - 1.0).abs() < DEGENERACY_TOL {
        return Err(KinematicsError::DegenerateKappa(alpha));
    }
    // acosh(1 + δ) = ln(1 + δ + sqrt(δ(2 + δ))), δ = (α − 1)²/(2α)
    let delta = (alpha - 1.0).powi(2) / (2.0 * alpha);
    Ok((delta + (delta * (2.0 + delta)).sqrt()).ln_1p())
}

/// Relative velocity of anti-parallel detectors, `−2 tanh A / (1 + tanh² A)`.
pub fn relative_velocity_antiparallel(a: f64) -> f64 {
    let t = a.tanh();
    -2.0 * t / (1.0 + t * t)
}

/// `sqrt(1 − v_rel²)` for anti-parallel motion, evaluated without cancellation.
pub fn alpha_v_antiparallel(a: f64) -> f64 {
    let t = a.tanh();
    let sech2 = 1.0 / a.cosh().powi(2);
    // 1 − v² = ((1 − t²)/(1 + t²))²
    sech2 / (1.0 + t * t)
}

pub fn stage_alphas(motion: MotionKind, alpha_h: f64, alpha_c: f64, a: f64) -> StageAlphas {
    match motion {
        MotionKind::Parallel => StageAlphas {
            alpha_v: 1.0,
            alpha_heat_signed: alpha_h,
            alpha_cool_signed: alpha_c,
        },
        MotionKind::AntiParallel => StageAlphas {
            alpha_v: alpha_v_antiparallel(a),
            alpha_heat_signed: -alpha_h,
            alpha_cool_signed: -alpha_c,
        },
    }
}

/// Lower gap `ω₁T = W(α_H − 1)/(α_C − 1)` fixed by energy balance.
///
/// The caller still has to check `ω₁T < W`.
pub fn solve_omega1_hat(w: f64, alpha_h: f64, alpha_c: f64) -> Result<f64, KinematicsError> {
    let heat_degenerate = (alpha_h - 1.0).abs() < DEGENERACY_TOL;
    let cool_degenerate = (alpha_c - 1.0).abs() < DEGENERACY_TOL;
    match (heat_degenerate, cool_degenerate) {
        (true, true) => return Err(KinematicsError::UnderdeterminedOmega1),
        (false, true) => return Err(KinematicsError::DivergentOmega1(alpha_h)),
        _ => {}
    }
    let omega1 = w * (alpha_h - 1.0) / (alpha_c - 1.0);
    if !(omega1 > 0.0) {
        return Err(KinematicsError::NonPositiveOmega1(omega1));
    }
    Ok(omega1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingDurations {
    pub t_ac_over_t_ah: f64,
    pub t_bc_over_t_ah: f64,
}

/// Cooling-stage durations when `|a_C T_C| = |a_H T_H|` for detector A.
///
/// `accel_ratio` is `a_{A,C}/a_{A,H}`. The product `a·T` is the same for both
/// stages, so `A` only fixes the common scale and drops out of the ratios.
pub fn cooling_duration_constraints(
    _a: f64,
    _alpha_h: f64,
    alpha_c: f64,
    accel_ratio: f64,
) -> Result<CoolingDurations, KinematicsError> {
    if !(accel_ratio > 0.0 && alpha_c > 0.0) {
        return Err(KinematicsError::Domain(format!(
            "accel ratio {accel_ratio} and alpha_C {alpha_c} must be positive"
        )));
    }
    let t_ac = 1.0 / accel_ratio;
    Ok(CoolingDurations {
        t_ac_over_t_ah: t_ac,
        t_bc_over_t_ah: alpha_c * t_ac,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_time() {
        // 2·artanh(0.4621) from a 30-digit evaluation
        let got = interaction_time_dimensionless(0.4621).unwrap();
        assert!((got - 0.999_956_368_144_195_4).abs() < 1e-12, "{got}");
        assert!((interaction_time_dimensionless(0.25f64.tanh()).unwrap() - 0.5).abs() < 1e-15);
        assert!(interaction_time_dimensionless(1e-12).unwrap() < 1e-11);
        for v in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(interaction_time_dimensionless(v).is_err());
        }
    }

    #[test]
    fn kappa_examples() {
        assert!((kappa_hat(2.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-14);
        assert!((kappa_hat(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-14);
        assert!(matches!(
            kappa_hat(1.0),
            Err(KinematicsError::DegenerateKappa(_))
        ));
        assert!(matches!(
            kappa_hat(1.0 + 1e-10),
            Err(KinematicsError::DegenerateKappa(_))
        ));
        // cosh(κ) recovers the defining relation
        let k = kappa_hat(2.0).unwrap();
        assert!((k.cosh() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn relative_velocity_values() {
        assert_eq!(relative_velocity_antiparallel(0.0), 0.0);
        assert!((relative_velocity_antiparallel(0.5) + 1.0f64.tanh()).abs() < 1e-15);
        assert!((relative_velocity_antiparallel(40.0) + 1.0).abs() < 1e-15);
        assert_eq!(alpha_v_antiparallel(0.0), 1.0);
    }

    #[test]
    fn stage_alpha_signs() {
        let p = stage_alphas(MotionKind::Parallel, 0.5, 0.4, 2.0);
        assert_eq!(
            p,
            StageAlphas {
                alpha_v: 1.0,
                alpha_heat_signed: 0.5,
                alpha_cool_signed: 0.4
            }
        );
        let ap = stage_alphas(MotionKind::AntiParallel, 0.2, 0.1, 0.5);
        assert!((ap.alpha_v - 0.648_054_273_663_885_4).abs() < 1e-14);
        assert_eq!((ap.alpha_heat_signed, ap.alpha_cool_signed), (-0.2, -0.1));
        let small = stage_alphas(MotionKind::AntiParallel, 1.0, 1.0, 1e-9);
        assert!((small.alpha_v - 1.0).abs() < 1e-15);
        assert_eq!(
            (small.alpha_heat_signed, small.alpha_cool_signed),
            (-1.0, -1.0)
        );
    }

    #[test]
    fn omega1_cases() {
        let w1 = solve_omega1_hat(0.2, 0.2, 0.1).unwrap();
        assert!((w1 - 0.16 / 0.9).abs() < 1e-15);
        assert!((w1 - 0.17778).abs() < 1e-5);
        assert!(matches!(
            solve_omega1_hat(0.2, 1.0 + 1e-12, 1.0),
            Err(KinematicsError::UnderdeterminedOmega1)
        ));
        assert!(matches!(
            solve_omega1_hat(0.2, 1.0, 0.5),
            Err(KinematicsError::NonPositiveOmega1(_))
        ));
        assert!(matches!(
            solve_omega1_hat(0.2, 0.5, 1.5),
            Err(KinematicsError::NonPositiveOmega1(_))
        ));
        assert!(matches!(
            solve_omega1_hat(0.2, 0.5, 1.0),
            Err(KinematicsError::DivergentOmega1(_))
        ));
        // accepted here, rejected downstream because it exceeds W
        let w1 = solve_omega1_hat(0.5, 2.0, 1.5).unwrap();
        assert!((w1 - 1.0).abs() < 1e-15 && w1 > 0.5);
    }

    #[test]
    fn cooling_durations() {
        let d = cooling_duration_constraints(1.0, 0.2, 0.1, 1.0).unwrap();
        assert_eq!(d.t_ac_over_t_ah, 1.0);
        let d = cooling_duration_constraints(1.0, 0.2, 0.1, 0.5).unwrap();
        assert_eq!(d.t_ac_over_t_ah, 2.0);
        assert!((d.t_bc_over_t_ah - 0.2).abs() < 1e-15);
        assert!(cooling_duration_constraints(1.0, 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn motion_parsing() {
        assert_eq!(
            "parallel".parse::<MotionKind>().unwrap(),
            MotionKind::Parallel
        );
        assert_eq!(
            "anti_parallel".parse::<MotionKind>().unwrap(),
            MotionKind::AntiParallel
        );
        assert!("sideways".parse::<MotionKind>().is_err());
    }
}
