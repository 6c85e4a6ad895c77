//! Closed-form dimensionless detector responses.
//!
//! All quantities are in units of the heating-stage interaction time of
//! detector A: `A = a·T` and `W = ω₂·T`. Couplings are set to one, so every
//! trace scales with the square of the physical coupling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{kappa_hat, KinematicsError, MotionKind, DEGENERACY_TOL};
use crate::specfun::{lerch_phi, LerchArgs, LerchError};

/// Half-width of the excluded band around every `A = 2πn`, `n ≥ 1`.
pub const SINGULAR_BAND: f64 = 0.05;

/// Smallest admissible `W/A`.
pub const MIN_W_OVER_A: f64 = 1e-4;

const LERCH_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("A = {a} lies within {SINGULAR_BAND} of 2π·{n}")]
    NearSingularA { a: f64, n: u32 },
    #[error("W/A = {ratio:e} is below the minimum {MIN_W_OVER_A:e}")]
    ClampViolation { ratio: f64 },
    #[error("invalid response point: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Lerch(#[from] LerchError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Index `n ≥ 1` of the excluded band containing `a`, if any.
pub fn singular_band(a: f64) -> Option<u32> {
    let n = (a / (2.0 * PI)).round();
    if n >= 1.0 && (a - 2.0 * PI * n).abs() < SINGULAR_BAND {
        Some(n as u32)
    } else {
        None
    }
}

fn check_coordinates(a: f64, w: f64) -> Result<(), ResponseError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(ResponseError::InvalidInput(format!(
            "A = {a} must be positive"
        )));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(ResponseError::InvalidInput(format!(
            "W = {w} must be positive"
        )));
    }
    if let Some(n) = singular_band(a) {
        return Err(ResponseError::NearSingularA { a, n });
    }
    if w / a < MIN_W_OVER_A {
        return Err(ResponseError::ClampViolation { ratio: w / a });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub a: f64,
    pub w: f64,
    /// Heating-stage acceleration ratio `a_A/a_B`.
    pub alpha: f64,
    pub motion: MotionKind,
}

impl ResponsePoint {
    pub fn new(a: f64, w: f64, alpha: f64, motion: MotionKind) -> Result<Self, ResponseError> {
        let point = Self {
            a,
            w,
            alpha,
            motion,
        };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<(), ResponseError> {
        check_coordinates(self.a, self.w)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ResponseError::InvalidInput(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub pa_plus: f64,
    pub pa_minus: f64,
    pub pb_plus: f64,
    pub pb_minus: f64,
    pub dp_ab: f64,
}

fn lerch_difference(z: f64, s: u32, shift: f64) -> Result<f64, ResponseError> {
    let upper = lerch_phi(LerchArgs::new(z, s, 1.0 + shift), LERCH_TOL)?;
    let lower = lerch_phi(LerchArgs::new(z, s, 1.0 - shift), LERCH_TOL)?;
    Ok(upper - lower)
}

/// Excitation response of detector A at gap `W`.
pub fn p_a(a: f64, w: f64) -> Result<f64, ResponseError> {
    check_coordinates(a, w)?;
    let shift = a / (2.0 * PI);
    let z = (-2.0 * PI * w / a).exp();
    let half = 0.5 * a;
    let pole = half * half * (-w).exp() / (16.0 * half.sin().powi(2));
    let second = a * a * z / (64.0 * PI * PI) * lerch_difference(z, 2, shift)?;
    let first = a * w * z / (32.0 * PI) * lerch_difference(z, 1, shift)?;
    Ok(pole + second + first)
}

/// De-excitation response of detector A, `W/8` above the excitation.
pub fn p_a_neg(a: f64, w: f64) -> Result<f64, ResponseError> {
    Ok(w / 8.0 + p_a(a, w)?)
}

/// Excitation response of detector B, whose proper clock runs at `alpha` times A's.
pub fn p_b(a: f64, w: f64, alpha: f64) -> Result<f64, ResponseError> {
    check_coordinates(a, w)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ResponseError::InvalidInput(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    let shift = a / (2.0 * PI);
    let z = (-2.0 * PI * w * alpha / a).exp();
    let half = 0.5 * a;
    let pole = half * half * (-alpha * w).exp() / (16.0 * half.sin().powi(2));
    let second = a * a * z / (64.0 * PI * PI) * lerch_difference(z, 2, shift)?;
    let first = a * w * alpha * z / (32.0 * PI) * lerch_difference(z, 1, shift)?;
    Ok(pole + second + first)
}

pub fn p_b_neg(a: f64, w: f64, alpha: f64) -> Result<f64, ResponseError> {
    Ok(w * alpha / 8.0 + p_b(a, w, alpha)?)
}

/// Cross-detector difference `P_AB(W, −W) − P_AB(−W, W)`.
pub fn delta_p_ab(point: &ResponsePoint) -> Result<f64, ResponseError> {
    point.validate()?;
    let ResponsePoint {
        a,
        w,
        alpha,
        motion,
    } = *point;
    if motion == MotionKind::AntiParallel {
        return Ok(0.0);
    }
    if (alpha - 1.0).abs() < DEGENERACY_TOL {
        return Ok(-w / 8.0);
    }
    let k = kappa_hat(alpha)? / a;
    // α·b with b = A/α
    let scale = alpha * (a / alpha);
    let (decay, cos_sign) = if alpha < 1.0 {
        ((-(1.0 - alpha) * w / 2.0).exp(), 1.0)
    } else {
        ((-(alpha - 1.0) * w / 2.0).exp(), -1.0)
    };
    let x = alpha * k * w;
    let y = k * w;
    // cos x − cos y without cancellation
    let cos_diff = -2.0 * (0.5 * (x + y)).sin() * (0.5 * (x - y)).sin();
    let bracket = k * x.sin() + k * y.sin() + cos_sign * cos_diff;
    let prefactor = scale * decay / ((a * k).sinh() * 16.0 * k * (k * k + 1.0));
    Ok(-prefactor * bracket)
}

pub fn response_set(point: &ResponsePoint) -> Result<ResponseSet, ResponseError> {
    point.validate()?;
    let ResponsePoint { a, w, alpha, .. } = *point;
    let pa_plus = p_a(a, w)?;
    let pb_plus = p_b(a, w, alpha)?;
    Ok(ResponseSet {
        pa_plus,
        pa_minus: pa_plus + w / 8.0,
        pb_plus,
        pb_minus: pb_plus + alpha * w / 8.0,
        dp_ab: delta_p_ab(point)?,
    })
}
