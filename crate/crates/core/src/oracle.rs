//! Brute-force check of the closed-form responses.
//!
//! Each response is written as a double integral over the two proper times of
//! detector A, rotated to `T = τ + τ'` and `σ = τ − τ'` (Jacobian 1/2). The
//! Wightman kernels are regularized with `σ → σ − iε` and the result is
//! extrapolated to `ε → 0` from a decreasing schedule of regulators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{kappa_hat, KinematicsError, MotionKind, DEGENERACY_TOL};
use crate::quad::{break_points, integrate, AdaptiveOptions};
use crate::response::{self, ResponseError, ResponsePoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid quadrature config: {0}")]
    InvalidConfig(String),
    #[error("regulator extrapolation is not monotone: successive changes {changes:?}")]
    QuadratureDivergence { changes: Vec<f64> },
    #[error("imaginary residue {imag:e} exceeds 10·abs_tol")]
    ImaginaryResidue { imag: f64 },
    #[error("invalid oracle point: {0}")]
    InvalidPoint(String),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencySign {
    Plus,
    Minus,
}

impl FrequencySign {
    fn factor(self) -> f64 {
        match self {
            FrequencySign::Plus => 1.0,
            FrequencySign::Minus => -1.0,
        }
    }
}

/// How the `T` direction of the double integral is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TIntegration {
    /// Adaptive quadrature over the finite window.
    Numeric,
    /// Closed-form integral over the whole real line.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub epsilon_schedule: Vec<f64>,
    pub n_max: usize,
    /// Proper-time cutoff `L`: both times range over `[−L, L]`.
    pub domain_half_width: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_integration: TIntegration,
    /// Add the asymptotic remainder of the truncated image sum.
    pub image_tail: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            epsilon_schedule: vec![0.05, 0.025, 0.0125],
            n_max: 200,
            domain_half_width: 20.0,
            abs_tol: 1e-6,
            rel_tol: 1e-2,
            t_integration: TIntegration::Numeric,
            image_tail: true,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let eps = &self.epsilon_schedule;
        if eps.len() < 2 {
            return Err(OracleError::InvalidConfig(
                "need at least two regulator values".into(),
            ));
        }
        if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(OracleError::InvalidConfig(
                "regulators must be positive".into(),
            ));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(OracleError::InvalidConfig(
                "regulators must strictly decrease".into(),
            ));
        }
        if self.n_max < 10 {
            return Err(OracleError::InvalidConfig(format!(
                "n_max = {} below 10",
                self.n_max
            )));
        }
        if !(self.domain_half_width >= 5.0 && self.domain_half_width.is_finite()) {
            return Err(OracleError::InvalidConfig(format!(
                "domain half width {} below 5",
                self.domain_half_width
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(OracleError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub closed_form: f64,
    pub oracle_value: f64,
    pub est_quadrature_error: f64,
    pub rel_deviation: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn compare(closed_form: f64, estimate: OracleEstimate, cfg: &QuadratureConfig) -> Self {
        let diff = (closed_form - estimate.value).abs();
        // a vanishing closed form is judged on abs_tol alone
        let rel_deviation = if closed_form != 0.0 {
            diff / closed_form.abs()
        } else if diff > 0.0 {
            1.0
        } else {
            0.0
        };
        Self {
            closed_form,
            oracle_value: estimate.value,
            est_quadrature_error: estimate.error,
            rel_deviation,
            pass: rel_deviation <= cfg.rel_tol || diff <= cfg.abs_tol,
        }
    }
}

/// Extrapolated quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub error: f64,
}

fn lorentzian(tau: f64, half_width: f64) -> f64 {
    half_width * half_width / (tau * tau + half_width * half_width)
}

/// Image sum `−(1/4π²) Σ_{|n|≤N} (σ − iε − 2πin/A)^{−2}` of a uniformly
/// accelerated detector, in units of its interaction time.
pub fn wightman_single(sigma_hat: f64, a: f64, epsilon: f64, n_max: usize) -> Complex64 {
    let x = Complex64::new(sigma_hat, -epsilon);
    let spacing = 2.0 * PI / a;
    let mut sum = (x * x).inv();
    for n in (1..=n_max).rev() {
        let shift = Complex64::new(0.0, spacing * n as f64);
        sum += ((x - shift) * (x - shift)).inv() + ((x + shift) * (x + shift)).inv();
    }
    -sum / (4.0 * PI * PI)
}

/// Remainder `−(1/4π²) Σ_{|n|>N} (x − 2πin/A)^{−2}` by the midpoint integral
/// `∫_{N+1/2}^∞`, which is `2M/(x² + c²M²)` with `c = 2π/A`, `M = N + 1/2`.
pub fn wightman_single_tail(sigma_hat: f64, a: f64, epsilon: f64, n_max: usize) -> Complex64 {
    let x = Complex64::new(sigma_hat, -epsilon);
    let c = 2.0 * PI / a;
    let m = n_max as f64 + 0.5;
    let pair_sum = -2.0 * m / (x * x + c * c * m * m);
    -pair_sum / (4.0 * PI * PI)
}

/// `1/sinh(u)` without overflow for large `|Re u|`.
fn inv_sinh(u: Complex64) -> Complex64 {
    if u.re.abs() < 20.0 {
        return u.sinh().inv();
    }
    let s = u.re.signum();
    let e = (-s * u).exp();
    2.0 * s * e / (1.0 - e * e)
}

fn inv_cosh(u: Complex64) -> Complex64 {
    if u.re.abs() < 20.0 {
        return u.cosh().inv();
    }
    let s = u.re.signum();
    let e = (-s * u).exp();
    2.0 * e / (1.0 + e * e)
}

fn separation(motion: MotionKind, alpha: f64, a: f64) -> Result<f64, KinematicsError> {
    match (motion, (alpha - 1.0).abs() < DEGENERACY_TOL) {
        (MotionKind::AntiParallel, true) => Ok(0.0),
        _ => Ok(kappa_hat(alpha)? / a),
    }
}

/// Cross-detector kernel as a function of `σ = τ_A − τ_A'` after B's proper
/// time has been mapped onto A's.
pub fn wightman_cross(
    motion: MotionKind,
    sigma_hat: f64,
    a: f64,
    alpha: f64,
    epsilon: f64,
) -> Result<Complex64, KinematicsError> {
    let k = separation(motion, alpha, a)?;
    let x = Complex64::new(sigma_hat, -epsilon);
    let scale = a * a / alpha / (16.0 * PI * PI);
    let u = 0.5 * a * (x - k);
    let v = 0.5 * a * (x + k);
    Ok(match motion {
        MotionKind::Parallel => -scale * inv_sinh(u) * inv_sinh(v),
        MotionKind::AntiParallel => scale * inv_cosh(u) * inv_cosh(v),
    })
}

/// Lagrange extrapolation of `values(ε)` to `ε = 0`.
fn extrapolate(eps: &[f64], values: &[Complex64]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (i, (&ei, &vi)) in eps.iter().zip(values).enumerate() {
        let mut weight = 1.0;
        for (j, &ej) in eps.iter().enumerate() {
            if i != j {
                weight *= ej / (ej - ei);
            }
        }
        total += vi * weight;
    }
    total
}

fn extrapolation_weight_norm(eps: &[f64]) -> f64 {
    (0..eps.len())
        .map(|i| {
            eps.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &ej)| (ej / (ej - eps[i])).abs())
                .product::<f64>()
        })
        .sum()
}

/// Integrand pieces of one response integral
/// `½ ∫∫ dT dσ χχ(T, σ) e^{i(p_T T + p_σ σ)} K(σ)`.
struct DoubleIntegral<'a> {
    /// Switching product at `(T, σ)`.
    switching: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    kernel: &'a (dyn Fn(f64, f64) -> Complex64 + Sync),
    p_t: f64,
    p_sigma: f64,
    /// Real parts of kernel poles on the σ axis.
    poles: Vec<f64>,
}

fn t_integral_analytic(sigma: f64, k: f64) -> f64 {
    // ∫ dT e^{ikT} / (((T+σ)² + 1)((T−σ)² + 1))
    let kk = k.abs();
    let sinc = if sigma.abs() < 1e-8 {
        kk * (1.0 - (kk * sigma).powi(2) / 6.0)
    } else {
        (kk * sigma).sin() / sigma
    };
    PI * (-kk).exp() * ((k * sigma).cos() + sinc) / (2.0 * (sigma * sigma + 1.0))
}

fn evaluate(job: &DoubleIntegral<'_>, epsilon: f64, cfg: &QuadratureConfig) -> (Complex64, f64) {
    let reach = 2.0 * cfg.domain_half_width;
    let inner_opts = AdaptiveOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 400,
    };
    let outer_opts = AdaptiveOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_intervals: 20_000,
    };
    let t_part = |sigma: f64| -> Complex64 {
        match cfg.t_integration {
            TIntegration::Analytic => Complex64::new(t_integral_analytic(sigma, job.p_t), 0.0),
            TIntegration::Numeric => {
                let half = reach - sigma.abs();
                if half <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let pts = break_points(-half, half, [-sigma, 0.0, sigma]);
                integrate(
                    |t| Complex64::new(0.0, job.p_t * t).exp() * (job.switching)(t, sigma),
                    &pts,
                    inner_opts,
                )
                .value
            }
        }
    };
    let integrand = |sigma: f64| -> Complex64 {
        0.5 * Complex64::new(0.0, job.p_sigma * sigma).exp()
            * (job.kernel)(sigma, epsilon)
            * t_part(sigma)
    };
    let mut interior = Vec::new();
    for &p in &job.poles {
        interior.push(p);
        for m in [1.0, 4.0, 16.0] {
            interior.push(p - m * epsilon);
            interior.push(p + m * epsilon);
        }
    }
    let pts = break_points(-reach, reach, interior);
    let r = integrate(integrand, &pts, outer_opts);
    (r.value, r.error)
}

fn run(job: &DoubleIntegral<'_>, cfg: &QuadratureConfig) -> Result<OracleEstimate, OracleError> {
    cfg.validate()?;
    let eps = &cfg.epsilon_schedule;
    let samples: Vec<(Complex64, f64)> = eps.iter().map(|&e| evaluate(job, e, cfg)).collect();
    let values: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
    let quad_error = samples.iter().map(|s| s.1).fold(0.0, f64::max);

    let full = extrapolate(eps, &values);
    let n = eps.len();
    let reduced = extrapolate(&eps[1..], &values[1..]);
    let error = (full - reduced).norm() + extrapolation_weight_norm(eps) * quad_error;

    let changes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let floor = cfg.abs_tol.max(cfg.rel_tol * full.norm()) * 0.1;
    if n >= 3 && changes.windows(2).any(|c| c[1] > c[0] && c[1] > floor) {
        return Err(OracleError::QuadratureDivergence { changes });
    }
    if full.im.abs() > 10.0 * cfg.abs_tol {
        return Err(OracleError::ImaginaryResidue { imag: full.im });
    }
    Ok(OracleEstimate {
        value: full.re,
        error,
    })
}

fn single_estimate(
    detector: Detector,
    sign: FrequencySign,
    point: &ResponsePoint,
    cfg: &QuadratureConfig,
) -> Result<OracleEstimate, OracleError> {
    let ResponsePoint {
        a,
        w,
        alpha,
        motion,
    } = *point;
    if !(a > 0.0 && w > 0.0 && alpha > 0.0) {
        return Err(OracleError::InvalidPoint(format!(
            "A = {a}, W = {w}, alpha = {alpha}"
        )));
    }
    let n_max = cfg.n_max;
    let tail = cfg.image_tail;
    let image_kernel = move |dt: f64, acc: f64, eps: f64| {
        let mut g = wightman_single(dt, acc, eps, n_max);
        if tail {
            g += wightman_single_tail(dt, acc, eps, n_max);
        }
        g
    };
    // B's proper time runs as ±α times A's, with switching half-width α/2.
    let (clock, jacobian, accel, half_width) = match detector {
        Detector::A => (1.0, 1.0, a, 0.5),
        Detector::B => {
            let orient = if motion == MotionKind::Parallel {
                1.0
            } else {
                -1.0
            };
            (orient * alpha, alpha * alpha, a / alpha, 0.5 * alpha)
        }
    };
    let switching = move |t: f64, s: f64| {
        lorentzian(clock * 0.5 * (t + s), half_width)
            * lorentzian(clock * 0.5 * (t - s), half_width)
    };
    let kernel = move |s: f64, eps: f64| jacobian * image_kernel(clock * s, accel, eps).conj();
    let omega = sign.factor() * w;
    let job = DoubleIntegral {
        switching: &switching,
        kernel: &kernel,
        p_t: 0.0,
        p_sigma: omega * clock,
        poles: vec![0.0],
    };
    run(&job, cfg)
}

/// Quadrature check of one single-detector response.
pub fn oracle_p_single(
    detector: Detector,
    sign: FrequencySign,
    point: &ResponsePoint,
    cfg: &QuadratureConfig,
) -> Result<OracleReport, OracleError> {
    let estimate = single_estimate(detector, sign, point, cfg)?;
    let ResponsePoint { a, w, alpha, .. } = *point;
    let closed = match (detector, sign) {
        (Detector::A, FrequencySign::Plus) => response::p_a(a, w)?,
        (Detector::A, FrequencySign::Minus) => response::p_a_neg(a, w)?,
        (Detector::B, FrequencySign::Plus) => response::p_b(a, w, alpha)?,
        (Detector::B, FrequencySign::Minus) => response::p_b_neg(a, w, alpha)?,
    };
    Ok(OracleReport::compare(closed, estimate, cfg))
}

fn cross_estimate(
    point: &ResponsePoint,
    cfg: &QuadratureConfig,
) -> Result<OracleEstimate, OracleError> {
    let ResponsePoint {
        a,
        w,
        alpha,
        motion,
    } = *point;
    if !(a > 0.0 && w > 0.0 && alpha > 0.0) {
        return Err(OracleError::InvalidPoint(format!(
            "A = {a}, W = {w}, alpha = {alpha}"
        )));
    }
    let k = separation(motion, alpha, a)?;
    let orient = if motion == MotionKind::Parallel {
        1.0
    } else {
        -1.0
    };
    // χ_A(τ_A) χ_B(±α τ_A')
    let switching = move |t: f64, s: f64| {
        lorentzian(0.5 * (t + s), 0.5) * lorentzian(orient * alpha * 0.5 * (t - s), 0.5 * alpha)
    };
    let kernel = move |s: f64, eps: f64| {
        alpha
            * wightman_cross(motion, s, a, alpha, eps)
                .expect("separation checked")
                .conj()
    };
    // ω(τ_A − τ_B') = ω[(1 − sα)T + (1 + sα)σ]/2
    let estimate = |sign: f64| {
        let job = DoubleIntegral {
            switching: &switching,
            kernel: &kernel,
            p_t: sign * w * (1.0 - orient * alpha) / 2.0,
            p_sigma: sign * w * (1.0 + orient * alpha) / 2.0,
            poles: vec![-k, 0.0, k],
        };
        run(&job, cfg)
    };
    let plus = estimate(1.0)?;
    let minus = estimate(-1.0)?;
    Ok(OracleEstimate {
        value: plus.value - minus.value,
        error: plus.error + minus.error,
    })
}

/// Quadrature check of the cross-detector difference.
pub fn oracle_delta_p_ab(
    point: &ResponsePoint,
    cfg: &QuadratureConfig,
) -> Result<OracleReport, OracleError> {
    let estimate = cross_estimate(point, cfg)?;
    let closed = response::delta_p_ab(point)?;
    Ok(OracleReport::compare(closed, estimate, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    PaPlus,
    PaMinus,
    PbPlus,
    PbMinus,
    DpAb,
}

impl ResponseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseKind::PaPlus => "pa_plus",
            ResponseKind::PaMinus => "pa_minus",
            ResponseKind::PbPlus => "pb_plus",
            ResponseKind::PbMinus => "pb_minus",
            ResponseKind::DpAb => "dp_ab",
        }
    }
}

/// One point of an oracle batch. `closed_form`, when present, replaces the
/// library value in the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: ResponseKind,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub alpha: f64,
    pub motion: MotionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

impl Checkpoint {
    pub fn new(kind: ResponseKind, a: f64, w: f64, alpha: f64, motion: MotionKind) -> Self {
        Self {
            kind,
            a,
            w,
            alpha,
            motion,
            closed_form: None,
        }
    }

    pub fn point(&self) -> ResponsePoint {
        ResponsePoint {
            a: self.a,
            w: self.w,
            alpha: self.alpha,
            motion: self.motion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub alpha: f64,
    pub motion: MotionKind,
}

/// One line of an oracle batch report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub point: PointRecord,
    pub kind: ResponseKind,
    pub closed_form: f64,
    pub oracle_value: f64,
    pub est_error: f64,
    pub rel_dev: f64,
    pub pass: bool,
}

pub fn oracle_estimate(
    cp: &Checkpoint,
    cfg: &QuadratureConfig,
) -> Result<OracleEstimate, OracleError> {
    let point = cp.point();
    match cp.kind {
        ResponseKind::PaPlus => single_estimate(Detector::A, FrequencySign::Plus, &point, cfg),
        ResponseKind::PaMinus => single_estimate(Detector::A, FrequencySign::Minus, &point, cfg),
        ResponseKind::PbPlus => single_estimate(Detector::B, FrequencySign::Plus, &point, cfg),
        ResponseKind::PbMinus => single_estimate(Detector::B, FrequencySign::Minus, &point, cfg),
        ResponseKind::DpAb => cross_estimate(&point, cfg),
    }
}

pub fn closed_form(cp: &Checkpoint) -> Result<f64, OracleError> {
    let ResponsePoint { a, w, alpha, .. } = cp.point();
    Ok(match cp.kind {
        ResponseKind::PaPlus => response::p_a(a, w)?,
        ResponseKind::PaMinus => response::p_a_neg(a, w)?,
        ResponseKind::PbPlus => response::p_b(a, w, alpha)?,
        ResponseKind::PbMinus => response::p_b_neg(a, w, alpha)?,
        ResponseKind::DpAb => response::delta_p_ab(&cp.point())?,
    })
}

pub fn run_checkpoint(
    cp: &Checkpoint,
    cfg: &QuadratureConfig,
) -> Result<OracleRecord, OracleError> {
    let closed = match cp.closed_form {
        Some(v) => v,
        None => closed_form(cp)?,
    };
    let report = OracleReport::compare(closed, oracle_estimate(cp, cfg)?, cfg);
    Ok(OracleRecord {
        point: PointRecord {
            a: cp.a,
            w: cp.w,
            alpha: cp.alpha,
            motion: cp.motion,
        },
        kind: cp.kind,
        closed_form: report.closed_form,
        oracle_value: report.oracle_value,
        est_error: report.est_quadrature_error,
        rel_dev: report.rel_deviation,
        pass: report.pass,
    })
}

/// Runs a batch concurrently; results keep the input order.
pub fn run_batch(
    points: &[Checkpoint],
    cfg: &QuadratureConfig,
) -> Vec<Result<OracleRecord, OracleError>> {
    points
        .par_iter()
        .map(|cp| run_checkpoint(cp, cfg))
        .collect()
}

/// Twelve checkpoints covering all four single responses and both branches of
/// the parallel cross difference.
pub fn builtin_checkpoints() -> Vec<Checkpoint> {
    use MotionKind::*;
    use ResponseKind::*;
    vec![
        Checkpoint::new(PaPlus, 0.5, 0.2, 1.0, Parallel),
        Checkpoint::new(PaMinus, 0.5, 0.2, 1.0, Parallel),
        Checkpoint::new(PaPlus, 5.0, 0.2, 1.0, AntiParallel),
        Checkpoint::new(PaMinus, 3.0, 1.0, 1.0, AntiParallel),
        Checkpoint::new(PbPlus, 5.0, 0.2, 0.2, Parallel),
        Checkpoint::new(PbMinus, 5.0, 0.2, 0.2, Parallel),
        Checkpoint::new(PbPlus, 1.0, 0.5, 2.0, AntiParallel),
        Checkpoint::new(PbMinus, 0.5, 0.2, 2.0, AntiParallel),
        Checkpoint::new(DpAb, 1.0, 0.5, 0.5, Parallel),
        Checkpoint::new(DpAb, 1.0, 0.5, 2.0, Parallel),
        Checkpoint::new(DpAb, 5.0, 0.2, 0.2, Parallel),
        Checkpoint::new(DpAb, 3.0, 1.0, 5.0, Parallel),
    ]
}

/// Anti-parallel cross differences, which vanish identically.
pub fn antiparallel_checkpoints() -> Vec<Checkpoint> {
    use MotionKind::AntiParallel;
    use ResponseKind::DpAb;
    vec![
        Checkpoint::new(DpAb, 0.5, 0.1, 0.2, AntiParallel),
        Checkpoint::new(DpAb, 0.5, 1.0, 1.0, AntiParallel),
        Checkpoint::new(DpAb, 0.5, 0.1, 5.0, AntiParallel),
        Checkpoint::new(DpAb, 5.0, 1.0, 0.2, AntiParallel),
        Checkpoint::new(DpAb, 5.0, 0.1, 1.0, AntiParallel),
        Checkpoint::new(DpAb, 5.0, 1.0, 5.0, AntiParallel),
    ]
}
