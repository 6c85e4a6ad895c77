//! Stage traces, feasibility and efficiency of the entangled Otto cycle.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{
    solve_omega1_hat, stage_alphas, KinematicsError, MotionKind, StageAlphas, DEGENERACY_TOL,
};
use crate::response::{self, singular_band, ResponseError, ResponsePoint, ResponseSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("state is not normalized: b1² + b2² = {norm}")]
    Normalization { norm: f64 },
    #[error("invalid engine parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Real amplitudes of `b1|e_A g_B⟩ + b2|g_A e_B⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntangledState {
    pub b1: f64,
    pub b2: f64,
}

impl EntangledState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(b1: f64, b2: f64) -> Result<Self, CycleError> {
        let norm = b1 * b1 + b2 * b2;
        if !((norm - 1.0).abs() <= Self::NORM_TOL) {
            return Err(CycleError::Normalization { norm });
        }
        Ok(Self { b1, b2 })
    }

    /// State with the given `b2` and non-negative `b1`.
    pub fn from_b2(b2: f64) -> Result<Self, CycleError> {
        if !(b2.abs() <= 1.0) {
            return Err(CycleError::Normalization { norm: b2 * b2 });
        }
        Self::new((1.0 - b2 * b2).sqrt(), b2)
    }

    pub fn symmetric() -> Self {
        Self {
            b1: FRAC_1_SQRT_2,
            b2: FRAC_1_SQRT_2,
        }
    }

    pub fn antisymmetric() -> Self {
        Self {
            b1: FRAC_1_SQRT_2,
            b2: -FRAC_1_SQRT_2,
        }
    }

    pub fn class(&self) -> StateClass {
        if (self.b1.abs() - FRAC_1_SQRT_2).abs() < 1e-12
            && (self.b2.abs() - FRAC_1_SQRT_2).abs() < 1e-12
        {
            if self.b1 * self.b2 > 0.0 {
                StateClass::Symmetric
            } else {
                StateClass::AntiSymmetric
            }
        } else {
            StateClass::NonMaximal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateClass {
    Symmetric,
    AntiSymmetric,
    NonMaximal,
}

impl StateClass {
    pub const ALL: [StateClass; 3] = [
        StateClass::Symmetric,
        StateClass::AntiSymmetric,
        StateClass::NonMaximal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StateClass::Symmetric => "symmetric",
            StateClass::AntiSymmetric => "anti-symmetric",
            StateClass::NonMaximal => "non-maximal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub motion: MotionKind,
    pub a: f64,
    pub w: f64,
    pub alpha_h: f64,
    pub alpha_c: f64,
    pub state: EntangledState,
}

impl EngineParams {
    pub fn validate(&self) -> Result<(), CycleError> {
        ResponsePoint::new(self.a, self.w, self.alpha_h, self.motion)?;
        EntangledState::new(self.state.b1, self.state.b2)?;
        if !(self.alpha_c > 0.0 && self.alpha_c.is_finite()) {
            return Err(CycleError::InvalidParams(format!(
                "alpha_C = {} must be positive",
                self.alpha_c
            )));
        }
        let side = |x: f64| {
            if (x - 1.0).abs() < DEGENERACY_TOL {
                0
            } else if x < 1.0 {
                -1
            } else {
                1
            }
        };
        if side(self.alpha_h) != side(self.alpha_c) {
            return Err(CycleError::InvalidParams(format!(
                "alpha_C = {} must lie on the same side of one as alpha_H = {}",
                self.alpha_c, self.alpha_h
            )));
        }
        Ok(())
    }

    pub fn response_point(&self) -> ResponsePoint {
        ResponsePoint {
            a: self.a,
            w: self.w,
            alpha: self.alpha_h,
            motion: self.motion,
        }
    }
}

/// Dimensionless lower energy gap `ω₁T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Omega1 {
    Determined(f64),
    /// Both acceleration ratios are one, so energy balance places no constraint.
    Undetermined,
}

impl Omega1 {
    pub fn value(self) -> Option<f64> {
        match self {
            Omega1::Determined(v) => Some(v),
            Omega1::Undetermined => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reason {
    WorkNonPositive,
    HeatInNonPositive,
    HeatOutNonPositive,
    Omega1Invalid,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::WorkNonPositive => "WorkNonPositive",
            Reason::HeatInNonPositive => "HeatInNonPositive",
            Reason::HeatOutNonPositive => "HeatOutNonPositive",
            Reason::Omega1Invalid => "Omega1Invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAssessment {
    pub trace_work: f64,
    pub trace_heat_in: f64,
    pub trace_heat_out: f64,
    pub omega1_hat: Omega1,
    /// `η_E/η₀`; absent when the heat-in trace is not positive.
    pub eta_ratio: Option<f64>,
    pub eta_e: Option<f64>,
    pub feasible: bool,
    pub reasons: BTreeSet<Reason>,
    /// `W·Q_in − ω₁·Q_out − (W − ω₁)·work`, when `ω₁` is determined.
    pub energy_residual: Option<f64>,
    pub stage_alphas: StageAlphas,
    pub responses: ResponseSet,
}

/// Multiple of machine epsilon times the summed term magnitudes below which a
/// trace counts as zero.
pub const ROUNDOFF_GUARD: f64 = 64.0;

/// Trace of the second-order state change against `h_α` for signed clock ratio `alpha_signed`.
pub fn trace_quantity(resp: &ResponseSet, state: &EntangledState, alpha_signed: f64) -> f64 {
    let EntangledState { b1, b2 } = *state;
    let cross = b1 * b2 * resp.dp_ab;
    let terms = [
        b2 * b2 * resp.pa_plus,
        -b1 * b1 * resp.pa_minus,
        cross,
        alpha_signed * b1 * b1 * resp.pb_plus,
        -alpha_signed * b2 * b2 * resp.pb_minus,
        alpha_signed * cross,
    ];
    let sum: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    // exact cancellations (Bell states at unit ratio) would otherwise leave a random sign
    if sum.abs() <= ROUNDOFF_GUARD * f64::EPSILON * scale {
        0.0
    } else {
        sum
    }
}

pub fn assess(params: &EngineParams) -> Result<CycleAssessment, CycleError> {
    params.validate()?;
    let resp = response::response_set(&params.response_point())?;
    Ok(assess_with(params, resp))
}

/// Assessment from an already evaluated response set.
pub fn assess_with(params: &EngineParams, resp: ResponseSet) -> CycleAssessment {
    let alphas = stage_alphas(params.motion, params.alpha_h, params.alpha_c, params.a);
    let state = &params.state;
    let trace_work = trace_quantity(&resp, state, alphas.alpha_v);
    let trace_heat_in = trace_quantity(&resp, state, alphas.alpha_heat_signed);
    let trace_heat_out = trace_quantity(&resp, state, alphas.alpha_cool_signed);

    let omega1_hat = match solve_omega1_hat(params.w, params.alpha_h, params.alpha_c) {
        Ok(v) => Omega1::Determined(v),
        Err(KinematicsError::UnderdeterminedOmega1) => Omega1::Undetermined,
        // ratios on opposite sides are rejected by validation; keep the sign for the gate below
        Err(_) => Omega1::Determined(params.w * (params.alpha_h - 1.0) / (params.alpha_c - 1.0)),
    };

    let mut reasons = BTreeSet::new();
    if !(trace_work > 0.0) {
        reasons.insert(Reason::WorkNonPositive);
    }
    if !(trace_heat_in > 0.0) {
        reasons.insert(Reason::HeatInNonPositive);
    }
    if !(trace_heat_out > 0.0) {
        reasons.insert(Reason::HeatOutNonPositive);
    }
    if let Omega1::Determined(w1) = omega1_hat {
        if !(w1 > 0.0 && w1 < params.w) {
            reasons.insert(Reason::Omega1Invalid);
        }
    }

    let eta_ratio = (trace_heat_in > 0.0).then(|| trace_work / trace_heat_in);
    let eta_e = match (eta_ratio, omega1_hat) {
        (Some(r), Omega1::Determined(w1)) => Some((1.0 - w1 / params.w) * r),
        _ => None,
    };
    let energy_residual = omega1_hat
        .value()
        .map(|w1| params.w * trace_heat_in - w1 * trace_heat_out - (params.w - w1) * trace_work);

    CycleAssessment {
        trace_work,
        trace_heat_in,
        trace_heat_out,
        omega1_hat,
        eta_ratio,
        eta_e,
        feasible: reasons.is_empty(),
        reasons,
        energy_residual,
        stage_alphas: alphas,
        responses: resp,
    }
}

/// Smallest deviation of `b2` from `1/√2` at which the work trace turns positive.
pub fn epsilon0(a: f64, w: f64) -> Result<f64, CycleError> {
    let plus = response::p_a(a, w)?;
    let minus = plus + w / 8.0;
    Ok((w / 8.0) / (2.0 * std::f64::consts::SQRT_2 * (plus + minus)))
}

/// Work trace at `b2 = 1/√2 + ε₀`, to second order in `ε₀`.
///
/// Only detector A's part is kept; the other part is weighted by the clock
/// ratio, which is exponentially small in `A`.
pub fn trace_at_epsilon0(a: f64, w: f64) -> Result<f64, CycleError> {
    let plus = response::p_a(a, w)?;
    let minus = plus + w / 8.0;
    let e0 = (w / 8.0) / (2.0 * std::f64::consts::SQRT_2 * (plus + minus));
    Ok(e0 * e0 * (plus + minus))
}

/// Grid searched by [`classify_scenarios`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub a_values: Vec<f64>,
    pub w_values: Vec<f64>,
    pub alpha_h_values: Vec<f64>,
    /// `b2` values tried for non-maximal states.
    pub non_maximal_b2: Vec<f64>,
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            a_values: linspace(0.1, 10.0, 40),
            w_values: linspace(0.05, 2.0, 40),
            alpha_h_values: vec![0.2, 0.5, 1.0, 1.2, 1.5, 2.0],
            non_maximal_b2: vec![0.9, -0.9],
        }
    }
}

/// Cooling ratios paired with a heating ratio: on the same side of one and
/// farther from it, so that `0 < ω₁ < W`.
pub fn compliant_alpha_c(alpha_h: f64) -> Vec<f64> {
    if (alpha_h - 1.0).abs() < DEGENERACY_TOL {
        vec![1.0]
    } else if alpha_h < 1.0 {
        vec![0.5 * alpha_h, 0.8 * alpha_h]
    } else {
        vec![1.5 * alpha_h, 2.0 * alpha_h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub motion: MotionKind,
    pub state_class: StateClass,
    pub any_feasible: bool,
    pub evaluated: usize,
    pub feasible_count: usize,
    /// Points skipped because `A` sits in an excluded band.
    pub masked: usize,
    /// Feasible configuration with the largest work trace, if any.
    pub best: Option<EngineParams>,
}

fn states_for(class: StateClass, grid: &ScenarioGrid) -> Vec<EntangledState> {
    match class {
        StateClass::Symmetric => vec![EntangledState::symmetric()],
        StateClass::AntiSymmetric => vec![EntangledState::antisymmetric()],
        StateClass::NonMaximal => grid
            .non_maximal_b2
            .iter()
            .filter_map(|&b2| EntangledState::from_b2(b2).ok())
            .collect(),
    }
}

/// Evaluated count, feasible count and best feasible point for one grid point.
type PointTally = (usize, usize, Option<(f64, EngineParams)>);

fn classify_row(motion: MotionKind, class: StateClass, grid: &ScenarioGrid) -> ScenarioRow {
    let states = states_for(class, grid);
    let mut points = Vec::new();
    for &a in &grid.a_values {
        for &w in &grid.w_values {
            for &alpha_h in &grid.alpha_h_values {
                points.push((a, w, alpha_h));
            }
        }
    }
    let masked = points
        .iter()
        .filter(|(a, _, _)| singular_band(*a).is_some())
        .count();
    let outcomes: Vec<PointTally> = points
        .par_iter()
        .filter(|(a, _, _)| singular_band(*a).is_none())
        .map(|&(a, w, alpha_h)| {
            let point = ResponsePoint {
                a,
                w,
                alpha: alpha_h,
                motion,
            };
            let Ok(resp) = response::response_set(&point) else {
                return (0, 0, None);
            };
            let mut evaluated = 0;
            let mut feasible = 0;
            let mut best: Option<(f64, EngineParams)> = None;
            for alpha_c in compliant_alpha_c(alpha_h) {
                for state in &states {
                    let params = EngineParams {
                        motion,
                        a,
                        w,
                        alpha_h,
                        alpha_c,
                        state: *state,
                    };
                    let out = assess_with(&params, resp);
                    evaluated += 1;
                    if out.feasible {
                        feasible += 1;
                        if best.is_none_or(|(t, _)| out.trace_work > t) {
                            best = Some((out.trace_work, params));
                        }
                    }
                }
            }
            (evaluated, feasible, best)
        })
        .collect();
    let mut row = ScenarioRow {
        motion,
        state_class: class,
        any_feasible: false,
        evaluated: 0,
        feasible_count: 0,
        masked,
        best: None,
    };
    let mut best_trace = f64::NEG_INFINITY;
    for (evaluated, feasible, best) in outcomes {
        row.evaluated += evaluated;
        row.feasible_count += feasible;
        if let Some((t, p)) = best {
            if t > best_trace {
                best_trace = t;
                row.best = Some(p);
            }
        }
    }
    row.any_feasible = row.feasible_count > 0;
    row
}

/// One row per (motion, state class), in a fixed order.
pub fn classify_scenarios(grid: &ScenarioGrid) -> Vec<ScenarioRow> {
    let mut rows = Vec::new();
    for motion in MotionKind::ALL {
        for class in StateClass::ALL {
            rows.push(classify_row(motion, class, grid));
        }
    }
    rows
}
