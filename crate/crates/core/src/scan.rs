//! Parameter sweeps, table reproduction and the flat-file formats the CLI
//! reads and writes.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::{
    self, classify_scenarios, CycleAssessment, CycleError, EngineParams, EntangledState,
    ScenarioGrid, ScenarioRow, StateClass,
};
use crate::kinematics::MotionKind;
use crate::oracle::{Checkpoint, QuadratureConfig, TIntegration};
use crate::response::{self, singular_band, ResponsePoint, SINGULAR_BAND};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid scan spec: {0}")]
    InvalidSpec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "alpha_H")]
    AlphaH,
    #[serde(rename = "alpha_C")]
    AlphaC,
    #[serde(rename = "b2")]
    B2,
}

impl Param {
    pub const ALL: [Param; 5] = [Param::A, Param::W, Param::AlphaH, Param::AlphaC, Param::B2];

    pub fn name(self) -> &'static str {
        match self {
            Param::A => "A",
            Param::W => "W",
            Param::AlphaH => "alpha_H",
            Param::AlphaC => "alpha_C",
            Param::B2 => "b2",
        }
    }
}

impl std::str::FromStr for Param {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Param::A),
            "W" | "w" => Ok(Param::W),
            "alpha_H" | "alpha_h" | "alpha-h" => Ok(Param::AlphaH),
            "alpha_C" | "alpha_c" | "alpha-c" => Ok(Param::AlphaC),
            "b2" => Ok(Param::B2),
            other => Err(ScanError::InvalidSpec(format!(
                "unknown parameter `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Traces,
    EtaRatio,
    EtaE,
    Feasible,
}

impl Output {
    pub const ALL: [Output; 4] = [
        Output::Traces,
        Output::EtaRatio,
        Output::EtaE,
        Output::Feasible,
    ];

    fn columns(self) -> &'static [&'static str] {
        match self {
            Output::Traces => &["trace_work", "trace_heat_in", "trace_heat_out"],
            Output::EtaRatio => &["eta_ratio"],
            Output::EtaE => &["eta_E"],
            Output::Feasible => &["feasible"],
        }
    }
}

impl std::str::FromStr for Output {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "traces" => Ok(Output::Traces),
            "eta_ratio" => Ok(Output::EtaRatio),
            "eta_E" | "eta_e" => Ok(Output::EtaE),
            "feasible" => Ok(Output::Feasible),
            other => Err(ScanError::InvalidSpec(format!("unknown output `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    Range { min: f64, max: f64, steps: usize },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: Param,
    #[serde(flatten)]
    pub values: AxisValues,
}

impl Axis {
    /// Grid values in ascending order.
    pub fn points(&self) -> Vec<f64> {
        let mut v = match &self.values {
            AxisValues::Range { min, max, steps } => cycle::linspace(*min, *max, *steps),
            AxisValues::Explicit { values } => values.clone(),
        };
        v.sort_by(f64::total_cmp);
        v
    }

    fn describe(&self) -> String {
        match &self.values {
            AxisValues::Range { min, max, steps } => {
                format!(
                    "{}=linspace({}, {}, {})",
                    self.name.name(),
                    fmt_num(*min),
                    fmt_num(*max),
                    steps
                )
            }
            AxisValues::Explicit { values } => format!(
                "{}=[{}]",
                self.name.name(),
                values
                    .iter()
                    .map(|v| fmt_num(*v))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = ScanError;

    /// `name=min:max:steps` or `name=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| ScanError::InvalidSpec(format!("axis `{s}` needs name=...")))?;
        let name: Param = name.parse()?;
        let bad = |what: &str| ScanError::InvalidSpec(format!("axis `{s}`: {what}"));
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("range needs min:max:steps"));
            }
            AxisValues::Range {
                min: parts[0].trim().parse().map_err(|_| bad("bad min"))?,
                max: parts[1].trim().parse().map_err(|_| bad("bad max"))?,
                steps: parts[2].trim().parse().map_err(|_| bad("bad steps"))?,
            }
        } else {
            let values = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<Vec<_>, _>>()?;
            AxisValues::Explicit { values }
        };
        Ok(Axis { name, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axes: Vec<Axis>,
    pub fixed: BTreeMap<Param, f64>,
    pub motion: MotionKind,
    pub outputs: BTreeSet<Output>,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<(), ScanError> {
        let mut seen = BTreeSet::new();
        for axis in &self.axes {
            if !seen.insert(axis.name) {
                return Err(ScanError::InvalidSpec(format!(
                    "{} appears more than once",
                    axis.name.name()
                )));
            }
            let n = axis.points().len();
            if n < 2 {
                return Err(ScanError::InvalidSpec(format!(
                    "axis {} needs at least 2 steps",
                    axis.name.name()
                )));
            }
            if axis.points().iter().any(|v| !v.is_finite()) {
                return Err(ScanError::InvalidSpec(format!(
                    "axis {} has non-finite values",
                    axis.name.name()
                )));
            }
        }
        for p in self.fixed.keys() {
            if !seen.insert(*p) {
                return Err(ScanError::InvalidSpec(format!(
                    "{} is both an axis and fixed",
                    p.name()
                )));
            }
        }
        let missing: Vec<&str> = Param::ALL
            .iter()
            .filter(|p| !seen.contains(p))
            .map(|p| p.name())
            .collect();
        if !missing.is_empty() {
            return Err(ScanError::InvalidSpec(format!(
                "missing parameters: {}",
                missing.join(", ")
            )));
        }
        if self.outputs.is_empty() {
            return Err(ScanError::InvalidSpec("no outputs requested".into()));
        }
        Ok(())
    }

    fn columns(&self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = self.axes.iter().map(|a| a.name.name()).collect();
        for o in &self.outputs {
            cols.extend_from_slice(o.columns());
        }
        cols.push("masked");
        cols
    }
}

/// Why a grid point carries no outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaskReason {
    SingularBand(u32),
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub coords: Vec<f64>,
    pub result: Result<CycleAssessment, MaskReason>,
}

fn params_at(spec: &ScanSpec, coords: &[f64]) -> Result<EngineParams, MaskReason> {
    let mut values = spec.fixed.clone();
    for (axis, v) in spec.axes.iter().zip(coords) {
        values.insert(axis.name, *v);
    }
    let get = |p: Param| values[&p];
    let a = get(Param::A);
    if let Some(n) = singular_band(a) {
        return Err(MaskReason::SingularBand(n));
    }
    let state =
        EntangledState::from_b2(get(Param::B2)).map_err(|e| MaskReason::Invalid(e.to_string()))?;
    Ok(EngineParams {
        motion: spec.motion,
        a,
        w: get(Param::W),
        alpha_h: get(Param::AlphaH),
        alpha_c: get(Param::AlphaC),
        state,
    })
}

fn grid(spec: &ScanSpec) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = vec![vec![]];
    for axis in &spec.axes {
        let pts = axis.points();
        rows = rows
            .into_iter()
            .flat_map(|prefix| {
                pts.iter().map(move |v| {
                    let mut r = prefix.clone();
                    r.push(*v);
                    r
                })
            })
            .collect();
    }
    rows
}

pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, ScanError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| ScanError::Pool(e.to_string()))
}

/// Evaluates every grid point; rows come back in lexicographic axis order.
pub fn run_scan(spec: &ScanSpec, workers: Option<usize>) -> Result<Vec<ScanRow>, ScanError> {
    spec.validate()?;
    let points = grid(spec);
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| {
        points
            .into_par_iter()
            .map(|coords| {
                let result =
                    params_at(spec, &coords).and_then(|p| cycle::assess(&p).map_err(mask_from));
                ScanRow { coords, result }
            })
            .collect()
    }))
}

fn mask_from(e: CycleError) -> MaskReason {
    match e {
        CycleError::Response(response::ResponseError::NearSingularA { n, .. }) => {
            MaskReason::SingularBand(n)
        }
        other => MaskReason::Invalid(other.to_string()),
    }
}

/// Nine significant digits, shortest form.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    let mag = rounded.abs();
    if (1e-4..1e9).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn output_fields(outputs: &BTreeSet<Output>, a: Option<&CycleAssessment>) -> Vec<String> {
    let mut out = Vec::new();
    for o in outputs {
        match (o, a) {
            (Output::Traces, Some(a)) => {
                out.push(fmt_num(a.trace_work));
                out.push(fmt_num(a.trace_heat_in));
                out.push(fmt_num(a.trace_heat_out));
            }
            (Output::EtaRatio, Some(a)) => out.push(fmt_opt(a.eta_ratio)),
            (Output::EtaE, Some(a)) => out.push(fmt_opt(a.eta_e)),
            (Output::Feasible, Some(a)) => out.push(if a.feasible { "1" } else { "0" }.into()),
            (o, None) => out.extend(o.columns().iter().map(|_| String::new())),
        }
    }
    out
}

/// CSV text: `#` metadata lines, a header, then one line per grid point.
pub fn render_csv(spec: &ScanSpec, rows: &[ScanRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tool: unruh-otto {TOOL_VERSION}");
    let _ = writeln!(s, "# motion: {}", spec.motion);
    let axes: Vec<String> = spec.axes.iter().map(Axis::describe).collect();
    let _ = writeln!(s, "# grid: {}", axes.join("; "));
    let fixed: Vec<String> = spec
        .fixed
        .iter()
        .map(|(k, v)| format!("{}={}", k.name(), fmt_num(*v)))
        .collect();
    let _ = writeln!(s, "# fixed: {}", fixed.join("; "));
    let _ = writeln!(s, "# mask_bands: |A - 2*pi*n| < {SINGULAR_BAND} for n >= 1");
    let bands = rows
        .iter()
        .filter(|r| matches!(r.result, Err(MaskReason::SingularBand(_))))
        .count();
    let invalid = rows
        .iter()
        .filter(|r| matches!(r.result, Err(MaskReason::Invalid(_))))
        .count();
    let _ = writeln!(
        s,
        "# masked: {} singular band, {} invalid parameters",
        bands, invalid
    );
    let _ = writeln!(s, "{}", spec.columns().join(","));
    for row in rows {
        let mut fields: Vec<String> = row.coords.iter().map(|v| fmt_num(*v)).collect();
        fields.extend(output_fields(&spec.outputs, row.result.as_ref().ok()));
        fields.push(if row.result.is_ok() { "0" } else { "1" }.into());
        let _ = writeln!(s, "{}", fields.join(","));
    }
    s
}

pub fn render_scan_json(spec: &ScanSpec, rows: &[ScanRow]) -> serde_json::Value {
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (axis, v) in spec.axes.iter().zip(&row.coords) {
                obj.insert(axis.name.name().into(), serde_json::json!(v));
            }
            match &row.result {
                Ok(a) => {
                    obj.insert("masked".into(), serde_json::json!(false));
                    obj.insert(
                        "assessment".into(),
                        serde_json::to_value(a).unwrap_or_default(),
                    );
                }
                Err(reason) => {
                    obj.insert("masked".into(), serde_json::json!(true));
                    obj.insert(
                        "mask_reason".into(),
                        serde_json::to_value(reason).unwrap_or_default(),
                    );
                }
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::json!({ "spec": spec, "tool_version": TOOL_VERSION, "rows": items })
}

/// Human-readable dump of one assessment.
pub fn render_assessment_text(params: &EngineParams, a: &CycleAssessment) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "motion          {}", params.motion);
    let _ = writeln!(
        s,
        "A = {}  W = {}  alpha_H = {}  alpha_C = {}  b1 = {}  b2 = {}",
        fmt_num(params.a),
        fmt_num(params.w),
        fmt_num(params.alpha_h),
        fmt_num(params.alpha_c),
        fmt_num(params.state.b1),
        fmt_num(params.state.b2)
    );
    let _ = writeln!(s, "trace_work      {}", fmt_num(a.trace_work));
    let _ = writeln!(s, "trace_heat_in   {}", fmt_num(a.trace_heat_in));
    let _ = writeln!(s, "trace_heat_out  {}", fmt_num(a.trace_heat_out));
    let omega = match a.omega1_hat.value() {
        Some(v) => fmt_num(v),
        None => "undetermined".into(),
    };
    let _ = writeln!(s, "omega1_hat      {omega}");
    let _ = writeln!(
        s,
        "eta_ratio       {}",
        a.eta_ratio
            .map(fmt_num)
            .unwrap_or_else(|| "undefined".into())
    );
    let _ = writeln!(
        s,
        "eta_E           {}",
        a.eta_e.map(fmt_num).unwrap_or_else(|| "undefined".into())
    );
    let _ = writeln!(
        s,
        "energy_residual {}",
        a.energy_residual
            .map(fmt_num)
            .unwrap_or_else(|| "undefined".into())
    );
    let reasons: Vec<&str> = a.reasons.iter().map(|r| r.as_str()).collect();
    let _ = writeln!(s, "feasible        {}", a.feasible);
    let _ = writeln!(
        s,
        "reasons         {}",
        if reasons.is_empty() {
            "-".into()
        } else {
            reasons.join(", ")
        }
    );
    s
}

/// `(W, A, ε₀, trace)` reference rows at `alpha_H = 2`.
pub const REFERENCE_EPSILON0_ROWS: [(f64, f64, f64, f64); 10] = [
    (0.1, 10.0, 0.0104596, 4.62253e-5),
    (0.1, 20.0, 0.00546493, 2.41518e-5),
    (0.1, 30.0, 0.00367563, 1.62441e-5),
    (0.1, 40.0, 0.00276543, 1.22216e-5),
    (0.1, 50.0, 0.0022156, 9.79166e-6),
    (0.01, 10.0, 0.00104626, 4.62368e-7),
    (0.01, 20.0, 0.000546536, 2.41537e-7),
    (0.01, 30.0, 0.000367576, 1.62447e-7),
    (0.01, 40.0, 0.000276548, 1.22218e-7),
    (0.01, 50.0, 0.000221563, 9.7918e-8),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub w: f64,
    pub alpha_h: f64,
    pub a: f64,
    pub epsilon0: f64,
    pub epsilon0_reference: f64,
    pub trace: f64,
    pub trace_reference: f64,
    /// Full anti-parallel work trace at `b2 = 1/√2 + ε₀`.
    pub trace_exact: f64,
    pub epsilon0_pass: bool,
    pub trace_pass: bool,
}

/// Agreement to within half a unit in the fifth significant digit of `reference`.
pub fn matches_sig_figs(value: f64, reference: f64, digits: i32) -> bool {
    let unit = 10f64.powi(reference.abs().log10().floor() as i32 - (digits - 1));
    (value - reference).abs() <= 0.5 * unit
}

pub fn table1(alpha_h: f64) -> Result<Vec<Table1Row>, CycleError> {
    REFERENCE_EPSILON0_ROWS
        .iter()
        .map(|&(w, a, e_ref, t_ref)| {
            let e0 = cycle::epsilon0(a, w)?;
            let trace = cycle::trace_at_epsilon0(a, w)?;
            let point = ResponsePoint::new(a, w, alpha_h, MotionKind::AntiParallel)?;
            let resp = response::response_set(&point)?;
            let state = EntangledState::from_b2(FRAC_1_SQRT_2 + e0)?;
            let alpha_v = crate::kinematics::alpha_v_antiparallel(a);
            let trace_exact = cycle::trace_quantity(&resp, &state, alpha_v);
            Ok(Table1Row {
                w,
                alpha_h,
                a,
                epsilon0: e0,
                epsilon0_reference: e_ref,
                trace,
                trace_reference: t_ref,
                trace_exact,
                epsilon0_pass: matches_sig_figs(e0, e_ref, 5),
                trace_pass: ((trace - t_ref) / t_ref).abs() <= 1e-2,
            })
        })
        .collect()
}

pub fn render_table1_text(rows: &[Table1Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>7} {:>5}  {:>14} {:>14}  {:>14} {:>14} {:>14}  result",
        "W", "alpha_H", "A", "eps0", "eps0_ref", "trace", "trace_ref", "trace_exact"
    );
    for r in rows {
        let verdict = if r.epsilon0_pass && r.trace_pass {
            "pass"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            s,
            "{:>6} {:>7} {:>5}  {:>14} {:>14}  {:>14} {:>14} {:>14}  {}",
            fmt_num(r.w),
            fmt_num(r.alpha_h),
            fmt_num(r.a),
            fmt_num(r.epsilon0),
            fmt_num(r.epsilon0_reference),
            fmt_num(r.trace),
            fmt_num(r.trace_reference),
            fmt_num(r.trace_exact),
            verdict
        );
    }
    s
}

pub fn render_table1_csv(rows: &[Table1Row]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tool: unruh-otto {TOOL_VERSION}");
    let _ = writeln!(
        s,
        "# epsilon0 tolerance: 5 significant figures; trace tolerance: 1% relative"
    );
    let _ = writeln!(
        s,
        "W,alpha_H,A,eps0,eps0_ref,trace,trace_ref,trace_exact,eps0_pass,trace_pass"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_num(r.w),
            fmt_num(r.alpha_h),
            fmt_num(r.a),
            fmt_num(r.epsilon0),
            fmt_num(r.epsilon0_reference),
            fmt_num(r.trace),
            fmt_num(r.trace_reference),
            fmt_num(r.trace_exact),
            r.epsilon0_pass as u8,
            r.trace_pass as u8
        );
    }
    s
}

/// Expected verdicts: only non-maximal states in anti-parallel motion admit a cycle.
pub fn expected_scenario(motion: MotionKind, class: StateClass) -> bool {
    motion == MotionKind::AntiParallel && class == StateClass::NonMaximal
}

pub fn table2(grid: &ScenarioGrid, workers: Option<usize>) -> Result<Vec<ScenarioRow>, ScanError> {
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| classify_scenarios(grid)))
}

fn grid_provenance(grid: &ScenarioGrid) -> Vec<String> {
    let span = |v: &[f64]| match (v.first(), v.last()) {
        (Some(lo), Some(hi)) => format!("[{}, {}] x {}", fmt_num(*lo), fmt_num(*hi), v.len()),
        _ => "empty".into(),
    };
    let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ");
    vec![
        format!("A: {}", span(&grid.a_values)),
        format!("W: {}", span(&grid.w_values)),
        format!("alpha_H: {}", list(&grid.alpha_h_values)),
        format!("b2 (non-maximal): {}", list(&grid.non_maximal_b2)),
        "alpha_C: 0.5, 0.8 x alpha_H below one; 1 at one; 1.5, 2 x alpha_H above one".into(),
    ]
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

pub fn render_table2_text(grid: &ScenarioGrid, rows: &[ScenarioRow]) -> String {
    let mut s = String::new();
    for line in grid_provenance(grid) {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(
        s,
        "{:<14} {:<15} {:>8} {:>8} {:>9} {:>9} {:>7}  result",
        "motion", "state", "cycle", "expected", "evaluated", "feasible", "masked"
    );
    for r in rows {
        let expected = expected_scenario(r.motion, r.state_class);
        let _ = writeln!(
            s,
            "{:<14} {:<15} {:>8} {:>8} {:>9} {:>9} {:>7}  {}",
            r.motion.as_str(),
            r.state_class.label(),
            yes_no(r.any_feasible),
            yes_no(expected),
            r.evaluated,
            r.feasible_count,
            r.masked,
            if expected == r.any_feasible {
                "match"
            } else {
                "MISMATCH"
            }
        );
    }
    s
}

pub fn render_table2_csv(grid: &ScenarioGrid, rows: &[ScenarioRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tool: unruh-otto {TOOL_VERSION}");
    for line in grid_provenance(grid) {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "motion,state,cycle,expected,evaluated,feasible,masked");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.motion.as_str(),
            r.state_class.label(),
            yes_no(r.any_feasible),
            yes_no(expected_scenario(r.motion, r.state_class)),
            r.evaluated,
            r.feasible_count,
            r.masked
        );
    }
    s
}

/// Flat `key = value` settings; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ScanError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ScanError::Config(format!("line {}: expected key = value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ScanError> {
    v.parse()
        .map_err(|_| ScanError::Config(format!("{key}: cannot parse `{v}`")))
}

/// Applies `oracle.*` keys from a parsed config file.
pub fn apply_oracle_config(
    cfg: &mut QuadratureConfig,
    map: &BTreeMap<String, String>,
) -> Result<(), ScanError> {
    for (k, v) in map {
        let Some(key) = k.strip_prefix("oracle.") else {
            continue;
        };
        match key {
            "epsilon_schedule" => {
                cfg.epsilon_schedule = v
                    .split(',')
                    .map(|x| parse_value(k, x.trim()))
                    .collect::<Result<Vec<f64>, _>>()?
            }
            "n_max" => cfg.n_max = parse_value(k, v)?,
            "domain_half_width" => cfg.domain_half_width = parse_value(k, v)?,
            "abs_tol" => cfg.abs_tol = parse_value(k, v)?,
            "rel_tol" => cfg.rel_tol = parse_value(k, v)?,
            "t_integration" => {
                cfg.t_integration = match v.as_str() {
                    "numeric" => TIntegration::Numeric,
                    "analytic" => TIntegration::Analytic,
                    other => return Err(ScanError::Config(format!("{k}: unknown mode `{other}`"))),
                }
            }
            "image_tail" => cfg.image_tail = parse_value(k, v)?,
            other => return Err(ScanError::Config(format!("unknown key oracle.{other}"))),
        }
    }
    Ok(())
}

/// Checkpoints from a JSON array or from JSON lines.
pub fn parse_checkpoints(text: &str) -> Result<Vec<Checkpoint>, ScanError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed)
            .map_err(|e| ScanError::Config(format!("checkpoints: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| ScanError::Config(format!("checkpoints line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0104596123456), "-0.0104596123");
        assert_eq!(fmt_num(4.62253e-5), "4.62253e-5");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(123456789012.0), "1.23456789e11");
    }

    #[test]
    fn axis_parsing() {
        let a: Axis = "A=0.1:10:40".parse().unwrap();
        assert_eq!(a.points().len(), 40);
        let b: Axis = "b2=0.9,-0.9,0.5".parse().unwrap();
        assert_eq!(b.points(), vec![-0.9, 0.5, 0.9]);
        assert!("Q=1,2".parse::<Axis>().is_err());
        assert!("A=1:2".parse::<Axis>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ScanSpec {
            axes: vec!["A=0.5:2:4".parse().unwrap()],
            fixed: [
                (Param::W, 0.2),
                (Param::AlphaH, 0.2),
                (Param::AlphaC, 0.1),
                (Param::B2, 0.9),
            ]
            .into(),
            motion: MotionKind::AntiParallel,
            outputs: [Output::Traces].into(),
        };
        assert!(spec.validate().is_ok());
        spec.fixed.insert(Param::A, 1.0);
        assert!(spec.validate().is_err());
        spec.fixed.remove(&Param::A);
        spec.fixed.remove(&Param::B2);
        assert!(spec.validate().is_err());
        spec.fixed.insert(Param::B2, 0.9);
        spec.axes[0] = "A=1,1".parse().unwrap();
        assert!(spec.validate().is_ok());
        spec.axes[0] = "A=1".parse().unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sig_fig_rule() {
        assert!(matches_sig_figs(0.01045962, 0.0104596, 5));
        assert!(!matches_sig_figs(0.0104606, 0.0104596, 5));
    }

    #[test]
    fn config_file() {
        let map = parse_config("# comment\nworkers = 3\noracle.n_max = 50 # trailing\n\noracle.t_integration=analytic\n")
            .unwrap();
        assert_eq!(map["workers"], "3");
        let mut cfg = QuadratureConfig::default();
        apply_oracle_config(&mut cfg, &map).unwrap();
        assert_eq!(cfg.n_max, 50);
        assert_eq!(cfg.t_integration, TIntegration::Analytic);
        assert!(parse_config("novalue").is_err());
        let bad = parse_config("oracle.bogus = 1").unwrap();
        assert!(apply_oracle_config(&mut cfg, &bad).is_err());
    }

    #[test]
    fn checkpoint_formats() {
        let line = r#"{"kind":"pa_plus","A":1.0,"W":0.5,"alpha":1.0,"motion":"parallel"}"#;
        let lines = parse_checkpoints(&format!("{line}\n\n{line}\n")).unwrap();
        assert_eq!(lines.len(), 2);
        let array = parse_checkpoints(&format!("[{line}, {line}]")).unwrap();
        assert_eq!(array, lines);
        assert!(parse_checkpoints("{bad").is_err());
    }
}
