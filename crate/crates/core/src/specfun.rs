//! Lerch transcendent `Φ(z, s, a) = Σ_{k≥0} z^k / (k + a)^s` for real `0 ≤ z < 1`,
//! integer order `s ∈ {1, 2}` and real (possibly negative) offset `a`.
//!
//! The finitely many terms with `k + a ≤ 0` are summed on their own. The
//! remaining tail is monotone, so `|t_k|·z/(1−z)` bounds what is left after
//! term `k`. Above `z = 0.9` the tail is instead bracketed between the
//! Aitken estimate `t_k·r/(1−r)` (with `r = t_k/t_{k−1}`) and the geometric
//! bound, and the midpoint is returned.

use thiserror::Error;

/// Maximum number of series terms before giving up.
pub const TERM_BUDGET: usize = 10_000_000;

/// Distance from a non-positive integer below which the offset is singular.
pub const SINGULAR_OFFSET_TOL: f64 = 1e-9;

const ACCELERATION_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LerchArgs {
    pub z: f64,
    pub s: u32,
    pub a: f64,
}

impl LerchArgs {
    pub fn new(z: f64, s: u32, a: f64) -> Self {
        Self { z, s, a }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LerchError {
    #[error("offset a = {0} lies within 1e-9 of a non-positive integer")]
    SingularOffset(f64),
    #[error("no convergence after {terms} terms (relative error estimate {estimate:e})")]
    NoConvergence { terms: usize, estimate: f64 },
    #[error("invalid Lerch argument: {0}")]
    InvalidArgument(String),
}

/// A converged series value together with its error bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LerchValue {
    pub value: f64,
    /// Absolute error estimate of `value`.
    pub error: f64,
    pub terms: usize,
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// `Φ(z, s, a)` to estimated relative error `rel_tol`.
pub fn lerch_phi(args: LerchArgs, rel_tol: f64) -> Result<f64, LerchError> {
    lerch_phi_detailed(args, rel_tol).map(|v| v.value)
}

pub fn lerch_phi_detailed(args: LerchArgs, rel_tol: f64) -> Result<LerchValue, LerchError> {
    let LerchArgs { z, s, a } = args;
    if !(0.0..1.0).contains(&z) {
        return Err(LerchError::InvalidArgument(format!(
            "z = {z} outside [0, 1)"
        )));
    }
    if s != 1 && s != 2 {
        return Err(LerchError::InvalidArgument(format!(
            "order s = {s} not in {{1, 2}}"
        )));
    }
    if !a.is_finite() {
        return Err(LerchError::InvalidArgument(format!("offset a = {a}")));
    }
    if !(1e-14..=1e-3).contains(&rel_tol) {
        return Err(LerchError::InvalidArgument(format!(
            "rel_tol = {rel_tol:e} outside [1e-14, 1e-3]"
        )));
    }
    let nearest = a.round();
    if nearest <= 0.0 && (a - nearest).abs() < SINGULAR_OFFSET_TOL {
        return Err(LerchError::SingularOffset(a));
    }

    let term = |k: usize| -> f64 {
        let d = k as f64 + a;
        let pow = if s == 1 { d } else { d * d };
        z.powi(k as i32) / pow
    };

    // k + a <= 0
    let first_tail = if a > 0.0 {
        0
    } else {
        (-a).floor() as usize + 1
    };
    let mut head = Kahan::default();
    for k in 0..first_tail {
        head.add(term(k));
    }

    if z == 0.0 {
        let value = if first_tail == 0 {
            term(0)
        } else {
            head.value()
        };
        return Ok(LerchValue {
            value,
            error: 0.0,
            terms: 1,
        });
    }

    let accelerate = z > ACCELERATION_THRESHOLD;
    let geometric = z / (1.0 - z);
    let mut tail = Kahan::default();
    let mut prev = f64::NAN;
    let mut last_estimate = f64::INFINITY;
    let mut k = first_tail;
    while k < TERM_BUDGET {
        let t = term(k);
        tail.add(t);
        let partial = head.value() + tail.value();
        let upper = t * geometric;
        if accelerate && prev.is_finite() && prev > 0.0 {
            let r = t / prev;
            let lower = if r < 1.0 { t * r / (1.0 - r) } else { 0.0 };
            let value = partial + 0.5 * (upper + lower);
            let error = 0.5 * (upper - lower).abs();
            last_estimate = error / value.abs();
            if error <= rel_tol * value.abs() {
                return Ok(LerchValue {
                    value,
                    error,
                    terms: k + 1,
                });
            }
        } else {
            last_estimate = upper / partial.abs();
            if upper <= rel_tol * partial.abs() {
                return Ok(LerchValue {
                    value: partial,
                    error: upper,
                    terms: k + 1,
                });
            }
        }
        prev = t;
        k += 1;
    }
    Err(LerchError::NoConvergence {
        terms: TERM_BUDGET,
        estimate: last_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_argument_keeps_first_term() {
        assert_eq!(lerch_phi(LerchArgs::new(0.0, 2, 1.0), 1e-12).unwrap(), 1.0);
        assert_eq!(
            lerch_phi(LerchArgs::new(0.0, 1, -0.5), 1e-12).unwrap(),
            -2.0
        );
    }

    #[test]
    fn half_argument_order_two() {
        // 2·Li₂(1/2) = π²/6 − ln²2
        let expect = std::f64::consts::PI.powi(2) / 6.0 - std::f64::consts::LN_2.powi(2);
        let got = lerch_phi(LerchArgs::new(0.5, 2, 1.0), 1e-14).unwrap();
        assert!((got - expect).abs() < 1e-13, "{got}");
    }

    #[test]
    fn singular_offsets_rejected() {
        for a in [0.0, -1.0, -3.0 + 1e-10, 5e-10] {
            assert!(matches!(
                lerch_phi(LerchArgs::new(0.5, 1, a), 1e-10),
                Err(LerchError::SingularOffset(_))
            ));
        }
        assert!(lerch_phi(LerchArgs::new(0.5, 1, -1.0 + 1e-6), 1e-10).is_ok());
    }

    #[test]
    fn invalid_arguments() {
        assert!(lerch_phi(LerchArgs::new(1.0, 1, 1.0), 1e-10).is_err());
        assert!(lerch_phi(LerchArgs::new(0.5, 3, 1.0), 1e-10).is_err());
        assert!(lerch_phi(LerchArgs::new(0.5, 1, 1.0), 1e-16).is_err());
        assert!(lerch_phi(LerchArgs::new(0.5, 1, 1.0), 1e-2).is_err());
    }

    #[test]
    fn budget_exhaustion_reports_no_convergence() {
        let z = 1.0 - 1e-9;
        assert!(matches!(
            lerch_phi(LerchArgs::new(z, 1, 1.0), 1e-14),
            Err(LerchError::NoConvergence { .. })
        ));
    }
}
