//! Numerics for an entangled two-detector quantum Otto engine driven by the
//! Unruh effect: closed-form detector responses, cycle feasibility and
//! efficiency, and a quadrature oracle that re-derives the responses from
//! their defining integrals.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle;
pub mod kinematics;
pub mod oracle;
pub mod quad;
pub mod response;
pub mod scan;
pub mod specfun;

pub use cycle::{assess, CycleAssessment, EngineParams, EntangledState};
pub use kinematics::MotionKind;
pub use response::{response_set, ResponsePoint, ResponseSet};
