//! Run time assurance (RTA) for control-affine systems.
//!
//! An untrusted primary controller proposes `u_des`; an RTA filter returns a
//! `u_act` that keeps the system inside its safety constraints. The crate
//! provides explicit and implicit Simplex and ASIF filters, with all needed
//! derivatives (barrier gradients, HOCBF Lie derivatives, closed-loop
//! Jacobians) computed by forward-mode automatic differentiation.
//!
//! The numerical core is generic over `f32`/`f64`; the aliases below fix it
//! to `f64`.

pub mod autodiff;
pub mod backup;
pub mod constraints;
pub mod dynamics;
pub mod filters;
pub mod lqr;
pub mod qp;
pub mod scalar;
pub mod scenario;

pub use scalar::{Number, Real};

pub type Dual64 = autodiff::Dual<f64>;
pub type Field64 = autodiff::DiffScalarField<f64>;
pub type Constraint64 = constraints::SafetyConstraint<f64>;
pub type Strengthening64 = constraints::Strengthening<f64>;
pub type CwDynamics64 = dynamics::CwDynamics<f64>;
pub type ControlBounds64 = backup::ControlBounds<f64>;
pub type LinearFeedback64 = backup::LinearFeedback<f64>;
pub type BackupTrajectory64 = backup::BackupTrajectory<f64>;
pub type BarrierRow64 = qp::BarrierRow<f64>;
pub type QpProblem64 = qp::QpProblem<f64>;
pub type FilterOutput64 = filters::FilterOutput<f64>;
pub type RtaModule64 = filters::RtaModule<f64>;
