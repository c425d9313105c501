//! The four constraint-based RTA filters, the standard module wrapper and
//! cascading.
//!
//! Each filter maps `(x, u_des)` to a `u_act` inside the admissible box:
//!
//! * explicit Simplex: one-step prediction under `u_des`, fall back to `u_b(x)`
//!   if any `h_i(x⁺) < 0`;
//! * implicit Simplex: as above, but the check runs along the backup
//!   trajectory from `x⁺`;
//! * explicit ASIF: QP with one barrier row per constraint;
//! * implicit ASIF: QP with barrier rows sampled along the backup trajectory.

mod barrier;

pub use barrier::{
    build_explicit_barrier_rows, build_implicit_barrier_rows, propagate_sensitivity, retained_points,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AdError;
use crate::backup::{self, BackupController, BackupError, ControlBounds};
use crate::constraints::{ConstraintError, SafetyConstraint};
use crate::dynamics::{ControlAffineDynamics, DynamicsError};
use crate::qp::{self, QpError, QpProblem, QpStatus};
use crate::scalar::Real;

/// `‖u_act − u_des‖∞` above which a filter counts as intervening.
pub const INTERVENTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("backup controller: {0}")]
    Backup(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("sensitivity matrix became non-finite at trajectory point {step}")]
    Sensitivity { step: usize },
    #[error("backup horizon must be a positive multiple of the backup step")]
    InvalidHorizon,
    #[error("a cascade needs at least one module")]
    EmptyCascade,
}

impl From<AdError> for FilterError {
    fn from(e: AdError) -> Self {
        FilterError::Dynamics(DynamicsError::Ad(e))
    }
}

impl<T: Real> From<BackupError<T>> for FilterError {
    fn from(e: BackupError<T>) -> Self {
        match e {
            BackupError::InvalidHorizon => FilterError::InvalidHorizon,
            other => FilterError::Backup(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    ExplicitSimplex,
    ImplicitSimplex,
    ExplicitAsif,
    ImplicitAsif,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::ExplicitSimplex,
        FilterKind::ImplicitSimplex,
        FilterKind::ExplicitAsif,
        FilterKind::ImplicitAsif,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::ExplicitSimplex => "explicit-simplex",
            FilterKind::ImplicitSimplex => "implicit-simplex",
            FilterKind::ExplicitAsif => "explicit-asif",
            FilterKind::ImplicitAsif => "implicit-asif",
        }
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self, FilterKind::ImplicitSimplex | FilterKind::ImplicitAsif)
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown filter `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings<T> {
    /// Simplex prediction interval.
    pub dt: T,
    /// Backup trajectory horizon `T`.
    pub horizon: T,
    /// Backup trajectory step `dt_b`.
    pub backup_dt: T,
    /// Keep every `stride`-th backup point for implicit ASIF rows.
    pub stride: usize,
    /// Also keep local minima of each constraint along the backup trajectory.
    pub include_minima: bool,
    /// Penalty on the squared slack when the QP is relaxed.
    pub slack_weight: T,
}

impl<T: Real> FilterSettings<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            horizon: T::lit(500.0),
            backup_dt: T::one(),
            stride: 5,
            include_minima: true,
            slack_weight: T::lit(qp::SLACK_WEIGHT),
        }
    }
}

/// Result of one filter call.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput<T> {
    pub u_act: Vec<T>,
    pub intervening: bool,
    /// Set by the ASIF filters.
    pub qp_status: Option<QpStatus>,
    pub slack: T,
    /// The Simplex filters switched to the backup controller.
    pub backup_used: bool,
}

pub fn is_intervening<T: Real>(u_act: &[T], u_des: &[T]) -> bool {
    u_act.len() != u_des.len()
        || u_act
            .iter()
            .zip(u_des)
            .any(|(a, d)| !((*a - *d).abs() <= T::lit(INTERVENTION_TOL)))
}

/// The filtering core shared by every RTA implementation.
pub trait RtaFilter<T: Real>: Send {
    fn control_dim(&self) -> usize;
    fn bounds(&self) -> &ControlBounds<T>;
    fn filter(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError>;
}

/// A constraint-based filter: dynamics, constraints, backup controller and
/// admissible box, applied with one of the four [`FilterKind`]s.
///
/// For the explicit filters `constraints` are the control-invariant `h_i`;
/// for the implicit ones they are the allowable-set `φ_i`.
pub struct ConstraintFilter<T: Real, D, B> {
    pub kind: FilterKind,
    pub dynamics: Arc<D>,
    pub constraints: Vec<SafetyConstraint<T>>,
    pub backup: B,
    pub bounds: ControlBounds<T>,
    pub settings: FilterSettings<T>,
}

impl<T, D, B> ConstraintFilter<T, D, B>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    pub fn new(
        kind: FilterKind,
        dynamics: Arc<D>,
        constraints: Vec<SafetyConstraint<T>>,
        backup: B,
        bounds: ControlBounds<T>,
        settings: FilterSettings<T>,
    ) -> Self {
        Self {
            kind,
            dynamics,
            constraints,
            backup,
            bounds,
            settings,
        }
    }

    fn check(&self, x: &[T], u_des: &[T]) -> Result<(), FilterError> {
        let n = self.dynamics.state_dim();
        let m = self.bounds.dim();
        if x.len() != n {
            return Err(FilterError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if u_des.len() != m {
            return Err(FilterError::DimensionMismatch {
                expected: m,
                got: u_des.len(),
            });
        }
        Ok(())
    }

    fn backup_output(&self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        let u_b = self.bounds.clamp(&backup::backup_control(&self.backup, x, t)?);
        Ok(FilterOutput {
            intervening: is_intervening(&u_b, u_des),
            u_act: u_b,
            qp_status: None,
            slack: T::zero(),
            backup_used: true,
        })
    }

    fn simplex_output(&self, x: &[T], u_des: &[T], t: T, safe: bool) -> Result<FilterOutput<T>, FilterError> {
        if safe {
            let u = self.bounds.clamp(u_des);
            Ok(FilterOutput {
                intervening: is_intervening(&u, u_des),
                u_act: u,
                qp_status: None,
                slack: T::zero(),
                backup_used: false,
            })
        } else {
            self.backup_output(x, u_des, t)
        }
    }

    /// `u_des` (clipped to the box) if every `h_i` holds one prediction step
    /// ahead, otherwise `u_b(x)`.
    pub fn explicit_simplex(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        self.check(x, u_des)?;
        let u = self.bounds.clamp(u_des);
        let safe = match self.dynamics.propagate(x, &u, self.settings.dt) {
            Ok(next) => self.all_nonnegative(&next)?,
            Err(e) => {
                warn!("explicit simplex: prediction failed ({e}); using backup");
                false
            }
        };
        self.simplex_output(x, u_des, t, safe)
    }

    /// `u_des` if the backup trajectory from the predicted next state stays in
    /// the allowable set over the whole horizon, otherwise `u_b(x)`.
    pub fn implicit_simplex(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        self.check(x, u_des)?;
        backup::horizon_steps(self.settings.horizon, self.settings.backup_dt)
            .ok_or(FilterError::InvalidHorizon)?;
        let u = self.bounds.clamp(u_des);
        let safe = match self.dynamics.propagate(x, &u, self.settings.dt) {
            Ok(next) => {
                match backup::compute_backup_trajectory(
                    &*self.dynamics,
                    &mut self.backup,
                    &next,
                    t + self.settings.dt,
                    self.settings.horizon,
                    self.settings.backup_dt,
                ) {
                    Ok(traj) => {
                        let mut ok = true;
                        for s in &traj.states {
                            if !self.all_nonnegative(s)? {
                                ok = false;
                                break;
                            }
                        }
                        ok
                    }
                    Err(BackupError::InvalidHorizon) => return Err(FilterError::InvalidHorizon),
                    Err(e) => {
                        warn!("implicit simplex: backup trajectory failed ({e}); using backup");
                        false
                    }
                }
            }
            Err(e) => {
                warn!("implicit simplex: prediction failed ({e}); using backup");
                false
            }
        };
        self.simplex_output(x, u_des, t, safe)
    }

    fn all_nonnegative(&self, x: &[T]) -> Result<bool, FilterError> {
        for c in &self.constraints {
            if !(c.evaluate(x)? >= T::zero()) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn solve_rows(&self, u_des: &[T], rows: Vec<qp::BarrierRow<T>>) -> Result<FilterOutput<T>, FilterError> {
        let problem = QpProblem::new(
            u_des.to_vec(),
            self.bounds.lower.clone(),
            self.bounds.upper.clone(),
        )
        .with_rows(rows);
        let sol = qp::solve_with_weight(&problem, self.settings.slack_weight)?;
        match sol.status {
            QpStatus::Relaxed => warn!("{}: QP relaxed, slack {:?}", self.kind, sol.slack),
            QpStatus::InfeasibleBox => warn!("{}: empty control box", self.kind),
            QpStatus::Optimal => debug!("{}: QP optimal", self.kind),
        }
        Ok(FilterOutput {
            intervening: is_intervening(&sol.u, u_des),
            u_act: sol.u,
            qp_status: Some(sol.status),
            slack: sol.slack,
            backup_used: false,
        })
    }

    /// Minimally modifies `u_des` so that every explicit barrier row holds.
    pub fn explicit_asif(&mut self, x: &[T], u_des: &[T], _t: T) -> Result<FilterOutput<T>, FilterError> {
        self.check(x, u_des)?;
        let rows = build_explicit_barrier_rows(x, &self.constraints, &*self.dynamics)?;
        self.solve_rows(u_des, rows)
    }

    /// Minimally modifies `u_des` so that the barrier rows along the backup
    /// trajectory from `x` hold.
    pub fn implicit_asif(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        self.check(x, u_des)?;
        let traj = backup::compute_backup_trajectory(
            &*self.dynamics,
            &mut self.backup,
            x,
            t,
            self.settings.horizon,
            self.settings.backup_dt,
        )?;
        let rows = build_implicit_barrier_rows(
            x,
            &traj,
            t,
            &self.constraints,
            &*self.dynamics,
            &self.backup,
            self.settings.stride,
            self.settings.include_minima,
        )?;
        self.solve_rows(u_des, rows)
    }
}

impl<T, D, B> RtaFilter<T> for ConstraintFilter<T, D, B>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    fn control_dim(&self) -> usize {
        self.bounds.dim()
    }

    fn bounds(&self) -> &ControlBounds<T> {
        &self.bounds
    }

    fn filter(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        match self.kind {
            FilterKind::ExplicitSimplex => self.explicit_simplex(x, u_des, t),
            FilterKind::ImplicitSimplex => self.implicit_simplex(x, u_des, t),
            FilterKind::ExplicitAsif => self.explicit_asif(x, u_des, t),
            FilterKind::ImplicitAsif => self.implicit_asif(x, u_des, t),
        }
    }
}

pub type StateConverter<T, X> = Box<dyn Fn(&X) -> Vec<T> + Send + Sync>;

/// The standard RTA interface: converts the system state to an RTA state and
/// passes it with `u_des` to the filter core.
pub struct RtaModule<T: Real, X: ?Sized = [T]> {
    converter: StateConverter<T, X>,
    core: Box<dyn RtaFilter<T>>,
    intervening: bool,
    last: Option<FilterOutput<T>>,
}

impl<T: Real> RtaModule<T, [T]> {
    /// Module whose system state already is the RTA state.
    pub fn new(core: Box<dyn RtaFilter<T>>) -> Self {
        Self::with_converter(Box::new(|x: &[T]| x.to_vec()), core)
    }
}

impl<T: Real, X: ?Sized> RtaModule<T, X> {
    pub fn with_converter(converter: StateConverter<T, X>, core: Box<dyn RtaFilter<T>>) -> Self {
        Self {
            converter,
            core,
            intervening: false,
            last: None,
        }
    }

    pub fn filter(&mut self, x_sys: &X, u_des: &[T], t: T) -> Result<Vec<T>, FilterError> {
        let x_rta = (self.converter)(x_sys);
        let out = self.core.filter(&x_rta, u_des, t)?;
        self.intervening = out.intervening;
        let u = out.u_act.clone();
        self.last = Some(out);
        Ok(u)
    }

    /// Whether the last call changed `u_des`.
    pub fn intervening(&self) -> bool {
        self.intervening
    }

    pub fn last_output(&self) -> Option<&FilterOutput<T>> {
        self.last.as_ref()
    }

    pub fn bounds(&self) -> &ControlBounds<T> {
        self.core.bounds()
    }
}

/// Runs the modules in order, each one's output becoming the next one's
/// desired action. The last module has the highest priority.
pub fn cascaded_filter<T: Real, X: ?Sized>(
    modules: &mut [RtaModule<T, X>],
    x_sys: &X,
    u_des: &[T],
    t: T,
) -> Result<Vec<T>, FilterError> {
    if modules.is_empty() {
        return Err(FilterError::EmptyCascade);
    }
    let mut u = u_des.to_vec();
    for m in modules.iter_mut() {
        u = m.filter(x_sys, &u, t)?;
    }
    Ok(u)
}

/// A cascade usable wherever a single filter core is expected.
pub struct Cascade<T: Real> {
    modules: Vec<RtaModule<T>>,
}

impl<T: Real> Cascade<T> {
    pub fn new(modules: Vec<RtaModule<T>>) -> Result<Self, FilterError> {
        if modules.is_empty() {
            return Err(FilterError::EmptyCascade);
        }
        Ok(Self { modules })
    }

    pub fn modules(&self) -> &[RtaModule<T>] {
        &self.modules
    }
}

impl<T: Real> RtaFilter<T> for Cascade<T> {
    fn control_dim(&self) -> usize {
        self.bounds().dim()
    }

    fn bounds(&self) -> &ControlBounds<T> {
        self.modules[self.modules.len() - 1].bounds()
    }

    fn filter(&mut self, x: &[T], u_des: &[T], t: T) -> Result<FilterOutput<T>, FilterError> {
        let u = cascaded_filter(&mut self.modules, x, u_des, t)?;
        let last = self.modules[self.modules.len() - 1].last_output();
        Ok(FilterOutput {
            intervening: is_intervening(&u, u_des),
            qp_status: last.and_then(|o| o.qp_status),
            slack: last.map_or(T::zero(), |o| o.slack),
            backup_used: self
                .modules
                .iter()
                .any(|m| m.last_output().is_some_and(|o| o.backup_used)),
            u_act: u,
        })
    }
}
