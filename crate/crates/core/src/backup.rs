//! Backup controllers and backup-trajectory generation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::autodiff::{check_dim, AdError, AdResult, Scalar};
use crate::dynamics::{ControlAffineDynamics, DynamicsError};
use crate::scalar::Real;

/// Box `𝒰 = [lower, upper]` on the control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> ControlBounds<T> {
    pub fn symmetric(u_max: T, dim: usize) -> Self {
        Self {
            lower: vec![-u_max; dim],
            upper: vec![u_max; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[T]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp_to(*lo, *hi))
            .collect()
    }
}

/// Named real arrays owned by a controller, with one snapshot slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InternalState<T> {
    values: BTreeMap<String, Vec<T>>,
    saved: Option<BTreeMap<String, Vec<T>>>,
}

impl<T: Clone> InternalState<T> {
    pub fn get(&self, key: &str) -> Option<&[T]> {
        self.values.get(key).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut Vec<T>> {
        self.values.get_mut(key)
    }

    pub fn set(&mut self, key: impl Into<String>, value: Vec<T>) {
        self.values.insert(key.into(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn save(&mut self) {
        self.saved = Some(self.values.clone());
    }

    /// Restores the last snapshot. Returns false when nothing was saved.
    pub fn restore(&mut self) -> bool {
        match self.saved.take() {
            Some(v) => {
                self.values = v;
                true
            }
            None => false,
        }
    }
}

/// A control law `u_b(x, t)` that drives the system toward a backup set.
///
/// `control` returns the raw law; callers go through [`saturated_control`]
/// or [`backup_control`], which clamp it to [`BackupController::bounds`].
pub trait BackupController<T: Real>: Send {
    fn control_dim(&self) -> usize;
    fn bounds(&self) -> &ControlBounds<T>;
    fn control<S: Scalar<T>>(&self, x: &[S], t: T) -> AdResult<Vec<S>>;
    fn internal_state(&self) -> &InternalState<T>;
    fn internal_state_mut(&mut self) -> &mut InternalState<T>;

    /// Updates internal state after `u` was held from `x` for `dt` seconds.
    fn advance(&mut self, _x: &[T], _u: &[T], _t: T, _dt: T) {}
}

/// `u_b(x, t)` clamped componentwise to the controller's bounds, in any
/// scalar type. Saturated components carry a zero derivative.
pub fn saturated_control<T, B, S>(ctrl: &B, x: &[S], t: T) -> AdResult<Vec<S>>
where
    T: Real,
    B: BackupController<T> + ?Sized,
    S: Scalar<T>,
{
    let raw = ctrl.control(x, t)?;
    check_dim(ctrl.control_dim(), raw.len())?;
    let b = ctrl.bounds();
    Ok(raw
        .into_iter()
        .zip(b.lower.iter().zip(&b.upper))
        .map(|(v, (lo, hi))| v.clamp_to(*lo, *hi))
        .collect())
}

pub fn backup_control<T, B>(ctrl: &B, x: &[T], t: T) -> AdResult<Vec<T>>
where
    T: Real,
    B: BackupController<T> + ?Sized,
{
    saturated_control(ctrl, x, t)
}

/// Saturated linear feedback `u = −K·(x − x_ref)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedback<T> {
    /// Row-major `control_dim × state_dim`.
    gain: Vec<T>,
    reference: Vec<T>,
    bounds: ControlBounds<T>,
    state: InternalState<T>,
}

impl<T: Real> LinearFeedback<T> {
    pub fn new(gain: Vec<T>, reference: Vec<T>, bounds: ControlBounds<T>) -> AdResult<Self> {
        let m = bounds.dim();
        if m == 0 || gain.len() != m * reference.len() {
            return Err(AdError::DimensionMismatch {
                expected: m * reference.len(),
                got: gain.len(),
            });
        }
        Ok(Self {
            gain,
            reference,
            bounds,
            state: InternalState::default(),
        })
    }

    pub fn gain(&self) -> &[T] {
        &self.gain
    }

    pub fn state_dim(&self) -> usize {
        self.reference.len()
    }
}

impl<T: Real> BackupController<T> for LinearFeedback<T> {
    fn control_dim(&self) -> usize {
        self.bounds.dim()
    }

    fn bounds(&self) -> &ControlBounds<T> {
        &self.bounds
    }

    fn control<S: Scalar<T>>(&self, x: &[S], _t: T) -> AdResult<Vec<S>> {
        let n = self.state_dim();
        check_dim(n, x.len())?;
        Ok(self
            .gain
            .chunks_exact(n)
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.reference))
                    .filter(|(k, _)| **k != T::zero())
                    .fold(S::zero(), |acc, (k, (xi, ri))| {
                        acc - S::from_base(*k) * (*xi - S::from_base(*ri))
                    })
            })
            .collect())
    }

    fn internal_state(&self) -> &InternalState<T> {
        &self.state
    }

    fn internal_state_mut(&mut self) -> &mut InternalState<T> {
        &mut self.state
    }
}

/// States `x(j·dt)` for `j = 0..=horizon/dt` under the backup law.
#[derive(Debug, Clone, PartialEq)]
pub struct BackupTrajectory<T> {
    pub states: Vec<Vec<T>>,
    /// Control applied from `states[j]`; one shorter than `states`.
    pub controls: Vec<Vec<T>>,
    pub dt: T,
    pub horizon: T,
}

impl<T> BackupTrajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackupError<T: std::fmt::Debug> {
    #[error("horizon must be a positive integer multiple of a positive step")]
    InvalidHorizon,
    #[error("backup control failed at step {step}: {source}")]
    Control { step: usize, source: AdError },
    #[error("backup propagation failed at step {step}: {source}")]
    Propagation {
        step: usize,
        source: DynamicsError,
        partial: BackupTrajectory<T>,
    },
}

/// Number of backup steps, `horizon / dt`, when that ratio is a positive integer.
pub fn horizon_steps<T: Real>(horizon: T, dt: T) -> Option<usize> {
    if !(horizon > T::zero()) || !(dt > T::zero()) || !horizon.all_finite() {
        return None;
    }
    let ratio = (horizon / dt).to_f64_lossy();
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
        return None;
    }
    Some(steps as usize)
}

/// Forward-simulates the backup closed loop from `x0`.
///
/// The controller's internal state is saved before and restored after, so the
/// live controller sees no change.
pub fn compute_backup_trajectory<T, D, B>(
    dynamics: &D,
    ctrl: &mut B,
    x0: &[T],
    t0: T,
    horizon: T,
    dt: T,
) -> Result<BackupTrajectory<T>, BackupError<T>>
where
    T: Real,
    D: ControlAffineDynamics<T> + ?Sized,
    B: BackupController<T> + ?Sized,
{
    let steps = horizon_steps(horizon, dt).ok_or(BackupError::InvalidHorizon)?;
    ctrl.internal_state_mut().save();
    let result = roll_out(dynamics, ctrl, x0, t0, steps, dt, horizon);
    ctrl.internal_state_mut().restore();
    result
}

fn roll_out<T, D, B>(
    dynamics: &D,
    ctrl: &mut B,
    x0: &[T],
    t0: T,
    steps: usize,
    dt: T,
    horizon: T,
) -> Result<BackupTrajectory<T>, BackupError<T>>
where
    T: Real,
    D: ControlAffineDynamics<T> + ?Sized,
    B: BackupController<T> + ?Sized,
{
    let mut traj = BackupTrajectory {
        states: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps),
        dt,
        horizon,
    };
    traj.states.push(x0.to_vec());
    for j in 0..steps {
        let t = t0 + T::from_usize_lossy(j) * dt;
        let x = &traj.states[j];
        let u = backup_control(ctrl, x, t).map_err(|source| BackupError::Control { step: j, source })?;
        match dynamics.propagate(x, &u, dt) {
            Ok(next) => {
                ctrl.advance(x, &u, t, dt);
                traj.controls.push(u);
                traj.states.push(next);
            }
            Err(source) => {
                return Err(BackupError::Propagation {
                    step: j,
                    source,
                    partial: traj,
                })
            }
        }
    }
    Ok(traj)
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::dynamics::testing::DoubleIntegrator;
    use crate::dynamics::{cw_system, CwParams};

    fn cw1() -> crate::dynamics::CwDynamics<f64> {
        cw_system(CwParams {
            mean_motion: 0.001027,
            mass: 12.0,
            num_deputies: 1,
            controlled_index: 0,
        })
        .unwrap()
    }

    #[test]
    fn zero_controller_outputs_zero() {
        let c = ZeroController::new(3);
        assert_eq!(backup_control(&c, &[5.0; 6], 0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_feedback_equilibrium_and_saturation() {
        let mut k = vec![0.0; 3 * 6];
        k[0] = 5.0; // 5 N per metre on x
        let c = LinearFeedback::new(k, vec![0.0; 6], ControlBounds::symmetric(1.0, 3)).unwrap();
        assert_eq!(backup_control(&c, &[0.0; 6], 0.0).unwrap(), vec![0.0; 3]);
        assert_eq!(
            backup_control(&c, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap(),
            vec![-1.0, 0.0, 0.0]
        );
        assert_eq!(
            backup_control(&c, &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn save_restore_is_bitwise() {
        let mut s = InternalState::default();
        s.set("a", vec![0.1, 0.2]);
        let before = s.clone();
        s.save();
        s.get_mut("a").unwrap()[0] = 9.0;
        s.set("b", vec![1.0]);
        assert!(s.restore());
        assert_eq!(s.get("a"), before.get("a"));
        assert!(s.get("b").is_none());
        assert!(!s.restore());
    }

    #[test]
    fn zero_trajectory_from_origin() {
        let mut c = ZeroController::new(3);
        let tr = compute_backup_trajectory(&cw1(), &mut c, &[0.0; 6], 0.0, 10.0, 1.0).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states.iter().all(|s| s.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_step_horizon_has_two_states() {
        let mut c = ZeroController::new(3);
        let tr = compute_backup_trajectory(&cw1(), &mut c, &[1.0; 6], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.states[0], vec![1.0; 6]);
    }

    #[test]
    fn invalid_horizons() {
        let mut c = ZeroController::new(3);
        for (h, dt) in [(0.0, 1.0), (1.0, 0.0), (2.5, 1.0), (-3.0, 1.0)] {
            assert_eq!(
                compute_backup_trajectory(&cw1(), &mut c, &[0.0; 6], 0.0, h, dt),
                Err(BackupError::InvalidHorizon)
            );
        }
    }

    #[test]
    fn internal_state_is_restored_and_runs_are_repeatable() {
        let mut c = IntegralController::new();
        let x0 = [1.0, 0.0];
        let a = compute_backup_trajectory(&DoubleIntegrator, &mut c, &x0, 0.0, 20.0, 1.0).unwrap();
        assert_eq!(c.state.get("integral").unwrap(), &[0.0]);
        let b = compute_backup_trajectory(&DoubleIntegrator, &mut c, &x0, 0.0, 20.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.controls.iter().all(|u| c.bounds.contains(u)));
    }

    #[test]
    fn propagation_failure_returns_partial_trajectory() {
        use crate::dynamics::ExternalPropagation;
        let dyns = ExternalPropagation {
            model: DoubleIntegrator,
            propagator: |x: &[f64], _u: &[f64], _dt: f64| {
                if x[0] > 2.5 {
                    Err(DynamicsError::NonFinite)
                } else {
                    Ok(vec![x[0] + 1.0, x[1]])
                }
            },
        };
        let mut c = IntegralController::new();
        match compute_backup_trajectory(&dyns, &mut c, &[0.0, 0.0], 0.0, 10.0, 1.0) {
            Err(BackupError::Propagation { step, partial, .. }) => {
                assert_eq!(step, 3);
                assert_eq!(partial.states.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(c.state.get("integral").unwrap(), &[0.0]);
    }
}
