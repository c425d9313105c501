//! Barrier-row construction for the ASIF filters.
//!
//! Every derivative here is a directional one (`∇h·w` for a handful of
//! vectors `w`), so a row costs `m + 1` forward passes instead of a full
//! gradient.

use crate::autodiff::{self, Scalar};
use crate::backup::{BackupController, BackupTrajectory};
use crate::constraints::SafetyConstraint;
use crate::dynamics::{ClosedLoop, ControlAffineDynamics};
use crate::qp::{BarrierRow, RowSource};
use crate::scalar::Real;

use super::FilterError;

/// `f(x)` followed by the columns of `g(x)`.
pub(crate) fn drift_and_input_columns<T, D>(dynamics: &D, x: &[T]) -> Result<Vec<Vec<T>>, FilterError>
where
    T: Real,
    D: ControlAffineDynamics<T> + ?Sized,
{
    let n = dynamics.state_dim();
    let m = dynamics.control_dim();
    if x.len() != n {
        return Err(FilterError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let f = dynamics.drift(x).map_err(crate::dynamics::DynamicsError::from)?;
    let g = dynamics
        .input_matrix(x)
        .map_err(crate::dynamics::DynamicsError::from)?;
    let mut out = Vec::with_capacity(m + 1);
    out.push(f);
    for k in 0..m {
        out.push((0..n).map(|i| g[i * m + k]).collect());
    }
    Ok(out)
}

/// `(h(x), [∇h(x)·w for w in dirs])`.
fn value_and_directionals<T: Real>(
    c: &SafetyConstraint<T>,
    x: &[T],
    dirs: &[Vec<T>],
) -> Result<(T, Vec<T>), FilterError> {
    let mut value = T::zero();
    let mut ders = Vec::with_capacity(dirs.len());
    for w in dirs {
        let (v, d) = <T as Scalar<T>>::directional(c.h.as_dyn(), x, w).map_err(|e| c.error(e))?;
        if !v.all_finite() || !d.all_finite() {
            return Err(c
                .error(autodiff::AdError::Domain("non-finite barrier term".into()))
                .into());
        }
        value = v;
        ders.push(d);
    }
    Ok((value, ders))
}

/// Row `c·u ≥ d` from `h`, `∇h·f`-like drift term and `∇h·g_k` terms.
fn row_from_terms<T: Real>(
    c: &SafetyConstraint<T>,
    value: T,
    ders: &[T],
    point: Option<usize>,
) -> Result<BarrierRow<T>, FilterError> {
    let alpha = c.alpha.eval(value).map_err(|e| c.error(e))?;
    Ok(BarrierRow {
        coeff: ders[1..].to_vec(),
        offset: -(ders[0] + alpha),
        source: RowSource {
            constraint: c.name.clone(),
            point,
        },
    })
}

/// One row per constraint: `c = ∇h(x)·g(x)`, `d = −(∇h(x)·f(x) + α(h(x)))`,
/// so that `c·u ≥ d` is the barrier condition `ḣ + α(h) ≥ 0`.
pub fn build_explicit_barrier_rows<T, D>(
    x: &[T],
    constraints: &[SafetyConstraint<T>],
    dynamics: &D,
) -> Result<Vec<BarrierRow<T>>, FilterError>
where
    T: Real,
    D: ControlAffineDynamics<T> + ?Sized,
{
    let dirs = drift_and_input_columns(dynamics, x)?;
    constraints
        .iter()
        .map(|c| {
            let (value, ders) = value_and_directionals(c, x, &dirs)?;
            row_from_terms(c, value, &ders, None)
        })
        .collect()
}

/// Integrates `Ẇ = J_cl(φ_j)·W` along a backup trajectory with RK4 at the
/// trajectory's step, starting from `W₀ = dirs` (columns). The Jacobian at the
/// mid-step is taken at the average of the bracketing trajectory points.
/// Returns `W_j` for every trajectory point.
///
/// With `dirs` the identity columns this is the sensitivity matrix `D_j`.
pub fn propagate_sensitivity<T, D, B>(
    dynamics: &D,
    ctrl: &B,
    traj: &BackupTrajectory<T>,
    t0: T,
    dirs: &[Vec<T>],
) -> Result<Vec<Vec<Vec<T>>>, FilterError>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    let h = traj.dt;
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(traj.len());
    out.push(dirs.to_vec());
    let jv = |x: &[T], t: T, w: &[T]| -> Result<Vec<T>, FilterError> {
        let cl = ClosedLoop {
            dynamics,
            controller: ctrl,
            time: t,
        };
        Ok(autodiff::jvp(&cl, x, w)?)
    };
    for j in 0..traj.len().saturating_sub(1) {
        let xa = &traj.states[j];
        let xb = &traj.states[j + 1];
        let xm: Vec<T> = xa.iter().zip(xb).map(|(a, b)| half * (*a + *b)).collect();
        let t = t0 + T::from_usize_lossy(j) * h;
        let tm = t + half * h;
        let prev = &out[j];
        let mut next = Vec::with_capacity(prev.len());
        for w in prev {
            let axpy = |k: &[T], s: T| -> Vec<T> { w.iter().zip(k).map(|(a, b)| *a + s * *b).collect() };
            let k1 = jv(xa, t, w)?;
            let k2 = jv(&xm, tm, &axpy(&k1, half * h))?;
            let k3 = jv(&xm, tm, &axpy(&k2, half * h))?;
            let k4 = jv(xb, t + h, &axpy(&k3, h))?;
            let sixth = h / T::lit(6.0);
            let two = T::lit(2.0);
            let wn: Vec<T> = (0..w.len())
                .map(|i| w[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                .collect();
            if !wn.iter().all(|v| v.all_finite()) {
                return Err(FilterError::Sensitivity { step: j + 1 });
            }
            next.push(wn);
        }
        out.push(next);
    }
    Ok(out)
}

/// Trajectory indices kept for one constraint: every `stride`-th point and,
/// optionally, every local minimum of the constraint along the trajectory.
pub fn retained_points<T: Real>(values: &[T], stride: usize, include_minima: bool) -> Vec<usize> {
    let stride = stride.max(1);
    let n = values.len();
    (0..n)
        .filter(|&j| {
            if j % stride == 0 {
                return true;
            }
            include_minima && values[j] < values[j - 1] && (j + 1 == n || values[j] <= values[j + 1])
        })
        .collect()
}

/// Rows `∇φ_i(φ_j)·D_j·g(x)·u ≥ −(∇φ_i(φ_j)·D_j·f(x) + α(φ_i(φ_j)))` at the
/// retained points of a backup trajectory computed from `x` at time `t0`.
#[allow(clippy::too_many_arguments)]
pub fn build_implicit_barrier_rows<T, D, B>(
    x: &[T],
    traj: &BackupTrajectory<T>,
    t0: T,
    constraints: &[SafetyConstraint<T>],
    dynamics: &D,
    ctrl: &B,
    stride: usize,
    include_minima: bool,
) -> Result<Vec<BarrierRow<T>>, FilterError>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    let dirs = drift_and_input_columns(dynamics, x)?;
    let w = propagate_sensitivity(dynamics, ctrl, traj, t0, &dirs)?;
    let mut rows = Vec::new();
    for c in constraints {
        let values = traj
            .states
            .iter()
            .map(|s| c.evaluate(s))
            .collect::<Result<Vec<_>, _>>()?;
        for j in retained_points(&values, stride, include_minima) {
            let (value, ders) = value_and_directionals(c, &traj.states[j], &w[j])?;
            rows.push(row_from_terms(c, value, &ders, Some(j))?);
        }
    }
    Ok(rows)
}
