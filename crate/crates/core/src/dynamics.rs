//! Control-affine system models `ẋ = f(x) + g(x)·u`.
//!
//! The drift `f` and input map `g` are generic over the evaluation scalar so
//! that barrier constructions can differentiate through them. Next-state
//! propagation is a separate, non-differentiated path (fixed-step RK4 by
//! default) that can be swapped for an external simulator with
//! [`ExternalPropagation`].

use thiserror::Error;

use crate::autodiff::{self, check_dim, AdError, AdResult, Scalar, VectorField};
use crate::backup::BackupController;
use crate::scalar::{Number, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time step must be positive and finite")]
    InvalidStep,
    #[error("propagation produced a non-finite state")]
    NonFinite,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Ad(#[from] AdError),
}

impl From<DynamicsError> for AdError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::DimensionMismatch { expected, got } => {
                AdError::DimensionMismatch { expected, got }
            }
            DynamicsError::Ad(e) => e,
            other => AdError::Domain(other.to_string()),
        }
    }
}

/// Largest internal RK4 substep, seconds.
pub const MAX_SUBSTEP: f64 = 1.0;

pub trait ControlAffineDynamics<T: Real>: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// Drift `f(x)`.
    fn drift<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>>;

    /// Input map `g(x)`, row-major `state_dim × control_dim`.
    fn input_matrix<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>>;

    /// `f(x) + g(x)·u` in any scalar type.
    fn derivative_generic<S: Scalar<T>>(&self, x: &[S], u: &[S]) -> AdResult<Vec<S>> {
        check_dim(self.state_dim(), x.len())?;
        check_dim(self.control_dim(), u.len())?;
        let mut dx = self.drift(x)?;
        let g = self.input_matrix(x)?;
        add_mat_vec(&mut dx, &g, u);
        Ok(dx)
    }

    fn state_derivative(&self, x: &[T], u: &[T]) -> Result<Vec<T>, DynamicsError> {
        check_sizes(self.state_dim(), self.control_dim(), x, u)?;
        Ok(self.derivative_generic(x, u)?)
    }

    /// State after holding `u` constant for `dt` seconds.
    fn propagate(&self, x: &[T], u: &[T], dt: T) -> Result<Vec<T>, DynamicsError> {
        rk4_propagate(self, x, u, dt)
    }
}

/// `out += g·u` for row-major `g`.
pub(crate) fn add_mat_vec<S: Number>(out: &mut [S], g: &[S], u: &[S]) {
    let m = u.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &g[i * m..(i + 1) * m];
        for (gij, uj) in row.iter().zip(u) {
            *o += *gij * *uj;
        }
    }
}

fn check_sizes<T>(n: usize, m: usize, x: &[T], u: &[T]) -> Result<(), DynamicsError> {
    if x.len() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if u.len() != m {
        return Err(DynamicsError::DimensionMismatch {
            expected: m,
            got: u.len(),
        });
    }
    Ok(())
}

/// Fixed-step RK4 with `ceil(dt / MAX_SUBSTEP)` equal substeps.
pub fn rk4_propagate<T: Real, D: ControlAffineDynamics<T> + ?Sized>(
    dyns: &D,
    x: &[T],
    u: &[T],
    dt: T,
) -> Result<Vec<T>, DynamicsError> {
    check_sizes(dyns.state_dim(), dyns.control_dim(), x, u)?;
    if !(dt > T::zero()) || !dt.all_finite() {
        return Err(DynamicsError::InvalidStep);
    }
    let steps = (dt.to_f64_lossy() / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / T::from_usize_lossy(steps);
    let mut state = x.to_vec();
    for _ in 0..steps {
        state = rk4_step(|s| dyns.state_derivative(s, u), &state, h)?;
    }
    if state.iter().all(|v| v.all_finite()) {
        Ok(state)
    } else {
        Err(DynamicsError::NonFinite)
    }
}

/// One classical RK4 step of `ẏ = rhs(y)`.
pub fn rk4_step<T: Real, E>(
    mut rhs: impl FnMut(&[T]) -> Result<Vec<T>, E>,
    y: &[T],
    h: T,
) -> Result<Vec<T>, E> {
    let half = h * T::lit(0.5);
    let axpy = |a: &[T], s: T, b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(ai, bi)| *ai + s * *bi).collect() };
    let k1 = rhs(y)?;
    let k2 = rhs(&axpy(y, half, &k1))?;
    let k3 = rhs(&axpy(y, half, &k2))?;
    let k4 = rhs(&axpy(y, h, &k3))?;
    let sixth = h / T::lit(6.0);
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| *yi + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// Wraps a dynamics model, replacing its next-state propagation with an
/// opaque external propagator. `f` and `g` still come from the model.
pub struct ExternalPropagation<D, P> {
    pub model: D,
    pub propagator: P,
}

impl<T, D, P> ControlAffineDynamics<T> for ExternalPropagation<D, P>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    P: Fn(&[T], &[T], T) -> Result<Vec<T>, DynamicsError> + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.model.state_dim()
    }
    fn control_dim(&self) -> usize {
        self.model.control_dim()
    }
    fn drift<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>> {
        self.model.drift(x)
    }
    fn input_matrix<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>> {
        self.model.input_matrix(x)
    }
    fn propagate(&self, x: &[T], u: &[T], dt: T) -> Result<Vec<T>, DynamicsError> {
        check_sizes(self.state_dim(), self.control_dim(), x, u)?;
        let next = (self.propagator)(x, u, dt)?;
        if next.len() != x.len() {
            return Err(DynamicsError::DimensionMismatch {
                expected: x.len(),
                got: next.len(),
            });
        }
        if next.iter().all(|v| v.all_finite()) {
            Ok(next)
        } else {
            Err(DynamicsError::NonFinite)
        }
    }
}

/// Clohessy-Wiltshire parameters for `num_deputies` deputies in Hill's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwParams<T> {
    /// Chief mean motion, rad/s.
    pub mean_motion: T,
    /// Deputy mass, kg.
    pub mass: T,
    pub num_deputies: usize,
    /// Deputy whose 6-row block of `g` carries `B`.
    pub controlled_index: usize,
}

/// Stacked CW model: `f(x) = blockdiag(A, …, A)·x`, `g(x)` has `B` in the
/// controlled deputy's block and zeros elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwDynamics<T> {
    params: CwParams<T>,
}

pub const CW_BLOCK: usize = 6;
pub const CW_CONTROLS: usize = 3;

pub fn cw_system<T: Real>(params: CwParams<T>) -> Result<CwDynamics<T>, DynamicsError> {
    if !(params.mean_motion > T::zero()) || !(params.mass > T::zero()) {
        return Err(DynamicsError::InvalidParams(
            "mean motion and mass must be positive".into(),
        ));
    }
    if params.num_deputies == 0 {
        return Err(DynamicsError::InvalidParams(
            "at least one deputy is required".into(),
        ));
    }
    if params.controlled_index >= params.num_deputies {
        return Err(DynamicsError::InvalidParams(format!(
            "controlled index {} out of range for {} deputies",
            params.controlled_index, params.num_deputies
        )));
    }
    Ok(CwDynamics { params })
}

impl<T: Real> CwDynamics<T> {
    pub fn params(&self) -> &CwParams<T> {
        &self.params
    }

    /// Same model with a different controlled deputy.
    pub fn with_controlled(&self, index: usize) -> Result<Self, DynamicsError> {
        cw_system(CwParams {
            controlled_index: index,
            ..self.params
        })
    }

    /// The single-deputy `A` (6×6) and `B` (6×3) matrices.
    pub fn matrices(&self) -> ([[T; 6]; 6], [[T; 3]; 6]) {
        cw_matrices(self.params.mean_motion, self.params.mass)
    }
}

pub fn cw_matrices<T: Real>(n: T, mass: T) -> ([[T; 6]; 6], [[T; 3]; 6]) {
    let z = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let mut a = [[z; 6]; 6];
    a[0][3] = one;
    a[1][4] = one;
    a[2][5] = one;
    a[3][0] = T::lit(3.0) * n * n;
    a[3][4] = two * n;
    a[4][3] = -two * n;
    a[5][2] = -n * n;
    let mut b = [[z; 3]; 6];
    b[3][0] = one / mass;
    b[4][1] = one / mass;
    b[5][2] = one / mass;
    (a, b)
}

impl<T: Real> ControlAffineDynamics<T> for CwDynamics<T> {
    fn state_dim(&self) -> usize {
        CW_BLOCK * self.params.num_deputies
    }

    fn control_dim(&self) -> usize {
        CW_CONTROLS
    }

    fn drift<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>> {
        check_dim(self.state_dim(), x.len())?;
        let n = S::from_base(self.params.mean_motion);
        let two_n = S::cst(2.0) * n;
        let three_n2 = S::cst(3.0) * n * n;
        let n2 = n * n;
        let mut out = Vec::with_capacity(x.len());
        for b in x.chunks_exact(CW_BLOCK) {
            out.extend_from_slice(&[
                b[3],
                b[4],
                b[5],
                three_n2 * b[0] + two_n * b[4],
                -two_n * b[3],
                -n2 * b[2],
            ]);
        }
        Ok(out)
    }

    fn input_matrix<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>> {
        check_dim(self.state_dim(), x.len())?;
        let mut g = vec![S::zero(); self.state_dim() * CW_CONTROLS];
        let inv_m = S::from_base(T::one() / self.params.mass);
        let base = self.params.controlled_index * CW_BLOCK;
        for k in 0..CW_CONTROLS {
            g[(base + 3 + k) * CW_CONTROLS + k] = inv_m;
        }
        Ok(g)
    }

    fn derivative_generic<S: Scalar<T>>(&self, x: &[S], u: &[S]) -> AdResult<Vec<S>> {
        check_dim(CW_CONTROLS, u.len())?;
        let mut dx = self.drift(x)?;
        let inv_m = S::from_base(T::one() / self.params.mass);
        let base = self.params.controlled_index * CW_BLOCK;
        for k in 0..CW_CONTROLS {
            dx[base + 3 + k] += inv_m * u[k];
        }
        Ok(dx)
    }
}

/// The closed loop `x ↦ f(x) + g(x)·u_b(x, t)` as a differentiable map.
pub struct ClosedLoop<'a, D, B, T> {
    pub dynamics: &'a D,
    pub controller: &'a B,
    pub time: T,
}

impl<T, D, B> VectorField<T> for ClosedLoop<'_, D, B, T>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    fn input_dim(&self) -> usize {
        self.dynamics.state_dim()
    }
    fn output_dim(&self) -> usize {
        self.dynamics.state_dim()
    }
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>> {
        let u = crate::backup::saturated_control(self.controller, x, self.time)?;
        self.dynamics.derivative_generic(x, &u)
    }
}

/// Jacobian of the backup closed loop at `x`.
pub fn closed_loop_jacobian<T, D, B>(dynamics: &D, controller: &B, x: &[T], t: T) -> AdResult<Vec<Vec<T>>>
where
    T: Real,
    D: ControlAffineDynamics<T>,
    B: BackupController<T>,
{
    autodiff::jacobian(
        &ClosedLoop {
            dynamics,
            controller,
            time: t,
        },
        x,
    )
}
