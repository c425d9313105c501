//! The inspection constraints as differentiable fields over the stacked
//! `6N` deputy state.

use crate::autodiff::{norm, AdResult, Scalar, ScalarField};
use crate::dynamics::CW_BLOCK;

fn position<S: Copy>(x: &[S], deputy: usize) -> &[S] {
    &x[deputy * CW_BLOCK..deputy * CW_BLOCK + 3]
}

fn velocity<S: Copy>(x: &[S], deputy: usize) -> &[S] {
    &x[deputy * CW_BLOCK + 3..deputy * CW_BLOCK + 6]
}

/// `‖p_i‖ − (r_d + r_c)`.
pub struct ChiefCollision {
    pub dim: usize,
    pub deputy: usize,
    pub radius: f64,
}

impl ScalarField<f64> for ChiefCollision {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar<f64>>(&self, x: &[S]) -> AdResult<S> {
        crate::autodiff::check_dim(self.dim, x.len())?;
        Ok(norm(position(x, self.deputy))? - S::cst(self.radius))
    }
}

/// `‖p_i − p_j‖ − 2r_d`.
pub struct DeputyCollision {
    pub dim: usize,
    pub deputy: usize,
    pub other: usize,
    pub radius: f64,
}

impl ScalarField<f64> for DeputyCollision {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar<f64>>(&self, x: &[S]) -> AdResult<S> {
        crate::autodiff::check_dim(self.dim, x.len())?;
        let pi = position(x, self.deputy);
        let pj = position(x, self.other);
        let d = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
        Ok(norm(&d)? - S::cst(self.radius))
    }
}

/// `ν₀ + ν₁‖p_i‖ − ‖v_i‖`. At `v_i = 0` the speed term is taken with a zero
/// derivative.
pub struct DynamicSpeed {
    pub dim: usize,
    pub deputy: usize,
    pub nu0: f64,
    pub nu1: f64,
}

impl ScalarField<f64> for DynamicSpeed {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar<f64>>(&self, x: &[S]) -> AdResult<S> {
        crate::autodiff::check_dim(self.dim, x.len())?;
        let v = velocity(x, self.deputy);
        let speed_sq = v.iter().fold(S::zero(), |a, c| a + *c * *c);
        let speed = if speed_sq.base() == 0.0 {
            S::zero()
        } else {
            speed_sq.sqrt()
        };
        Ok(S::cst(self.nu0) + S::cst(self.nu1) * norm(position(x, self.deputy))? - speed)
    }
}

/// `−⟨p_i, ê_s⟩/‖p_i‖ + cos(θ_s/2)`.
pub struct SunAvoidance {
    pub dim: usize,
    pub deputy: usize,
    pub sun: [f64; 3],
    pub half_angle_cos: f64,
}

impl ScalarField<f64> for SunAvoidance {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar<f64>>(&self, x: &[S]) -> AdResult<S> {
        crate::autodiff::check_dim(self.dim, x.len())?;
        let p = position(x, self.deputy);
        let along = p
            .iter()
            .zip(&self.sun)
            .fold(S::zero(), |a, (pi, e)| a + *pi * S::cst(*e));
        Ok(S::cst(self.half_angle_cos) - along / norm(p)?)
    }
}

/// `v_max² − v_{i,axis}²`.
pub struct AxisSpeed {
    pub dim: usize,
    pub deputy: usize,
    pub axis: usize,
    pub v_max: f64,
}

impl ScalarField<f64> for AxisSpeed {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn eval<S: Scalar<f64>>(&self, x: &[S]) -> AdResult<S> {
        crate::autodiff::check_dim(self.dim, x.len())?;
        let v = velocity(x, self.deputy)[self.axis];
        Ok(S::cst(self.v_max * self.v_max) - v * v)
    }
}
