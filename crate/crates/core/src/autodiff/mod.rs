//! Forward-mode automatic differentiation.
//!
//! Functions are written once, generic over a [`Scalar`], and evaluated either
//! on plain reals or on dual numbers. A gradient costs one forward pass per
//! input dimension; a Jacobian-vector product costs a single pass. Nested
//! duals give higher derivatives, which is how HOCBF constraints built from
//! Lie derivatives are themselves differentiated.

mod dual;
mod field;

pub use dual::Dual;
pub(crate) use field::check_dim;
pub use field::{
    Combination, DiffScalarField, Dual2, Dual3, DynScalarField, FieldFn, Scalar, ScalarField, VectorField,
};

use thiserror::Error;

use crate::scalar::{Number, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite derivative for input component {index}")]
    NonFinite { index: usize },
    #[error("norm is not differentiable at the zero vector")]
    NormAtZero,
    #[error("derivative nesting deeper than {max} levels")]
    NestingTooDeep { max: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type AdResult<V> = Result<V, AdError>;

fn seeded<T: Real>(x: &[T], j: usize) -> Vec<Dual<T>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| Dual::new(v, if i == j { T::one() } else { T::zero() }))
        .collect()
}

/// `∇f(x)`, one forward pass per input component.
pub fn gradient<T: Real, F: ScalarField<T> + ?Sized>(f: &F, x: &[T]) -> AdResult<Vec<T>> {
    check_dim(f.input_dim(), x.len())?;
    let mut grad = Vec::with_capacity(x.len());
    let mut xs = seeded(x, usize::MAX);
    for j in 0..x.len() {
        if j > 0 {
            xs[j - 1].eps = T::zero();
        }
        xs[j].eps = T::one();
        let y = f.eval(&xs)?;
        if !y.all_finite() {
            return Err(AdError::NonFinite { index: j });
        }
        grad.push(y.eps);
    }
    Ok(grad)
}

/// `f(x)` and `∇f(x)` together.
pub fn value_and_gradient<T: Real, F: ScalarField<T> + ?Sized>(f: &F, x: &[T]) -> AdResult<(T, Vec<T>)> {
    let value = f.eval(x)?;
    if !value.all_finite() {
        return Err(AdError::Domain("non-finite value".into()));
    }
    if x.is_empty() {
        return Ok((value, Vec::new()));
    }
    Ok((value, gradient(f, x)?))
}

/// Jacobian of a vector field, row `i`, column `j` = `∂F_i/∂x_j`.
pub fn jacobian<T: Real, F: VectorField<T> + ?Sized>(f: &F, x: &[T]) -> AdResult<Vec<Vec<T>>> {
    check_dim(f.input_dim(), x.len())?;
    let m = f.output_dim();
    let mut jac = vec![vec![T::zero(); x.len()]; m];
    let mut xs = seeded(x, usize::MAX);
    for j in 0..x.len() {
        if j > 0 {
            xs[j - 1].eps = T::zero();
        }
        xs[j].eps = T::one();
        let col = f.eval(&xs)?;
        check_dim(m, col.len())?;
        for (row, y) in jac.iter_mut().zip(&col) {
            if !y.all_finite() {
                return Err(AdError::NonFinite { index: j });
            }
            row[j] = y.eps;
        }
    }
    Ok(jac)
}

/// `J(x)·v` in a single forward pass.
pub fn jvp<T: Real, F: VectorField<T> + ?Sized>(f: &F, x: &[T], v: &[T]) -> AdResult<Vec<T>> {
    check_dim(f.input_dim(), x.len())?;
    check_dim(x.len(), v.len())?;
    let xs: Vec<Dual<T>> = x.iter().zip(v).map(|(a, b)| Dual::new(*a, *b)).collect();
    let out = f.eval(&xs)?;
    out.iter()
        .enumerate()
        .map(|(i, y)| {
            if y.all_finite() {
                Ok(y.eps)
            } else {
                Err(AdError::NonFinite { index: i })
            }
        })
        .collect()
}

/// Euclidean norm. Differentiating it at the zero vector is an error; the
/// plain value at zero is fine.
pub fn norm<S: Number>(v: &[S]) -> AdResult<S> {
    let sq = dot(v, v);
    if sq.base() == S::Base::lit(0.0) {
        if v.iter().all(Number::is_constant) {
            return Ok(S::zero());
        }
        return Err(AdError::NormAtZero);
    }
    Ok(sq.sqrt())
}

pub fn dot<S: Number>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + *x * *y)
}
