use std::fmt;
use std::sync::Arc;

use super::{AdError, AdResult, Dual};
use crate::scalar::{Number, Real};

/// Second- and third-level nested duals.
pub type Dual2<T> = Dual<Dual<T>>;
pub type Dual3<T> = Dual<Dual<Dual<T>>>;

/// A [`Number`] built on the base real `T` that can call type-erased fields.
///
/// Implemented for `T` itself and for duals nested up to three levels deep.
/// Three levels are enough to differentiate a relative-degree-3 HOCBF once.
pub trait Scalar<T: Real>: Number<Base = T> {
    /// Nesting depth: 0 for a plain real.
    const LEVEL: usize;

    fn call_field(f: &dyn DynScalarField<T>, x: &[Self]) -> AdResult<Self>;

    /// `(f(x), ∇f(x)·dir)` from one forward pass at the next nesting level.
    fn directional(f: &dyn DynScalarField<T>, x: &[Self], dir: &[Self]) -> AdResult<(Self, Self)>;
}

/// A differentiable scalar function of a real vector, written once generically.
pub trait ScalarField<T: Real>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S>;
}

/// A differentiable vector function of a real vector.
pub trait VectorField<T: Real> {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<Vec<S>>;
}

/// Object-safe face of [`ScalarField`]; one entry point per nesting level.
pub trait DynScalarField<T: Real>: Send + Sync {
    fn dyn_input_dim(&self) -> usize;
    fn eval_l0(&self, x: &[T]) -> AdResult<T>;
    fn eval_l1(&self, x: &[Dual<T>]) -> AdResult<Dual<T>>;
    fn eval_l2(&self, x: &[Dual2<T>]) -> AdResult<Dual2<T>>;
    fn eval_l3(&self, x: &[Dual3<T>]) -> AdResult<Dual3<T>>;
}

impl<T: Real, F: ScalarField<T>> DynScalarField<T> for F {
    fn dyn_input_dim(&self) -> usize {
        ScalarField::input_dim(self)
    }
    fn eval_l0(&self, x: &[T]) -> AdResult<T> {
        self.eval(x)
    }
    fn eval_l1(&self, x: &[Dual<T>]) -> AdResult<Dual<T>> {
        self.eval(x)
    }
    fn eval_l2(&self, x: &[Dual2<T>]) -> AdResult<Dual2<T>> {
        self.eval(x)
    }
    fn eval_l3(&self, x: &[Dual3<T>]) -> AdResult<Dual3<T>> {
        self.eval(x)
    }
}

fn lift_pair<S: Number>(x: &[S], dir: &[S]) -> AdResult<Vec<Dual<S>>> {
    if x.len() != dir.len() {
        return Err(AdError::DimensionMismatch {
            expected: x.len(),
            got: dir.len(),
        });
    }
    Ok(x.iter().zip(dir).map(|(a, b)| Dual::new(*a, *b)).collect())
}

impl<T: Real> Scalar<T> for T {
    const LEVEL: usize = 0;
    fn call_field(f: &dyn DynScalarField<T>, x: &[Self]) -> AdResult<Self> {
        f.eval_l0(x)
    }
    fn directional(f: &dyn DynScalarField<T>, x: &[Self], dir: &[Self]) -> AdResult<(Self, Self)> {
        let y = f.eval_l1(&lift_pair(x, dir)?)?;
        Ok((y.re, y.eps))
    }
}

impl<T: Real> Scalar<T> for Dual<T> {
    const LEVEL: usize = 1;
    fn call_field(f: &dyn DynScalarField<T>, x: &[Self]) -> AdResult<Self> {
        f.eval_l1(x)
    }
    fn directional(f: &dyn DynScalarField<T>, x: &[Self], dir: &[Self]) -> AdResult<(Self, Self)> {
        let y = f.eval_l2(&lift_pair(x, dir)?)?;
        Ok((y.re, y.eps))
    }
}

impl<T: Real> Scalar<T> for Dual2<T> {
    const LEVEL: usize = 2;
    fn call_field(f: &dyn DynScalarField<T>, x: &[Self]) -> AdResult<Self> {
        f.eval_l2(x)
    }
    fn directional(f: &dyn DynScalarField<T>, x: &[Self], dir: &[Self]) -> AdResult<(Self, Self)> {
        let y = f.eval_l3(&lift_pair(x, dir)?)?;
        Ok((y.re, y.eps))
    }
}

impl<T: Real> Scalar<T> for Dual3<T> {
    const LEVEL: usize = 3;
    fn call_field(f: &dyn DynScalarField<T>, x: &[Self]) -> AdResult<Self> {
        f.eval_l3(x)
    }
    fn directional(_: &dyn DynScalarField<T>, _: &[Self], _: &[Self]) -> AdResult<(Self, Self)> {
        Err(AdError::NestingTooDeep { max: Self::LEVEL })
    }
}

/// Type-erased, cheaply clonable differentiable scalar field.
#[derive(Clone)]
pub struct DiffScalarField<T: Real> {
    inner: Arc<dyn DynScalarField<T>>,
}

impl<T: Real> DiffScalarField<T> {
    pub fn new<F: ScalarField<T> + 'static>(field: F) -> Self {
        Self {
            inner: Arc::new(field),
        }
    }

    /// Wraps a [`FieldFn`] body (closures cannot be generic over the scalar)
    /// with an input-dimension check.
    pub fn from_fn<F: FieldFn<T> + 'static>(input_dim: usize, f: F) -> Self {
        Self::new(FnField { input_dim, f })
    }

    pub fn as_dyn(&self) -> &dyn DynScalarField<T> {
        &*self.inner
    }
}

impl<T: Real> fmt::Debug for DiffScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffScalarField")
            .field("input_dim", &self.inner.dyn_input_dim())
            .finish()
    }
}

impl<T: Real> ScalarField<T> for DiffScalarField<T> {
    fn input_dim(&self) -> usize {
        self.inner.dyn_input_dim()
    }
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S> {
        S::call_field(&*self.inner, x)
    }
}

/// A function body generic over the evaluation scalar, used by
/// [`DiffScalarField::from_fn`].
pub trait FieldFn<T: Real>: Send + Sync {
    fn call<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S>;
}

struct FnField<F> {
    input_dim: usize,
    f: F,
}

impl<T: Real, F: FieldFn<T>> ScalarField<T> for FnField<F> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S> {
        check_dim(self.input_dim, x.len())?;
        self.f.call(x)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> AdResult<()> {
    if expected == got {
        Ok(())
    } else {
        Err(AdError::DimensionMismatch { expected, got })
    }
}

/// Linear combination `a·f + b·g` of two fields.
pub struct Combination<T: Real> {
    pub a: T,
    pub f: DiffScalarField<T>,
    pub b: T,
    pub g: DiffScalarField<T>,
}

impl<T: Real> ScalarField<T> for Combination<T> {
    fn input_dim(&self) -> usize {
        ScalarField::input_dim(&self.f)
    }
    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S> {
        Ok(S::from_base(self.a) * self.f.eval(x)? + S::from_base(self.b) * self.g.eval(x)?)
    }
}
