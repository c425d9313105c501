//! Safety constraints `h(x) ≥ 0`, class-κ strengthening functions and the
//! HOCBF construction for constraints of higher relative degree.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{AdError, AdResult, DiffScalarField, Scalar, ScalarField};
use crate::dynamics::ControlAffineDynamics;
use crate::scalar::Real;

/// Slack on `h(x) ≥ 0` when testing allowable-set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("constraint `{name}`: {source}")]
    Eval { name: String, source: AdError },
    #[error("relative degree must be at least 1")]
    InvalidRelativeDegree,
    #[error("expected {expected} strengthening functions, got {got}")]
    AlphaCount { expected: usize, got: usize },
}

/// Class-κ strengthening function α.
#[derive(Clone)]
pub enum Strengthening<T: Real> {
    /// `α(z) = 10^a·z + 10^b·z³`.
    Polynomial { a: T, b: T },
    /// Any user-supplied class-κ function of one variable.
    Custom(DiffScalarField<T>),
}

impl<T: Real> Strengthening<T> {
    pub fn polynomial(a: T, b: T) -> Self {
        Self::Polynomial { a, b }
    }

    pub fn eval<S: Scalar<T>>(&self, z: S) -> AdResult<S> {
        match self {
            Self::Polynomial { a, b } => {
                let ten = T::lit(10.0);
                let ka = S::from_base(ten.powf(*a));
                let kb = S::from_base(ten.powf(*b));
                Ok(ka * z + kb * z * z * z)
            }
            Self::Custom(f) => f.eval(&[z]),
        }
    }
}

impl<T: Real> fmt::Debug for Strengthening<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial { a, b } => write!(f, "Polynomial {{ a: {a:?}, b: {b:?} }}"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// `α(z)` for the polynomial family.
pub fn alpha_eval<T: Real>(s: &Strengthening<T>, z: T) -> AdResult<T> {
    s.eval(z)
}

/// A named scalar safety constraint; `h(x) ≥ 0` means satisfied.
#[derive(Clone, Debug)]
pub struct SafetyConstraint<T: Real> {
    pub name: String,
    pub h: DiffScalarField<T>,
    pub alpha: Strengthening<T>,
}

impl<T: Real> SafetyConstraint<T> {
    pub fn new(name: impl Into<String>, h: DiffScalarField<T>, alpha: Strengthening<T>) -> Self {
        Self {
            name: name.into(),
            h,
            alpha,
        }
    }

    pub fn evaluate(&self, x: &[T]) -> Result<T, ConstraintError> {
        let v = self.h.eval(x).map_err(|e| self.error(e))?;
        if v.all_finite() {
            Ok(v)
        } else {
            Err(self.error(AdError::Domain("non-finite constraint value".into())))
        }
    }

    pub fn error(&self, source: AdError) -> ConstraintError {
        ConstraintError::Eval {
            name: self.name.clone(),
            source,
        }
    }
}

/// Membership in the allowable set plus every constraint value.
pub fn in_allowable_set<T: Real>(
    cs: &[SafetyConstraint<T>],
    x: &[T],
) -> Result<(bool, Vec<T>), ConstraintError> {
    let values = cs.iter().map(|c| c.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
    let tol = -T::lit(MEMBERSHIP_TOL);
    Ok((values.iter().all(|v| *v >= tol), values))
}

/// `Ψ_i(x) = ∇Ψ_{i−1}(x)·f(x) + α_i(Ψ_{i−1}(x))`.
struct HocbfStage<T: Real, D> {
    prev: DiffScalarField<T>,
    dynamics: Arc<D>,
    alpha: Strengthening<T>,
}

impl<T: Real, D: ControlAffineDynamics<T>> ScalarField<T> for HocbfStage<T, D> {
    fn input_dim(&self) -> usize {
        self.prev.input_dim()
    }

    fn eval<S: Scalar<T>>(&self, x: &[S]) -> AdResult<S> {
        let f = self.dynamics.drift(x)?;
        let (value, lie) = S::directional(self.prev.as_dyn(), x, &f)?;
        Ok(lie + self.alpha.eval(value)?)
    }
}

/// Builds `Ψ_{rel_degree−1}` from `c.h`. The returned constraint keeps
/// `c.alpha` as its own strengthening, which the barrier builder applies as
/// the last stage. Relative degree 1 returns `c` unchanged.
pub fn hocbf_transform<T, D>(
    c: &SafetyConstraint<T>,
    dynamics: Arc<D>,
    rel_degree: usize,
    alphas: &[Strengthening<T>],
) -> Result<SafetyConstraint<T>, ConstraintError>
where
    T: Real,
    D: ControlAffineDynamics<T> + 'static,
{
    if rel_degree == 0 {
        return Err(ConstraintError::InvalidRelativeDegree);
    }
    if alphas.len() != rel_degree - 1 {
        return Err(ConstraintError::AlphaCount {
            expected: rel_degree - 1,
            got: alphas.len(),
        });
    }
    if rel_degree == 1 {
        return Ok(c.clone());
    }
    let mut field = c.h.clone();
    for alpha in alphas {
        field = DiffScalarField::new(HocbfStage {
            prev: field,
            dynamics: Arc::clone(&dynamics),
            alpha: alpha.clone(),
        });
    }
    Ok(SafetyConstraint {
        name: c.name.clone(),
        h: field,
        alpha: c.alpha.clone(),
    })
}
