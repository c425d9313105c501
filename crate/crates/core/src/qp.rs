//! The ASIF quadratic program
//!
//! ```text
//!   minimize ‖u − u_des‖²   s.t.  lower ≤ u ≤ upper,  c_i·u ≥ d_i
//! ```
//!
//! solved exactly with a dual active-set method (Goldfarb-Idnani specialised
//! to an identity Hessian). It starts from the unconstrained optimum `u_des`
//! and adds violated constraints one at a time, so a `u_des` that already
//! satisfies everything is returned bit-for-bit.
//!
//! When the barrier rows are jointly infeasible with the box, the rows (never
//! the box) are softened with one shared slack `s ≥ 0` penalised by `1e6·s²`.

use log::debug;
use thiserror::Error;

use crate::scalar::Real;

/// Penalty weight on the squared shared slack of the relaxed problem.
pub const SLACK_WEIGHT: f64 = 1e6;

/// One linear inequality `coeff·u ≥ offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierRow<T> {
    pub coeff: Vec<T>,
    pub offset: T,
    pub source: RowSource,
}

/// Which constraint (and which backup-trajectory point, for implicit rows)
/// produced a row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowSource {
    pub constraint: String,
    pub point: Option<usize>,
}

impl<T: Real> BarrierRow<T> {
    pub fn new(coeff: Vec<T>, offset: T, constraint: impl Into<String>) -> Self {
        Self {
            coeff,
            offset,
            source: RowSource {
                constraint: constraint.into(),
                point: None,
            },
        }
    }

    /// `coeff·u − offset`; non-negative when satisfied.
    pub fn margin(&self, u: &[T]) -> T {
        dot(&self.coeff, u) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub u_des: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub rows: Vec<BarrierRow<T>>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(u_des: Vec<T>, lower: Vec<T>, upper: Vec<T>) -> Self {
        Self {
            u_des,
            lower,
            upper,
            rows: Vec::new(),
        }
    }

    pub fn with_rows(mut self, rows: Vec<BarrierRow<T>>) -> Self {
        self.rows = rows;
        self
    }

    pub fn dim(&self) -> usize {
        self.u_des.len()
    }

    pub fn objective(&self, u: &[T]) -> T {
        self.u_des
            .iter()
            .zip(u)
            .fold(T::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Relaxed,
    InfeasibleBox,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Relaxed => "relaxed",
            QpStatus::InfeasibleBox => "infeasible_box",
        }
    }
}

impl std::str::FromStr for QpStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [QpStatus::Optimal, QpStatus::Relaxed, QpStatus::InfeasibleBox]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown QP status `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub u: Vec<T>,
    pub status: QpStatus,
    pub slack: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("non-finite value in QP data")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("active-set iteration limit reached")]
    IterationLimit,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn validate<T: Real>(p: &QpProblem<T>) -> Result<(), QpError> {
    let m = p.dim();
    for v in [&p.lower, &p.upper] {
        if v.len() != m {
            return Err(QpError::DimensionMismatch {
                expected: m,
                got: v.len(),
            });
        }
    }
    for r in &p.rows {
        if r.coeff.len() != m {
            return Err(QpError::DimensionMismatch {
                expected: m,
                got: r.coeff.len(),
            });
        }
    }
    let finite = p
        .u_des
        .iter()
        .chain(&p.lower)
        .chain(&p.upper)
        .all(|v| v.all_finite())
        && p.rows
            .iter()
            .all(|r| r.offset.all_finite() && r.coeff.iter().all(|v| v.all_finite()));
    if finite {
        Ok(())
    } else {
        Err(QpError::NonFinite)
    }
}

/// Inequalities `a·z ≥ b` in the solver's working space.
struct Halfspace<T> {
    a: Vec<T>,
    b: T,
}

fn box_halfspaces<T: Real>(lower: &[T], upper: &[T], dim: usize) -> Vec<Halfspace<T>> {
    let m = lower.len();
    let mut out = Vec::with_capacity(2 * m);
    for i in 0..m {
        let mut a = vec![T::zero(); dim];
        a[i] = T::one();
        out.push(Halfspace { a, b: lower[i] });
        let mut a = vec![T::zero(); dim];
        a[i] = -T::one();
        out.push(Halfspace { a, b: -upper[i] });
    }
    out
}

pub fn solve<T: Real>(p: &QpProblem<T>) -> Result<QpSolution<T>, QpError> {
    solve_with_weight(p, T::lit(SLACK_WEIGHT))
}

/// [`solve`] with a custom penalty on the squared slack.
pub fn solve_with_weight<T: Real>(p: &QpProblem<T>, slack_weight: T) -> Result<QpSolution<T>, QpError> {
    validate(p)?;
    if !(slack_weight > T::zero()) || !slack_weight.all_finite() {
        return Err(QpError::NonFinite);
    }
    let m = p.dim();
    if p.lower.iter().zip(&p.upper).any(|(lo, hi)| *lo > *hi) {
        let half = T::lit(0.5);
        return Ok(QpSolution {
            u: p.lower
                .iter()
                .zip(&p.upper)
                .map(|(lo, hi)| half * (*lo + *hi))
                .collect(),
            status: QpStatus::InfeasibleBox,
            slack: T::zero(),
        });
    }

    let mut cons = box_halfspaces(&p.lower, &p.upper, m);
    cons.extend(p.rows.iter().map(|r| Halfspace {
        a: r.coeff.clone(),
        b: r.offset,
    }));
    if let Some(u) = project(&p.u_des, &cons)? {
        return Ok(QpSolution {
            u: clamp_box(&u, &p.lower, &p.upper),
            status: QpStatus::Optimal,
            slack: T::zero(),
        });
    }

    // relaxed problem in z = (u, w), w = √weight·s: again a projection
    let scale = slack_weight.sqrt();
    let mut z0 = p.u_des.clone();
    z0.push(T::zero());
    let mut cons = box_halfspaces(&p.lower, &p.upper, m + 1);
    let mut a = vec![T::zero(); m + 1];
    a[m] = T::one();
    cons.push(Halfspace { a, b: T::zero() });
    cons.extend(p.rows.iter().map(|r| {
        let mut a = r.coeff.clone();
        a.push(T::one() / scale);
        Halfspace { a, b: r.offset }
    }));
    let z = project(&z0, &cons)?.ok_or(QpError::IterationLimit)?;
    let slack = z[m].max_of(T::zero()) / scale;
    debug!("qp relaxed: slack {:?}", slack);
    Ok(QpSolution {
        u: clamp_box(&z[..m], &p.lower, &p.upper),
        status: QpStatus::Relaxed,
        slack,
    })
}

fn clamp_box<T: Real>(u: &[T], lower: &[T], upper: &[T]) -> Vec<T> {
    u.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (lo, hi))| v.clamp_to(*lo, *hi))
        .collect()
}

/// Solves `G·y = rhs` for a small dense symmetric positive definite `G`
/// (row-major) by Gaussian elimination with partial pivoting.
fn solve_small<T: Real>(g: &[T], rhs: &[T]) -> Option<Vec<T>> {
    let n = rhs.len();
    let mut a = g.to_vec();
    let mut y = rhs.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv * n + col].abs() <= T::epsilon() * T::lit(1e-3) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            y.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= f * v;
            }
            let v = y[col];
            y[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = y[col];
        for k in col + 1..n {
            s -= a[col * n + k] * y[k];
        }
        y[col] = s / a[col * n + col];
    }
    Some(y)
}

/// Euclidean projection of `z0` onto `{z : a_i·z ≥ b_i}`. `Ok(None)` means
/// the set is empty.
fn project<T: Real>(z0: &[T], cons: &[Halfspace<T>]) -> Result<Option<Vec<T>>, QpError> {
    let dim = z0.len();
    let mut z = z0.to_vec();
    let mut active: Vec<usize> = Vec::with_capacity(dim);
    let mut lambda: Vec<T> = Vec::with_capacity(dim);
    let norms: Vec<T> = cons.iter().map(|c| dot(&c.a, &c.a).sqrt()).collect();
    let tiny = T::lit(1e-14);
    let max_iter = 50 * (cons.len() + dim + 1);
    let mut iter = 0;

    loop {
        // most violated constraint, measured as a distance
        let znorm = dot(&z, &z).sqrt();
        let mut pick: Option<(usize, T)> = None;
        for (i, c) in cons.iter().enumerate() {
            if active.contains(&i) || norms[i] == T::zero() {
                if norms[i] == T::zero() && c.b > T::zero() {
                    return Ok(None);
                }
                continue;
            }
            let slack = dot(&c.a, &z) - c.b;
            let tol = T::lit(1e-13) * (T::one() + c.b.abs() + norms[i] * znorm);
            if slack < -tol {
                let dist = slack / norms[i];
                if pick.is_none_or(|(_, d)| dist < d) {
                    pick = Some((i, dist));
                }
            }
        }
        let Some((p, _)) = pick else {
            return Ok(Some(z));
        };
        let ap = &cons[p].a;
        let mut lambda_p = T::zero();

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(QpError::IterationLimit);
            }
            let q = active.len();
            // r = (NᵀN)⁻¹Nᵀa_p, d = a_p − N·r
            let r = if q == 0 {
                Vec::new()
            } else {
                let mut g = vec![T::zero(); q * q];
                let mut rhs = vec![T::zero(); q];
                for (i, &ki) in active.iter().enumerate() {
                    for (j, &kj) in active.iter().enumerate() {
                        g[i * q + j] = dot(&cons[ki].a, &cons[kj].a);
                    }
                    rhs[i] = dot(&cons[ki].a, ap);
                }
                solve_small(&g, &rhs).ok_or(QpError::IterationLimit)?
            };
            let mut d = ap.clone();
            for (rk, &k) in r.iter().zip(&active) {
                for (di, ai) in d.iter_mut().zip(&cons[k].a) {
                    *di -= *rk * *ai;
                }
            }
            let dd = dot(&d, &d);
            let full_step = if dd > tiny * norms[p] * norms[p] {
                let slack = dot(ap, &z) - cons[p].b;
                Some(-slack / dot(ap, &d))
            } else {
                None
            };
            // dual blocking step
            let mut block: Option<(usize, T)> = None;
            for (idx, rk) in r.iter().enumerate() {
                if *rk > T::zero() {
                    let t = lambda[idx] / *rk;
                    if block.is_none_or(|(_, b)| t < b) {
                        block = Some((idx, t));
                    }
                }
            }
            match (full_step, block) {
                (None, None) => return Ok(None),
                (None, Some((idx, t1))) => {
                    for (l, rk) in lambda.iter_mut().zip(&r) {
                        *l -= t1 * *rk;
                    }
                    lambda_p += t1;
                    active.remove(idx);
                    lambda.remove(idx);
                }
                (Some(t2), blk) => {
                    let (t, drop) = match blk {
                        Some((idx, t1)) if t1 < t2 => (t1, Some(idx)),
                        _ => (t2, None),
                    };
                    for (zi, di) in z.iter_mut().zip(&d) {
                        *zi += t * *di;
                    }
                    for (l, rk) in lambda.iter_mut().zip(&r) {
                        *l -= t * *rk;
                    }
                    lambda_p += t;
                    match drop {
                        Some(idx) => {
                            active.remove(idx);
                            lambda.remove(idx);
                        }
                        None => {
                            active.push(p);
                            lambda.push(lambda_p);
                            break;
                        }
                    }
                }
            }
        }
    }
}

/// KKT residual of `u` for `p`: the larger of the primal violation and the
/// stationarity residual `min_{λ≥0} ‖(u − u_des) − Σ λ_i a_i‖` over the
/// constraints active at `u`.
pub fn verify_kkt<T: Real>(p: &QpProblem<T>, u: &[T]) -> T {
    let m = p.dim();
    let mut cons = box_halfspaces(&p.lower, &p.upper, m);
    cons.extend(p.rows.iter().map(|r| Halfspace {
        a: r.coeff.clone(),
        b: r.offset,
    }));
    let mut primal = T::zero();
    let mut active = Vec::new();
    for c in &cons {
        let slack = dot(&c.a, u) - c.b;
        primal = primal.max_of(-slack);
        let scale = T::one() + c.b.abs();
        if slack.abs() <= T::lit(1e-9) * scale && dot(&c.a, &c.a) > T::zero() {
            active.push(&c.a);
        }
    }
    let grad: Vec<T> = u.iter().zip(&p.u_des).map(|(a, b)| *a - *b).collect();
    let mut best = dot(&grad, &grad).sqrt();
    // enumerate subsets of the active set; tiny problems only
    let k = active.len().min(16);
    for mask in 1u32..(1u32 << k) {
        let set: Vec<&Vec<T>> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| active[i])
            .collect();
        let q = set.len();
        if q > m {
            continue;
        }
        let mut g = vec![T::zero(); q * q];
        let mut rhs = vec![T::zero(); q];
        for i in 0..q {
            for j in 0..q {
                g[i * q + j] = dot(set[i], set[j]);
            }
            rhs[i] = dot(set[i], &grad);
        }
        let Some(lam) = solve_small(&g, &rhs) else {
            continue;
        };
        if lam.iter().any(|l| *l < T::zero()) {
            continue;
        }
        let mut res = grad.clone();
        for (l, a) in lam.iter().zip(&set) {
            for (ri, ai) in res.iter_mut().zip(a.iter()) {
                *ri -= *l * *ai;
            }
        }
        best = best.min_of(dot(&res, &res).sqrt());
    }
    primal.max_of(best)
}
