//! Discrete-time LQR design: zero-order-hold discretization and the discrete
//! algebraic Riccati equation.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Riccati iteration did not converge after {0} doublings")]
    NoConvergence(usize),
    #[error("singular matrix in Riccati iteration")]
    Singular,
}

/// `(A_d, B_d)` for `ẋ = Ax + Bu` under a zero-order hold of length `dt`,
/// from the exponential of the augmented matrix `[[A, B], [0, 0]]·dt`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Stabilizing solution `P` of
/// `P = AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`
/// by the structure-preserving doubling algorithm.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LqrError::Dimension(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let r_inv = r.clone().try_inverse().ok_or(LqrError::Singular)?;
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    let eye = DMatrix::<f64>::identity(n, n);
    const MAX_DOUBLINGS: usize = 100;
    for _ in 0..MAX_DOUBLINGS {
        let w = (&eye + &gk * &hk).try_inverse().ok_or(LqrError::Singular)?;
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let change = (&h_next - &hk).norm();
        let scale = h_next.norm().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if change <= 1e-13 * scale {
            let p = (&hk + hk.transpose()) * 0.5;
            return Ok(p);
        }
    }
    Err(LqrError::NoConvergence(MAX_DOUBLINGS))
}

/// `K = (R + BᵀPB)⁻¹BᵀPA` for the discrete LQR law `u = −K·x`.
pub fn dlqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), LqrError> {
    let p = solve_dare(a, b, q, r)?;
    let bt_p = b.transpose() * &p;
    let k = (r + &bt_p * b).try_inverse().ok_or(LqrError::Singular)? * bt_p * a;
    Ok((k, p))
}

/// Spectral radius of `A − BK`.
pub fn closed_loop_spectral_radius(a: &DMatrix<f64>, b: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    (a - b * k)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
