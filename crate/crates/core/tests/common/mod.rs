#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rta_core::qp::{QpProblem, SLACK_WEIGHT};
use rta_core::scenario::InspectionConfig;

pub fn config(deputies: usize) -> InspectionConfig {
    let mut cfg = InspectionConfig::default();
    cfg.scenario.deputies = deputies;
    cfg
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-deputy CW `A` and `B` written out by hand.
pub fn cw_ab(n: f64, mass: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        3.0 * n * n, 0.0, 0.0, 0.0, 2.0 * n, 0.0,
        0.0, 0.0, 0.0, -2.0 * n, 0.0, 0.0,
        0.0, 0.0, -n * n, 0.0, 0.0, 0.0,
    ]);
    let mut b = DMatrix::zeros(6, 3);
    for k in 0..3 {
        b[(3 + k, k)] = 1.0 / mass;
    }
    (a, b)
}

/// Exact zero-order-hold step of the stacked CW model with `u` on `deputy`.
pub fn exact_step(cfg: &InspectionConfig, x: &[f64], deputy: usize, u: &[f64], dt: f64) -> Vec<f64> {
    let (a, b) = cw_ab(cfg.scenario.mean_motion, cfg.scenario.mass);
    let mut aug = DMatrix::zeros(9, 9);
    aug.view_mut((0, 0), (6, 6)).copy_from(&(&a * dt));
    aug.view_mut((0, 6), (6, 3)).copy_from(&(&b * dt));
    let e = aug.exp();
    let phi = e.view((0, 0), (6, 6)).into_owned();
    let gam = e.view((0, 6), (6, 3)).into_owned();
    let mut out = x.to_vec();
    for i in 0..x.len() / 6 {
        let blk = DVector::from_column_slice(&x[6 * i..6 * i + 6]);
        let mut next = &phi * blk;
        if i == deputy {
            next += &gam * DVector::from_column_slice(u);
        }
        out[6 * i..6 * i + 6].copy_from_slice(next.as_slice());
    }
    out
}

/// `φ₁…φ₇` of `deputy`, written directly from their definitions.
pub fn phi_oracle(cfg: &InspectionConfig, x: &[f64], deputy: usize) -> [f64; 7] {
    let s = &cfg.scenario;
    let p = &x[6 * deputy..6 * deputy + 3];
    let v = &x[6 * deputy + 3..6 * deputy + 6];
    let r = norm(p);
    let mut phi2 = f64::INFINITY;
    for j in 0..s.deputies {
        if j != deputy {
            let q = &x[6 * j..6 * j + 3];
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            phi2 = phi2.min(norm(&d) - 2.0 * s.r_d);
        }
    }
    [
        r - (s.r_d + s.r_c),
        phi2,
        s.nu0 + s.nu1 * r - norm(v),
        -dot(p, &s.sun_vector) / r + (s.sun_angle / 2.0).cos(),
        s.v_max * s.v_max - v[0] * v[0],
        s.v_max * s.v_max - v[1] * v[1],
        s.v_max * s.v_max - v[2] * v[2],
    ]
}

pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(floor)
}

fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(&v);
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Stacked state with every deputy's `φ₁…φ₇` at least `margin` (relative to
/// their scale) and ranges in `[r_lo, r_hi]`, speeds at most `speed`.
pub fn random_state(
    rng: &mut ChaCha8Rng,
    cfg: &InspectionConfig,
    r_lo: f64,
    r_hi: f64,
    speed: f64,
    margin: f64,
) -> Vec<f64> {
    let n = cfg.scenario.deputies;
    loop {
        let mut x = Vec::with_capacity(6 * n);
        for _ in 0..n {
            let r = rng.random_range(r_lo..r_hi);
            let d = unit(rng);
            let s = speed * rng.random::<f64>();
            let w = unit(rng);
            x.extend_from_slice(&[r * d[0], r * d[1], r * d[2], s * w[0], s * w[1], s * w[2]]);
        }
        if (0..n).all(|i| phi_oracle(cfg, &x, i).iter().all(|v| *v >= margin)) {
            return x;
        }
    }
}

pub fn alpha(a: f64, b: f64, z: f64) -> f64 {
    10f64.powf(a) * z + 10f64.powf(b) * z * z * z
}

/// Values of the constraints the explicit filters enforce for `deputy`, in
/// filter order: `φ₁`, `φ₂` per other deputy, `φ₃`, `φ₄`, `φ₅…φ₇`. The
/// position constraints flagged `hocbf` become `φ̇ + α₁(φ)`.
pub fn explicit_h_oracle(cfg: &InspectionConfig, x: &[f64], deputy: usize) -> Vec<f64> {
    let s = &cfg.scenario;
    let c = &cfg.constraints;
    let p = &x[6 * deputy..6 * deputy + 3];
    let v = &x[6 * deputy + 3..6 * deputy + 6];
    let r = norm(p);
    let stage = |spec: &rta_core::scenario::ConstraintSpec, phi: f64, rate: f64| {
        if spec.hocbf {
            rate + alpha(spec.stage_a, spec.stage_b, phi)
        } else {
            phi
        }
    };
    let mut out = vec![stage(&c.phi_1, r - s.r_d - s.r_c, dot(p, v) / r)];
    for j in (0..s.deputies).filter(|j| *j != deputy) {
        let q = &x[6 * j..6 * j + 3];
        let w = &x[6 * j + 3..6 * j + 6];
        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        let dv = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
        let dn = norm(&d);
        out.push(stage(&c.phi_2, dn - 2.0 * s.r_d, dot(&d, &dv) / dn));
    }
    out.push(s.nu0 + s.nu1 * r - norm(v));
    let e = &s.sun_vector;
    let phi4 = -dot(p, e) / r + (s.sun_angle / 2.0).cos();
    let rate4 = -dot(v, e) / r + dot(p, e) * dot(p, v) / (r * r * r);
    out.push(stage(&c.phi_4, phi4, rate4));
    for k in 0..3 {
        out.push(s.v_max * s.v_max - v[k] * v[k]);
    }
    out
}

pub fn single_deputy_state(p: [f64; 3], v: [f64; 3]) -> Vec<f64> {
    vec![p[0], p[1], p[2], v[0], v[1], v[2]]
}

/// Crafted two-deputy states around the boundaries of `φ₅`, `φ₃`, `φ₁`, `φ₄`
/// and `φ₂`; the second deputy sits far away except in the last one.
pub fn crafted_states() -> Vec<Vec<f64>> {
    let far = [-400.0, -350.0, 300.0, 0.0, 0.0, 0.0];
    let th: f64 = 0.3;
    let mut out = vec![
        single_deputy_state([0.0, 500.0, 0.0], [1.99, 0.0, 0.0]),
        single_deputy_state([0.0, 0.0, 200.0], [0.0, 1.0, 0.0]),
        single_deputy_state([0.0, -12.0, 0.0], [0.0, 0.09, 0.0]),
        single_deputy_state(
            [300.0 * th.cos(), 300.0 * th.sin(), 0.0],
            [0.09 * th.sin(), -0.09 * th.cos(), 0.0],
        ),
    ];
    for x in &mut out {
        x.extend_from_slice(&far);
    }
    out.push(vec![
        0.0, 100.0, 0.0, 0.0, 0.0, 0.14, 0.0, 100.0, 13.0, 0.0, 0.0, -0.14,
    ]);
    out
}

/// `a·z ≥ b`.
pub struct Half {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Projection of `z0` onto `{a·z ≥ b}` by enumerating every candidate active
/// set of at most `dim` constraints.
pub fn brute_force_projection(z0: &[f64], cons: &[Half]) -> Option<Vec<f64>> {
    let n = z0.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |z: Vec<f64>| {
        if cons.iter().all(|c| dot(&c.a, &z) - c.b >= -1e-9) {
            let d = dist2(&z, z0);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        }
    };
    consider(z0.to_vec());
    let m = cons.len();
    let mut subset = Vec::new();
    fn rec(start: usize, m: usize, n: usize, subset: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if !subset.is_empty() {
            f(subset);
        }
        if subset.len() == n {
            return;
        }
        for i in start..m {
            subset.push(i);
            rec(i + 1, m, n, subset, f);
            subset.pop();
        }
    }
    rec(0, m, n, &mut subset, &mut |s: &[usize]| {
        let a = DMatrix::from_fn(s.len(), n, |r, c| cons[s[r]].a[c]);
        let b = DVector::from_fn(s.len(), |r, _| cons[s[r]].b);
        let z = DVector::from_column_slice(z0);
        let gram = &a * a.transpose();
        if gram.determinant().abs() < 1e-12 {
            return;
        }
        let lambda = gram.lu().solve(&(b - &a * &z)).unwrap();
        let proj = z + a.transpose() * lambda;
        consider(proj.as_slice().to_vec());
    });
    best.map(|(_, z)| z)
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn box_halfspaces(lo: &[f64], hi: &[f64], n: usize) -> Vec<Half> {
    let mut out = Vec::new();
    for k in 0..lo.len() {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        out.push(Half {
            a: e.clone(),
            b: lo[k],
        });
        e[k] = -1.0;
        out.push(Half { a: e, b: -hi[k] });
    }
    out
}

pub fn oracle_objective(p: &QpProblem<f64>) -> (bool, f64) {
    let mut cons = box_halfspaces(&p.lower, &p.upper, 3);
    cons.extend(p.rows.iter().map(|r| Half {
        a: r.coeff.clone(),
        b: r.offset,
    }));
    match brute_force_projection(&p.u_des, &cons) {
        Some(u) => (true, p.objective(&u)),
        None => {
            // shared slack s ≥ 0 on every row, scaled as w = √W·s
            let sw = SLACK_WEIGHT.sqrt();
            let mut cons = box_halfspaces(&p.lower, &p.upper, 4);
            cons.extend(p.rows.iter().map(|r| Half {
                a: vec![r.coeff[0], r.coeff[1], r.coeff[2], 1.0 / sw],
                b: r.offset,
            }));
            cons.push(Half {
                a: vec![0.0, 0.0, 0.0, 1.0],
                b: 0.0,
            });
            let mut z0 = p.u_des.clone();
            z0.push(0.0);
            let z = brute_force_projection(&z0, &cons).expect("relaxed problem is feasible");
            (false, dist2(&z, &z0))
        }
    }
}
