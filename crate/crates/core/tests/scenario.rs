mod common;

use common::*;
use nalgebra::DMatrix;
use rta_core::filters::FilterKind;
use rta_core::lqr::{closed_loop_spectral_radius, discretize_zoh, dlqr, solve_dare};
use rta_core::scenario::{
    discrete_cw, initial_states, lqr_primary, make_constraints, primary_target, run_simulation,
    run_simulation_with, InspectionConfig, ScenarioError, SAFETY_TOL,
};

fn short(deputies: usize, duration: f64) -> InspectionConfig {
    let mut cfg = config(deputies);
    cfg.scenario.duration = duration;
    cfg
}

#[test]
fn constraint_counts_follow_deputy_count() {
    assert_eq!(make_constraints(&config(5), 0).unwrap().len(), 10);
    assert_eq!(make_constraints(&config(1), 0).unwrap().len(), 6);
    let mut cfg = config(1);
    cfg.scenario.deputies = 0;
    assert!(cfg.validate().is_err());
    assert!(matches!(run_simulation(&cfg), Err(ScenarioError::Config(_))));
}

#[test]
fn speed_constraint_is_zero_on_its_boundary() {
    let cfg = config(1);
    let speed = cfg.scenario.nu0 + cfg.scenario.nu1 * 100.0;
    let x = [100.0, 0.0, 0.0, 0.0, speed, 0.0];
    let cs = make_constraints(&cfg, 0).unwrap();
    let phi3 = cs
        .iter()
        .find(|c| rta_core::scenario::constraint_kind(&c.name) == Some(3))
        .unwrap();
    assert!(phi3.evaluate(&x).unwrap().abs() < 1e-15);
    assert!((speed - 0.6108).abs() < 1e-12);
}

#[test]
fn zoh_discretization_matches_power_series() {
    let cfg = config(1);
    let (a, b) = cw_ab(cfg.scenario.mean_motion, cfg.scenario.mass);
    let dt = 7.0;
    let (ad, bd) = discrete_cw(&cfg, dt);
    // Σ Aᵏdtᵏ/k! and Σ Aᵏdtᵏ⁺¹/(k+1)!·B
    let mut term = DMatrix::<f64>::identity(6, 6);
    let mut phi = DMatrix::<f64>::zeros(6, 6);
    let mut gam = DMatrix::<f64>::zeros(6, 6);
    for k in 0..40 {
        phi += &term;
        gam += &term * (dt / (k + 1) as f64);
        term = &term * &a * (dt / (k + 1) as f64);
    }
    assert!((&ad - &phi).norm() < 1e-12);
    assert!((&bd - gam * &b).norm() < 1e-12);
    let (ad2, _) = discretize_zoh(&a, &b, dt);
    assert_eq!(ad, ad2);
}

#[test]
fn riccati_solution_satisfies_the_equation_and_value_iteration() {
    let cfg = config(1);
    let (a, b) = discrete_cw(&cfg, 1.0);
    let q = DMatrix::<f64>::identity(6, 6);
    let r = DMatrix::<f64>::identity(3, 3) * 1e3;
    let p = solve_dare(&a, &b, &q, &r).unwrap();
    let btp = b.transpose() * &p;
    let gain = (&r + &btp * &b).try_inverse().unwrap() * &btp * &a;
    let residual = a.transpose() * &p * &a - a.transpose() * &p * &b * &gain + &q - &p;
    assert!(residual.norm() <= 1e-8 * p.norm());

    // plain value iteration converges to the same P
    let mut v = q.clone();
    for _ in 0..200_000 {
        let btv = b.transpose() * &v;
        let k = (&r + &btv * &b).try_inverse().unwrap() * &btv * &a;
        let next = a.transpose() * &v * &a - a.transpose() * &v * &b * k + &q;
        let done = (&next - &v).norm() <= 1e-12 * next.norm();
        v = next;
        if done {
            break;
        }
    }
    assert!((&v - &p).norm() <= 1e-6 * p.norm());

    let (k, _) = dlqr(&a, &b, &q, &r).unwrap();
    assert!((&k - &gain).norm() <= 1e-12 * gain.norm());
    assert!(closed_loop_spectral_radius(&a, &b, &k) < 1.0);
}

#[test]
fn primary_is_zero_at_its_target() {
    let cfg = config(5);
    for i in 0..5 {
        let lqr = lqr_primary(&cfg, i).unwrap();
        let p = primary_target(&cfg, i);
        assert!((norm(&p) - cfg.primary.target_distance).abs() < 1e-9);
        let x = [p[0], p[1], p[2], 0.0, 0.0, 0.0];
        assert_eq!(lqr.control(&x), [0.0; 3]);
        // off target it pushes back
        let off = [p[0] + 10.0, p[1], p[2], 0.0, 0.0, 0.0];
        assert!(lqr.control(&off)[0] < 0.0);
    }
}

#[test]
fn primary_targets_stay_out_of_the_sun_cone() {
    let cfg = config(5);
    for i in 0..5 {
        let p = primary_target(&cfg, i);
        let x = [p[0], p[1], p[2], 0.0, 0.0, 0.0];
        let mut stacked = vec![0.0; 30];
        stacked[6 * i..6 * i + 6].copy_from_slice(&x);
        assert!(phi_oracle(&cfg, &stacked, i)[3] > 0.0);
    }
}

#[test]
fn initial_states_are_safe_and_seeded() {
    let cfg = config(5);
    let a = initial_states(&cfg).unwrap();
    assert_eq!(a, initial_states(&cfg).unwrap());
    let x: Vec<f64> = a.iter().flatten().copied().collect();
    for i in 0..5 {
        let r = norm(&x[6 * i..6 * i + 3]);
        assert!((cfg.initial.min_range..=cfg.initial.max_range).contains(&r));
        assert!(phi_oracle(&cfg, &x, i).iter().all(|v| *v > 0.0));
    }
    let mut other = cfg.clone();
    other.scenario.seed = 1;
    assert_ne!(a, initial_states(&other).unwrap());
}

#[test]
fn default_run_is_safe_and_within_the_box() {
    let cfg = InspectionConfig::default();
    let log = run_simulation(&cfg).unwrap();
    let s = log.summary();
    assert_eq!(s.rows, cfg.steps() * cfg.scenario.deputies);
    assert!(s.is_safe(), "{:?}", s.min_phi);
    assert!(s.max_abs_u_act <= cfg.scenario.u_max);
    assert!(s.interventions > 0);
    for r in &log.records {
        let expected = r.time / cfg.scenario.dt;
        assert_eq!(expected.fract(), 0.0);
    }
}

#[test]
fn logged_phi_matches_the_oracle() {
    let cfg = short(3, 200.0);
    let log = run_simulation(&cfg).unwrap();
    for step in log.records.chunks(3) {
        let x: Vec<f64> = step.iter().flat_map(|r| r.state).collect();
        for r in step {
            let o = phi_oracle(&cfg, &x, r.deputy);
            for (a, b) in r.phi.iter().zip(&o) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}

#[test]
fn disabling_rta_violates_a_constraint() {
    let mut cfg = InspectionConfig::default();
    cfg.filter.enabled = false;
    let s = run_simulation(&cfg).unwrap().summary();
    assert!(s.min_phi_overall < -SAFETY_TOL);
    assert_eq!(s.interventions, 0);
    assert!(s.max_abs_u_act <= cfg.scenario.u_max);
}

#[test]
fn coasting_single_deputy_is_never_touched() {
    let mut cfg = short(1, 300.0);
    cfg.initial.min_range = 400.0;
    cfg.initial.max_range = 500.0;
    cfg.initial.speed_fraction = 1e-3;
    let log = run_simulation_with(&cfg, |_, _| [0.0; 3]).unwrap();
    assert!(log.records.iter().all(|r| !r.intervening && r.u_act == [0.0; 3]));
    // the deputy follows free CW motion exactly
    let mut x = log.records[0].state.to_vec();
    for r in &log.records {
        for (a, b) in r.state.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        x = exact_step(&cfg, &x, 0, &[0.0; 3], cfg.scenario.dt);
    }
}

#[test]
fn states_advance_by_exact_zoh_steps() {
    let cfg = short(2, 50.0);
    let log = run_simulation(&cfg).unwrap();
    let steps: Vec<_> = log.records.chunks(2).collect();
    for w in steps.windows(2) {
        let x: Vec<f64> = w[0].iter().flat_map(|r| r.state).collect();
        for r in w[0] {
            let next = exact_step(&cfg, &x, r.deputy, &r.u_act, cfg.scenario.dt);
            let got = &w[1][r.deputy].state;
            for (a, b) in got.iter().zip(&next[6 * r.deputy..6 * r.deputy + 6]) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}

#[test]
fn runs_are_deterministic_and_parallel_matches_serial() {
    let cfg = short(5, 300.0);
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    let mut par = cfg.clone();
    par.filter.parallel = true;
    let c = run_simulation(&par).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.records, c.records);
}

#[test]
fn every_filter_kind_keeps_a_short_run_safe() {
    for kind in [
        FilterKind::ExplicitSimplex,
        FilterKind::ExplicitAsif,
        FilterKind::ImplicitSimplex,
        FilterKind::ImplicitAsif,
    ] {
        let mut cfg = short(2, 100.0);
        cfg.filter.kind = kind;
        cfg.backup.horizon = 100.0;
        let s = run_simulation(&cfg).unwrap().summary();
        assert!(s.is_safe(), "{kind:?}: {:?}", s.min_phi);
        assert!(s.max_abs_u_act <= cfg.scenario.u_max);
    }
}

#[test]
fn validation_names_the_bad_field() {
    let cases: Vec<(Box<dyn Fn(&mut InspectionConfig)>, &str)> = vec![
        (Box::new(|c| c.scenario.dt = 0.0), "scenario.dt"),
        (Box::new(|c| c.scenario.duration = 10.5), "scenario.duration"),
        (
            Box::new(|c| c.scenario.sun_vector = [1.0, 1.0, 0.0]),
            "scenario.sun_vector",
        ),
        (Box::new(|c| c.backup.stride = 0), "backup.stride"),
        (Box::new(|c| c.backup.horizon = 10.5), "backup.horizon"),
        (Box::new(|c| c.initial.min_range = 5.0), "initial.min_range"),
        (
            Box::new(|c| c.primary.target_spread = 4.0),
            "primary.target_spread",
        ),
        (
            Box::new(|c| c.constraints.phi_3.a = f64::NAN),
            "constraints.phi_3.a",
        ),
        (Box::new(|c| c.qp.slack_weight = -1.0), "qp.slack_weight"),
    ];
    for (edit, field) in cases {
        let mut cfg = InspectionConfig::default();
        edit(&mut cfg);
        let err = cfg.validate().unwrap_err();
        assert!(err.contains(field), "{err}");
    }
    assert!(InspectionConfig::default().validate().is_ok());
}
