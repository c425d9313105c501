//! Multi-agent spacecraft inspection: `N` deputies under Clohessy-Wiltshire
//! dynamics around a passive chief, each driven by an aggressive LQR primary
//! controller and filtered by its own RTA instance.
//!
//! Constraints per deputy `i` (state `p_i`, `v_i` in Hill's frame):
//!
//! | name  | constraint |
//! |-------|------------|
//! | φ₁    | `‖p_i‖ − (r_d + r_c)` |
//! | φ₂    | `‖p_i − p_j‖ − 2r_d` for every other deputy `j` |
//! | φ₃    | `ν₀ + ν₁‖p_i‖ − ‖v_i‖` |
//! | φ₄    | `−⟨p_i, ê_s⟩/‖p_i‖ + cos(θ_s/2)` |
//! | φ₅–φ₇ | `v_max² − ẋ_i²`, `v_max² − ẏ_i²`, `v_max² − ż_i²` |

mod config;
mod fields;

pub use config::{
    BackupParams, ConstraintSpec, ConstraintTable, FilterParams, InitialParams, InspectionConfig,
    PrimaryParams, QpParams, ScenarioParams,
};
pub use fields::{AxisSpeed, ChiefCollision, DeputyCollision, DynamicSpeed, SunAvoidance};

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::autodiff::DiffScalarField;
use crate::backup::{ControlBounds, LinearFeedback};
use crate::constraints::{hocbf_transform, ConstraintError, SafetyConstraint, Strengthening};
use crate::dynamics::{
    cw_system, ControlAffineDynamics, CwDynamics, CwParams, DynamicsError, CW_BLOCK, CW_CONTROLS,
};
use crate::filters::{ConstraintFilter, FilterError, FilterSettings, RtaFilter};
use crate::lqr::{self, LqrError};
use crate::qp::QpStatus;

/// Number of distinct constraint kinds logged per deputy.
pub const NUM_PHI: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Lqr(#[from] LqrError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("filter failed at step {step}, deputy {deputy}: {source}")]
    Filter {
        step: usize,
        deputy: usize,
        source: FilterError,
    },
    #[error("could not place deputy {0} inside the allowable set")]
    Placement(usize),
}

/// Which of φ₁…φ₇ a constraint instance belongs to, from its name.
pub fn constraint_kind(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("phi_")?;
    rest.split('_').next()?.parse().ok()
}

fn multistage(spec: &ConstraintSpec) -> Strengthening<f64> {
    Strengthening::polynomial(spec.a, spec.b)
}

/// The allowable-set constraints `φ₁, φ₂ (×(N−1)), φ₃, …, φ₇` of one deputy,
/// as functions of the stacked `6N` state.
pub fn make_constraints(
    cfg: &InspectionConfig,
    deputy: usize,
) -> Result<Vec<SafetyConstraint<f64>>, ScenarioError> {
    let s = &cfg.scenario;
    if s.deputies == 0 {
        return Err(ScenarioError::Config(
            "scenario.deputies must be at least 1".into(),
        ));
    }
    if deputy >= s.deputies {
        return Err(ScenarioError::Config(format!(
            "deputy {deputy} out of range for {} deputies",
            s.deputies
        )));
    }
    let dim = CW_BLOCK * s.deputies;
    let table = &cfg.constraints;
    let mut out = Vec::with_capacity(5 + s.deputies);
    out.push(SafetyConstraint::new(
        "phi_1",
        DiffScalarField::new(ChiefCollision {
            dim,
            deputy,
            radius: s.r_d + s.r_c,
        }),
        multistage(&table.phi_1),
    ));
    for other in (0..s.deputies).filter(|j| *j != deputy) {
        out.push(SafetyConstraint::new(
            format!("phi_2_{other}"),
            DiffScalarField::new(DeputyCollision {
                dim,
                deputy,
                other,
                radius: 2.0 * s.r_d,
            }),
            multistage(&table.phi_2),
        ));
    }
    out.push(SafetyConstraint::new(
        "phi_3",
        DiffScalarField::new(DynamicSpeed {
            dim,
            deputy,
            nu0: s.nu0,
            nu1: s.nu1,
        }),
        multistage(&table.phi_3),
    ));
    out.push(SafetyConstraint::new(
        "phi_4",
        DiffScalarField::new(SunAvoidance {
            dim,
            deputy,
            sun: s.sun_vector,
            half_angle_cos: (s.sun_angle / 2.0).cos(),
        }),
        multistage(&table.phi_4),
    ));
    for axis in 0..3 {
        let k = 5 + axis;
        out.push(SafetyConstraint::new(
            format!("phi_{k}"),
            DiffScalarField::new(AxisSpeed {
                dim,
                deputy,
                axis,
                v_max: s.v_max,
            }),
            multistage(table.get(k)),
        ));
    }
    Ok(out)
}

/// The constraints the explicit filters enforce: [`make_constraints`] with the
/// entries flagged `hocbf` replaced by their relative-degree-2 HOCBF.
pub fn explicit_constraints(
    cfg: &InspectionConfig,
    deputy: usize,
    dynamics: Arc<CwDynamics<f64>>,
) -> Result<Vec<SafetyConstraint<f64>>, ScenarioError> {
    make_constraints(cfg, deputy)?
        .into_iter()
        .map(|c| {
            let spec = cfg.constraints.get(constraint_kind(&c.name).unwrap_or(0));
            if spec.hocbf {
                let stage = Strengthening::polynomial(spec.stage_a, spec.stage_b);
                Ok(hocbf_transform(&c, Arc::clone(&dynamics), 2, &[stage])?)
            } else {
                Ok(c)
            }
        })
        .collect()
}

/// Stacked CW model for the scenario with `deputy` controlled.
pub fn scenario_dynamics(cfg: &InspectionConfig, deputy: usize) -> Result<CwDynamics<f64>, ScenarioError> {
    Ok(cw_system(CwParams {
        mean_motion: cfg.scenario.mean_motion,
        mass: cfg.scenario.mass,
        num_deputies: cfg.scenario.deputies,
        controlled_index: deputy,
    })?)
}

/// Zero-order-hold single-deputy CW matrices at period `dt`.
pub fn discrete_cw(cfg: &InspectionConfig, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = crate::dynamics::cw_matrices(cfg.scenario.mean_motion, cfg.scenario.mass);
    let a = DMatrix::from_fn(6, 6, |i, j| a[i][j]);
    let b = DMatrix::from_fn(6, 3, |i, j| b[i][j]);
    lqr::discretize_zoh(&a, &b, dt)
}

fn lqr_gain(cfg: &InspectionConfig, dt: f64, q: f64, r: f64) -> Result<DMatrix<f64>, LqrError> {
    let (ad, bd) = discrete_cw(cfg, dt);
    let (k, _) = lqr::dlqr(
        &ad,
        &bd,
        &(DMatrix::identity(6, 6) * q),
        &(DMatrix::identity(3, 3) * r),
    )?;
    Ok(k)
}

/// `u = −K·(x_i − x_target)`, deliberately unsaturated.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrPrimary {
    pub gain: [[f64; 6]; 3],
    pub target: [f64; 6],
}

impl LqrPrimary {
    pub fn control(&self, x: &[f64]) -> [f64; 3] {
        let mut u = [0.0; 3];
        for (ui, row) in u.iter_mut().zip(&self.gain) {
            *ui = -row
                .iter()
                .zip(x.iter().zip(&self.target))
                .map(|(k, (xi, ti))| k * (xi - ti))
                .sum::<f64>();
        }
        u
    }
}

/// Rest point tracked by `deputy`'s primary: `target_distance` from the chief,
/// `target_spread` away from the anti-sun axis, azimuth `2π·deputy/N`.
pub fn primary_target(cfg: &InspectionConfig, deputy: usize) -> [f64; 3] {
    let e = cfg.scenario.sun_vector;
    // any unit vector orthogonal to e, then a third completing the frame
    let helper = if e[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let u = cross(e, helper);
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let u = [u[0] / un, u[1] / un, u[2] / un];
    let w = cross(e, u);
    let az = 2.0 * std::f64::consts::PI * deputy as f64 / cfg.scenario.deputies as f64;
    let (sb, cb) = cfg.primary.target_spread.sin_cos();
    let d = cfg.primary.target_distance;
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[k] = d * (-cb * e[k] + sb * (az.cos() * u[k] + az.sin() * w[k]));
    }
    p
}

/// LQR primary of `deputy`, tracking [`primary_target`] at rest.
pub fn lqr_primary(cfg: &InspectionConfig, deputy: usize) -> Result<LqrPrimary, ScenarioError> {
    let k = lqr_gain(cfg, cfg.scenario.dt, cfg.primary.q_weight, cfg.primary.r_weight)?;
    let mut gain = [[0.0; 6]; 3];
    for (i, row) in gain.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = k[(i, j)];
        }
    }
    let p = primary_target(cfg, deputy);
    let target = [p[0], p[1], p[2], 0.0, 0.0, 0.0];
    Ok(LqrPrimary { gain, target })
}

/// Backup controller of one deputy: the velocity part of an LQR
/// (`Q = q·I`, `R = r·I`) that holds the deputy at rest where it is,
/// saturated to the thrust box. Acts on the stacked state.
pub fn scenario_backup(cfg: &InspectionConfig, deputy: usize) -> Result<LinearFeedback<f64>, ScenarioError> {
    let n = CW_BLOCK * cfg.scenario.deputies;
    let k = lqr_gain(cfg, cfg.backup.dt, cfg.backup.q_weight, cfg.backup.r_weight)?;
    let mut gain = vec![0.0; CW_CONTROLS * n];
    for i in 0..CW_CONTROLS {
        for j in 3..6 {
            gain[i * n + deputy * CW_BLOCK + j] = k[(i, j)];
        }
    }
    LinearFeedback::new(
        gain,
        vec![0.0; n],
        ControlBounds::symmetric(cfg.scenario.u_max, CW_CONTROLS),
    )
    .map_err(|e| ScenarioError::Dynamics(e.into()))
}

pub type ScenarioFilter = ConstraintFilter<f64, CwDynamics<f64>, LinearFeedback<f64>>;

/// The RTA instance of one deputy.
pub fn build_filter(cfg: &InspectionConfig, deputy: usize) -> Result<ScenarioFilter, ScenarioError> {
    let dynamics = Arc::new(scenario_dynamics(cfg, deputy)?);
    let kind = cfg.filter.kind;
    let constraints = if kind.is_implicit() {
        make_constraints(cfg, deputy)?
    } else {
        explicit_constraints(cfg, deputy, Arc::clone(&dynamics))?
    };
    let settings = FilterSettings {
        dt: cfg.scenario.dt,
        horizon: cfg.backup.horizon,
        backup_dt: cfg.backup.dt,
        stride: cfg.backup.stride,
        include_minima: cfg.backup.include_minima,
        slack_weight: cfg.qp.slack_weight,
    };
    Ok(ConstraintFilter::new(
        kind,
        dynamics,
        constraints,
        scenario_backup(cfg, deputy)?,
        ControlBounds::symmetric(cfg.scenario.u_max, CW_CONTROLS),
        settings,
    ))
}

fn unit_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Seeded deputy states: range uniform in `[min_range, max_range]`,
/// direction uniform on the sphere outside the sun cone, velocity uniform in
/// a ball of radius `speed_fraction·(ν₀ + ν₁·range)`. Deputies are kept at
/// least `4r_d` apart.
pub fn initial_states(cfg: &InspectionConfig) -> Result<Vec<[f64; 6]>, ScenarioError> {
    let s = &cfg.scenario;
    let init = &cfg.initial;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let half_cos = (s.sun_angle / 2.0).cos();
    let mut out: Vec<[f64; 6]> = Vec::with_capacity(s.deputies);
    for i in 0..s.deputies {
        let mut placed = None;
        for _ in 0..10_000 {
            let range = rng.random_range(init.min_range..=init.max_range);
            let dir = unit_sphere(&mut rng);
            let along: f64 = dir.iter().zip(&s.sun_vector).map(|(a, b)| a * b).sum();
            if half_cos - along <= 0.05 {
                continue;
            }
            let p = [range * dir[0], range * dir[1], range * dir[2]];
            let clear = out.iter().all(|q| {
                let d: f64 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt();
                d > 4.0 * s.r_d
            });
            if !clear {
                continue;
            }
            let radius = init.speed_fraction * (s.nu0 + s.nu1 * range);
            let vdir = unit_sphere(&mut rng);
            let scale = radius * rng.random::<f64>().cbrt();
            let v = [scale * vdir[0], scale * vdir[1], scale * vdir[2]];
            if v.iter().any(|c| c.abs() >= s.v_max) {
                continue;
            }
            placed = Some([p[0], p[1], p[2], v[0], v[1], v[2]]);
            break;
        }
        out.push(placed.ok_or(ScenarioError::Placement(i))?);
    }
    Ok(out)
}

/// One logged row: a deputy at the start of a control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub deputy: usize,
    pub state: [f64; 6],
    pub u_des: [f64; 3],
    pub u_act: [f64; 3],
    pub intervening: bool,
    /// `φ₁…φ₇`; `φ₂` is the minimum over the other deputies (`+∞` for one deputy).
    pub phi: [f64; NUM_PHI],
    pub qp_status: Option<QpStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub records: Vec<StepRecord>,
    /// Wall-clock seconds spent in the simulation loop.
    pub wall_clock: f64,
}

/// Aggregates of a [`SimulationLog`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogSummary {
    pub rows: usize,
    pub min_phi: [f64; NUM_PHI],
    pub min_phi_overall: f64,
    pub interventions: usize,
    pub relaxations: usize,
    pub max_abs_u_act: f64,
    pub wall_clock: f64,
}

/// Tolerance on `φ ≥ 0` when judging a run safe.
pub const SAFETY_TOL: f64 = 1e-6;

impl LogSummary {
    pub fn is_safe(&self) -> bool {
        self.min_phi_overall >= -SAFETY_TOL
    }
}

impl SimulationLog {
    pub fn summary(&self) -> LogSummary {
        let mut min_phi = [f64::INFINITY; NUM_PHI];
        let mut interventions = 0;
        let mut relaxations = 0;
        let mut max_u: f64 = 0.0;
        for r in &self.records {
            for (m, v) in min_phi.iter_mut().zip(&r.phi) {
                *m = m.min(*v);
            }
            interventions += usize::from(r.intervening);
            relaxations += usize::from(r.qp_status == Some(QpStatus::Relaxed));
            max_u = r.u_act.iter().fold(max_u, |a, u| a.max(u.abs()));
        }
        LogSummary {
            rows: self.records.len(),
            min_phi_overall: min_phi.iter().copied().fold(f64::INFINITY, f64::min),
            min_phi,
            interventions,
            relaxations,
            max_abs_u_act: max_u,
            wall_clock: self.wall_clock,
        }
    }
}

/// `φ₁…φ₇` of one deputy from its constraint list.
fn phi_values(cs: &[SafetyConstraint<f64>], x: &[f64]) -> Result<[f64; NUM_PHI], ScenarioError> {
    let mut phi = [f64::INFINITY; NUM_PHI];
    for c in cs {
        let k = constraint_kind(&c.name).unwrap_or(1);
        let v = c.evaluate(x)?;
        phi[k - 1] = phi[k - 1].min(v);
    }
    Ok(phi)
}

/// Runs the scenario with the LQR primary.
pub fn run_simulation(cfg: &InspectionConfig) -> Result<SimulationLog, ScenarioError> {
    cfg.validate().map_err(ScenarioError::Config)?;
    let primaries = (0..cfg.scenario.deputies)
        .map(|i| lqr_primary(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    run_simulation_with(cfg, |i, x| primaries[i].control(x))
}

/// Runs the scenario with a custom primary controller `(deputy, x_i) ↦ u_des`.
///
/// Every step filters all deputies against the same stacked state, in deputy
/// order, and then advances every deputy block with its filtered control.
pub fn run_simulation_with<P>(cfg: &InspectionConfig, primary: P) -> Result<SimulationLog, ScenarioError>
where
    P: Fn(usize, &[f64]) -> [f64; 3] + Sync,
{
    cfg.validate().map_err(ScenarioError::Config)?;
    let s = &cfg.scenario;
    let n_dep = s.deputies;
    let steps = cfg.steps();
    let start = Instant::now();

    let single = cw_system(CwParams {
        mean_motion: s.mean_motion,
        mass: s.mass,
        num_deputies: 1,
        controlled_index: 0,
    })?;
    let bounds = ControlBounds::symmetric(s.u_max, CW_CONTROLS);
    let phis = (0..n_dep)
        .map(|i| make_constraints(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut filters = if cfg.filter.enabled {
        Some(
            (0..n_dep)
                .map(|i| build_filter(cfg, i))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };

    let mut state: Vec<f64> = initial_states(cfg)?.into_iter().flatten().collect();
    let mut records = Vec::with_capacity(steps * n_dep);
    for step in 0..steps {
        let t = step as f64 * s.dt;
        let u_des: Vec<[f64; 3]> = (0..n_dep)
            .map(|i| primary(i, &state[i * CW_BLOCK..(i + 1) * CW_BLOCK]))
            .collect();
        let outputs = match filters.as_mut() {
            Some(fs) => filter_all(fs, &state, &u_des, t, cfg.filter.parallel)
                .map_err(|(deputy, source)| ScenarioError::Filter { step, deputy, source })?,
            None => u_des.iter().map(|u| (bounds.clamp(u), false, None)).collect(),
        };
        let mut next = state.clone();
        for (i, (u_act, intervening, qp_status)) in outputs.into_iter().enumerate() {
            let block = &state[i * CW_BLOCK..(i + 1) * CW_BLOCK];
            let mut rec_state = [0.0; 6];
            rec_state.copy_from_slice(block);
            let mut ua = [0.0; 3];
            ua.copy_from_slice(&u_act);
            records.push(StepRecord {
                time: t,
                deputy: i,
                state: rec_state,
                u_des: u_des[i],
                u_act: ua,
                intervening,
                phi: phi_values(&phis[i], &state)?,
                qp_status,
            });
            let advanced = single.propagate(block, &u_act, s.dt)?;
            next[i * CW_BLOCK..(i + 1) * CW_BLOCK].copy_from_slice(&advanced);
        }
        state = next;
    }
    Ok(SimulationLog {
        records,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

type Filtered = (Vec<f64>, bool, Option<QpStatus>);

fn filter_all(
    filters: &mut [ScenarioFilter],
    state: &[f64],
    u_des: &[[f64; 3]],
    t: f64,
    parallel: bool,
) -> Result<Vec<Filtered>, (usize, FilterError)> {
    let one = |i: usize, f: &mut ScenarioFilter| {
        f.filter(state, &u_des[i], t)
            .map(|o| (o.u_act, o.intervening, o.qp_status))
            .map_err(|e| (i, e))
    };
    if parallel && filters.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = filters
                .iter_mut()
                .enumerate()
                .map(|(i, f)| scope.spawn(move || one(i, f)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("filter thread panicked"))
                .collect()
        })
    } else {
        filters.iter_mut().enumerate().map(|(i, f)| one(i, f)).collect()
    }
}
