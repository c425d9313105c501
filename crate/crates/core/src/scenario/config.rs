use serde::{Deserialize, Serialize};

use crate::filters::FilterKind;

/// Class-κ parameters and construction route for one scenario constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSpec {
    /// Exponents of the barrier strengthening `10^a·z + 10^b·z³`.
    pub a: f64,
    pub b: f64,
    /// Enforce through a relative-degree-2 HOCBF instead of directly.
    pub hocbf: bool,
    /// Exponents of the inner HOCBF stage `α₁`.
    pub stage_a: f64,
    pub stage_b: f64,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self {
            a: -2.0,
            b: -2.0,
            hocbf: false,
            stage_a: -2.0,
            stage_b: -2.0,
        }
    }
}

impl ConstraintSpec {
    fn hocbf() -> Self {
        Self {
            hocbf: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintTable {
    pub phi_1: ConstraintSpec,
    pub phi_2: ConstraintSpec,
    pub phi_3: ConstraintSpec,
    pub phi_4: ConstraintSpec,
    pub phi_5: ConstraintSpec,
    pub phi_6: ConstraintSpec,
    pub phi_7: ConstraintSpec,
}

impl Default for ConstraintTable {
    fn default() -> Self {
        Self {
            phi_1: ConstraintSpec::hocbf(),
            phi_2: ConstraintSpec::hocbf(),
            phi_3: ConstraintSpec::default(),
            phi_4: ConstraintSpec::hocbf(),
            phi_5: ConstraintSpec::default(),
            phi_6: ConstraintSpec::default(),
            phi_7: ConstraintSpec::default(),
        }
    }
}

impl ConstraintTable {
    /// Spec for constraint `k` in `1..=7`.
    pub fn get(&self, k: usize) -> &ConstraintSpec {
        match k {
            1 => &self.phi_1,
            2 => &self.phi_2,
            3 => &self.phi_3,
            4 => &self.phi_4,
            5 => &self.phi_5,
            6 => &self.phi_6,
            _ => &self.phi_7,
        }
    }
}

/// Physical parameters and run length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Per-axis thrust limit, N.
    pub u_max: f64,
    /// Deputy mass, kg.
    pub mass: f64,
    /// Chief mean motion, rad/s.
    pub mean_motion: f64,
    /// Deputy radius, m.
    pub r_d: f64,
    /// Chief radius, m.
    pub r_c: f64,
    /// Speed allowed at the chief, m/s.
    pub nu0: f64,
    /// Speed allowed per metre of range, 1/s.
    pub nu1: f64,
    /// Unit vector toward the sun.
    pub sun_vector: [f64; 3],
    /// Full angle of the sun-exclusion cone, rad.
    pub sun_angle: f64,
    /// Per-axis speed limit, m/s.
    pub v_max: f64,
    pub deputies: usize,
    /// Simulated time, s.
    pub duration: f64,
    /// Control period, s.
    pub dt: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let n = 0.001027;
        Self {
            u_max: 1.0,
            mass: 12.0,
            mean_motion: n,
            r_d: 5.0,
            r_c: 5.0,
            nu0: 0.2,
            nu1: 4.0 * n,
            sun_vector: [1.0, 0.0, 0.0],
            sun_angle: std::f64::consts::PI / 6.0,
            v_max: 2.0,
            deputies: 5,
            duration: 2000.0,
            dt: 1.0,
            seed: 0,
        }
    }
}

/// The LQR primary controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrimaryParams {
    /// Distance of the tracked points from the chief, m.
    pub target_distance: f64,
    /// Angle between the anti-sun axis and each deputy's target direction,
    /// rad. Targets are spread evenly in azimuth around the axis; zero puts
    /// every deputy on the axis itself.
    pub target_spread: f64,
    pub q_weight: f64,
    pub r_weight: f64,
}

impl Default for PrimaryParams {
    fn default() -> Self {
        Self {
            target_distance: 50.0,
            target_spread: std::f64::consts::PI / 6.0,
            q_weight: 1.0,
            r_weight: 1e3,
        }
    }
}

/// Random initial deputy placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialParams {
    pub min_range: f64,
    pub max_range: f64,
    /// Fraction of the range-dependent speed limit used as the velocity ball radius.
    pub speed_fraction: f64,
}

impl Default for InitialParams {
    fn default() -> Self {
        Self {
            min_range: 100.0,
            max_range: 800.0,
            speed_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterParams {
    pub kind: FilterKind,
    /// With `false` the primary's output is only clipped to the thrust box.
    pub enabled: bool,
    /// Filter the deputies on worker threads within each step.
    pub parallel: bool,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            kind: FilterKind::ExplicitAsif,
            enabled: true,
            parallel: false,
        }
    }
}

/// Backup controller and backup trajectory settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackupParams {
    pub horizon: f64,
    pub dt: f64,
    pub stride: usize,
    pub include_minima: bool,
    pub q_weight: f64,
    pub r_weight: f64,
}

impl Default for BackupParams {
    fn default() -> Self {
        Self {
            horizon: 500.0,
            dt: 1.0,
            stride: 5,
            include_minima: true,
            q_weight: 1.0,
            r_weight: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QpParams {
    /// Penalty on the squared shared slack when the rows are relaxed.
    pub slack_weight: f64,
}

impl Default for QpParams {
    fn default() -> Self {
        Self {
            slack_weight: crate::qp::SLACK_WEIGHT,
        }
    }
}

/// Everything needed to run the inspection scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InspectionConfig {
    pub scenario: ScenarioParams,
    pub primary: PrimaryParams,
    pub initial: InitialParams,
    pub filter: FilterParams,
    pub backup: BackupParams,
    pub qp: QpParams,
    pub constraints: ConstraintTable,
}

impl InspectionConfig {
    /// Number of control steps, `duration / dt`.
    pub fn steps(&self) -> usize {
        (self.scenario.duration / self.scenario.dt).round() as usize
    }

    /// Checks every invariant of the configuration; the message names the
    /// offending field.
    pub fn validate(&self) -> Result<(), String> {
        let s = &self.scenario;
        let positive = [
            ("scenario.u_max", s.u_max),
            ("scenario.mass", s.mass),
            ("scenario.mean_motion", s.mean_motion),
            ("scenario.r_d", s.r_d),
            ("scenario.r_c", s.r_c),
            ("scenario.nu0", s.nu0),
            ("scenario.nu1", s.nu1),
            ("scenario.sun_angle", s.sun_angle),
            ("scenario.v_max", s.v_max),
            ("scenario.duration", s.duration),
            ("scenario.dt", s.dt),
            ("initial.min_range", self.initial.min_range),
            ("initial.max_range", self.initial.max_range),
            ("initial.speed_fraction", self.initial.speed_fraction),
            ("primary.q_weight", self.primary.q_weight),
            ("primary.r_weight", self.primary.r_weight),
            ("backup.horizon", self.backup.horizon),
            ("backup.dt", self.backup.dt),
            ("backup.q_weight", self.backup.q_weight),
            ("backup.r_weight", self.backup.r_weight),
            ("qp.slack_weight", self.qp.slack_weight),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if s.deputies == 0 {
            return Err("scenario.deputies must be at least 1".into());
        }
        let norm = s.sun_vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(format!(
                "scenario.sun_vector must be unit length, has norm {norm}"
            ));
        }
        if s.sun_angle >= std::f64::consts::PI {
            return Err("scenario.sun_angle must be below pi".into());
        }
        let steps = s.duration / s.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err("scenario.duration must be a whole number of scenario.dt".into());
        }
        if self.initial.min_range > self.initial.max_range {
            return Err("initial.min_range exceeds initial.max_range".into());
        }
        if self.initial.min_range <= s.r_c + s.r_d {
            return Err("initial.min_range must exceed r_c + r_d".into());
        }
        if !(self.primary.target_distance.is_finite() && self.primary.target_distance > s.r_c + s.r_d) {
            return Err("primary.target_distance must exceed r_c + r_d".into());
        }
        let spread = self.primary.target_spread;
        if !(spread.is_finite() && (0.0..=std::f64::consts::PI).contains(&spread)) {
            return Err("primary.target_spread must lie in [0, pi]".into());
        }
        if crate::backup::horizon_steps(self.backup.horizon, self.backup.dt).is_none() {
            return Err("backup.horizon must be a whole number of backup.dt".into());
        }
        if self.backup.stride == 0 {
            return Err("backup.stride must be at least 1".into());
        }
        for k in 1..=7 {
            let c = self.constraints.get(k);
            for (field, v) in [
                ("a", c.a),
                ("b", c.b),
                ("stage_a", c.stage_a),
                ("stage_b", c.stage_b),
            ] {
                if !v.is_finite() {
                    return Err(format!("constraints.phi_{k}.{field} must be finite"));
                }
            }
        }
        Ok(())
    }
}
