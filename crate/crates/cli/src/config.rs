use std::path::Path;

use rta_core::filters::FilterKind;
use rta_core::scenario::InspectionConfig;

use crate::CliError;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub filter: Option<FilterKind>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub deputies: Option<usize>,
    /// Disable the RTA filters, leaving only the thrust box clip.
    pub no_rta: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut InspectionConfig) {
        if let Some(k) = self.filter {
            cfg.filter.kind = k;
        }
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(d) = self.duration {
            cfg.scenario.duration = d;
        }
        if let Some(dt) = self.dt {
            cfg.scenario.dt = dt;
        }
        if let Some(n) = self.deputies {
            cfg.scenario.deputies = n;
        }
        if self.no_rta {
            cfg.filter.enabled = false;
        }
    }
}

/// Parses a TOML config. Missing fields keep their defaults; unknown fields
/// are rejected. The error message carries the line, column and key.
pub fn parse_config(text: &str) -> Result<InspectionConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Reads the config at `path` (defaults when `None`), applies the overrides
/// and validates the result.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<InspectionConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", p.display())),
                other => other,
            })?
        }
        None => InspectionConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}
