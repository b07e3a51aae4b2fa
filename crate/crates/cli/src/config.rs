//! Run configuration: a TOML file of `key = value` lines under section
//! headers, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tposeen::exterior::ExteriorConfig;
use tposeen::geometry::Vec3;
use tposeen::harness::StudyConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub study: StudyConfig,
    pub exterior: ExteriorConfig,
    /// Radii of the far-field rays in the flux-dichotomy study.
    pub decay_radii: Vec<f64>,
    /// Also run truncation sweeps for both data kinds in the flux study.
    pub dichotomy_sweeps: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            study: StudyConfig::default(),
            exterior: ExteriorConfig::default(),
            decay_radii: vec![20.0, 30.0, 45.0, 70.0, 100.0],
            dichotomy_sweeps: false,
            out: PathBuf::from("."),
            seed: 1,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub radii: Option<Vec<f64>>,
    pub modes: Option<usize>,
    pub zeta: Option<Vec3>,
    pub period: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self, String> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &o.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &o.radii {
            cfg.study.radii = v.clone();
        }
        if let Some(v) = o.modes {
            cfg.study.kmax = v;
        }
        if let Some(v) = o.zeta {
            cfg.study.zeta = v;
        }
        if let Some(v) = o.period {
            cfg.study.period = v;
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.threads {
            cfg.threads = v;
        }
        Ok(cfg)
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

pub fn parse_vec3(s: &str) -> Result<Vec3, String> {
    match parse_list(s)?.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        v => Err(format!("expected three comma-separated numbers, got {}", v.len())),
    }
}
