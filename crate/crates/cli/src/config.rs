//! Experiment configuration (TOML, schema version 1).

use std::path::{Path, PathBuf};

use dyadic_tents::geometry::InstanceConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub instance: InstanceConfig,
    /// Dyadic depth `G`; defaults to the instance resolution.
    #[serde(default)]
    pub depth: Option<u32>,
    #[serde(default)]
    pub regions: RegionsConfig,
    /// Label of `Q0` (`k2:0.1`); the root when absent.
    #[serde(default)]
    pub root: Option<String>,
    #[serde(default)]
    pub function: FunctionSpec,
    #[serde(default)]
    pub audits: AuditConfig,
    #[serde(default)]
    pub wos: WosConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn schema() -> u32 {
    SCHEMA
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// `(eta, K)`; both absent means calibrate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub eta: Option<f64>,
    pub k: Option<f64>,
    #[serde(default = "two")]
    pub aperture: f64,
    #[serde(default = "twelve")]
    pub calibration_leaves: usize,
    #[serde(default = "grid")]
    pub calibration_grid: usize,
}

impl Default for RegionsConfig {
    fn default() -> Self {
        RegionsConfig { eta: None, k: None, aperture: 2.0, calibration_leaves: 12, calibration_grid: 41 }
    }
}

fn two() -> f64 {
    2.0
}

fn twelve() -> usize {
    12
}

fn grid() -> usize {
    41
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    Indicator { cube: String },
    Staircase {
        #[serde(default)]
        rightmost: bool,
    },
    Martingale { levels: u32, seed: u64 },
    /// `log(1 / max(|x - p|, floor))`.
    LogDistance {
        point: Vec<f64>,
        #[serde(default = "log_floor")]
        floor: f64,
    },
    Random { seed: u64 },
    /// `leaf,value` rows.
    Csv { path: PathBuf },
}

fn log_floor() -> f64 {
    1e-3
}

impl Default for FunctionSpec {
    fn default() -> Self {
        FunctionSpec::Constant { value: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub carleson: bool,
    pub balls: usize,
    /// Box tests stop `margin` generations above the leaves.
    pub margin: u32,
    /// Largest accepted `C_mu / (C0 ||f||)`.
    pub carleson_max: f64,
    /// Largest accepted ball/box ratio.
    pub consistency_max: f64,
    pub sum_difference: bool,
    pub kappa: f64,
    pub tent_adr: bool,
    pub tent_adr_cubes: usize,
    pub nt: bool,
    pub nt_points: usize,
    pub nt_tolerance: f64,
    pub nt_min_fraction: f64,
    pub tv: bool,
    pub tv_boxes: usize,
    pub tv_thetas: Vec<f64>,
    pub tv_tolerance: f64,
    pub gradient: bool,
    pub gradient_samples: usize,
    pub gradient_max: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            carleson: true,
            balls: 500,
            margin: 0,
            carleson_max: 1e4,
            consistency_max: 16.0,
            sum_difference: false,
            kappa: 1.0,
            tent_adr: false,
            tent_adr_cubes: 8,
            nt: true,
            nt_points: 200,
            nt_tolerance: 1e-9,
            nt_min_fraction: 0.75,
            tv: true,
            tv_boxes: 20,
            tv_thetas: vec![0.25, 0.125],
            tv_tolerance: 0.05,
            gradient: true,
            gradient_samples: 500,
            gradient_max: 1e4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WosConfig {
    pub enabled: bool,
    pub walks: usize,
    /// Stop shell; twice the leaf diameter when absent.
    pub eps_stop: Option<f64>,
    /// Sample points; a column above the centre of `E` when empty.
    pub points: Vec<Vec<f64>>,
    /// Optional trace probe at a leaf label.
    pub trace_leaf: Option<String>,
    pub trace_heights: Vec<f64>,
}

impl Default for WosConfig {
    fn default() -> Self {
        WosConfig { enabled: false, walks: 10_000, eps_stop: None, points: Vec::new(), trace_leaf: None, trace_heights: Vec::new() }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        // relative data paths are taken from the config's directory
        if let FunctionSpec::Csv { path: p } = &mut cfg.function {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn depth(&self) -> u32 {
        self.depth.unwrap_or(self.instance.depth)
    }

    /// Checks that do not need the cube system.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema != SCHEMA {
            return Err(format!("unsupported schema version {} (expected {SCHEMA})", self.schema));
        }
        if self.depth() > self.instance.depth {
            return Err(format!("depth {} exceeds the instance resolution {}", self.depth(), self.instance.depth));
        }
        match (self.regions.eta, self.regions.k) {
            (Some(_), None) | (None, Some(_)) => return Err("regions.eta and regions.k go together".into()),
            _ => {}
        }
        if !(self.regions.aperture > 0.0) {
            return Err("regions.aperture must be positive".into());
        }
        let a = &self.audits;
        let tolerances = [
            ("carleson_max", a.carleson_max),
            ("consistency_max", a.consistency_max),
            ("kappa", a.kappa),
            ("nt_tolerance", a.nt_tolerance),
            ("nt_min_fraction", a.nt_min_fraction),
            ("tv_tolerance", a.tv_tolerance),
            ("gradient_max", a.gradient_max),
        ];
        for (name, v) in tolerances {
            if !(v > 0.0) {
                return Err(format!("audits.{name} must be positive"));
            }
        }
        if a.tv && (a.tv_thetas.is_empty() || a.tv_thetas.iter().any(|t| !(*t > 0.0 && *t <= 0.5))) {
            return Err("audits.tv_thetas must be non-empty and in (0, 1/2]".into());
        }
        if self.wos.enabled && self.wos.walks == 0 {
            return Err("wos.walks must be positive".into());
        }
        if let Some(e) = self.wos.eps_stop {
            if !(e > 0.0) {
                return Err("wos.eps_stop must be positive".into());
            }
        }
        let dim = self.instance.ambient_dim;
        if self.wos.points.iter().any(|p| p.len() != dim) {
            return Err(format!("wos.points need {dim} coordinates"));
        }
        if let FunctionSpec::LogDistance { point, floor } = &self.function {
            if point.len() != dim || !(*floor > 0.0) {
                return Err(format!("log-distance needs a {dim}-point and a positive floor"));
            }
        }
        Ok(())
    }
}
