//! Experiment configuration: a TOML file with sections `model`, `wavetrain`,
//! `bloch`, `grid`, `perturbation`, `stepper`, `analysis`, plus `key=value`
//! overrides addressed as `section.key`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::Grid2D;
use crate::model::ReactionDiffusionSystem;
use crate::sim2d::{PerturbationKind, PerturbationSpec};
use crate::stepper::{Scheme, StepperOpts};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "real_gl".into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveTrainConfig {
    /// `q² = (2πk)²`; ignored when `k` is set.
    pub q2: f64,
    pub k: Option<f64>,
    pub n_modes: usize,
    pub tol: f64,
}

impl Default for WaveTrainConfig {
    fn default() -> Self {
        Self {
            q2: 0.2,
            k: None,
            n_modes: 64,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochConfig {
    pub n_modes: usize,
    pub nu_x_points: usize,
    pub nu_y_points: usize,
    pub nu_y_max: Option<f64>,
    pub fd_step: f64,
}

impl Default for BlochConfig {
    fn default() -> Self {
        Self {
            n_modes: 32,
            nu_x_points: 65,
            nu_y_points: 65,
            nu_y_max: None,
            fd_step: crate::bloch::DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lx: 16.0,
            ly: 192.0,
            nx: 512,
            ny: 512,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.lx, self.ly, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub kind: String,
    pub beta: f64,
    pub gamma: f64,
    pub e0: f64,
    pub m0: f64,
    pub m0_y: Option<f64>,
    pub seed: u64,
    pub modulate: bool,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            kind: "fully_localized".into(),
            beta: 0.0,
            gamma: 1.0,
            e0: 1e-2,
            m0: 0.01,
            m0_y: Some(1.0),
            seed: 0,
            modulate: false,
        }
    }
}

impl PerturbationConfig {
    pub fn spec(&self) -> Result<PerturbationSpec> {
        let kind = PerturbationKind::parse(&self.kind)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown perturbation kind `{}`", self.kind)))?;
        Ok(PerturbationSpec {
            kind,
            beta_gamma: (self.beta, self.gamma),
            e0: self.e0,
            m0: self.m0,
            m0_y: self.m0_y,
            seed: self.seed,
            modulate: self.modulate,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    /// First snapshot time of the geometric schedule.
    pub t_min: f64,
    pub ratio: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: "sbdf2".into(),
            dt: 0.01,
            t_final: 100.0,
            t_min: 2.0 * crate::sim2d::SCHEDULE_RATIO.powi(-4),
            ratio: crate::sim2d::SCHEDULE_RATIO,
        }
    }
}

impl StepperConfig {
    pub fn opts(&self) -> Result<StepperOpts> {
        let scheme = Scheme::parse(&self.scheme)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown scheme `{}`", self.scheme)))?;
        Ok(StepperOpts {
            scheme,
            dt: self.dt,
            ..Default::default()
        })
    }

    pub fn schedule(&self) -> Vec<f64> {
        crate::sim2d::geometric_schedule(self.t_min, self.t_final, self.ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fit_lo: f64,
    pub fit_hi: f64,
    /// Width of the Green's-function source, in periods.
    pub greens_sigma: f64,
    pub greens_t_final: f64,
    /// Fixed weight constant; chosen from the candidates when absent.
    pub weight_m: Option<f64>,
    pub force: bool,
    pub write_fields: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit_lo: 5.0,
            fit_hi: 100.0,
            greens_sigma: 0.05,
            greens_t_final: 80.0,
            weight_m: None,
            force: false,
            write_fields: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub wavetrain: WaveTrainConfig,
    pub bloch: BlochConfig,
    pub grid: GridConfig,
    pub perturbation: PerturbationConfig,
    pub stepper: StepperConfig,
    pub analysis: AnalysisConfig,
}

fn parse_value(raw: &str) -> toml::Value {
    // reuse the TOML grammar for scalars; anything else is a bare string
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `section.key=value` (nested keys allowed, e.g. `model.params.a`).
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::ConfigInvalid(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::ConfigInvalid(format!("override key `{path}` must be section.key")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::ConfigInvalid(format!("`{k}` is not a section")))?;
    }
    let mut value = parse_value(raw.trim());
    // integers are accepted where floats are expected
    if let toml::Value::Integer(i) = value {
        if !matches!(keys[keys.len() - 1], "nx" | "ny" | "n_modes" | "nu_x_points" | "nu_y_points" | "seed") {
            value = toml::Value::Float(i as f64);
        }
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn normalize_numbers(v: &mut toml::Value, key: &str) {
    match v {
        toml::Value::Table(t) => {
            for (k, x) in t.iter_mut() {
                normalize_numbers(x, k);
            }
        }
        toml::Value::Integer(i)
            if !matches!(key, "nx" | "ny" | "n_modes" | "nu_x_points" | "nu_y_points" | "seed") =>
        {
            *v = toml::Value::Float(*i as f64);
        }
        _ => {}
    }
}

impl Config {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut value = toml::Value::Table(table);
        normalize_numbers(&mut value, "");
        let cfg: Config = value.try_into().map_err(|e: toml::de::Error| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.wavetrain.k.is_none() && !(self.wavetrain.q2 >= 0.0) {
            return bad(format!("wavetrain.q2 = {} must be >= 0", self.wavetrain.q2));
        }
        if self.wavetrain.n_modes < 16 || self.wavetrain.n_modes % 2 != 0 {
            return bad("wavetrain.n_modes must be even and >= 16".into());
        }
        if self.bloch.n_modes < 8 || self.bloch.nu_x_points < 3 || self.bloch.nu_y_points < 3 {
            return bad("bloch grid too small".into());
        }
        self.grid.grid()?;
        self.perturbation.spec()?;
        self.stepper.opts()?;
        if !(self.stepper.dt > 0.0 && self.stepper.t_final > 0.0 && self.stepper.t_min > 0.0 && self.stepper.ratio > 1.0) {
            return bad("stepper times must be positive and ratio > 1".into());
        }
        if !(self.analysis.fit_lo > 0.0 && self.analysis.fit_hi > self.analysis.fit_lo) {
            return bad("analysis fit window must satisfy 0 < fit_lo < fit_hi".into());
        }
        Ok(())
    }

    pub fn system(&self) -> Result<ReactionDiffusionSystem> {
        crate::model::from_config(&self.model.name, &self.model.params)
    }

    /// Wavenumber `k` (`q = 2πk`).
    pub fn wavenumber(&self) -> f64 {
        self.wavetrain
            .k
            .unwrap_or_else(|| self.wavetrain.q2.sqrt() / std::f64::consts::TAU)
    }

    /// Canonical TOML of the fully resolved configuration.
    pub fn resolved(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Config::resolved`].
    pub fn digest(&self) -> String {
        let h = Sha256::digest(self.resolved().as_bytes());
        h.iter().map(|b| format!("{b:02x}")).collect()
    }
}
