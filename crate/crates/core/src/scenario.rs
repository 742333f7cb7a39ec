//! Scenario files: one TOML document per run with sections `[params]`,
//! `[forcing]`, `[initial]`, `[grid]`, `[time]` and `[output]`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{auto_lyapunov_config, DiagnosticsConfig, LyapunovConfig};
use crate::error::{Error, Result};
use crate::model::{
    admissible_eta_interval, sample_initial_data, validate_params, ForcingSpec, InitialData,
    PhysicalParams, Profile, SampledInitial, ValidationReport,
};
use crate::solver::{stable_dt, GridSpec, RunConfig, System};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Parameters as written in a file; η may be omitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    rho: f64,
    mu: f64,
    #[serde(rename = "J")]
    j: f64,
    delta: f64,
    xi: f64,
    b: f64,
    mu1: f64,
    mu2: f64,
    tau: f64,
    eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_out_every")]
    pub out_every: usize,
    /// Fixed step; overrides the CFL choice when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_out_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    params: RawParams,
    #[serde(default)]
    forcing: ForcingSpec,
    #[serde(default)]
    initial: InitialData,
    grid: GridConfig,
    time: TimeConfig,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    allow_inadmissible: bool,
    #[serde(default)]
    diagnostics: Option<DiagnosticsConfig>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A fully resolved scenario (η filled in).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub forcing: ForcingSpec,
    pub initial: InitialData,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(skip)]
    pub output: OutputConfig,
    pub seed: u64,
    /// Run even when the parameter hypotheses fail.
    pub allow_inadmissible: bool,
    pub diagnostics: DiagnosticsConfig,
}

impl Scenario {
    /// The default verification scenario.
    pub fn default_a1() -> Self {
        Scenario {
            params: PhysicalParams::with_midpoint_eta(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 1.0),
            forcing: ForcingSpec::PowerLaw { k0: 1.0, theta: 1.0 },
            initial: InitialData {
                phi0: Profile::SineMode { k: 1, amp: 0.1 },
                ..InitialData::zero()
            },
            grid: GridConfig { n: 100, m: 41 },
            time: TimeConfig {
                t_end: 30.0,
                cfl: 0.5,
                out_every: 1,
                dt: None,
            },
            output: OutputConfig::default(),
            seed: DEFAULT_SEED,
            allow_inadmissible: false,
            diagnostics: DiagnosticsConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let raw: RawScenario = value
            .try_into()
            .map_err(|e| Error::Scenario(format!("invalid scenario: {e}")))?;
        Ok(Self::resolve(raw))
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    fn resolve(raw: RawScenario) -> Self {
        let r = raw.params;
        let mut params = PhysicalParams {
            rho: r.rho,
            mu: r.mu,
            j: r.j,
            delta: r.delta,
            xi: r.xi,
            b: r.b,
            mu1: r.mu1,
            mu2: r.mu2,
            tau: r.tau,
            eta: 0.0,
        };
        params.eta = r.eta.unwrap_or_else(|| admissible_eta_interval(&params).midpoint());
        Scenario {
            params,
            forcing: raw.forcing,
            initial: raw.initial,
            grid: raw.grid,
            time: raw.time,
            output: raw.output,
            seed: raw.seed,
            allow_inadmissible: raw.allow_inadmissible,
            diagnostics: raw.diagnostics.unwrap_or_default(),
        }
    }

    /// SHA-256 of the canonical JSON of the resolved scenario (output
    /// location excluded), hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..8].to_string()
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.m)
    }

    pub fn system(&self) -> Result<System> {
        Ok(System {
            params: self.params,
            forcing: self.forcing.clone(),
            grid: self.grid_spec()?,
        })
    }

    pub fn dt(&self) -> Result<f64> {
        match self.time.dt {
            Some(dt) => Ok(dt),
            None => Ok(stable_dt(&self.grid_spec()?, &self.params, self.time.cfl)),
        }
    }

    pub fn validate_params(&self) -> ValidationReport {
        validate_params(&self.params)
    }

    /// Structural checks plus parameter hypotheses. Returns warnings that do
    /// not block a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.grid_spec()?;
        self.forcing.validate()?;
        let t = &self.time;
        if !(t.t_end.is_finite() && t.t_end > 0.0) {
            return Err(Error::Scenario(format!("time.t_end must be positive, got {}", t.t_end)));
        }
        if !(t.cfl.is_finite() && t.cfl > 0.0) {
            return Err(Error::Scenario(format!("time.cfl must be positive, got {}", t.cfl)));
        }
        if t.out_every == 0 {
            return Err(Error::Scenario("time.out_every must be at least 1".into()));
        }
        if let Some(dt) = t.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Scenario(format!("time.dt must be positive, got {dt}")));
            }
        }
        if self.diagnostics.cp <= 0.0 {
            return Err(Error::Scenario("diagnostics.cp must be positive".into()));
        }
        let mut warnings = Vec::new();
        if t.cfl > 1.0 {
            warnings.push(format!("cfl = {} exceeds 1; the explicit scheme may be unstable", t.cfl));
        }
        let report = self.validate_params();
        if !report.admissible {
            if self.allow_inadmissible {
                warnings.push(format!("running with violated hypotheses: {}", report.summary()));
            } else {
                return Err(Error::Hypothesis(report.summary()));
            }
        }
        if report.degenerate {
            warnings.push("C_E = 0: dissipation check reduces to monotonicity".into());
        }
        Ok(warnings)
    }

    pub fn sample_initial(&self) -> Result<SampledInitial> {
        sample_initial_data(&self.initial, &self.grid_spec()?, self.params.tau)
    }

    /// Lyapunov weights when the decay hypothesis holds.
    pub fn lyapunov_config(&self) -> Option<LyapunovConfig> {
        auto_lyapunov_config(&self.params, &self.forcing, &self.diagnostics).ok()
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.time.t_end, self.dt()?);
        cfg.out_every = self.time.out_every;
        cfg.diagnostics = self.diagnostics;
        cfg.lyapunov = self.lyapunov_config();
        Ok(cfg)
    }

    /// Same scenario with the forcing switched off.
    pub fn linear(&self) -> Self {
        Scenario {
            forcing: ForcingSpec::Zero,
            ..self.clone()
        }
    }

    /// Same scenario on another grid.
    pub fn with_grid(&self, n: usize, m: usize) -> Self {
        Scenario {
            grid: GridConfig { n, m },
            ..self.clone()
        }
    }
}

/// Applies `a.b.c=value`; the value is parsed as a TOML literal, falling back
/// to a bare string.
pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("override {spec:?} is not key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::Scenario(format!("override {spec:?} has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for k in &keys[..keys.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("override path {path:?} crosses a non-table")))?;
        cur = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| Error::Scenario(format!("override path {path:?} crosses a non-table")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
