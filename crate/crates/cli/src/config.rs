//! Run configuration: a TOML file with `[model]`, `[run]`, `[tolerances]`
//! and `[output]` sections, overridable from the command line.

use std::fmt;

use serde::{Deserialize, Serialize};

use openaqc::adiabatic::{crossover_track_options, CrossoverOptions};
use openaqc::spectral::{SpectralOptions, TrackOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Dj,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_qubits: usize,
    /// `constant0`, `constant1` or `balanced:<hex>`; the first-bit function when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    pub omega: f64,
    /// One common value, or one per qubit.
    pub lambda: Vec<f64>,
    /// Rate κ of extra σ₋ emission on every qubit.
    pub emission: f64,
    /// Strength μ of extra σx dephasing on the first qubit.
    pub perturbation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub lindblad: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Dj,
            n_qubits: 1,
            f: None,
            omega: 1.0,
            lambda: vec![0.1],
            emission: 0.0,
            perturbation: 0.0,
            h0: None,
            generator: None,
            lindblad: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// `start:stop:points` or `start:stop:points:log`.
    #[serde(rename = "T_grid", skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<String>,
    /// s-grid size; each command picks its own default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Points at which `spectrum` reports the block structure.
    pub s: Vec<f64>,
    pub target: f64,
    pub margin: f64,
    /// Midpoint steps of the exact integrator.
    pub steps: usize,
    /// Run the integrator with twice the configured steps.
    pub step_doubling: bool,
    /// Rows kept per trajectory table.
    pub samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t: None,
            t_grid: None,
            grid: None,
            s: vec![0.0, 0.5, 1.0],
            target: 0.9,
            margin: 10.0,
            steps: 2000,
            step_doubling: false,
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub cluster: f64,
    pub rank_gap: f64,
    pub ambiguity_floor: f64,
    pub condition_limit: f64,
    pub gap_min: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SpectralOptions::default();
        let c = CrossoverOptions::default();
        Self {
            cluster: s.cluster_tol,
            rank_gap: s.rank_gap,
            ambiguity_floor: s.ambiguity_floor,
            condition_limit: s.condition_limit,
            gap_min: c.gap_min,
            fd_step: c.fd_step,
        }
    }
}

impl Tolerances {
    fn apply(&self, mut s: SpectralOptions) -> SpectralOptions {
        s.cluster_tol = self.cluster;
        s.rank_gap = self.rank_gap;
        s.ambiguity_floor = self.ambiguity_floor;
        s.condition_limit = self.condition_limit;
        s
    }

    pub fn track(&self) -> TrackOptions {
        let t = TrackOptions::default();
        TrackOptions { spectral: self.apply(t.spectral), ..t }
    }

    pub fn crossover_track(&self) -> TrackOptions {
        let t = crossover_track_options();
        TrackOptions { spectral: self.apply(t.spectral), ..t }
    }

    pub fn crossover(&self) -> CrossoverOptions {
        CrossoverOptions { gap_min: self.gap_min, fd_step: self.fd_step, ..CrossoverOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: Format,
    /// Adds wall-clock seconds to the bundle (which then differs run to run).
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub run: RunSection,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range and consistency checks that do not need the numerical core.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.n_qubits == 0 {
            return bad("model.n_qubits must be at least 1");
        }
        if !(m.omega > 0.0) || !m.omega.is_finite() {
            return bad(format!("model.omega must be positive, got {}", m.omega));
        }
        if m.lambda.is_empty() {
            return bad("model.lambda needs at least one value");
        }
        if let Some(l) = m.lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return bad(format!("model.lambda values must be finite and non-negative, got {l}"));
        }
        for (v, key) in [(m.emission, "model.emission"), (m.perturbation, "model.perturbation")] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{key} must be finite and non-negative, got {v}"));
            }
        }
        if m.kind == ModelKind::Custom && (m.h0.is_none() || m.generator.is_none()) {
            return bad("custom models need model.h0 and model.generator");
        }
        let r = &self.run;
        if let Some(t) = r.t {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("run.T must be positive, got {t}"));
            }
        }
        if let Some(g) = &r.t_grid {
            parse_t_grid(g)?;
        }
        if r.grid.is_some_and(|g| g < 2) {
            return bad("run.grid needs at least two points");
        }
        if let Some(s) = r.s.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return bad(format!("run.s values must lie in [0, 1], got {s}"));
        }
        if !(r.margin > 0.0) {
            return bad(format!("run.margin must be positive, got {}", r.margin));
        }
        if r.steps == 0 || r.samples == 0 {
            return bad("run.steps and run.samples must be positive");
        }
        let t = &self.tolerances;
        for (v, key) in [
            (t.cluster, "cluster"),
            (t.rank_gap, "rank_gap"),
            (t.ambiguity_floor, "ambiguity_floor"),
            (t.condition_limit, "condition_limit"),
            (t.gap_min, "gap_min"),
            (t.fd_step, "fd_step"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("tolerances.{key} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// The run times requested by `T_grid`, falling back to `T`.
    pub fn t_values(&self) -> Result<Vec<f64>, ConfigError> {
        match (&self.run.t_grid, self.run.t) {
            (Some(g), _) => parse_t_grid(g),
            (None, Some(t)) => Ok(vec![t]),
            (None, None) => bad("this command needs --T or --T-grid"),
        }
    }

    pub fn single_t(&self) -> Result<f64, ConfigError> {
        self.run.t.ok_or_else(|| ConfigError("this command needs --T".into()))
    }
}

/// Parses `start:stop:points[:log]` into an ascending grid.
pub fn parse_t_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let log = match parts.len() {
        3 => false,
        4 if parts[3] == "log" => true,
        4 if parts[3] == "lin" => false,
        _ => return bad(format!("T grid '{spec}' must look like start:stop:points[:log]")),
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| ConfigError(format!("T grid '{spec}': bad number '{s}'")));
    let (a, b) = (num(parts[0])?, num(parts[1])?);
    let n: usize = parts[2].parse().map_err(|_| ConfigError(format!("T grid '{spec}': bad point count")))?;
    if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
        return bad(format!("T grid '{spec}': endpoints must be positive and finite"));
    }
    if n == 0 || (n > 1 && !(b > a)) || (n == 1 && a != b) {
        return bad(format!("T grid '{spec}' must be ascending"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let step = |k: usize| k as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|k| match (k, log) {
            (0, _) => a,
            (k, _) if k == n - 1 => b,
            (k, true) => (a.ln() + step(k) * (b.ln() - a.ln())).exp(),
            (k, false) => a + step(k) * (b - a),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let text = "[model]\nlambda = [0.1, 0.2]\nn_qubits = 2\n\n[run]\nT_grid = \"1:100:5:log\"\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let once = cfg.canonical();
        let again = RunConfig::from_toml(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.canonical(), once);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::from_toml("[model]\nlambdaa = [0.1]\n").unwrap_err();
        assert!(err.0.contains("lambdaa"), "{}", err.0);
        assert!(err.0.contains("line 2"), "{}", err.0);
    }

    #[test]
    fn t_grids() {
        assert_eq!(parse_t_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        let g = parse_t_grid("1:100:3:log").unwrap();
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
        assert_eq!(parse_t_grid("11:11:1").unwrap(), vec![11.0]);
        assert!(parse_t_grid("5:1:3").is_err());
        assert!(parse_t_grid("0:1:3").is_err());
        assert!(parse_t_grid("1:2").is_err());
    }

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
        let mut c = RunConfig::default();
        c.model.kind = ModelKind::Custom;
        assert!(c.validate().is_err());
    }
}
