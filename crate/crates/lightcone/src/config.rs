//! TOML run configuration.
//!
//! ```toml
//! seed = 42
//! out = "runs/front"
//!
//! [lattice]
//! dim = 1
//! radius = 512
//! coupling = 1.0
//!
//! [potential]          # U(x) = a4 x^4 + a3 x^3 + a2 x^2 + a1 x + a0
//! a4 = 0.25
//!
//! [integrator]
//! dt = 1e-3
//! t_end = 8.0
//! record_stride = 1000
//!
//! [sampler]
//! beta = 1.0
//! sweeps = 2000
//! burn_in = 1000
//! thin = 10
//!
//! [experiment]
//! times = [2.0, 4.0, 6.0, 8.0]
//! members = 20
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use lightcone_core::gibbs::{default_sigma, SamplerConfig};
use lightcone_core::lightcone::{ExperimentConfig, InitialData};
use lightcone_core::{LatticeSpec, Potential, Site};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory; `--out` takes precedence. Not part of the echo.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dim: usize,
    pub radius: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default)]
    pub a3: f64,
    #[serde(default = "default_a4")]
    pub a4: f64,
}

fn default_a4() -> f64 {
    0.25
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            a0: 0.0,
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            a4: default_a4(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub beta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    /// Defaults to 0.5/√β.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_sigma: Option<f64>,
    /// Exponential-moment parameter of the superstability estimate.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_blocks")]
    pub jackknife_blocks: usize,
    /// Points in the Q-tail grid, spread from 1 to the largest sampled Q.
    #[serde(default = "default_tail_points")]
    pub tail_points: usize,
    /// Good-set exponent δ.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Integer times k ≥ 3 for the good-set test; empty skips it.
    #[serde(default)]
    pub good_set_times: Vec<usize>,
}

fn default_lambda() -> f64 {
    0.05
}
fn default_blocks() -> usize {
    20
}
fn default_tail_points() -> usize {
    64
}
fn default_delta() -> f64 {
    1.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Gibbs,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Multi-index of the perturbed site; defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    #[serde(default = "default_initial")]
    pub initial: InitialKind,
    /// State CSV used instead of sampled data by simulate, tangent and converge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "one")]
    pub members: usize,
    #[serde(default = "default_q_interval")]
    pub q_interval: f64,
    #[serde(default = "default_horizon")]
    pub bound_horizon: f64,
    #[serde(default = "default_sensitivity")]
    pub sensitivity: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub report_threshold: f64,
    /// Observation radius k of the convergence study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_radius: Option<usize>,
    #[serde(default)]
    pub truncation_radii: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge_time: Option<f64>,
}

fn default_initial() -> InitialKind {
    InitialKind::Gibbs
}
fn default_alpha() -> f64 {
    0.75
}
fn default_b() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_q_interval() -> f64 {
    0.25
}
fn default_horizon() -> f64 {
    4.0
}
fn default_sensitivity() -> Vec<f64> {
    vec![1e-4, 1e-6, 1e-8]
}

impl RunConfig {
    /// Parses TOML text; errors carry the offending key path.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim_end().to_string();
            if path.is_empty() || path == "." {
                CliError::Config(msg)
            } else {
                CliError::Config(format!("{path}: {msg}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML of the effective configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// sha256 of [`RunConfig::echo`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, CliError> {
        let l = &self.lattice;
        LatticeSpec::new(l.dim, l.radius, l.coupling).map_err(|e| CliError::Config(format!("lattice: {e}")))
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        let p = &self.potential;
        Potential::new([p.a0, p.a1, p.a2, p.a3, p.a4]).map_err(|e| CliError::Config(format!("potential: {e}")))
    }

    pub fn integrator(&self) -> Result<&IntegratorSection, CliError> {
        self.integrator.as_ref().ok_or_else(|| missing("integrator"))
    }

    pub fn sampler_section(&self) -> Result<&SamplerSection, CliError> {
        self.sampler.as_ref().ok_or_else(|| missing("sampler"))
    }

    pub fn experiment(&self) -> Result<&ExperimentSection, CliError> {
        self.experiment.as_ref().ok_or_else(|| missing("experiment"))
    }

    pub fn sampler(&self) -> Result<SamplerConfig, CliError> {
        let s = self.sampler_section()?;
        let cfg = SamplerConfig {
            beta: s.beta,
            sweeps: s.sweeps,
            burn_in: s.burn_in,
            proposal_sigma: s.proposal_sigma.unwrap_or_else(|| default_sigma(s.beta)),
            seed: self.seed,
            thin: s.thin,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("sampler: {e}")))?;
        if !(s.lambda > 0.0) {
            return Err(CliError::Config(format!(
                "sampler.lambda: {} must be positive",
                s.lambda
            )));
        }
        Ok(cfg)
    }

    pub fn source(&self) -> Result<Site, CliError> {
        let dim = self.lattice_spec()?.dim;
        match self.experiment.as_ref().and_then(|e| e.source.as_ref()) {
            None => Ok(Site::origin(dim)),
            Some(c) if c.len() == dim => Ok(Site::new(c)),
            Some(c) => Err(CliError::Config(format!(
                "experiment.source: expected {dim} coordinates, got {}",
                c.len()
            ))),
        }
    }

    /// Light-cone experiment settings; the run ends at the last time.
    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let e = self.experiment()?;
        let dt = self.integrator()?.dt;
        let initial = match e.initial {
            InitialKind::Gibbs => InitialData::Gibbs,
            InitialKind::Zero => InitialData::Zero,
        };
        let sampler = match initial {
            InitialData::Gibbs => self.sampler()?,
            // unused, but the struct needs a value
            InitialData::Zero => SamplerConfig::new(1.0, 1, 0, 1, self.seed).expect("valid placeholder"),
        };
        let delta = self.sampler.as_ref().map(|s| s.delta);
        let cfg = ExperimentConfig {
            lattice: self.lattice_spec()?,
            potential: self.potential()?,
            dt,
            sampler,
            initial,
            source: self.source()?,
            alpha: e.alpha,
            b: e.b,
            epsilon: e.epsilon,
            delta,
            times: e.times.clone(),
            members: e.members,
            q_interval: e.q_interval,
            bound_horizon: e.bound_horizon,
            sensitivity: e.sensitivity.clone(),
            report_threshold: e.report_threshold,
        };
        cfg.validate()
            .map_err(|err| CliError::Config(format!("experiment: {err}")))?;
        let t_end = self.integrator()?.t_end;
        if cfg.t_end() > t_end + 1e-12 {
            return Err(CliError::Config(format!(
                "experiment.times: last time {} exceeds integrator.t_end = {t_end}",
                cfg.t_end()
            )));
        }
        Ok(cfg)
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing section [{section}]"))
}
