//! Experiment configuration files.

use std::path::PathBuf;

use revsmc::models::atm::AtmParams;
use revsmc::models::hyperbolic::StripParams;
use revsmc::models::sis::{Network, SisParams};
use revsmc::smc::{EngineConfig, ResamplingScheme};
use revsmc::splitting::{KernelMode, SplittingConfig};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Atm,
    AtmLarge,
    Hyperbolic,
    HyperbolicSweep,
    Sis,
    SisSurface,
    AtmSplitting,
    HyperbolicSplitting,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::Atm => "atm",
            Self::AtmLarge => "atm-large",
            Self::Hyperbolic => "hyperbolic",
            Self::HyperbolicSweep => "hyperbolic-sweep",
            Self::Sis => "sis",
            Self::SisSurface => "sis-surface",
            Self::AtmSplitting => "atm-splitting",
            Self::HyperbolicSplitting => "hyperbolic-splitting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    Corrected,
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default = "default_ess_fraction")]
    pub ess_fraction: f64,
    #[serde(default)]
    pub resampling: Resampling,
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
    /// Also spread particles of one replicate over the thread pool.
    #[serde(default)]
    pub parallel_particles: bool,
}

fn default_ess_fraction() -> f64 {
    0.5
}

fn default_step_cap() -> usize {
    1_000_000
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            ess_fraction: default_ess_fraction(),
            resampling: Resampling::default(),
            step_cap: default_step_cap(),
            parallel_particles: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtmSection {
    pub sources: usize,
    pub barrier: usize,
    pub lambda: f64,
    pub mu: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Terminal on-counts to estimate; defaults to `0..=K` for `atm` and
    /// `1..=K` for `atm-large`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperbolicSection {
    pub l0: f64,
    pub u0: f64,
    pub lt: f64,
    pub ut: f64,
    pub horizon: f64,
    pub delta: f64,
    /// Terminal intervals for `hyperbolic-sweep`; each replaces `(lt, ut)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_intervals: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    /// Edge-list file ("u v" per line) used instead of a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<PathBuf>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Defaults to `10⁻² / |V|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub detection_size: usize,
    /// A fixed observed configuration; otherwise each replicate simulates one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<u32>>,
    #[serde(default = "default_max_restarts")]
    pub max_restarts: usize,
}

fn default_max_restarts() -> usize {
    100_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingSection {
    /// Defaults to the top-level particle count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default = "default_one")]
    pub kill_count: usize,
    #[serde(default = "default_one")]
    pub mcmc_steps: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub kernel: Kernel,
    /// Initial conditions averaged over by `hyperbolic-splitting`.
    #[serde(default = "default_initial_conditions")]
    pub initial_conditions: usize,
}

fn default_one() -> usize {
    1
}

fn default_max_iterations() -> usize {
    1_000_000
}

fn default_initial_conditions() -> usize {
    1000
}

impl Default for SplittingSection {
    fn default() -> Self {
        Self {
            particles: None,
            kill_count: 1,
            mcmc_steps: 1,
            max_iterations: default_max_iterations(),
            kernel: Kernel::default(),
            initial_conditions: default_initial_conditions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub particles: usize,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atm: Option<AtmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperbolic: Option<HyperbolicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sis: Option<SisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingSection>,
}

fn field(name: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{name}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Checks every field the chosen experiment uses.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates == 0 {
            return Err(field("replicates", "must be at least 1"));
        }
        if self.particles == 0 {
            return Err(field("particles", "must be at least 1"));
        }
        self.engine_config(0).validate().map_err(|e| field("engine", e))?;
        match self.experiment {
            ExperimentKind::Atm | ExperimentKind::AtmLarge | ExperimentKind::AtmSplitting => {
                let p = self.atm_params()?;
                if let Some(t) = &self.atm()?.terminal {
                    if t.is_empty() {
                        return Err(field("atm.terminal", "must list at least one on-count"));
                    }
                    if let Some(k) = t.iter().find(|&&k| k > p.sources) {
                        return Err(field("atm.terminal", format!("on-count {k} exceeds sources = {}", p.sources)));
                    }
                }
            }
            ExperimentKind::Hyperbolic | ExperimentKind::HyperbolicSweep | ExperimentKind::HyperbolicSplitting => {
                for p in self.strip_params()? {
                    p.steps().map_err(|e| field("hyperbolic", e))?;
                }
                if let Some(t) = self.hyperbolic()?.quadrature_tolerance {
                    if !(t > 0.0) {
                        return Err(field("hyperbolic.quadrature_tolerance", "must be positive"));
                    }
                }
            }
            ExperimentKind::Sis | ExperimentKind::SisSurface => {
                let net = self.network()?;
                let p = self.sis_params(&net)?;
                if let Some(obs) = &self.sis()?.observed {
                    if obs.len() != p.detection_size {
                        return Err(field(
                            "sis.observed",
                            format!("has {} vertices but detection_size is {}", obs.len(), p.detection_size),
                        ));
                    }
                    if let Some(v) = obs.iter().find(|&&v| v as usize >= net.len()) {
                        return Err(field("sis.observed", format!("vertex {v} is not in the network")));
                    }
                }
            }
        }
        if matches!(self.experiment, ExperimentKind::AtmSplitting | ExperimentKind::HyperbolicSplitting) {
            self.splitting_config().validate().map_err(|e| field("splitting", e))?;
            if self.splitting_section().initial_conditions == 0 {
                return Err(field("splitting.initial_conditions", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn engine_config(&self, seed: u64) -> EngineConfig {
        EngineConfig {
            particles: self.particles,
            ess_fraction: self.engine.ess_fraction,
            resampling: match self.engine.resampling {
                Resampling::Multinomial => ResamplingScheme::Multinomial,
                Resampling::Systematic => ResamplingScheme::Systematic,
            },
            step_cap: self.engine.step_cap,
            seed,
            parallel: self.engine.parallel_particles,
        }
    }

    fn atm(&self) -> Result<&AtmSection, ConfigError> {
        self.atm.as_ref().ok_or_else(|| field("atm", "section is required for this experiment"))
    }

    pub fn atm_params(&self) -> Result<AtmParams<f64>, ConfigError> {
        let a = self.atm()?;
        AtmParams::new(a.sources, a.barrier, a.lambda, a.mu, a.alpha0, a.alpha1).map_err(|e| field("atm", e))
    }

    /// Terminal on-counts to estimate, in output order.
    pub fn atm_terminals(&self) -> Result<Vec<usize>, ConfigError> {
        let a = self.atm()?;
        Ok(match &a.terminal {
            Some(t) => t.clone(),
            None if self.experiment == ExperimentKind::AtmLarge => (1..=a.sources).collect(),
            None => (0..=a.sources).collect(),
        })
    }

    fn hyperbolic(&self) -> Result<&HyperbolicSection, ConfigError> {
        self.hyperbolic
            .as_ref()
            .ok_or_else(|| field("hyperbolic", "section is required for this experiment"))
    }

    /// One geometry, or one per terminal interval for the sweep.
    pub fn strip_params(&self) -> Result<Vec<StripParams<f64>>, ConfigError> {
        let h = self.hyperbolic()?;
        let intervals = match (&h.terminal_intervals, self.experiment) {
            (Some(t), ExperimentKind::HyperbolicSweep) => {
                if t.is_empty() {
                    return Err(field("hyperbolic.terminal_intervals", "must list at least one interval"));
                }
                t.clone()
            }
            (None, ExperimentKind::HyperbolicSweep) => {
                return Err(field("hyperbolic.terminal_intervals", "is required for hyperbolic-sweep"));
            }
            _ => vec![[h.lt, h.ut]],
        };
        intervals
            .into_iter()
            .map(|[lt, ut]| StripParams::new(h.l0, h.u0, lt, ut, h.horizon, h.delta).map_err(|e| field("hyperbolic", e)))
            .collect()
    }

    pub fn quadrature_tolerance(&self) -> Option<f64> {
        self.hyperbolic.as_ref().and_then(|h| h.quadrature_tolerance)
    }

    fn sis(&self) -> Result<&SisSection, ConfigError> {
        self.sis.as_ref().ok_or_else(|| field("sis", "section is required for this experiment"))
    }

    pub fn network(&self) -> Result<Network, ConfigError> {
        let s = self.sis()?;
        match (&s.edge_list, s.rows, s.cols) {
            (Some(path), None, None) => {
                let text = std::fs::read_to_string(path).map_err(|e| field("sis.edge_list", format!("{}: {e}", path.display())))?;
                Network::from_edge_list(&text).map_err(|e| field("sis.edge_list", e))
            }
            (None, Some(r), Some(c)) => Network::grid(r, c).map_err(|e| field("sis.rows", e)),
            _ => Err(field("sis", "give either rows and cols, or edge_list")),
        }
    }

    pub fn sis_params(&self, net: &Network) -> Result<SisParams<f64>, ConfigError> {
        let s = self.sis()?;
        let eps = s.epsilon.unwrap_or_else(|| SisParams::<f64>::default_epsilon(net.len()));
        let p = SisParams::new(s.alpha, s.beta, s.gamma, eps, s.detection_size).map_err(|e| field("sis", e))?;
        p.validate_for(net).map_err(|e| field("sis", e))?;
        Ok(p)
    }

    pub fn sis_observed(&self) -> Option<Vec<u32>> {
        self.sis.as_ref().and_then(|s| s.observed.clone())
    }

    pub fn sis_max_restarts(&self) -> usize {
        self.sis.as_ref().map_or_else(default_max_restarts, |s| s.max_restarts)
    }

    fn splitting_section(&self) -> SplittingSection {
        self.splitting.clone().unwrap_or_default()
    }

    pub fn splitting_config(&self) -> SplittingConfig {
        let s = self.splitting_section();
        SplittingConfig {
            particles: s.particles.unwrap_or(self.particles),
            kill_count: s.kill_count,
            max_iterations: s.max_iterations,
            mcmc_steps: s.mcmc_steps,
        }
    }

    pub fn kernel_mode(&self) -> KernelMode {
        match self.splitting_section().kernel {
            Kernel::Corrected => KernelMode::Corrected,
            Kernel::Verbatim => KernelMode::Verbatim,
        }
    }

    pub fn initial_conditions(&self) -> usize {
        self.splitting_section().initial_conditions
    }
}
