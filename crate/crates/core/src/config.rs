//! Simulation configuration and the shipped presets.
//!
//! Configurations are TOML documents:
//!
//! ```toml
//! name = "example"
//! seed = 1                       # overridden by an explicit run seed
//!
//! [session]
//! open = "09:30"                 # wall-clock labels; trace time starts at 0
//! close = "16:30"
//!
//! [latency]
//! default_ns = 1000              # one-way agent <-> exchange latency
//! computation_delay_ns = 0       # added to every message an agent sends
//!
//! [fundamental]
//! mean = 100000                  # cents
//! kappa = 1e-4                   # mean reversion per step
//! shock_variance = 25.0          # cents^2 per step
//! step_ns = 100000000
//!
//! [zi]                           # also [hbl], [market_maker], [momentum]
//! count = 100
//! arrival_rate = 0.01            # orders per second
//! observation_variance = 2500.0
//! surplus_min = 0
//! surplus_max = 100
//! size_min = 1
//! size_max = 100
//! ```
//!
//! `[hbl]` takes the `[zi]` fields plus `memory`; `[market_maker]` takes
//! `levels`, `size_min`, `size_max`, `wake_interval_ns`; `[momentum]` takes
//! `size_min`, `size_max` and optionally `short_window`, `long_window`,
//! `wake_interval_ns`, `marketable_limit`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    FundamentalProcess, HblAgent, HblParams, MarketMakerAgent, MmParams, MomentumAgent,
    MomentumParams, ZiAgent, ZiParams,
};
use crate::kernel::{agent_rng, Agent, Kernel, KernelError, LatencyModel, RunOutput};
use crate::types::{parse_clock, AgentId, Nanos, Price};

const SPARSE_ZI_100: &str = include_str!("../presets/sparse_zi_100.toml");
const RMSC01: &str = include_str!("../presets/rmsc01.toml");

pub const PRESETS: [&str; 2] = ["sparse_zi_100", "rmsc01"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset `{0}` (available: sparse_zi_100, rmsc01)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub open: String,
    pub close: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            open: "09:30".into(),
            close: "16:30".into(),
        }
    }
}

impl SessionConfig {
    pub fn length_ns(&self) -> Result<Nanos, ConfigError> {
        let open = parse_clock(&self.open).map_err(ConfigError::Invalid)?;
        let close = parse_clock(&self.close).map_err(ConfigError::Invalid)?;
        if close <= open {
            return Err(ConfigError::Invalid("session close must be after open".into()));
        }
        Ok(close - open)
    }
}

fn default_latency() -> Nanos {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    #[serde(default = "default_latency")]
    pub default_ns: Nanos,
    #[serde(default)]
    pub computation_delay_ns: Nanos,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            default_ns: default_latency(),
            computation_delay_ns: 0,
        }
    }
}

fn default_step() -> Nanos {
    100_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalConfig {
    pub mean: Price,
    pub kappa: f64,
    pub shock_variance: f64,
    #[serde(default = "default_step")]
    pub step_ns: Nanos,
    /// Starting value; defaults to `mean`.
    #[serde(default)]
    pub initial: Option<Price>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGroup<P> {
    pub count: usize,
    #[serde(flatten)]
    pub params: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub latency: LatencyConfig,
    pub fundamental: FundamentalConfig,
    #[serde(default)]
    pub market_maker: Option<AgentGroup<MmParams>>,
    #[serde(default)]
    pub zi: Option<AgentGroup<ZiParams>>,
    #[serde(default)]
    pub hbl: Option<AgentGroup<HblParams>>,
    #[serde(default)]
    pub momentum: Option<AgentGroup<MomentumParams>>,
}

impl SimConfig {
    pub fn preset(name: &str) -> Result<SimConfig, ConfigError> {
        let text = match name {
            "sparse_zi_100" => SPARSE_ZI_100,
            "rmsc01" => RMSC01,
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        SimConfig::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SimConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |section: &str, e: String| ConfigError::Invalid(format!("[{section}] {e}"));
        self.session.length_ns()?;
        let f = &self.fundamental;
        if !(0.0..=1.0).contains(&f.kappa) || f.shock_variance < 0.0 || f.mean < 0 || f.step_ns == 0 {
            return Err(invalid("fundamental", "need kappa in [0,1], shock_variance >= 0, mean >= 0, step_ns > 0".into()));
        }
        if let Some(g) = &self.zi {
            g.params.validate().map_err(|e| invalid("zi", e))?;
        }
        if let Some(g) = &self.hbl {
            g.params.validate().map_err(|e| invalid("hbl", e))?;
        }
        if let Some(g) = &self.market_maker {
            g.params.validate().map_err(|e| invalid("market_maker", e))?;
        }
        if let Some(g) = &self.momentum {
            g.params.validate().map_err(|e| invalid("momentum", e))?;
        }
        Ok(())
    }

    /// Agent kinds in id order; agent `i + 1` has kind `roster()[i]`.
    pub fn roster(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        out.extend(std::iter::repeat_n("market_maker", self.market_maker.as_ref().map_or(0, |g| g.count)));
        out.extend(std::iter::repeat_n("zi", self.zi.as_ref().map_or(0, |g| g.count)));
        out.extend(std::iter::repeat_n("hbl", self.hbl.as_ref().map_or(0, |g| g.count)));
        out.extend(std::iter::repeat_n("momentum", self.momentum.as_ref().map_or(0, |g| g.count)));
        out
    }

    pub fn agent_count(&self) -> usize {
        self.roster().len()
    }

    /// Builds a ready-to-run kernel for `seed`.
    pub fn build_kernel(&self, seed: u64) -> Result<Kernel, ConfigError> {
        self.validate()?;
        let close = self.session.length_ns()?;
        let mut agents: Vec<Box<dyn Agent>> = Vec::new();
        if let Some(g) = &self.market_maker {
            for _ in 0..g.count {
                let id = agents.len() as AgentId + 1;
                agents.push(Box::new(MarketMakerAgent::new(id, g.params.clone(), seed)));
            }
        }
        if let Some(g) = &self.zi {
            for _ in 0..g.count {
                let id = agents.len() as AgentId + 1;
                agents.push(Box::new(ZiAgent::new(id, g.params.clone(), seed)));
            }
        }
        if let Some(g) = &self.hbl {
            for _ in 0..g.count {
                let id = agents.len() as AgentId + 1;
                agents.push(Box::new(HblAgent::new(id, g.params.clone(), seed)));
            }
        }
        if let Some(g) = &self.momentum {
            for _ in 0..g.count {
                let id = agents.len() as AgentId + 1;
                agents.push(Box::new(MomentumAgent::new(id, g.params.clone(), seed)));
            }
        }
        let f = &self.fundamental;
        let fundamental = FundamentalProcess::new(
            f.mean,
            f.kappa,
            f.shock_variance,
            f.step_ns,
            f.initial.unwrap_or(f.mean),
            agent_rng(seed, -1),
        );
        let latency = LatencyModel {
            default_ns: self.latency.default_ns,
            computation_delay_ns: self.latency.computation_delay_ns,
            ..Default::default()
        };
        Ok(Kernel::new(close, latency, fundamental, agents))
    }
}

/// Runs one session of `config` with `seed`.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<RunOutput, SimError> {
    Ok(config.build_kernel(seed)?.run()?)
}
