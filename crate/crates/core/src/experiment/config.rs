use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Engine, ScaleSelector, DEFAULT_BUDGET};
use crate::env::ModelParams;
use crate::error::{Error, Result};
use crate::kprocess::{KObservable, KSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Params,
    EnvTopk,
    EnvBins,
    Thm1,
    GibbsCheck,
    Simulate,
    Occupation,
    Visits,
    Renewal,
    Kproc,
    Kemperman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flat run configuration: the model keys plus experiment keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub p: f64,
    pub a: f64,
    /// Required unless `theta` is given, in which case `β = β̄_FT - θ/√N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub seed: u64,
    pub experiment: Experiment,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(rename = "L", default)]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub scale: ScaleSelector,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kparams: Option<KSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<KObservable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs: Option<Vec<f64>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_replicas() -> usize {
    1
}
fn default_horizon() -> f64 {
    10.0
}
fn default_k() -> usize {
    10
}
fn default_m() -> usize {
    3
}
fn default_rank() -> usize {
    1
}
/// Bin resolution exponent; any positive value satisfies the constraints.
pub fn default_delta() -> f64 {
    0.1
}
/// Bin range exponent, inside (0, 1/2).
pub fn default_eps() -> f64 {
    0.25
}
fn default_budget() -> u64 {
    DEFAULT_BUDGET
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(serde_json::from_str(&text)?),
            _ => Ok(toml::from_str(&text)?),
        }
    }

    /// The model parameters, with `β` resolved from `θ` when requested.
    pub fn model(&self) -> Result<ModelParams> {
        let beta = match (self.beta, self.theta) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either beta or theta, not both".into()))
            }
            (Some(b), None) => b,
            (None, Some(theta)) => {
                let probe =
                    crate::env::derive(ModelParams::new(self.n, self.p, self.a, 1.0, self.seed))?;
                probe.bar_beta_ft - theta / (self.n as f64).sqrt()
            }
            (None, None) => return Err(Error::Config("beta is required".into())),
        };
        let m = ModelParams::new(self.n, self.p, self.a, beta, self.seed);
        m.validate()?;
        Ok(m)
    }

    /// Checks every key the selected experiment needs before any work starts.
    pub fn validate(&self) -> Result<ModelParams> {
        let model = self.model()?;
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        let dynamic = matches!(
            self.experiment,
            Experiment::Simulate
                | Experiment::Occupation
                | Experiment::Visits
                | Experiment::Renewal
        );
        if (dynamic || self.experiment == Experiment::Params)
            && model.is_critical()
            && self.l >= 0.0
        {
            return Err(Error::Config(format!(
                "a = p requires L < 0, got {}",
                self.l
            )));
        }
        let needs_k = dynamic || matches!(self.experiment, Experiment::EnvTopk | Experiment::Thm1);
        if needs_k && (self.k == 0 || self.k as u64 > 1u64 << self.n) {
            return Err(Error::Config(format!("k = {} out of range", self.k)));
        }
        match self.experiment {
            Experiment::EnvBins => {
                crate::env::BinGrid::new(
                    &crate::env::EnergyOracle::new(model)?,
                    self.delta,
                    self.eps,
                )?;
            }
            Experiment::Thm1 if self.replicas < crate::pointproc::MIN_REPLICAS => {
                return Err(Error::Config(format!(
                    "thm1 needs at least {} replicas",
                    crate::pointproc::MIN_REPLICAS
                )));
            }
            Experiment::GibbsCheck if self.n > 12 => {
                return Err(Error::Config("gibbs-check needs N <= 12".into()));
            }
            Experiment::Visits if self.replicas < crate::dynamics::MIN_VISITS => {
                return Err(Error::Config(format!(
                    "visits needs at least {} replicas",
                    crate::dynamics::MIN_VISITS
                )));
            }
            Experiment::Visits if self.rank == 0 || self.rank > self.k => {
                return Err(Error::Config(format!(
                    "rank {} outside 1..={}",
                    self.rank, self.k
                )));
            }
            Experiment::Renewal if self.m < 2 => {
                return Err(Error::Config("renewal needs M >= 2".into()));
            }
            Experiment::Kproc if self.kparams.is_none() => {
                return Err(Error::Config("kproc needs kparams".into()));
            }
            Experiment::Kemperman if self.ns.is_none() || self.qs.is_none() => {
                return Err(Error::Config("kemperman needs ns and qs".into()));
            }
            _ => {}
        }
        if dynamic && self.n > 24 {
            return Err(Error::Config("dynamics experiments support N <= 24".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(extra: &str) -> String {
        format!("N = 10\np = 0.5\na = 0.2\nbeta = 1.5\nseed = 1\n{extra}")
    }

    #[test]
    fn parses_flat_toml() {
        let c: ExperimentConfig =
            toml::from_str(&base("experiment = \"env-topk\"\nk = 5\nL = -0.5")).unwrap();
        assert_eq!(c.experiment, Experiment::EnvTopk);
        assert_eq!(c.k, 5);
        assert_eq!(c.l, -0.5);
        assert_eq!(c.format, Format::Csv);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_regions() {
        assert!(
            toml::from_str::<ExperimentConfig>(&base("experiment = \"params\"\nfoo = 1")).is_err()
        );
        let c: ExperimentConfig =
            toml::from_str(&base("experiment = \"params\"").replace("a = 0.2", "a = 0.7")).unwrap();
        assert!(c.validate().is_err());
        let c: ExperimentConfig =
            toml::from_str(&base("experiment = \"simulate\"").replace("a = 0.2", "a = 0.5"))
                .unwrap();
        assert!(c.validate().is_err());
        let c: ExperimentConfig = toml::from_str(
            &base("experiment = \"simulate\"\nL = -1.0").replace("a = 0.2", "a = 0.5"),
        )
        .unwrap();
        assert!(c.validate().is_ok());
        let c: ExperimentConfig = toml::from_str(&base("experiment = \"kproc\"")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn theta_sets_beta() {
        let c: ExperimentConfig = toml::from_str(
            &base("experiment = \"params\"\ntheta = 1.0").replace("beta = 1.5\n", ""),
        )
        .unwrap();
        let m = c.validate().unwrap();
        let bar = crate::env::derive(m).unwrap().bar_beta_ft;
        assert!((m.beta - (bar - 1.0 / 10f64.sqrt())).abs() < 1e-14);
    }
}
