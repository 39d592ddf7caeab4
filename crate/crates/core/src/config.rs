//! Run configuration: a flat TOML document.
//!
//! ```toml
//! generator = [-20.0, 20.0, 30.0, -30.0]   # row-major m x m
//! r = [0.05, 0.05]
//! mu = [0.5, 0.1]
//! sigma = [0.3, 0.5]
//! gamma = [0.1, 0.3, 0.5, 0.9]
//! horizon = 0.5        # T
//! t = 0.0              # evaluation time, tau = T - t
//! x0 = 1.0
//! regime = 1           # 1-based starting regime for `simulate`
//! seed = 42
//! paths = 100000
//! steps = 20000
//! q1 = [20.0, 10.0, 1.0, 0.1, 0.001]
//! ```
//!
//! Everything after `gamma` is optional and defaults to the values shown.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{GeneratorMatrix, MarketModel, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn default_horizon() -> f64 {
    0.5
}
fn default_x0() -> f64 {
    1.0
}
fn default_regime() -> usize {
    1
}
fn default_seed() -> u64 {
    42
}
fn default_paths() -> usize {
    100_000
}
fn default_steps() -> usize {
    crate::oracles::DEFAULT_ODE_STEPS
}
fn default_q1() -> Vec<f64> {
    vec![20.0, 10.0, 1.0, 0.1, 0.001]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generator: Vec<f64>,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_regime")]
    pub regime: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_q1")]
    pub q1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Regime count implied by the rate vectors.
    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Time to maturity `T - t`.
    pub fn tau(&self) -> f64 {
        self.horizon - self.t
    }

    /// Zero-based starting regime.
    pub fn start_regime(&self) -> usize {
        self.regime.saturating_sub(1)
    }

    pub fn generator(&self) -> Result<GeneratorMatrix, ModelError> {
        GeneratorMatrix::from_row_major(self.m(), self.generator.clone())
    }

    /// The market model at risk aversion `gamma`.
    pub fn model(&self, gamma: f64) -> Result<MarketModel, ModelError> {
        MarketModel::new(self.generator()?, self.r.clone(), self.mu.clone(), self.sigma.clone(), gamma)
    }

    /// Every model in the gamma sweep, after checking the run parameters.
    pub fn models(&self) -> Result<Vec<MarketModel>, ConfigError> {
        let mut problems = Vec::new();
        if self.gamma.is_empty() {
            problems.push("gamma list is empty".to_string());
        }
        if !(self.t >= 0.0 && self.horizon >= self.t && self.horizon.is_finite()) {
            problems.push(format!("need horizon >= t >= 0, got horizon = {}, t = {}", self.horizon, self.t));
        }
        if self.regime == 0 || self.regime > self.m() {
            problems.push(format!("regime = {} is not in 1..={}", self.regime, self.m()));
        }
        if self.paths == 0 {
            problems.push("paths must be at least 1".into());
        }
        if self.steps == 0 {
            problems.push("steps must be at least 1".into());
        }
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems.join("; ")));
        }
        let mut models = Vec::with_capacity(self.gamma.len());
        let mut violations = Vec::new();
        for &g in &self.gamma {
            match self.model(g) {
                Ok(m) => models.push(m),
                Err(e) => {
                    for v in e.violations {
                        if !violations.contains(&v) {
                            violations.push(v);
                        }
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(models)
        } else {
            Err(ModelError { violations }.into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Violation;
    use proptest::prelude::*;

    const TWO: &str = r#"
generator = [-20.0, 20.0, 30.0, -30.0]
r = [0.05, 0.05]
mu = [0.5, 0.1]
sigma = [0.3, 0.5]
gamma = [0.1, 0.3, 0.5, 0.9]
"#;

    #[test]
    fn defaults() {
        let c = RunConfig::parse(TWO).unwrap();
        assert_eq!(c.m(), 2);
        assert_eq!(c.tau(), 0.5);
        assert_eq!(c.steps, 20_000);
        assert_eq!(c.q1, vec![20.0, 10.0, 1.0, 0.1, 0.001]);
        assert_eq!(c.models().unwrap().len(), 4);
    }

    #[test]
    fn parse_errors_cite_lines() {
        let text = format!("{TWO}\nhorizon = [oops\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line 8"), "{err}");
        let err = RunConfig::parse(&format!("{TWO}bogus = 1\n")).unwrap_err().to_string();
        assert!(err.contains("line 7") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn invalid_model_is_reported() {
        let text = TWO.replace("sigma = [0.3, 0.5]", "sigma = [0.0, 0.5]").replace("[0.1, 0.3", "[1.5, 0.3");
        match RunConfig::parse(&text).unwrap().models() {
            Err(ConfigError::Model(e)) => {
                assert!(e.contains(|v| matches!(v, Violation::NegativeRate { .. })));
                assert!(e.contains(|v| matches!(v, Violation::InvalidGamma(_))));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_run_parameters() {
        let mut c = RunConfig::parse(TWO).unwrap();
        c.t = 0.7;
        c.regime = 3;
        let err = c.models().unwrap_err().to_string();
        assert!(err.contains("horizon") && err.contains("regime"), "{err}");
    }

    proptest! {
        #[test]
        fn toml_round_trip(gen in prop::collection::vec(-1e3..1e3f64, 4),
                           gamma in prop::collection::vec(-5.0..0.99f64, 1..5),
                           horizon in 0.0..10.0f64,
                           seed in 0..i64::MAX as u64,
                           paths in 1usize..10_000_000,
                           out in prop::option::of("[a-z]{1,8}\\.csv")) {
            let mut c = RunConfig::parse(TWO).unwrap();
            c.generator = gen;
            c.gamma = gamma;
            c.horizon = horizon;
            c.seed = seed;
            c.paths = paths;
            c.out = out.map(PathBuf::from);
            prop_assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        }
    }
}
