//! JSON run configuration. One file fully determines a run.

use std::path::Path;

use ruingame_core::model::{MarketParams, Problem, Shape};
use ruingame_core::{PolicySpec, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub e: Shape,
    pub l: Shape,
    /// Wealth grid for `value`.
    #[serde(default)]
    pub grid: Option<GridRange>,
    /// Initial wealth for `simulate` and `convergence`.
    #[serde(default)]
    pub x: Option<f64>,
    /// Policy for `simulate` and `convergence`; defaults to `pi*`.
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub hjb: HjbOptions,
    #[serde(default)]
    pub game_cost: GameCostOptions,
    #[serde(default)]
    pub convergence: ConvergenceOptions,
    #[serde(default)]
    pub oracle: OracleOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        Ok((Self::from_json(text)?, bytes))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Problem::new(self.market, self.e.clone(), self.l.clone()).map_err(CliError::from)
    }
}

/// `lo, lo + step, ...` up to and including `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridRange {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let GridRange { lo, hi, step } = *self;
        if !(lo.is_finite() && hi.is_finite() && step > 0.0 && step.is_finite()) || hi < lo {
            return Err(CliError::Usage(format!(
                "grid [{lo}, {hi}] with step {step} is empty"
            )));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbOptions {
    /// Interior points, spread evenly over `(a, d)`.
    pub points: usize,
    /// Central-difference step.
    pub h: f64,
    pub threshold: f64,
    /// Checks `U + perturbation * (x - a)` instead of `U`.
    pub perturbation: f64,
}

impl Default for HjbOptions {
    fn default() -> Self {
        HjbOptions {
            points: 100,
            h: 1e-4,
            threshold: 1e-5,
            perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameCostOptions {
    pub x: Vec<f64>,
    pub policies: Vec<PolicySpec>,
    /// RK4 step for the state equation.
    pub dt: f64,
    /// Largest accepted `|cost - U(x)|`.
    pub tolerance: f64,
}

impl Default for GameCostOptions {
    fn default() -> Self {
        GameCostOptions {
            x: vec![2.0],
            policies: vec![
                PolicySpec::PiStar { m1: None },
                PolicySpec::Zero { m1: None },
                PolicySpec::Constant {
                    value: 1.0,
                    m1: None,
                },
            ],
            dt: 1e-3,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceOptions {
    pub n_list: Vec<u32>,
    /// Largest accepted gap at the last `n`.
    pub max_gap: Option<f64>,
    /// Require gaps to be non-increasing within three combined standard
    /// errors.
    pub monotone: bool,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            n_list: vec![4, 16, 64],
            max_gap: None,
            monotone: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub x_max: f64,
    pub h_x: f64,
    pub h_t: f64,
    /// Largest accepted node error against the closed form.
    pub threshold: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            x_max: 8.0,
            h_x: 0.01,
            h_t: 0.01,
            threshold: None,
        }
    }
}
