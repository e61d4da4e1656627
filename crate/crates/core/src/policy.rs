//! Feedback investment policies `x -> pi(x)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameSolution;

/// Serializable description of a policy, resolved against a solved game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    PiStar {
        #[serde(default)]
        m1: Option<f64>,
    },
    Zero {
        #[serde(default)]
        m1: Option<f64>,
    },
    Constant {
        value: f64,
        #[serde(default)]
        m1: Option<f64>,
    },
    Tabulated {
        x: Vec<f64>,
        pi: Vec<f64>,
        #[serde(default)]
        m1: Option<f64>,
    },
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::PiStar { .. } => "pi_star",
            PolicySpec::Zero { .. } => "zero",
            PolicySpec::Constant { .. } => "constant",
            PolicySpec::Tabulated { .. } => "tabulated",
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    PiStar(Arc<GameSolution>),
    Zero,
    Constant(f64),
    Tabulated { x: Vec<f64>, pi: Vec<f64> },
}

/// An admissible feedback policy bounded by `M1`.
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    rule: Rule,
    m1: f64,
}

impl FeedbackPolicy {
    /// The game's optimal feedback, bounded by `M1 = 1.1 sup |pi*|` unless
    /// an explicit bound is given.
    pub fn pi_star(game: Arc<GameSolution>) -> Self {
        let m1 = game.m1();
        FeedbackPolicy {
            rule: Rule::PiStar(game),
            m1,
        }
    }

    pub fn zero() -> Self {
        FeedbackPolicy {
            rule: Rule::Zero,
            m1: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        FeedbackPolicy {
            rule: Rule::Constant(value),
            m1: value.abs(),
        }
    }

    /// Linear interpolation through `(x[i], pi[i])`, constant outside.
    pub fn tabulated(x: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != pi.len() {
            return Err(Error::InvalidArgument(
                "tabulated policy needs matching, non-empty x and pi".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulated policy abscissae must be strictly increasing".into(),
            ));
        }
        if x.iter().chain(&pi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tabulated policy entries must be finite".into()));
        }
        let m1 = pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(FeedbackPolicy {
            rule: Rule::Tabulated { x, pi },
            m1,
        })
    }

    pub fn from_spec(spec: &PolicySpec, game: &Arc<GameSolution>) -> Result<Self> {
        let (policy, m1) = match spec {
            PolicySpec::PiStar { m1 } => (FeedbackPolicy::pi_star(Arc::clone(game)), *m1),
            PolicySpec::Zero { m1 } => (FeedbackPolicy::zero(), *m1),
            PolicySpec::Constant { value, m1 } => (FeedbackPolicy::constant(*value), *m1),
            PolicySpec::Tabulated { x, pi, m1 } => {
                (FeedbackPolicy::tabulated(x.clone(), pi.clone())?, *m1)
            }
        };
        match m1 {
            Some(bound) => policy.with_bound(bound),
            None => Ok(policy),
        }
    }

    /// Replaces the bound. Fails when the rule's own values exceed it.
    pub fn with_bound(mut self, m1: f64) -> Result<Self> {
        if !(m1 >= 0.0) || !m1.is_finite() {
            return Err(Error::InvalidArgument(format!("M1 must be finite and non-negative, got {m1}")));
        }
        let needed = match &self.rule {
            Rule::PiStar(g) => g.pi_star_sup(),
            _ => self.m1,
        };
        if needed > m1 {
            return Err(Error::InvalidArgument(format!(
                "policy reaches |pi| = {needed}, above M1 = {m1}"
            )));
        }
        self.m1 = m1;
        Ok(self)
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn label(&self) -> &'static str {
        match self.rule {
            Rule::PiStar(_) => "pi_star",
            Rule::Zero => "zero",
            Rule::Constant(_) => "constant",
            Rule::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.rule, Rule::Zero) || matches!(self.rule, Rule::Constant(v) if v == 0.0)
    }

    /// Amount invested at wealth `x`, clipped to `[-M1, M1]`.
    #[inline]
    pub fn invest(&self, x: f64) -> f64 {
        let raw = match &self.rule {
            Rule::PiStar(g) => g.pi_star_unchecked(x),
            Rule::Zero => return 0.0,
            Rule::Constant(v) => *v,
            Rule::Tabulated { x: xs, pi } => {
                let last = xs.len() - 1;
                if x <= xs[0] {
                    pi[0]
                } else if x >= xs[last] {
                    pi[last]
                } else {
                    let i = xs.partition_point(|&b| b <= x);
                    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    pi[i - 1] + t * (pi[i] - pi[i - 1])
                }
            }
        };
        raw.clamp(-self.m1, self.m1)
    }
}
