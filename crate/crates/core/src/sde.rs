//! Monte Carlo estimation of the risk-sensitive cost
//! `J^n(x, pi) = (1/n) ln E[exp(n (int_0^{tau_a ∧ tau_d} l(W) ds + rho 1{tau_a <= tau_d}))]`
//! for the scaled wealth SDE
//! `dW = (-e(W) + (mu - r) pi(W)) dt + (sigma pi(W) / sqrt(n)) dB`.
//!
//! Three estimators are provided:
//!
//! * `sampled-death` draws `tau_d ~ Exp(lambda n)` per path;
//! * `integrated-death` integrates the death time out analytically along
//!   each path;
//! * `tilted` simulates under the measure that shifts the Brownian drift by
//!   the saddle rate `-theta` and reweights by the likelihood ratio, on top
//!   of death integration.
//!
//! Each path draws from its own ChaCha8 stream keyed by `(seed, path index)`
//! and outcomes are reduced in index order, so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::GameSolution;
use crate::model::Problem;
use crate::policy::FeedbackPolicy;
use crate::stats::{log_add, log_moments, logsumexp};

/// Relative size of the truncation tail above which an estimate is flagged.
pub const TAIL_WARNING_RATIO: f64 = 1e-3;
/// Bridge crossing checks are skipped when `exp(-2 * above / var)` is below
/// `exp(-40)`.
const BRIDGE_CUTOFF: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    SampledDeath,
    IntegratedDeath,
    Tilted,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::SampledDeath => "sampled-death",
            Estimator::IntegratedDeath => "integrated-death",
            Estimator::Tilted => "tilted",
        }
    }
}

/// How ruin between grid times is detected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossing {
    /// Only steps that end at or below `a` count as ruin.
    #[default]
    Grid,
    /// Brownian-bridge crossing test inside each step.
    Bridge,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub paths: u64,
    pub seed: u64,
    /// Truncation horizon; defaults to `2 rho / (lambda - l(a))`.
    #[serde(default)]
    pub t_max: Option<f64>,
    pub estimator: Estimator,
    #[serde(default)]
    pub crossing: Crossing,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument("paths must be at least 1".into()));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!("t_max must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self, problem: &Problem) -> f64 {
        self.t_max.unwrap_or_else(|| default_horizon(problem))
    }
}

/// `2 rho / (lambda - l(a))`.
pub fn default_horizon(problem: &Problem) -> f64 {
    let m = &problem.market;
    2.0 * m.rho / (m.lambda - problem.l.value(m.a))
}

/// Result of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// Interpolated hitting time of `a`, if it happened before the path
    /// stopped.
    pub tau_a: Option<f64>,
    /// Time at which simulation stopped (ruin, sampled death or horizon).
    pub stopped_at: f64,
    /// `int_0^{stopped_at} l(W) ds` by the trapezoid rule.
    pub penalty: f64,
    /// Log of the per-path quantity whose mean is `exp(n J^n)`.
    pub terminal_exponent: f64,
    /// `ln dP/dQ` along the path (zero without a tilt).
    pub log_weight: f64,
    /// The horizon was reached with the investor alive and solvent.
    pub truncated: bool,
    pub faulted: bool,
}

impl PathOutcome {
    fn fault(t: f64) -> Self {
        PathOutcome {
            tau_a: None,
            stopped_at: t,
            penalty: f64::NAN,
            terminal_exponent: f64::NAN,
            log_weight: f64::NAN,
            truncated: false,
            faulted: true,
        }
    }

    pub fn hit(&self) -> bool {
        self.tau_a.is_some()
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates one Euler-Maruyama path of the scaled wealth process.
///
/// With [`Crossing::Bridge`], ruin inside a step is detected from the
/// Brownian bridge between the step endpoints, which removes the
/// `O(sqrt(dt))` bias of monitoring `a` only at grid times.
///
/// `drift_tilt` shifts the Brownian drift by `sqrt(n) * drift_tilt`; the
/// likelihood ratio back to the physical measure is accumulated in
/// `log_weight` whenever the tilt is non-zero. The death time is sampled for
/// the `sampled-death` estimator and integrated out otherwise.
pub fn simulate_path(
    problem: &Problem,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    x: f64,
    path_index: u64,
    drift_tilt: f64,
) -> PathOutcome {
    let m = &problem.market;
    let a = m.a;
    let nf = cfg.n as f64;
    let sqrt_n = nf.sqrt();
    let t_max = cfg.horizon(problem);
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let premium = m.tilted_premium(drift_tilt);
    let vol = m.sigma / sqrt_n;
    let death_rate = m.lambda * nf;
    let sampled = cfg.estimator == Estimator::SampledDeath;
    let bridge = cfg.crossing == Crossing::Bridge;

    let mut rng = path_rng(cfg.seed, path_index);
    let death_time = if sampled {
        Exp::new(death_rate)
            .map(|d| d.sample(&mut rng))
            .unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };

    if x <= a {
        return PathOutcome {
            tau_a: Some(0.0),
            stopped_at: 0.0,
            penalty: 0.0,
            terminal_exponent: nf * m.rho,
            log_weight: 0.0,
            truncated: false,
            faulted: false,
        };
    }

    let mut w = x;
    let mut l_prev = problem.l.value(w);
    let mut penalty = 0.0;
    let mut log_weight = 0.0;
    // Death-integrated mass so far and exp(n L(t) - lambda n t) at the
    // current step start.
    let mut mass = 0.0;
    let mut discount = 1.0;
    let mut k: u64 = 0;

    loop {
        let t = k as f64 * dt;
        if t >= t_max {
            break;
        }
        let (h, sqrt_h) = if t + dt <= t_max {
            (dt, sqrt_dt)
        } else {
            let h = t_max - t;
            (h, h.sqrt())
        };
        let pi = policy.invest(w);
        let z: f64 = rng.sample(StandardNormal);
        let db = sqrt_h * z;
        let drift = -problem.e.value(w) + pi * premium;
        let next = w + drift * h + vol * pi * db;
        if drift_tilt != 0.0 {
            log_weight += -sqrt_n * drift_tilt * db - 0.5 * nf * drift_tilt * drift_tilt * h;
        }
        if !next.is_finite() {
            return PathOutcome::fault(t);
        }

        let (hit, s) = if next <= a {
            (true, (w - a) / (w - next) * h)
        } else {
            let step_var = (vol * pi) * (vol * pi) * h;
            let above = (w - a) * (next - a);
            // Brownian bridge between the two endpoints: crossing chance
            // exp(-2 (w - a)(next - a) / var), independent of the drift.
            let crossed = bridge
                && step_var > 0.0
                && above < BRIDGE_CUTOFF * step_var
                && rng.random::<f64>() < (-2.0 * above / step_var).exp();
            if crossed {
                (true, (w - a) / ((w - a) + (next - a)) * h)
            } else {
                (false, h)
            }
        };
        let w_end = if hit { a } else { next };
        let l_end = problem.l.value(w_end);
        let l_step = 0.5 * (l_prev + l_end);

        if sampled && death_time < t + s {
            penalty += l_step * (death_time - t);
            return PathOutcome {
                tau_a: None,
                stopped_at: death_time,
                penalty,
                terminal_exponent: nf * penalty,
                log_weight,
                truncated: false,
                faulted: false,
            };
        }
        if !sampled {
            let gap = m.lambda - l_step;
            let shrink = (-nf * gap * s).exp_m1();
            let step_mass = if gap == 0.0 {
                death_rate * s
            } else {
                -m.lambda / gap * shrink
            };
            mass += discount * step_mass;
            discount *= 1.0 + shrink;
        }
        penalty += l_step * s;

        if hit {
            let tau = t + s;
            let ruin = nf * (penalty + m.rho);
            let terminal_exponent = if sampled {
                ruin
            } else {
                log_add(mass.ln(), ruin - death_rate * tau)
            };
            return PathOutcome {
                tau_a: Some(tau),
                stopped_at: tau,
                penalty,
                terminal_exponent,
                log_weight,
                truncated: false,
                faulted: false,
            };
        }
        w = w_end;
        l_prev = l_end;
        k += 1;
        if h < dt {
            break;
        }
    }

    let t_end = (k as f64 * dt).min(t_max);
    // Alive and solvent at the horizon: the remaining death mass is credited
    // with the penalty accumulated so far.
    let terminal_exponent = if sampled {
        nf * penalty
    } else {
        log_add(mass.ln(), nf * penalty - death_rate * t_end)
    };
    PathOutcome {
        tau_a: None,
        stopped_at: t_end,
        penalty,
        terminal_exponent,
        log_weight,
        truncated: true,
        faulted: false,
    }
}

/// Estimate of `J^n` with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub n: u32,
    pub estimator: Estimator,
    pub j_hat: f64,
    /// Delta-method standard error of `j_hat`.
    pub std_err: f64,
    /// Fraction of non-faulted paths that reached `a`.
    pub hit_fraction: f64,
    /// Kish effective sample size of the exponential weights.
    pub ess: f64,
    pub paths: u64,
    pub faulted_paths: u64,
    /// Upper bound on the truncated tail exceeded `TAIL_WARNING_RATIO` of
    /// the estimate.
    pub tail_warning: bool,
}

/// Estimates `J^n(x, pi)` with the estimator selected in `cfg`.
pub fn estimate_jn(
    problem: &Problem,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    x: f64,
    exec: Execution,
) -> Result<SimEstimate> {
    cfg.validate()?;
    let m = &problem.market;
    if x < m.a || x.is_nan() {
        return Err(Error::Domain { x, lo: m.a });
    }
    let tilt = match cfg.estimator {
        Estimator::Tilted => -m.theta(),
        _ => 0.0,
    };
    let outcomes = exec.map_indexed(cfg.paths, |i| simulate_path(problem, policy, cfg, x, i, tilt));
    summarize(problem, cfg, &outcomes)
}

fn summarize(problem: &Problem, cfg: &SimConfig, outcomes: &[PathOutcome]) -> Result<SimEstimate> {
    let m = &problem.market;
    let nf = cfg.n as f64;
    let good: Vec<&PathOutcome> = outcomes.iter().filter(|o| !o.faulted).collect();
    let faulted = (outcomes.len() - good.len()) as u64;
    let exponents: Vec<f64> = good
        .iter()
        .map(|o| o.terminal_exponent + o.log_weight)
        .collect();
    let moments = log_moments(&exponents).ok_or(Error::AllPathsFaulted { paths: outcomes.len() })?;
    let hits = good.iter().filter(|o| o.hit()).count();

    let tail_warning = if cfg.estimator == Estimator::SampledDeath {
        false
    } else {
        let l_a = problem.l.value(m.a);
        let tails: Vec<f64> = good
            .iter()
            .filter(|o| o.truncated)
            .map(|o| -nf * (m.lambda - l_a) * o.stopped_at + nf * m.rho + o.log_weight)
            .collect();
        let log_tail_mean = logsumexp(&tails) - (good.len() as f64).ln();
        log_tail_mean - moments.log_mean > TAIL_WARNING_RATIO.ln()
    };

    Ok(SimEstimate {
        n: cfg.n,
        estimator: cfg.estimator,
        j_hat: moments.log_mean / nf,
        std_err: moments.log_mean_se / nf,
        hit_fraction: hits as f64 / good.len() as f64,
        ess: moments.ess,
        paths: cfg.paths,
        faulted_paths: faulted,
        tail_warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub estimate: SimEstimate,
    pub dt: f64,
    pub u_ref: f64,
    pub gap: f64,
}

/// Runs [`estimate_jn`] for each `n` with `dt = base.dt / sqrt(n)` and
/// reports the gap to the game value `U(x)`.
pub fn convergence_sweep(
    game: &GameSolution,
    policy: &FeedbackPolicy,
    base: &SimConfig,
    x: f64,
    n_list: &[u32],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n_list must be non-empty and strictly increasing".into()));
    }
    let u_ref = game.value(x)?;
    n_list
        .iter()
        .map(|&n| {
            let cfg = SimConfig {
                n,
                dt: base.dt / (n as f64).sqrt(),
                ..*base
            };
            let estimate = estimate_jn(game.problem(), policy, &cfg, x, exec)?;
            Ok(SweepRow {
                estimate,
                dt: cfg.dt,
                u_ref,
                gap: (estimate.j_hat - u_ref).abs(),
            })
        })
        .collect()
}
