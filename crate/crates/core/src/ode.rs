//! Deterministic state dynamics of the game and the game cost functional.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Problem;
use crate::policy::FeedbackPolicy;

/// Relative time tolerance for locating the hitting time inside a step.
pub const HIT_TIME_REL_TOL: f64 = 1e-12;

/// Trajectory of `phi' = -e(phi) + (mu - r) pi(phi) + sigma pi(phi) psi'(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// First time the path reaches `a`; `None` if it did not within the
    /// horizon.
    pub tau: Option<f64>,
}

impl StatePath {
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("paths hold at least the initial point")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameCost {
    /// `int_0^{T ∧ tau} (-lambda + l(phi) - psi'^2 / 2) dt`.
    pub running: f64,
    /// `rho * 1{tau <= T}`.
    pub terminal: f64,
    pub total: f64,
}

struct Dynamics<'a, P> {
    problem: &'a Problem,
    policy: &'a FeedbackPolicy,
    psi_dot: P,
}

impl<P: Fn(f64) -> f64> Dynamics<'_, P> {
    #[inline]
    fn rhs(&self, t: f64, phi: f64) -> f64 {
        let m = &self.problem.market;
        let pi = self.policy.invest(phi);
        let push = if pi == 0.0 {
            0.0
        } else {
            pi * m.tilted_premium((self.psi_dot)(t))
        };
        -self.problem.e.value(phi) + push
    }

    fn rk4(&self, t: f64, y: f64, h: f64) -> f64 {
        let k1 = self.rhs(t, y);
        let k2 = self.rhs(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = self.rhs(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = self.rhs(t + h, y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

/// Fourth-order Runge-Kutta integration from `x` until `t_max` or the first
/// time the state reaches `a`. The crossing time inside the final step is
/// refined by bisection on the step length; the returned path ends at `a`.
pub fn integrate_state_ode<P>(
    problem: &Problem,
    policy: &FeedbackPolicy,
    psi_dot: P,
    x: f64,
    t_max: f64,
    dt: f64,
) -> Result<StatePath>
where
    P: Fn(f64) -> f64,
{
    let a = problem.market.a;
    if x < a || x.is_nan() {
        return Err(Error::Domain { x, lo: a });
    }
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_max >= 0, got dt = {dt}, t_max = {t_max}"
        )));
    }
    let mut times = vec![0.0];
    let mut values = vec![x];
    if x == a {
        return Ok(StatePath {
            times,
            values,
            tau: Some(0.0),
        });
    }

    let dyn_ = Dynamics {
        problem,
        policy,
        psi_dot,
    };
    let mut y = x;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * dt;
        if t >= t_max {
            break;
        }
        let h = dt.min(t_max - t);
        let next = dyn_.rk4(t, y, h);
        if !next.is_finite() {
            return Err(Error::IntegrationFault { t, last_state: y });
        }
        if next <= a {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > HIT_TIME_REL_TOL * (t + hi).max(f64::MIN_POSITIVE) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if dyn_.rk4(t, y, mid) <= a {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let tau = t + hi;
            times.push(tau);
            values.push(a);
            return Ok(StatePath {
                times,
                values,
                tau: Some(tau),
            });
        }
        y = next;
        k += 1;
        times.push(if h < dt { t + h } else { k as f64 * dt });
        values.push(y);
        if h < dt {
            break;
        }
    }
    Ok(StatePath {
        times,
        values,
        tau: None,
    })
}

/// Cost `C(x, pi, psi, T)` of a computed path.
///
/// Each step is integrated by Simpson's rule, with the state at interior
/// nodes reconstructed by cubic Hermite interpolation from the stored values
/// and the dynamics' slopes.
pub fn game_cost<P>(
    problem: &Problem,
    policy: &FeedbackPolicy,
    psi_dot: P,
    horizon: f64,
    path: &StatePath,
) -> Result<GameCost>
where
    P: Fn(f64) -> f64,
{
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cost horizon must be non-negative, got {horizon}"
        )));
    }
    let m = &problem.market;
    let dyn_ = Dynamics {
        problem,
        policy,
        psi_dot: &psi_dot,
    };
    let stop = path.tau.map_or(horizon, |tau| tau.min(horizon)).min(path.end_time());
    let integrand = |t: f64, phi: f64| {
        let rate = psi_dot(t);
        -m.lambda + problem.l.value(phi) - 0.5 * rate * rate
    };

    let mut running = 0.0;
    for (tw, yw) in path.times.windows(2).zip(path.values.windows(2)) {
        let (t0, t1) = (tw[0], tw[1]);
        if t0 >= stop {
            break;
        }
        let (y0, y1) = (yw[0], yw[1]);
        let h = t1 - t0;
        let (f0, f1) = (dyn_.rhs(t0, y0), dyn_.rhs(t1, y1));
        let hermite = |t: f64| {
            let s = (t - t0) / h;
            let (s2, s3) = (s * s, s * s * s);
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                + (s3 - 2.0 * s2 + s) * h * f0
                + (-2.0 * s3 + 3.0 * s2) * y1
                + (s3 - s2) * h * f1
        };
        let end = t1.min(stop);
        let mid = 0.5 * (t0 + end);
        let g_end = if end == t1 {
            integrand(t1, y1)
        } else {
            integrand(end, hermite(end))
        };
        running += (end - t0) / 6.0 * (integrand(t0, y0) + 4.0 * integrand(mid, hermite(mid)) + g_end);
    }

    let terminal = match path.tau {
        Some(tau) if tau <= horizon => m.rho,
        _ => 0.0,
    };
    Ok(GameCost {
        running,
        terminal,
        total: running + terminal,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::game::GameSolution;
    use crate::model::{MarketParams, Shape};

    fn p0_market() -> MarketParams {
        MarketParams {
            mu: 0.08,
            r: 0.02,
            sigma: 0.2,
            lambda: 0.04,
            rho: 1.0,
            a: 1.0,
        }
    }

    fn p0() -> Problem {
        Problem::new(p0_market(), Shape::constant(0.5), Shape::constant(0.0)).unwrap()
    }

    #[test]
    fn zero_policy_descends_linearly() {
        let path = integrate_state_ode(&p0(), &FeedbackPolicy::zero(), |_| 0.7, 2.0, 10.0, 0.01)
            .unwrap();
        assert_eq!(path.values[0], 2.0);
        assert!((path.tau.unwrap() - 2.0).abs() < 1e-11);
        assert_eq!(*path.values.last().unwrap(), 1.0);
        for (t, v) in path.times.iter().zip(&path.values) {
            assert!((v - (2.0 - 0.5 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn path_started_at_barrier_stays_there() {
        let p = Problem::new(p0_market(), Shape::affine(0.5, -0.1, 1.0), Shape::constant(0.0))
            .unwrap();
        let path = integrate_state_ode(&p, &FeedbackPolicy::zero(), |_| 0.0, 6.0, 5.0, 0.01)
            .unwrap();
        assert!(path.tau.is_none());
        assert!(path.values.iter().all(|v| *v == 6.0));
    }

    #[test]
    fn saddle_rate_cancels_investment() {
        let p = p0();
        let g = Arc::new(GameSolution::solve(&p));
        let theta = p.market.theta();
        let star = FeedbackPolicy::pi_star(g);
        let a = integrate_state_ode(&p, &star, |_| -theta, 2.0, 10.0, 0.01).unwrap();
        let b = integrate_state_ode(&p, &FeedbackPolicy::zero(), |_| -theta, 2.0, 10.0, 0.01)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_examples() {
        let p = p0();
        let g = Arc::new(GameSolution::solve(&p));
        let star = FeedbackPolicy::pi_star(g);
        let path = integrate_state_ode(&p, &star, |_| -0.3, 2.0, 10.0, 0.01).unwrap();
        let tau = path.tau.unwrap();
        let c = game_cost(&p, &star, |_| -0.3, tau, &path).unwrap();
        assert!((c.total - 0.83).abs() < 1e-9, "{c:?}");
        assert!(c.running <= 0.0);

        let zero = FeedbackPolicy::zero();
        let path = integrate_state_ode(&p, &zero, |_| 0.0, 2.0, 10.0, 0.01).unwrap();
        let c = game_cost(&p, &zero, |_| 0.0, path.tau.unwrap(), &path).unwrap();
        assert!((c.total - 0.92).abs() < 1e-9);

        let c = game_cost(&p, &zero, |_| 0.0, 0.0, &path).unwrap();
        assert_eq!(c.total, 0.0);
        assert!(game_cost(&p, &zero, |_| 0.0, -1.0, &path).is_err());
    }

    #[test]
    fn cost_at_ruin_level_is_penalty() {
        let p = p0();
        let zero = FeedbackPolicy::zero();
        let path = integrate_state_ode(&p, &zero, |_| 0.0, 1.0, 10.0, 0.01).unwrap();
        assert_eq!(path.tau, Some(0.0));
        let c = game_cost(&p, &zero, |_| 0.0, 0.0, &path).unwrap();
        assert_eq!(c.total, 1.0);
    }
}
