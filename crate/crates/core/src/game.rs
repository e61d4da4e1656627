//! Closed-form solution of the limiting differential game: the barrier `b`,
//! the safe level `d`, the value function `U`, the optimal feedback `pi*`,
//! the Isaacs residual and the maximizer's saddle controls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Level, Problem};
use crate::quadrature::{adaptive_simpson, bisect_sign_change, QUAD_TOL};

/// Relative tolerance for the safe-level bisection.
pub const SAFE_LEVEL_REL_TOL: f64 = 1e-10;

/// `inf { x >= a : e(x) < 0 }`, infinite when `e` never turns negative.
pub fn compute_b(problem: &Problem) -> Level {
    problem.e.first_negative()
}

/// Diagnostic attached to the safe level when the root search could not be
/// completed and `d` fell back to `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SafeLevelFlag {
    QuadratureFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeLevel {
    pub d: Level,
    pub flag: Option<SafeLevelFlag>,
}

/// Integrand `(lambda - l(u) + theta^2/2) / e(u)` of the value function.
#[inline]
fn slope_density(problem: &Problem, u: f64) -> f64 {
    problem.market.hazard_excess(problem.l.value(u)) / problem.e.value(u)
}

fn accumulated_cost(problem: &Problem, x: f64) -> Result<f64> {
    let a = problem.market.a;
    let mut lo = a;
    let mut total = 0.0;
    // Split at breakpoints so every panel sees a smooth integrand.
    let mut knots = problem.e.breakpoints_in(a, x);
    knots.extend(problem.l.breakpoints_in(a, x));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    for k in knots.into_iter().filter(|k| *k > a && *k < x).chain([x]) {
        total += adaptive_simpson(|u| slope_density(problem, u), lo, k, QUAD_TOL)?;
        lo = k;
    }
    Ok(total)
}

/// The safe level `d = b ∧ inf { y > a : rho - int_a^y (...)/e = 0 }`.
///
/// The integral is strictly increasing on `[a, b)`, so the first zero is
/// bracketed by `[a, a + rho * M0 / (lambda - l(a) + theta^2/2)]` (capped at
/// `b`) and located by bisection. When no zero precedes `b` the cap applies
/// and `d = b` exactly.
pub fn compute_d(problem: &Problem) -> SafeLevel {
    let m = &problem.market;
    let a = m.a;
    let b = compute_b(problem);
    if b == Level::Finite(a) {
        return SafeLevel { d: b, flag: None };
    }
    let m0 = problem.e.upper_bound();
    let bracket_hi = a + m.rho * m0 / m.hazard_excess(problem.l.value(a));
    let hi = Level::Finite(bracket_hi).min(b);
    let hi_val = hi.to_f64();
    if !hi_val.is_finite() {
        return SafeLevel {
            d: b,
            flag: Some(SafeLevelFlag::QuadratureFailure(
                "no finite bracket for the safe level".into(),
            )),
        };
    }
    let search = bisect_sign_change(
        |y| accumulated_cost(problem, y).map(|c| m.rho - c),
        a,
        hi_val,
        SAFE_LEVEL_REL_TOL,
    );
    match search {
        Ok(br) if br.hi_moved => SafeLevel {
            d: Level::Finite(br.hi),
            flag: None,
        },
        // F stayed positive up to the cap: the cap is the safe level.
        Ok(_) => SafeLevel { d: hi, flag: None },
        Err(err) => SafeLevel {
            d: b,
            flag: Some(SafeLevelFlag::QuadratureFailure(err.to_string())),
        },
    }
}

/// Saddle controls for the maximizer at a given initial wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleControls {
    /// Constant path rate `psi_dot* = -theta`.
    pub psi_dot: f64,
    /// Termination time: hitting time of `a` under `phi' = -e(phi)` when
    /// `x < d`, otherwise zero.
    pub t_star: f64,
    /// `(rho - U(x)) / (lambda - l(a) + theta^2/2)`.
    pub bound: f64,
    /// Whether `t_star <= bound` holds up to quadrature tolerance.
    pub within_bound: bool,
}

/// The solved game for one problem.
#[derive(Debug, Clone)]
pub struct GameSolution {
    problem: Problem,
    b: Level,
    safe: SafeLevel,
}

impl GameSolution {
    pub fn solve(problem: &Problem) -> Self {
        GameSolution {
            problem: problem.clone(),
            b: compute_b(problem),
            safe: compute_d(problem),
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn b(&self) -> Level {
        self.b
    }

    pub fn d(&self) -> Level {
        self.safe.d
    }

    pub fn safe_level(&self) -> &SafeLevel {
        &self.safe
    }

    pub fn theta(&self) -> f64 {
        self.problem.market.theta()
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let a = self.problem.market.a;
        if x < a || x.is_nan() {
            Err(Error::Domain { x, lo: a })
        } else {
            Ok(())
        }
    }

    /// Value of the game. `U(a) = rho`; `U = 0` at and above `d`.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let m = &self.problem.market;
        if x == m.a {
            return Ok(m.rho);
        }
        if !self.d().is_above(x) {
            return Ok(0.0);
        }
        let cost = accumulated_cost(&self.problem, x)?;
        Ok((m.rho - cost).clamp(0.0, m.rho))
    }

    /// Values on an ascending grid, integrating panel by panel.
    pub fn value_table(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let m = &self.problem.market;
        let mut out = Vec::with_capacity(xs.len());
        let mut last_x = m.a;
        let mut acc = 0.0;
        for &x in xs {
            self.check_domain(x)?;
            if x < last_x {
                return Err(Error::InvalidArgument("value grid must be ascending".into()));
            }
            if x == m.a {
                out.push(m.rho);
                continue;
            }
            if !self.d().is_above(x) {
                out.push(0.0);
                continue;
            }
            acc += adaptive_simpson(|u| slope_density(&self.problem, u), last_x, x, QUAD_TOL)?;
            last_x = x;
            out.push((m.rho - acc).clamp(0.0, m.rho));
        }
        Ok(out)
    }

    /// Optimal feedback investment `pi*(x)`.
    pub fn pi_star(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.pi_star_unchecked(x))
    }

    #[inline]
    pub(crate) fn pi_star_unchecked(&self, x: f64) -> f64 {
        if !self.d().is_above(x) {
            return 0.0;
        }
        let m = &self.problem.market;
        (m.mu - m.r) * self.problem.e.value(x)
            / (m.sigma * m.sigma * m.hazard_excess(self.problem.l.value(x)))
    }

    /// Supremum of `|pi*|` over `[a, min(d, a + 100)]` sampled on 10,001
    /// points plus breakpoints.
    pub fn pi_star_sup(&self) -> f64 {
        let a = self.problem.market.a;
        let hi = self.d().min(Level::Finite(a + crate::model::VALIDATION_SPAN)).to_f64();
        let mut extra = self.problem.e.breakpoints_in(a, hi);
        extra.extend(self.problem.l.breakpoints_in(a, hi));
        let n = crate::model::VALIDATION_GRID_POINTS;
        (0..n)
            .map(|i| a + (hi - a) * i as f64 / (n - 1) as f64)
            .chain(extra)
            .map(|x| self.pi_star_unchecked(x).abs())
            .fold(0.0, f64::max)
    }

    /// Investment bound `M1 = 1.1 * sup |pi*|`.
    pub fn m1(&self) -> f64 {
        1.1 * self.pi_star_sup()
    }

    /// Isaacs residual of a candidate value function at `x`.
    ///
    /// With `V' < 0` the inner supremum over `theta` is attained at
    /// `sigma p V'` and the outer infimum over `p` at
    /// `-(mu - r) / (sigma^2 V')`, leaving
    /// `R = -e V' - theta^2/2 - lambda + l`.
    pub fn hjb_residual<V>(&self, v: V, x: f64, h: f64) -> Result<f64>
    where
        V: Fn(f64) -> f64,
    {
        hjb_residual(&self.problem, v, x, h)
    }

    /// `psi_dot* = -theta` and the termination time `T*`.
    pub fn saddle_controls(&self, x: f64) -> Result<SaddleControls> {
        self.check_domain(x)?;
        let m = &self.problem.market;
        let u = self.value(x)?;
        let t_star = if self.d().is_above(x) && x > m.a {
            adaptive_simpson(|w| 1.0 / self.problem.e.value(w), m.a, x, QUAD_TOL)?
        } else {
            0.0
        };
        let bound = (m.rho - u) / m.hazard_excess(self.problem.l.value(m.a));
        let slack = 1e-9 * bound.abs().max(1.0);
        Ok(SaddleControls {
            psi_dot: -m.theta(),
            t_star,
            bound,
            within_bound: t_star <= bound + slack,
        })
    }
}

/// Free-function form of [`GameSolution::hjb_residual`].
pub fn hjb_residual<V>(problem: &Problem, v: V, x: f64, h: f64) -> Result<f64>
where
    V: Fn(f64) -> f64,
{
    let m = &problem.market;
    if !(h > 0.0) || x - h < m.a {
        return Err(Error::InvalidArgument(format!(
            "step {h} does not keep [x - h, x + h] inside the domain at x = {x}"
        )));
    }
    let slope = (v(x + h) - v(x - h)) / (2.0 * h);
    if !(slope < 0.0) {
        return Err(Error::NonDecreasingValue { x, slope });
    }
    let theta = m.theta();
    Ok(-problem.e.value(x) * slope - 0.5 * theta * theta - m.lambda + problem.l.value(x))
}
