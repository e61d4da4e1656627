//! Discrete-time, discrete-state version of the zero-sum stopping game,
//! solved by value iteration. It shares nothing with the closed form except
//! the problem data and is used to cross-check it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Level, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x_max: f64,
    pub h_x: f64,
    pub h_t: f64,
    /// Candidate path rates for the maximizer.
    pub theta_grid: Vec<f64>,
    /// Candidate investments for the minimizer.
    pub p_grid: Vec<f64>,
    /// `V = 0` is imposed at nodes `x >= d + margin`.
    pub margin: f64,
    /// Sup-norm change between sweeps that counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl GridSpec {
    /// Grids bracketing the closed-form optimizers: `p` on
    /// `[0, 1.5 max pi*]` and `theta` on `[-2 theta, 0]`.
    pub fn bracketing(problem: &Problem, pi_star_max: f64, x_max: f64, h_x: f64, h_t: f64) -> Self {
        let theta = problem.market.theta();
        let n_theta = 41;
        let n_p = 61;
        let p_hi = 1.5 * pi_star_max;
        GridSpec {
            x_max,
            h_x,
            h_t,
            theta_grid: (0..n_theta)
                .map(|i| -2.0 * theta * (1.0 - i as f64 / (n_theta - 1) as f64))
                .collect(),
            p_grid: (0..n_p).map(|i| p_hi * i as f64 / (n_p - 1) as f64).collect(),
            margin: 0.5,
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTable {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

impl ValueTable {
    /// Piecewise-linear interpolation; `rho` below `a`, last value beyond the
    /// grid.
    pub fn interpolate(&self, y: f64, rho: f64) -> f64 {
        interpolate(&self.x, &self.v, y, rho)
    }
}

#[inline]
fn interpolate(x: &[f64], v: &[f64], y: f64, rho: f64) -> f64 {
    let a = x[0];
    if y <= a {
        return rho;
    }
    let h = x[1] - x[0];
    let pos = (y - a) / h;
    let i = pos.floor() as usize;
    if i + 1 >= x.len() {
        return v[x.len() - 1];
    }
    let w = pos - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// Solves
/// `V(x) = max(0, min_p max_theta [h_t(-lambda + l(x) - theta^2/2) + V(x + h_t(-e(x) + (mu-r)p + sigma p theta))])`
/// with `V(a) = rho` and `V = 0` beyond `d + margin`.
///
/// Sweeps update nodes in place in ascending order, which propagates the
/// boundary value at `a` through the whole grid in one pass whenever the
/// saddle drift points down.
pub fn grid_game_value(problem: &Problem, d: Level, spec: &GridSpec) -> Result<ValueTable> {
    let m = &problem.market;
    let a = m.a;
    if !(spec.h_x > 0.0 && spec.h_t > 0.0 && spec.x_max > a) {
        return Err(Error::InvalidArgument(
            "oracle grid needs h_x > 0, h_t > 0 and x_max > a".into(),
        ));
    }
    if spec.theta_grid.is_empty() || spec.p_grid.is_empty() {
        return Err(Error::InvalidArgument("oracle control grids must be non-empty".into()));
    }
    let nodes = ((spec.x_max - a) / spec.h_x).round() as usize + 1;
    if nodes < 2 {
        return Err(Error::InvalidArgument("oracle grid needs at least two nodes".into()));
    }
    let x: Vec<f64> = (0..nodes).map(|i| a + spec.h_x * i as f64).collect();
    let cutoff = d.to_f64() + spec.margin;
    let frozen: Vec<bool> = x.iter().map(|&xi| xi >= cutoff).collect();
    let mut v = vec![0.0; nodes];
    v[0] = m.rho;

    let premium = m.mu - m.r;
    let thetas: Vec<(f64, f64)> = spec
        .theta_grid
        .iter()
        .map(|&th| (th, -0.5 * th * th * spec.h_t))
        .collect();

    let mut residual = f64::INFINITY;
    for sweep in 1..=spec.max_sweeps {
        residual = 0.0;
        for i in 1..nodes {
            if frozen[i] {
                continue;
            }
            let xi = x[i];
            let running = spec.h_t * (-m.lambda + problem.l.value(xi));
            let base = -problem.e.value(xi);
            let mut inf_p = f64::INFINITY;
            for &p in &spec.p_grid {
                let drift_p = base + premium * p;
                let mut sup_theta = f64::NEG_INFINITY;
                for &(th, pen) in &thetas {
                    let next = xi + spec.h_t * (drift_p + m.sigma * p * th);
                    let val = pen + interpolate(&x, &v, next, m.rho);
                    if val > sup_theta {
                        sup_theta = val;
                    }
                }
                if sup_theta < inf_p {
                    inf_p = sup_theta;
                }
            }
            let updated = (running + inf_p).max(0.0);
            residual = residual.max((updated - v[i]).abs());
            v[i] = updated;
        }
        if residual < spec.tol {
            return Ok(ValueTable {
                x,
                v,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: spec.max_sweeps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSolution;
    use crate::model::{MarketParams, Shape};

    fn p0() -> Problem {
        let m = MarketParams {
            mu: 0.08,
            r: 0.02,
            sigma: 0.2,
            lambda: 0.04,
            rho: 1.0,
            a: 1.0,
        };
        Problem::new(m, Shape::constant(0.5), Shape::constant(0.0)).unwrap()
    }

    #[test]
    fn coarse_oracle_boundary_conditions() {
        let p = p0();
        let g = GameSolution::solve(&p);
        let spec = GridSpec::bracketing(&p, g.pi_star_sup(), 8.0, 0.05, 0.05);
        let t = grid_game_value(&p, g.d(), &spec).unwrap();
        assert_eq!(t.v[0], 1.0);
        let cutoff = g.d().to_f64() + spec.margin;
        for (x, v) in t.x.iter().zip(&t.v) {
            if *x >= cutoff {
                assert_eq!(*v, 0.0);
            }
            assert!((0.0..=1.0).contains(v));
        }
        let worst = t
            .x
            .iter()
            .zip(&t.v)
            .map(|(x, v)| (g.value(*x).unwrap() - v).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn rejects_empty_grids() {
        let p = p0();
        let mut spec = GridSpec::bracketing(&p, 10.0, 8.0, 0.1, 0.1);
        spec.p_grid.clear();
        assert!(grid_game_value(&p, Level::Finite(6.9), &spec).is_err());
    }
}
