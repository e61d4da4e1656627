//! Statistical and structural checks on the Monte Carlo estimators.

use std::sync::Arc;

use ruingame_core::model::{MarketParams, Problem, Shape};
use ruingame_core::sde::{estimate_jn, Crossing, Estimator, SimConfig};
use ruingame_core::{Execution, FeedbackPolicy, GameSolution};

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

fn cfg(n: u32, paths: u64, estimator: Estimator) -> SimConfig {
    SimConfig {
        n,
        dt: 1e-3,
        paths,
        seed: 11,
        t_max: None,
        estimator,
        crossing: Crossing::Grid,
    }
}

fn agree(a: f64, sa: f64, b: f64, sb: f64) -> bool {
    (a - b).abs() <= 3.0 * sa.hypot(sb)
}

#[test]
fn sequential_and_parallel_are_bit_identical() {
    let p = p0();
    let g = Arc::new(GameSolution::solve(&p));
    let pol = FeedbackPolicy::pi_star(g);
    for est in [Estimator::SampledDeath, Estimator::IntegratedDeath, Estimator::Tilted] {
        let c = cfg(4, 300, est);
        let s = estimate_jn(&p, &pol, &c, 2.0, Execution::Sequential).unwrap();
        let q = estimate_jn(&p, &pol, &c, 2.0, Execution::Parallel).unwrap();
        assert_eq!(s.j_hat.to_bits(), q.j_hat.to_bits());
        assert_eq!(s.std_err.to_bits(), q.std_err.to_bits());
    }
}

#[test]
fn likelihood_weight_integrates_to_one_without_investment() {
    // With pi = 0 the tilt moves no wealth, so the tilted estimate differs
    // from the deterministic one only through the weights.
    let p = p0();
    let zero = FeedbackPolicy::zero();
    let plain = estimate_jn(&p, &zero, &cfg(4, 20_000, Estimator::IntegratedDeath), 2.0, Execution::Parallel)
        .unwrap();
    let tilted = estimate_jn(&p, &zero, &cfg(4, 20_000, Estimator::Tilted), 2.0, Execution::Parallel).unwrap();
    assert_eq!(plain.std_err, 0.0);
    assert!(tilted.std_err > 0.0);
    assert!(
        agree(plain.j_hat, plain.std_err, tilted.j_hat, tilted.std_err),
        "{plain:?} vs {tilted:?}"
    );
}

#[test]
fn estimates_above_safe_level_are_bounded() {
    let p = p0();
    let g = Arc::new(GameSolution::solve(&p));
    let pol = FeedbackPolicy::pi_star(Arc::clone(&g));
    let x = 7.0;
    assert_eq!(g.value(x).unwrap(), 0.0);
    for n in [1, 4, 16] {
        let c = cfg(n, 400, Estimator::SampledDeath);
        let est = estimate_jn(&p, &pol, &c, x, Execution::Parallel).unwrap();
        let t_max = c.horizon(&p);
        assert!(est.j_hat >= 0.0, "n = {n}: {}", est.j_hat);
        assert!(est.j_hat <= p.market.rho + p.market.lambda * t_max);
        assert!(est.ess <= est.paths as f64 + 1e-9);
        assert!((0.0..=1.0).contains(&est.hit_fraction));
    }
}

#[test]
fn bridge_is_inert_without_volatility() {
    let p = p0();
    let zero = FeedbackPolicy::zero();
    let grid = cfg(16, 50, Estimator::IntegratedDeath);
    let bridge = SimConfig {
        crossing: Crossing::Bridge,
        ..grid
    };
    let a = estimate_jn(&p, &zero, &grid, 2.0, Execution::Parallel).unwrap();
    let b = estimate_jn(&p, &zero, &bridge, 2.0, Execution::Parallel).unwrap();
    assert_eq!(a.j_hat.to_bits(), b.j_hat.to_bits());
}

#[test]
fn bridge_keeps_estimators_consistent() {
    let p = p0();
    let pol = FeedbackPolicy::constant(1.0);
    let base = SimConfig {
        dt: 2e-3,
        crossing: Crossing::Bridge,
        ..cfg(4, 20_000, Estimator::IntegratedDeath)
    };
    let plain = estimate_jn(&p, &pol, &base, 2.0, Execution::Parallel).unwrap();
    let tilted = estimate_jn(
        &p,
        &pol,
        &SimConfig {
            estimator: Estimator::Tilted,
            ..base
        },
        2.0,
        Execution::Parallel,
    )
    .unwrap();
    assert!(
        agree(plain.j_hat, plain.std_err, tilted.j_hat, tilted.std_err),
        "{plain:?} vs {tilted:?}"
    );
}
