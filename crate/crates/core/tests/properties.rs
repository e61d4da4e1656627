//! Property tests for the closed-form game solution, checked against
//! brute-force quadrature and root finding.

use std::sync::Arc;

use proptest::prelude::*;
use ruingame_core::game::{compute_d, GameSolution};
use ruingame_core::model::{Level, MarketParams, Problem, ScalarFunction, Shape};
use ruingame_core::ode::{game_cost, integrate_state_ode};
use ruingame_core::FeedbackPolicy;

fn market() -> impl Strategy<Value = MarketParams> {
    (0.005..0.05f64, 0.01..0.1f64, 0.1..0.4f64, 0.01..0.1f64, 0.2..3.0f64, 0.5..2.0f64).prop_map(
        |(r, premium, sigma, lambda, rho, a)| MarketParams {
            mu: r + premium,
            r,
            sigma,
            lambda,
            rho,
            a,
        },
    )
}

fn build_e(kind: usize, p: [f64; 4], a: f64) -> Shape {
    match kind {
        0 => Shape::constant(0.1 + 0.9 * p[0]),
        1 => Shape::affine(0.2 + 0.8 * p[0], -(0.01 + 0.19 * p[1]), a),
        2 => Shape::exp_decay(0.2 + 0.8 * p[0], 0.05 + 0.5 * p[1], a),
        _ => Shape::piecewise(&[
            (a, 0.3 + 0.7 * p[0]),
            (a + 0.5 + 2.5 * p[1], 0.05 + 0.25 * p[2]),
            (a + 3.5 + 4.5 * p[3], -0.2 + 0.3 * p[2]),
        ]),
    }
}

fn build_l(kind: usize, p: [f64; 3], a: f64, lambda: f64) -> Shape {
    let l0 = 0.9 * lambda * p[0];
    match kind {
        0 => Shape::constant(l0),
        1 => Shape::exp_decay(l0, 0.1 + 1.9 * p[1], a),
        _ => Shape::piecewise(&[(a, l0), (a + 0.5 + 3.5 * p[1], l0 * p[2])]),
    }
}

fn problem() -> impl Strategy<Value = Problem> {
    (
        market(),
        0..4usize,
        prop::array::uniform4(0.0..1.0f64),
        0..3usize,
        prop::array::uniform3(0.0..1.0f64),
    )
        .prop_filter_map("assumptions violated", |(m, ek, ep, lk, lp)| {
            let e = build_e(ek, ep, m.a);
            let l = build_l(lk, lp, m.a, m.lambda);
            let p = Problem::new(m, e, l).ok()?;
            p.validate().is_ok().then_some(p)
        })
}

fn any_shape() -> impl Strategy<Value = Shape> {
    let finite = -10.0..10.0f64;
    prop_oneof![
        finite.clone().prop_map(Shape::constant),
        (finite.clone(), finite.clone(), finite.clone()).prop_map(|(i, s, x)| Shape::affine(i, s, x)),
        (finite.clone(), 0.0..3.0f64, finite.clone()).prop_map(|(amp, r, x)| Shape::exp_decay(amp, r, x)),
        prop::collection::vec((0.01..5.0f64, finite), 1..6).prop_map(|steps| {
            let mut x = 0.0;
            let pts: Vec<(f64, f64)> = steps
                .into_iter()
                .map(|(dx, y)| {
                    x += dx;
                    (x, y)
                })
                .collect();
            Shape::piecewise(&pts)
        }),
    ]
}

fn integrand(p: &Problem, u: f64) -> f64 {
    let m = &p.market;
    let theta = m.theta();
    (m.lambda - p.l.value(u) + 0.5 * theta * theta) / p.e.value(u)
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Safe level by marching a fine cumulative trapezoid until the
/// accumulated cost reaches `rho`.
fn brute_force_d(p: &Problem, b: Level) -> f64 {
    let a = p.market.a;
    let step = 1e-4;
    let mut acc = 0.0;
    let mut x = a;
    let mut f_prev = integrand(p, a);
    loop {
        let next = x + step;
        if b.finite().is_some_and(|b| next >= b) {
            return b.to_f64();
        }
        let f_next = integrand(p, next);
        let inc = 0.5 * step * (f_prev + f_next);
        if acc + inc >= p.market.rho {
            return x + (p.market.rho - acc) / inc * step;
        }
        acc += inc;
        x = next;
        f_prev = f_next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shape_json_round_trip_is_bit_exact(
        shape in any_shape(),
        xs in prop::collection::vec(0.0..100.0f64, 1000),
    ) {
        let text = serde_json::to_string(&shape).unwrap();
        let back: Shape = serde_json::from_str(&text).unwrap();
        let f = ScalarFunction::new(shape, 0.0).unwrap();
        let g = ScalarFunction::new(back, 0.0).unwrap();
        for x in xs {
            prop_assert_eq!(f.value(x).to_bits(), g.value(x).to_bits());
        }
    }

    #[test]
    fn value_function_shape(p in problem(), fracs in prop::collection::vec(0.0..1.0f64, 50)) {
        let g = GameSolution::solve(&p);
        let (a, rho) = (p.market.a, p.market.rho);
        let d = g.d().to_f64();
        let mut xs: Vec<f64> = fracs.iter().map(|f| a + f * 1.5 * (d - a + 1.0)).collect();
        xs.sort_by(f64::total_cmp);
        prop_assert_eq!(g.value(a).unwrap(), rho);
        let mut prev = rho;
        for &x in &xs {
            let u = g.value(x).unwrap();
            prop_assert!((0.0..=rho).contains(&u));
            prop_assert!(u <= prev);
            prev = u;
            let pi = g.pi_star(x).unwrap();
            if x >= d {
                prop_assert_eq!(u, 0.0);
                prop_assert_eq!(pi, 0.0);
            } else {
                prop_assert!(pi >= 0.0);
            }
        }
    }

    #[test]
    fn value_matches_brute_force_quadrature(p in problem(), frac in 0.0..1.0f64) {
        let g = GameSolution::solve(&p);
        let a = p.market.a;
        let d = g.d().to_f64();
        // Stay clear of d and of the 1/e blow-up near b.
        let x = a + frac * 0.9 * (d - a);
        let brute = p.market.rho - simpson(|u| integrand(&p, u), a, x, 20_000);
        prop_assert!((g.value(x).unwrap() - brute).abs() < 1e-7, "{} vs {}", g.value(x).unwrap(), brute);
    }

    #[test]
    fn safe_level_matches_marching_oracle(p in problem()) {
        let s = compute_d(&p);
        prop_assert!(s.flag.is_none());
        let b = ruingame_core::game::compute_b(&p);
        let d = s.d.to_f64();
        // The marching oracle is only accurate where 1/e is tame.
        prop_assume!(b.finite().is_none_or(|b| b - d > 0.5));
        let brute = brute_force_d(&p, b);
        prop_assert!((d - brute).abs() < 1e-5, "{} vs {}", d, brute);
    }

    #[test]
    fn safe_level_grows_with_penalty(p in problem(), factor in 1.0..5.0f64) {
        let d = compute_d(&p).d.to_f64();
        let mut m = p.market;
        m.rho *= factor;
        let bigger = Problem::new(m, p.e.shape().clone(), p.l.shape().clone()).unwrap();
        prop_assert!(compute_d(&bigger).d.to_f64() >= d);
    }

    #[test]
    fn saddle_cost_does_not_depend_on_policy(p in problem(), frac in 0.05..0.95f64) {
        let g = Arc::new(GameSolution::solve(&p));
        let a = p.market.a;
        let x = a + frac * (g.d().to_f64() - a);
        let saddle = g.saddle_controls(x).unwrap();
        prop_assert!(saddle.within_bound);
        let psi = saddle.psi_dot;
        let policies = [
            FeedbackPolicy::pi_star(Arc::clone(&g)),
            FeedbackPolicy::zero(),
            FeedbackPolicy::constant(1.0),
            FeedbackPolicy::constant(g.m1()),
        ];
        let mut costs = Vec::new();
        for pol in &policies {
            let path = integrate_state_ode(&p, pol, |_| psi, x, 2.0 * saddle.t_star, 1e-3).unwrap();
            let tau = path.tau.unwrap();
            let c = game_cost(&p, pol, |_| psi, tau, &path).unwrap();
            prop_assert!(c.running <= 0.0 && c.total <= p.market.rho);
            costs.push(c.total);
        }
        prop_assert!(costs.iter().all(|c| c.to_bits() == costs[0].to_bits()));
        let u = g.value(x).unwrap();
        prop_assert!((costs[0] - u).abs() <= 1e-6, "cost {} vs U {}", costs[0], u);
    }
}

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

#[test]
fn hjb_residual_on_closed_form() {
    let problems = [
        Problem::new(p0_market(), Shape::constant(0.5), Shape::constant(0.0)).unwrap(),
        Problem::new(p0_market(), Shape::affine(0.5, -0.1, 1.0), Shape::constant(0.0)).unwrap(),
        Problem::new(p0_market(), Shape::constant(0.5), Shape::exp_decay(0.03, 0.5, 1.0)).unwrap(),
    ];
    for p in &problems {
        let g = GameSolution::solve(p);
        let (lo, hi) = (p.market.a + 1e-3, g.d().to_f64() - 1e-3);
        for i in 0..100 {
            let x = lo + (hi - lo) * i as f64 / 99.0;
            let r = g.hjb_residual(|y| g.value(y).unwrap(), x, 1e-5).unwrap();
            assert!(r.abs() <= 1e-6, "R({x}) = {r}");
        }
    }
}

#[test]
fn pi_star_with_penalty_at_barrier() {
    let p = Problem::new(p0_market(), Shape::constant(0.5), Shape::constant(0.03)).unwrap();
    let g = GameSolution::solve(&p);
    let pi = g.pi_star(1.0).unwrap();
    assert!((pi - 0.03 / (0.04 * 0.055)).abs() < 1e-9);
    assert!((pi - 13.6364).abs() < 1e-4);
}
