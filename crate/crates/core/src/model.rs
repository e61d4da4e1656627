//! Problem data: market constants, the excess-consumption function `e`, the
//! low-wealth penalty `l`, and the checks that a problem is well posed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of equispaced points used by grid validation.
pub const VALIDATION_GRID_POINTS: usize = 10_001;
/// Width of the validation window `[a, a + VALIDATION_SPAN]`.
pub const VALIDATION_SPAN: f64 = 100.0;

/// Black-Scholes market constants together with the mortality intensity,
/// the ruin penalty and the ruin level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub a: f64,
}

impl MarketParams {
    /// Market price of risk `(mu - r) / sigma`.
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// Drift earned per unit invested when the Brownian driver is shifted by
    /// `tilt`, i.e. `(mu - r) + sigma * tilt`.
    ///
    /// At the saddle tilt `-theta` the premium is returned as an exact zero so
    /// that the state dynamics do not depend on the policy at all.
    pub fn tilted_premium(&self, tilt: f64) -> f64 {
        if tilt == -self.theta() {
            0.0
        } else {
            (self.mu - self.r) + self.sigma * tilt
        }
    }

    /// `lambda - l + theta^2 / 2`, the numerator of the value-function slope.
    pub fn hazard_excess(&self, l_value: f64) -> f64 {
        let theta = self.theta();
        self.lambda - l_value + 0.5 * theta * theta
    }
}

/// A wealth level that may be infinite (`inf` of an empty set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Finite(f64),
    Infinite,
}

impl Level {
    pub fn finite(self) -> Option<f64> {
        match self {
            Level::Finite(v) => Some(v),
            Level::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Level::Finite(_))
    }

    /// True when `x` lies strictly below this level.
    pub fn is_above(self, x: f64) -> bool {
        match self {
            Level::Finite(v) => x < v,
            Level::Infinite => true,
        }
    }

    pub fn min(self, other: Level) -> Level {
        match (self, other) {
            (Level::Infinite, o) => o,
            (s, Level::Infinite) => s,
            (Level::Finite(u), Level::Finite(v)) => Level::Finite(u.min(v)),
        }
    }

    /// Lossy conversion for printing and arithmetic bounds.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(v) => write!(f, "{v}"),
            Level::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Level::Finite(v) => s.serialize_f64(*v),
            Level::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Parametric family used for `e` and `l`.
///
/// `affine` is `intercept + slope * (x - anchor)`, `exp-decay` is
/// `amplitude * exp(-rate * (x - anchor))`, and `piecewise-linear`
/// interpolates `(breakpoints[i], values[i])`, holding the end values
/// constant outside the breakpoint range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Constant {
        value: f64,
    },
    Affine {
        slope: f64,
        intercept: f64,
        #[serde(default)]
        anchor: f64,
    },
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    ExpDecay {
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        anchor: f64,
    },
}

impl Shape {
    pub fn constant(value: f64) -> Self {
        Shape::Constant { value }
    }

    pub fn affine(intercept: f64, slope: f64, anchor: f64) -> Self {
        Shape::Affine {
            slope,
            intercept,
            anchor,
        }
    }

    pub fn piecewise(points: &[(f64, f64)]) -> Self {
        Shape::PiecewiseLinear {
            breakpoints: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn exp_decay(amplitude: f64, rate: f64, anchor: f64) -> Self {
        Shape::ExpDecay {
            amplitude,
            rate,
            anchor,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Shape::Constant { value } => *value,
            Shape::Affine {
                slope,
                intercept,
                anchor,
            } => intercept + slope * (x - anchor),
            Shape::PiecewiseLinear { breakpoints, values } => {
                let last = breakpoints.len() - 1;
                if x <= breakpoints[0] {
                    return values[0];
                }
                if x >= breakpoints[last] {
                    return values[last];
                }
                let i = breakpoints.partition_point(|&b| b <= x);
                let (x0, x1) = (breakpoints[i - 1], breakpoints[i]);
                let (y0, y1) = (values[i - 1], values[i]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Shape::ExpDecay {
                amplitude,
                rate,
                anchor,
            } => amplitude * (-rate * (x - anchor)).exp(),
        }
    }

    /// Structural problems that make the shape unusable (not mere
    /// violations of the standing assumption).
    fn structural_issue(&self) -> Option<String> {
        match self {
            Shape::PiecewiseLinear { breakpoints, values } => {
                if breakpoints.is_empty() {
                    Some("piecewise-linear needs at least one breakpoint".into())
                } else if breakpoints.len() != values.len() {
                    Some(format!(
                        "piecewise-linear has {} breakpoints but {} values",
                        breakpoints.len(),
                        values.len()
                    ))
                } else if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    Some("piecewise-linear breakpoints must be strictly increasing".into())
                } else if breakpoints.iter().chain(values).any(|v| !v.is_finite()) {
                    Some("piecewise-linear entries must be finite".into())
                } else {
                    None
                }
            }
            Shape::Constant { value } if !value.is_finite() => {
                Some("constant value must be finite".into())
            }
            Shape::Affine {
                slope,
                intercept,
                anchor,
            } if ![slope, intercept, anchor].iter().all(|v| v.is_finite()) => {
                Some("affine parameters must be finite".into())
            }
            Shape::ExpDecay {
                amplitude,
                rate,
                anchor,
            } if ![amplitude, rate, anchor].iter().all(|v| v.is_finite()) => {
                Some("exp-decay parameters must be finite".into())
            }
            _ => None,
        }
    }
}

/// A scalar function of wealth on `[domain_lo, inf)`.
///
/// The supremum over the domain is computed analytically at construction and
/// kept as the stored upper bound `M0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFunction {
    shape: Shape,
    domain_lo: f64,
    upper_bound: f64,
}

impl ScalarFunction {
    pub fn new(shape: Shape, domain_lo: f64) -> Result<Self> {
        if let Some(issue) = shape.structural_issue() {
            return Err(Error::InvalidArgument(issue));
        }
        if !domain_lo.is_finite() {
            return Err(Error::InvalidArgument("domain lower end must be finite".into()));
        }
        let mut f = ScalarFunction {
            shape,
            domain_lo,
            upper_bound: f64::INFINITY,
        };
        f.upper_bound = f.analytic_sup();
        Ok(f)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn domain_lo(&self) -> f64 {
        self.domain_lo
    }

    /// Stored upper bound `M0` (may be `+inf` for kinds that are unbounded).
    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    /// Checked evaluation on `[domain_lo, inf)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < self.domain_lo || x.is_nan() {
            return Err(Error::Domain {
                x,
                lo: self.domain_lo,
            });
        }
        Ok(self.shape.eval(x))
    }

    /// Unchecked evaluation. Points left of the domain use the formula's
    /// natural extension; numerical integrators rely on this for stages that
    /// overshoot the ruin level by a fraction of a step.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.shape.eval(x)
    }

    /// Breakpoints that fall inside `[lo, hi]`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        match &self.shape {
            Shape::PiecewiseLinear { breakpoints, .. } => breakpoints
                .iter()
                .copied()
                .filter(|b| (lo..=hi).contains(b))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn analytic_sup(&self) -> f64 {
        let at_lo = self.shape.eval(self.domain_lo);
        match &self.shape {
            Shape::Constant { value } => *value,
            Shape::Affine { slope, .. } => {
                if *slope > 0.0 {
                    f64::INFINITY
                } else {
                    at_lo
                }
            }
            Shape::PiecewiseLinear { breakpoints, values } => breakpoints
                .iter()
                .zip(values)
                .filter(|(b, _)| **b >= self.domain_lo)
                .map(|(_, v)| *v)
                .fold(at_lo, f64::max),
            Shape::ExpDecay {
                amplitude, rate, ..
            } => {
                if *amplitude == 0.0 {
                    0.0
                } else if *amplitude > 0.0 {
                    if *rate < 0.0 {
                        f64::INFINITY
                    } else {
                        at_lo
                    }
                } else if *rate > 0.0 {
                    0.0
                } else {
                    at_lo
                }
            }
        }
    }

    /// Infimum over `[domain_lo, inf)`.
    pub fn analytic_inf(&self) -> f64 {
        let at_lo = self.shape.eval(self.domain_lo);
        match &self.shape {
            Shape::Constant { value } => *value,
            Shape::Affine { slope, .. } => {
                if *slope < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    at_lo
                }
            }
            Shape::PiecewiseLinear { breakpoints, values } => breakpoints
                .iter()
                .zip(values)
                .filter(|(b, _)| **b >= self.domain_lo)
                .map(|(_, v)| *v)
                .fold(at_lo, f64::min),
            Shape::ExpDecay {
                amplitude, rate, ..
            } => {
                if *amplitude == 0.0 {
                    0.0
                } else if *amplitude > 0.0 {
                    if *rate > 0.0 {
                        0.0
                    } else {
                        at_lo
                    }
                } else if *rate < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    at_lo
                }
            }
        }
    }

    /// Global Lipschitz constant on `[domain_lo, inf)`; `+inf` if none exists.
    pub fn lipschitz_constant(&self) -> f64 {
        match &self.shape {
            Shape::Constant { .. } => 0.0,
            Shape::Affine { slope, .. } => slope.abs(),
            Shape::PiecewiseLinear { breakpoints, values } => breakpoints
                .windows(2)
                .zip(values.windows(2))
                .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
                .fold(0.0, f64::max),
            Shape::ExpDecay {
                amplitude, rate, ..
            } => {
                if *amplitude == 0.0 || *rate == 0.0 {
                    0.0
                } else if *rate < 0.0 {
                    f64::INFINITY
                } else {
                    rate * self.shape.eval(self.domain_lo).abs()
                }
            }
        }
    }

    /// Analytic monotonicity check on `[domain_lo, inf)`.
    pub fn is_non_increasing(&self) -> bool {
        match &self.shape {
            Shape::Constant { .. } => true,
            Shape::Affine { slope, .. } => *slope <= 0.0,
            Shape::PiecewiseLinear { breakpoints, .. } => {
                let mut pts = vec![self.domain_lo];
                pts.extend(breakpoints.iter().copied().filter(|b| *b > self.domain_lo));
                pts.windows(2)
                    .all(|w| self.shape.eval(w[1]) <= self.shape.eval(w[0]))
            }
            Shape::ExpDecay {
                amplitude, rate, ..
            } => amplitude * rate >= 0.0,
        }
    }

    /// `inf { x >= domain_lo : f(x) < 0 }`.
    ///
    /// Exact for the constant, affine and exponential kinds; piecewise-linear
    /// functions are bracketed on the first segment that ends negative and
    /// the crossing is found by linear interpolation on the bracketing segment.
    pub fn first_negative(&self) -> Level {
        let lo = self.domain_lo;
        if self.shape.eval(lo) < 0.0 {
            return Level::Finite(lo);
        }
        match &self.shape {
            Shape::Constant { .. } => Level::Infinite,
            Shape::Affine {
                slope,
                intercept,
                anchor,
            } => {
                if *slope < 0.0 {
                    Level::Finite((anchor - intercept / slope).max(lo))
                } else {
                    Level::Infinite
                }
            }
            Shape::ExpDecay { .. } => Level::Infinite,
            Shape::PiecewiseLinear { breakpoints, .. } => {
                let mut left = lo;
                for &knot in breakpoints.iter().filter(|b| **b > lo) {
                    let (y_left, y_knot) = (self.shape.eval(left), self.shape.eval(knot));
                    if y_knot < 0.0 {
                        let root = left + y_left / (y_left - y_knot) * (knot - left);
                        return Level::Finite(root.clamp(left, knot));
                    }
                    left = knot;
                }
                Level::Infinite
            }
        }
    }
}

/// Market constants plus the two scalar functions, all on `[a, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub market: MarketParams,
    pub e: ScalarFunction,
    pub l: ScalarFunction,
}

impl Problem {
    pub fn new(market: MarketParams, e: Shape, l: Shape) -> Result<Self> {
        Ok(Problem {
            market,
            e: ScalarFunction::new(e, market.a)?,
            l: ScalarFunction::new(l, market.a)?,
        })
    }

    pub fn eval_e(&self, x: f64) -> Result<f64> {
        self.e.eval(x)
    }

    pub fn eval_l(&self, x: f64) -> Result<f64> {
        self.l.eval(x)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_problem(&self.market, &self.e, &self.l)
    }
}

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Violating wealth level for grid-checked properties.
    pub at: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>, at: Option<f64>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
            at,
        });
    }

    fn require(&mut self, name: &str, ok: bool) {
        let detail = if ok {
            String::new()
        } else {
            format!("{name} violated")
        };
        self.push(name, ok, detail, None);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "all {} checks passed", self.checks.len());
        }
        for c in self.failures() {
            writeln!(f, "FAIL {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Validation grid: equispaced points on `[a, a + 100]` plus any breakpoints.
pub fn validation_grid(a: f64, extra: &[f64]) -> Vec<f64> {
    let step = VALIDATION_SPAN / (VALIDATION_GRID_POINTS - 1) as f64;
    let mut grid: Vec<f64> = (0..VALIDATION_GRID_POINTS)
        .map(|i| a + step * i as f64)
        .collect();
    grid.extend_from_slice(extra);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn describe_at(x: f64, a: f64) -> String {
    if x == a {
        "x=a".to_string()
    } else {
        format!("x={x}")
    }
}

/// Checks the standing assumptions on the market constants, `e` and `l`.
/// Violations are report entries; this never fails.
pub fn validate_problem(
    market: &MarketParams,
    e: &ScalarFunction,
    l: &ScalarFunction,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let MarketParams {
        mu,
        r,
        sigma,
        lambda,
        rho,
        a,
    } = *market;

    let all_finite = [mu, r, sigma, lambda, rho, a].iter().all(|v| v.is_finite());
    report.require("market constants finite", all_finite);
    report.require("μ > r", mu > r);
    report.require("r > 0", r > 0.0);
    report.require("σ > 0", sigma > 0.0);
    report.require("λ > 0", lambda > 0.0);
    report.require("ρ > 0", rho > 0.0);
    report.require("a > 0", a > 0.0);

    for (name, f) in [("e", e), ("l", l)] {
        let ok = f.domain_lo() == a;
        report.push(
            &format!("{name} domain starts at a"),
            ok,
            if ok {
                String::new()
            } else {
                format!("{name} is defined from {} but a = {a}", f.domain_lo())
            },
            None,
        );
        let lip = f.lipschitz_constant();
        report.push(
            &format!("{name} Lipschitz"),
            lip.is_finite(),
            if lip.is_finite() {
                String::new()
            } else {
                format!("{name} has no global Lipschitz constant on [a, inf)")
            },
            None,
        );
    }

    let mut extra = e.breakpoints_in(a, a + VALIDATION_SPAN);
    extra.extend(l.breakpoints_in(a, a + VALIDATION_SPAN));
    let grid = validation_grid(a, &extra);

    // e: finite and dominated by M0.
    let m0 = e.upper_bound();
    report.push(
        "e bounded above by finite M0",
        m0.is_finite(),
        if m0.is_finite() {
            String::new()
        } else {
            "e is unbounded above on [a, inf)".to_string()
        },
        None,
    );
    let e_bad = grid
        .iter()
        .copied()
        .find(|&x| !e.value(x).is_finite() || e.value(x) > m0);
    report.push(
        "e(x) ≤ M0",
        e_bad.is_none(),
        e_bad
            .map(|x| format!("e(x) ≤ M0 violated at {}", describe_at(x, a)))
            .unwrap_or_default(),
        e_bad,
    );

    // l: 0 <= l < lambda, non-increasing.
    let neg = grid
        .iter()
        .copied()
        .find(|&x| !(l.value(x) >= 0.0))
        .or_else(|| (l.analytic_inf() < 0.0).then_some(f64::INFINITY));
    report.push(
        "l(x) ≥ 0",
        neg.is_none(),
        neg.map(|x| format!("l(x) ≥ 0 violated at {}", describe_at(x, a)))
            .unwrap_or_default(),
        neg,
    );
    let high = grid
        .iter()
        .copied()
        .find(|&x| !(l.value(x) < lambda))
        .or_else(|| (l.upper_bound() >= lambda).then_some(a));
    report.push(
        "l(x) < λ",
        high.is_none(),
        high.map(|x| {
            format!(
                "l(x) < λ violated at {} (l = {}, λ = {lambda})",
                describe_at(x, a),
                l.value(x)
            )
        })
        .unwrap_or_default(),
        high,
    );
    let rise = grid
        .windows(2)
        .find(|w| l.value(w[1]) > l.value(w[0]))
        .map(|w| w[1])
        .or_else(|| (!l.is_non_increasing()).then_some(f64::INFINITY));
    report.push(
        "l non-increasing",
        rise.is_none(),
        rise.map(|x| format!("l non-increasing violated at {}", describe_at(x, a)))
            .unwrap_or_default(),
        rise,
    );

    report
}
