//! Adaptive Simpson quadrature and bracketing bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute tolerance used for every value-function integral.
pub const QUAD_TOL: f64 = 1e-12;
/// Upper limit on the number of subintervals examined by one integral.
pub const MAX_INTERVALS: usize = 1 << 20;
const ROUNDOFF_FACTOR: f64 = 64.0;

struct Panel {
    lo: f64,
    hi: f64,
    /// Samples at `lo`, quarter, mid, three-quarter and `hi`.
    f: [f64; 5],
    estimate: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.lo.total_cmp(&self.lo))
    }
}

fn simpson(h: f64, f_lo: f64, f_mid: f64, f_hi: f64) -> f64 {
    h / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
}

impl Panel {
    fn new(lo: f64, hi: f64, f: [f64; 5]) -> Self {
        let whole = simpson(hi - lo, f[0], f[2], f[4]);
        let m = 0.5 * (lo + hi);
        let halves = simpson(m - lo, f[0], f[1], f[2]) + simpson(hi - m, f[2], f[3], f[4]);
        let delta = halves - whole;
        let q1 = 0.5 * (lo + m);
        let q3 = 0.5 * (m + hi);
        let splittable = q1 > lo && m > q1 && q3 > m && hi > q3;
        // Error the samples carry from rounding of the abscissae and of f
        // itself; refining below it only chases noise.
        let f_max = f.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let noise = f64::EPSILON
            * ((f[4] - f[0]).abs() * lo.abs().max(hi.abs()) + (hi - lo) * f_max);
        let error = delta.abs() / 15.0;
        Panel {
            lo,
            hi,
            f,
            estimate: halves + delta / 15.0,
            error: if splittable && error > ROUNDOFF_FACTOR * noise {
                error
            } else {
                0.0
            },
        }
    }
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Globally adaptive Simpson: the panel with the largest Richardson error
/// estimate `|S_halves - S_whole| / 15` is split until the summed estimate
/// falls below `tol`, or below the round-off level of the integral itself.
/// Panels whose estimate is within the rounding noise of their own samples
/// count as converged; this is what limits accuracy next to a pole.
/// Fails if any sample is non-finite or more than [`MAX_INTERVALS`] panels
/// are needed.
pub fn adaptive_simpson<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if lo == hi {
        return Ok(0.0);
    }
    if hi < lo {
        return adaptive_simpson(f, hi, lo, tol).map(|v| -v);
    }
    let fail = |reason: &str| Error::Quadrature {
        lo,
        hi,
        reason: reason.to_string(),
    };
    let sample = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(fail(&format!("integrand is {y} at {x}")))
        }
    };
    let panel = |a: f64, b: f64, f_a: f64, f_m: f64, f_b: f64| -> Result<Panel> {
        let m = 0.5 * (a + b);
        let f_q1 = sample(0.5 * (a + m))?;
        let f_q3 = sample(0.5 * (m + b))?;
        Ok(Panel::new(a, b, [f_a, f_q1, f_m, f_q3, f_b]))
    };

    let first = panel(lo, hi, sample(lo)?, sample(0.5 * (lo + hi))?, sample(hi)?)?;
    let mut error = first.error;
    let mut magnitude = first.estimate.abs();
    let mut heap = BinaryHeap::from([first]);

    while error > tol.max(ROUNDOFF_FACTOR * f64::EPSILON * magnitude) {
        if heap.len() >= MAX_INTERVALS {
            return Err(fail("interval cap exceeded"));
        }
        let worst = heap.pop().expect("heap is never empty");
        if worst.error == 0.0 {
            // Everything left has converged; `error` is only drift.
            heap.push(worst);
            break;
        }
        let m = 0.5 * (worst.lo + worst.hi);
        let [f0, f1, f2, f3, f4] = worst.f;
        let left = panel(worst.lo, m, f0, f1, f2)?;
        let right = panel(m, worst.hi, f2, f3, f4)?;
        error += left.error + right.error - worst.error;
        magnitude += left.estimate.abs() + right.estimate.abs() - worst.estimate.abs();
        heap.push(left);
        heap.push(right);
        if error <= tol.max(ROUNDOFF_FACTOR * f64::EPSILON * magnitude) {
            // Re-sum to shed drift in the running totals before stopping.
            error = heap.iter().map(|p| p.error).sum();
            magnitude = heap.iter().map(|p| p.estimate.abs()).sum();
        }
    }

    // Sum in ascending position so the result does not depend on heap order.
    let mut panels = heap.into_vec();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut total = 0.0;
    let mut compensation = 0.0;
    for p in &panels {
        let y = p.estimate - compensation;
        let t = total + y;
        compensation = (t - total) - y;
        total = t;
    }
    Ok(total)
}

/// Result of a bracketing bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Whether the upper end ever moved, i.e. a point with `g <= 0` was seen.
    pub hi_moved: bool,
}

/// Bisection for the first zero of a function that is positive left of the
/// root and non-positive right of it. `g(lo)` is assumed positive and
/// `hi` is assumed to be at or beyond the root; `hi` itself is never
/// evaluated. Stops when `hi - lo <= rel_tol * max(|lo|, |hi|, 1)`.
pub fn bisect_sign_change<G>(mut g: G, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<Bracket>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut hi_moved = false;
    for _ in 0..2_000 {
        let scale = lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= rel_tol * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            hi_moved = true;
        }
    }
    Ok(Bracket { lo, hi, hi_moved })
}
