//! Log-domain aggregation of exponential-scale Monte Carlo samples.

/// `ln(sum exp(v_i))`, `-inf` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(x) + exp(y))` without overflow.
#[inline]
pub fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Summary of `exp(E_i)` computed without leaving the log domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMoments {
    /// `ln(mean exp(E_i))`.
    pub log_mean: f64,
    /// Standard error of `ln(mean)` by the delta method:
    /// `sd(exp E) / (sqrt(N) mean(exp E))`.
    pub log_mean_se: f64,
    /// Kish effective sample size `(sum w)^2 / sum w^2` with `w = exp(E)`.
    pub ess: f64,
    pub count: usize,
}

/// Moments of `exp(E_i)`; samples are summed in the given order so the
/// result depends only on the sequence, never on how it was produced.
pub fn log_moments(exponents: &[f64]) -> Option<LogMoments> {
    let n = exponents.len();
    if n == 0 {
        return None;
    }
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for e in exponents {
        let w = (e - max).exp();
        sum += w;
        sum_sq += w * w;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Some(LogMoments {
        log_mean: max + mean.ln(),
        log_mean_se: var.sqrt() / (nf.sqrt() * mean),
        ess: sum * sum / sum_sq,
        count: n,
    })
}
