//! Small numeric kernels shared across modules: overflow-safe
//! log-sum-exp, compensated summation, and a least-squares line fit
//! with standard errors.

/// log(exp(a) + exp(b)) without overflow for large |a|, |b|.
#[inline]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(v_i) over a slice, shifting by the maximum first so the
/// largest term exponentiates to exactly 1. Empty input gives -inf.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Kahan–Neumaier compensated accumulator. Keeps a running correction
/// term so long alternating sums do not drift at O(n·eps).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Ordinary least-squares fit y = intercept + slope·x.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
}

/// Fit a line through (x, y) pairs; needs at least 3 points for a
/// meaningful standard error. Degenerate x-spread yields NaN slope.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len(), "fit_line: length mismatch");
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut ss_resid = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_resid += r * r;
    }
    let dof = (xs.len().max(3) - 2) as f64;
    let slope_stderr = (ss_resid / (dof * sxx)).sqrt();
    LineFit {
        slope,
        intercept,
        slope_stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum_in_safe_range() {
        let vals = [-1.5, 0.25, 2.0, -3.0];
        let direct: f64 = vals.iter().map(|v| f64::exp(*v)).sum::<f64>().ln();
        assert!((logsumexp(&vals) - direct).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_survives_huge_inputs() {
        // exp(1e4) overflows f64; the shifted form must not.
        let v = logsumexp(&[1e4, 1e4 - 1.0]);
        assert!((v - (1e4 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-10);
        let w = logsumexp(&[-1e4, -1e4]);
        assert!((w - (-1e4 + 2.0f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn logsumexp2_agrees_with_slice_version() {
        for (a, b) in [(0.0, 0.0), (-700.0, 700.0), (3.25, -1.5)] {
            assert!((logsumexp2(a, b) - logsumexp(&[a, b])).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_empty_is_neg_infinity() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn compensated_sum_beats_naive_on_alternating_series() {
        // sum of (1/3 - 1/3) repeated must be ~0 even after 1e6 terms.
        let mut acc = CompensatedSum::new();
        for _ in 0..1_000_000 {
            acc.add(1.0 / 3.0);
            acc.add(0.1);
            acc.add(-1.0 / 3.0);
            acc.add(-0.1);
        }
        assert!(acc.value().abs() < 1e-12);
    }

    #[test]
    fn fit_line_recovers_exact_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope - 2.5).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-10);
        assert!(fit.slope_stderr < 1e-12);
    }
}
