//! Small statistical helpers shared by the forecasters and feature code.

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (denominator `n − 1`); NaN for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Lag-`lag` differences.
pub fn diff(x: &[f64], lag: usize) -> Vec<f64> {
    if x.len() <= lag {
        return Vec::new();
    }
    (lag..x.len()).map(|t| x[t] - x[t - lag]).collect()
}

/// Sample autocorrelations at lags `1..=max_lag`. `None` for constant input.
pub fn acf(x: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if denom == 0.0 {
        return None;
    }
    Some(
        (1..=max_lag)
            .map(|k| {
                if k >= n {
                    return 0.0;
                }
                (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum::<f64>() / denom
            })
            .collect(),
    )
}

/// Partial autocorrelations at lags `1..=max_lag` via Durbin–Levinson.
pub fn pacf(x: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let r = acf(x, max_lag)?;
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let num = r[k - 1] - (1..k).map(|j| phi[j - 1] * r[k - j - 1]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * r[j - 1]).sum::<f64>();
        let pkk = if den.abs() < 1e-300 { 0.0 } else { num / den };
        let prev = phi.clone();
        phi = (1..k).map(|j| prev[j - 1] - pkk * prev[k - j - 1]).collect();
        phi.push(pkk);
        out.push(pkk);
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn box_pierce(x: &[f64], lag: usize) -> Option<TestResult> {
    let r = acf(x, lag)?;
    let n = x.len() as f64;
    let statistic = n * r.iter().map(|v| v * v).sum::<f64>();
    Some(TestResult {
        statistic,
        p_value: chi2_upper(statistic, lag as f64),
    })
}

pub fn ljung_box(x: &[f64], lag: usize) -> Option<TestResult> {
    let r = acf(x, lag)?;
    let n = x.len() as f64;
    let statistic = n
        * (n + 2.0)
        * r.iter()
            .enumerate()
            .map(|(i, v)| v * v / (n - (i + 1) as f64))
            .sum::<f64>();
    Some(TestResult {
        statistic,
        p_value: chi2_upper(statistic, lag as f64),
    })
}

fn chi2_upper(stat: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    (1.0 - dist.cdf(stat)).clamp(0.0, 1.0)
}

/// Level-stationarity KPSS critical values at 10%, 5%, 2.5%, 1%.
pub const KPSS_CRITICAL: [(f64, f64); 4] = [(0.347, 0.10), (0.463, 0.05), (0.574, 0.025), (0.739, 0.01)];

/// KPSS test with a level-stationary null and `trunc(4 (n/100)^¼)` Bartlett lags.
///
/// The p-value is interpolated in the critical value table and clamped to
/// `[0.01, 0.10]`.
pub fn kpss(x: &[f64]) -> Option<TestResult> {
    let n = x.len();
    if n < 3 || is_constant(x) {
        return None;
    }
    let m = mean(x);
    let e: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut cum = 0.0;
    let eta: f64 = e
        .iter()
        .map(|v| {
            cum += v;
            cum * cum
        })
        .sum::<f64>()
        / (n * n) as f64;
    let lags = (4.0 * (n as f64 / 100.0).powf(0.25)).trunc() as usize;
    let nf = n as f64;
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>() / nf;
    for s in 1..=lags.min(n - 1) {
        let w = 1.0 - s as f64 / (lags as f64 + 1.0);
        let cov: f64 = (s..n).map(|t| e[t] * e[t - s]).sum::<f64>() / nf;
        s2 += 2.0 * w * cov;
    }
    if s2 <= 0.0 {
        return None;
    }
    let statistic = eta / s2;
    Some(TestResult {
        statistic,
        p_value: kpss_p_value(statistic),
    })
}

fn kpss_p_value(stat: f64) -> f64 {
    let (first, last) = (KPSS_CRITICAL[0], KPSS_CRITICAL[3]);
    if stat <= first.0 {
        return first.1;
    }
    if stat >= last.0 {
        return last.1;
    }
    for w in KPSS_CRITICAL.windows(2) {
        let ((c0, p0), (c1, p1)) = (w[0], w[1]);
        if stat <= c1 {
            return p0 + (stat - c0) / (c1 - c0) * (p1 - p0);
        }
    }
    last.1
}

/// Number of first differences until KPSS no longer rejects at `alpha`.
pub fn ndiffs(x: &[f64], alpha: f64, max_d: usize) -> usize {
    let mut series = x.to_vec();
    let mut d = 0;
    while d < max_d {
        match kpss(&series) {
            Some(t) if t.p_value < alpha => {
                series = diff(&series, 1);
                d += 1;
            }
            _ => break,
        }
    }
    d
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}
