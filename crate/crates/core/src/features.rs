//! Series features and their principal components.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::stats;

/// Centered moving average of width `w`; a `2 × w` average when `w` is even.
/// Entries without a full window are `None`.
pub fn centered_moving_average(y: &[f64], w: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let mut out = vec![None; n];
    if w == 0 || n < w + usize::from(w % 2 == 0) {
        return out;
    }
    if w % 2 == 1 {
        let half = w / 2;
        for t in half..n - half {
            out[t] = Some(y[t - half..=t + half].iter().sum::<f64>() / w as f64);
        }
    } else {
        let half = w / 2;
        for t in half..n - half {
            let inner: f64 = y[t + 1 - half..t + half].iter().sum();
            let v = (0.5 * y[t - half] + inner + 0.5 * y[t + half]) / w as f64;
            out[t] = Some(v);
        }
    }
    out
}

/// Classical additive decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub period: usize,
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<Option<f64>>,
    /// Seasonal index by cycle position `t mod m`, summing to zero.
    pub indices: Vec<f64>,
}

/// Trend by centered moving average over one cycle (three points when
/// `m = 1`), seasonal indices from the mean detrended value per position.
pub fn decompose(y: &[f64], m: usize) -> Result<Decomposition> {
    if m == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    let need = if m == 1 { 3 } else { 2 * m + 1 };
    if y.len() < need {
        return Err(Error::TooShort(format!("decomposition needs {need} points, got {}", y.len())));
    }
    let n = y.len();
    let trend = centered_moving_average(y, if m == 1 { 3 } else { m });
    let mut indices = vec![0.0; m];
    if m > 1 {
        let mut counts = vec![0usize; m];
        for t in 0..n {
            if let Some(tr) = trend[t] {
                indices[t % m] += y[t] - tr;
                counts[t % m] += 1;
            }
        }
        for (v, c) in indices.iter_mut().zip(&counts) {
            *v /= (*c).max(1) as f64;
        }
        let mean = stats::mean(&indices);
        indices.iter_mut().for_each(|v| *v -= mean);
    }
    let seasonal: Vec<f64> = (0..n).map(|t| indices[t % m]).collect();
    let remainder = (0..n).map(|t| trend[t].map(|tr| y[t] - tr - seasonal[t])).collect();
    Ok(Decomposition {
        period: m,
        trend,
        seasonal,
        remainder,
        indices,
    })
}

/// `1 − Var(R)/Var(X + R)`. A component with no variation beyond rounding
/// noise relative to the series has strength 0.
fn strength(remainder: &[f64], other_plus_remainder: &[f64], series_var: f64) -> Option<f64> {
    let denom = stats::variance(other_plus_remainder);
    if !denom.is_finite() {
        return None;
    }
    if denom <= 1e-12 * series_var || denom == 0.0 {
        return Some(0.0);
    }
    Some((1.0 - stats::variance(remainder) / denom).clamp(0.0, 1.0))
}

impl Decomposition {
    fn interior(&self) -> Vec<usize> {
        (0..self.trend.len()).filter(|&t| self.trend[t].is_some()).collect()
    }

    fn interior_variance(&self, idx: &[usize]) -> f64 {
        let y: Vec<f64> = idx
            .iter()
            .map(|&t| self.trend[t].unwrap() + self.seasonal[t] + self.remainder[t].unwrap())
            .collect();
        stats::variance(&y)
    }

    pub fn trend_strength(&self) -> Option<f64> {
        let idx = self.interior();
        let r: Vec<f64> = idx.iter().map(|&t| self.remainder[t].unwrap()).collect();
        let tr: Vec<f64> = idx.iter().map(|&t| self.trend[t].unwrap() + self.remainder[t].unwrap()).collect();
        strength(&r, &tr, self.interior_variance(&idx))
    }

    pub fn seasonal_strength(&self) -> Option<f64> {
        if self.period < 2 {
            return None;
        }
        let idx = self.interior();
        let r: Vec<f64> = idx.iter().map(|&t| self.remainder[t].unwrap()).collect();
        let sr: Vec<f64> = idx.iter().map(|&t| self.seasonal[t] + self.remainder[t].unwrap()).collect();
        strength(&r, &sr, self.interior_variance(&idx))
    }
}

/// Seasonal strength when `m > 1` and the series spans three cycles.
pub fn seasonal_strength(y: &[f64], m: usize) -> Option<f64> {
    if m < 2 || y.len() < 3 * m {
        return None;
    }
    decompose(y, m).ok()?.seasonal_strength()
}

pub const FEATURE_NAMES: [&str; 41] = [
    "trend_strength",
    "seasonal_strength",
    "spikiness",
    "linearity",
    "curvature",
    "e_acf1",
    "e_acf10",
    "x_acf1",
    "x_acf10",
    "diff1_acf1",
    "diff1_acf10",
    "diff2_acf1",
    "diff2_acf10",
    "season_acf1",
    "x_pacf5",
    "diff1_pacf5",
    "diff2_pacf5",
    "season_pacf",
    "entropy",
    "box_pierce_stat",
    "box_pierce_pval",
    "ljung_box_stat",
    "ljung_box_pval",
    "kpss_stat",
    "kpss_pval",
    "ndiffs",
    "nsdiffs",
    "stability",
    "lumpiness",
    "max_level_shift",
    "time_level_shift",
    "max_var_shift",
    "time_var_shift",
    "crossing_points",
    "flat_spots",
    "seasonal_peak",
    "seasonal_trough",
    "zero_start_prop",
    "zero_end_prop",
    "nonzero_interval_mean",
    "nonzero_cv2",
];

/// Named features in [`FEATURE_NAMES`] order; `None` marks an absent value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        let i = FEATURE_NAMES.iter().position(|n| *n == name)?;
        self.values[i]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }

    /// Comma separated values, `NA` for absent ones.
    pub fn to_csv_fields(&self) -> String {
        self.values
            .iter()
            .map(|v| match v {
                Some(v) => format!("{v}"),
                None => "NA".into(),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn sum_sq(v: &[f64], k: usize) -> f64 {
    v.iter().take(k).map(|x| x * x).sum()
}

fn acf_features(x: &[f64]) -> (Option<f64>, Option<f64>) {
    match stats::acf(x, 10) {
        Some(r) if x.len() > 10 => (Some(r[0]), Some(sum_sq(&r, 10))),
        Some(r) => (Some(r[0]), None),
        None => (None, None),
    }
}

fn pacf5(x: &[f64]) -> Option<f64> {
    if x.len() <= 5 {
        return None;
    }
    stats::pacf(x, 5).map(|p| sum_sq(&p, 5))
}

/// Variance of the means of complete, non-overlapping tiles.
pub fn stability(y: &[f64], width: usize) -> Option<f64> {
    let means: Vec<f64> = y.chunks_exact(width).map(stats::mean).collect();
    (means.len() >= 2).then(|| stats::variance(&means))
}

/// Variance of the variances of complete, non-overlapping tiles.
pub fn lumpiness(y: &[f64], width: usize) -> Option<f64> {
    if width < 2 {
        return None;
    }
    let vars: Vec<f64> = y.chunks_exact(width).map(stats::variance).collect();
    (vars.len() >= 2).then(|| stats::variance(&vars))
}

/// Times the series crosses its median.
pub fn crossing_points(y: &[f64]) -> usize {
    let med = stats::median(y);
    let below: Vec<bool> = y.iter().map(|v| *v <= med).collect();
    below.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Longest run within one of ten equal-width bins over the range.
pub fn flat_spots(y: &[f64]) -> usize {
    if y.is_empty() {
        return 0;
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let bins: Vec<usize> = y
        .iter()
        .map(|v| {
            if range == 0.0 {
                0
            } else {
                (((v - lo) / range * 10.0).floor() as usize).min(9)
            }
        })
        .collect();
    let mut best = 1;
    let mut run = 1;
    for w in bins.windows(2) {
        if w[0] == w[1] {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best
}

/// Shannon entropy of the normalized periodogram, divided by its maximum.
pub fn spectral_entropy(y: &[f64]) -> Option<f64> {
    let n = y.len();
    let k_max = n / 2;
    if k_max < 2 {
        return None;
    }
    let mean = stats::mean(y);
    let x: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let power: Vec<f64> = (1..=k_max)
        .map(|k| {
            let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = w * t as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let h: f64 = power
        .iter()
        .map(|p| p / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Some((h / (k_max as f64).ln()).clamp(0.0, 1.0))
}

/// Largest change between consecutive non-overlapping windows of a rolling
/// statistic, with the 1-based index where the later window starts.
fn max_shift(y: &[f64], width: usize, stat: fn(&[f64]) -> f64) -> Option<(f64, f64)> {
    if width == 0 || y.len() < 2 * width {
        return None;
    }
    let rolled: Vec<f64> = y.windows(width).map(stat).collect();
    let mut best: Option<(f64, usize)> = None;
    for i in 0..rolled.len() - width {
        let d = (rolled[i + width] - rolled[i]).abs();
        if best.map_or(true, |(b, _)| d > b) {
            best = Some((d, i + width + 1));
        }
    }
    best.map(|(d, i)| (d, i as f64))
}

/// Variance of the leave-one-out variances of `r`.
fn spikiness(r: &[f64]) -> Option<f64> {
    let n = r.len();
    if n < 4 {
        return None;
    }
    let nf = n as f64;
    let sum: f64 = r.iter().sum();
    let sumsq: f64 = r.iter().map(|v| v * v).sum();
    let loo: Vec<f64> = r
        .iter()
        .map(|v| {
            let s = sum - v;
            let ss = sumsq - v * v;
            let k = nf - 1.0;
            ((ss - s * s / k) / (k - 1.0)).max(0.0)
        })
        .collect();
    Some(stats::variance(&loo))
}

/// Coefficients of the trend on orthonormal linear and quadratic polynomials.
fn linearity_curvature(trend: &[f64]) -> Option<(f64, f64)> {
    let n = trend.len();
    if n < 3 {
        return None;
    }
    let t: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; n], t.clone(), t.iter().map(|v| v * v).collect()];
    for i in 0..3 {
        for j in 0..i {
            let proj: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
            let bj = basis[j].clone();
            for (a, b) in basis[i].iter_mut().zip(&bj) {
                *a -= proj * b;
            }
        }
        let norm = basis[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        basis[i].iter_mut().for_each(|v| *v /= norm);
    }
    let dot = |b: &[f64]| b.iter().zip(trend).map(|(a, c)| a * c).sum::<f64>();
    Some((dot(&basis[1]), dot(&basis[2])))
}

fn intermittency(y: &[f64]) -> (f64, f64, Option<f64>, Option<f64>) {
    let n = y.len() as f64;
    let start = y.iter().take_while(|v| **v == 0.0).count() as f64 / n;
    let end = y.iter().rev().take_while(|v| **v == 0.0).count() as f64 / n;
    let pos: Vec<usize> = (0..y.len()).filter(|&t| y[t] != 0.0).collect();
    if pos.len() < 2 {
        return (start, end, None, None);
    }
    let gaps: Vec<f64> = pos.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let nz: Vec<f64> = pos.iter().map(|&t| y[t]).collect();
    let mean = stats::mean(&nz);
    let cv2 = if mean != 0.0 {
        Some(stats::variance(&nz) / (mean * mean))
    } else {
        None
    };
    (start, end, Some(stats::mean(&gaps)), cv2)
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b })
}

/// Computes every feature for `y` with seasonal period `m`.
///
/// Seasonal features need `m > 1` and at least three cycles; otherwise they
/// are absent. Tiles and shift windows are `m` wide, or 10 when `m = 1`.
pub fn compute_features(y: &[f64], m: usize) -> Result<FeatureVector> {
    if m == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    if y.len() < 4 {
        return Err(Error::TooShort(format!("features need at least 4 points, got {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite observation"));
    }
    let seasonal = m > 1 && y.len() >= 3 * m;
    let dec = decompose(y, if seasonal { m } else { 1 })?;
    let interior: Vec<usize> = dec.interior();
    let remainder: Vec<f64> = interior.iter().map(|&t| dec.remainder[t].unwrap()).collect();
    let trend: Vec<f64> = interior.iter().map(|&t| dec.trend[t].unwrap()).collect();
    let width = if m > 1 { m } else { 10 };

    let mut f: Vec<Option<f64>> = vec![None; FEATURE_NAMES.len()];
    let mut set = |name: &str, v: Option<f64>| {
        let i = FEATURE_NAMES.iter().position(|n| *n == name).expect("known feature");
        f[i] = v.filter(|v| v.is_finite());
    };

    let constant = stats::is_constant(y);
    set("trend_strength", dec.trend_strength());
    set("seasonal_strength", if seasonal { dec.seasonal_strength() } else { None });
    set("spikiness", spikiness(&remainder));
    let (lin, curv) = match linearity_curvature(&trend) {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    set("linearity", lin);
    set("curvature", curv);

    let (e1, e10) = acf_features(&remainder);
    set("e_acf1", e1);
    set("e_acf10", e10);
    let d1 = stats::diff(y, 1);
    let d2 = stats::diff(&d1, 1);
    let (x1, x10) = acf_features(y);
    set("x_acf1", x1);
    set("x_acf10", x10);
    let (a1, a10) = acf_features(&d1);
    set("diff1_acf1", a1);
    set("diff1_acf10", a10);
    let (b1, b10) = acf_features(&d2);
    set("diff2_acf1", b1);
    set("diff2_acf10", b10);
    if m > 1 && y.len() > m {
        set("season_acf1", stats::acf(y, m).map(|r| r[m - 1]));
        set("season_pacf", stats::pacf(y, m).map(|r| r[m - 1]));
    }
    set("x_pacf5", pacf5(y));
    set("diff1_pacf5", pacf5(&d1));
    set("diff2_pacf5", pacf5(&d2));
    set("entropy", spectral_entropy(y));

    if y.len() > 10 {
        if let Some(bp) = stats::box_pierce(y, 10) {
            set("box_pierce_stat", Some(bp.statistic));
            set("box_pierce_pval", Some(bp.p_value));
        }
        if let Some(lb) = stats::ljung_box(y, 10) {
            set("ljung_box_stat", Some(lb.statistic));
            set("ljung_box_pval", Some(lb.p_value));
        }
    }
    if let Some(k) = stats::kpss(y) {
        set("kpss_stat", Some(k.statistic));
        set("kpss_pval", Some(k.p_value));
    }
    set("ndiffs", Some(stats::ndiffs(y, 0.05, 2) as f64));
    if seasonal {
        let s = dec.seasonal_strength().unwrap_or(0.0);
        set("nsdiffs", Some(if s >= 0.64 { 1.0 } else { 0.0 }));
        set("seasonal_peak", Some((argmax(&dec.indices) + 1) as f64));
        set("seasonal_trough", Some((argmin(&dec.indices) + 1) as f64));
    }

    set("stability", stability(y, width));
    set("lumpiness", lumpiness(y, width));
    if let Some((v, t)) = max_shift(y, width, stats::mean) {
        set("max_level_shift", Some(v));
        set("time_level_shift", Some(t));
    }
    if width >= 2 {
        if let Some((v, t)) = max_shift(y, width, stats::variance) {
            set("max_var_shift", Some(v));
            set("time_var_shift", Some(t));
        }
    }
    set("crossing_points", Some(crossing_points(y) as f64));
    set("flat_spots", Some(flat_spots(y) as f64));
    let (zs, ze, gap, cv2) = intermittency(y);
    set("zero_start_prop", Some(zs));
    set("zero_end_prop", Some(ze));
    set("nonzero_interval_mean", gap);
    set("nonzero_cv2", cv2);
    if constant {
        // no variation: these are zero by definition rather than undefined
        set("stability", stability(y, width).map(|_| 0.0));
        set("lumpiness", lumpiness(y, width).map(|_| 0.0));
    }
    Ok(FeatureVector { values: f })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Component loadings, one orthonormal row per component.
    pub loadings: DMatrix<f64>,
    /// `n × k` coordinates of the standardized rows.
    pub scores: DMatrix<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Indices of the input columns used.
    pub kept_columns: Vec<usize>,
    /// Indices of columns dropped for zero variance or absent values.
    pub dropped_columns: Vec<usize>,
}

/// PCA on the correlation matrix of `x` (`n × p`). Columns with NaN or zero
/// variance are dropped. Each component is signed so that its largest
/// magnitude loading is positive.
pub fn pca(x: &DMatrix<f64>) -> Result<PcaResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::TooShort(format!("PCA needs at least 2 rows, got {n}")));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        if col.iter().any(|v| !v.is_finite()) || !(stats::variance(&col) > 0.0) {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Degenerate(format!(
            "PCA needs at least 2 non-degenerate columns, got {}",
            kept.len()
        )));
    }
    let k = kept.len();
    let mut z = DMatrix::zeros(n, k);
    for (c, &j) in kept.iter().enumerate() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let mean = stats::mean(&col);
        let sd = stats::variance(&col).sqrt();
        for i in 0..n {
            z[(i, c)] = (col[i] - mean) / sd;
        }
    }
    let mut corr = z.transpose() * &z / (n as f64 - 1.0);
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let mut loadings = DMatrix::zeros(k, k);
    for (r, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let lead = (0..k).fold(0, |b, j| if v[j].abs() > v[b].abs() { j } else { b });
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..k {
            loadings[(r, j)] = sign * v[j];
        }
    }
    let scores = &z * loadings.transpose();
    Ok(PcaResult {
        loadings,
        scores,
        explained_variance_ratio: values.iter().map(|v| v / total).collect(),
        kept_columns: kept,
        dropped_columns: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_points_hand() {
        assert_eq!(crossing_points(&[1.0, 2.0, 1.0, 2.0]), 3);
    }

    #[test]
    fn constant_series() {
        let y = [4.0; 20];
        let f = compute_features(&y, 1).unwrap();
        assert_eq!(f.get("flat_spots"), Some(20.0));
        assert_eq!(f.get("stability"), Some(0.0));
        assert_eq!(f.get("lumpiness"), Some(0.0));
        assert_eq!(f.get("trend_strength"), Some(0.0));
        let d = decompose(&y, 4).unwrap();
        assert!(d.indices.iter().all(|v| *v == 0.0));
        assert!(d.remainder.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn pure_seasonal_is_recovered() {
        let s = [3.0, -1.0, -4.0, 2.0];
        let y: Vec<f64> = (0..24).map(|t| s[t % 4]).collect();
        let d = decompose(&y, 4).unwrap();
        for (a, b) in d.indices.iter().zip(s) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d.remainder.iter().flatten().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn linear_series_has_interior_trend() {
        let y: Vec<f64> = (0..40).map(|t| t as f64).collect();
        let d = decompose(&y, 4).unwrap();
        for (t, tr) in d.trend.iter().enumerate() {
            if let Some(tr) = tr {
                assert!((tr - t as f64).abs() < 1e-8);
            }
        }
        assert!(d.indices.iter().all(|v| v.abs() < 1e-8));
        let f = compute_features(&y, 4).unwrap();
        assert!(f.get("trend_strength").unwrap() >= 0.99);
        assert!(f.get("seasonal_strength").unwrap() <= 0.05);
    }

    #[test]
    fn all_names_unique_and_complete() {
        let mut names = FEATURE_NAMES.to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 41);
        let y: Vec<f64> = (0..60).map(|t| (t % 12) as f64 + (t * 7 % 5) as f64).collect();
        let f = compute_features(&y, 12).unwrap();
        for (name, v) in f.iter() {
            assert!(v.is_some(), "{name} absent");
        }
    }

    #[test]
    fn pca_rank_one() {
        let x = DMatrix::from_fn(10, 2, |i, j| (i as f64) * if j == 0 { 1.0 } else { 3.0 });
        let r = pca(&x).unwrap();
        assert!((r.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(r.explained_variance_ratio[1].abs() < 1e-12);
    }

    #[test]
    fn pca_drops_constant_columns() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => i as f64,
            1 => 1.0,
            _ => ((i * 5) % 7) as f64,
        });
        let r = pca(&x).unwrap();
        assert_eq!(r.dropped_columns, vec![1]);
        assert_eq!(r.kept_columns, vec![0, 2]);
    }
}
