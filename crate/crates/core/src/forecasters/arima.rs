//! Seasonal ARIMA with automatic order selection.
//!
//! Differencing orders are chosen first (seasonal strength for `D`, repeated
//! KPSS tests for `d`), then ARMA orders are searched by AICc. Coefficients
//! are estimated by conditional sum of squares.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::forecasters::{BaseMethod, ForecastBundle};
use crate::optim::NelderMead;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub sp: usize,
    pub sd: usize,
    pub sq: usize,
    pub period: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            period: 1,
        }
    }

    pub fn seasonal(mut self, sp: usize, sd: usize, sq: usize, period: usize) -> Self {
        self.sp = sp;
        self.sd = sd;
        self.sq = sq;
        self.period = period;
        self
    }

    fn n_coef(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Observations consumed by differencing plus AR conditioning.
    pub fn warmup(&self) -> usize {
        self.d + self.sd * self.period + self.p + self.sp * self.period
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.sp + self.sd + self.sq > 0 {
            write!(f, "({},{},{})[{}]", self.sp, self.sd, self.sq, self.period)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaLimits {
    pub max_p: usize,
    pub max_q: usize,
    pub max_sp: usize,
    pub max_sq: usize,
    pub max_d: usize,
    /// Maximum total `p + q + P + Q` in the exhaustive search.
    pub max_order: usize,
    pub stepwise: bool,
    pub kpss_alpha: f64,
    pub seasonal_strength_threshold: f64,
    pub min_len: usize,
    pub max_evals: usize,
}

impl Default for ArimaLimits {
    fn default() -> Self {
        Self {
            max_p: 5,
            max_q: 5,
            max_sp: 2,
            max_sq: 2,
            max_d: 2,
            max_order: 5,
            stepwise: true,
            kpss_alpha: 0.05,
            seasonal_strength_threshold: 0.64,
            min_len: 20,
            max_evals: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    order: ArimaOrder,
    ar: Vec<f64>,
    ma: Vec<f64>,
    sar: Vec<f64>,
    sma: Vec<f64>,
    mean: Option<f64>,
    sigma2: f64,
    /// Observations after differencing.
    n_eff: usize,
    aicc: f64,
    /// One-step residuals aligned with the training series.
    residuals: Vec<Option<f64>>,
}

/// Sparse polynomial `1 + Σ c_j B^j`, stored as `(j, c_j)`.
type Poly = Vec<(usize, f64)>;

fn multiply(a: &Poly, b: &Poly) -> Poly {
    let mut out: Vec<(usize, f64)> = Vec::new();
    let terms = |p: &Poly| {
        let mut v = vec![(0usize, 1.0)];
        v.extend(p.iter().copied());
        v
    };
    for (i, x) in terms(a) {
        for (j, y) in terms(b) {
            let lag = i + j;
            if lag == 0 {
                continue;
            }
            match out.iter_mut().find(|(l, _)| *l == lag) {
                Some(e) => e.1 += x * y,
                None => out.push((lag, x * y)),
            }
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out.sort_by_key(|(l, _)| *l);
    out
}

/// `1 − φ_1 B − … ` in the `1 + Σ c_j B^j` form, with lags scaled by `step`.
fn ar_poly(coef: &[f64], step: usize) -> Poly {
    coef.iter().enumerate().map(|(i, c)| ((i + 1) * step, -c)).collect()
}

fn ma_poly(coef: &[f64], step: usize) -> Poly {
    coef.iter().enumerate().map(|(i, c)| ((i + 1) * step, *c)).collect()
}

fn difference_poly(d: usize, sd: usize, m: usize) -> Poly {
    let mut p: Poly = Vec::new();
    for _ in 0..d {
        p = multiply(&p, &vec![(1, -1.0)]);
    }
    for _ in 0..sd {
        p = multiply(&p, &vec![(m, -1.0)]);
    }
    p
}

/// Step-down test: every reflection coefficient of `1 − Σ φ_j z^j` lies
/// strictly inside the unit interval.
fn is_stationary(phi: &[f64]) -> bool {
    let mut a: Vec<f64> = phi.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
        } else {
            break;
        }
    }
    for k in (1..=a.len()).rev() {
        let r = a[k - 1];
        if !r.is_finite() || r.abs() >= 0.9999 {
            return false;
        }
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 1..k {
            a[j - 1] = (prev[j - 1] + r * prev[k - j - 1]) / denom;
        }
        a.truncate(k - 1);
    }
    true
}

fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    is_stationary(&neg)
}

struct Split<'a> {
    order: ArimaOrder,
    include_mean: bool,
    w: &'a [f64],
}

impl Split<'_> {
    fn unpack(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Option<f64>) {
        let o = &self.order;
        let mut i = 0;
        let mut take = |n: usize| {
            let s = v[i..i + n].to_vec();
            i += n;
            s
        };
        let ar = take(o.p);
        let ma = take(o.q);
        let sar = take(o.sp);
        let sma = take(o.sq);
        let mean = self.include_mean.then(|| v[i]);
        (ar, ma, sar, sma, mean)
    }

    /// Conditional residuals of the differenced series (`None` for conditioning points).
    fn residuals(&self, ar: &[f64], ma: &[f64], sar: &[f64], sma: &[f64], mean: Option<f64>) -> Vec<Option<f64>> {
        let m = self.order.period;
        let a = multiply(&ar_poly(ar, 1), &ar_poly(sar, m));
        let c = multiply(&ma_poly(ma, 1), &ma_poly(sma, m));
        let mu = mean.unwrap_or(0.0);
        let ncond = self.order.p + self.order.sp * m;
        let n = self.w.len();
        let mut e = vec![0.0; n];
        let mut out = vec![None; n];
        for t in ncond..n {
            let mut v = self.w[t] - mu;
            for &(lag, coef) in &a {
                v += coef * (self.w[t - lag] - mu);
            }
            for &(lag, coef) in &c {
                if lag <= t {
                    v -= coef * e[t - lag];
                }
            }
            e[t] = v;
            out[t] = Some(v);
        }
        out
    }

    fn objective(&self, v: &[f64]) -> f64 {
        let (ar, ma, sar, sma, mean) = self.unpack(v);
        if !(is_stationary(&ar) && is_stationary(&sar) && is_invertible(&ma) && is_invertible(&sma)) {
            return f64::INFINITY;
        }
        let res = self.residuals(&ar, &ma, &sar, &sma, mean);
        let (mut sse, mut n) = (0.0, 0usize);
        for r in res.into_iter().flatten() {
            sse += r * r;
            n += 1;
        }
        if n == 0 || !sse.is_finite() {
            return f64::INFINITY;
        }
        let nf = n as f64;
        nf * (sse / nf).max(1e-300).ln()
    }
}

fn difference(y: &[f64], d: usize, sd: usize, m: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..sd {
        w = stats::diff(&w, m);
    }
    for _ in 0..d {
        w = stats::diff(&w, 1);
    }
    w
}

/// Fits a fixed order by conditional sum of squares.
///
/// A mean is estimated when `include_mean` is set; it is only meaningful for
/// undifferenced models.
pub fn fit_arima_order(train: &[f64], order: ArimaOrder, include_mean: bool, limits: &ArimaLimits) -> Result<ArimaModel> {
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite observation"));
    }
    if order.period == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    if (order.sp + order.sd + order.sq) > 0 && order.period < 2 {
        return Err(Error::validation(format!("{order}: seasonal terms need period >= 2")));
    }
    let w = difference(train, order.d, order.sd, order.period);
    let ncond = order.p + order.sp * order.period;
    let k = order.n_coef() + usize::from(include_mean) + 1;
    if w.len() <= ncond + k + 1 {
        return Err(Error::TooShort(format!("{order}: {} observations after differencing", w.len())));
    }
    let split = Split {
        order,
        include_mean,
        w: &w,
    };
    let mut x0 = vec![0.0; order.n_coef()];
    let mut steps = vec![0.1; order.n_coef()];
    if include_mean {
        x0.push(stats::mean(&w));
        steps.push(0.1 * stats::variance(&w).sqrt().max(1e-3));
    }
    let nm = NelderMead {
        max_evals: limits.max_evals,
        ftol: 1e-10,
    };
    let best = nm.minimize_with_restart(|v| split.objective(v), &x0, &steps);
    if !best.value.is_finite() {
        return Err(Error::Fit(format!("{order}: no admissible coefficients")));
    }
    let (ar, ma, sar, sma, mean) = split.unpack(&best.x);
    let res_w = split.residuals(&ar, &ma, &sar, &sma, mean);
    let used: Vec<f64> = res_w.iter().flatten().copied().collect();
    let sigma2 = used.iter().map(|r| r * r).sum::<f64>() / used.len() as f64;
    // scaled by the differenced length, not the conditioned one, so orders
    // with more lags are not scored on fewer points
    let n_eff = w.len();
    let neg2ll = n_eff as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let kf = k as f64;
    let aicc = if n_eff as f64 - kf - 1.0 > 0.0 && neg2ll.is_finite() {
        neg2ll + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (n_eff as f64 - kf - 1.0)
    } else {
        f64::INFINITY
    };
    let offset = train.len() - w.len();
    let mut residuals = vec![None; offset];
    residuals.extend(res_w);
    Ok(ArimaModel {
        order,
        ar,
        ma,
        sar,
        sma,
        mean,
        sigma2,
        n_eff,
        aicc,
        residuals,
    })
}

fn constant_model(train: &[f64], period: usize) -> ArimaModel {
    let c = train[0];
    ArimaModel {
        order: ArimaOrder::new(0, 0, 0).seasonal(0, 0, 0, period.max(1)),
        ar: vec![],
        ma: vec![],
        sar: vec![],
        sma: vec![],
        mean: Some(c),
        sigma2: 0.0,
        n_eff: train.len(),
        aicc: f64::NEG_INFINITY,
        residuals: vec![Some(0.0); train.len()],
    }
}

/// Seasonal differencing is used when the seasonal strength of the series
/// reaches the threshold.
fn seasonal_differences(train: &[f64], m: usize, limits: &ArimaLimits) -> usize {
    if m < 2 || train.len() < 3 * m || train.len() - m < limits.min_len {
        return 0;
    }
    match crate::features::seasonal_strength(train, m) {
        Some(s) if s >= limits.seasonal_strength_threshold => 1,
        _ => 0,
    }
}

/// Automatic order selection followed by a CSS fit of the chosen order.
pub fn fit_arima(train: &[f64], m: usize, limits: &ArimaLimits) -> Result<ArimaModel> {
    if train.len() < limits.min_len {
        return Err(Error::TooShort(format!(
            "ARIMA needs at least {} observations, got {}",
            limits.min_len,
            train.len()
        )));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite observation"));
    }
    let m = m.max(1);
    if stats::is_constant(train) {
        return Ok(constant_model(train, m));
    }
    let sd = seasonal_differences(train, m, limits);
    let seasonal_input = difference(train, 0, sd, m);
    let d = stats::ndiffs(&seasonal_input, limits.kpss_alpha, limits.max_d);
    let w = difference(train, d, sd, m);
    if stats::is_constant(&w) {
        // differenced series carries no ARMA structure
        return fit_arima_order(train, ArimaOrder::new(0, d, 0).seasonal(0, sd, 0, m), false, limits)
            .or_else(|_| Ok(constant_model(train, m)));
    }
    let include_mean = d + sd == 0;
    let seasonal = m > 1;
    let (max_sp, max_sq) = if seasonal { (limits.max_sp, limits.max_sq) } else { (0, 0) };

    let mut tried: HashSet<(usize, usize, usize, usize)> = HashSet::new();
    let mut best: Option<ArimaModel> = None;
    let mut consider = |p: usize, q: usize, sp: usize, sq: usize, best: &mut Option<ArimaModel>| -> bool {
        if p > limits.max_p || q > limits.max_q || sp > max_sp || sq > max_sq || !tried.insert((p, q, sp, sq)) {
            return false;
        }
        let order = ArimaOrder::new(p, d, q).seasonal(sp, sd, sq, m);
        let Ok(model) = fit_arima_order(train, order, include_mean, limits) else {
            return false;
        };
        if !model.aicc.is_finite() {
            return false;
        }
        let improves = match best {
            None => true,
            Some(b) => model.aicc < b.aicc,
        };
        if improves {
            *best = Some(model);
        }
        improves
    };

    if limits.stepwise {
        let s = usize::from(seasonal);
        for (p, q, sp, sq) in [(2, 2, s, s), (0, 0, 0, 0), (1, 0, s, 0), (0, 1, 0, s)] {
            consider(p, q, sp, sq, &mut best);
        }
        let mut budget = 94;
        loop {
            let Some(current) = best.as_ref().map(|b| b.order) else {
                break;
            };
            let (p, q, sp, sq) = (current.p as i64, current.q as i64, current.sp as i64, current.sq as i64);
            let mut neighbours = Vec::new();
            for (dp, dq, dsp, dsq) in [
                (-1, 0, 0, 0),
                (1, 0, 0, 0),
                (0, -1, 0, 0),
                (0, 1, 0, 0),
                (-1, -1, 0, 0),
                (1, 1, 0, 0),
                (0, 0, -1, 0),
                (0, 0, 1, 0),
                (0, 0, 0, -1),
                (0, 0, 0, 1),
                (0, 0, -1, -1),
                (0, 0, 1, 1),
            ] {
                let cand = (p + dp, q + dq, sp + dsp, sq + dsq);
                if cand.0 >= 0 && cand.1 >= 0 && cand.2 >= 0 && cand.3 >= 0 {
                    neighbours.push((cand.0 as usize, cand.1 as usize, cand.2 as usize, cand.3 as usize));
                }
            }
            let mut moved = false;
            for (np, nq, nsp, nsq) in neighbours {
                if budget == 0 {
                    break;
                }
                budget -= 1;
                if consider(np, nq, nsp, nsq, &mut best) {
                    moved = true;
                    break;
                }
            }
            if !moved || budget == 0 {
                break;
            }
        }
    } else {
        for p in 0..=limits.max_p {
            for q in 0..=limits.max_q {
                for sp in 0..=max_sp {
                    for sq in 0..=max_sq {
                        if p + q + sp + sq <= limits.max_order {
                            consider(p, q, sp, sq, &mut best);
                        }
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::Fit("no ARIMA order produced a finite AICc".into()))
}

impl ArimaModel {
    pub fn order(&self) -> ArimaOrder {
        self.order
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    pub fn seasonal_ar(&self) -> &[f64] {
        &self.sar
    }

    pub fn seasonal_ma(&self) -> &[f64] {
        &self.sma
    }

    pub fn mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn aicc(&self) -> f64 {
        self.aicc
    }

    pub fn n_eff(&self) -> usize {
        self.n_eff
    }

    pub fn residuals(&self) -> &[Option<f64>] {
        &self.residuals
    }

    pub fn describe(&self) -> String {
        let mean = match self.mean {
            Some(mu) => format!(" mean={mu:.4}"),
            None => String::new(),
        };
        format!("{}{} aicc={:.4} sigma2={:.4}", self.order, mean, self.aicc, self.sigma2)
    }

    /// Point forecasts with future innovations set to zero.
    pub fn forecast(&self, train: &[f64], h: usize) -> Result<Vec<f64>> {
        if train.len() != self.residuals.len() {
            return Err(Error::dims(format!("{} training values", self.residuals.len()), train.len()));
        }
        let m = self.order.period;
        let arma_ar = multiply(&ar_poly(&self.ar, 1), &ar_poly(&self.sar, m));
        let full_ar = multiply(&arma_ar, &difference_poly(self.order.d, self.order.sd, m));
        let ma = multiply(&ma_poly(&self.ma, 1), &ma_poly(&self.sma, m));
        let mu = self.mean.unwrap_or(0.0);
        let n = train.len();
        let mut y: Vec<f64> = train.iter().map(|v| v - mu).collect();
        let mut e: Vec<f64> = self.residuals.iter().map(|r| r.unwrap_or(0.0)).collect();
        for t in n..n + h {
            let mut v = 0.0;
            for &(lag, coef) in &full_ar {
                if lag <= t {
                    v -= coef * y[t - lag];
                }
            }
            for &(lag, coef) in &ma {
                if lag <= t {
                    v += coef * e[t - lag];
                }
            }
            y.push(v);
            e.push(0.0);
        }
        Ok(y[n..].iter().map(|v| v + mu).collect())
    }
}

pub fn forecast_arima(model: &ArimaModel, train: &[f64], h: usize) -> Result<ForecastBundle> {
    let point = model.forecast(train, h)?;
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{} produced non-finite forecasts", model.order)));
    }
    let fitted = train
        .iter()
        .zip(&model.residuals)
        .map(|(y, r)| r.map(|r| y - r))
        .collect();
    Ok(ForecastBundle::from_fitted(BaseMethod::Arima, train, point, fitted, model.describe()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        // small LCG keeps the test self-contained
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = phi * y[t - 1] + next() * 2.0;
        }
        y
    }

    #[test]
    fn step_down_matches_known_regions() {
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(is_stationary(&[0.5, 0.3]));
        // φ1 + φ2 < 1 fails
        assert!(!is_stationary(&[0.7, 0.4]));
        assert!(!is_stationary(&[0.0, 1.2]));
        assert!(is_invertible(&[-0.8]));
        assert!(!is_invertible(&[1.5]));
    }

    #[test]
    fn polynomial_product_is_sparse() {
        let p = multiply(&ar_poly(&[0.5], 1), &ar_poly(&[0.2], 12));
        assert_eq!(p, vec![(1, -0.5), (12, -0.2), (13, 0.1)]);
        assert_eq!(difference_poly(1, 1, 4), vec![(1, -1.0), (4, -1.0), (5, 1.0)]);
    }

    #[test]
    fn random_walk_order_is_naive() {
        let y: Vec<f64> = (0..40).map(|t| ((t * 17 % 11) as f64) + t as f64).collect();
        let model = fit_arima_order(&y, ArimaOrder::new(0, 1, 0), false, &ArimaLimits::default()).unwrap();
        assert_eq!(model.forecast(&y, 4).unwrap(), vec![y[39]; 4]);
    }

    #[test]
    fn ar1_coefficient_is_recovered() {
        let y = ar1(0.7, 400, 7);
        let model = fit_arima_order(&y, ArimaOrder::new(1, 0, 0), true, &ArimaLimits::default()).unwrap();
        assert!((model.ar()[0] - 0.7).abs() < 0.1, "{}", model.ar()[0]);
    }

    #[test]
    fn ar1_forecasts_decay_toward_mean() {
        let y = ar1(0.6, 200, 3);
        let model = fit_arima_order(&y, ArimaOrder::new(1, 0, 0), true, &ArimaLimits::default()).unwrap();
        let mu = model.mean().unwrap();
        let f = model.forecast(&y, 10).unwrap();
        let dist: Vec<f64> = f.iter().map(|v| (v - mu).abs()).collect();
        assert!(dist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn auto_fit_returns_finite_model() {
        let y: Vec<f64> = ar1(0.5, 120, 11).iter().map(|v| v + 10.0).collect();
        let model = fit_arima(&y, 1, &ArimaLimits::default()).unwrap();
        assert!(model.aicc().is_finite());
        let b = forecast_arima(&model, &y, 6).unwrap();
        assert_eq!(b.point.len(), 6);
        assert_eq!(b.fitted.len(), y.len());
        assert_eq!(b.warmup(), model.order().warmup());
    }

    #[test]
    fn short_and_constant_series() {
        assert!(matches!(fit_arima(&[1.0; 10], 1, &ArimaLimits::default()), Err(Error::TooShort(_))));
        let model = fit_arima(&[3.0; 30], 4, &ArimaLimits::default()).unwrap();
        assert_eq!(model.forecast(&[3.0; 30], 2).unwrap(), vec![3.0, 3.0]);
    }
}
