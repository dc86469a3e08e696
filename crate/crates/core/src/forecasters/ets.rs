//! Exponential smoothing state space models.
//!
//! Models are named `ETS(error, trend, season)` with error `A|M`, trend
//! `N|A|Ad` and season `N|A|M`. The point recursions are shared by the
//! additive and multiplicative error forms; only the likelihood differs.
//! Smoothing parameters and initial states are estimated jointly by
//! Nelder–Mead, and the candidate with the smallest AICc is returned.

use std::fmt;

use crate::error::{Error, Result};
use crate::forecasters::{BaseMethod, ForecastBundle};
use crate::optim::NelderMead;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrendType {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeasonType {
    None,
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EtsSpec {
    pub error: ErrorType,
    pub trend: TrendType,
    pub season: SeasonType,
}

impl EtsSpec {
    pub const fn new(error: ErrorType, trend: TrendType, season: SeasonType) -> Self {
        Self { error, trend, season }
    }

    /// Simple exponential smoothing with additive errors.
    pub const fn ann() -> Self {
        Self::new(ErrorType::Additive, TrendType::None, SeasonType::None)
    }

    pub fn has_trend(&self) -> bool {
        self.trend != TrendType::None
    }

    pub fn is_seasonal(&self) -> bool {
        self.season != SeasonType::None
    }

    fn needs_positive_data(&self) -> bool {
        self.error == ErrorType::Multiplicative || self.season == SeasonType::Multiplicative
    }

    /// The default admissible set: multiplicative trends are never used, and
    /// additive errors are not paired with multiplicative seasonality.
    pub fn default_candidates(seasonal: bool, positive: bool) -> Vec<EtsSpec> {
        let mut out = Vec::new();
        for error in [ErrorType::Additive, ErrorType::Multiplicative] {
            for trend in [TrendType::None, TrendType::Additive, TrendType::Damped] {
                for season in [SeasonType::None, SeasonType::Additive, SeasonType::Multiplicative] {
                    let spec = EtsSpec::new(error, trend, season);
                    if spec.is_seasonal() && !seasonal {
                        continue;
                    }
                    if spec.needs_positive_data() && !positive {
                        continue;
                    }
                    if error == ErrorType::Additive && season == SeasonType::Multiplicative {
                        continue;
                    }
                    out.push(spec);
                }
            }
        }
        out
    }
}

impl fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = match self.error {
            ErrorType::Additive => "A",
            ErrorType::Multiplicative => "M",
        };
        let t = match self.trend {
            TrendType::None => "N",
            TrendType::Additive => "A",
            TrendType::Damped => "Ad",
        };
        let s = match self.season {
            SeasonType::None => "N",
            SeasonType::Additive => "A",
            SeasonType::Multiplicative => "M",
        };
        write!(f, "ETS({e},{t},{s})")
    }
}

/// Smoothing parameters. Unused components are ignored by the recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl EtsParams {
    pub fn level_only(alpha: f64) -> Self {
        Self {
            alpha,
            beta: 0.0,
            gamma: 0.0,
            phi: 1.0,
        }
    }
}

/// Level, trend and one seasonal state per cycle position (`t mod m`).
#[derive(Debug, Clone, PartialEq)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub season: Vec<f64>,
}

impl EtsState {
    pub fn level(level: f64) -> Self {
        Self {
            level,
            trend: 0.0,
            season: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsOptions {
    /// Restricts the search to these models; `None` uses the default set.
    pub candidates: Option<Vec<EtsSpec>>,
    /// Seasonal models are only considered for `1 < m <= max_seasonal_period`.
    pub max_seasonal_period: usize,
    pub max_evals: usize,
}

impl Default for EtsOptions {
    fn default() -> Self {
        Self {
            candidates: None,
            max_seasonal_period: 24,
            max_evals: 4_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsModel {
    spec: EtsSpec,
    period: usize,
    params: EtsParams,
    initial: EtsState,
    last: EtsState,
    fitted: Vec<f64>,
    n_obs: usize,
    /// `n ln(SSE)` (plus the `2 Σ ln|ŷ|` term for multiplicative errors).
    lik: f64,
    n_params: usize,
    aicc: f64,
}

struct Filtered {
    last: EtsState,
    fitted: Vec<f64>,
    lik: f64,
}

fn damped_sum(phi: f64, h: usize) -> f64 {
    (1..=h).map(|i| phi.powi(i as i32)).sum()
}

/// Runs the state recursions over `y`. `None` when a multiplicative
/// component meets a non-positive value.
fn filter(spec: EtsSpec, period: usize, p: &EtsParams, init: &EtsState, y: &[f64]) -> Option<Filtered> {
    let m = period.max(1);
    let mut level = init.level;
    let mut trend = init.trend;
    let mut season = init.season.clone();
    let mut fitted = Vec::with_capacity(y.len());
    let mut sse = 0.0;
    let mut log_yhat = 0.0;

    for (t, &obs) in y.iter().enumerate() {
        let pos = t % m;
        let damped = match spec.trend {
            TrendType::None => 0.0,
            TrendType::Additive => trend,
            TrendType::Damped => p.phi * trend,
        };
        let base = level + damped;
        let s = if spec.is_seasonal() { season[pos] } else { 0.0 };
        let yhat = match spec.season {
            SeasonType::None => base,
            SeasonType::Additive => base + s,
            SeasonType::Multiplicative => base * s,
        };
        if !yhat.is_finite() {
            return None;
        }
        let err = obs - yhat;
        match spec.error {
            ErrorType::Additive => sse += err * err,
            ErrorType::Multiplicative => {
                if yhat <= 0.0 {
                    return None;
                }
                sse += (err / yhat).powi(2);
                log_yhat += yhat.ln();
            }
        }
        fitted.push(yhat);

        let deseasonalized = match spec.season {
            SeasonType::None => obs,
            SeasonType::Additive => obs - s,
            SeasonType::Multiplicative => {
                if s <= 0.0 {
                    return None;
                }
                obs / s
            }
        };
        let new_level = p.alpha * deseasonalized + (1.0 - p.alpha) * base;
        if spec.has_trend() {
            let phi = if spec.trend == TrendType::Damped { p.phi } else { 1.0 };
            trend = phi * trend + (p.beta / p.alpha) * (new_level - base);
        }
        match spec.season {
            SeasonType::None => {}
            SeasonType::Additive => season[pos] = p.gamma * (obs - base) + (1.0 - p.gamma) * s,
            SeasonType::Multiplicative => {
                if base <= 0.0 {
                    return None;
                }
                season[pos] = p.gamma * (obs / base) + (1.0 - p.gamma) * s;
            }
        }
        level = new_level;
    }

    let n = y.len() as f64;
    let lik = match spec.error {
        ErrorType::Additive => n * sse.ln(),
        ErrorType::Multiplicative => n * sse.ln() + 2.0 * log_yhat,
    };
    Some(Filtered {
        last: EtsState { level, trend, season },
        fitted,
        lik,
    })
}

impl EtsModel {
    /// Builds a model with fixed parameters and initial states and filters
    /// `train` through it. Parameters are only required to keep the
    /// recursions well defined (`0 < α ≤ 1`), so boundary models such as
    /// `α = 1` can be constructed directly.
    pub fn from_parts(spec: EtsSpec, period: usize, params: EtsParams, initial: EtsState, train: &[f64]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::TooShort("empty training series".into()));
        }
        if !(params.alpha > 0.0 && params.alpha <= 1.0) {
            return Err(Error::validation(format!("alpha {} outside (0, 1]", params.alpha)));
        }
        if spec.is_seasonal() && initial.season.len() != period {
            return Err(Error::dims(format!("{period} seasonal states"), initial.season.len()));
        }
        let f = filter(spec, period, &params, &initial, train)
            .ok_or_else(|| Error::Numerical(format!("{spec}: non-positive multiplicative component")))?;
        let n_params = count_params(spec, period);
        Ok(Self::assemble(spec, period, params, initial, f, train.len(), n_params))
    }

    fn assemble(spec: EtsSpec, period: usize, params: EtsParams, initial: EtsState, f: Filtered, n: usize, n_params: usize) -> Self {
        let aicc = aicc(f.lik, n, n_params);
        Self {
            spec,
            period,
            params,
            initial,
            last: f.last,
            fitted: f.fitted,
            n_obs: n,
            lik: f.lik,
            n_params,
            aicc,
        }
    }

    pub fn spec(&self) -> EtsSpec {
        self.spec
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn params(&self) -> &EtsParams {
        &self.params
    }

    pub fn initial_state(&self) -> &EtsState {
        &self.initial
    }

    pub fn final_state(&self) -> &EtsState {
        &self.last
    }

    /// One-step in-sample forecasts, one per training observation.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    pub fn aicc(&self) -> f64 {
        self.aicc
    }

    /// `−2 log L` up to a constant shared by all models on the same data.
    pub fn neg2_loglik(&self) -> f64 {
        self.lik
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Point forecasts for steps `1..=h` with all future errors set to zero.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let m = self.period.max(1);
        (1..=h)
            .map(|i| {
                let trend = match self.spec.trend {
                    TrendType::None => 0.0,
                    TrendType::Additive => i as f64 * self.last.trend,
                    TrendType::Damped => damped_sum(self.params.phi, i) * self.last.trend,
                };
                let base = self.last.level + trend;
                let pos = (self.n_obs + i - 1) % m;
                match self.spec.season {
                    SeasonType::None => base,
                    SeasonType::Additive => base + self.last.season[pos],
                    SeasonType::Multiplicative => base * self.last.season[pos],
                }
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        let p = &self.params;
        let mut s = format!("{} aicc={:.4} alpha={:.4}", self.spec, self.aicc, p.alpha);
        if self.spec.has_trend() {
            s.push_str(&format!(" beta={:.4}", p.beta));
        }
        if self.spec.trend == TrendType::Damped {
            s.push_str(&format!(" phi={:.4}", p.phi));
        }
        if self.spec.is_seasonal() {
            s.push_str(&format!(" gamma={:.4}", p.gamma));
        }
        s
    }
}

fn count_params(spec: EtsSpec, period: usize) -> usize {
    let mut k = 1 + 1; // alpha, l0
    if spec.has_trend() {
        k += 2;
    }
    if spec.trend == TrendType::Damped {
        k += 1;
    }
    if spec.is_seasonal() {
        k += 1 + (period - 1);
    }
    k + 1 // innovation variance
}

fn aicc(lik: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    let kf = k as f64;
    if n - kf - 1.0 <= 0.0 || !lik.is_finite() {
        return f64::INFINITY;
    }
    lik + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (n - kf - 1.0)
}

/// Seasonal indices by cycle position from a classical decomposition of
/// the first few cycles.
fn initial_season(y: &[f64], m: usize, multiplicative: bool) -> Vec<f64> {
    let n = y.len().min(3 * m).max(2 * m).min(y.len());
    let y = &y[..n];
    let trend = crate::features::centered_moving_average(y, m);
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            let v = if multiplicative {
                if *tr <= 0.0 {
                    continue;
                }
                y[t] / tr
            } else {
                y[t] - tr
            };
            sums[t % m] += v;
            counts[t % m] += 1;
        }
    }
    let default = if multiplicative { 1.0 } else { 0.0 };
    let mut s: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { default })
        .collect();
    normalize_season(&mut s, multiplicative);
    s
}

fn normalize_season(s: &mut [f64], multiplicative: bool) {
    let mean = stats::mean(s);
    if multiplicative {
        if mean > 0.0 {
            s.iter_mut().for_each(|v| *v /= mean);
        }
    } else {
        s.iter_mut().for_each(|v| *v -= mean);
    }
}

fn initial_state(spec: EtsSpec, y: &[f64], m: usize) -> EtsState {
    let season = match spec.season {
        SeasonType::None => Vec::new(),
        SeasonType::Additive => initial_season(y, m, false),
        SeasonType::Multiplicative => initial_season(y, m, true),
    };
    let k = y.len().min(10);
    let adjusted: Vec<f64> = (0..k)
        .map(|t| match spec.season {
            SeasonType::None => y[t],
            SeasonType::Additive => y[t] - season[t % m],
            SeasonType::Multiplicative => y[t] / season[t % m],
        })
        .collect();
    if spec.has_trend() {
        let x: Vec<f64> = (1..=k).map(|v| v as f64).collect();
        let (a, b) = stats::linear_fit(&x, &adjusted);
        EtsState { level: a, trend: b, season }
    } else {
        EtsState {
            level: stats::mean(&adjusted),
            trend: 0.0,
            season,
        }
    }
}

const PARAM_FLOOR: f64 = 1e-4;

/// Packs the free parameters and states into the optimizer vector.
struct Layout {
    spec: EtsSpec,
    period: usize,
}

impl Layout {
    fn pack(&self, p: &EtsParams, s: &EtsState) -> Vec<f64> {
        let mut v = vec![p.alpha];
        if self.spec.has_trend() {
            v.push(p.beta);
        }
        if self.spec.is_seasonal() {
            v.push(p.gamma);
        }
        if self.spec.trend == TrendType::Damped {
            v.push(p.phi);
        }
        v.push(s.level);
        if self.spec.has_trend() {
            v.push(s.trend);
        }
        if self.spec.is_seasonal() {
            v.extend_from_slice(&s.season[..self.period - 1]);
        }
        v
    }

    fn unpack(&self, v: &[f64]) -> (EtsParams, EtsState) {
        let mut it = v.iter().copied();
        let alpha = it.next().unwrap();
        let beta = if self.spec.has_trend() { it.next().unwrap() } else { 0.0 };
        let gamma = if self.spec.is_seasonal() { it.next().unwrap() } else { 0.0 };
        let phi = if self.spec.trend == TrendType::Damped { it.next().unwrap() } else { 1.0 };
        let level = it.next().unwrap();
        let trend = if self.spec.has_trend() { it.next().unwrap() } else { 0.0 };
        let season = if self.spec.is_seasonal() {
            let mut s: Vec<f64> = it.by_ref().take(self.period - 1).collect();
            let last = match self.spec.season {
                SeasonType::Multiplicative => self.period as f64 - s.iter().sum::<f64>(),
                _ => -s.iter().sum::<f64>(),
            };
            s.push(last);
            s
        } else {
            Vec::new()
        };
        (EtsParams { alpha, beta, gamma, phi }, EtsState { level, trend, season })
    }

    fn admissible(&self, p: &EtsParams, s: &EtsState) -> bool {
        let upper = 1.0 - PARAM_FLOOR;
        if !(p.alpha > PARAM_FLOOR && p.alpha < upper) {
            return false;
        }
        if self.spec.has_trend() && !(p.beta > PARAM_FLOOR && p.beta < p.alpha) {
            return false;
        }
        if self.spec.is_seasonal() && !(p.gamma > PARAM_FLOOR && p.gamma < 1.0 - p.alpha) {
            return false;
        }
        if self.spec.trend == TrendType::Damped && !(0.8..=0.98).contains(&p.phi) {
            return false;
        }
        if self.spec.season == SeasonType::Multiplicative && s.season.iter().any(|v| *v <= 0.0) {
            return false;
        }
        true
    }
}

fn fit_one(spec: EtsSpec, y: &[f64], m: usize, options: &EtsOptions) -> Option<EtsModel> {
    let layout = Layout { spec, period: m };
    let init = initial_state(spec, y, m);
    let alpha = if spec.is_seasonal() { 0.2 } else { 0.3 };
    let params = EtsParams {
        alpha,
        beta: 0.1 * alpha,
        gamma: 0.05 * (1.0 - alpha),
        phi: 0.95,
    };
    let x0 = layout.pack(&params, &init);
    let scale = stats::variance(y).sqrt().max(1e-6);
    let n_smoothing = x0.len() - 1 - usize::from(spec.has_trend()) - if spec.is_seasonal() { m - 1 } else { 0 };
    let steps: Vec<f64> = x0
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i < n_smoothing {
                (0.1 * v).max(0.01)
            } else if spec.season == SeasonType::Multiplicative && i >= x0.len() - (m - 1) {
                0.05
            } else {
                0.1 * v.abs().max(scale)
            }
        })
        .collect();

    let objective = |v: &[f64]| {
        let (p, s) = layout.unpack(v);
        if !layout.admissible(&p, &s) {
            return f64::INFINITY;
        }
        match filter(spec, m, &p, &s, y) {
            Some(f) if f.lik.is_finite() => f.lik,
            _ => f64::INFINITY,
        }
    };
    let nm = NelderMead {
        max_evals: options.max_evals.max(200 * x0.len()),
        ftol: 1e-10,
    };
    let best = nm.minimize_with_restart(objective, &x0, &steps);
    if !best.value.is_finite() {
        return None;
    }
    let (p, s) = layout.unpack(&best.x);
    let f = filter(spec, m, &p, &s, y)?;
    Some(EtsModel::assemble(spec, m, p, s, f, y.len(), count_params(spec, m)))
}

/// Fits every candidate and returns the model with the smallest AICc.
///
/// Ties are broken by fewer parameters and then by model name.
pub fn fit_ets(train: &[f64], m: usize, options: &EtsOptions) -> Result<EtsModel> {
    if train.len() < 3 {
        return Err(Error::TooShort(format!("ETS needs at least 3 observations, got {}", train.len())));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite observation"));
    }
    let m = m.max(1);
    if stats::is_constant(train) {
        let c = train[0];
        let f = filter(EtsSpec::ann(), m, &EtsParams::level_only(0.5), &EtsState::level(c), train)
            .expect("constant additive filter is well defined");
        let mut model = EtsModel::assemble(
            EtsSpec::ann(),
            m,
            EtsParams::level_only(0.5),
            EtsState::level(c),
            f,
            train.len(),
            count_params(EtsSpec::ann(), m),
        );
        model.aicc = f64::NEG_INFINITY;
        return Ok(model);
    }

    let seasonal = m > 1 && m <= options.max_seasonal_period && train.len() >= 2 * m + 4;
    let positive = train.iter().all(|v| *v > 0.0);
    let candidates: Vec<EtsSpec> = match &options.candidates {
        Some(list) => list
            .iter()
            .copied()
            .filter(|s| (!s.is_seasonal() || seasonal) && (!s.needs_positive_data() || positive))
            .collect(),
        None => EtsSpec::default_candidates(seasonal, positive),
    };
    if candidates.is_empty() {
        return Err(Error::Fit("no admissible ETS candidate for this series".into()));
    }

    let mut best: Option<EtsModel> = None;
    for spec in candidates {
        let Some(model) = fit_one(spec, train, m, options) else {
            continue;
        };
        if !model.aicc.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => (model.aicc, model.n_params, model.spec.to_string()) < (b.aicc, b.n_params, b.spec.to_string()),
        };
        if better {
            best = Some(model);
        }
    }
    best.ok_or_else(|| Error::Fit("no ETS candidate converged to a finite likelihood".into()))
}

/// Forecast bundle for a fitted (or directly constructed) model.
/// Residuals are one-step errors against `train`.
pub fn forecast_ets(model: &EtsModel, train: &[f64], h: usize) -> Result<ForecastBundle> {
    if train.len() != model.fitted.len() {
        return Err(Error::dims(format!("{} training values", model.fitted.len()), train.len()));
    }
    let point = model.forecast(h);
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{} produced non-finite forecasts", model.spec)));
    }
    Ok(ForecastBundle::from_fitted(
        BaseMethod::Ets,
        train,
        point,
        model.fitted.iter().map(|&v| Some(v)).collect(),
        model.describe(),
    ))
}
