//! Base forecasting methods.
//!
//! Every method returns a [`ForecastBundle`]: `h` point forecasts plus
//! in-sample fitted values and residuals (`observed − fitted`) aligned with
//! the training series. Leading fitted values a method cannot produce are
//! `None`.

pub mod arima;
pub mod ets;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats;

pub use arima::{fit_arima, fit_arima_order, forecast_arima, ArimaLimits, ArimaModel, ArimaOrder};
pub use ets::{fit_ets, forecast_ets, EtsModel, EtsOptions, EtsParams, EtsSpec, EtsState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseMethod {
    Average,
    Naive,
    SeasonalNaive,
    Ets,
    Arima,
}

impl BaseMethod {
    pub const ALL: [BaseMethod; 5] = [
        BaseMethod::Average,
        BaseMethod::Naive,
        BaseMethod::SeasonalNaive,
        BaseMethod::Ets,
        BaseMethod::Arima,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BaseMethod::Average => "avg",
            BaseMethod::Naive => "nve",
            BaseMethod::SeasonalNaive => "snv",
            BaseMethod::Ets => "ets",
            BaseMethod::Arima => "arm",
        }
    }
}

impl fmt::Display for BaseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BaseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "avg" => Ok(BaseMethod::Average),
            "nve" => Ok(BaseMethod::Naive),
            "snv" => Ok(BaseMethod::SeasonalNaive),
            "ets" => Ok(BaseMethod::Ets),
            "arm" => Ok(BaseMethod::Arima),
            other => Err(Error::validation(format!("unknown base method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBundle {
    pub method: BaseMethod,
    pub point: Vec<f64>,
    pub fitted: Vec<Option<f64>>,
    pub residuals: Vec<Option<f64>>,
    /// Human readable model description, e.g. `ETS(A,Ad,N) aicc=...`.
    pub meta: String,
}

impl ForecastBundle {
    pub(crate) fn from_fitted(
        method: BaseMethod,
        train: &[f64],
        point: Vec<f64>,
        fitted: Vec<Option<f64>>,
        meta: String,
    ) -> Self {
        let residuals = train
            .iter()
            .zip(&fitted)
            .map(|(y, f)| f.map(|f| y - f))
            .collect();
        Self {
            method,
            point,
            fitted,
            residuals,
            meta,
        }
    }

    /// Number of leading time steps without a fitted value.
    pub fn warmup(&self) -> usize {
        self.fitted.iter().take_while(|f| f.is_none()).count()
    }
}

/// Options for the model-based methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelConfig {
    pub ets: EtsOptions,
    pub arima: ArimaLimits,
}

fn require_nonempty(train: &[f64]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::TooShort("empty training series".into()));
    }
    Ok(())
}

/// Every forecast equals the full-sample mean.
pub fn forecast_mean(train: &[f64], h: usize) -> Result<ForecastBundle> {
    require_nonempty(train)?;
    let m = stats::mean(train);
    Ok(ForecastBundle::from_fitted(
        BaseMethod::Average,
        train,
        vec![m; h],
        vec![Some(m); train.len()],
        format!("MEAN mean={m}"),
    ))
}

/// Every forecast equals the last observation; `fitted_t = y_{t−1}`.
pub fn forecast_naive(train: &[f64], h: usize) -> Result<ForecastBundle> {
    require_nonempty(train)?;
    let last = train[train.len() - 1];
    let fitted = std::iter::once(None)
        .chain(train[..train.len() - 1].iter().map(|&v| Some(v)))
        .collect();
    Ok(ForecastBundle::from_fitted(
        BaseMethod::Naive,
        train,
        vec![last; h],
        fitted,
        "NAIVE".into(),
    ))
}

/// Repeats the last observed season: `ŷ_{T+h} = y_{T+h−m(k+1)}`, `k = ⌊(h−1)/m⌋`.
pub fn forecast_snaive(train: &[f64], h: usize, m: usize) -> Result<ForecastBundle> {
    if m == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    let t = train.len();
    if t < m {
        return Err(Error::TooShort(format!("seasonal naive needs T >= m ({t} < {m})")));
    }
    let point = (1..=h)
        .map(|step| {
            let k = (step - 1) / m;
            // 1-based index T + h − m(k+1)
            train[t + step - m * (k + 1) - 1]
        })
        .collect();
    let fitted = (0..t).map(|i| (i >= m).then(|| train[i - m])).collect();
    Ok(ForecastBundle::from_fitted(
        BaseMethod::SeasonalNaive,
        train,
        point,
        fitted,
        format!("SNAIVE m={m}"),
    ))
}

/// Fits and forecasts `method` on `train` with seasonal period `m`.
pub fn forecast_base(
    method: BaseMethod,
    train: &[f64],
    h: usize,
    m: usize,
    config: &ModelConfig,
) -> Result<ForecastBundle> {
    match method {
        BaseMethod::Average => forecast_mean(train, h),
        BaseMethod::Naive => forecast_naive(train, h),
        BaseMethod::SeasonalNaive => forecast_snaive(train, h, m),
        BaseMethod::Ets => {
            let model = fit_ets(train, m, &config.ets)?;
            forecast_ets(&model, train, h)
        }
        BaseMethod::Arima => {
            let model = fit_arima(train, m, &config.arima)?;
            forecast_arima(&model, train, h)
        }
    }
}
