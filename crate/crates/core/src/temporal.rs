//! Temporal hierarchies: one seasonal cycle aggregated to every block width,
//! forecast at each width and reconciled jointly.

use nalgebra::DMatrix;

use crate::dataset::{temporal_aggregate, Granularity};
use crate::error::{Error, Result};
use crate::forecasters::{forecast_base, forecast_mean, BaseMethod, ModelConfig};
use crate::hierarchy::SummingMatrix;
use crate::reconcile::{estimate_w, mint_reconcile, WeightKind, WeightSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalHierarchy {
    base_period: usize,
    /// Block widths in decreasing order; always contains `m` and 1.
    factors: Vec<usize>,
    smatrix: SummingMatrix,
}

impl TemporalHierarchy {
    pub fn base_period(&self) -> usize {
        self.base_period
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn smatrix(&self) -> &SummingMatrix {
        &self.smatrix
    }

    /// Rows contributed by the level with block width `k`.
    pub fn rows_of(&self, k: usize) -> std::ops::Range<usize> {
        let mut start = 0;
        for &f in &self.factors {
            let n = self.base_period / f;
            if f == k {
                return start..start + n;
            }
            start += n;
        }
        0..0
    }

    /// The standard levels for `m`: every granularity whose block width
    /// divides the cycle.
    pub fn standard(m: usize) -> Result<Self> {
        let mut factors: Vec<usize> = Granularity::ALL.iter().filter_map(|g| g.factor(m).ok()).collect();
        factors.push(1);
        factors.push(m);
        build_temporal_smatrix(m, &factors)
    }
}

/// Block summing matrix over one cycle of `m` base periods.
///
/// The level with width `k` contributes `m / k` rows; row `j` sums base
/// periods `j·k .. (j+1)·k`. Levels appear in decreasing `k`.
pub fn build_temporal_smatrix(m: usize, factors: &[usize]) -> Result<TemporalHierarchy> {
    if m == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    let mut factors: Vec<usize> = factors.to_vec();
    factors.sort_unstable_by(|a, b| b.cmp(a));
    factors.dedup();
    if let Some(k) = factors.iter().find(|&&k| k == 0 || m % k != 0) {
        return Err(Error::validation(format!("factor {k} does not divide {m}")));
    }
    if factors.first() != Some(&m) || factors.last() != Some(&1) {
        return Err(Error::validation(format!("factors must include 1 and {m}")));
    }
    let mut row_ids = Vec::new();
    let mut leaf_sets = Vec::new();
    for &k in &factors {
        for j in 0..m / k {
            row_ids.push(format!("k{k}_{}", j + 1));
            leaf_sets.push((j * k..(j + 1) * k).collect());
        }
    }
    let smatrix = SummingMatrix::from_leaf_sets(row_ids, leaf_sets, m, None);
    Ok(TemporalHierarchy {
        base_period: m,
        factors,
        smatrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelForecast {
    pub factor: usize,
    /// Seasonal period at this level, `m / factor`.
    pub period: usize,
    pub base: Vec<f64>,
    pub reconciled: Vec<f64>,
    pub meta: String,
    /// Set when the requested method failed and the mean was used instead.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalForecast {
    pub hierarchy: TemporalHierarchy,
    pub method: BaseMethod,
    pub weights: WeightSpec,
    pub levels: Vec<LevelForecast>,
    /// Reconciled values in summing matrix row order.
    pub stacked: Vec<f64>,
}

impl TemporalForecast {
    pub fn level(&self, factor: usize) -> Option<&LevelForecast> {
        self.levels.iter().find(|l| l.factor == factor)
    }
}

fn level_weights(
    th: &TemporalHierarchy,
    residuals: &[Vec<Option<f64>>],
    kind: WeightKind,
) -> Result<WeightSpec> {
    let s = th.smatrix();
    let m = th.base_period;
    match kind {
        WeightKind::Ols | WeightKind::Structural => estimate_w(&DMatrix::zeros(0, s.n_rows()), s, kind),
        WeightKind::WlsVar => {
            let mut diag = Vec::with_capacity(s.n_rows());
            for (&k, res) in th.factors.iter().zip(residuals) {
                let avail: Vec<f64> = res.iter().flatten().copied().collect();
                if avail.is_empty() {
                    return Err(Error::TooShort(format!("no residuals at block width {k}")));
                }
                let var = avail.iter().map(|r| r * r).sum::<f64>() / avail.len() as f64;
                if var <= 0.0 {
                    return Err(Error::Degenerate(format!("zero residual variance at block width {k}")));
                }
                diag.extend(std::iter::repeat(var).take(m / k));
            }
            WeightSpec::from_matrix(kind, DMatrix::from_diagonal(&diag.into()), None)
        }
        WeightKind::SampleCov | WeightKind::Shrinkage => {
            // one row per cycle: that cycle's residuals at every level
            let cycles = residuals.last().map_or(0, |r| r.len() / m);
            let mut e = DMatrix::from_element(cycles, s.n_rows(), f64::NAN);
            let mut col = 0;
            for (&k, res) in th.factors.iter().zip(residuals) {
                let per = m / k;
                for c in 0..cycles {
                    for j in 0..per {
                        if let Some(r) = res.get(c * per + j).copied().flatten() {
                            e[(c, col + j)] = r;
                        }
                    }
                }
                col += per;
            }
            estimate_w(&e, s, kind)
        }
    }
}

/// Forecasts one future cycle at every level of the standard temporal
/// hierarchy and reconciles them with MinT.
///
/// History is trimmed to whole cycles from the end. Levels whose base
/// method fails fall back to the mean; the reason is kept in `fallback`.
pub fn thief_forecast(
    series: &[f64],
    m: usize,
    method: BaseMethod,
    kind: WeightKind,
    config: &ModelConfig,
) -> Result<TemporalForecast> {
    let th = TemporalHierarchy::standard(m)?;
    thief_forecast_with(&th, series, method, kind, config)
}

pub fn thief_forecast_with(
    th: &TemporalHierarchy,
    series: &[f64],
    method: BaseMethod,
    kind: WeightKind,
    config: &ModelConfig,
) -> Result<TemporalForecast> {
    let m = th.base_period;
    if series.len() < 2 * m {
        return Err(Error::TooShort(format!(
            "temporal forecasting needs two full cycles ({} < {})",
            series.len(),
            2 * m
        )));
    }
    let history = &series[series.len() % m..];
    let mut levels = Vec::with_capacity(th.factors.len());
    let mut residuals = Vec::with_capacity(th.factors.len());
    let mut base_stack = Vec::with_capacity(th.smatrix.n_rows());
    for &k in &th.factors {
        let agg = temporal_aggregate(history, k)?;
        let period = m / k;
        let (bundle, fallback) = match forecast_base(method, &agg, period, period, config) {
            Ok(b) => (b, None),
            Err(e) => (forecast_mean(&agg, period)?, Some(e.to_string())),
        };
        base_stack.extend_from_slice(&bundle.point);
        residuals.push(bundle.residuals.clone());
        levels.push(LevelForecast {
            factor: k,
            period,
            base: bundle.point,
            reconciled: Vec::new(),
            meta: bundle.meta,
            fallback,
        });
    }
    let weights = level_weights(th, &residuals, kind)?;
    let base = DMatrix::from_row_slice(1, base_stack.len(), &base_stack);
    let rec = mint_reconcile(&th.smatrix, &weights, &base)?;
    let stacked: Vec<f64> = rec.point.row(0).iter().copied().collect();
    for level in &mut levels {
        level.reconciled = stacked[th.rows_of(level.factor)].to_vec();
    }
    Ok(TemporalForecast {
        hierarchy: th.clone(),
        method,
        weights,
        levels,
        stacked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::check_coherence;

    #[test]
    fn four_period_matrix() {
        let th = build_temporal_smatrix(4, &[4, 2, 1]).unwrap();
        let expected = DMatrix::from_row_slice(
            7,
            4,
            &[
                1., 1., 1., 1., //
                1., 1., 0., 0., //
                0., 0., 1., 1., //
                1., 0., 0., 0., //
                0., 1., 0., 0., //
                0., 0., 1., 0., //
                0., 0., 0., 1.,
            ],
        );
        assert_eq!(th.smatrix().matrix(), &expected);
    }

    #[test]
    fn unit_period_and_bad_factor() {
        let th = build_temporal_smatrix(1, &[1]).unwrap();
        assert_eq!(th.smatrix().matrix(), &DMatrix::from_element(1, 1, 1.0));
        assert!(build_temporal_smatrix(12, &[12, 5, 1]).is_err());
        assert!(build_temporal_smatrix(12, &[6, 1]).is_err());
    }

    #[test]
    fn weekly_standard_levels() {
        let th = TemporalHierarchy::standard(52).unwrap();
        assert_eq!(th.factors(), &[52, 26, 13, 4, 2, 1]);
        let s = th.smatrix().matrix();
        assert_eq!(s.nrows(), 98);
        for j in 0..52 {
            assert_eq!(s.column(j).sum(), 6.0);
        }
        assert_eq!(th.rows_of(4), 7..20);
    }

    #[test]
    fn constant_series_is_already_coherent() {
        let y = vec![5.0; 48];
        let f = thief_forecast(&y, 12, BaseMethod::Naive, WeightKind::Structural, &ModelConfig::default()).unwrap();
        for l in &f.levels {
            for v in &l.reconciled {
                assert!((v - 5.0 * l.factor as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reconciled_stack_is_coherent() {
        let mut state = 17u64;
        let y: Vec<f64> = (0..60)
            .map(|t| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                10.0 + (t % 12) as f64 + (state >> 40) as f64 / (1u64 << 24) as f64 * 4.0
            })
            .collect();
        for kind in [WeightKind::Ols, WeightKind::Structural, WeightKind::WlsVar, WeightKind::Shrinkage] {
            let f = thief_forecast(&y, 12, BaseMethod::SeasonalNaive, kind, &ModelConfig::default()).unwrap();
            let full = DMatrix::from_row_slice(1, f.stacked.len(), &f.stacked);
            assert!(check_coherence(&full, f.hierarchy.smatrix(), 1e-8).unwrap().passed(), "{kind}");
        }
    }
}
