//! Forecast reconciliation: bottom-up, top-down and MinT.
//!
//! Base forecasts are `h × m` matrices whose columns follow the summing
//! matrix row order. Every reconciled result is `S · P · ŷ` for the stored
//! `P`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::dataset::SeriesFrame;
use crate::error::{Error, Result};
use crate::forecasters::BaseMethod;
use crate::hierarchy::SummingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeightKind {
    Ols,
    WlsVar,
    Structural,
    SampleCov,
    Shrinkage,
}

impl WeightKind {
    pub const ALL: [WeightKind; 5] = [
        WeightKind::Ols,
        WeightKind::WlsVar,
        WeightKind::Structural,
        WeightKind::SampleCov,
        WeightKind::Shrinkage,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            WeightKind::Ols => "ols",
            WeightKind::WlsVar => "wls_var",
            WeightKind::Structural => "structural",
            WeightKind::SampleCov => "sample_cov",
            WeightKind::Shrinkage => "shrinkage",
        }
    }

    /// Whether the estimator reads residuals at all.
    pub fn uses_residuals(self) -> bool {
        !matches!(self, WeightKind::Ols | WeightKind::Structural)
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.tag() == s.trim())
            .ok_or_else(|| Error::validation(format!("unknown weight kind `{s}`")))
    }
}

/// A materialized, positive definite `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub matrix: DMatrix<f64>,
    /// Shrinkage intensity; set only for [`WeightKind::Shrinkage`].
    pub lambda: Option<f64>,
    /// How many diagonal jitter steps were needed for a Cholesky factor.
    pub jitter_steps: usize,
}

const SYMMETRY_TOL: f64 = 1e-10;
const JITTER_SCALE: f64 = 1e-8;
const MAX_JITTER: usize = 3;

/// Cholesky factor of `w`, adding `1e-8 · mean(diag)` to the diagonal up to
/// three times. Returns the factor and the (possibly jittered) matrix.
fn factor_with_jitter(w: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, DMatrix<f64>, usize)> {
    let n = w.nrows();
    let mean_diag = (0..n).map(|i| w[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let step = JITTER_SCALE * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut current = w.clone();
    for attempt in 0..=MAX_JITTER {
        if let Some(c) = Cholesky::new(current.clone()) {
            return Ok((c, current, attempt));
        }
        if attempt < MAX_JITTER {
            for i in 0..n {
                current[(i, i)] += step;
            }
        }
    }
    Err(Error::Numerical(format!(
        "matrix of size {n} is not positive definite after {MAX_JITTER} jitter steps"
    )))
}

impl WeightSpec {
    /// Wraps an explicit `W`, checking symmetry and positive definiteness.
    pub fn from_matrix(kind: WeightKind, matrix: DMatrix<f64>, lambda: Option<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(format!("square matrix, {} rows", matrix.nrows()), matrix.ncols()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("weight matrix has non-finite entries".into()));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Numerical(format!("weight matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if let Some(l) = lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::validation(format!("lambda {l} outside [0, 1]")));
            }
        }
        let (_, matrix, jitter_steps) = factor_with_jitter(&matrix)?;
        Ok(Self {
            kind,
            matrix,
            lambda,
            jitter_steps,
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Rows of `residuals` without NaN (unavailable) entries.
pub fn complete_rows(residuals: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..residuals.nrows())
        .filter(|&i| residuals.row(i).iter().all(|v| v.is_finite()))
        .collect();
    DMatrix::from_fn(keep.len(), residuals.ncols(), |i, j| residuals[(keep[i], j)])
}

/// `Ŵ₁ = (1/n) Σ e_t e_tᵀ`, uncentered.
pub fn sample_covariance(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.nrows() as f64;
    let mut w = e.transpose() * e;
    w /= n;
    // exact symmetry regardless of summation order
    let m = w.nrows();
    for i in 0..m {
        for j in 0..i {
            let v = w[(i, j)];
            w[(j, i)] = v;
        }
    }
    w
}

/// Schäfer–Strimmer shrinkage intensity toward the diagonal, clamped to `[0, 1]`.
///
/// Rows with unavailable entries are dropped first.
pub fn shrinkage_lambda(residuals: &DMatrix<f64>) -> Result<f64> {
    let e = complete_rows(residuals);
    let (n, m) = (e.nrows(), e.ncols());
    if n < 3 {
        return Err(Error::TooShort(format!("shrinkage needs at least 3 residual rows, got {n}")));
    }
    let nf = n as f64;
    let mut x = e.clone();
    for j in 0..m {
        let col: Vec<f64> = e.column(j).iter().copied().collect();
        let mean = col.iter().sum::<f64>() / nf;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::Degenerate(format!("residual column {j} has zero variance")));
        }
        for i in 0..n {
            x[(i, j)] = (e[(i, j)] - mean) / sd;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = vec![0.0; n];
    for i in 0..m {
        for j in (i + 1)..m {
            for t in 0..n {
                w[t] = x[(t, i)] * x[(t, j)];
            }
            let wbar = w.iter().sum::<f64>() / nf;
            let r = nf / (nf - 1.0) * wbar;
            // identical products have zero spread; the rounded mean would hide that
            let var = if w.iter().all(|v| *v == w[0]) {
                0.0
            } else {
                nf / (nf - 1.0).powi(3) * w.iter().map(|v| (v - wbar).powi(2)).sum::<f64>()
            };
            // each unordered pair stands for (i, j) and (j, i); the factor cancels
            num += var;
            den += r * r;
        }
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Builds `W` of the requested kind. `residuals` is `n × m` with NaN marking
/// unavailable values; it is ignored by `ols` and `structural`.
pub fn estimate_w(residuals: &DMatrix<f64>, s: &SummingMatrix, kind: WeightKind) -> Result<WeightSpec> {
    let m = s.n_rows();
    match kind {
        WeightKind::Ols => return WeightSpec::from_matrix(kind, DMatrix::identity(m, m), None),
        WeightKind::Structural => {
            return WeightSpec::from_matrix(kind, DMatrix::from_diagonal(&s.row_sums().into()), None)
        }
        _ => {}
    }
    if residuals.ncols() != m {
        return Err(Error::dims(format!("{m} residual columns"), residuals.ncols()));
    }
    let e = complete_rows(residuals);
    let n = e.nrows();
    if n < 2 {
        return Err(Error::TooShort(format!("{kind} needs at least 2 complete residual rows, got {n}")));
    }
    let w1 = sample_covariance(&e);
    match kind {
        WeightKind::WlsVar => {
            if let Some(i) = (0..m).find(|&i| w1[(i, i)] <= 0.0) {
                return Err(Error::Degenerate(format!(
                    "series `{}` has zero residual variance",
                    s.row_ids()[i]
                )));
            }
            WeightSpec::from_matrix(kind, DMatrix::from_diagonal(&w1.diagonal()), None)
        }
        WeightKind::SampleCov => {
            if n <= m {
                return Err(Error::Rank(format!("sample covariance needs n > m ({n} <= {m})")));
            }
            WeightSpec::from_matrix(kind, w1, None)
        }
        WeightKind::Shrinkage => {
            let lambda = shrinkage_lambda(&e)?;
            let mut w = w1.clone() * (1.0 - lambda);
            for i in 0..m {
                w[(i, i)] = w1[(i, i)];
            }
            WeightSpec::from_matrix(kind, w, Some(lambda))
        }
        WeightKind::Ols | WeightKind::Structural => unreachable!(),
    }
}

/// Reconciliation methods as reported: bottom-up, top-down, and MinT with
/// one of the weight kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconcileMethod {
    BottomUp,
    TopDown,
    Mint(WeightKind),
}

impl ReconcileMethod {
    /// Report order.
    pub const ALL: [ReconcileMethod; 7] = [
        ReconcileMethod::BottomUp,
        ReconcileMethod::TopDown,
        ReconcileMethod::Mint(WeightKind::Ols),
        ReconcileMethod::Mint(WeightKind::Shrinkage),
        ReconcileMethod::Mint(WeightKind::WlsVar),
        ReconcileMethod::Mint(WeightKind::Structural),
        ReconcileMethod::Mint(WeightKind::SampleCov),
    ];

    pub fn short_tag(self) -> &'static str {
        match self {
            ReconcileMethod::BottomUp => "bup",
            ReconcileMethod::TopDown => "top",
            ReconcileMethod::Mint(WeightKind::Ols) => "ols",
            ReconcileMethod::Mint(WeightKind::Shrinkage) => "mit",
            ReconcileMethod::Mint(WeightKind::WlsVar) => "var",
            ReconcileMethod::Mint(WeightKind::Structural) => "stc",
            ReconcileMethod::Mint(WeightKind::SampleCov) => "cov",
        }
    }

    /// Report tag for a base family: `arm` gives `ols`, `ets` gives `eols`.
    pub fn tag(self, family: BaseMethod) -> String {
        match family {
            BaseMethod::Ets => format!("e{}", self.short_tag()),
            _ => self.short_tag().to_string(),
        }
    }

    /// Parses a report tag into its base family and method.
    pub fn parse_tag(tag: &str) -> Option<(BaseMethod, ReconcileMethod)> {
        let (family, rest) = match tag.strip_prefix('e') {
            Some(rest) if ReconcileMethod::ALL.iter().any(|m| m.short_tag() == rest) => (BaseMethod::Ets, rest),
            _ => (BaseMethod::Arima, tag),
        };
        ReconcileMethod::ALL
            .into_iter()
            .find(|m| m.short_tag() == rest)
            .map(|m| (family, m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconciledBundle {
    pub method: ReconcileMethod,
    /// Coherent forecasts, `h × m`.
    pub point: DMatrix<f64>,
    /// The `m_k × m` matrix `P`.
    pub p_matrix: DMatrix<f64>,
    pub weights: Option<WeightSpec>,
}

fn check_base(s: &SummingMatrix, base: &DMatrix<f64>) -> Result<()> {
    if base.ncols() != s.n_rows() {
        return Err(Error::dims(format!("{} base columns", s.n_rows()), base.ncols()));
    }
    if base.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("base forecasts contain non-finite values"));
    }
    Ok(())
}

/// `h × m_k` bottom forecasts to `h × m` by exact leaf sums.
fn aggregate_rows(s: &SummingMatrix, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(bottom.nrows(), s.n_rows());
    for t in 0..bottom.nrows() {
        let b: Vec<f64> = bottom.row(t).iter().copied().collect();
        let full = s.aggregate_vector(&b).expect("bottom width matches S");
        for (j, v) in full.into_iter().enumerate() {
            out[(t, j)] = v;
        }
    }
    out
}

/// `P = (Sᵀ W⁻¹ S)⁻¹ Sᵀ W⁻¹`, by Cholesky solves.
pub fn mint_projection(s: &SummingMatrix, w: &WeightSpec) -> Result<DMatrix<f64>> {
    let sm = s.matrix();
    if w.size() != s.n_rows() {
        return Err(Error::dims(format!("W of size {}", s.n_rows()), w.size()));
    }
    let (chol_w, _, _) = factor_with_jitter(&w.matrix)?;
    let winv_s = chol_w.solve(sm);
    let a = sm.transpose() * &winv_s;
    let a = (&a + a.transpose()) * 0.5;
    let chol_a = Cholesky::new(a).ok_or_else(|| Error::Numerical("Sᵀ W⁻¹ S is not positive definite".into()))?;
    Ok(chol_a.solve(&winv_s.transpose()))
}

/// MinT reconciliation of `h × m` base forecasts.
pub fn mint_reconcile(s: &SummingMatrix, w: &WeightSpec, base: &DMatrix<f64>) -> Result<ReconciledBundle> {
    check_base(s, base)?;
    let p = mint_projection(s, w)?;
    let bottom = base * p.transpose();
    Ok(ReconciledBundle {
        method: ReconcileMethod::Mint(w.kind),
        point: aggregate_rows(s, &bottom),
        p_matrix: p,
        weights: Some(w.clone()),
    })
}

/// Keeps the bottom base forecasts and sums them upward.
pub fn bottom_up(s: &SummingMatrix, base: &DMatrix<f64>) -> Result<ReconciledBundle> {
    check_base(s, base)?;
    let (m, k) = (s.n_rows(), s.n_bottom());
    let bottom = base.columns(m - k, k).into_owned();
    let mut p = DMatrix::zeros(k, m);
    for j in 0..k {
        p[(j, m - k + j)] = 1.0;
    }
    Ok(ReconciledBundle {
        method: ReconcileMethod::BottomUp,
        point: aggregate_rows(s, &bottom),
        p_matrix: p,
        weights: None,
    })
}

/// Splits the total forecast among the leaves by `proportions`.
pub fn top_down(s: &SummingMatrix, total: &[f64], proportions: &[f64]) -> Result<ReconciledBundle> {
    let (m, k) = (s.n_rows(), s.n_bottom());
    if proportions.len() != k {
        return Err(Error::dims(format!("{k} proportions"), proportions.len()));
    }
    if proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation("proportions must be finite and non-negative"));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("proportions sum to {sum}, expected 1")));
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("total forecast contains non-finite values"));
    }
    let bottom = DMatrix::from_fn(total.len(), k, |t, j| proportions[j] * total[t]);
    let mut p = DMatrix::zeros(k, m);
    for j in 0..k {
        p[(j, 0)] = proportions[j];
    }
    Ok(ReconciledBundle {
        method: ReconcileMethod::TopDown,
        point: aggregate_rows(s, &bottom),
        p_matrix: p,
        weights: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProportionMethod {
    /// Mean over time of each leaf's share of the total.
    #[default]
    AverageHistorical,
    /// Each leaf's mean divided by the total's mean.
    ProportionOfAverages,
}

impl ProportionMethod {
    pub fn tag(self) -> &'static str {
        match self {
            ProportionMethod::AverageHistorical => "avg_hist",
            ProportionMethod::ProportionOfAverages => "prop_of_avg",
        }
    }
}

impl FromStr for ProportionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "avg_hist" => Ok(ProportionMethod::AverageHistorical),
            "prop_of_avg" => Ok(ProportionMethod::ProportionOfAverages),
            other => Err(Error::validation(format!("unknown proportion method `{other}`"))),
        }
    }
}

/// Disaggregation proportions for the leaves of `s` from history.
pub fn compute_proportions(train: &SeriesFrame, s: &SummingMatrix, method: ProportionMethod) -> Result<Vec<f64>> {
    let ids = s.row_ids();
    let column = |id: &str| {
        train
            .column(id)
            .ok_or_else(|| Error::MissingLeaf(format!("series `{id}` not in frame")))
    };
    let total = column(&ids[0])?;
    let leaves: Vec<Vec<f64>> = ids[s.n_rows() - s.n_bottom()..]
        .iter()
        .map(|id| column(id))
        .collect::<Result<_>>()?;
    proportions_from_history(&total, &leaves, method)
}

/// Proportions from a total series and its leaf series of equal length.
pub fn proportions_from_history(total: &[f64], leaves: &[Vec<f64>], method: ProportionMethod) -> Result<Vec<f64>> {
    if total.is_empty() {
        return Err(Error::TooShort("empty history".into()));
    }
    if let Some(l) = leaves.iter().find(|l| l.len() != total.len()) {
        return Err(Error::dims(format!("{} history values", total.len()), l.len()));
    }
    let t = total.len() as f64;
    match method {
        ProportionMethod::AverageHistorical => {
            if let Some(i) = total.iter().position(|v| *v <= 0.0) {
                return Err(Error::Degenerate(format!("total is not positive at row {i}")));
            }
            Ok(leaves
                .iter()
                .map(|y| y.iter().zip(total).map(|(a, b)| a / b).sum::<f64>() / t)
                .collect())
        }
        ProportionMethod::ProportionOfAverages => {
            let mt = total.iter().sum::<f64>() / t;
            if mt <= 0.0 {
                return Err(Error::Degenerate("total has zero mean".into()));
            }
            Ok(leaves.iter().map(|y| (y.iter().sum::<f64>() / t) / mt).collect())
        }
    }
}
