//! The experiment grid: base forecasts, reconciliation and scoring for every
//! split, granularity and node, plus temporal and feature runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{split, temporal_aggregate, Granularity, SeriesFrame, SplitSpec};
use crate::error::{Error, Result};
use crate::evaluate::{mase, sort_methods, AccuracyTable, Cell, METHOD_ORDER};
use crate::features::{compute_features, pca, FeatureVector, FEATURE_NAMES};
use crate::forecasters::{forecast_base, BaseMethod, ForecastBundle};
use crate::hierarchy::{build_summing_matrix, check_coherence, HierarchySpec, SummingMatrix, DEFAULT_COHERENCE_TOL};
use crate::reconcile::{
    bottom_up, complete_rows, estimate_w, mint_reconcile, proportions_from_history, top_down, ReconcileMethod,
    ReconciledBundle, WeightKind,
};
use crate::temporal::{thief_forecast_with, TemporalHierarchy};

/// Base methods in report order.
const BASE_ORDER: [BaseMethod; 5] = [
    BaseMethod::Arima,
    BaseMethod::SeasonalNaive,
    BaseMethod::Naive,
    BaseMethod::Ets,
    BaseMethod::Average,
];

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::validation(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub split: String,
    pub granularity: String,
    pub node: String,
    pub method: String,
    pub meta: String,
}

/// Accuracy cells plus the fitted model descriptions behind them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpatialRun {
    pub table: AccuracyTable,
    pub models: Vec<ModelRecord>,
}

impl SpatialRun {
    pub fn extend(&mut self, other: SpatialRun) {
        self.table.extend(other.table);
        self.models.extend(other.models);
    }
}

/// Training and test series of every hierarchy row at one granularity.
struct Prepared {
    s: SummingMatrix,
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    period: usize,
}

fn prepare(frame: &SeriesFrame, hierarchy: &HierarchySpec, spec: &SplitSpec, g: Granularity, period: usize) -> Result<Prepared> {
    let s = build_summing_matrix(hierarchy);
    let k = g.factor(period)?;
    let (train, test) = split(frame, spec)?;
    let mut tr = Vec::with_capacity(s.n_rows());
    let mut te = Vec::with_capacity(s.n_rows());
    for id in s.row_ids() {
        let missing = || Error::MissingLeaf(format!("series `{id}` not in frame"));
        tr.push(temporal_aggregate(&train.column(id).ok_or_else(missing)?, k)?);
        te.push(temporal_aggregate(&test.column(id).ok_or_else(missing)?, k)?);
    }
    Ok(Prepared {
        s,
        train: tr,
        test: te,
        period: period / k,
    })
}

fn reconcile_family(
    p: &Prepared,
    bundles: &[&ForecastBundle],
    method: ReconcileMethod,
    config: &RunConfig,
) -> Result<ReconciledBundle> {
    let m = p.s.n_rows();
    let h = bundles[0].point.len();
    let base = DMatrix::from_fn(h, m, |t, j| bundles[j].point[t]);
    let n = bundles[0].residuals.len();
    let resid = DMatrix::from_fn(n, m, |t, j| bundles[j].residuals[t].unwrap_or(f64::NAN));
    let out = match method {
        ReconcileMethod::BottomUp => bottom_up(&p.s, &base)?,
        ReconcileMethod::TopDown => {
            let leaves: Vec<Vec<f64>> = p.train[m - p.s.n_bottom()..].to_vec();
            let props = proportions_from_history(&p.train[0], &leaves, config.proportions)?;
            let total: Vec<f64> = base.column(0).iter().copied().collect();
            top_down(&p.s, &total, &props)?
        }
        ReconcileMethod::Mint(WeightKind::SampleCov) if complete_rows(&resid).nrows() <= m => {
            return Err(Error::Rank(format!(
                "cov skipped: {} residual rows <= {m} series",
                complete_rows(&resid).nrows()
            )))
        }
        ReconcileMethod::Mint(kind) => {
            let w = estimate_w(&resid, &p.s, kind)?;
            mint_reconcile(&p.s, &w, &base)?
        }
    };
    let report = check_coherence(&out.point, &p.s, DEFAULT_COHERENCE_TOL)?;
    if !report.passed() {
        let worst = report.worst().map(|w| w.node.clone()).unwrap_or_default();
        return Err(Error::Numerical(format!("reconciled forecasts incoherent at `{worst}`")));
    }
    Ok(out)
}

/// Full detail for one `(split, granularity)` block.
pub fn run_spatial_detailed(
    frame: &SeriesFrame,
    hierarchy: &HierarchySpec,
    spec: &SplitSpec,
    g: Granularity,
    config: &RunConfig,
) -> Result<SpatialRun> {
    let p = prepare(frame, hierarchy, spec, g, config.period)?;
    let h = p.test[0].len();
    let methods: Vec<BaseMethod> = BASE_ORDER
        .into_iter()
        .filter(|m| *m != BaseMethod::SeasonalNaive || p.period > 1)
        .collect();
    let jobs: Vec<(usize, BaseMethod)> = (0..p.s.n_rows())
        .flat_map(|j| methods.iter().map(move |m| (j, *m)))
        .collect();
    let fitted: Vec<Result<ForecastBundle>> = with_pool(config.jobs, || {
        jobs.par_iter()
            .map(|&(j, m)| forecast_base(m, &p.train[j], h, p.period, &config.models))
            .collect()
    })?;
    let mut results: BTreeMap<(usize, BaseMethod), Result<ForecastBundle>> = BTreeMap::new();
    for (key, r) in jobs.iter().zip(fitted) {
        results.insert(*key, r);
    }

    let mut cells: BTreeMap<(usize, String), Cell> = BTreeMap::new();
    let mut models = Vec::new();
    let ids = p.s.row_ids();
    for (&(j, m), r) in &results {
        let cell = match r {
            Ok(b) => {
                models.push(ModelRecord {
                    split: spec.name.clone(),
                    granularity: g.tag().into(),
                    node: ids[j].clone(),
                    method: m.tag().into(),
                    meta: b.meta.clone(),
                });
                Cell::from_result(mase(&p.test[j], &b.point, &p.train[j], p.period))
            }
            Err(e) => Cell::na(e),
        };
        cells.insert((j, m.tag().to_string()), cell);
    }

    for family in [BaseMethod::Arima, BaseMethod::Ets] {
        let bundles: std::result::Result<Vec<&ForecastBundle>, String> = (0..p.s.n_rows())
            .map(|j| match &results[&(j, family)] {
                Ok(b) => Ok(b),
                Err(e) => Err(format!("base {} failed for {}: {e}", family.tag(), ids[j])),
            })
            .collect();
        for method in ReconcileMethod::ALL {
            let tag = method.tag(family);
            let outcome = match &bundles {
                Ok(b) => reconcile_family(&p, b, method, config).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            for j in 0..p.s.n_rows() {
                let cell = match &outcome {
                    Ok(r) => {
                        let col: Vec<f64> = r.point.column(j).iter().copied().collect();
                        Cell::from_result(mase(&p.test[j], &col, &p.train[j], p.period))
                    }
                    Err(e) => Cell::na(e),
                };
                cells.insert((j, tag.clone()), cell);
            }
        }
    }

    let mut table = AccuracyTable::new();
    for (j, id) in ids.iter().enumerate() {
        for method in METHOD_ORDER {
            if let Some(c) = cells.remove(&(j, method.to_string())) {
                table.push(&spec.name, g.tag(), id, method, c);
            }
        }
    }
    Ok(SpatialRun { table, models })
}

/// Accuracy for one `(split, granularity)` block. Failed cells are `NA`.
pub fn run_spatial(
    frame: &SeriesFrame,
    hierarchy: &HierarchySpec,
    spec: &SplitSpec,
    g: Granularity,
    config: &RunConfig,
) -> Result<AccuracyTable> {
    Ok(run_spatial_detailed(frame, hierarchy, spec, g, config)?.table)
}

fn cache_paths(dir: &Path, split: &str, g: Granularity) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{split}_{}.csv", g.tag())),
        dir.join(format!("{split}_{}_models.csv", g.tag())),
    )
}

fn read_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix("# config_hash=")
}

fn models_to_string(models: &[ModelRecord], preamble: &[String]) -> String {
    let mut s = String::new();
    for line in preamble {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str("split,granularity,node_id,method,model\n");
    for m in models {
        let meta = m.meta.replace(['"', '\n'], " ");
        s.push_str(&format!("{},{},{},{},\"{}\"\n", m.split, m.granularity, m.node, m.method, meta));
    }
    s
}

fn models_from_str(text: &str) -> Result<Vec<ModelRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(ModelRecord {
            split: row[0].into(),
            granularity: row[1].into(),
            node: row[2].into(),
            method: row[3].into(),
            meta: row[4].into(),
        });
    }
    Ok(out)
}

fn load_cached(dir: &Path, split: &str, g: Granularity, hash: &str) -> Option<SpatialRun> {
    let (tp, mp) = cache_paths(dir, split, g);
    let text = fs::read_to_string(tp).ok()?;
    if read_hash(&text) != Some(hash) {
        return None;
    }
    let table = AccuracyTable::read_long(text.as_bytes()).ok()?;
    if table.is_empty() || table.records.iter().any(|r| r.mase.value().is_none()) {
        return None;
    }
    let models_text = fs::read_to_string(mp).ok()?;
    if read_hash(&models_text) != Some(hash) {
        return None;
    }
    Some(SpatialRun {
        table,
        models: models_from_str(&models_text).ok()?,
    })
}

/// Runs every `(split, granularity)` block in order.
///
/// With a cache directory, a block whose cached cells were produced under
/// the same config hash and contain no `NA` is reused as is; any other
/// block is recomputed and its cache rewritten.
pub fn run_grid(
    frame: &SeriesFrame,
    hierarchy: &HierarchySpec,
    splits: &[SplitSpec],
    config: &RunConfig,
) -> Result<SpatialRun> {
    let hash = config.hash();
    let preamble = vec![config.header_line()];
    let mut all = SpatialRun::default();
    for spec in splits {
        for &g in &config.granularities {
            if let Some(dir) = &config.cache_dir {
                if let Some(hit) = load_cached(dir, &spec.name, g, &hash) {
                    all.extend(hit);
                    continue;
                }
            }
            let block = run_spatial_detailed(frame, hierarchy, spec, g, config)?;
            if let Some(dir) = &config.cache_dir {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let (tp, mp) = cache_paths(dir, &spec.name, g);
                fs::write(&tp, block.table.to_long_string(&preamble)).map_err(|e| Error::io(&tp, e))?;
                fs::write(&mp, models_to_string(&block.models, &preamble)).map_err(|e| Error::io(&mp, e))?;
            }
            all.extend(block);
        }
    }
    Ok(all)
}

/// Writes `accuracy_long.csv`, `accuracy_wide.csv` (two decimals) and
/// `models.csv` under `out`.
pub fn write_grid(out: &Path, run: &SpatialRun, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let preamble = vec![config.header_line(), "monthly=4-period blocks".to_string()];
    let files = [
        ("accuracy_long.csv", run.table.to_long_string(&preamble)),
        ("accuracy_wide.csv", run.table.to_wide_string(Some(2), &preamble)),
        ("models.csv", models_to_string(&run.models, &preamble)),
    ];
    for (name, body) in files {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Row order of the temporal report.
pub const TEMPORAL_ROWS: [Granularity; 6] = [
    Granularity::Annual,
    Granularity::SemiAnnual,
    Granularity::Quarterly,
    Granularity::Monthly,
    Granularity::BiWeekly,
    Granularity::Weekly,
];

/// Temporal hierarchy forecasts for one node, scored per level.
///
/// Base forecasts appear under their own tags and reconciled ones as
/// `h-<tag>`. The test window must be exactly one cycle.
pub fn run_temporal(frame: &SeriesFrame, node: &str, spec: &SplitSpec, config: &RunConfig) -> Result<AccuracyTable> {
    let m = config.period;
    let (train, test) = split(frame, spec)?;
    let missing = || Error::MissingLeaf(format!("series `{node}` not in frame"));
    let y = train.column(node).ok_or_else(missing)?;
    let actual = test.column(node).ok_or_else(missing)?;
    if actual.len() != m {
        return Err(Error::validation(format!(
            "temporal evaluation needs a test window of one cycle ({m}), got {}",
            actual.len()
        )));
    }
    let th = TemporalHierarchy::standard(m)?;
    let history = &y[y.len() % m..];
    let forecasts: Vec<_> = with_pool(config.jobs, || {
        BaseMethod::ALL
            .par_iter()
            .map(|&method| thief_forecast_with(&th, &y, method, config.temporal_weights, &config.models))
            .collect()
    })?;

    let mut table = AccuracyTable::new();
    for g in TEMPORAL_ROWS {
        let Ok(k) = g.factor(m) else { continue };
        if !th.factors().contains(&k) {
            continue;
        }
        let truth = temporal_aggregate(&actual, k)?;
        let hist = temporal_aggregate(history, k)?;
        let period = m / k;
        let mut row: Vec<(String, Cell)> = Vec::new();
        for (method, f) in BaseMethod::ALL.iter().zip(&forecasts) {
            let (base, rec) = match f {
                Ok(f) => {
                    let level = f.level(k).expect("level exists");
                    (
                        Cell::from_result(mase(&truth, &level.base, &hist, period)),
                        Cell::from_result(mase(&truth, &level.reconciled, &hist, period)),
                    )
                }
                Err(e) => (Cell::na(e), Cell::na(e)),
            };
            row.push((method.tag().to_string(), base));
            row.push((format!("h-{}", method.tag()), rec));
        }
        let mut names: Vec<String> = row.iter().map(|(n, _)| n.clone()).collect();
        sort_methods(&mut names);
        for name in names {
            let cell = row.iter().find(|(n, _)| *n == name).map(|(_, c)| c.clone()).unwrap();
            table.push(&spec.name, g.label(), node, &name, cell);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub node: String,
    pub level: usize,
    pub granularity: Granularity,
    pub split: String,
    pub best_method: String,
    pub best_mase: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaRow {
    pub node: String,
    pub pc1: f64,
    pub pc2: f64,
    pub best_method: String,
    pub split: String,
    pub trend_strength: Option<f64>,
    pub seasonal_strength: Option<f64>,
    pub stability: Option<f64>,
    pub lumpiness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaGroup {
    pub level: usize,
    pub granularity: Granularity,
    pub rows: Vec<PcaRow>,
    pub dropped_columns: Vec<String>,
    pub explained_variance_ratio: Vec<f64>,
    /// Why PCA could not run for this group, if it could not.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturesRun {
    pub features: Vec<FeatureRow>,
    pub groups: Vec<PcaGroup>,
    /// Nodes without any scored method or whose features failed.
    pub skipped: Vec<(String, String, String)>,
}

fn best_for(table: &AccuracyTable, g: &str, node: &str) -> Option<(String, String, f64)> {
    let rank = |m: &str| METHOD_ORDER.iter().position(|x| *x == m).unwrap_or(METHOD_ORDER.len());
    table
        .records
        .iter()
        .filter(|r| r.granularity == g && r.node == node)
        .filter_map(|r| r.mase.value().map(|v| (r, v)))
        .min_by(|(a, va), (b, vb)| {
            va.total_cmp(vb)
                .then(rank(&a.method).cmp(&rank(&b.method)))
                .then(a.split.cmp(&b.split))
                .then(a.method.cmp(&b.method))
        })
        .map(|(r, v)| (r.split.clone(), r.method.clone(), v))
}

/// Features of each node's training window under its best `(split, method)`
/// and PCA per `(level, granularity)`.
pub fn run_features(
    frame: &SeriesFrame,
    hierarchy: &HierarchySpec,
    splits: &[SplitSpec],
    table: &AccuracyTable,
    config: &RunConfig,
) -> Result<FeaturesRun> {
    let s = build_summing_matrix(hierarchy);
    let mut grans: Vec<Granularity> = Vec::new();
    for r in &table.records {
        if let Ok(g) = r.granularity.parse::<Granularity>() {
            if !grans.contains(&g) {
                grans.push(g);
            }
        }
    }
    grans.sort();

    let mut run = FeaturesRun::default();
    for g in grans {
        let k = g.factor(config.period)?;
        let period = config.period / k;
        for id in s.row_ids() {
            let Some((split_name, method, v)) = best_for(table, g.tag(), id) else {
                run.skipped.push((id.clone(), g.tag().into(), "no scored method".into()));
                continue;
            };
            let spec = splits
                .iter()
                .find(|sp| sp.name == split_name)
                .ok_or_else(|| Error::validation(format!("split `{split_name}` not defined")))?;
            let (train, _) = split(frame, spec)?;
            let col = train
                .column(id)
                .ok_or_else(|| Error::MissingLeaf(format!("series `{id}` not in frame")))?;
            let agg = temporal_aggregate(&col, k)?;
            match compute_features(&agg, period) {
                Ok(fv) => run.features.push(FeatureRow {
                    node: id.clone(),
                    level: hierarchy.node(id).map_or(0, |n| n.level),
                    granularity: g,
                    split: split_name,
                    best_method: method,
                    best_mase: v,
                    features: fv,
                }),
                Err(e) => run.skipped.push((id.clone(), g.tag().into(), e.to_string())),
            }
        }
    }

    let mut keys: Vec<(usize, Granularity)> = run.features.iter().map(|f| (f.level, f.granularity)).collect();
    keys.sort();
    keys.dedup();
    for (level, g) in keys {
        let rows: Vec<&FeatureRow> = run
            .features
            .iter()
            .filter(|f| f.level == level && f.granularity == g)
            .collect();
        let x = DMatrix::from_fn(rows.len(), FEATURE_NAMES.len(), |i, j| {
            rows[i].features.values()[j].unwrap_or(f64::NAN)
        });
        let mut group = PcaGroup {
            level,
            granularity: g,
            rows: Vec::new(),
            dropped_columns: Vec::new(),
            explained_variance_ratio: Vec::new(),
            error: None,
        };
        match pca(&x) {
            Ok(res) => {
                group.dropped_columns = res.dropped_columns.iter().map(|&j| FEATURE_NAMES[j].to_string()).collect();
                group.explained_variance_ratio = res.explained_variance_ratio.clone();
                for (i, r) in rows.iter().enumerate() {
                    group.rows.push(PcaRow {
                        node: r.node.clone(),
                        pc1: res.scores[(i, 0)],
                        pc2: res.scores[(i, 1)],
                        best_method: r.best_method.clone(),
                        split: r.split.clone(),
                        trend_strength: r.features.get("trend_strength"),
                        seasonal_strength: r.features.get("seasonal_strength"),
                        stability: r.features.get("stability"),
                        lumpiness: r.features.get("lumpiness"),
                    });
                }
            }
            Err(e) => group.error = Some(e.to_string()),
        }
        run.groups.push(group);
    }
    Ok(run)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v}"))
}

/// Writes `features.csv` and one `pca_level<L>_<granularity>.csv` per group.
pub fn write_features(out: &Path, run: &FeaturesRun, config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut body = format!("# {}\nnode_id,granularity,{}\n", config.header_line(), FEATURE_NAMES.join(","));
    for f in &run.features {
        body.push_str(&format!("{},{},{}\n", f.node, f.granularity.tag(), f.features.to_csv_fields()));
    }
    let path = out.join("features.csv");
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    written.extend(write_pca(out, run, config)?);
    Ok(written)
}

/// Writes only the PCA files.
pub fn write_pca(out: &Path, run: &FeaturesRun, config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for group in &run.groups {
        let mut body = format!("# {}\n", config.header_line());
        body.push_str(&format!("# dropped_columns={}\n", group.dropped_columns.join(";")));
        if let Some(e) = &group.error {
            body.push_str(&format!("# pca_error={}\n", e.replace('\n', " ")));
        }
        body.push_str("node_id,pc1,pc2,best_method,training_set,trend_strength,seasonal_strength,stability,lumpiness\n");
        for r in &group.rows {
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.node,
                r.pc1,
                r.pc2,
                r.best_method,
                r.split,
                opt(r.trend_strength),
                opt(r.seasonal_strength),
                opt(r.stability),
                opt(r.lumpiness)
            ));
        }
        let path = out.join(format!("pca_level{}_{}.csv", group.level, group.granularity.tag()));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
