//! Command line front end. CSV goes to stdout, diagnostics to stderr.
//! Exit codes: 0 success, 1 data or numerical error, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use hts_core::config::RunConfig;
use hts_core::dataset::{ingest_csv, split, temporal_aggregate, Granularity, SeriesFrame, SplitSpec};
use hts_core::evaluate::AccuracyTable;
use hts_core::forecasters::{forecast_base, BaseMethod};
use hts_core::hierarchy::{build_summing_matrix, HierarchySpec};
use hts_core::reconcile::{
    bottom_up, estimate_w, mint_reconcile, proportions_from_history, top_down, ReconcileMethod, WeightKind,
};
use hts_core::runner::{run_features, run_grid, run_temporal, write_features, write_grid, write_pca};
use hts_core::Error;

#[derive(Parser)]
#[command(name = "hts", version, about = "Hierarchical and temporal forecast reconciliation")]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set period=12`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Leaf-level `year,week,<leaf...>` CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// `node_id,level,parent` CSV
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Directory written by `ingest`; replaces --data and --hierarchy
    #[arg(long)]
    store: Option<PathBuf>,
    /// `name,train_start,train_end,test_start,test_end` CSV
    #[arg(long)]
    splits: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and cache the aggregated frame
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Base forecasts for one node
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        node: String,
        #[arg(long)]
        method: String,
        #[arg(long)]
        split: String,
        #[arg(long, default_value = "w")]
        granularity: String,
    },
    /// Coherent forecasts for all nodes
    Reconcile {
        #[command(flatten)]
        data: DataArgs,
        /// Base family: arm or ets
        #[arg(long)]
        base: String,
        /// ols, var, stc, cov, mit, bup or top
        #[arg(long)]
        weights: String,
        #[arg(long)]
        split: String,
        #[arg(long, default_value = "w")]
        granularity: String,
    },
    /// Full accuracy grid
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma separated granularity tags; overrides the config
        #[arg(long)]
        granularities: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Temporal hierarchy forecasts for one node
    Temporal {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        node: String,
        #[arg(long)]
        split: String,
        /// Also write long and wide CSVs here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature and PCA files
    Features {
        #[command(flatten)]
        data: DataArgs,
        /// Long accuracy CSV from `evaluate`; the grid is run when absent
        #[arg(long)]
        accuracy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PCA files only
    Pca {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        accuracy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Long accuracy CSV to the wide layout (or back with --reverse)
    Pivot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        reverse: bool,
        /// Decimal places in the wide layout; full precision when omitted
        #[arg(long)]
        decimals: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

struct Loaded {
    hierarchy: HierarchySpec,
    frame: SeriesFrame,
    splits: Vec<SplitSpec>,
}

fn load(args: &DataArgs, cfg: &RunConfig) -> CliResult<Loaded> {
    let (data, hier) = match &args.store {
        Some(dir) => (dir.join("data.csv"), dir.join("hierarchy.csv")),
        None => match (&args.data, &args.hierarchy) {
            (Some(d), Some(h)) => (d.clone(), h.clone()),
            (Some(d), None) => (d.clone(), PathBuf::new()),
            _ => return Err(usage("either --store or --data is required")),
        },
    };
    let hierarchy = if hier.as_os_str().is_empty() {
        HierarchySpec::sri_lanka()
    } else {
        HierarchySpec::from_csv_path(&hier)?
    };
    let frame = ingest_csv(&data, &hierarchy, cfg.period)?;
    let splits = match &args.splits {
        Some(p) => SplitSpec::read_path(p)?,
        None => match &args.store {
            Some(dir) if dir.join("splits.csv").exists() => SplitSpec::read_path(dir.join("splits.csv"))?,
            _ => SplitSpec::sri_lanka(),
        },
    };
    Ok(Loaded {
        hierarchy,
        frame,
        splits,
    })
}

fn find_split<'a>(splits: &'a [SplitSpec], name: &str) -> CliResult<&'a SplitSpec> {
    splits
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| usage(format!("unknown split `{name}`")))
}

fn check_node(h: &HierarchySpec, node: &str) -> CliResult<()> {
    if h.contains(node) {
        Ok(())
    } else {
        Err(usage(format!("unknown node `{node}`")))
    }
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, body).map_err(|e| {
        Failure::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn accuracy_for(l: &Loaded, path: &Option<PathBuf>, cfg: &RunConfig) -> CliResult<AccuracyTable> {
    match path {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            Ok(AccuracyTable::read_long(file)?)
        }
        None => Ok(run_grid(&l.frame, &l.hierarchy, &l.splits, cfg)?.table),
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest { data, out } => {
            let l = load(data, &cfg)?;
            write_file(&out.join("data.csv"), &l.frame.to_csv_string())?;
            write_file(&out.join("hierarchy.csv"), &l.hierarchy.to_csv_string())?;
            if let Some(p) = &data.splits {
                let body = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                write_file(&out.join("splits.csv"), &body)?;
            }
            println!("nodes,rows");
            println!("{},{}", l.frame.labels().len(), l.frame.len());
        }
        Command::Forecast {
            data,
            node,
            method,
            split: split_name,
            granularity,
        } => {
            let method: BaseMethod = method.parse().map_err(|e: Error| usage(e.to_string()))?;
            let g: Granularity = granularity.parse().map_err(|e: Error| usage(e.to_string()))?;
            let l = load(data, &cfg)?;
            check_node(&l.hierarchy, node)?;
            let spec = find_split(&l.splits, split_name)?;
            let k = g.factor(cfg.period).map_err(|e| usage(e.to_string()))?;
            let (train, test) = split(&l.frame, spec)?;
            let y = temporal_aggregate(&train.column(node).expect("checked node"), k)?;
            let h = temporal_aggregate(&test.column(node).expect("checked node"), k)?.len();
            let b = forecast_base(method, &y, h, cfg.period / k, &cfg.models)?;
            eprintln!("{}", b.meta);
            println!("step,{node}");
            for (i, v) in b.point.iter().enumerate() {
                println!("{},{v}", i + 1);
            }
        }
        Command::Reconcile {
            data,
            base,
            weights,
            split: split_name,
            granularity,
        } => {
            let family = match base.as_str() {
                "arm" => BaseMethod::Arima,
                "ets" => BaseMethod::Ets,
                other => return Err(usage(format!("--base must be arm or ets, got `{other}`"))),
            };
            let method = ReconcileMethod::parse_tag(weights)
                .filter(|(f, _)| *f == BaseMethod::Arima)
                .map(|(_, m)| m)
                .ok_or_else(|| usage(format!("unknown --weights `{weights}`")))?;
            let g: Granularity = granularity.parse().map_err(|e: Error| usage(e.to_string()))?;
            let l = load(data, &cfg)?;
            let spec = find_split(&l.splits, split_name)?;
            let k = g.factor(cfg.period).map_err(|e| usage(e.to_string()))?;
            let period = cfg.period / k;
            let (train, test) = split(&l.frame, spec)?;
            let s = build_summing_matrix(&l.hierarchy);
            let mut trains = Vec::new();
            let mut bundles = Vec::new();
            let mut h = 0;
            for id in s.row_ids() {
                let y = temporal_aggregate(&train.column(id).expect("frame has every row"), k)?;
                h = temporal_aggregate(&test.column(id).expect("frame has every row"), k)?.len();
                bundles.push(forecast_base(family, &y, h, period, &cfg.models)?);
                trains.push(y);
            }
            let m = s.n_rows();
            let base_m = DMatrix::from_fn(h, m, |t, j| bundles[j].point[t]);
            let n = bundles[0].residuals.len();
            let resid = DMatrix::from_fn(n, m, |t, j| bundles[j].residuals[t].unwrap_or(f64::NAN));
            let rec = match method {
                ReconcileMethod::BottomUp => bottom_up(&s, &base_m)?,
                ReconcileMethod::TopDown => {
                    let leaves = trains[m - s.n_bottom()..].to_vec();
                    let props = proportions_from_history(&trains[0], &leaves, cfg.proportions)?;
                    let total: Vec<f64> = base_m.column(0).iter().copied().collect();
                    top_down(&s, &total, &props)?
                }
                ReconcileMethod::Mint(kind) => {
                    let w = estimate_w(&resid, &s, kind)?;
                    if kind == WeightKind::Shrinkage {
                        eprintln!("lambda={}", w.lambda.unwrap_or(f64::NAN));
                    }
                    mint_reconcile(&s, &w, &base_m)?
                }
            };
            println!("step,{}", s.row_ids().join(","));
            for t in 0..h {
                let row: Vec<String> = (0..m).map(|j| format!("{}", rec.point[(t, j)])).collect();
                println!("{},{}", t + 1, row.join(","));
            }
        }
        Command::Evaluate {
            data,
            granularities,
            out,
        } => {
            if let Some(g) = granularities {
                cfg.granularities = Granularity::parse_list(g).map_err(|e| usage(e.to_string()))?;
            }
            let l = load(data, &cfg)?;
            let run = run_grid(&l.frame, &l.hierarchy, &l.splits, &cfg)?;
            write_grid(out, &run, &cfg)?;
            let na = run.table.records.iter().filter(|r| r.mase.value().is_none()).count();
            eprintln!("{} cells, {} flagged, written to {}", run.table.len(), na, out.display());
        }
        Command::Temporal {
            data,
            node,
            split: split_name,
            out,
        } => {
            let l = load(data, &cfg)?;
            check_node(&l.hierarchy, node)?;
            let spec = find_split(&l.splits, split_name)?;
            let table = run_temporal(&l.frame, node, spec, &cfg)?;
            let preamble = vec![cfg.header_line()];
            let wide = table.to_wide_string(Some(2), &preamble);
            if let Some(dir) = out {
                write_file(
                    &dir.join(format!("temporal_{node}_{split_name}_long.csv")),
                    &table.to_long_string(&preamble),
                )?;
                write_file(&dir.join(format!("temporal_{node}_{split_name}_wide.csv")), &wide)?;
            }
            print!("{wide}");
        }
        Command::Features { data, accuracy, out } | Command::Pca { data, accuracy, out } => {
            let l = load(data, &cfg)?;
            let table = accuracy_for(&l, accuracy, &cfg)?;
            let fr = run_features(&l.frame, &l.hierarchy, &l.splits, &table, &cfg)?;
            let written = if matches!(cli.command, Command::Features { .. }) {
                write_features(out, &fr, &cfg)?
            } else {
                write_pca(out, &fr, &cfg)?
            };
            for (node, g, why) in &fr.skipped {
                eprintln!("skipped {node} at {g}: {why}");
            }
            println!("file");
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Pivot {
            input,
            reverse,
            decimals,
        } => {
            let file = fs::File::open(input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            if *reverse {
                print!("{}", AccuracyTable::read_wide(file)?.to_long_string(&[]));
            } else {
                print!("{}", AccuracyTable::read_long(file)?.to_wide_string(*decimals, &[]));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
