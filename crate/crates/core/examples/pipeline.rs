//! Full grid on the toy dataset: every split and granularity, base and
//! reconciled forecasts, then features and PCA. Files go to the directory
//! given as the first argument (default `toy_output`).
//!
//!     cargo run --example pipeline -- /tmp/toy_output

use std::path::{Path, PathBuf};

use hts_core::config::RunConfig;
use hts_core::dataset::{ingest_csv, SplitSpec};
use hts_core::hierarchy::HierarchySpec;
use hts_core::runner::{run_features, run_grid, write_features, write_grid};

fn main() -> hts_core::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "toy_output".into()).into();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let config = RunConfig::from_path(dir.join("config.txt"))?;
    let h = HierarchySpec::from_csv_path(dir.join("hierarchy.csv"))?;
    let frame = ingest_csv(dir.join("data.csv"), &h, config.period)?;
    let splits = SplitSpec::read_path(dir.join("splits.csv"))?;

    let run = run_grid(&frame, &h, &splits, &config)?;
    write_grid(&out, &run, &config)?;
    let failed = run.table.records.iter().filter(|r| r.mase.value().is_none()).count();
    println!("{} cells ({failed} not available)", run.table.len());

    let features = run_features(&frame, &h, &splits, &run.table, &config)?;
    for path in write_features(&out, &features, &config)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
