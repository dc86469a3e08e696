//! Scores the three benchmark forecasts on the bundled toy data and prints
//! the wide table.
//!
//!     cargo run --example evaluate

use std::path::Path;

use hts_core::config::RunConfig;
use hts_core::dataset::{ingest_csv, split, temporal_aggregate, SplitSpec};
use hts_core::evaluate::{mase, AccuracyTable, Cell};
use hts_core::forecasters::{forecast_base, BaseMethod};
use hts_core::hierarchy::HierarchySpec;

fn main() -> hts_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let config = RunConfig::from_path(dir.join("config.txt"))?;
    let h = HierarchySpec::from_csv_path(dir.join("hierarchy.csv"))?;
    let frame = ingest_csv(dir.join("data.csv"), &h, config.period)?;
    let splits = SplitSpec::read_path(dir.join("splits.csv"))?;

    let mut table = AccuracyTable::new();
    for spec in &splits {
        let (train, test) = split(&frame, spec)?;
        for g in &config.granularities {
            let k = g.factor(config.period)?;
            let m = config.period / k;
            for node in h.row_order() {
                let y = temporal_aggregate(&train.column(&node).unwrap(), k)?;
                let actual = temporal_aggregate(&test.column(&node).unwrap(), k)?;
                for method in [BaseMethod::Average, BaseMethod::Naive, BaseMethod::SeasonalNaive] {
                    let cell = forecast_base(method, &y, actual.len(), m, &config.models)
                        .and_then(|b| mase(&actual, &b.point, &y, m));
                    table.push(&spec.name, g.tag(), &node, method.tag(), Cell::from_result(cell));
                }
            }
        }
    }
    print!("{}", table.to_wide_string(Some(2), &[]));
    Ok(())
}
