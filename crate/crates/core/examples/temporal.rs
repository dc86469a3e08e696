//! Temporal hierarchy forecasts for a monthly series: each aggregation
//! level is forecast separately and the levels are reconciled together.
//!
//!     cargo run --example temporal

use hts_core::forecasters::{BaseMethod, ModelConfig};
use hts_core::reconcile::WeightKind;
use hts_core::temporal::thief_forecast;

fn main() -> hts_core::Result<()> {
    let y: Vec<f64> = (0..96)
        .map(|t| 100.0 + 20.0 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).cos() + ((t * 37) % 11) as f64)
        .collect();
    let f = thief_forecast(&y, 12, BaseMethod::Ets, WeightKind::Structural, &ModelConfig::default())?;
    for level in &f.levels {
        let base: f64 = level.base.iter().sum();
        let rec: f64 = level.reconciled.iter().sum();
        println!(
            "k={:>2} periods={:>2} base total {base:>8.2} reconciled total {rec:>8.2}{}",
            level.factor,
            level.reconciled.len(),
            level.fallback.as_ref().map(|e| format!(" (mean fallback: {e})")).unwrap_or_default()
        );
    }
    Ok(())
}
