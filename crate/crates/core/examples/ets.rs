//! Selects an exponential smoothing model by AICc on a seasonal series.
//!
//!     cargo run --example ets

use hts_core::forecasters::{fit_ets, forecast_ets, EtsOptions};

fn main() -> hts_core::Result<()> {
    let pattern = [12.0, 18.0, 25.0, 15.0];
    let y: Vec<f64> = (0..48)
        .map(|t| pattern[t % 4] + 0.4 * t as f64 + ((t * 7919) % 13) as f64 / 6.0)
        .collect();

    let model = fit_ets(&y, 4, &EtsOptions::default())?;
    println!("{}", model.describe());
    println!("params: {:?}", model.params());

    let f = forecast_ets(&model, &y, 8)?;
    for (h, v) in f.point.iter().enumerate() {
        println!("h={} {v:.2}", h + 1);
    }
    Ok(())
}
