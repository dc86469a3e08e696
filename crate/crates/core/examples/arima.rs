//! Automatic ARIMA order selection on a simulated AR(1) series, then a fixed
//! order fit for comparison.
//!
//!     cargo run --example arima

use hts_core::forecasters::{fit_arima, fit_arima_order, forecast_arima, ArimaLimits, ArimaOrder};

fn main() -> hts_core::Result<()> {
    // AR(1) with phi = 0.6 around 20, driven by a small deterministic generator
    let mut state = 12345u64;
    let mut noise = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut y = vec![20.0];
    for _ in 1..200 {
        let last = y[y.len() - 1];
        y.push(20.0 + 0.6 * (last - 20.0) + 4.0 * noise());
    }

    let limits = ArimaLimits::default();
    let auto = fit_arima(&y, 1, &limits)?;
    println!("auto:  {}", auto.describe());
    let fixed = fit_arima_order(&y, ArimaOrder::new(1, 0, 0), true, &limits)?;
    println!("fixed: {}", fixed.describe());

    let f = forecast_arima(&auto, &y, 6)?;
    println!("forecasts: {:?}", f.point.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    Ok(())
}
