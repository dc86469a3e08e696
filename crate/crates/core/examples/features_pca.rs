//! Extracts features from a handful of synthetic series and projects them
//! onto the first two principal components.
//!
//!     cargo run --example features_pca

use hts_core::features::{compute_features, pca, FEATURE_NAMES};
use nalgebra::DMatrix;

fn main() -> hts_core::Result<()> {
    let m = 12;
    let mut rows = Vec::new();
    for i in 0..8 {
        let amp = i as f64 * 3.0;
        let slope = (8 - i) as f64 * 0.2;
        let y: Vec<f64> = (0..120)
            .map(|t| {
                50.0 + slope * t as f64
                    + amp * (2.0 * std::f64::consts::PI * t as f64 / m as f64).sin()
                    + ((t * (i + 3) * 101) % 17) as f64
            })
            .collect();
        let f = compute_features(&y, m)?;
        println!(
            "series {i}: trend {:.2} seasonal {:.2} entropy {:.2}",
            f.get("trend_strength").unwrap_or(f64::NAN),
            f.get("seasonal_strength").unwrap_or(f64::NAN),
            f.get("entropy").unwrap_or(f64::NAN)
        );
        rows.push(f);
    }

    // keep features present for every series
    let cols: Vec<usize> = (0..FEATURE_NAMES.len())
        .filter(|&j| rows.iter().all(|f| f.values()[j].is_some()))
        .collect();
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, c| rows[i].values()[cols[c]].unwrap());
    let res = pca(&x)?;
    println!(
        "PC1 {:.1}%  PC2 {:.1}%  ({} columns dropped)",
        100.0 * res.explained_variance_ratio[0],
        100.0 * res.explained_variance_ratio[1],
        res.dropped_columns.len()
    );
    for i in 0..rows.len() {
        println!("series {i}: ({:.2}, {:.2})", res.scores[(i, 0)], res.scores[(i, 1)]);
    }
    Ok(())
}
