//! Reconciles incoherent base forecasts with every method and prints the
//! result for one horizon.
//!
//!     cargo run --example reconcile

use hts_core::hierarchy::{build_summing_matrix, HierarchySpec, NodeSpec};
use hts_core::reconcile::{bottom_up, estimate_w, mint_reconcile, top_down, WeightKind};
use nalgebra::DMatrix;

fn main() -> hts_core::Result<()> {
    let h = HierarchySpec::from_nodes(vec![
        NodeSpec::new("Total", 0, None),
        NodeSpec::new("A", 1, Some("Total")),
        NodeSpec::new("B", 1, Some("Total")),
        NodeSpec::new("C", 1, Some("Total")),
    ])?;
    let s = build_summing_matrix(&h);

    // base forecasts that do not add up: 100 vs 30 + 45 + 20
    let base = DMatrix::from_row_slice(1, 4, &[100.0, 30.0, 45.0, 20.0]);
    // in-sample residuals, one row per time point
    let resid = DMatrix::from_row_slice(
        8,
        4,
        &[
            3.0, 1.0, 1.5, 0.2, -2.0, -0.5, -1.0, -0.1, 4.0, 2.0, 1.0, 0.5, -1.0, 0.5, -1.5, 0.3, 2.5, 0.5, 1.5,
            -0.2, -3.5, -1.5, -1.0, -0.4, 1.0, 0.2, 0.6, 0.1, -0.5, -0.1, -0.3, 0.2,
        ],
    );

    println!("method      Total      A      B      C");
    let show = |name: &str, p: &DMatrix<f64>| {
        println!("{name:<10} {:>6.2} {:>6.2} {:>6.2} {:>6.2}", p[(0, 0)], p[(0, 1)], p[(0, 2)], p[(0, 3)]);
    };
    show("base", &base);
    show("bup", &bottom_up(&s, &base)?.point);
    show("top", &top_down(&s, &[100.0], &[0.3, 0.5, 0.2])?.point);
    for kind in WeightKind::ALL {
        let w = estimate_w(&resid, &s, kind)?;
        let r = mint_reconcile(&s, &w, &base)?;
        show(kind.tag(), &r.point);
        if let Some(l) = w.lambda {
            println!("           shrinkage lambda = {l:.3}");
        }
    }
    Ok(())
}
