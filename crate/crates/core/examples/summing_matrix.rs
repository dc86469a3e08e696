//! Builds the summing matrix for a small two level tree and checks that
//! aggregated bottom series are coherent.
//!
//!     cargo run --example summing_matrix

use hts_core::hierarchy::{aggregate, build_summing_matrix, check_coherence, HierarchySpec, NodeSpec};
use nalgebra::DMatrix;

fn main() -> hts_core::Result<()> {
    let nodes = vec![
        NodeSpec::new("Total", 0, None),
        NodeSpec::new("North", 1, Some("Total")),
        NodeSpec::new("South", 1, Some("Total")),
        NodeSpec::new("N1", 2, Some("North")),
        NodeSpec::new("N2", 2, Some("North")),
        NodeSpec::new("S1", 2, Some("South")),
    ];
    let h = HierarchySpec::from_nodes(nodes)?;
    let s = build_summing_matrix(&h);
    println!("rows: {:?}", s.row_ids());
    println!("{}", s.matrix());

    let bottom = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let full = aggregate(&bottom, &s)?;
    println!("aggregated:{full}");
    let report = check_coherence(&full, &s, 1e-10)?;
    println!("coherent: {}", report.passed());

    // the bundled 36 node country / province / district tree
    let sl = build_summing_matrix(&HierarchySpec::sri_lanka());
    println!("Sri Lanka: {} rows x {} leaves", sl.n_rows(), sl.n_bottom());
    Ok(())
}
