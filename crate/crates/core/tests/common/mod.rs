#![allow(dead_code)]

use std::path::PathBuf;

use hts_core::config::RunConfig;
use hts_core::dataset::{ingest_csv, SeriesFrame, SplitSpec};
use hts_core::hierarchy::{HierarchySpec, NodeSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// A ragged random tree: leaves are split into 2-4 children until the leaf
/// count would exceed `max_leaves`.
pub fn random_tree(rng: &mut ChaCha8Rng, max_leaves: usize) -> HierarchySpec {
    let target = rng.gen_range(2..=max_leaves);
    let mut nodes = vec![NodeSpec::new("n0", 0, None)];
    let mut leaves = vec![0usize];
    loop {
        let k = rng.gen_range(2..=4);
        if leaves.len() - 1 + k > target {
            if leaves.len() >= 2 {
                break;
            }
            continue;
        }
        let pick = rng.gen_range(0..leaves.len());
        let parent = leaves.swap_remove(pick);
        let (pid, plevel) = (nodes[parent].id.clone(), nodes[parent].level);
        for _ in 0..k {
            let id = format!("n{}", nodes.len());
            nodes.push(NodeSpec::new(id, plevel + 1, Some(&pid)));
            leaves.push(nodes.len() - 1);
        }
    }
    HierarchySpec::from_nodes(nodes).expect("generated tree is valid")
}

pub fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn toy_dir() -> PathBuf {
    core_dir().join("data/toy")
}

pub fn golden(name: &str) -> PathBuf {
    core_dir().join("tests/golden").join(name)
}

pub struct Toy {
    pub hierarchy: HierarchySpec,
    pub frame: SeriesFrame,
    pub splits: Vec<SplitSpec>,
    pub config: RunConfig,
}

pub fn toy() -> Toy {
    let dir = toy_dir();
    let config = RunConfig::from_path(dir.join("config.txt")).unwrap();
    let hierarchy = HierarchySpec::from_csv_path(dir.join("hierarchy.csv")).unwrap();
    let frame = ingest_csv(dir.join("data.csv"), &hierarchy, config.period).unwrap();
    let splits = SplitSpec::read_path(dir.join("splits.csv")).unwrap();
    Toy {
        hierarchy,
        frame,
        splits,
        config,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
