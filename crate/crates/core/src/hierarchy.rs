//! Node hierarchies and their summing matrix.
//!
//! A hierarchy is a single rooted tree. Every observation vector over all
//! nodes satisfies `y_t = S b_t`, where `b_t` holds the leaf values and `S`
//! is the 0/1 summing matrix built here. Rows of `S` are ordered root first,
//! then internal nodes level by level in declaration order, and finally the
//! leaves in `bottom_order`, so the last `m_k` rows form the identity.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default relative tolerance used by [`check_coherence`] callers.
pub const DEFAULT_COHERENCE_TOL: f64 = 1e-8;

const SRI_LANKA_HIERARCHY: &str = include_str!("../data/sri_lanka/hierarchy.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub level: usize,
    pub parent: Option<String>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, level: usize, parent: Option<&str>) -> Self {
        Self {
            id: id.into(),
            level,
            parent: parent.map(str::to_owned),
        }
    }
}

/// A validated single-root tree of named nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchySpec {
    nodes: Vec<NodeSpec>,
    bottom_order: Vec<String>,
    index: HashMap<String, usize>,
}

impl HierarchySpec {
    /// Validates `nodes` against the tree invariants and fixes the leaf order.
    pub fn new(nodes: Vec<NodeSpec>, bottom_order: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(Error::validation("empty node_id"));
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate node_id `{}`", node.id)));
            }
        }

        let roots: Vec<&NodeSpec> = nodes.iter().filter(|n| n.parent.is_none()).collect();
        match roots.len() {
            0 => return Err(Error::Structure("no root node (every node has a parent)".into())),
            1 => {}
            k => {
                return Err(Error::Structure(format!(
                    "{k} root nodes ({}); exactly one is required",
                    roots.iter().map(|n| n.id.as_str()).collect::<Vec<_>>().join(",")
                )))
            }
        }

        for node in &nodes {
            if let Some(parent) = &node.parent {
                if !index.contains_key(parent) {
                    return Err(Error::Structure(format!(
                        "node `{}` references unknown parent `{parent}`",
                        node.id
                    )));
                }
            }
        }

        // Walking up from any node must reach the root within n steps.
        for node in &nodes {
            let mut current = node;
            let mut steps = 0;
            while let Some(parent) = &current.parent {
                steps += 1;
                if steps > nodes.len() {
                    return Err(Error::Structure(format!(
                        "cycle in parent links through `{}`",
                        node.id
                    )));
                }
                current = &nodes[index[parent]];
            }
        }

        for node in &nodes {
            match &node.parent {
                None if node.level != 0 => {
                    return Err(Error::validation(format!(
                        "root `{}` must have level 0, found {}",
                        node.id, node.level
                    )))
                }
                Some(parent) => {
                    let parent_level = nodes[index[parent]].level;
                    if node.level != parent_level + 1 {
                        return Err(Error::validation(format!(
                            "node `{}` has level {} but its parent `{parent}` has level {parent_level}",
                            node.id, node.level
                        )));
                    }
                }
                None => {}
            }
        }

        let has_child: HashSet<&str> = nodes.iter().filter_map(|n| n.parent.as_deref()).collect();
        let leaves: HashSet<&str> = nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| !has_child.contains(id))
            .collect();
        let mut seen = HashSet::new();
        for id in &bottom_order {
            if !leaves.contains(id.as_str()) {
                return Err(Error::validation(format!(
                    "bottom_order entry `{id}` is not a leaf"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("leaf `{id}` repeated in bottom_order")));
            }
        }
        if seen.len() != leaves.len() {
            let mut missing: Vec<&str> = leaves.difference(&seen).copied().collect();
            missing.sort_unstable();
            return Err(Error::validation(format!(
                "bottom_order is missing leaves: {}",
                missing.join(",")
            )));
        }

        Ok(Self {
            nodes,
            bottom_order,
            index,
        })
    }

    /// Builds a hierarchy whose leaf order is the declaration order of the leaves.
    pub fn from_nodes(nodes: Vec<NodeSpec>) -> Result<Self> {
        let has_child: HashSet<&str> = nodes.iter().filter_map(|n| n.parent.as_deref()).collect();
        let bottom = nodes
            .iter()
            .filter(|n| !has_child.contains(n.id.as_str()))
            .map(|n| n.id.clone())
            .collect();
        Self::new(nodes, bottom)
    }

    /// A one-node tree whose root is also its only leaf.
    pub fn single(id: impl Into<String>) -> Self {
        Self::from_nodes(vec![NodeSpec::new(id, 0, None)]).expect("single node is a valid tree")
    }

    /// Reads the `node_id,level,parent` CSV format (empty parent marks the root).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["node_id", "level", "parent"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::parse(
                "hierarchy header",
                format!("expected `node_id,level,parent`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut nodes = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let level = record[1].parse::<usize>().map_err(|e| {
                Error::parse(format!("hierarchy row {}", line + 2), format!("level `{}`: {e}", &record[1]))
            })?;
            let parent = (!record[2].is_empty()).then(|| record[2].to_owned());
            nodes.push(NodeSpec {
                id: record[0].to_owned(),
                level,
                parent,
            });
        }
        Self::from_nodes(nodes)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    /// Country / 9 provinces / 26 districts of Sri Lanka, 36 nodes.
    pub fn sri_lanka() -> Self {
        Self::from_csv_reader(SRI_LANKA_HIERARCHY.as_bytes()).expect("bundled hierarchy is valid")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("node_id,level,parent\n");
        for n in &self.nodes {
            out.push_str(&format!("{},{},{}\n", n.id, n.level, n.parent.as_deref().unwrap_or("")));
        }
        out
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn bottom_order(&self) -> &[String] {
        &self.bottom_order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn root(&self) -> &NodeSpec {
        self.nodes.iter().find(|n| n.parent.is_none()).expect("validated tree has a root")
    }

    pub fn max_level(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        !self.nodes.iter().any(|n| n.parent.as_deref() == Some(id))
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.parent.as_deref() == Some(id))
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Node ids at `level`, in declaration order (leaves included).
    pub fn nodes_at_level(&self, level: usize) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.level == level)
            .map(|n| n.id.as_str())
            .collect()
    }

    /// The leaves in `bottom_order` that descend from (or equal) `id`.
    pub fn leaf_descendants(&self, id: &str) -> Vec<&str> {
        self.bottom_order
            .iter()
            .filter(|leaf| self.is_ancestor_or_self(id, leaf))
            .map(String::as_str)
            .collect()
    }

    fn is_ancestor_or_self(&self, ancestor: &str, id: &str) -> bool {
        let mut current = Some(id);
        while let Some(c) = current {
            if c == ancestor {
                return true;
            }
            current = self.node(c).and_then(|n| n.parent.as_deref());
        }
        false
    }

    /// Row order of the summing matrix: internal nodes by level, then leaves.
    pub fn row_order(&self) -> Vec<String> {
        let leaves: HashSet<&str> = self.bottom_order.iter().map(String::as_str).collect();
        let mut rows = Vec::with_capacity(self.nodes.len());
        for level in 0..=self.max_level() {
            rows.extend(
                self.nodes
                    .iter()
                    .filter(|n| n.level == level && !leaves.contains(n.id.as_str()))
                    .map(|n| n.id.clone()),
            );
        }
        rows.extend(self.bottom_order.iter().cloned());
        rows
    }
}

/// Dense `m × m_k` aggregation matrix with its row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SummingMatrix {
    matrix: DMatrix<f64>,
    row_ids: Vec<String>,
    leaf_sets: Vec<Vec<usize>>,
    /// Row indices of each row's direct children; `None` for non-tree layouts.
    children: Option<Vec<Vec<usize>>>,
}

impl SummingMatrix {
    /// Assembles `S` from the leaf columns each row sums over. The last
    /// `n_bottom` rows must be the unit rows `0..n_bottom` in order.
    pub(crate) fn from_leaf_sets(
        row_ids: Vec<String>,
        leaf_sets: Vec<Vec<usize>>,
        n_bottom: usize,
        children: Option<Vec<Vec<usize>>>,
    ) -> Self {
        let m = row_ids.len();
        debug_assert_eq!(leaf_sets.len(), m);
        let mut matrix = DMatrix::zeros(m, n_bottom);
        for (r, cols) in leaf_sets.iter().enumerate() {
            for &c in cols {
                matrix[(r, c)] = 1.0;
            }
        }
        Self {
            matrix,
            row_ids,
            leaf_sets,
            children,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Total node count `m`.
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Bottom-level count `m_k`.
    pub fn n_bottom(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    /// Leaf columns summed by row `row`.
    pub fn leaf_set(&self, row: usize) -> &[usize] {
        &self.leaf_sets[row]
    }

    /// `S · 1`: how many leaves each row aggregates.
    pub fn row_sums(&self) -> Vec<f64> {
        self.leaf_sets.iter().map(|s| s.len() as f64).collect()
    }

    pub fn is_bottom_row(&self, row: usize) -> bool {
        row >= self.n_rows() - self.n_bottom()
    }

    /// Sums one bottom vector into all rows.
    pub fn aggregate_vector(&self, bottom: &[f64]) -> Result<Vec<f64>> {
        if bottom.len() != self.n_bottom() {
            return Err(Error::dims(format!("{} bottom values", self.n_bottom()), bottom.len()));
        }
        Ok(self
            .leaf_sets
            .iter()
            .map(|cols| cols.iter().map(|&c| bottom[c]).sum())
            .collect())
    }
}

/// Builds `S` for `spec`. Deterministic for a given spec.
pub fn build_summing_matrix(spec: &HierarchySpec) -> SummingMatrix {
    let row_ids = spec.row_order();
    let leaf_col: HashMap<&str, usize> = spec
        .bottom_order()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let row_of: HashMap<&str, usize> = row_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let leaf_sets = row_ids
        .iter()
        .map(|id| {
            spec.leaf_descendants(id)
                .into_iter()
                .map(|leaf| leaf_col[leaf])
                .collect()
        })
        .collect();
    let children = row_ids
        .iter()
        .map(|id| spec.children(id).into_iter().map(|c| row_of[c]).collect())
        .collect();

    SummingMatrix::from_leaf_sets(row_ids, leaf_sets, spec.bottom_order().len(), Some(children))
}

/// Maps a `T × m_k` bottom matrix to the full `T × m` matrix, row by row.
///
/// Each aggregate is a plain sum of the leaf values, so bottom columns are
/// copied through unchanged.
pub fn aggregate(bottom: &DMatrix<f64>, s: &SummingMatrix) -> Result<DMatrix<f64>> {
    if bottom.ncols() != s.n_bottom() {
        return Err(Error::dims(
            format!("{} bottom columns", s.n_bottom()),
            bottom.ncols(),
        ));
    }
    let t = bottom.nrows();
    let mut out = DMatrix::zeros(t, s.n_rows());
    for (r, cols) in s.leaf_sets.iter().enumerate() {
        for i in 0..t {
            out[(i, r)] = cols.iter().map(|&c| bottom[(i, c)]).sum();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeViolation {
    pub node: String,
    /// Row index in the checked matrix (time step).
    pub time: usize,
    pub value: f64,
    pub children_sum: f64,
    /// `|value − children_sum| / max(1, |value|)`.
    pub relative: f64,
    pub passed: bool,
}

/// Worst coherence violation per aggregate node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub tol: f64,
    pub per_node: Vec<NodeViolation>,
}

impl CoherenceReport {
    pub fn passed(&self) -> bool {
        self.per_node.iter().all(|v| v.passed)
    }

    /// The largest violation across all nodes, if any aggregate exists.
    pub fn worst(&self) -> Option<&NodeViolation> {
        self.per_node
            .iter()
            .max_by(|a, b| a.relative.total_cmp(&b.relative))
    }

    pub fn failures(&self) -> impl Iterator<Item = &NodeViolation> {
        self.per_node.iter().filter(|v| !v.passed)
    }
}

/// Compares each aggregate row with the sum of its children (tree layouts)
/// or of its leaves (non-tree layouts such as temporal hierarchies).
pub fn check_coherence(full: &DMatrix<f64>, s: &SummingMatrix, tol: f64) -> Result<CoherenceReport> {
    if full.ncols() != s.n_rows() {
        return Err(Error::dims(format!("{} columns", s.n_rows()), full.ncols()));
    }
    let n_top = s.n_rows() - s.n_bottom();
    let offset = n_top;
    let mut per_node = Vec::with_capacity(n_top);
    for r in 0..n_top {
        let mut worst: Option<NodeViolation> = None;
        for t in 0..full.nrows() {
            let value = full[(t, r)];
            let children_sum: f64 = match &s.children {
                Some(children) => children[r].iter().map(|&c| full[(t, c)]).sum(),
                None => s.leaf_sets[r].iter().map(|&c| full[(t, offset + c)]).sum(),
            };
            let relative = (value - children_sum).abs() / value.abs().max(1.0);
            let relative = if relative.is_nan() { f64::INFINITY } else { relative };
            if worst.as_ref().map_or(true, |w| relative > w.relative) {
                worst = Some(NodeViolation {
                    node: s.row_ids[r].clone(),
                    time: t,
                    value,
                    children_sum,
                    relative,
                    passed: relative <= tol,
                });
            }
        }
        if let Some(w) = worst {
            per_node.push(w);
        }
    }
    Ok(CoherenceReport { tol, per_node })
}
