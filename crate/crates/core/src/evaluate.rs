//! MASE scoring and accuracy tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Mean absolute scaled error. The scale is the in-sample seasonal naive
/// MAE over `train` with period `m`.
pub fn mase(actual: &[f64], forecast: &[f64], train: &[f64], m: usize) -> Result<f64> {
    if actual.len() != forecast.len() {
        return Err(Error::dims(format!("{} forecasts", actual.len()), forecast.len()));
    }
    if actual.is_empty() {
        return Err(Error::validation("empty evaluation window"));
    }
    let q = scale(train, m)?;
    let mae = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum::<f64>() / actual.len() as f64;
    Ok(mae / q)
}

/// `Q = (1/(T−m)) Σ |y_t − y_{t−m}|`.
pub fn scale(train: &[f64], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::validation("seasonal period must be >= 1"));
    }
    if train.len() <= m {
        return Err(Error::TooShort(format!("MASE needs T > m ({} <= {m})", train.len())));
    }
    let q = (m..train.len()).map(|t| (train[t] - train[t - m]).abs()).sum::<f64>() / (train.len() - m) as f64;
    if q == 0.0 {
        return Err(Error::Degenerate("seasonal naive scale is zero".into()));
    }
    if !q.is_finite() {
        return Err(Error::Numerical("non-finite MASE scale".into()));
    }
    Ok(q)
}

/// A table entry: a score, or the reason it is missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Na(String),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            Cell::Na(_) => None,
        }
    }

    pub fn na(reason: impl fmt::Display) -> Self {
        // reasons live inside a CSV field
        let reason: String = reason
            .to_string()
            .chars()
            .map(|c| if c == ',' || c == '\n' || c == '"' { ';' } else { c })
            .collect();
        Cell::Na(reason)
    }

    pub fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) => Cell::Value(v),
            Err(e) => Cell::na(e),
        }
    }

    /// Formats a value with `decimals` places, or full precision when `None`.
    pub fn render(&self, decimals: Option<usize>) -> String {
        match (self, decimals) {
            (Cell::Value(v), Some(d)) => format!("{v:.d$}"),
            (Cell::Value(v), None) => format!("{v}"),
            (Cell::Na(r), _) => format!("NA:{r}"),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(reason) = s.strip_prefix("NA:") {
            return Ok(Cell::Na(reason.to_string()));
        }
        if s == "NA" {
            return Ok(Cell::Na(String::new()));
        }
        s.parse::<f64>()
            .map(Cell::Value)
            .map_err(|e| Error::parse("mase cell", format!("`{s}`: {e}")))
    }
}

/// Column order of the spatial report.
pub const METHOD_ORDER: [&str; 19] = [
    "arm", "snv", "nve", "ets", "avg", "bup", "top", "ols", "mit", "var", "stc", "cov", "ebup", "etop", "eols", "emit",
    "evar", "estc", "ecov",
];

fn method_rank(method: &str) -> (usize, String) {
    let rank = METHOD_ORDER.iter().position(|m| *m == method).unwrap_or(METHOD_ORDER.len());
    (rank, method.to_string())
}

/// Orders method names by the report header, unknown names last and sorted.
pub fn sort_methods(methods: &mut [String]) {
    methods.sort_by_key(|m| method_rank(m));
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRecord {
    pub split: String,
    pub granularity: String,
    pub node: String,
    pub method: String,
    pub mase: Cell,
}

/// Long-format accuracy results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyTable {
    pub records: Vec<AccuracyRecord>,
}

pub const LONG_HEADER: &str = "split,granularity,node_id,method,mase";

impl AccuracyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, split: &str, granularity: &str, node: &str, method: &str, mase: Cell) {
        self.records.push(AccuracyRecord {
            split: split.into(),
            granularity: granularity.into(),
            node: node.into(),
            method: method.into(),
            mase,
        });
    }

    pub fn extend(&mut self, other: AccuracyTable) {
        self.records.extend(other.records);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, split: &str, granularity: &str, node: &str, method: &str) -> Option<&Cell> {
        self.records
            .iter()
            .find(|r| r.split == split && r.granularity == granularity && r.node == node && r.method == method)
            .map(|r| &r.mase)
    }

    /// Records of one `(split, granularity)` block.
    pub fn block(&self, split: &str, granularity: &str) -> AccuracyTable {
        AccuracyTable {
            records: self
                .records
                .iter()
                .filter(|r| r.split == split && r.granularity == granularity)
                .cloned()
                .collect(),
        }
    }

    /// Distinct `(split, granularity)` pairs in first-seen order.
    pub fn blocks(&self) -> Vec<(String, String)> {
        let mut seen = Vec::new();
        for r in &self.records {
            let key = (r.split.clone(), r.granularity.clone());
            if !seen.contains(&key) {
                seen.push(key);
            }
        }
        seen
    }

    /// Long CSV, values at full precision. `preamble` lines are written first
    /// as `# ` comments.
    pub fn write_long<W: Write>(&self, mut out: W, preamble: &[String]) -> Result<()> {
        let mut s = String::new();
        for line in preamble {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str(LONG_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.split, r.granularity, r.node, r.method, r.mase
            ));
        }
        out.write_all(s.as_bytes())
            .map_err(|e| Error::io("<accuracy output>", e))
    }

    pub fn to_long_string(&self, preamble: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_long(&mut buf, preamble).expect("writing to memory");
        String::from_utf8(buf).expect("utf8")
    }

    pub fn read_long<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected: Vec<&str> = LONG_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::parse("accuracy csv", format!("expected header `{LONG_HEADER}`")));
        }
        let mut table = AccuracyTable::new();
        for row in rdr.records() {
            let row = row?;
            table.push(&row[0], &row[1], &row[2], &row[3], row[4].parse()?);
        }
        Ok(table)
    }

    /// Wide layout: one row per `(split, granularity, node)`, one column per
    /// method in header order. Absent entries are empty.
    pub fn to_wide_string(&self, decimals: Option<usize>, preamble: &[String]) -> String {
        let mut methods: Vec<String> = self
            .records
            .iter()
            .map(|r| r.method.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        sort_methods(&mut methods);
        let mut rows: Vec<(String, String, String)> = Vec::new();
        let mut cells: BTreeMap<(String, String, String, String), &Cell> = BTreeMap::new();
        for r in &self.records {
            let key = (r.split.clone(), r.granularity.clone(), r.node.clone());
            if !rows.contains(&key) {
                rows.push(key);
            }
            cells.insert((r.split.clone(), r.granularity.clone(), r.node.clone(), r.method.clone()), &r.mase);
        }
        let mut s = String::new();
        for line in preamble {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str("split,granularity,node_id");
        for m in &methods {
            s.push(',');
            s.push_str(m);
        }
        s.push('\n');
        for (split, gran, node) in rows {
            s.push_str(&format!("{split},{gran},{node}"));
            for m in &methods {
                s.push(',');
                if let Some(c) = cells.get(&(split.clone(), gran.clone(), node.clone(), m.clone())) {
                    s.push_str(&c.render(decimals));
                }
            }
            s.push('\n');
        }
        s
    }

    /// Inverse of [`to_wide_string`](Self::to_wide_string); empty cells are skipped.
    pub fn read_wide<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "split" || &headers[1] != "granularity" || &headers[2] != "node_id" {
            return Err(Error::parse("wide accuracy csv", "expected `split,granularity,node_id,...` header"));
        }
        let methods: Vec<String> = headers.iter().skip(3).map(String::from).collect();
        let mut table = AccuracyTable::new();
        for row in rdr.records() {
            let row = row?;
            for (i, m) in methods.iter().enumerate() {
                let field = row.get(3 + i).unwrap_or("");
                if field.trim().is_empty() {
                    continue;
                }
                table.push(&row[0], &row[1], &row[2], m, field.parse()?);
            }
        }
        Ok(table)
    }
}

/// Per node, the method with the smallest MASE. Ties go to the earlier
/// method in the report header; NA cells never win.
pub fn best_method(table: &AccuracyTable) -> Result<BTreeMap<String, (String, f64)>> {
    let mut best: BTreeMap<String, (String, f64)> = BTreeMap::new();
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    for r in &table.records {
        nodes.insert(r.node.clone());
        let Some(v) = r.mase.value() else { continue };
        match best.get(&r.node) {
            Some((m, bv)) if (*bv, method_rank(m)) <= (v, method_rank(&r.method)) => {}
            _ => {
                best.insert(r.node.clone(), (r.method.clone(), v));
            }
        }
    }
    if let Some(n) = nodes.iter().find(|n| !best.contains_key(*n)) {
        return Err(Error::validation(format!("node `{n}` has no scored method")));
    }
    Ok(best)
}
