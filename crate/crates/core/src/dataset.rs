//! Count series ingestion, calendar addressing, train/test splits and
//! non-overlapping temporal aggregation.
//!
//! The calendar has exactly `period` slots per year (52 for weekly data),
//! addressed as `(year, index)` with `index` in `1..=period`.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hierarchy::{aggregate, build_summing_matrix, HierarchySpec};

/// A `(year, index-within-year)` calendar slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub year: i32,
    pub index: u32,
}

impl Period {
    pub fn new(year: i32, index: u32) -> Self {
        Self { year, index }
    }

    /// Position on a calendar with `per_year` slots.
    pub fn ordinal(self, per_year: usize) -> i64 {
        self.year as i64 * per_year as i64 + (self.index as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64, per_year: usize) -> Self {
        let per_year = per_year as i64;
        Self {
            year: ordinal.div_euclid(per_year) as i32,
            index: (ordinal.rem_euclid(per_year) + 1) as u32,
        }
    }

    pub fn offset(self, steps: i64, per_year: usize) -> Self {
        Self::from_ordinal(self.ordinal(per_year) + steps, per_year)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:02}", self.year, self.index)
    }
}

impl FromStr for Period {
    type Err = Error;

    /// Parses `YYYY-WW`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, w) = s
            .split_once('-')
            .ok_or_else(|| Error::parse("calendar token", format!("`{s}` is not YYYY-WW")))?;
        let year = y
            .parse::<i32>()
            .map_err(|e| Error::parse("calendar token", format!("year in `{s}`: {e}")))?;
        let index = w
            .parse::<u32>()
            .map_err(|e| Error::parse("calendar token", format!("index in `{s}`: {e}")))?;
        if index == 0 {
            return Err(Error::parse("calendar token", format!("index in `{s}` must be >= 1")));
        }
        Ok(Self { year, index })
    }
}

/// Reporting granularity of a series built from base-period observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    Weekly,
    BiWeekly,
    /// Four base periods (a 4-week "month" on weekly data).
    Monthly,
    Quarterly,
    SemiAnnual,
    Annual,
}

impl Granularity {
    pub const ALL: [Granularity; 6] = [
        Granularity::Weekly,
        Granularity::BiWeekly,
        Granularity::Monthly,
        Granularity::Quarterly,
        Granularity::SemiAnnual,
        Granularity::Annual,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Granularity::Weekly => "w",
            Granularity::BiWeekly => "2w",
            Granularity::Monthly => "m4w",
            Granularity::Quarterly => "q",
            Granularity::SemiAnnual => "sa",
            Granularity::Annual => "a",
        }
    }

    /// Row label used in the temporal report.
    pub fn label(self) -> &'static str {
        match self {
            Granularity::Weekly => "Weekly",
            Granularity::BiWeekly => "Bi-Weekly",
            Granularity::Monthly => "Monthly",
            Granularity::Quarterly => "Quarterly",
            Granularity::SemiAnnual => "Semi-annual",
            Granularity::Annual => "Annual",
        }
    }

    /// Number of base periods per block, given `period` base periods per year.
    ///
    /// Weekly, bi-weekly and monthly are fixed block widths (1, 2, 4);
    /// quarterly, semi-annual and annual are fractions of the year.
    pub fn factor(self, period: usize) -> Result<usize> {
        let k = match self {
            Granularity::Weekly => 1,
            Granularity::BiWeekly => 2,
            Granularity::Monthly => 4,
            Granularity::Quarterly => period / 4,
            Granularity::SemiAnnual => period / 2,
            Granularity::Annual => period,
        };
        if k == 0 || period % k != 0 || (self == Granularity::Quarterly && period % 4 != 0)
            || (self == Granularity::SemiAnnual && period % 2 != 0)
        {
            return Err(Error::validation(format!(
                "granularity `{}` does not divide a {period}-period year",
                self.tag()
            )));
        }
        Ok(k)
    }

    /// Parses a comma separated list such as `w,2w,m4w,q,sa,a`.
    pub fn parse_list(s: &str) -> Result<Vec<Granularity>> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" | "weekly" => Ok(Granularity::Weekly),
            "2w" | "bi-weekly" | "biweekly" => Ok(Granularity::BiWeekly),
            "m4w" | "monthly" => Ok(Granularity::Monthly),
            "q" | "quarterly" => Ok(Granularity::Quarterly),
            "sa" | "semi-annual" => Ok(Granularity::SemiAnnual),
            "a" | "annual" | "yearly" => Ok(Granularity::Annual),
            other => Err(Error::validation(format!("unknown granularity `{other}`"))),
        }
    }
}

/// Labeled, equally spaced, complete count series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    labels: Vec<String>,
    values: DMatrix<f64>,
    period: usize,
    start: Period,
}

impl SeriesFrame {
    pub fn new(labels: Vec<String>, values: DMatrix<f64>, period: usize, start: Period) -> Result<Self> {
        if period == 0 {
            return Err(Error::validation("period must be >= 1"));
        }
        if start.index as usize > period {
            return Err(Error::Calendar(format!("start {start} exceeds a {period}-slot year")));
        }
        if labels.len() != values.ncols() {
            return Err(Error::dims(format!("{} columns", labels.len()), values.ncols()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(format!(
                "value {v} at flat position {i} is not a finite non-negative count"
            )));
        }
        Ok(Self {
            labels,
            values,
            period,
            start,
        })
    }

    /// Frame over all hierarchy nodes (summing-matrix row order) computed
    /// from a `T × m_k` bottom matrix.
    pub fn from_bottom(hierarchy: &HierarchySpec, bottom: &DMatrix<f64>, period: usize, start: Period) -> Result<Self> {
        let s = build_summing_matrix(hierarchy);
        let full = aggregate(bottom, &s)?;
        Self::new(s.row_ids().to_vec(), full, period, start)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn start(&self) -> Period {
        self.start
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn end(&self) -> Period {
        self.time_of(self.len().saturating_sub(1))
    }

    pub fn time_of(&self, row: usize) -> Period {
        self.start.offset(row as i64, self.period)
    }

    pub fn index_of(&self, at: Period) -> Option<usize> {
        if at.index == 0 || at.index as usize > self.period {
            return None;
        }
        let off = at.ordinal(self.period) - self.start.ordinal(self.period);
        (off >= 0 && (off as usize) < self.len()).then_some(off as usize)
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        self.column_index(label)
            .map(|c| self.values.column(c).iter().copied().collect())
    }

    /// Rows `from..to` as a new frame.
    pub fn slice_rows(&self, from: usize, to: usize) -> SeriesFrame {
        let values = self.values.rows(from, to - from).into_owned();
        SeriesFrame {
            labels: self.labels.clone(),
            values,
            period: self.period,
            start: self.time_of(from),
        }
    }

    /// Writes `year,week,<labels...>`.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("year,week,{}\n", self.labels.join(","));
        for r in 0..self.len() {
            let p = self.time_of(r);
            out.push_str(&format!("{},{}", p.year, p.index));
            for c in 0..self.labels.len() {
                out.push_str(&format!(",{}", self.values[(r, c)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a `year,week,<leaf...>` file and aggregates it over `hierarchy`.
pub fn ingest_csv(path: impl AsRef<Path>, hierarchy: &HierarchySpec, period: usize) -> Result<SeriesFrame> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, hierarchy, period)
}

pub fn ingest_reader<R: Read>(reader: R, hierarchy: &HierarchySpec, period: usize) -> Result<SeriesFrame> {
    if period == 0 {
        return Err(Error::validation("period must be >= 1"));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "year" || &headers[1] != "week" {
        return Err(Error::parse("data header", "must start with `year,week`"));
    }
    let mut leaf_cols = Vec::with_capacity(hierarchy.bottom_order().len());
    for leaf in hierarchy.bottom_order() {
        let col = headers
            .iter()
            .position(|h| h == leaf)
            .ok_or_else(|| Error::MissingLeaf(leaf.clone()))?;
        leaf_cols.push(col);
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut start: Option<Period> = None;
    let mut prev: Option<Period> = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |c: usize| record.get(c).unwrap_or("");
        let at = Period::from_str(&format!("{}-{}", field(0), field(1)))
            .map_err(|e| Error::parse(format!("data row {line}"), e.to_string()))?;
        if at.index as usize > period {
            return Err(Error::Calendar(format!(
                "row {line}: index {} exceeds {period} slots per year",
                at.index
            )));
        }
        if let Some(p) = prev {
            if at.ordinal(period) != p.ordinal(period) + 1 {
                return Err(Error::Calendar(format!(
                    "row {line}: {at} does not follow {p} (gap or out of order)"
                )));
            }
        } else {
            start = Some(at);
        }
        prev = Some(at);
        for (&col, leaf) in leaf_cols.iter().zip(hierarchy.bottom_order()) {
            let raw = field(col);
            let v: f64 = raw.parse().map_err(|_| {
                Error::parse(format!("data row {line}"), format!("non-numeric value `{raw}` for `{leaf}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::validation(format!("row {line}: non-finite value for `{leaf}`")));
            }
            if v < 0.0 {
                return Err(Error::validation(format!("row {line}: negative count {v} for `{leaf}`")));
            }
            rows.push(v);
        }
    }
    let start = start.ok_or_else(|| Error::TooShort("data file has no rows".into()))?;
    let n_leaves = leaf_cols.len();
    let bottom = DMatrix::from_row_slice(rows.len() / n_leaves, n_leaves, &rows);
    SeriesFrame::from_bottom(hierarchy, &bottom, period, start)
}

/// A named train/test window pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub name: String,
    pub train_start: Period,
    pub train_end: Period,
    pub test_start: Period,
    pub test_end: Period,
}

impl SplitSpec {
    /// Reads `name,train_start,train_end,test_start,test_end` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Vec<SplitSpec>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["name", "train_start", "train_end", "test_start", "test_end"];
        if headers.len() != 5 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::parse(
                "split header",
                "expected `name,train_start,train_end,test_start,test_end`",
            ));
        }
        let mut out = Vec::new();
        for record in rdr.records() {
            let r = record?;
            out.push(SplitSpec {
                name: r[0].to_owned(),
                train_start: r[1].parse()?,
                train_end: r[2].parse()?,
                test_start: r[3].parse()?,
                test_end: r[4].parse()?,
            });
        }
        Ok(out)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Vec<SplitSpec>> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    /// The four dengue training/test windows (weekly, 52 slots per year).
    pub fn sri_lanka() -> Vec<SplitSpec> {
        Self::read_csv(include_str!("../data/sri_lanka/splits.csv").as_bytes()).expect("bundled splits are valid")
    }
}

/// Contiguous, disjoint train and test slices of `frame`.
pub fn split(frame: &SeriesFrame, spec: &SplitSpec) -> Result<(SeriesFrame, SeriesFrame)> {
    let locate = |p: Period, what: &str| {
        frame.index_of(p).ok_or_else(|| {
            Error::Calendar(format!(
                "split {}: {what} {p} outside frame {}..{}",
                spec.name,
                frame.start(),
                frame.end()
            ))
        })
    };
    let a = locate(spec.train_start, "train_start")?;
    let b = locate(spec.train_end, "train_end")?;
    let c = locate(spec.test_start, "test_start")?;
    let d = locate(spec.test_end, "test_end")?;
    if a > b {
        return Err(Error::Calendar(format!("split {}: train window is empty", spec.name)));
    }
    if c > d {
        return Err(Error::Calendar(format!("split {}: test window is empty", spec.name)));
    }
    if b >= c {
        return Err(Error::Calendar(format!(
            "split {}: train_end {} must precede test_start {}",
            spec.name, spec.train_end, spec.test_start
        )));
    }
    Ok((frame.slice_rows(a, b + 1), frame.slice_rows(c, d + 1)))
}

/// Non-overlapping block sums of width `k`, anchored at the end of the
/// series. The oldest `T mod k` observations are dropped.
pub fn temporal_aggregate(series: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::validation("aggregation factor must be >= 1"));
    }
    if k > series.len() {
        return Err(Error::TooShort(format!(
            "aggregation factor {k} exceeds series length {}",
            series.len()
        )));
    }
    let skip = series.len() % k;
    Ok(series[skip..].chunks_exact(k).map(|c| c.iter().sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{check_coherence, NodeSpec};

    fn two_leaf() -> HierarchySpec {
        HierarchySpec::from_nodes(vec![
            NodeSpec::new("T", 0, None),
            NodeSpec::new("A", 1, Some("T")),
            NodeSpec::new("B", 1, Some("T")),
        ])
        .unwrap()
    }

    #[test]
    fn ingest_two_leaf_totals() {
        let csv = "year,week,A,B\n2020,1,1,2\n2020,2,3,4\n";
        let frame = ingest_reader(csv.as_bytes(), &two_leaf(), 52).unwrap();
        assert_eq!(frame.len(), 2);
        assert_eq!(frame.column("T").unwrap(), [3.0, 7.0]);
        assert_eq!(frame.column("B").unwrap(), [2.0, 4.0]);
    }

    #[test]
    fn ingest_ignores_internal_columns() {
        let csv = "year,week,T,A,B\n2020,1,999,1,2\n";
        let frame = ingest_reader(csv.as_bytes(), &two_leaf(), 52).unwrap();
        assert_eq!(frame.column("T").unwrap(), [3.0]);
    }

    #[test]
    fn ingest_missing_leaf_names_it() {
        let spec = HierarchySpec::sri_lanka();
        let leaves: Vec<&str> = spec.bottom_order().iter().map(String::as_str).filter(|l| *l != "COL").collect();
        let csv = format!("year,week,{}\n2020,1,{}\n", leaves.join(","), vec!["0"; leaves.len()].join(","));
        match ingest_reader(csv.as_bytes(), &spec, 52) {
            Err(Error::MissingLeaf(l)) => assert_eq!(l, "COL"),
            other => panic!("expected MissingLeaf, got {other:?}"),
        }
    }

    #[test]
    fn ingest_errors() {
        let h = two_leaf();
        let gap = "year,week,A,B\n2020,1,1,2\n2020,3,3,4\n";
        assert!(matches!(ingest_reader(gap.as_bytes(), &h, 52), Err(Error::Calendar(_))));
        let nonnum = "year,week,A,B\n2020,1,x,2\n";
        assert!(matches!(ingest_reader(nonnum.as_bytes(), &h, 52), Err(Error::Parse { .. })));
        let missing = "year,week,A,B\n2020,1,,2\n";
        assert!(matches!(ingest_reader(missing.as_bytes(), &h, 52), Err(Error::Parse { .. })));
        let neg = "year,week,A,B\n2020,1,-1,2\n";
        assert!(matches!(ingest_reader(neg.as_bytes(), &h, 52), Err(Error::Validation(_))));
        let wrap = "year,week,A,B\n2020,52,1,2\n2021,1,3,4\n";
        assert_eq!(ingest_reader(wrap.as_bytes(), &h, 52).unwrap().len(), 2);
    }

    #[test]
    fn ingest_is_coherent() {
        let csv = "year,week,A,B\n2020,1,1,2\n2020,2,3,4\n2020,3,0,9\n";
        let frame = ingest_reader(csv.as_bytes(), &two_leaf(), 52).unwrap();
        let s = build_summing_matrix(&two_leaf());
        assert!(check_coherence(frame.values(), &s, 1e-12).unwrap().passed());
    }

    fn weekly_frame(start: Period, n: usize) -> SeriesFrame {
        let values = DMatrix::from_fn(n, 1, |i, _| i as f64);
        SeriesFrame::new(vec!["X".into()], values, 52, start).unwrap()
    }

    #[test]
    fn ts4_test_length() {
        let frame = weekly_frame(Period::new(2006, 52), 729);
        let ts4 = &SplitSpec::sri_lanka()[3];
        let (train, test) = split(&frame, ts4).unwrap();
        assert_eq!(test.len(), 52);
        assert_eq!(train.len(), 3 * 52);
    }

    #[test]
    fn split_rejects_empty_test() {
        let frame = weekly_frame(Period::new(2020, 1), 10);
        let spec = SplitSpec {
            name: "x".into(),
            train_start: Period::new(2020, 1),
            train_end: Period::new(2020, 10),
            test_start: Period::new(2020, 11),
            test_end: Period::new(2020, 11),
        };
        assert!(matches!(split(&frame, &spec), Err(Error::Calendar(_))));
    }

    #[test]
    fn split_rejects_overlap() {
        let frame = weekly_frame(Period::new(2020, 1), 10);
        let spec = SplitSpec {
            name: "x".into(),
            train_start: Period::new(2020, 1),
            train_end: Period::new(2020, 5),
            test_start: Period::new(2020, 5),
            test_end: Period::new(2020, 8),
        };
        assert!(matches!(split(&frame, &spec), Err(Error::Calendar(_))));
    }

    #[test]
    fn temporal_aggregate_cases() {
        assert_eq!(temporal_aggregate(&[1., 2., 3., 4.], 2).unwrap(), [3., 7.]);
        assert_eq!(temporal_aggregate(&[1., 2., 3., 4., 5.], 2).unwrap(), [5., 9.]);
        assert_eq!(temporal_aggregate(&[4., 1., 7.], 1).unwrap(), [4., 1., 7.]);
        assert!(temporal_aggregate(&[1., 2.], 3).is_err());
        assert!(temporal_aggregate(&[1., 2.], 0).is_err());
    }

    #[test]
    fn period_tokens() {
        let p: Period = "2006-52".parse().unwrap();
        assert_eq!(p, Period::new(2006, 52));
        assert_eq!(p.offset(1, 52), Period::new(2007, 1));
        assert_eq!(p.to_string(), "2006-52");
        assert!("2006".parse::<Period>().is_err());
        assert!("2006-00".parse::<Period>().is_err());
    }

    #[test]
    fn granularity_factors() {
        let f52: Vec<usize> = Granularity::ALL.iter().map(|g| g.factor(52).unwrap()).collect();
        assert_eq!(f52, [1, 2, 4, 13, 26, 52]);
        let f12: Vec<usize> = Granularity::ALL.iter().map(|g| g.factor(12).unwrap()).collect();
        assert_eq!(f12, [1, 2, 4, 3, 6, 12]);
        assert!(Granularity::Monthly.factor(6).is_err());
        assert_eq!("monthly".parse::<Granularity>().unwrap(), Granularity::Monthly);
        assert_eq!(Granularity::parse_list("w,2w,m4w,q,sa,a").unwrap(), Granularity::ALL);
    }
}
