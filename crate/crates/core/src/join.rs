//! Multi-key equality joins on quasi-identifier columns.
//!
//! Output schema: key columns once (left names), then the non-key columns of
//! the left table with the left prefix, then those of the right table with the
//! right prefix. Rows come out in left-row order, and within one left row in
//! right-row order. Unmatched right rows (right joins) follow at the end in
//! right-row order. A key containing `Missing` never matches anything.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{CellValue, ColumnSpec, Table};

pub const DEFAULT_MAX_OUTPUT_ROWS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinKind {
    #[default]
    Inner,
    Left,
    Right,
}

impl JoinKind {
    pub fn mirrored(self) -> Self {
        match self {
            JoinKind::Inner => JoinKind::Inner,
            JoinKind::Left => JoinKind::Right,
            JoinKind::Right => JoinKind::Left,
        }
    }
}

impl std::str::FromStr for JoinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(JoinKind::Inner),
            "left" => Ok(JoinKind::Left),
            "right" => Ok(JoinKind::Right),
            other => Err(Error::Argument(format!("unknown join kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSpec {
    /// (left column, right column) pairs.
    pub keys: Vec<(String, String)>,
    pub kind: JoinKind,
    pub max_output_rows: u64,
    pub left_prefix: String,
    pub right_prefix: String,
}

impl JoinSpec {
    pub fn new<L: Into<String>, R: Into<String>>(keys: impl IntoIterator<Item = (L, R)>) -> Self {
        Self {
            keys: keys.into_iter().map(|(l, r)| (l.into(), r.into())).collect(),
            kind: JoinKind::Inner,
            max_output_rows: DEFAULT_MAX_OUTPUT_ROWS,
            left_prefix: "a_".into(),
            right_prefix: "b_".into(),
        }
    }

    /// Same-named keys on both sides, e.g. `["age", "gender"]`.
    pub fn on<S: AsRef<str>>(names: &[S]) -> Self {
        Self::new(names.iter().map(|n| (n.as_ref().to_string(), n.as_ref().to_string())))
    }

    pub fn with_kind(mut self, kind: JoinKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_max_output_rows(mut self, cap: u64) -> Self {
        self.max_output_rows = cap;
        self
    }

    /// Parses `a_col=b_col,a2=b2`. A bare name means the same column on both sides.
    pub fn parse_keys(s: &str) -> Result<Self> {
        let mut keys = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (l, r) = part.split_once('=').unwrap_or((part, part));
            let (l, r) = (l.trim(), r.trim());
            if l.is_empty() || r.is_empty() {
                return Err(Error::Argument(format!("malformed key pair `{part}`")));
            }
            keys.push((l.to_string(), r.to_string()));
        }
        let spec = Self::new(keys);
        spec.validate()?;
        Ok(spec)
    }

    /// Keys, kind and prefixes swapped, for joining (b, a) instead of (a, b).
    pub fn mirrored(&self) -> Self {
        Self {
            keys: self.keys.iter().map(|(l, r)| (r.clone(), l.clone())).collect(),
            kind: self.kind.mirrored(),
            max_output_rows: self.max_output_rows,
            left_prefix: self.right_prefix.clone(),
            right_prefix: self.left_prefix.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keys.is_empty() {
            return Err(Error::Argument("join needs at least one key pair".into()));
        }
        let mut left = std::collections::HashSet::new();
        let mut right = std::collections::HashSet::new();
        for (l, r) in &self.keys {
            if !left.insert(l) {
                return Err(Error::Argument(format!("duplicate left key `{l}`")));
            }
            if !right.insert(r) {
                return Err(Error::Argument(format!("duplicate right key `{r}`")));
            }
        }
        Ok(())
    }

    fn key_indices(&self, a: &Table, b: &Table) -> Result<(Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let la = self.keys.iter().map(|(l, _)| a.column_index(l)).collect::<Result<_>>()?;
        let rb = self.keys.iter().map(|(_, r)| b.column_index(r)).collect::<Result<_>>()?;
        Ok((la, rb))
    }
}

fn has_missing(key: &[&CellValue]) -> bool {
    key.iter().any(|c| c.is_missing())
}

/// Key tuple -> row positions, skipping keys with a `Missing` cell.
fn key_index<'a>(t: &'a Table, idx: &'a [usize]) -> HashMap<Vec<&'a CellValue>, Vec<usize>> {
    let mut map: HashMap<Vec<&CellValue>, Vec<usize>> = HashMap::new();
    for (row, key) in t.project_indices(idx).enumerate() {
        if !has_missing(&key) {
            map.entry(key).or_default().push(row);
        }
    }
    map
}

struct Cardinality {
    inner: u64,
    unmatched_left: u64,
    unmatched_right: u64,
}

impl Cardinality {
    fn for_kind(&self, kind: JoinKind) -> u64 {
        match kind {
            JoinKind::Inner => self.inner,
            JoinKind::Left => self.inner.saturating_add(self.unmatched_left),
            JoinKind::Right => self.inner.saturating_add(self.unmatched_right),
        }
    }
}

fn cardinality(a: &Table, la: &[usize], b: &Table, rb: &[usize]) -> Cardinality {
    let count = |t: &Table, idx: &[usize]| {
        let mut m: HashMap<Vec<CellValue>, u64> = HashMap::new();
        for key in t.project_indices(idx).filter(|k| !has_missing(k)) {
            *m.entry(key.into_iter().cloned().collect()).or_insert(0) += 1;
        }
        m
    };
    let ca = count(a, la);
    let cb = count(b, rb);
    let mut inner = 0u64;
    let mut matched_left = 0u64;
    for (k, &na) in &ca {
        if let Some(&nb) = cb.get(k) {
            inner = inner.saturating_add(na.saturating_mul(nb));
            matched_left += na;
        }
    }
    let matched_right: u64 = cb.iter().filter(|(k, _)| ca.contains_key(*k)).map(|(_, n)| n).sum();
    Cardinality {
        inner,
        unmatched_left: a.n_rows() as u64 - matched_left,
        unmatched_right: b.n_rows() as u64 - matched_right,
    }
}

/// Exact inner-join output size from key histograms, without materializing rows.
pub fn estimate_join_cardinality(a: &Table, b: &Table, spec: &JoinSpec) -> Result<u64> {
    let (la, rb) = spec.key_indices(a, b)?;
    Ok(cardinality(a, &la, b, &rb).inner)
}

/// Output row count for `spec.kind`, as checked against the explosion cap.
pub fn projected_output_rows(a: &Table, b: &Table, spec: &JoinSpec) -> Result<u64> {
    let (la, rb) = spec.key_indices(a, b)?;
    Ok(cardinality(a, &la, b, &rb).for_kind(spec.kind))
}

pub fn join(a: &Table, b: &Table, spec: &JoinSpec) -> Result<Table> {
    let (la, rb) = spec.key_indices(a, b)?;
    let estimate = cardinality(a, &la, b, &rb).for_kind(spec.kind);
    if estimate > spec.max_output_rows {
        return Err(Error::JoinExplosion { estimate, cap: spec.max_output_rows });
    }

    let a_rest: Vec<usize> = (0..a.n_cols()).filter(|i| !la.contains(i)).collect();
    let b_rest: Vec<usize> = (0..b.n_cols()).filter(|i| !rb.contains(i)).collect();

    let mut columns: Vec<ColumnSpec> = la.iter().map(|&i| a.columns()[i].clone()).collect();
    for &i in &a_rest {
        let c = &a.columns()[i];
        columns.push(ColumnSpec::new(format!("{}{}", spec.left_prefix, c.name), c.role));
    }
    for &i in &b_rest {
        let c = &b.columns()[i];
        columns.push(ColumnSpec::new(format!("{}{}", spec.right_prefix, c.name), c.role));
    }

    let build = key_index(b, &rb);
    let mut matched_b = vec![false; b.n_rows()];
    let mut rows: Vec<Vec<CellValue>> = Vec::with_capacity(estimate as usize);
    let width = columns.len();

    for (ai, key) in a.project_indices(&la).enumerate() {
        let arow = &a.rows()[ai];
        let hits = if has_missing(&key) { None } else { build.get(&key) };
        match hits {
            Some(bis) => {
                for &bi in bis {
                    matched_b[bi] = true;
                    let brow = &b.rows()[bi];
                    let mut out = Vec::with_capacity(width);
                    out.extend(key.iter().map(|&c| c.clone()));
                    out.extend(a_rest.iter().map(|&i| arow[i].clone()));
                    out.extend(b_rest.iter().map(|&i| brow[i].clone()));
                    rows.push(out);
                }
            }
            None if spec.kind == JoinKind::Left => {
                let mut out = Vec::with_capacity(width);
                out.extend(la.iter().map(|&i| arow[i].clone()));
                out.extend(a_rest.iter().map(|&i| arow[i].clone()));
                out.extend(std::iter::repeat_n(CellValue::Missing, b_rest.len()));
                rows.push(out);
            }
            None => {}
        }
    }

    if spec.kind == JoinKind::Right {
        for (brow, _) in b.rows().iter().zip(&matched_b).filter(|(_, m)| !**m) {
            let mut out = Vec::with_capacity(width);
            out.extend(rb.iter().map(|&i| brow[i].clone()));
            out.extend(std::iter::repeat_n(CellValue::Missing, a_rest.len()));
            out.extend(b_rest.iter().map(|&i| brow[i].clone()));
            rows.push(out);
        }
    }

    let label = format!("{}+{}", a.source_label(), b.source_label());
    Table::new(columns, rows, label)
}
