//! Group multiplicities and identifiability ratios over an attribute set.
//!
//! Two ratios are always reported side by side:
//!
//! * `distinct_ratio`: distinct attribute combinations / rows. This is the
//!   headline uniqueness ratio.
//! * `singleton_ratio`: rows whose combination occurs exactly once / rows,
//!   the classic re-identification measure.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tabular::{CellValue, Table};

/// Small-group thresholds reported by default.
pub const DEFAULT_SMALL_GROUP_THRESHOLDS: [usize; 2] = [2, 5];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupHistogram {
    /// Projected tuple -> occurrence count, in first-seen order.
    pub groups: IndexMap<Vec<CellValue>, usize>,
    /// Group size k -> number of groups of size k.
    pub size_histogram: BTreeMap<usize, usize>,
    pub n_rows: usize,
}

impl GroupHistogram {
    pub fn distinct_count(&self) -> usize {
        self.groups.len()
    }

    pub fn singleton_count(&self) -> usize {
        self.size_histogram.get(&1).copied().unwrap_or(0)
    }

    pub fn min_group_size(&self) -> usize {
        self.size_histogram.keys().next().copied().unwrap_or(0)
    }

    /// Number of rows that sit in groups of size <= k.
    pub fn rows_in_groups_up_to(&self, k: usize) -> usize {
        self.size_histogram.range(..=k).map(|(size, n)| size * n).sum()
    }

    pub fn small_group_fraction(&self, k: usize) -> Result<f64> {
        if k < 1 {
            return Err(Error::Argument("small-group threshold k must be >= 1".into()));
        }
        Ok(self.rows_in_groups_up_to(k) as f64 / self.n_rows as f64)
    }
}

pub fn group_counts<S: AsRef<str>>(table: &Table, attrs: &[S]) -> Result<GroupHistogram> {
    let idx = table.column_indices(attrs)?;
    if table.is_empty() {
        return Err(Error::Metric("empty table".into()));
    }
    let mut counts: IndexMap<Vec<&CellValue>, usize> = IndexMap::new();
    for key in table.project_indices(&idx) {
        *counts.entry(key).or_insert(0) += 1;
    }
    let mut size_histogram = BTreeMap::new();
    for &c in counts.values() {
        *size_histogram.entry(c).or_insert(0) += 1;
    }
    let groups = counts.into_iter().map(|(k, c)| (k.into_iter().cloned().collect(), c)).collect();
    Ok(GroupHistogram { groups, size_histogram, n_rows: table.n_rows() })
}

/// Counts only, without materializing owned group keys.
pub(crate) fn size_histogram_of(table: &Table, idx: &[usize]) -> BTreeMap<usize, usize> {
    let mut counts: HashMap<Vec<&CellValue>, usize> = HashMap::new();
    for key in table.project_indices(idx) {
        *counts.entry(key).or_insert(0) += 1;
    }
    let mut hist = BTreeMap::new();
    for c in counts.into_values() {
        *hist.entry(c).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    Distinct,
    Singleton,
}

#[derive(Serialize, Deserialize)]
struct TaggedRatio {
    value: f64,
    interpretation: Interpretation,
}

fn tagged<S: Serializer>(value: f64, interpretation: Interpretation, s: S) -> Result<S::Ok, S::Error> {
    TaggedRatio { value, interpretation }.serialize(s)
}

fn ser_distinct<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    tagged(*v, Interpretation::Distinct, s)
}

fn ser_singleton<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    tagged(*v, Interpretation::Singleton, s)
}

fn de_tagged<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    TaggedRatio::deserialize(d).map(|t| t.value)
}

/// Identifiability summary of one table over one attribute set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessReport {
    pub attrs: Vec<String>,
    pub n_rows: usize,
    pub distinct_count: usize,
    pub singleton_count: usize,
    #[serde(serialize_with = "ser_distinct", deserialize_with = "de_tagged")]
    pub distinct_ratio: f64,
    #[serde(serialize_with = "ser_singleton", deserialize_with = "de_tagged")]
    pub singleton_ratio: f64,
    pub min_group_size: usize,
    pub small_group_fractions: BTreeMap<usize, f64>,
}

impl UniquenessReport {
    pub fn from_histogram(attrs: Vec<String>, hist: &GroupHistogram, thresholds: &[usize]) -> Result<Self> {
        Self::from_sizes(attrs, &hist.size_histogram, hist.n_rows, thresholds)
    }

    fn from_sizes(
        attrs: Vec<String>,
        sizes: &BTreeMap<usize, usize>,
        n_rows: usize,
        thresholds: &[usize],
    ) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::Metric("empty table".into()));
        }
        let distinct_count: usize = sizes.values().sum();
        let singleton_count = sizes.get(&1).copied().unwrap_or(0);
        let n = n_rows as f64;
        let mut small_group_fractions = BTreeMap::new();
        for &k in thresholds {
            if k < 1 {
                return Err(Error::Argument("small-group threshold k must be >= 1".into()));
            }
            let rows: usize = sizes.range(..=k).map(|(s, c)| s * c).sum();
            small_group_fractions.insert(k, rows as f64 / n);
        }
        Ok(Self {
            attrs,
            n_rows,
            distinct_count,
            singleton_count,
            distinct_ratio: distinct_count as f64 / n,
            singleton_ratio: singleton_count as f64 / n,
            min_group_size: sizes.keys().next().copied().unwrap_or(0),
            small_group_fractions,
        })
    }
}

pub fn uniqueness_report<S: AsRef<str>>(table: &Table, attrs: &[S]) -> Result<UniquenessReport> {
    uniqueness_report_with(table, attrs, &DEFAULT_SMALL_GROUP_THRESHOLDS)
}

pub fn uniqueness_report_with<S: AsRef<str>>(
    table: &Table,
    attrs: &[S],
    thresholds: &[usize],
) -> Result<UniquenessReport> {
    let idx = table.column_indices(attrs)?;
    if table.is_empty() {
        return Err(Error::Metric("empty table".into()));
    }
    let sizes = size_histogram_of(table, &idx);
    let attrs = attrs.iter().map(|a| a.as_ref().to_string()).collect();
    UniquenessReport::from_sizes(attrs, &sizes, table.n_rows(), thresholds)
}

/// Report over every column of the table.
pub fn full_row_report(table: &Table) -> Result<UniquenessReport> {
    uniqueness_report(table, &table.column_names())
}

pub fn k_anonymity<S: AsRef<str>>(table: &Table, attrs: &[S]) -> Result<usize> {
    Ok(group_counts(table, attrs)?.min_group_size())
}

pub fn small_group_fraction<S: AsRef<str>>(table: &Table, attrs: &[S], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Argument("small-group threshold k must be >= 1".into()));
    }
    group_counts(table, attrs)?.small_group_fraction(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3() -> Table {
        Table::from_text(&["age", "gender"], &[vec!["30", "M"], vec!["30", "M"], vec!["40", "F"]]).unwrap()
    }

    fn key(a: &str, g: &str) -> Vec<CellValue> {
        vec![CellValue::text(a), CellValue::text(g)]
    }

    #[test]
    fn group_counts_three_rows() {
        let h = group_counts(&t3(), &["age", "gender"]).unwrap();
        assert_eq!(h.groups.len(), 2);
        assert_eq!(h.groups[&key("30", "M")], 2);
        assert_eq!(h.groups[&key("40", "F")], 1);
        assert_eq!(h.size_histogram, BTreeMap::from([(1, 1), (2, 1)]));
    }

    #[test]
    fn empty_attrs_is_one_group() {
        let none: [&str; 0] = [];
        let h = group_counts(&t3(), &none).unwrap();
        assert_eq!(h.groups.len(), 1);
        assert_eq!(h.size_histogram, BTreeMap::from([(3, 1)]));
    }

    #[test]
    fn identical_rows_form_one_group() {
        let rows = vec![vec!["1", "x"]; 5];
        let t = Table::from_text(&["a", "b"], &rows).unwrap();
        let h = group_counts(&t, &["a", "b"]).unwrap();
        assert_eq!(h.size_histogram, BTreeMap::from([(5, 1)]));
        assert_eq!(k_anonymity(&t, &["a", "b"]).unwrap(), 5);
    }

    #[test]
    fn empty_table_is_a_metric_error() {
        let t = Table::from_text::<&str, &str>(&["a"], &[]).unwrap();
        assert!(matches!(group_counts(&t, &["a"]), Err(Error::Metric(_))));
        assert!(matches!(uniqueness_report(&t, &["a"]), Err(Error::Metric(_))));
        assert!(matches!(k_anonymity(&t, &["a"]), Err(Error::Metric(_))));
    }

    #[test]
    fn report_three_rows() {
        let r = uniqueness_report(&t3(), &["age", "gender"]).unwrap();
        assert_eq!(r.distinct_count, 2);
        assert_eq!(r.singleton_count, 1);
        assert_eq!(r.distinct_ratio, 2.0 / 3.0);
        assert_eq!(r.singleton_ratio, 1.0 / 3.0);
        assert_eq!(r.min_group_size, 1);
        assert_eq!(r.small_group_fractions, BTreeMap::from([(2, 1.0), (5, 1.0)]));
    }

    #[test]
    fn all_distinct_table_is_fully_unique() {
        let rows: Vec<Vec<String>> = (0..10).map(|i| vec![i.to_string()]).collect();
        let t = Table::from_text(&["id".to_string()], &rows).unwrap();
        let r = full_row_report(&t).unwrap();
        assert_eq!(r.distinct_ratio, 1.0);
        assert_eq!(r.singleton_ratio, 1.0);
        assert_eq!(r.min_group_size, 1);
    }

    #[test]
    fn three_hundred_two_of_1025() {
        // 302 distinct rows, padded with duplicates of the first to 1025.
        let mut rows: Vec<Vec<String>> = (0..302).map(|i| vec![i.to_string()]).collect();
        rows.extend((0..1025 - 302).map(|i| vec![(i % 302).to_string()]));
        let t = Table::from_text(&["v".to_string()], &rows).unwrap();
        let r = full_row_report(&t).unwrap();
        assert_eq!(r.distinct_count, 302);
        assert!((r.distinct_ratio - 0.2946).abs() < 1e-4);
    }

    #[test]
    fn k_anonymity_pairs() {
        let t = Table::from_text(
            &["age", "gender"],
            &[vec!["30", "M"], vec!["30", "M"], vec!["40", "F"], vec!["40", "F"]],
        )
        .unwrap();
        assert_eq!(k_anonymity(&t, &["age", "gender"]).unwrap(), 2);
        assert_eq!(k_anonymity(&t3(), &["age", "gender"]).unwrap(), 1);
    }

    #[test]
    fn small_group_fraction_examples() {
        // group sizes {3, 1, 1}
        let t = Table::from_text(&["v"], &[vec!["a"], vec!["a"], vec!["a"], vec!["b"], vec!["c"]]).unwrap();
        assert_eq!(small_group_fraction(&t, &["v"], 2).unwrap(), 2.0 / 5.0);
        let r = uniqueness_report(&t, &["v"]).unwrap();
        assert_eq!(small_group_fraction(&t, &["v"], 1).unwrap(), r.singleton_ratio);
        assert_eq!(small_group_fraction(&t, &["v"], 5).unwrap(), 1.0);
        assert_eq!(small_group_fraction(&t, &["v"], 99).unwrap(), 1.0);
        assert!(matches!(small_group_fraction(&t, &["v"], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn missing_is_a_groupable_value() {
        let t = Table::from_text(&["bmi"], &[vec![""], vec![""], vec!["20"]]).unwrap();
        let h = group_counts(&t, &["bmi"]).unwrap();
        assert_eq!(h.groups[&vec![CellValue::Missing]], 2);
    }

    #[test]
    fn report_json_tags_interpretations() {
        let r = uniqueness_report(&t3(), &["age", "gender"]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["distinct_ratio"]["interpretation"], "distinct");
        assert_eq!(v["singleton_ratio"]["interpretation"], "singleton");
        assert_eq!(v["small_group_fractions"]["2"], 1.0);
        let back: UniquenessReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
