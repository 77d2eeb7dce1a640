//! Seeded generator of joinable table pairs and the labeled corpus built from them.
//!
//! Every pair shares `age` and `gender` key columns. Each table also gets a
//! random number of categorical columns, an optional unique `row_id` column, and
//! a fraction of rows that are exact copies of earlier rows. Together these
//! spread the distinct ratio over most of (0, 1].
//!
//! Seeds: example `i` of a corpus uses `master_seed ^ mix64(i)`. If that pair
//! joins to nothing (or exceeds the row cap) it is regenerated with
//! `retry_seed(seed, attempt)`, up to [`MAX_RETRIES`] times.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assess::{assess_default, LeakageAssessment};
use crate::error::{Error, Result};
use crate::join::JoinSpec;
use crate::tabular::{CellValue, ColumnRole, ColumnSpec, Table};

pub const MAX_RETRIES: u32 = 8;

/// SplitMix64 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn pair_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ mix64(index)
}

pub fn retry_seed(seed: u64, attempt: u32) -> u64 {
    mix64(seed ^ mix64(u64::from(attempt).wrapping_add(0xA5A5_A5A5)))
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: usize) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.gen_range(self.min..=self.max)
    }
}

/// Inclusive range of rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRange {
    pub min: f64,
    pub max: f64,
}

impl RateRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub rows_a: IntRange,
    pub rows_b: IntRange,
    pub age_range: IntRange,
    pub gender_values: usize,
    pub extra_cols_a: IntRange,
    pub extra_cols_b: IntRange,
    pub extra_cardinality: IntRange,
    pub duplicate_rate: RateRange,
    pub id_column_prob: f64,
    /// Join row cap used while labeling.
    pub max_join_rows: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            rows_a: IntRange::new(100, 2000),
            rows_b: IntRange::new(100, 2000),
            age_range: IntRange::new(18, 90),
            gender_values: 2,
            extra_cols_a: IntRange::new(1, 6),
            extra_cols_b: IntRange::new(1, 6),
            extra_cardinality: IntRange::new(2, 50),
            duplicate_rate: RateRange::new(0.0, 0.6),
            id_column_prob: 0.3,
            max_join_rows: 2_000_000,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rows_a", self.rows_a),
            ("rows_b", self.rows_b),
            ("age_range", self.age_range),
            ("extra_cols_a", self.extra_cols_a),
            ("extra_cols_b", self.extra_cols_b),
            ("extra_cardinality", self.extra_cardinality),
        ];
        for (name, r) in ranges {
            if r.min > r.max {
                return Err(Error::Argument(format!("{name}: empty range {}..={}", r.min, r.max)));
            }
        }
        if self.rows_a.min == 0 || self.rows_b.min == 0 {
            return Err(Error::Argument("row counts must be >= 1".into()));
        }
        if self.gender_values == 0 || self.extra_cardinality.min == 0 {
            return Err(Error::Argument("category counts must be >= 1".into()));
        }
        let d = self.duplicate_rate;
        if !(0.0..=0.9).contains(&d.min) || !(0.0..=0.9).contains(&d.max) || d.min > d.max {
            return Err(Error::Argument("duplicate_rate must be a range within [0, 0.9]".into()));
        }
        if !(0.0..=1.0).contains(&self.id_column_prob) {
            return Err(Error::Argument("id_column_prob must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn gender_token(i: usize, n: usize) -> String {
    if n == 2 {
        ["F", "M"][i].to_string()
    } else {
        format!("g{i}")
    }
}

fn generate_table(
    params: &GeneratorParams,
    rows: IntRange,
    extra_cols: IntRange,
    label: &str,
    rng: &mut ChaCha8Rng,
) -> Table {
    let n = rows.sample(rng);
    let cards: Vec<usize> =
        (0..extra_cols.sample(rng)).map(|_| params.extra_cardinality.sample(rng)).collect();
    let dup_rate = params.duplicate_rate.sample(rng);
    let has_id = rng.gen_bool(params.id_column_prob);

    let n_dup = ((dup_rate * n as f64).round() as usize).min(n - 1);
    let mut is_dup = vec![false; n];
    for i in sample(rng, n - 1, n_dup) {
        is_dup[i + 1] = true;
    }

    let mut data: Vec<Vec<CellValue>> = Vec::with_capacity(n);
    for (i, &dup) in is_dup.iter().enumerate() {
        if dup {
            let src = rng.gen_range(0..i);
            data.push(data[src].clone());
            continue;
        }
        let mut row = Vec::with_capacity(cards.len() + 2);
        row.push(CellValue::Text(params.age_range.sample(rng).to_string()));
        let g = rng.gen_range(0..params.gender_values);
        row.push(CellValue::Text(gender_token(g, params.gender_values)));
        for &c in &cards {
            row.push(CellValue::Text(format!("v{}", rng.gen_range(0..c))));
        }
        data.push(row);
    }

    let mut columns = vec![
        ColumnSpec::new("age", ColumnRole::QuasiIdentifier),
        ColumnSpec::new("gender", ColumnRole::QuasiIdentifier),
    ];
    columns.extend((1..=cards.len()).map(|j| ColumnSpec::attribute(format!("attr{j}"))));
    if has_id {
        columns.insert(0, ColumnSpec::new("row_id", ColumnRole::Identifier));
        for (i, row) in data.iter_mut().enumerate() {
            row.insert(0, CellValue::Text(format!("{label}{i}")));
        }
    }
    Table::new(columns, data, label).expect("generated tables are rectangular")
}

/// Deterministic for a given `(params, pair_seed)`. Callers should validate
/// `params` first; see [`GeneratorParams::validate`].
pub fn generate_pair(params: &GeneratorParams, pair_seed: u64) -> (Table, Table, JoinSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
    let a = generate_table(params, params.rows_a, params.extra_cols_a, "A", &mut rng);
    let b = generate_table(params, params.rows_b, params.extra_cols_b, "B", &mut rng);
    let spec = JoinSpec::on(&["age", "gender"]).with_max_output_rows(params.max_join_rows);
    (a, b, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub index: u64,
    pub attempts: u32,
    pub rows_a: usize,
    pub rows_b: usize,
    pub rows_ab: usize,
    pub cols_a: usize,
    pub cols_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// `[u_a, u_b]`
    pub features: [f64; 2],
    pub target: f64,
    /// The seed the labeled pair was actually generated from.
    pub pair_seed: u64,
    pub meta: ExampleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub examples: Vec<LabeledExample>,
    /// `None` when the corpus was loaded from a file.
    pub master_seed: Option<u64>,
    pub params: Option<GeneratorParams>,
    /// Indices given up on after [`MAX_RETRIES`].
    pub skipped: usize,
}

impl LabeledCorpus {
    pub fn from_examples(examples: Vec<LabeledExample>) -> Self {
        Self { examples, master_seed: None, params: None, skipped: 0 }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn features(&self) -> Vec<[f64; 2]> {
        self.examples.iter().map(|e| e.features).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.target).collect()
    }

    /// First `round(frac * n)` examples and the rest.
    pub fn split(&self, frac: f64) -> (LabeledCorpus, LabeledCorpus) {
        let cut = ((frac.clamp(0.0, 1.0) * self.len() as f64).round() as usize).min(self.len());
        let mk = |ex: &[LabeledExample]| LabeledCorpus {
            examples: ex.to_vec(),
            master_seed: self.master_seed,
            params: self.params.clone(),
            skipped: 0,
        };
        (mk(&self.examples[..cut]), mk(&self.examples[cut..]))
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<()> {
        for e in &self.examples {
            let line = serde_json::to_string(e).map_err(|e| Error::Persistence(e.to_string()))?;
            writeln!(sink, "{line}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(source: R) -> Result<Self> {
        let mut examples = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LabeledExample = serde_json::from_str(&line)
                .map_err(|e| Error::Persistence(format!("corpus line {}: {e}", i + 1)))?;
            examples.push(e);
        }
        Ok(Self::from_examples(examples))
    }
}

/// Labels one generated pair: features are the pre-join distinct ratios, the
/// target is the leakage signal.
pub fn label_pair(a: &Table, b: &Table, spec: &JoinSpec) -> Result<LeakageAssessment> {
    assess_default(a, b, spec)
}

enum Labeled {
    Done(LabeledExample),
    Skipped,
}

fn label_index(params: &GeneratorParams, master_seed: u64, index: u64) -> Result<Labeled> {
    let mut seed = pair_seed(master_seed, index);
    for attempt in 0..=MAX_RETRIES {
        if attempt > 0 {
            seed = retry_seed(seed, attempt);
        }
        let (a, b, spec) = generate_pair(params, seed);
        match label_pair(&a, &b, &spec) {
            Ok(r) => {
                return Ok(Labeled::Done(LabeledExample {
                    features: [r.report_a.distinct_ratio, r.report_b.distinct_ratio],
                    target: r.signal,
                    pair_seed: seed,
                    meta: ExampleMeta {
                        index,
                        attempts: attempt + 1,
                        rows_a: a.n_rows(),
                        rows_b: b.n_rows(),
                        rows_ab: r.report_ab.n_rows,
                        cols_a: a.n_cols(),
                        cols_b: b.n_cols(),
                    },
                }))
            }
            Err(Error::EmptyJoin | Error::JoinExplosion { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Labeled::Skipped)
}

pub fn generate_corpus(params: &GeneratorParams, n_pairs: usize, master_seed: u64) -> Result<LabeledCorpus> {
    generate_corpus_with(params, n_pairs, master_seed, true)
}

/// `parallel` only changes how the work is scheduled, never the result.
pub fn generate_corpus_with(
    params: &GeneratorParams,
    n_pairs: usize,
    master_seed: u64,
    parallel: bool,
) -> Result<LabeledCorpus> {
    if n_pairs < 1 {
        return Err(Error::Argument("n_pairs must be >= 1".into()));
    }
    params.validate()?;
    let run = |i: usize| label_index(params, master_seed, i as u64);
    let labeled: Vec<Labeled> = if parallel {
        (0..n_pairs).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..n_pairs).map(run).collect::<Result<_>>()?
    };
    let mut examples = Vec::with_capacity(n_pairs);
    let mut skipped = 0;
    for l in labeled {
        match l {
            Labeled::Done(e) => examples.push(e),
            Labeled::Skipped => skipped += 1,
        }
    }
    Ok(LabeledCorpus { examples, master_seed: Some(master_seed), params: Some(params.clone()), skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::full_row_report;

    #[test]
    fn id_column_forces_full_uniqueness() {
        let p = GeneratorParams {
            duplicate_rate: RateRange::fixed(0.0),
            id_column_prob: 1.0,
            ..Default::default()
        };
        for seed in 0..5 {
            let (a, b, _) = generate_pair(&p, seed);
            assert_eq!(full_row_report(&a).unwrap().distinct_ratio, 1.0);
            assert_eq!(full_row_report(&b).unwrap().distinct_ratio, 1.0);
            assert_eq!(a.columns()[0].name, "row_id");
        }
    }

    #[test]
    fn same_seed_same_tables() {
        let p = GeneratorParams::default();
        let (a1, b1, s1) = generate_pair(&p, 1234);
        let (a2, b2, s2) = generate_pair(&p, 1234);
        assert_eq!((a1, b1, s1), (a2, b2, s2));
        let (a3, _, _) = generate_pair(&p, 1235);
        let (a1, _, _) = generate_pair(&p, 1234);
        assert_ne!(a1, a3);
    }

    #[test]
    fn duplication_breaks_uniqueness() {
        let p = GeneratorParams {
            rows_a: IntRange::fixed(100),
            rows_b: IntRange::fixed(100),
            duplicate_rate: RateRange::fixed(0.5),
            id_column_prob: 0.0,
            ..Default::default()
        };
        for seed in 0..10 {
            let (a, b, _) = generate_pair(&p, seed);
            assert_eq!(a.n_rows(), 100);
            assert!(full_row_report(&a).unwrap().distinct_ratio < 1.0);
            assert!(full_row_report(&b).unwrap().distinct_ratio < 1.0);
        }
    }

    #[test]
    fn pairs_share_qid_keys() {
        let (a, b, spec) = generate_pair(&GeneratorParams::default(), 9);
        assert!(a.column_index("age").is_ok() && a.column_index("gender").is_ok());
        assert!(b.column_index("age").is_ok() && b.column_index("gender").is_ok());
        assert_eq!(spec.keys, vec![("age".into(), "age".into()), ("gender".into(), "gender".into())]);
        assert_eq!(a.columns_with_role(ColumnRole::QuasiIdentifier), vec!["age", "gender"]);
    }

    #[test]
    fn single_pair_corpus_matches_recomputation() {
        let p = GeneratorParams::default();
        let c = generate_corpus(&p, 1, 77).unwrap();
        assert_eq!(c.len(), 1);
        let e = &c.examples[0];
        let (a, b, spec) = generate_pair(&p, e.pair_seed);
        let ua = full_row_report(&a).unwrap().distinct_ratio;
        let ub = full_row_report(&b).unwrap().distinct_ratio;
        let j = crate::join::join(&a, &b, &spec).unwrap();
        let uab = full_row_report(&j).unwrap().distinct_ratio;
        assert_eq!(e.features, [ua, ub]);
        assert_eq!(e.target, crate::assess::leakage_signal(ua, ub, uab).unwrap());
    }

    #[test]
    fn zero_pairs_is_an_error() {
        assert!(matches!(generate_corpus(&GeneratorParams::default(), 0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn over_cap_pairs_are_skipped_after_retries() {
        let p = GeneratorParams { max_join_rows: 0, ..Default::default() };
        let c = generate_corpus(&p, 2, 5).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.skipped, 2);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = GeneratorParams { duplicate_rate: RateRange::new(0.0, 0.95), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = GeneratorParams { rows_a: IntRange::new(10, 5), ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(GeneratorParams::default().validate().is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = generate_corpus(&GeneratorParams::default(), 3, 11).unwrap();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        let back = LabeledCorpus::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.examples, c.examples);
    }

    #[test]
    fn mix64_is_a_bijection_sample() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(mix64).collect();
        assert_eq!(seeds.len(), 10_000);
    }
}
