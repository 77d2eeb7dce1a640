//! Pre/post-join identifiability measurement.
//!
//! `U(A)` and `U(B)` are the distinct ratios of the two sources, `U(AB)` the
//! distinct ratio of the merged table over all of its columns. The leakage
//! signal is `U(AB) - baseline`, where the baseline is `max(U(A), U(B))` by
//! default, or the constant 1.0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::join::{join, JoinSpec};
use crate::metrics::{full_row_report, uniqueness_report, UniquenessReport};
use crate::tabular::Table;

pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
    NoChange,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Increase => "Increase",
            Direction::Decrease => "Decrease",
            Direction::NoChange => "NoChange",
        })
    }
}

/// Classifies a signed change; `|delta| <= epsilon` is `NoChange`.
pub fn direction(delta: f64, epsilon: f64) -> Direction {
    if delta.abs() <= epsilon {
        Direction::NoChange
    } else if delta > epsilon {
        Direction::Increase
    } else {
        Direction::Decrease
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    /// `max(U(A), U(B))`
    #[default]
    Max,
    /// The constant 1.0.
    One,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(BaselineMode::Max),
            "one" => Ok(BaselineMode::One),
            other => Err(Error::Argument(format!("unknown baseline `{other}` (expected max|one)"))),
        }
    }
}

impl BaselineMode {
    pub fn baseline(self, u_a: f64, u_b: f64) -> f64 {
        match self {
            BaselineMode::Max => u_a.max(u_b),
            BaselineMode::One => 1.0,
        }
    }
}

fn check_ratio(name: &str, u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} = {u} is outside (0, 1]")))
    }
}

/// `u_ab - max(u_a, u_b)`.
pub fn leakage_signal(u_a: f64, u_b: f64, u_ab: f64) -> Result<f64> {
    leakage_signal_with(u_a, u_b, u_ab, BaselineMode::Max)
}

pub fn leakage_signal_with(u_a: f64, u_b: f64, u_ab: f64, mode: BaselineMode) -> Result<f64> {
    check_ratio("u_a", u_a)?;
    check_ratio("u_b", u_b)?;
    check_ratio("u_ab", u_ab)?;
    Ok(u_ab - mode.baseline(u_a, u_b))
}

/// Which columns a source report is computed over.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum AttrSelection {
    #[default]
    All,
    Columns(Vec<String>),
}

impl AttrSelection {
    pub fn resolve(&self, table: &Table) -> Vec<String> {
        match self {
            AttrSelection::All => table.column_names(),
            AttrSelection::Columns(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssessOptions {
    pub epsilon: f64,
    pub baseline: BaselineMode,
}

impl Default for AssessOptions {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, baseline: BaselineMode::Max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageAssessment {
    pub report_a: UniquenessReport,
    pub report_b: UniquenessReport,
    pub report_ab: UniquenessReport,
    pub baseline: f64,
    pub baseline_mode: BaselineMode,
    pub signal: f64,
    pub overall_direction: Direction,
    pub direction_a: Direction,
    pub direction_b: Direction,
    pub join_spec: JoinSpec,
    pub epsilon: f64,
}

pub fn assess_pair(
    a: &Table,
    b: &Table,
    spec: &JoinSpec,
    attrs_a: &AttrSelection,
    attrs_b: &AttrSelection,
    options: AssessOptions,
) -> Result<LeakageAssessment> {
    if options.epsilon.is_nan() || options.epsilon < 0.0 {
        return Err(Error::Argument("epsilon must be >= 0".into()));
    }
    let report_a = uniqueness_report(a, &attrs_a.resolve(a))?;
    let report_b = uniqueness_report(b, &attrs_b.resolve(b))?;
    let merged = join(a, b, spec)?;
    if merged.is_empty() {
        return Err(Error::EmptyJoin);
    }
    let report_ab = full_row_report(&merged)?;

    let (u_a, u_b, u_ab) = (report_a.distinct_ratio, report_b.distinct_ratio, report_ab.distinct_ratio);
    let signal = leakage_signal_with(u_a, u_b, u_ab, options.baseline)?;
    let eps = options.epsilon;
    Ok(LeakageAssessment {
        baseline: options.baseline.baseline(u_a, u_b),
        baseline_mode: options.baseline,
        signal,
        overall_direction: direction(signal, eps),
        direction_a: direction(u_ab - u_a, eps),
        direction_b: direction(u_ab - u_b, eps),
        join_spec: spec.clone(),
        epsilon: eps,
        report_a,
        report_b,
        report_ab,
    })
}

/// [`assess_pair`] over all columns of both sources with default options.
pub fn assess_default(a: &Table, b: &Table, spec: &JoinSpec) -> Result<LeakageAssessment> {
    assess_pair(a, b, spec, &AttrSelection::All, &AttrSelection::All, AssessOptions::default())
}
