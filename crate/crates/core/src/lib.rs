//! Re-identification risk before and after quasi-identifier joins.
//!
//! The library measures how identifiable a table is over an attribute set
//! ([`metrics`]), simulates integrating two sources on shared quasi-identifiers
//! ([`join`]), and derives a signed leakage signal from the pre- and post-join
//! distinct ratios ([`assess`]). A gradient-boosted regressor ([`predictor`])
//! trained on a synthetic corpus ([`synth`]) forecasts that signal from the two
//! pre-join ratios alone, so the direction of a join's privacy impact can be
//! estimated without merging any data. [`eval`] scores such forecasts.
//!
//! ```
//! use joinguard::{assess, join::JoinSpec, tabular::Table};
//!
//! let a = Table::from_text(&["age", "gender"], &[vec!["30", "M"], vec!["30", "M"], vec!["40", "F"]])?;
//! let b = Table::from_text(&["age", "gender", "bmi"], &[vec!["30", "M", "22"], vec!["40", "F", ""]])?;
//! let r = assess::assess_default(&a, &b, &JoinSpec::on(&["age", "gender"]))?;
//! assert_eq!(r.report_a.distinct_ratio, 2.0 / 3.0);
//! assert_eq!(r.overall_direction, assess::Direction::Decrease);
//! # Ok::<(), joinguard::Error>(())
//! ```

pub mod assess;
pub mod cli;
pub mod error;
pub mod eval;
pub mod join;
pub mod metrics;
pub mod predictor;
pub mod synth;
pub mod tabular;

pub use assess::{assess_pair, direction, leakage_signal, Direction, LeakageAssessment};
pub use error::{Error, Result};
pub use eval::{direction_accuracy, rank_correlation, regression_metrics, EvalReport};
pub use join::{estimate_join_cardinality, join, JoinKind, JoinSpec};
pub use metrics::{group_counts, k_anonymity, small_group_fraction, uniqueness_report, UniquenessReport};
pub use predictor::{baseline_constant, load_model, predict, save_model, train, GbdtModel, Hyperparams};
pub use synth::{generate_corpus, generate_pair, GeneratorParams, LabeledCorpus, LabeledExample};
pub use tabular::{canonicalize_value, load_table, project, CellValue, IngestOptions, Table};
