//! `joinguard` command-line interface.
//!
//! Exit codes: 0 success, 1 pipeline error (one JSON line on stderr),
//! 2 usage error, 3 `evaluate --min-accuracy` gate failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::assess::{
    assess_pair, direction, AssessOptions, AttrSelection, BaselineMode, Direction, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::join::{JoinKind, JoinSpec, DEFAULT_MAX_OUTPUT_ROWS};
use crate::metrics::{uniqueness_report_with, DEFAULT_SMALL_GROUP_THRESHOLDS};
use crate::predictor::{load_model, predict, save_model, train, Hyperparams};
use crate::synth::{generate_corpus_with, GeneratorParams, IntRange, LabeledCorpus, RateRange};
use crate::tabular::{load_table_labeled, IngestOptions, Table};

pub const MAX_ROWS_ENV: &str = "JOINGUARD_MAX_ROWS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PIPELINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "joinguard",
    version,
    about = "Re-identification risk before and after quasi-identifier joins"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Output {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Ingest {
    /// Field delimiter
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Input has no header row (columns become c1, c2, ...)
    #[arg(long)]
    no_header: bool,
    /// Lower-case every cell
    #[arg(long)]
    case_fold: bool,
    /// Keep empty cells as empty strings instead of Missing
    #[arg(long)]
    keep_empty: bool,
}

impl Ingest {
    fn options(&self, drop: &[String]) -> IngestOptions {
        IngestOptions {
            delimiter: self.delimiter,
            has_header: !self.no_header,
            empty_is_missing: !self.keep_empty,
            case_fold: self.case_fold,
            drop_columns: drop.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Uniqueness report for one table
    Uniqueness {
        #[arg(long)]
        input: PathBuf,
        /// Attribute set (default: all columns)
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        /// Columns to drop on load
        #[arg(long, value_delimiter = ',')]
        drop: Vec<String>,
        /// Small-group thresholds
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SMALL_GROUP_THRESHOLDS)]
        small_k: Vec<usize>,
        #[command(flatten)]
        ingest: Ingest,
        #[command(flatten)]
        output: Output,
    },
    /// Pre/post-join leakage assessment for two tables
    Assess {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Key pairs: left_col=right_col,...
        #[arg(long)]
        keys: String,
        #[arg(long, value_enum, default_value_t = KindArg::Inner)]
        kind: KindArg,
        #[arg(long, value_enum, default_value_t = BaselineArg::Max)]
        baseline: BaselineArg,
        /// Join output row cap (default: $JOINGUARD_MAX_ROWS, else 10,000,000)
        #[arg(long)]
        max_rows: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',')]
        attrs_left: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        attrs_right: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        drop_left: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        drop_right: Vec<String>,
        #[command(flatten)]
        ingest: Ingest,
        #[command(flatten)]
        output: Output,
    },
    /// Generate a labeled synthetic corpus as JSON lines
    Generate {
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        /// Generate on one thread (output is identical either way)
        #[arg(long)]
        serial: bool,
    },
    /// Train a boosted-tree model on a corpus
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predict the leakage signal from two pre-join uniqueness ratios
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        ua: f64,
        #[arg(long)]
        ub: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Score a model on a held-out corpus
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Exit 3 when direction accuracy falls below this
        #[arg(long)]
        min_accuracy: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Inner,
    Left,
    Right,
}

impl From<KindArg> for JoinKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Inner => JoinKind::Inner,
            KindArg::Left => JoinKind::Left,
            KindArg::Right => JoinKind::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    Max,
    One,
}

impl From<BaselineArg> for BaselineMode {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Max => BaselineMode::Max,
            BaselineArg::One => BaselineMode::One,
        }
    }
}

fn parse_int_range(s: &str) -> std::result::Result<IntRange, String> {
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let lo = lo.trim().parse().map_err(|e| format!("bad range `{s}`: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("bad range `{s}`: {e}"))?;
    Ok(IntRange::new(lo, hi))
}

fn parse_rate_range(s: &str) -> std::result::Result<RateRange, String> {
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let lo = lo.trim().parse().map_err(|e| format!("bad range `{s}`: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("bad range `{s}`: {e}"))?;
    Ok(RateRange::new(lo, hi))
}

/// Generator overrides; ranges are `min:max` (or a single value).
#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_int_range)]
    rows_a: Option<IntRange>,
    #[arg(long, value_parser = parse_int_range)]
    rows_b: Option<IntRange>,
    #[arg(long, value_parser = parse_int_range)]
    age_range: Option<IntRange>,
    #[arg(long)]
    genders: Option<usize>,
    #[arg(long, value_parser = parse_int_range)]
    extra_cols_a: Option<IntRange>,
    #[arg(long, value_parser = parse_int_range)]
    extra_cols_b: Option<IntRange>,
    #[arg(long, value_parser = parse_int_range)]
    cardinality: Option<IntRange>,
    #[arg(long, value_parser = parse_rate_range)]
    dup_rate: Option<RateRange>,
    #[arg(long)]
    id_prob: Option<f64>,
    #[arg(long)]
    max_join_rows: Option<u64>,
}

impl GenArgs {
    fn params(&self) -> GeneratorParams {
        let d = GeneratorParams::default();
        GeneratorParams {
            rows_a: self.rows_a.unwrap_or(d.rows_a),
            rows_b: self.rows_b.unwrap_or(d.rows_b),
            age_range: self.age_range.unwrap_or(d.age_range),
            gender_values: self.genders.unwrap_or(d.gender_values),
            extra_cols_a: self.extra_cols_a.unwrap_or(d.extra_cols_a),
            extra_cols_b: self.extra_cols_b.unwrap_or(d.extra_cols_b),
            extra_cardinality: self.cardinality.unwrap_or(d.extra_cardinality),
            duplicate_rate: self.dup_rate.unwrap_or(d.duplicate_rate),
            id_column_prob: self.id_prob.unwrap_or(d.id_column_prob),
            max_join_rows: self.max_join_rows.unwrap_or(d.max_join_rows),
        }
    }
}

#[derive(Debug, Serialize)]
struct Prediction {
    u_a: f64,
    u_b: f64,
    signal: f64,
    direction: Direction,
    epsilon: f64,
}

#[derive(Debug, Serialize)]
struct GenerateSummary {
    out: String,
    examples: usize,
    skipped: usize,
    master_seed: u64,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    out: String,
    examples: usize,
    trees: usize,
    init_prediction: f64,
}

/// Flattens nested objects into `a.b` keys; arrays of scalars join with `;`.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), parts.join(";")));
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn render<T: Serialize>(value: &T, format: Format) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| Error::Persistence(e.to_string()))?;
    match format {
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(&v).map_err(|e| Error::Persistence(e.to_string()))?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv => {
            let mut cells = Vec::new();
            flatten("", &v, &mut cells);
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(cells.iter().map(|(k, _)| k)).map_err(io)?;
            w.write_record(cells.iter().map(|(_, v)| v)).map_err(io)?;
            w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        }
    }
}

fn emit<T: Serialize>(value: &T, output: &Output, stdout: &mut dyn Write) -> Result<()> {
    let bytes = render(value, output.format)?;
    match &output.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, stdout: &mut dyn Write) -> Result<()> {
    stdout.write_all(&render(value, Format::Json)?)?;
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_table(path: &Path, opts: &IngestOptions) -> Result<Table> {
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    load_table_labeled(BufReader::new(open(path)?), opts, label)
}

fn read_corpus(path: &Path) -> Result<LabeledCorpus> {
    LabeledCorpus::read_jsonl(BufReader::new(open(path)?))
}

fn max_rows_from_env() -> Result<Option<u64>> {
    match std::env::var(MAX_ROWS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Argument(format!("{MAX_ROWS_ENV}=`{v}` is not a row count"))),
        Err(_) => Ok(None),
    }
}

fn selection(attrs: &Option<Vec<String>>) -> AttrSelection {
    attrs.clone().map(AttrSelection::Columns).unwrap_or_default()
}

enum Outcome {
    Ok,
    GateFailed(String),
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<Outcome> {
    match cmd {
        Command::Uniqueness { input, attrs, drop, small_k, ingest, output } => {
            let table = read_table(&input, &ingest.options(&drop))?;
            let attrs = attrs.unwrap_or_else(|| table.column_names());
            let report = uniqueness_report_with(&table, &attrs, &small_k)?;
            emit(&report, &output, stdout)?;
        }
        Command::Assess {
            left,
            right,
            keys,
            kind,
            baseline,
            max_rows,
            epsilon,
            attrs_left,
            attrs_right,
            drop_left,
            drop_right,
            ingest,
            output,
        } => {
            let cap = match max_rows {
                Some(m) => m,
                None => max_rows_from_env()?.unwrap_or(DEFAULT_MAX_OUTPUT_ROWS),
            };
            let spec = JoinSpec::parse_keys(&keys)?.with_kind(kind.into()).with_max_output_rows(cap);
            let a = read_table(&left, &ingest.options(&drop_left))?;
            let b = read_table(&right, &ingest.options(&drop_right))?;
            let opts = AssessOptions { epsilon, baseline: baseline.into() };
            let r = assess_pair(&a, &b, &spec, &selection(&attrs_left), &selection(&attrs_right), opts)?;
            emit(&r, &output, stdout)?;
        }
        Command::Generate { pairs, seed, out, gen, serial } => {
            let corpus = generate_corpus_with(&gen.params(), pairs, seed, !serial)?;
            let mut f = std::io::BufWriter::new(File::create(&out)?);
            corpus.write_jsonl(&mut f)?;
            f.flush()?;
            emit_json(
                &GenerateSummary {
                    out: out.display().to_string(),
                    examples: corpus.len(),
                    skipped: corpus.skipped,
                    master_seed: seed,
                },
                stdout,
            )?;
        }
        Command::Train { corpus, out, trees, depth, lr, min_leaf, seed } => {
            let corpus = read_corpus(&corpus)?;
            let hp = Hyperparams {
                n_trees: trees,
                max_depth: depth,
                learning_rate: lr,
                min_samples_leaf: min_leaf,
                seed,
            };
            let model = train(&corpus, &hp)?;
            std::fs::write(&out, save_model(&model)?)?;
            emit_json(
                &TrainSummary {
                    out: out.display().to_string(),
                    examples: corpus.len(),
                    trees: model.trees.len(),
                    init_prediction: model.init_prediction,
                },
                stdout,
            )?;
        }
        Command::Predict { model, ua, ub, epsilon, output } => {
            let model = load_model(&std::fs::read(&model)?)?;
            for (name, u) in [("ua", ua), ("ub", ub)] {
                if !(u > 0.0 && u <= 1.0) {
                    return Err(Error::Argument(format!("--{name} {u} is outside (0, 1]")));
                }
            }
            let signal = predict(&model, &[ua, ub])?;
            let p = Prediction { u_a: ua, u_b: ub, signal, direction: direction(signal, epsilon), epsilon };
            emit(&p, &output, stdout)?;
        }
        Command::Evaluate { model, corpus, min_accuracy, epsilon, output } => {
            let model = load_model(&std::fs::read(&model)?)?;
            let corpus = read_corpus(&corpus)?;
            let report = evaluate(&model, &corpus, epsilon)?;
            emit(&report, &output, stdout)?;
            if let Some(gate) = min_accuracy {
                if report.direction_accuracy < gate {
                    return Ok(Outcome::GateFailed(format!(
                        "direction accuracy {} is below --min-accuracy {gate}",
                        report.direction_accuracy
                    )));
                }
            }
        }
    }
    Ok(Outcome::Ok)
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::GateFailed(msg)) => {
            let _ = writeln!(stderr, "{}", error_line("accuracy_gate", &msg));
            EXIT_GATE
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            EXIT_PIPELINE
        }
    }
}
