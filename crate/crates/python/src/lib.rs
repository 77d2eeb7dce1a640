//! Python bindings: tables, uniqueness reports, joins, leakage assessment,
//! corpus generation, and the boosted-tree predictor.
//!
//! Structured results (reports, assessments) come back as plain dicts with the
//! same shape as the CLI's JSON output.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use joinguard::assess::{self, AssessOptions, AttrSelection, BaselineMode};
use joinguard::join::{JoinKind, JoinSpec};
use joinguard::tabular::{self, CellValue, IngestOptions};
use joinguard::{eval, metrics, predictor, synth};

create_exception!(pyjoinguard, JoinGuardError, PyException);

fn err(e: joinguard::Error) -> PyErr {
    JoinGuardError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| JoinGuardError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn join_spec(keys: Vec<(String, String)>, kind: &str, max_rows: Option<u64>) -> PyResult<JoinSpec> {
    let kind: JoinKind = kind.parse().map_err(err)?;
    let mut spec = JoinSpec::new(keys).with_kind(kind);
    if let Some(m) = max_rows {
        spec = spec.with_max_output_rows(m);
    }
    spec.validate().map_err(err)?;
    Ok(spec)
}

fn selection(attrs: Option<Vec<String>>) -> AttrSelection {
    attrs.map(AttrSelection::Columns).unwrap_or_default()
}

#[pyclass(name = "Table", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyTable {
    inner: tabular::Table,
}

#[pymethods]
impl PyTable {
    /// Build from column names and rows of strings (`None` or "" is missing).
    #[new]
    fn new(columns: Vec<String>, rows: Vec<Vec<Option<String>>>) -> PyResult<Self> {
        let opts = IngestOptions::default();
        let cols = columns.into_iter().map(tabular::ColumnSpec::attribute).collect();
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|c| c.map_or(CellValue::Missing, |s| tabular::canonicalize_value(&s, &opts)))
                    .collect()
            })
            .collect();
        let inner = tabular::Table::new(cols, rows, "").map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, drop=None, delimiter=',', has_header=true, case_fold=false))]
    fn from_csv(
        path: &str,
        drop: Option<Vec<String>>,
        delimiter: char,
        has_header: bool,
        case_fold: bool,
    ) -> PyResult<Self> {
        let opts = IngestOptions {
            delimiter,
            has_header,
            case_fold,
            drop_columns: drop.unwrap_or_default(),
            ..Default::default()
        };
        let f = File::open(path).map_err(|e| err(e.into()))?;
        let inner = tabular::load_table_labeled(BufReader::new(f), &opts, path).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.column_names()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    /// Rows as lists of strings, with `None` for missing cells.
    fn rows(&self) -> Vec<Vec<Option<String>>> {
        self.inner.rows().iter().map(|r| r.iter().map(|c| c.as_str().map(str::to_string)).collect()).collect()
    }

    fn project(&self, attrs: Vec<String>) -> PyResult<Vec<Vec<Option<String>>>> {
        let p = tabular::project(&self.inner, &attrs).map_err(err)?;
        Ok(p.into_iter().map(|r| r.iter().map(|c| c.as_str().map(str::to_string)).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Table(columns={:?}, n_rows={})", self.inner.column_names(), self.inner.n_rows())
    }
}

#[pyfunction]
#[pyo3(signature = (table, attrs=None, small_k=None))]
fn uniqueness_report<'py>(
    py: Python<'py>,
    table: &PyTable,
    attrs: Option<Vec<String>>,
    small_k: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let attrs = attrs.unwrap_or_else(|| table.inner.column_names());
    let k = small_k.unwrap_or_else(|| metrics::DEFAULT_SMALL_GROUP_THRESHOLDS.to_vec());
    let r = metrics::uniqueness_report_with(&table.inner, &attrs, &k).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn k_anonymity(table: &PyTable, attrs: Vec<String>) -> PyResult<usize> {
    metrics::k_anonymity(&table.inner, &attrs).map_err(err)
}

#[pyfunction]
fn small_group_fraction(table: &PyTable, attrs: Vec<String>, k: usize) -> PyResult<f64> {
    metrics::small_group_fraction(&table.inner, &attrs, k).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, keys, kind="inner", max_rows=None))]
fn join(
    a: &PyTable,
    b: &PyTable,
    keys: Vec<(String, String)>,
    kind: &str,
    max_rows: Option<u64>,
) -> PyResult<PyTable> {
    let spec = join_spec(keys, kind, max_rows)?;
    let inner = joinguard::join::join(&a.inner, &b.inner, &spec).map_err(err)?;
    Ok(PyTable { inner })
}

#[pyfunction]
fn estimate_join_cardinality(a: &PyTable, b: &PyTable, keys: Vec<(String, String)>) -> PyResult<u64> {
    let spec = join_spec(keys, "inner", None)?;
    joinguard::join::estimate_join_cardinality(&a.inner, &b.inner, &spec).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, keys, kind="inner", baseline="max", attrs_a=None, attrs_b=None, epsilon=assess::DEFAULT_EPSILON, max_rows=None))]
#[allow(clippy::too_many_arguments)]
fn assess_pair<'py>(
    py: Python<'py>,
    a: &PyTable,
    b: &PyTable,
    keys: Vec<(String, String)>,
    kind: &str,
    baseline: &str,
    attrs_a: Option<Vec<String>>,
    attrs_b: Option<Vec<String>>,
    epsilon: f64,
    max_rows: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = join_spec(keys, kind, max_rows)?;
    let baseline: BaselineMode = baseline.parse().map_err(err)?;
    let opts = AssessOptions { epsilon, baseline };
    let r = assess::assess_pair(&a.inner, &b.inner, &spec, &selection(attrs_a), &selection(attrs_b), opts)
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn leakage_signal(u_a: f64, u_b: f64, u_ab: f64) -> PyResult<f64> {
    assess::leakage_signal(u_a, u_b, u_ab).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (delta, epsilon=assess::DEFAULT_EPSILON))]
fn direction(delta: f64, epsilon: f64) -> String {
    assess::direction(delta, epsilon).to_string()
}

#[pyfunction]
#[pyo3(signature = (predicted, actual, epsilon=assess::DEFAULT_EPSILON))]
fn direction_accuracy(predicted: Vec<f64>, actual: Vec<f64>, epsilon: f64) -> PyResult<f64> {
    eval::direction_accuracy(&predicted, &actual, epsilon).map_err(err)
}

#[pyfunction]
fn rank_correlation(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    eval::rank_correlation(&x, &y).map_err(err)
}

#[pyclass(name = "Corpus", frozen)]
pub struct PyCorpus {
    inner: synth::LabeledCorpus,
}

#[pymethods]
impl PyCorpus {
    /// Generate `n_pairs` labeled pairs with default generator parameters.
    #[staticmethod]
    fn generate(py: Python<'_>, n_pairs: usize, seed: u64) -> PyResult<Self> {
        let params = synth::GeneratorParams::default();
        let inner = py.detach(|| synth::generate_corpus(&params, n_pairs, seed)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_jsonl(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| err(e.into()))?;
        let inner = synth::LabeledCorpus::read_jsonl(BufReader::new(f)).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_jsonl(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| err(e.into()))?;
        self.inner.write_jsonl(BufWriter::new(f)).map_err(err)
    }

    fn split(&self, frac: f64) -> (PyCorpus, PyCorpus) {
        let (a, b) = self.inner.split(frac);
        (PyCorpus { inner: a }, PyCorpus { inner: b })
    }

    #[getter]
    fn features(&self) -> Vec<[f64; 2]> {
        self.inner.features()
    }

    #[getter]
    fn targets(&self) -> Vec<f64> {
        self.inner.targets()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Model", frozen)]
pub struct PyModel {
    inner: predictor::GbdtModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (corpus, n_trees=100, max_depth=3, learning_rate=0.1, min_samples_leaf=2, seed=0))]
    fn train(
        py: Python<'_>,
        corpus: &PyCorpus,
        n_trees: usize,
        max_depth: usize,
        learning_rate: f64,
        min_samples_leaf: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let hp = predictor::Hyperparams { n_trees, max_depth, learning_rate, min_samples_leaf, seed };
        let inner = py.detach(|| predictor::train(&corpus.inner, &hp)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn baseline(corpus: &PyCorpus) -> PyResult<Self> {
        Ok(Self { inner: predictor::baseline_constant(&corpus.inner).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| err(e.into()))?;
        Ok(Self { inner: predictor::load_model(&bytes).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let bytes = predictor::save_model(&self.inner).map_err(err)?;
        std::fs::write(path, bytes).map_err(|e| err(e.into()))
    }

    fn predict(&self, u_a: f64, u_b: f64) -> PyResult<f64> {
        self.inner.predict(&[u_a, u_b]).map_err(err)
    }

    #[pyo3(signature = (corpus, epsilon=assess::DEFAULT_EPSILON))]
    fn evaluate<'py>(&self, py: Python<'py>, corpus: &PyCorpus, epsilon: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = eval::evaluate(&self.inner, &corpus.inner, epsilon).map_err(err)?;
        to_py(py, &r)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }

    #[getter]
    fn init_prediction(&self) -> f64 {
        self.inner.init_prediction
    }
}

#[pymodule]
pub fn pyjoinguard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("JoinGuardError", m.py().get_type::<JoinGuardError>())?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(uniqueness_report, m)?)?;
    m.add_function(wrap_pyfunction!(k_anonymity, m)?)?;
    m.add_function(wrap_pyfunction!(small_group_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(join, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_join_cardinality, m)?)?;
    m.add_function(wrap_pyfunction!(assess_pair, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_signal, m)?)?;
    m.add_function(wrap_pyfunction!(direction, m)?)?;
    m.add_function(wrap_pyfunction!(direction_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(rank_correlation, m)?)?;
    Ok(())
}
