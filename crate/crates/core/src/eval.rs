//! Direction accuracy, error magnitudes, and rank correlation.

use serde::{Deserialize, Serialize};

use crate::assess::{direction, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::predictor::GbdtModel;
use crate::synth::LabeledCorpus;

fn check_pair(predicted: &[f64], actual: &[f64]) -> Result<()> {
    if predicted.is_empty() {
        return Err(Error::Argument("empty input".into()));
    }
    if predicted.len() != actual.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} predicted vs {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Share of positions whose three-way direction (Increase / Decrease /
/// NoChange) agrees between `predicted` and `actual`.
pub fn direction_accuracy(predicted: &[f64], actual: &[f64], epsilon: f64) -> Result<f64> {
    check_pair(predicted, actual)?;
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| direction(**p, epsilon) == direction(**a, epsilon))
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// `(mae, rmse)`
pub fn regression_metrics(predicted: &[f64], actual: &[f64]) -> Result<(f64, f64)> {
    check_pair(predicted, actual)?;
    let n = predicted.len() as f64;
    let (abs, sq) = predicted.iter().zip(actual).fold((0.0, 0.0), |(abs, sq), (p, a)| {
        let d = p - a;
        (abs + d.abs(), sq + d * d)
    });
    Ok((abs / n, (sq / n).sqrt()))
}

/// 1-based ranks, ties get the average of the ranks they span.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Argument("rank correlation needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Argument("values must be finite".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one input has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub direction_accuracy: f64,
    pub baseline_direction_accuracy: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when fewer than 3 examples or a constant input make it undefined.
    pub spearman_u_vs_signal: Option<f64>,
    pub epsilon: f64,
}

/// Scores `model` on `corpus`. The constant baseline predicts
/// `model.init_prediction`, which is the mean training target.
pub fn evaluate(model: &GbdtModel, corpus: &LabeledCorpus, epsilon: f64) -> Result<EvalReport> {
    evaluate_against(model, &GbdtModel::constant(model.init_prediction), corpus, epsilon)
}

pub fn evaluate_against(
    model: &GbdtModel,
    baseline: &GbdtModel,
    corpus: &LabeledCorpus,
    epsilon: f64,
) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(Error::Argument("evaluation corpus is empty".into()));
    }
    let actual = corpus.targets();
    let predict_all = |m: &GbdtModel| -> Result<Vec<f64>> {
        corpus.examples.iter().map(|e| m.predict(&e.features)).collect()
    };
    let predicted = predict_all(model)?;
    let base = predict_all(baseline)?;
    let (mae, rmse) = regression_metrics(&predicted, &actual)?;
    let max_u: Vec<f64> = corpus.examples.iter().map(|e| e.features[0].max(e.features[1])).collect();
    let spearman = match rank_correlation(&max_u, &actual) {
        Ok(r) => Some(r),
        Err(Error::Argument(_) | Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        n: actual.len(),
        direction_accuracy: direction_accuracy(&predicted, &actual, epsilon)?,
        baseline_direction_accuracy: direction_accuracy(&base, &actual, epsilon)?,
        mae,
        rmse,
        spearman_u_vs_signal: spearman,
        epsilon,
    })
}

pub fn evaluate_default(model: &GbdtModel, corpus: &LabeledCorpus) -> Result<EvalReport> {
    evaluate(model, corpus, DEFAULT_EPSILON)
}
