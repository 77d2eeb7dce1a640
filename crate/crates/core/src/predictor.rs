//! Squared-error gradient boosting over depth-limited regression trees.
//!
//! The model maps `[u_a, u_b]` to the predicted leakage signal:
//!
//! ```text
//! predict(x) = init_prediction + learning_rate * sum_t leaf_t(x)
//! ```
//!
//! Trees are grown greedily on residuals. Candidate thresholds are midpoints
//! between consecutive distinct sorted feature values; a row goes left when
//! `x[feature] <= threshold`. Equal-gain candidates resolve to the lowest
//! feature index, then the lowest threshold, so training is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{LabeledCorpus, LabeledExample};

pub const MODEL_VERSION: &str = "joinguard-gbdt/1";

pub fn feature_names() -> Vec<String> {
    vec!["u_a".to_string(), "u_b".to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Recorded for provenance; training itself draws no random numbers.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_samples_leaf: 2, seed: 0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 || self.max_depth < 1 || self.min_samples_leaf < 1 {
            return Err(Error::Argument("n_trees, max_depth and min_samples_leaf must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Argument(format!("learning_rate {} is outside (0, 1]", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Nodes in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Persistence("tree with no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::Persistence(format!("non-finite leaf at node {i}")));
                }
                Node::Split { feature, threshold, left, right } => {
                    // Children strictly after their parent rules out cycles.
                    let ok = feature < n_features
                        && threshold.is_finite()
                        && left > i
                        && right > i
                        && left < self.nodes.len()
                        && right < self.nodes.len();
                    if !ok {
                        return Err(Error::Persistence(format!("malformed split at node {i}")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtModel {
    pub version: String,
    pub feature_names: Vec<String>,
    pub init_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn constant(value: f64) -> Self {
        Self {
            version: MODEL_VERSION.to_string(),
            feature_names: feature_names(),
            init_prediction: value,
            learning_rate: 1.0,
            trees: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn raw_predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        self.init_prediction + self.learning_rate * sum
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        predict(self, features)
    }

    fn check(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Persistence(format!(
                "unsupported model version `{}` (expected `{MODEL_VERSION}`)",
                self.version
            )));
        }
        if self.feature_names.is_empty() {
            return Err(Error::Persistence("model has no features".into()));
        }
        if !self.init_prediction.is_finite() || !self.learning_rate.is_finite() {
            return Err(Error::Persistence("non-finite model parameters".into()));
        }
        self.trees.iter().try_for_each(|t| t.check(self.n_features()))
    }
}

pub fn predict(model: &GbdtModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.n_features() {
        return Err(Error::Argument(format!(
            "expected {} features, got {}",
            model.n_features(),
            features.len()
        )));
    }
    if features.iter().any(|f| !f.is_finite()) {
        return Err(Error::Argument("features must be finite".into()));
    }
    Ok(model.raw_predict(features))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct TreeBuilder<'a> {
    /// Column-major features: `columns[f][row]`.
    columns: &'a [Vec<f64>],
    residuals: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let vals: Vec<f64> = rows.iter().map(|&r| self.residuals[r]).collect();
        self.nodes.push(Node::Leaf { value: mean(&vals) });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.residuals[r]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<Split> = None;

        for (f, col) in self.columns.iter().enumerate() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.residuals[order[k - 1]];
                let (lo, hi) = (col[order[k - 1]], col[order[k]]);
                if lo == hi || k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - parent;
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                // Strict improvement keeps the earliest (feature, threshold) on ties.
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return self.leaf(rows);
        }
        let Some(split) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let col = &self.columns[split.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= split.threshold);

        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[me] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        me
    }
}

fn fit_tree(columns: &[Vec<f64>], residuals: &[f64], hp: &Hyperparams) -> Tree {
    let mut b = TreeBuilder {
        columns,
        residuals,
        max_depth: hp.max_depth,
        min_leaf: hp.min_samples_leaf,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..residuals.len()).collect();
    b.build(&rows, 0);
    Tree { nodes: b.nodes }
}

fn check_examples(examples: &[LabeledExample], min: usize) -> Result<()> {
    if examples.len() < min {
        return Err(Error::Training(format!("need at least {min} examples, got {}", examples.len())));
    }
    for (i, e) in examples.iter().enumerate() {
        if !e.target.is_finite() || e.features.iter().any(|f| !f.is_finite()) {
            return Err(Error::Training(format!("non-finite value in example {i}")));
        }
    }
    Ok(())
}

pub fn train(corpus: &LabeledCorpus, hp: &Hyperparams) -> Result<GbdtModel> {
    train_examples(&corpus.examples, hp).map(|(m, _)| m)
}

/// Trains and also returns the training MSE after the constant stage and
/// after every tree (`n_trees + 1` values).
pub fn train_examples(examples: &[LabeledExample], hp: &Hyperparams) -> Result<(GbdtModel, Vec<f64>)> {
    hp.validate()?;
    check_examples(examples, 2)?;
    let n = examples.len();
    let targets: Vec<f64> = examples.iter().map(|e| e.target).collect();
    let columns: Vec<Vec<f64>> = (0..2).map(|f| examples.iter().map(|e| e.features[f]).collect()).collect();

    let init = mean(&targets);
    let lr = hp.learning_rate;
    // Running per-row sum of leaf values, so predictions on training rows are
    // computed exactly as `predict` computes them.
    let mut leaf_sums = vec![0.0; n];
    let pred = |s: f64| init + lr * s;
    let mse =
        |sums: &[f64]| targets.iter().zip(sums).map(|(y, &s)| (y - pred(s)).powi(2)).sum::<f64>() / n as f64;

    let mut history = vec![mse(&leaf_sums)];
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        let residuals: Vec<f64> = targets.iter().zip(&leaf_sums).map(|(y, &s)| y - pred(s)).collect();
        let tree = fit_tree(&columns, &residuals, hp);
        for (i, s) in leaf_sums.iter_mut().enumerate() {
            let x = [columns[0][i], columns[1][i]];
            *s += tree.leaf_value(&x);
        }
        trees.push(tree);
        history.push(mse(&leaf_sums));
    }

    let model = GbdtModel {
        version: MODEL_VERSION.to_string(),
        feature_names: feature_names(),
        init_prediction: init,
        learning_rate: lr,
        trees,
    };
    Ok((model, history))
}

/// Zero-tree model that predicts the mean target everywhere.
pub fn baseline_constant(corpus: &LabeledCorpus) -> Result<GbdtModel> {
    check_examples(&corpus.examples, 1)?;
    Ok(GbdtModel::constant(mean(&corpus.targets())))
}

pub fn save_model(model: &GbdtModel) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(model).map_err(|e| Error::Persistence(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_model(bytes: &[u8]) -> Result<GbdtModel> {
    let model: GbdtModel = serde_json::from_slice(bytes).map_err(|e| Error::Persistence(e.to_string()))?;
    model.check()?;
    Ok(model)
}
