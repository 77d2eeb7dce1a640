//! Prints corpus statistics and held-out scores for a seeded default corpus.
//!
//! cargo run --release --example corpus_stats -- [pairs] [seed]

use std::collections::BTreeMap;
use std::time::Instant;

use joinguard::assess::{direction, DEFAULT_EPSILON};
use joinguard::eval::evaluate;
use joinguard::predictor::{train, Hyperparams};
use joinguard::synth::{generate_corpus, GeneratorParams};

fn main() -> joinguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let pairs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let t = Instant::now();
    let corpus = generate_corpus(&GeneratorParams::default(), pairs, seed)?;
    println!("generated {} pairs ({} skipped) in {:.2?}", corpus.len(), corpus.skipped, t.elapsed());

    let mut dirs: BTreeMap<String, usize> = BTreeMap::new();
    for e in &corpus.examples {
        *dirs.entry(direction(e.target, DEFAULT_EPSILON).to_string()).or_default() += 1;
    }
    println!("target directions: {dirs:?}");
    let ua: Vec<f64> = corpus.examples.iter().map(|e| e.features[0]).collect();
    let lo = ua.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ua.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("u_a range: [{lo:.4}, {hi:.4}]");

    let (tr, te) = corpus.split(0.8);
    let t = Instant::now();
    let model = train(&tr, &Hyperparams::default())?;
    println!("trained in {:.2?}", t.elapsed());
    let report = evaluate(&model, &te, DEFAULT_EPSILON)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    let full = evaluate(&model, &corpus, DEFAULT_EPSILON)?;
    println!("spearman (full corpus): {:?}", full.spearman_u_vs_signal);
    Ok(())
}
