mod common;

use hybridrec::engine::{self, TrainConfig};
use hybridrec::eval::{evaluate, weight_sweep};
use hybridrec::fusion::Ranking;
use hybridrec::sentiment::{dataset_sentiment, Lexicon};

#[test]
fn interior_weight_beats_both_endpoints_and_endpoints_match_baselines() {
    let planted = common::planted_corpus(99, 40, 160);
    let training = engine::train(&planted.dataset, &TrainConfig::default()).unwrap();
    let sentiments = dataset_sentiment(&planted.dataset, &Lexicon::bundled());
    let model = engine::build_model(&planted.dataset, &training.features, &training.weights, &sentiments).unwrap();

    let top_n = [5, 10];
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows = weight_sweep(&model, &planted.truth, &grid, 10.0, &top_n).unwrap();
    assert_eq!(rows.len(), grid.len());

    let hybrid = evaluate(&model, &planted.truth, Ranking::PureHybrid, &top_n).unwrap();
    let sentiment = evaluate(&model, &planted.truth, Ranking::SentimentOnly(10.0), &top_n).unwrap();
    assert_eq!(rows[0].mean_hits, hybrid.mean_hits);
    assert_eq!(rows[0].mean_precision, hybrid.mean_precision);
    assert_eq!(rows[4].mean_hits, sentiment.mean_hits);
    assert_eq!(rows[4].mean_precision, sentiment.mean_precision);

    let best_interior = rows[1..4]
        .iter()
        .map(|r| r.mean_precision[0])
        .fold(f64::MIN, f64::max);
    assert!(best_interior > rows[0].mean_precision[0]);
    assert!(best_interior > rows[4].mean_precision[0]);
}

#[test]
fn sweep_is_deterministic() {
    let planted = common::planted_corpus(3, 20, 60);
    let training = engine::train(&planted.dataset, &TrainConfig::default()).unwrap();
    let sentiments = dataset_sentiment(&planted.dataset, &Lexicon::bundled());
    let model = engine::build_model(&planted.dataset, &training.features, &training.weights, &sentiments).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let a = weight_sweep(&model, &planted.truth, &grid, 10.0, &[5, 10]).unwrap();
    let b = weight_sweep(&model, &planted.truth, &grid, 10.0, &[5, 10]).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().zip(&grid).all(|(row, w)| row.omega2 == *w));
}
