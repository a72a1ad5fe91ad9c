//! Python bindings: the scoring primitives plus an `Engine` that trains on a
//! set of input files and answers recommendation queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;

use hybridrec::collaborative::{CfConfig, Metric, UserItemMatrix};
use hybridrec::corpus::{self, Dataset};
use hybridrec::engine::{self, TrainConfig};
use hybridrec::eval::{self, GroundTruth, TruthMode};
use hybridrec::fusion::{self, FusionConfig, Model, Ranking};
use hybridrec::sentiment::{self, Lexicon, MovieSentiment};
use hybridrec::weights::{self, LearnedWeights};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn open(path: &str) -> PyResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

fn parse_metric(name: &str) -> PyResult<Metric> {
    name.parse().map_err(value_error)
}

/// Tokens left after cleaning, lemmatising and stopword removal.
#[pyfunction]
fn preprocess(text: &str) -> Vec<String> {
    sentiment::preprocess(text, &Lexicon::bundled()).tokens
}

/// `{"compound", "pos", "neu", "neg"}` for one tweet.
#[pyfunction]
fn score_text<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let s = sentiment::score_text(text, &Lexicon::bundled());
    let out = PyDict::new(py);
    out.set_item("compound", s.compound)?;
    out.set_item("pos", s.positive)?;
    out.set_item("neu", s.neutral)?;
    out.set_item("neg", s.negative)?;
    Ok(out)
}

#[pyfunction]
fn compound_to_rating(x: f64) -> f64 {
    sentiment::compound_to_rating(x)
}

/// Sentiment rating of a movie from its tweets; 6.0 when there are none.
#[pyfunction]
fn movie_sentiment_rating(tweets: Vec<String>) -> f64 {
    let lexicon = Lexicon::bundled();
    let scores: Vec<_> = tweets.iter().map(|t| sentiment::score_text(t, &lexicon)).collect();
    sentiment::movie_sentiment(0, &scores).sentiment_rating
}

#[pyfunction]
#[pyo3(signature = (s_i, s_j, d = fusion::DEFAULT_D))]
fn sentiment_similarity(s_i: f64, s_j: f64, d: f64) -> f64 {
    fusion::sentiment_similarity(s_i, s_j, d)
}

#[pyfunction]
fn combined_score(h: f64, g: f64, omega1: f64, omega2: f64) -> PyResult<f64> {
    let cfg = FusionConfig::new(omega1, omega2, fusion::DEFAULT_D).map_err(value_error)?;
    Ok(fusion::combined_score(h, g, &cfg))
}

/// `(precision, hits)` of the first `n` recommendations.
#[pyfunction]
fn precision_at_n(recommended: Vec<u32>, relevant: BTreeSet<u32>, n: usize) -> PyResult<(f64, usize)> {
    let p = eval::precision_at_n(&recommended, &relevant, n).map_err(value_error)?;
    Ok((p.precision, p.hits))
}

#[pyfunction]
fn plcc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    eval::plcc(&x, &y).map_err(value_error)
}

#[pyfunction]
fn srocc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    eval::srocc(&x, &y).map_err(value_error)
}

#[pyfunction]
fn krcc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    eval::krcc(&x, &y).map_err(value_error)
}

/// Minimum-norm least squares for `q · F = S`, `F` given as `n` rows of
/// length `P`. Returns `(q, residual, rank)`.
#[pyfunction]
fn solve_weights(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> PyResult<(Vec<f64>, f64, usize)> {
    let s = weights::solve_rows(&rows, &targets).map_err(value_error)?;
    Ok((s.weights.values, s.residual, s.rank))
}

/// Co-interest counts for every movie pair `(i, j)`, `i < j`, in
/// lexicographic order. `cells[u][m]` is a rating or `None`.
#[pyfunction]
#[pyo3(signature = (cells, like_threshold = 7.0))]
fn co_interest(cells: Vec<Vec<Option<f64>>>, like_threshold: f64) -> PyResult<Vec<u64>> {
    let matrix = UserItemMatrix::from_dense(&cells).map_err(value_error)?;
    Ok(matrix.co_interest(like_threshold).map_err(value_error)?.counts)
}

/// KNN prediction for user index `u` and movie index `m`; `None` when nobody
/// else rated the movie.
#[pyfunction]
#[pyo3(signature = (cells, u, m, k = 30, metric = "cosine", normalized = false))]
fn predict_rating(
    cells: Vec<Vec<Option<f64>>>,
    u: usize,
    m: usize,
    k: usize,
    metric: &str,
    normalized: bool,
) -> PyResult<Option<f64>> {
    let matrix = UserItemMatrix::from_dense(&cells).map_err(value_error)?;
    let cfg = CfConfig {
        k,
        metric: parse_metric(metric)?,
        normalized,
    };
    let p = matrix.predict_rating(u, m, &cfg).map_err(value_error)?;
    Ok((!p.no_evidence).then_some(p.value))
}

/// `(user_id, movie_id, rating, timestamp)` per line.
#[pyfunction]
fn parse_ratings(text: &str) -> PyResult<Vec<(u64, u32, u8, i64)>> {
    let records = corpus::parse_ratings(text.as_bytes()).map_err(value_error)?;
    Ok(records
        .into_iter()
        .map(|r| (r.user_id, r.movie_id, r.rating, r.timestamp))
        .collect())
}

type MovieRow = (u32, String, i32, Vec<String>);

/// `(movie_id, title, year, genres)` per line.
#[pyfunction]
fn parse_movies(text: &str) -> PyResult<Vec<MovieRow>> {
    let records = corpus::parse_movies(text.as_bytes()).map_err(value_error)?;
    Ok(records
        .into_iter()
        .map(|m| (m.movie_id, m.title, m.release_year, m.genres.into_iter().collect()))
        .collect())
}

/// A trained recommender over a set of MovieTweetings-style input files.
#[pyclass(frozen)]
struct Engine {
    dataset: Dataset,
    sentiments: BTreeMap<u32, MovieSentiment>,
    weights: LearnedWeights,
    model: Model,
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (ratings, movies, users, metadata, tweets, min_year = 2014, k = 30, like_threshold = 7.0, metric = "cosine"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        py: Python<'_>,
        ratings: &str,
        movies: &str,
        users: &str,
        metadata: &str,
        tweets: &str,
        min_year: i32,
        k: usize,
        like_threshold: f64,
        metric: &str,
    ) -> PyResult<Self> {
        let ratings = corpus::parse_ratings(open(ratings)?).map_err(value_error)?;
        let movies = corpus::parse_movies(open(movies)?).map_err(value_error)?;
        let users = corpus::parse_users(open(users)?).map_err(value_error)?;
        let tweets = corpus::parse_tweets(open(tweets)?).map_err(value_error)?;
        let metadata = corpus::load_metadata(open(metadata)?).map_err(value_error)?;
        let config = TrainConfig {
            cf: CfConfig {
                k,
                metric: parse_metric(metric)?,
                normalized: false,
            },
            like_threshold,
            ..TrainConfig::default()
        };
        py.detach(move || {
            let (joined, _) = Dataset::join(ratings, movies, users, metadata.metadata, tweets);
            let dataset = joined.filter_by_year(min_year).retain_with_metadata();
            let training = engine::train(&dataset, &config).map_err(value_error)?;
            let sentiments = sentiment::dataset_sentiment(&dataset, &Lexicon::bundled());
            let model = engine::build_model(&dataset, &training.features, &training.weights, &sentiments)
                .map_err(value_error)?;
            Ok(Engine {
                dataset,
                sentiments,
                weights: training.weights,
                model,
            })
        })
    }

    fn movie_ids(&self) -> Vec<u32> {
        self.model.movie_ids().to_vec()
    }

    /// Attribute name to normalised weight.
    fn weights(&self) -> BTreeMap<String, f64> {
        self.weights
            .attribute_names
            .iter()
            .cloned()
            .zip(self.weights.normalized.values.iter().copied())
            .collect()
    }

    fn sentiment_rating(&self, movie_id: u32) -> PyResult<f64> {
        self.model.sentiment_rating(movie_id).map_err(value_error)
    }

    /// Top-N list as dicts with `movie_id`, `title`, `H`, `G`, `CS` and
    /// `neutral_sentiment`.
    #[pyo3(signature = (movie_id, top = 10, omega2 = 0.5, d = fusion::DEFAULT_D))]
    fn recommend<'py>(
        &self,
        py: Python<'py>,
        movie_id: u32,
        top: usize,
        omega2: f64,
        d: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = FusionConfig::with_sentiment_weight(omega2, d).map_err(value_error)?;
        let list = self.model.recommend(movie_id, top, &cfg).map_err(value_error)?;
        list.entries
            .iter()
            .map(|e| {
                let row = PyDict::new(py);
                row.set_item("movie_id", e.movie_id)?;
                row.set_item("title", &e.title)?;
                row.set_item("H", e.h)?;
                row.set_item("G", e.g)?;
                row.set_item("CS", e.cs)?;
                row.set_item("neutral_sentiment", e.neutral_sentiment)?;
                Ok(row)
            })
            .collect()
    }

    /// Mean precision and hit counts against a `truth.csv`, for the fused
    /// model and both baselines.
    #[pyo3(signature = (truth, mode = "union", omega2 = 0.5, d = fusion::DEFAULT_D))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        truth: &str,
        mode: &str,
        omega2: f64,
        d: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode: TruthMode = mode.parse().map_err(value_error)?;
        let truth = GroundTruth::read_csv(open(truth)?, mode).map_err(value_error)?;
        let cfg = FusionConfig::with_sentiment_weight(omega2, d).map_err(value_error)?;
        let out = PyDict::new(py);
        for (name, ranking) in [
            ("proposed", Ranking::Fused(cfg)),
            ("pure_hybrid", Ranking::PureHybrid),
            ("sentiment_only", Ranking::SentimentOnly(d)),
        ] {
            let report = eval::evaluate(&self.model, &truth, ranking, &eval::DEFAULT_TOP_N).map_err(value_error)?;
            let row = PyDict::new(py);
            row.set_item("precision", report.mean_precision)?;
            row.set_item("hits", report.mean_hits)?;
            out.set_item(name, row)?;
        }
        let (sent, external) = engine::sentiment_vs_external(&self.dataset, &self.sentiments);
        if let Ok(block) = eval::correlation_block(&sent, &external) {
            out.set_item("correlation", (block.plcc, block.srocc, block.krcc))?;
        }
        Ok(out)
    }
}

#[pymodule]
fn pyhybridrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(score_text, m)?)?;
    m.add_function(wrap_pyfunction!(compound_to_rating, m)?)?;
    m.add_function(wrap_pyfunction!(movie_sentiment_rating, m)?)?;
    m.add_function(wrap_pyfunction!(sentiment_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(combined_score, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_n, m)?)?;
    m.add_function(wrap_pyfunction!(plcc, m)?)?;
    m.add_function(wrap_pyfunction!(srocc, m)?)?;
    m.add_function(wrap_pyfunction!(krcc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_weights, m)?)?;
    m.add_function(wrap_pyfunction!(co_interest, m)?)?;
    m.add_function(wrap_pyfunction!(predict_rating, m)?)?;
    m.add_function(wrap_pyfunction!(parse_ratings, m)?)?;
    m.add_function(wrap_pyfunction!(parse_movies, m)?)?;
    m.add_class::<Engine>()?;
    Ok(())
}
