use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use hybridrec::content::FeatureMatrix;
use hybridrec::corpus::{self, format_movie_id, Dataset};
use hybridrec::engine;
use hybridrec::eval::{self, EvalReport, GroundTruth};
use hybridrec::fusion::{Model, Ranking};
use hybridrec::sentiment::{self, Lexicon, MovieSentiment};
use hybridrec::weights::LearnedWeights;

use crate::artifact;
use crate::config::Config;

pub const DATASET: &str = "dataset.json";
pub const INGEST_REPORT: &str = "ingest_report.txt";
pub const SENTIMENT: &str = "sentiment.csv";
pub const FEATURES: &str = "features.csv";
pub const CO_INTEREST: &str = "co_interest.csv";
pub const WEIGHTS: &str = "weights.csv";
pub const EVAL_REPORT: &str = "eval_report.csv";
pub const EVAL_COMPARISON: &str = "eval_comparison.csv";
pub const EVAL_SUMMARY: &str = "eval_summary.txt";
pub const SWEEP: &str = "sweep.csv";

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn parse_input<T>(
    config: &Config,
    name: &str,
    parse: impl FnOnce(BufReader<File>) -> corpus::Result<T>,
) -> Result<T> {
    let path = config.input(name)?;
    parse(open(&path)?).with_context(|| format!("{}", path.display()))
}

fn write_artifact(config: &Config, name: &str, body: &[u8]) -> Result<()> {
    let path = artifact::write(&config.out_dir, name, &config.hash, body)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn csv_bytes<E>(write: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), E>) -> Result<Vec<u8>>
where
    E: std::error::Error + Send + Sync + 'static,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn ingest(config: &Config) -> Result<()> {
    let ratings = parse_input(config, "ratings", corpus::parse_ratings)?;
    let movies = parse_input(config, "movies", corpus::parse_movies)?;
    let users = parse_input(config, "users", corpus::parse_users)?;
    let tweets = parse_input(config, "tweets", corpus::parse_tweets)?;
    let metadata_path = config.input("metadata")?;
    let metadata = corpus::load_metadata(open(&metadata_path)?)
        .with_context(|| format!("{}", metadata_path.display()))?;

    let counts = (ratings.len(), movies.len(), users.len(), tweets.len());
    let (joined, stats) = Dataset::join(ratings, movies, users, metadata.metadata, tweets);
    let min_year = config.file.filter.min_year;
    let recent = joined.filter_by_year(min_year);
    let dataset = recent.retain_with_metadata();

    let mut report = String::new();
    let _ = writeln!(report, "ratings_read={}", counts.0);
    let _ = writeln!(report, "movies_read={}", counts.1);
    let _ = writeln!(report, "users_read={}", counts.2);
    let _ = writeln!(report, "tweets_read={}", counts.3);
    let _ = writeln!(report, "metadata_uninformative={}", metadata.dropped);
    let _ = writeln!(report, "metadata_duplicates={}", metadata.duplicates);
    let _ = writeln!(report, "duplicate_ratings={}", stats.duplicate_ratings);
    let _ = writeln!(report, "unresolved_ratings={}", stats.unresolved_ratings);
    let _ = writeln!(report, "unresolved_metadata={}", stats.unresolved_metadata);
    let _ = writeln!(report, "unresolved_tweets={}", stats.unresolved_tweets);
    let _ = writeln!(report, "min_year={min_year}");
    let _ = writeln!(report, "movies_after_year_filter={}", recent.movies.len());
    let _ = writeln!(report, "ratings_after_year_filter={}", recent.ratings.len());
    let _ = writeln!(report, "movies_kept={}", dataset.movies.len());
    let _ = writeln!(report, "ratings_kept={}", dataset.ratings.len());
    let _ = writeln!(report, "raters_kept={}", dataset.rated_user_count());
    let _ = writeln!(
        report,
        "tweets_kept={}",
        dataset.tweets.values().map(Vec::len).sum::<usize>()
    );

    let mut json = serde_json::to_vec_pretty(&dataset)?;
    json.push(b'\n');
    write_artifact(config, DATASET, &json)?;
    write_artifact(config, INGEST_REPORT, report.as_bytes())?;
    print!("{report}");
    Ok(())
}

fn load_dataset(config: &Config) -> Result<Dataset> {
    let body = artifact::read(&config.out_dir, DATASET, "ingest", &config.hash)?;
    serde_json::from_str(&body).context("dataset.json is unreadable: re-run ingest")
}

fn load_lexicon(config: &Config) -> Result<Lexicon> {
    if !config.has_input("lexicon") {
        return Ok(Lexicon::bundled());
    }
    let dir = config.input("lexicon")?;
    let lexicon = Lexicon::from_readers(
        open(&dir.join("lexicon.tsv"))?,
        open(&dir.join("boosters.txt"))?,
        open(&dir.join("negators.txt"))?,
        open(&dir.join("stopwords.txt"))?,
    )
    .with_context(|| format!("lexicon in {}", dir.display()))?;
    Ok(lexicon)
}

pub fn sentiment(config: &Config) -> Result<()> {
    let dataset = load_dataset(config)?;
    let lexicon = load_lexicon(config)?;
    let sentiments = sentiment::dataset_sentiment(&dataset, &lexicon);
    let body = csv_bytes(|w| sentiment::write_sentiment_csv(w, &sentiments))?;
    write_artifact(config, SENTIMENT, &body)?;
    let unobserved = sentiments.values().filter(|s| s.is_unobserved()).count();
    println!(
        "sentiment: {} movies scored, {unobserved} without tweets (neutral rating)",
        sentiments.len()
    );
    Ok(())
}

pub fn train(config: &Config) -> Result<()> {
    let dataset = load_dataset(config)?;
    let training = engine::train(&dataset, &config.train_config())?;
    write_artifact(config, FEATURES, &csv_bytes(|w| training.features.write_csv(w))?)?;
    write_artifact(config, CO_INTEREST, &csv_bytes(|w| training.co_interest.write_csv(w))?)?;
    write_artifact(config, WEIGHTS, &csv_bytes(|w| training.weights.write_csv(w))?)?;
    println!(
        "train: {} movies, {} pairs, {} observed and {} predicted ratings, rank {} of {}{}",
        training.features.movie_ids().len(),
        training.features.n_pairs(),
        training.observed_entries,
        training.predicted_entries,
        training.solution.rank,
        training.features.n_features(),
        if training.solution.rank_deficient {
            " (rank deficient, minimum-norm weights)"
        } else {
            ""
        }
    );
    if training.weights.normalized.degenerate {
        println!("train: learned weights are constant; using equal weights");
    }
    for ((name, raw), norm) in training
        .weights
        .attribute_names
        .iter()
        .zip(&training.weights.raw.values)
        .zip(&training.weights.normalized.values)
    {
        println!("  {name:<22} raw {raw:>12.6}  normalized {norm:.6}");
    }
    Ok(())
}

struct Trained {
    dataset: Dataset,
    sentiments: BTreeMap<u32, MovieSentiment>,
    model: Model,
}

fn load_model(config: &Config) -> Result<Trained> {
    let dataset = load_dataset(config)?;
    let features = FeatureMatrix::read_csv(
        artifact::read(&config.out_dir, FEATURES, "train", &config.hash)?.as_bytes(),
    )
    .context("features.csv is unreadable: re-run train")?;
    let weights = LearnedWeights::read_csv(
        artifact::read(&config.out_dir, WEIGHTS, "train", &config.hash)?.as_bytes(),
    )
    .context("weights.csv is unreadable: re-run train")?;
    ensure!(
        weights.attribute_names == features.attribute_names(),
        "weights.csv and features.csv disagree on attributes: re-run train"
    );
    let sentiments = sentiment::read_sentiment_csv(
        artifact::read(&config.out_dir, SENTIMENT, "sentiment", &config.hash)?.as_bytes(),
    )
    .context("sentiment.csv is unreadable: re-run sentiment")?;
    let model = engine::build_model(&dataset, &features, &weights, &sentiments)?;
    Ok(Trained {
        dataset,
        sentiments,
        model,
    })
}

/// Accepts `0451279`, `451279` or `tt0451279`.
pub fn parse_movie_id(text: &str) -> Result<u32> {
    let digits = text.trim().trim_start_matches("tt");
    digits
        .parse()
        .with_context(|| format!("'{text}' is not a movie id"))
}

pub fn recommend(config: &Config, movie: &str, top: usize) -> Result<()> {
    ensure!(top >= 1, "--top must be at least 1");
    let movie_id = parse_movie_id(movie)?;
    let trained = load_model(config)?;
    if !trained.model.contains(movie_id) {
        bail!(
            "movie {} is not in the trained catalog ({} movies)",
            format_movie_id(movie_id),
            trained.model.movie_ids().len()
        );
    }
    let list = trained.model.recommend(movie_id, top, &config.fusion()?)?;
    let body = csv_bytes(|w| list.write_csv(w))?;
    let name = format!("recommend_{}.csv", format_movie_id(movie_id));
    write_artifact(config, &name, &body)?;
    print!("{}{}", artifact::header(&config.hash), String::from_utf8(body)?);
    for e in list.entries.iter().filter(|e| e.neutral_sentiment) {
        log::warn!("{} has no tweets; its sentiment rating is neutral", format_movie_id(e.movie_id));
    }
    Ok(())
}

fn load_truth(config: &Config) -> Result<GroundTruth> {
    let path = config
        .input("truth")
        .context("evaluation needs a ground-truth file")?;
    GroundTruth::read_csv(open(&path)?, config.file.eval.truth_mode)
        .with_context(|| format!("{}", path.display()))
}

fn comparison_row(name: &str, report: &EvalReport) -> Vec<String> {
    let mut row = vec![name.to_string()];
    row.extend(report.mean_precision.iter().map(f64::to_string));
    row.extend(report.mean_hits.iter().map(f64::to_string));
    row
}

pub fn evaluate(config: &Config) -> Result<()> {
    let trained = load_model(config)?;
    let truth = load_truth(config)?;
    let top_n = &config.file.eval.top_n;
    let fusion = config.fusion()?;

    let mut proposed = eval::evaluate(&trained.model, &truth, Ranking::Fused(fusion), top_n)?;
    let (sent, external) = engine::sentiment_vs_external(&trained.dataset, &trained.sentiments);
    proposed.correlation = match eval::correlation_block(&sent, &external) {
        Ok(block) => Some(block),
        Err(e) => {
            log::warn!("no sentiment/external-rating correlation: {e}");
            None
        }
    };
    let hybrid = eval::evaluate(&trained.model, &truth, Ranking::PureHybrid, top_n)?;
    let sentiment_only = eval::evaluate(&trained.model, &truth, Ranking::SentimentOnly(fusion.d), top_n)?;

    write_artifact(config, EVAL_REPORT, &csv_bytes(|w| proposed.write_csv(w))?)?;

    let comparison = csv_bytes(|w| -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["model".to_string()];
        header.extend(top_n.iter().map(|n| format!("p{n}")));
        header.extend(top_n.iter().map(|n| format!("hit{n}")));
        out.write_record(&header)?;
        out.write_record(comparison_row("proposed", &proposed))?;
        out.write_record(comparison_row("pure_hybrid", &hybrid))?;
        out.write_record(comparison_row("sentiment_only", &sentiment_only))?;
        out.flush()?;
        Ok(())
    })?;
    write_artifact(config, EVAL_COMPARISON, &comparison)?;

    let mut summary = format!(
        "proposed model (omega1 {}, omega2 {}, D {})\n{}",
        fusion.omega1,
        fusion.omega2,
        fusion.d,
        proposed.summary()
    );
    for (name, report) in [("pure hybrid", &hybrid), ("sentiment only", &sentiment_only)] {
        let _ = writeln!(summary, "\n{name} baseline");
        for (k, n) in top_n.iter().enumerate() {
            let _ = writeln!(
                summary,
                "top-{n}: precision {:.4}, mean hits {:.4}",
                report.mean_precision[k], report.mean_hits[k]
            );
        }
    }
    write_artifact(config, EVAL_SUMMARY, summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

/// Parses a comma-separated grid. A `...` element continues the arithmetic
/// progression set by the two values before it up to the value after it, so
/// `0,0.1,...,1.0` yields eleven points.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let mut grid: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        if parts[i] == "..." {
            ensure!(grid.len() >= 2, "'...' needs two values before it");
            let end: f64 = parts
                .get(i + 1)
                .context("'...' needs a final value after it")?
                .parse()
                .context("invalid grid value after '...'")?;
            let start = grid[grid.len() - 2];
            let step = grid[grid.len() - 1] - start;
            ensure!(step > 0.0, "'...' needs increasing values before it");
            let count = ((end - start) / step).round();
            ensure!(
                (start + count * step - end).abs() < 1e-9 && count >= 2.0,
                "'...' progression from {start} in steps of {step} does not reach {end}"
            );
            grid.truncate(grid.len() - 2);
            for k in 0..=count as usize {
                // snap to ten decimals so 0.1 steps print as 0.3, not 0.30000000000000004
                grid.push(((start + k as f64 * step) * 1e10).round() / 1e10);
            }
            i += 2;
        } else {
            grid.push(
                parts[i]
                    .parse()
                    .with_context(|| format!("invalid grid value '{}'", parts[i]))?,
            );
            i += 1;
        }
    }
    ensure!(!grid.is_empty(), "the grid is empty");
    Ok(grid)
}

pub const DEFAULT_GRID: &str = "0,0.1,...,1.0";

pub fn sweep(config: &Config, grid: &str) -> Result<()> {
    let grid = parse_grid(grid)?;
    let trained = load_model(config)?;
    let truth = load_truth(config)?;
    let top_n = &config.file.eval.top_n;
    let rows = eval::weight_sweep(&trained.model, &truth, &grid, config.file.fusion.d, top_n)?;
    let body = csv_bytes(|w| eval::write_sweep_csv(w, top_n, &rows))?;
    write_artifact(config, SWEEP, &body)?;
    print!("{}", String::from_utf8(body)?);
    Ok(())
}
