//! Lexicon and rule-based tweet sentiment.
//!
//! Tweets are normalised and then scored token by token against a valence
//! lexicon with a small set of VADER-style adjustments. A movie's mean compound
//! score is mapped onto the 2..=10 rating scale.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{format_movie_id, Dataset, TweetRecord};

/// Added to a booster's magnitude when the lexicon file gives none.
pub const BOOSTER_INCREMENT: f64 = 0.293;
/// Applied to a lexicon token with a negator among the three tokens before it.
pub const NEGATION_SCALAR: f64 = -0.74;
pub const ALLCAPS_INCREMENT: f64 = 0.733;
pub const EXCLAMATION_INCREMENT: f64 = 0.292;
/// Normalisation constant of the compound score.
pub const ALPHA: f64 = 15.0;
const NEGATION_WINDOW: usize = 3;

/// Rating assigned to movies without any tweets (compound score 0).
pub const NEUTRAL_RATING: f64 = 6.0;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file} line {line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("negators and stopwords overlap: {0:?}")]
    Overlap(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    valence: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negators: HashSet<String>,
    stopwords: HashSet<String>,
}

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");
const DEFAULT_BOOSTERS: &str = include_str!("../data/boosters.txt");
const DEFAULT_NEGATORS: &str = include_str!("../data/negators.txt");
const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(idx, line)| match line {
        Ok(line) => {
            let t = line.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((idx + 1, line)))
        }
        Err(e) => Some(Err(e)),
    })
}

fn parse_weighted<R: BufRead>(
    reader: R,
    file: &'static str,
    default: Option<f64>,
    bound: f64,
) -> Result<HashMap<String, f64>, LexiconError> {
    let mut out = HashMap::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let mut parts = text.split('\t');
        let token = parts.next().unwrap_or_default().trim().to_lowercase();
        let value = match (parts.next(), default) {
            (Some(v), _) => v.trim().parse::<f64>().map_err(|_| LexiconError::Parse {
                file,
                line,
                reason: format!("unreadable value {v:?}"),
            })?,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(LexiconError::Parse {
                    file,
                    line,
                    reason: "expected token<TAB>value".into(),
                })
            }
        };
        if !value.is_finite() || value.abs() > bound {
            return Err(LexiconError::Parse {
                file,
                line,
                reason: format!("value {value} outside [-{bound}, {bound}]"),
            });
        }
        out.insert(token, value);
    }
    Ok(out)
}

fn parse_set<R: BufRead>(reader: R) -> Result<HashSet<String>, LexiconError> {
    content_lines(reader)
        .map(|item| Ok(item?.1.trim().to_lowercase()))
        .collect()
}

impl Lexicon {
    pub fn new(
        valence: HashMap<String, f64>,
        boosters: HashMap<String, f64>,
        negators: HashSet<String>,
        stopwords: HashSet<String>,
    ) -> Result<Self, LexiconError> {
        let mut overlap: Vec<String> = negators.intersection(&stopwords).cloned().collect();
        if !overlap.is_empty() {
            overlap.sort();
            return Err(LexiconError::Overlap(overlap));
        }
        Ok(Lexicon {
            valence,
            boosters,
            negators,
            stopwords,
        })
    }

    /// Reads the valence table (`token<TAB>valence`) and the three word lists
    /// (one token per line; boosters may carry `<TAB>increment`).
    pub fn from_readers<A: BufRead, B: BufRead, C: BufRead, D: BufRead>(
        valence: A,
        boosters: B,
        negators: C,
        stopwords: D,
    ) -> Result<Self, LexiconError> {
        Lexicon::new(
            parse_weighted(valence, "lexicon", None, 4.0)?,
            parse_weighted(boosters, "boosters", Some(BOOSTER_INCREMENT), 1.0)?,
            parse_set(negators)?,
            parse_set(stopwords)?,
        )
    }

    /// The lexicon bundled with the crate.
    pub fn bundled() -> Self {
        Lexicon::from_readers(
            DEFAULT_LEXICON.as_bytes(),
            DEFAULT_BOOSTERS.as_bytes(),
            DEFAULT_NEGATORS.as_bytes(),
            DEFAULT_STOPWORDS.as_bytes(),
        )
        .expect("bundled lexicon is valid")
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valence.get(token).copied()
    }

    pub fn booster(&self, token: &str) -> Option<f64> {
        self.boosters.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    pub fn with_valence(mut self, token: &str, valence: f64) -> Self {
        self.valence.insert(token.to_lowercase(), valence);
        self
    }

    /// Suffix-stripping stand-in for lemmatisation: `served`/`serving`/`serves`
    /// fall back to `serve` when only the stem is in the lexicon.
    fn lemma(&self, token: &str) -> Option<String> {
        if self.valence.contains_key(token) {
            return None;
        }
        ["ing", "ed", "s"].iter().find_map(|suffix| {
            let stem = token.strip_suffix(suffix).filter(|s| s.len() >= 2)?;
            [stem.to_string(), format!("{stem}e")]
                .into_iter()
                .find(|candidate| self.valence.contains_key(candidate))
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedTweet {
    pub tokens: Vec<String>,
    pub had_exclamation: bool,
    pub allcaps_flags: Vec<bool>,
}

impl ProcessedTweet {
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        ProcessedTweet {
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            had_exclamation: false,
            allcaps_flags: vec![false; tokens.len()],
        }
    }
}

fn is_link(raw: &str) -> bool {
    let lower = raw.to_lowercase();
    let lower = lower.trim_start_matches(|c: char| !c.is_alphanumeric());
    lower.starts_with("www.") || lower.contains("://")
}

fn is_allcaps(word: &str) -> bool {
    let letters = word.chars().filter(|c| c.is_alphabetic()).count();
    letters >= 2 && !word.chars().any(|c| c.is_lowercase())
}

/// Collapses runs of more than two identical characters to two.
fn squeeze_repeats(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut prev = None;
    let mut run = 0;
    for c in word.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}

fn is_removed_special(c: char) -> bool {
    matches!(c, '!' | '@' | '#' | '$' | '%' | '_')
}

pub fn preprocess(text: &str, lexicon: &Lexicon) -> ProcessedTweet {
    let mut tweet = ProcessedTweet {
        had_exclamation: text.contains('!'),
        ..Default::default()
    };
    for raw in text.split_whitespace() {
        if is_link(raw) {
            continue;
        }
        let cleaned: String = raw
            .chars()
            .filter(|c| !is_removed_special(*c))
            .map(|c| if c == '\u{2019}' { '\'' } else { c })
            .collect();
        for piece in cleaned.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            let piece = piece.trim_matches('\'');
            if piece.is_empty() {
                continue;
            }
            let caps = is_allcaps(piece);
            let mut token = squeeze_repeats(&piece.to_lowercase());
            if let Some(lemma) = lexicon.lemma(&token) {
                token = lemma;
            }
            if lexicon.is_stopword(&token) {
                continue;
            }
            tweet.tokens.push(token);
            tweet.allcaps_flags.push(caps);
        }
    }
    tweet
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScores {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
    pub compound: f64,
}

impl SentimentScores {
    pub const NEUTRAL: SentimentScores = SentimentScores {
        positive: 0.0,
        neutral: 1.0,
        negative: 0.0,
        compound: 0.0,
    };
}

/// Maps a raw valence sum onto (-1, 1).
pub fn normalize_compound(sum: f64) -> f64 {
    (sum / (sum * sum + ALPHA).sqrt()).clamp(-1.0, 1.0)
}

/// Rule-adjusted valence of every token (0 for tokens outside the lexicon).
pub fn token_valences(tweet: &ProcessedTweet, lexicon: &Lexicon) -> Vec<f64> {
    let tokens = &tweet.tokens;
    tokens
        .iter()
        .enumerate()
        .map(|(i, token)| {
            let Some(base) = lexicon.valence(token) else {
                return 0.0;
            };
            let sign = base.signum();
            let mut v = base;
            if tweet.allcaps_flags.get(i).copied().unwrap_or(false) {
                v += ALLCAPS_INCREMENT * sign;
            }
            if let Some(boost) = i.checked_sub(1).and_then(|p| lexicon.booster(&tokens[p])) {
                v += boost * sign;
            }
            let window = &tokens[i.saturating_sub(NEGATION_WINDOW)..i];
            if window.iter().any(|t| lexicon.is_negator(t)) {
                v *= NEGATION_SCALAR;
            }
            v
        })
        .collect()
}

pub fn score(tweet: &ProcessedTweet, lexicon: &Lexicon) -> SentimentScores {
    let valences = token_valences(tweet, lexicon);
    let mut sum: f64 = valences.iter().sum();
    if sum == 0.0 {
        return SentimentScores::NEUTRAL;
    }
    if tweet.had_exclamation {
        sum += EXCLAMATION_INCREMENT * sum.signum();
    }

    let (mut pos, mut neg, mut neu) = (0.0, 0.0, 0.0);
    for v in valences {
        if v > 0.0 {
            pos += v + 1.0;
        } else if v < 0.0 {
            neg += -v + 1.0;
        } else {
            neu += 1.0;
        }
    }
    let total = pos + neg + neu;
    SentimentScores {
        positive: pos / total,
        neutral: neu / total,
        negative: neg / total,
        compound: normalize_compound(sum),
    }
}

pub fn score_text(text: &str, lexicon: &Lexicon) -> SentimentScores {
    score(&preprocess(text, lexicon), lexicon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovieSentiment {
    pub movie_id: u32,
    pub sentiment_rating: f64,
    pub tweet_count: usize,
}

impl MovieSentiment {
    /// Zero-tweet movies carry the neutral rating; this exposes the flag.
    pub fn is_unobserved(&self) -> bool {
        self.tweet_count == 0
    }
}

/// `[1 + (1 + x) * 2] * 2`, expanded.
pub fn compound_to_rating(x: f64) -> f64 {
    6.0 + 4.0 * x
}

pub fn movie_sentiment(movie_id: u32, scores: &[SentimentScores]) -> MovieSentiment {
    if scores.is_empty() {
        return MovieSentiment {
            movie_id,
            sentiment_rating: NEUTRAL_RATING,
            tweet_count: 0,
        };
    }
    let mean = scores.iter().map(|s| s.compound).sum::<f64>() / scores.len() as f64;
    MovieSentiment {
        movie_id,
        sentiment_rating: compound_to_rating(mean),
        tweet_count: scores.len(),
    }
}

pub fn score_tweets(tweets: &[TweetRecord], lexicon: &Lexicon) -> Vec<SentimentScores> {
    tweets
        .par_iter()
        .map(|t| score_text(&t.text, lexicon))
        .collect()
}

/// Sentiment ratings for every movie in the dataset, keyed by movie id.
pub fn dataset_sentiment(dataset: &Dataset, lexicon: &Lexicon) -> BTreeMap<u32, MovieSentiment> {
    dataset
        .movies
        .keys()
        .map(|&id| {
            let scores = dataset
                .tweets
                .get(&id)
                .map(|t| score_tweets(t, lexicon))
                .unwrap_or_default();
            (id, movie_sentiment(id, &scores))
        })
        .collect()
}

/// Writes `movie_id,sentiment_rating,tweet_count` rows.
pub fn write_sentiment_csv<W: Write>(
    writer: W,
    sentiments: &BTreeMap<u32, MovieSentiment>,
) -> Result<(), LexiconError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["movie_id", "sentiment_rating", "tweet_count"])?;
    for s in sentiments.values() {
        w.write_record([
            format_movie_id(s.movie_id),
            s.sentiment_rating.to_string(),
            s.tweet_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sentiment_csv<R: std::io::Read>(
    reader: R,
) -> Result<BTreeMap<u32, MovieSentiment>, LexiconError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = BTreeMap::new();
    for (idx, row) in r.records().enumerate() {
        let row = row?;
        let parse_err = |what: &str| LexiconError::Parse {
            file: "sentiment",
            line: idx + 2,
            reason: format!("unreadable {what}"),
        };
        let movie_id: u32 = row.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| parse_err("movie_id"))?;
        let sentiment_rating: f64 = row
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err("sentiment_rating"))?;
        let tweet_count: usize = row.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| parse_err("tweet_count"))?;
        out.insert(
            movie_id,
            MovieSentiment {
                movie_id,
                sentiment_rating,
                tweet_count,
            },
        );
    }
    Ok(out)
}
