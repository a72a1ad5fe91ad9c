//! Ingestion of the MovieTweetings-format inputs (`ratings.dat`, `movies.dat`,
//! `users.dat`), the per-movie metadata records and the pre-fetched tweets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const FIELD_DELIMITER: &str = "::";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record {content:?}: {reason}")]
    Malformed {
        line: usize,
        content: String,
        reason: String,
    },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    fn malformed(line: usize, content: &str, reason: impl Into<String>) -> Self {
        CorpusError::Malformed {
            line,
            content: content.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user_id: u64,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

/// Formats back into the `user::movie::rating::timestamp` line, movie id
/// zero-padded to seven digits.
impl fmt::Display for RatingRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}::{}::{}",
            self.user_id,
            format_movie_id(self.movie_id),
            self.rating,
            self.timestamp
        )
    }
}

pub fn format_movie_id(movie_id: u32) -> String {
    format!("{movie_id:07}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title: String,
    pub release_year: i32,
    pub genres: BTreeSet<String>,
}

impl fmt::Display for MovieRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let genres: Vec<&str> = self.genres.iter().map(String::as_str).collect();
        write!(
            f,
            "{}::{} ({})::{}",
            format_movie_id(self.movie_id),
            self.title,
            self.release_year,
            genres.join("|")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: u64,
    pub twitter_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MovieMetadata {
    pub movie_id: u32,
    pub title: String,
    pub runtime_minutes: Option<u32>,
    pub genres: BTreeSet<String>,
    pub director: BTreeSet<String>,
    pub writer: BTreeSet<String>,
    pub actors: BTreeSet<String>,
    pub external_rating: Option<f64>,
    pub production_companies: BTreeSet<String>,
    pub popularity: Option<f64>,
    pub language: String,
    pub production_countries: BTreeSet<String>,
    pub budget: Option<u64>,
}

impl MovieMetadata {
    /// A record is kept only if it carries at least genres, a director or
    /// actors.
    pub fn is_informative(&self) -> bool {
        !(self.genres.is_empty() && self.director.is_empty() && self.actors.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub movie_id: u32,
    pub text: String,
}

/// Iterates the non-empty lines of a stream with their 1-based line numbers.
fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| match line {
            Ok(line) => {
                let line = line.strip_suffix('\r').map(str::to_string).unwrap_or(line);
                if line.trim().is_empty() {
                    None
                } else {
                    Some(Ok((idx + 1, line)))
                }
            }
            Err(e) => Some(Err(e.into())),
        })
}

fn parse_movie_id(field: &str, line: usize, content: &str) -> Result<u32> {
    let field = field.trim();
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CorpusError::malformed(line, content, "movie id is not a number"));
    }
    field
        .parse()
        .map_err(|_| CorpusError::malformed(line, content, "movie id out of range"))
}

pub fn parse_rating_line(line_no: usize, line: &str) -> Result<RatingRecord> {
    let fields: Vec<&str> = line.split(FIELD_DELIMITER).collect();
    if fields.len() != 4 {
        return Err(CorpusError::malformed(
            line_no,
            line,
            format!("expected 4 fields, found {}", fields.len()),
        ));
    }
    let user_id: u64 = fields[0]
        .parse()
        .map_err(|_| CorpusError::malformed(line_no, line, "user id is not a number"))?;
    if user_id == 0 {
        return Err(CorpusError::Invalid {
            line: line_no,
            reason: "user id must be positive".into(),
        });
    }
    let movie_id = parse_movie_id(fields[1], line_no, line)?;
    let rating: i64 = fields[2]
        .parse()
        .map_err(|_| CorpusError::malformed(line_no, line, "rating is not an integer"))?;
    if !(0..=10).contains(&rating) {
        return Err(CorpusError::Invalid {
            line: line_no,
            reason: format!("rating {rating} outside [0, 10]"),
        });
    }
    let timestamp: i64 = fields[3]
        .parse()
        .map_err(|_| CorpusError::malformed(line_no, line, "timestamp is not an integer"))?;
    Ok(RatingRecord {
        user_id,
        movie_id,
        rating: rating as u8,
        timestamp,
    })
}

pub fn parse_ratings<R: BufRead>(reader: R) -> Result<Vec<RatingRecord>> {
    numbered_lines(reader)
        .map(|item| item.and_then(|(n, line)| parse_rating_line(n, &line)))
        .collect()
}

pub fn parse_movie_line(line_no: usize, line: &str) -> Result<MovieRecord> {
    let fields: Vec<&str> = line.split(FIELD_DELIMITER).collect();
    if fields.len() != 3 {
        return Err(CorpusError::malformed(
            line_no,
            line,
            format!("expected 3 fields, found {}", fields.len()),
        ));
    }
    let movie_id = parse_movie_id(fields[0], line_no, line)?;

    let raw_title = fields[1].trim_end();
    let (title, year) = raw_title
        .strip_suffix(')')
        .and_then(|rest| rest.rfind('(').map(|open| (&rest[..open], &rest[open + 1..])))
        .filter(|(_, year)| year.len() == 4 && year.bytes().all(|b| b.is_ascii_digit()))
        .ok_or_else(|| {
            CorpusError::malformed(line_no, line, "title lacks a trailing (YYYY) release year")
        })?;
    let release_year: i32 = year.parse().expect("four ascii digits");
    if !(1800..=2100).contains(&release_year) {
        return Err(CorpusError::Invalid {
            line: line_no,
            reason: format!("release year {release_year} outside [1800, 2100]"),
        });
    }

    let genres = fields[2]
        .split('|')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(str::to_string)
        .collect();

    Ok(MovieRecord {
        movie_id,
        title: title.trim_end().to_string(),
        release_year,
        genres,
    })
}

pub fn parse_movies<R: BufRead>(reader: R) -> Result<Vec<MovieRecord>> {
    numbered_lines(reader)
        .map(|item| item.and_then(|(n, line)| parse_movie_line(n, &line)))
        .collect()
}

pub fn parse_users<R: BufRead>(reader: R) -> Result<Vec<UserRecord>> {
    let mut seen = BTreeSet::new();
    let mut users = Vec::new();
    for item in numbered_lines(reader) {
        let (n, line) = item?;
        let (id, twitter_id) = line
            .split_once(FIELD_DELIMITER)
            .ok_or_else(|| CorpusError::malformed(n, &line, "expected user_id::twitter_id"))?;
        let user_id: u64 = id
            .parse()
            .map_err(|_| CorpusError::malformed(n, &line, "user id is not a number"))?;
        if user_id == 0 {
            return Err(CorpusError::Invalid {
                line: n,
                reason: "user id must be positive".into(),
            });
        }
        if !seen.insert(user_id) {
            return Err(CorpusError::Invalid {
                line: n,
                reason: format!("duplicate user id {user_id}"),
            });
        }
        users.push(UserRecord {
            user_id,
            twitter_id: twitter_id.to_string(),
        });
    }
    Ok(users)
}

pub fn parse_tweets<R: BufRead>(reader: R) -> Result<Vec<TweetRecord>> {
    let mut tweets = Vec::new();
    for item in numbered_lines(reader) {
        let (n, line) = item?;
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| CorpusError::malformed(n, &line, "expected movie_id<TAB>text"))?;
        let movie_id = parse_movie_id(id, n, &line)?;
        if text.trim().is_empty() {
            return Err(CorpusError::Invalid {
                line: n,
                reason: "empty tweet text".into(),
            });
        }
        tweets.push(TweetRecord {
            movie_id,
            text: text.to_string(),
        });
    }
    Ok(tweets)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetadataLoad {
    pub metadata: BTreeMap<u32, MovieMetadata>,
    /// Records dropped for carrying no genres, directors or actors.
    pub dropped: usize,
    /// Repeated movie ids; the later record replaced the earlier one.
    pub duplicates: usize,
}

/// Lowercases and strips separators so `Production Companies`,
/// `production_companies` and `productionCompanies` all resolve alike.
fn normalize_key(key: &str) -> String {
    key.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn clean_name(name: &str) -> &str {
    name.trim()
        .trim_matches(|c: char| matches!(c, '\'' | '"' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}'))
        .trim()
}

fn value_set(value: &Value) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut push = |s: &str| {
        for part in s.split([',', '|']) {
            let part = clean_name(part);
            if !part.is_empty() {
                out.insert(part.to_string());
            }
        }
    };
    match value {
        Value::String(s) => push(s),
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::String(s) => push(s),
                    Value::Object(obj) => {
                        if let Some(Value::String(s)) = obj.get("name") {
                            push(s);
                        }
                    }
                    _ => {}
                }
            }
        }
        _ => {}
    }
    out
}

/// Accepts plain numbers or strings like `"141 min"` / `"7.6"`.
fn value_number(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let numeric: String = s
                .trim()
                .chars()
                .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-')
                .collect();
            numeric.parse().ok()
        }
        _ => None,
    }
}

fn value_text(value: &Value) -> String {
    match value {
        Value::String(s) => clean_name(s).to_string(),
        Value::Number(n) => n.to_string(),
        _ => String::new(),
    }
}

fn metadata_from_object(index: usize, obj: &serde_json::Map<String, Value>) -> Result<MovieMetadata> {
    let mut meta = MovieMetadata::default();
    let mut movie_id = None;
    for (key, value) in obj {
        match normalize_key(key).as_str() {
            "movieid" | "id" => {
                movie_id = match value {
                    Value::Number(n) => n.as_u64().and_then(|v| u32::try_from(v).ok()),
                    Value::String(s) => s.trim().parse().ok(),
                    _ => None,
                };
                if movie_id.is_none() {
                    return Err(CorpusError::Metadata(format!(
                        "record {index}: unreadable movie id {value}"
                    )));
                }
            }
            "title" => meta.title = value_text(value),
            "runtime" | "runtimeminutes" => {
                meta.runtime_minutes = value_number(value).filter(|v| *v >= 0.0).map(|v| v as u32)
            }
            "genre" | "genres" => meta.genres = value_set(value),
            "director" | "directors" => meta.director = value_set(value),
            "writer" | "writers" => meta.writer = value_set(value),
            "actors" | "actor" | "cast" => meta.actors = value_set(value),
            "rating" | "externalrating" | "voteaverage" => {
                meta.external_rating = value_number(value).filter(|v| (0.0..=10.0).contains(v))
            }
            "productioncompanies" => meta.production_companies = value_set(value),
            "popularity" => meta.popularity = value_number(value).filter(|v| *v >= 0.0),
            "language" | "originallanguage" => meta.language = value_text(value).to_lowercase(),
            "productioncountries" => meta.production_countries = value_set(value),
            "budget" => meta.budget = value_number(value).filter(|v| *v >= 0.0).map(|v| v as u64),
            _ => {}
        }
    }
    meta.movie_id = movie_id
        .ok_or_else(|| CorpusError::Metadata(format!("record {index}: missing movie id")))?;
    Ok(meta)
}

/// Loads a JSON array of metadata records. Field names such as `Title`,
/// `Production Companies` or `vote_average` are matched case-insensitively
/// with separators ignored. Unknown fields are skipped.
pub fn load_metadata<R: std::io::Read>(reader: R) -> Result<MetadataLoad> {
    let root: Value =
        serde_json::from_reader(reader).map_err(|e| CorpusError::Metadata(e.to_string()))?;
    let records = root
        .as_array()
        .ok_or_else(|| CorpusError::Metadata("expected a top-level array".into()))?;

    let mut load = MetadataLoad::default();
    let mut kept: BTreeMap<u32, MovieMetadata> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (index, record) in records.iter().enumerate() {
        let obj = record
            .as_object()
            .ok_or_else(|| CorpusError::Metadata(format!("record {index} is not an object")))?;
        let meta = metadata_from_object(index, obj)?;
        if !seen.insert(meta.movie_id) {
            load.duplicates += 1;
        }
        // last write wins, including a later uninformative record
        kept.insert(meta.movie_id, meta);
    }
    for (id, meta) in kept {
        if meta.is_informative() {
            load.metadata.insert(id, meta);
        } else {
            load.dropped += 1;
        }
    }
    if load.duplicates > 0 {
        log::warn!("{} duplicate metadata records replaced", load.duplicates);
    }
    Ok(load)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub ratings: Vec<RatingRecord>,
    pub movies: BTreeMap<u32, MovieRecord>,
    pub users: BTreeMap<u64, UserRecord>,
    pub metadata: BTreeMap<u32, MovieMetadata>,
    pub tweets: BTreeMap<u32, Vec<TweetRecord>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinStats {
    pub duplicate_ratings: usize,
    pub unresolved_ratings: usize,
    pub unresolved_metadata: usize,
    pub unresolved_tweets: usize,
}

impl Dataset {
    /// Joins the parsed inputs. Ratings, metadata and tweets that reference
    /// an unknown movie are dropped; a repeated (user, movie) rating keeps the
    /// most recent one (the later line on equal timestamps).
    pub fn join(
        ratings: Vec<RatingRecord>,
        movies: Vec<MovieRecord>,
        users: Vec<UserRecord>,
        metadata: BTreeMap<u32, MovieMetadata>,
        tweets: Vec<TweetRecord>,
    ) -> (Dataset, JoinStats) {
        let mut stats = JoinStats::default();
        let movies: BTreeMap<u32, MovieRecord> =
            movies.into_iter().map(|m| (m.movie_id, m)).collect();

        let mut latest: BTreeMap<(u64, u32), usize> = BTreeMap::new();
        let mut resolved = Vec::with_capacity(ratings.len());
        for r in ratings {
            if !movies.contains_key(&r.movie_id) {
                stats.unresolved_ratings += 1;
                continue;
            }
            match latest.get(&(r.user_id, r.movie_id)) {
                Some(&pos) => {
                    stats.duplicate_ratings += 1;
                    if r.timestamp >= resolved_ts(&resolved, pos) {
                        resolved[pos] = Some(r);
                    }
                }
                None => {
                    latest.insert((r.user_id, r.movie_id), resolved.len());
                    resolved.push(Some(r));
                }
            }
        }
        let ratings: Vec<RatingRecord> = resolved.into_iter().flatten().collect();

        let metadata = metadata
            .into_iter()
            .filter(|(id, _)| {
                let ok = movies.contains_key(id);
                if !ok {
                    stats.unresolved_metadata += 1;
                }
                ok
            })
            .collect();

        let mut by_movie: BTreeMap<u32, Vec<TweetRecord>> = BTreeMap::new();
        for t in tweets {
            if movies.contains_key(&t.movie_id) {
                by_movie.entry(t.movie_id).or_default().push(t);
            } else {
                stats.unresolved_tweets += 1;
            }
        }

        let dataset = Dataset {
            ratings,
            movies,
            users: users.into_iter().map(|u| (u.user_id, u)).collect(),
            metadata,
            tweets: by_movie,
        };
        (dataset, stats)
    }

    /// Keeps movies released in or after `min_year`, with their ratings,
    /// metadata and tweets. The user map is left intact.
    pub fn filter_by_year(&self, min_year: i32) -> Dataset {
        self.retain_movies(|m| m.release_year >= min_year)
    }

    /// Discards movies that have no informative metadata record.
    pub fn retain_with_metadata(&self) -> Dataset {
        self.retain_movies(|m| self.metadata.contains_key(&m.movie_id))
    }

    fn retain_movies(&self, keep: impl Fn(&MovieRecord) -> bool) -> Dataset {
        let movies: BTreeMap<u32, MovieRecord> = self
            .movies
            .iter()
            .filter(|(_, m)| keep(m))
            .map(|(id, m)| (*id, m.clone()))
            .collect();
        Dataset {
            ratings: self
                .ratings
                .iter()
                .filter(|r| movies.contains_key(&r.movie_id))
                .copied()
                .collect(),
            metadata: self
                .metadata
                .iter()
                .filter(|(id, _)| movies.contains_key(id))
                .map(|(id, m)| (*id, m.clone()))
                .collect(),
            tweets: self
                .tweets
                .iter()
                .filter(|(id, _)| movies.contains_key(id))
                .map(|(id, t)| (*id, t.clone()))
                .collect(),
            users: self.users.clone(),
            movies,
        }
    }

    pub fn movie_ids(&self) -> Vec<u32> {
        self.movies.keys().copied().collect()
    }

    pub fn rated_user_count(&self) -> usize {
        self.ratings
            .iter()
            .map(|r| r.user_id)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

fn resolved_ts(resolved: &[Option<RatingRecord>], pos: usize) -> i64 {
    resolved[pos].map(|r| r.timestamp).unwrap_or(i64::MIN)
}
