//! Sparse user-item ratings with K-nearest-neighbour rating prediction. The
//! item co-interest counts derived from them become regression targets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{format_movie_id, RatingRecord};
use crate::pairs::{pair_count, pair_index};

pub const MAX_RATING: f64 = 10.0;
pub const DEFAULT_K: usize = 30;
pub const DEFAULT_LIKE_THRESHOLD: f64 = 7.0;

#[derive(Debug, Error)]
pub enum CfError {
    #[error("unknown user index {0}")]
    UnknownUser(usize),
    #[error("unknown movie index {0}")]
    UnknownMovie(usize),
    #[error("rating for movie {0} which is not in the catalog")]
    UncataloguedMovie(u32),
    #[error("similarity of a user with itself is not defined")]
    SameUser,
    #[error("neighbourhood size must be at least 1")]
    InvalidK,
    #[error("rating {0} outside [0, 10]")]
    InvalidRating(f64),
    #[error("like threshold {0} outside [0, 10]")]
    InvalidThreshold(f64),
    #[error("unknown similarity metric {0:?}")]
    UnknownMetric(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CfError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Pearson,
}

impl FromStr for Metric {
    type Err = CfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "pearson" => Ok(Metric::Pearson),
            _ => Err(CfError::UnknownMetric(s.to_string())),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Pearson => "pearson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub rating: f64,
    /// `false` for entries filled in by [`UserItemMatrix::densify`].
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserItemMatrix {
    user_ids: Vec<u64>,
    movie_ids: Vec<u32>,
    user_index: HashMap<u64, usize>,
    movie_index: HashMap<u32, usize>,
    rows: Vec<BTreeMap<usize, Entry>>,
    /// Observed raters of each movie, ascending user index.
    raters: Vec<Vec<usize>>,
}

impl UserItemMatrix {
    /// Builds a matrix whose columns follow `catalog` order. Users are indexed
    /// by ascending id; a repeated (user, movie) rating keeps the latest.
    pub fn from_ratings(ratings: &[RatingRecord], catalog: &[u32]) -> Result<Self> {
        let movie_index: HashMap<u32, usize> =
            catalog.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut latest: BTreeMap<(u64, usize), (i64, u8)> = BTreeMap::new();
        for r in ratings {
            let m = *movie_index
                .get(&r.movie_id)
                .ok_or(CfError::UncataloguedMovie(r.movie_id))?;
            let slot = latest.entry((r.user_id, m)).or_insert((r.timestamp, r.rating));
            if r.timestamp >= slot.0 {
                *slot = (r.timestamp, r.rating);
            }
        }
        let mut user_ids: Vec<u64> = latest.keys().map(|(u, _)| *u).collect();
        user_ids.dedup();
        let user_index: HashMap<u64, usize> =
            user_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let triples = latest
            .into_iter()
            .map(|((u, m), (_, rating))| (user_index[&u], m, f64::from(rating)));
        Self::from_triples(user_ids, catalog.to_vec(), triples)
    }

    /// Builds from `(user index, movie index, rating)` triples; later triples
    /// replace earlier ones for the same cell.
    pub fn from_triples(
        user_ids: Vec<u64>,
        movie_ids: Vec<u32>,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows = vec![BTreeMap::new(); user_ids.len()];
        for (u, m, rating) in triples {
            if u >= user_ids.len() {
                return Err(CfError::UnknownUser(u));
            }
            if m >= movie_ids.len() {
                return Err(CfError::UnknownMovie(m));
            }
            if !(0.0..=MAX_RATING).contains(&rating) {
                return Err(CfError::InvalidRating(rating));
            }
            rows[u].insert(
                m,
                Entry {
                    rating,
                    observed: true,
                },
            );
        }
        Ok(Self::assemble(user_ids, movie_ids, rows))
    }

    /// Dense convenience constructor: users get ids `1..`, movies ids `0..`.
    pub fn from_dense(cells: &[Vec<Option<f64>>]) -> Result<Self> {
        let movies = cells.iter().map(Vec::len).max().unwrap_or(0);
        let triples = cells.iter().enumerate().flat_map(|(u, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(m, cell)| cell.map(|r| (u, m, r)))
        });
        Self::from_triples(
            (1..=cells.len() as u64).collect(),
            (0..movies as u32).collect(),
            triples,
        )
    }

    fn assemble(user_ids: Vec<u64>, movie_ids: Vec<u32>, rows: Vec<BTreeMap<usize, Entry>>) -> Self {
        let mut raters = vec![Vec::new(); movie_ids.len()];
        for (u, row) in rows.iter().enumerate() {
            for (&m, e) in row {
                if e.observed {
                    raters[m].push(u);
                }
            }
        }
        UserItemMatrix {
            user_index: user_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect(),
            movie_index: movie_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect(),
            user_ids,
            movie_ids,
            rows,
            raters,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_movies(&self) -> usize {
        self.movie_ids.len()
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn movie_ids(&self) -> &[u32] {
        &self.movie_ids
    }

    pub fn user_index(&self, user_id: u64) -> Option<usize> {
        self.user_index.get(&user_id).copied()
    }

    pub fn movie_index(&self, movie_id: u32) -> Option<usize> {
        self.movie_index.get(&movie_id).copied()
    }

    pub fn entry(&self, u: usize, m: usize) -> Option<Entry> {
        self.rows.get(u)?.get(&m).copied()
    }

    pub fn rating(&self, u: usize, m: usize) -> Option<f64> {
        self.entry(u, m).map(|e| e.rating)
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, Entry)> + '_ {
        self.rows[u].iter().map(|(&m, &e)| (m, e))
    }

    pub fn raters(&self, m: usize) -> &[usize] {
        &self.raters[m]
    }

    pub fn observed_count(&self) -> usize {
        self.raters.iter().map(Vec::len).sum()
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    fn check_user(&self, u: usize) -> Result<()> {
        if u < self.n_users() {
            Ok(())
        } else {
            Err(CfError::UnknownUser(u))
        }
    }

    /// Similarity over the movies both users rated.
    ///
    /// Fewer than one co-rated movie (cosine) or two (Pearson), or a zero
    /// norm/variance, gives 0.
    pub fn user_similarity(&self, u: usize, v: usize, metric: Metric) -> Result<f64> {
        self.check_user(u)?;
        self.check_user(v)?;
        if u == v {
            return Err(CfError::SameUser);
        }
        Ok(self.similarity_unchecked(u, v, metric))
    }

    fn similarity_unchecked(&self, u: usize, v: usize, metric: Metric) -> f64 {
        let (small, large) = if self.rows[u].len() <= self.rows[v].len() {
            (&self.rows[u], &self.rows[v])
        } else {
            (&self.rows[v], &self.rows[u])
        };
        let co: Vec<(f64, f64)> = small
            .iter()
            .filter_map(|(m, a)| large.get(m).map(|b| (a.rating, b.rating)))
            .collect();
        let sim = match metric {
            Metric::Cosine => {
                if co.is_empty() {
                    return 0.0;
                }
                let dot: f64 = co.iter().map(|(a, b)| a * b).sum();
                let na: f64 = co.iter().map(|(a, _)| a * a).sum();
                let nb: f64 = co.iter().map(|(_, b)| b * b).sum();
                if na == 0.0 || nb == 0.0 {
                    return 0.0;
                }
                // one square root of the product keeps identical vectors at exactly 1
                dot / (na * nb).sqrt()
            }
            Metric::Pearson => {
                if co.len() < 2 {
                    return 0.0;
                }
                let n = co.len() as f64;
                let ma = co.iter().map(|(a, _)| a).sum::<f64>() / n;
                let mb = co.iter().map(|(_, b)| b).sum::<f64>() / n;
                let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
                for (a, b) in &co {
                    sab += (a - ma) * (b - mb);
                    saa += (a - ma) * (a - ma);
                    sbb += (b - mb) * (b - mb);
                }
                if saa == 0.0 || sbb == 0.0 {
                    return 0.0;
                }
                sab / (saa * sbb).sqrt()
            }
        };
        sim.clamp(-1.0, 1.0)
    }

    /// Similarities of `u` to every user (0 on the diagonal).
    pub fn similarity_row(&self, u: usize, metric: Metric) -> Vec<f64> {
        (0..self.n_users())
            .map(|v| {
                if v == u {
                    0.0
                } else {
                    self.similarity_unchecked(u, v, metric)
                }
            })
            .collect()
    }

    /// KNN rating prediction over the observed raters of `m`:
    /// `(1/K) * sum(similarity(u, v_k) * rating(v_k, m))`.
    pub fn predict_rating(&self, u: usize, m: usize, config: &CfConfig) -> Result<Prediction> {
        self.check_user(u)?;
        if m >= self.n_movies() {
            return Err(CfError::UnknownMovie(m));
        }
        if config.k == 0 {
            return Err(CfError::InvalidK);
        }
        Ok(self.predict_with(u, m, config, |v| self.similarity_unchecked(u, v, config.metric)))
    }

    fn predict_with(
        &self,
        u: usize,
        m: usize,
        config: &CfConfig,
        similarity: impl Fn(usize) -> f64,
    ) -> Prediction {
        let mut neighbours: Vec<(usize, f64)> = self.raters[m]
            .iter()
            .filter(|&&v| v != u)
            .map(|&v| (v, similarity(v)))
            .collect();
        if neighbours.is_empty() {
            return Prediction::NO_EVIDENCE;
        }
        // most similar first; equal similarity falls back to ascending user
        neighbours.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        neighbours.truncate(config.k);

        let weighted: f64 = neighbours
            .iter()
            .map(|&(v, sim)| sim * self.rows[v][&m].rating)
            .sum();
        let value = if config.normalized {
            let norm: f64 = neighbours.iter().map(|(_, s)| s.abs()).sum();
            if norm == 0.0 {
                0.0
            } else {
                weighted / norm
            }
        } else {
            weighted / config.k as f64
        };
        Prediction {
            value,
            neighbours: neighbours.len(),
            max_similarity: neighbours[0].1,
            no_evidence: false,
        }
    }

    /// Fills unrated cells with clamped KNN predictions. A cell is filled only
    /// when some selected neighbour is more similar than `min_similarity`.
    /// Observed entries are never touched.
    pub fn densify(&self, config: &CfConfig, min_similarity: f64) -> Result<UserItemMatrix> {
        if config.k == 0 {
            return Err(CfError::InvalidK);
        }
        let rows: Vec<BTreeMap<usize, Entry>> = (0..self.n_users())
            .into_par_iter()
            .map(|u| {
                let sims = self.similarity_row(u, config.metric);
                let mut row = self.rows[u].clone();
                for m in 0..self.n_movies() {
                    if row.contains_key(&m) {
                        continue;
                    }
                    let p = self.predict_with(u, m, config, |v| sims[v]);
                    if !p.no_evidence && p.max_similarity > min_similarity {
                        row.insert(
                            m,
                            Entry {
                                rating: clamp_rating(p.value),
                                observed: false,
                            },
                        );
                    }
                }
                row
            })
            .collect();
        let mut dense = self.clone();
        dense.rows = rows;
        Ok(dense)
    }

    /// Counts, for every movie pair, the users whose rating of both movies is
    /// at least `like_threshold`.
    pub fn co_interest(&self, like_threshold: f64) -> Result<CoInterestVector> {
        if !(0.0..=MAX_RATING).contains(&like_threshold) {
            return Err(CfError::InvalidThreshold(like_threshold));
        }
        let m = self.n_movies();
        let mut counts = vec![0u64; pair_count(m)];
        for row in &self.rows {
            let liked: Vec<usize> = row
                .iter()
                .filter(|(_, e)| e.rating >= like_threshold)
                .map(|(&i, _)| i)
                .collect();
            for (a, &i) in liked.iter().enumerate() {
                for &j in &liked[a + 1..] {
                    counts[pair_index(i, j, m)] += 1;
                }
            }
        }
        Ok(CoInterestVector {
            movie_ids: self.movie_ids.clone(),
            counts,
        })
    }
}

pub fn clamp_rating(value: f64) -> f64 {
    value.clamp(0.0, MAX_RATING)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfConfig {
    pub k: usize,
    pub metric: Metric,
    /// Divide by the summed absolute similarity instead of K.
    pub normalized: bool,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            k: DEFAULT_K,
            metric: Metric::Cosine,
            normalized: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub neighbours: usize,
    pub max_similarity: f64,
    pub no_evidence: bool,
}

impl Prediction {
    pub const NO_EVIDENCE: Prediction = Prediction {
        value: 0.0,
        neighbours: 0,
        max_similarity: 0.0,
        no_evidence: true,
    };
}

/// Pairwise co-interest counts in lexicographic pair order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoInterestVector {
    pub movie_ids: Vec<u32>,
    pub counts: Vec<u64>,
}

impl CoInterestVector {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[pair_index(i, j, self.movie_ids.len())]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Writes `i,j,S` rows keyed by movie id.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "S"])?;
        let m = self.movie_ids.len();
        for (k, (i, j)) in crate::pairs::pairs(m).enumerate() {
            w.write_record([
                format_movie_id(self.movie_ids[i]),
                format_movie_id(self.movie_ids[j]),
                self.counts[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
