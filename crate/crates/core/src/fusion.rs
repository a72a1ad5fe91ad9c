//! Score fusion and Top-N recommendation.
//!
//! `H(i, j) = q · f_ij` is rescaled over all pairs to [0, 10] so it shares a
//! scale with the sentiment similarity `G(i, j) = D − |s_i − s_j|`; the final
//! score is `CS = ω1·H + ω2·G`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::FeatureMatrix;
use crate::corpus::format_movie_id;
use crate::pairs::pair_index;
use crate::sentiment::{MovieSentiment, NEUTRAL_RATING};
use crate::weights::WeightVector;

/// Upper end of the rescaled hybrid score.
pub const HYBRID_SCALE: f64 = 10.0;
pub const DEFAULT_D: f64 = 10.0;
const OMEGA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid fusion weights: {0}")]
    InvalidConfig(String),
    #[error("movie {0} is not in the model")]
    UnknownMovie(u32),
    #[error("top-N must be at least 1")]
    InvalidN,
    #[error("weights have {weights} components but features have {features}")]
    WeightMismatch { weights: usize, features: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FusionError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub d: f64,
}

impl FusionConfig {
    pub fn new(omega1: f64, omega2: f64, d: f64) -> Result<Self> {
        let cfg = FusionConfig { omega1, omega2, d };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `ω2` given, `ω1 = 1 − ω2`.
    pub fn with_sentiment_weight(omega2: f64, d: f64) -> Result<Self> {
        FusionConfig::new(1.0 - omega2, omega2, d)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.omega1) || !unit.contains(&self.omega2) {
            return Err(FusionError::InvalidConfig(format!(
                "ω1 = {} and ω2 = {} must lie in [0, 1]",
                self.omega1, self.omega2
            )));
        }
        if (self.omega1 + self.omega2 - 1.0).abs() > OMEGA_TOLERANCE {
            return Err(FusionError::InvalidConfig(format!(
                "ω1 + ω2 = {} must equal 1",
                self.omega1 + self.omega2
            )));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(FusionError::InvalidConfig(format!("D = {} must be positive", self.d)));
        }
        Ok(())
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            omega1: 0.5,
            omega2: 0.5,
            d: DEFAULT_D,
        }
    }
}

pub fn sentiment_similarity(s_i: f64, s_j: f64, d: f64) -> f64 {
    d - (s_i - s_j).abs()
}

pub fn combined_score(h: f64, g: f64, config: &FusionConfig) -> f64 {
    config.omega1 * h + config.omega2 * g
}

/// How candidates are ordered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ranking {
    Fused(FusionConfig),
    /// Content/collaborative hybrid score alone.
    PureHybrid,
    /// Sentiment similarity alone, with the given `D`.
    SentimentOnly(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub movie_id: u32,
    pub title: String,
    pub h: f64,
    pub g: f64,
    pub cs: f64,
    /// The candidate had no tweets and carries the neutral sentiment rating.
    pub neutral_sentiment: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationList {
    pub source: u32,
    pub requested: usize,
    pub entries: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn movie_ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.movie_id).collect()
    }

    /// Writes `rank,movie_id,title,H,G,CS` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "movie_id", "title", "H", "G", "CS"])?;
        for (rank, e) in self.entries.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                format_movie_id(e.movie_id),
                e.title.clone(),
                e.h.to_string(),
                e.g.to_string(),
                e.cs.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// A trained, immutable recommender.
#[derive(Debug, Clone)]
pub struct Model {
    movie_ids: Vec<u32>,
    titles: Vec<String>,
    index: HashMap<u32, usize>,
    weights: WeightVector,
    raw_hybrid: Vec<f64>,
    hybrid: Vec<f64>,
    sentiment: Vec<f64>,
    neutral: Vec<bool>,
}

/// Min-max rescale to `[0, scale]`; a constant input maps to all zeros.
pub fn rescale(values: &[f64], scale: f64) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min) * scale).collect()
}

impl Model {
    /// `weights` should already be normalised. Movies missing from
    /// `sentiments` get the neutral rating and are flagged.
    pub fn new(
        features: &FeatureMatrix,
        weights: WeightVector,
        sentiments: &BTreeMap<u32, MovieSentiment>,
        titles: &BTreeMap<u32, String>,
    ) -> Result<Self> {
        if weights.len() != features.n_features() {
            return Err(FusionError::WeightMismatch {
                weights: weights.len(),
                features: features.n_features(),
            });
        }
        let movie_ids = features.movie_ids().to_vec();
        let raw_hybrid: Vec<f64> = features.columns().map(|col| weights.dot(col)).collect();
        let hybrid = rescale(&raw_hybrid, HYBRID_SCALE);
        let (sentiment, neutral) = movie_ids
            .iter()
            .map(|id| match sentiments.get(id) {
                Some(s) => (s.sentiment_rating, s.is_unobserved()),
                None => (NEUTRAL_RATING, true),
            })
            .unzip();
        Ok(Model {
            titles: movie_ids
                .iter()
                .map(|id| titles.get(id).cloned().unwrap_or_default())
                .collect(),
            index: movie_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect(),
            movie_ids,
            weights,
            raw_hybrid,
            hybrid,
            sentiment,
            neutral,
        })
    }

    pub fn movie_ids(&self) -> &[u32] {
        &self.movie_ids
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn contains(&self, movie_id: u32) -> bool {
        self.index.contains_key(&movie_id)
    }

    fn idx(&self, movie_id: u32) -> Result<usize> {
        self.index
            .get(&movie_id)
            .copied()
            .ok_or(FusionError::UnknownMovie(movie_id))
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        pair_index(i, j, self.movie_ids.len())
    }

    /// `q · f_ij` before rescaling.
    pub fn raw_hybrid_score(&self, i: u32, j: u32) -> Result<f64> {
        let (a, b) = (self.idx(i)?, self.idx(j)?);
        if a == b {
            return Err(FusionError::UnknownMovie(j));
        }
        Ok(self.raw_hybrid[self.pair(a, b)])
    }

    /// Hybrid score rescaled to [0, 10] over all pairs.
    pub fn hybrid_score(&self, i: u32, j: u32) -> Result<f64> {
        let (a, b) = (self.idx(i)?, self.idx(j)?);
        if a == b {
            return Err(FusionError::UnknownMovie(j));
        }
        Ok(self.hybrid[self.pair(a, b)])
    }

    pub fn sentiment_rating(&self, movie_id: u32) -> Result<f64> {
        Ok(self.sentiment[self.idx(movie_id)?])
    }

    pub fn recommend(&self, movie_id: u32, n: usize, config: &FusionConfig) -> Result<RecommendationList> {
        config.validate()?;
        self.recommend_by(movie_id, n, Ranking::Fused(*config))
    }

    /// Ranks every other movie, best first; equal scores go to the lower
    /// movie id.
    pub fn recommend_by(&self, movie_id: u32, n: usize, ranking: Ranking) -> Result<RecommendationList> {
        if n == 0 {
            return Err(FusionError::InvalidN);
        }
        let src = self.idx(movie_id)?;
        let d = match ranking {
            Ranking::Fused(cfg) => cfg.d,
            Ranking::SentimentOnly(d) => d,
            Ranking::PureHybrid => DEFAULT_D,
        };
        let mut entries: Vec<Recommendation> = (0..self.movie_ids.len())
            .filter(|&c| c != src)
            .map(|c| {
                let h = self.hybrid[self.pair(src, c)];
                let g = sentiment_similarity(self.sentiment[src], self.sentiment[c], d);
                let cs = match ranking {
                    Ranking::Fused(cfg) => combined_score(h, g, &cfg),
                    Ranking::PureHybrid => h,
                    Ranking::SentimentOnly(_) => g,
                };
                Recommendation {
                    movie_id: self.movie_ids[c],
                    title: self.titles[c].clone(),
                    h,
                    g,
                    cs,
                    neutral_sentiment: self.neutral[c],
                }
            })
            .collect();
        entries.sort_by(|a, b| b.cs.total_cmp(&a.cs).then(a.movie_id.cmp(&b.movie_id)));
        entries.truncate(n);
        Ok(RecommendationList {
            source: movie_id,
            requested: n,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::normalize_weights;
    use proptest::prelude::*;

    #[test]
    fn sentiment_similarity_examples() {
        assert_eq!(sentiment_similarity(7.3, 7.3, 10.0), 10.0);
        assert_eq!(sentiment_similarity(2.0, 10.0, 10.0), 2.0);
        assert_eq!(sentiment_similarity(8.0, 6.0, 10.0), 8.0);
    }

    #[test]
    fn combined_score_examples() {
        let half = FusionConfig::default();
        assert_eq!(combined_score(6.0, 8.0, &half), 7.0);
        let h_only = FusionConfig::new(1.0, 0.0, 10.0).unwrap();
        assert_eq!(combined_score(6.25, 8.0, &h_only), 6.25);
        let g_only = FusionConfig::new(0.0, 1.0, 10.0).unwrap();
        assert_eq!(combined_score(6.25, 8.0, &g_only), 8.0);
    }

    #[test]
    fn config_validation() {
        assert!(FusionConfig::new(0.6, 0.6, 10.0).is_err());
        assert!(FusionConfig::new(1.2, -0.2, 10.0).is_err());
        assert!(FusionConfig::new(0.5, 0.5, 0.0).is_err());
        assert!(FusionConfig::with_sentiment_weight(0.3, 10.0).is_ok());
    }

    fn model(h_columns: &[f64], sentiments: &[(u32, f64)], ids: &[u32]) -> Model {
        let features = FeatureMatrix::from_columns(vec!["f".into()], ids.to_vec(), h_columns.to_vec()).unwrap();
        let s = sentiments
            .iter()
            .map(|&(id, r)| (id, MovieSentiment { movie_id: id, sentiment_rating: r, tweet_count: 1 }))
            .collect();
        let titles = ids.iter().map(|&id| (id, format!("Movie {id}"))).collect();
        Model::new(&features, WeightVector::raw(vec![1.0]), &s, &titles).unwrap()
    }

    #[test]
    fn rescales_hybrid_to_ten() {
        // pairs (0,1) (0,2) (1,2)
        let m = model(&[0.2, 0.6, 1.0], &[], &[10, 20, 30]);
        assert_eq!(m.raw_hybrid_score(10, 20).unwrap(), 0.2);
        assert_eq!(m.hybrid_score(10, 20).unwrap(), 0.0);
        assert!((m.hybrid_score(30, 10).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(m.hybrid_score(20, 30).unwrap(), 10.0);
        assert!(m.hybrid_score(20, 99).is_err());
    }

    #[test]
    fn zero_weights_give_zero_hybrid() {
        let features = FeatureMatrix::from_columns(vec!["a".into(), "b".into()], vec![1, 2, 3], vec![0.5, 1.0, 0.2, 0.0, 1.0, 1.0]).unwrap();
        let m = Model::new(&features, WeightVector::raw(vec![0.0, 0.0]), &BTreeMap::new(), &BTreeMap::new()).unwrap();
        for (i, j) in [(1, 2), (1, 3), (2, 3)] {
            assert_eq!(m.raw_hybrid_score(i, j).unwrap(), 0.0);
        }
        let sel = Model::new(&features, WeightVector::raw(vec![1.0, 0.0]), &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert_eq!(sel.raw_hybrid_score(1, 2).unwrap(), 0.5);
    }

    #[test]
    fn ties_break_on_movie_id() {
        let m = model(&[1.0, 1.0, 0.0], &[(1, 6.0), (2, 6.0), (3, 6.0)], &[3, 2, 1]);
        let list = m.recommend(3, 5, &FusionConfig::default()).unwrap();
        assert_eq!(list.movie_ids(), vec![1, 2]);
        assert_eq!(list.entries.len(), 2);
        assert!(m.recommend(3, 0, &FusionConfig::default()).is_err());
        assert!(matches!(m.recommend(4, 1, &FusionConfig::default()), Err(FusionError::UnknownMovie(4))));
    }

    #[test]
    fn missing_sentiment_is_neutral_and_flagged() {
        let m = model(&[1.0, 0.5, 0.0], &[(1, 10.0)], &[1, 2, 3]);
        assert_eq!(m.sentiment_rating(2).unwrap(), NEUTRAL_RATING);
        let list = m.recommend(1, 2, &FusionConfig::default()).unwrap();
        assert!(list.entries.iter().all(|e| e.neutral_sentiment));
        assert_eq!(list.entries[0].g, 6.0);
    }

    #[test]
    fn csv_output() {
        let m = model(&[1.0, 0.5, 0.0], &[(1, 8.0), (2, 6.0), (3, 8.0)], &[1, 2, 3]);
        let list = m.recommend(1, 1, &FusionConfig::default()).unwrap();
        let mut buf = Vec::new();
        list.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rank,movie_id,title,H,G,CS\n1,0000002,Movie 2,10,8,9\n"
        );
    }

    fn arb_model() -> impl Strategy<Value = Model> {
        (3usize..9).prop_flat_map(|m| {
            let pairs = m * (m - 1) / 2;
            (
                prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), pairs),
                prop::collection::vec(2.0f64..=10.0, m),
                prop::collection::vec(-1.0f64..1.0, 2),
            )
                .prop_map(move |(cols, sent, q)| {
                    let ids: Vec<u32> = (0..m as u32).map(|i| i * 7 + 3).collect();
                    let f = FeatureMatrix::from_columns(vec!["a".into(), "b".into()], ids.clone(), cols.concat()).unwrap();
                    let s = ids
                        .iter()
                        .zip(&sent)
                        .map(|(&id, &r)| (id, MovieSentiment { movie_id: id, sentiment_rating: r, tweet_count: 2 }))
                        .collect();
                    let q = normalize_weights(&WeightVector::raw(q));
                    Model::new(&f, q, &s, &BTreeMap::new()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn degenerate_weights_match_baselines(m in arb_model()) {
            let ph = FusionConfig::new(1.0, 0.0, 10.0).unwrap();
            let ss = FusionConfig::new(0.0, 1.0, 10.0).unwrap();
            for &id in m.movie_ids() {
                let n = m.movie_ids().len();
                prop_assert_eq!(m.recommend(id, n, &ph).unwrap(), m.recommend_by(id, n, Ranking::PureHybrid).unwrap());
                prop_assert_eq!(m.recommend(id, n, &ss).unwrap(), m.recommend_by(id, n, Ranking::SentimentOnly(10.0)).unwrap());
            }
        }

        #[test]
        fn matches_brute_force_sort(m in arb_model(), w2 in 0.0f64..=1.0, n in 1usize..10) {
            let cfg = FusionConfig::with_sentiment_weight(w2, 10.0).unwrap();
            for &src in m.movie_ids() {
                let mut all: Vec<(f64, u32)> = m.movie_ids().iter().filter(|&&c| c != src).map(|&c| {
                    let h = m.hybrid_score(src, c).unwrap();
                    let g = 10.0 - (m.sentiment_rating(src).unwrap() - m.sentiment_rating(c).unwrap()).abs();
                    (cfg.omega1 * h + cfg.omega2 * g, c)
                }).collect();
                all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                let expected: Vec<u32> = all.iter().take(n).map(|x| x.1).collect();
                let got = m.recommend(src, n, &cfg).unwrap();
                prop_assert_eq!(got.movie_ids(), expected);
                prop_assert!(!got.movie_ids().contains(&src));
            }
        }

        #[test]
        fn g_is_symmetric_and_bounded(a in 2.0f64..=10.0, b in 2.0f64..=10.0) {
            let g = sentiment_similarity(a, b, 10.0);
            prop_assert_eq!(g, sentiment_similarity(b, a, 10.0));
            prop_assert!((2.0..=10.0).contains(&g));
            prop_assert!(g <= sentiment_similarity(a, a, 10.0));
        }

        #[test]
        fn affine_transform_keeps_order(scores in prop::collection::vec(0.0f64..10.0, 2..20), a in 0.5f64..3.0, b in -5.0f64..5.0) {
            let rank = |xs: &[f64]| {
                let mut idx: Vec<usize> = (0..xs.len()).collect();
                idx.sort_by(|&i, &j| xs[j].total_cmp(&xs[i]).then(i.cmp(&j)));
                idx
            };
            let moved: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            // exact float ties can split under rounding; only compare distinct scores
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9));
            prop_assert_eq!(rank(&scores), rank(&moved));
        }
    }
}
