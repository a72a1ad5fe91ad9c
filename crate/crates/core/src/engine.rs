//! End-to-end training: dataset in, feature matrix, co-interest targets,
//! learned weights and a ready [`Model`] out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::collaborative::{CfConfig, CoInterestVector, UserItemMatrix, DEFAULT_LIKE_THRESHOLD};
use crate::content::{build_feature_matrix, FeatureMatrix, FeatureSchema};
use crate::corpus::{Dataset, MovieMetadata, RatingRecord};
use crate::fusion::Model;
use crate::sentiment::MovieSentiment;
use crate::weights::{scale_targets, solve_weights, LearnedWeights, WeightSolution};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub cf: CfConfig,
    /// Fill the rating matrix with KNN predictions before counting co-interest.
    pub densify: bool,
    /// A prediction is kept only if some neighbour is more similar than this.
    pub min_similarity: f64,
    pub like_threshold: f64,
    pub scale_targets: bool,
    pub schema: FeatureSchema,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            cf: CfConfig::default(),
            densify: true,
            min_similarity: 0.0,
            like_threshold: DEFAULT_LIKE_THRESHOLD,
            scale_targets: false,
            schema: FeatureSchema::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub features: FeatureMatrix,
    pub co_interest: CoInterestVector,
    pub solution: WeightSolution,
    pub weights: LearnedWeights,
    pub observed_entries: usize,
    pub predicted_entries: usize,
}

/// Movies that can take part in pair features: those with metadata.
pub fn catalog(dataset: &Dataset) -> Vec<u32> {
    dataset
        .movies
        .keys()
        .copied()
        .filter(|id| dataset.metadata.contains_key(id))
        .collect()
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Training, Error> {
    let catalog = catalog(dataset);
    let metadata: Vec<&MovieMetadata> = catalog.iter().map(|id| &dataset.metadata[id]).collect();
    let features = build_feature_matrix(&metadata, &config.schema)?;

    let ratings: Vec<RatingRecord> = dataset
        .ratings
        .iter()
        .filter(|r| dataset.metadata.contains_key(&r.movie_id))
        .copied()
        .collect();
    let observed = UserItemMatrix::from_ratings(&ratings, &catalog)?;
    let matrix = if config.densify {
        observed.densify(&config.cf, config.min_similarity)?
    } else {
        observed.clone()
    };
    let co_interest = matrix.co_interest(config.like_threshold)?;

    let mut targets = co_interest.as_f64();
    if config.scale_targets {
        targets = scale_targets(&targets);
    }
    let solution = solve_weights(&features, &targets)?;
    if solution.rank_deficient {
        log::warn!(
            "feature matrix is rank deficient (rank {} of {}); using the minimum-norm weights",
            solution.rank,
            features.n_features()
        );
    }
    let weights = LearnedWeights::new(features.attribute_names().to_vec(), solution.weights.clone());
    Ok(Training {
        observed_entries: observed.entry_count(),
        predicted_entries: matrix.entry_count() - observed.entry_count(),
        features,
        co_interest,
        solution,
        weights,
    })
}

pub fn titles(dataset: &Dataset) -> BTreeMap<u32, String> {
    dataset
        .movies
        .iter()
        .map(|(id, m)| (*id, m.title.clone()))
        .collect()
}

pub fn build_model(
    dataset: &Dataset,
    features: &FeatureMatrix,
    weights: &LearnedWeights,
    sentiments: &BTreeMap<u32, MovieSentiment>,
) -> Result<Model, Error> {
    Ok(Model::new(features, weights.normalized.clone(), sentiments, &titles(dataset))?)
}

/// Sentiment ratings paired with the metadata's external rating, for movies
/// that have both tweets and an external rating.
pub fn sentiment_vs_external(
    dataset: &Dataset,
    sentiments: &BTreeMap<u32, MovieSentiment>,
) -> (Vec<f64>, Vec<f64>) {
    sentiments
        .values()
        .filter(|s| !s.is_unobserved())
        .filter_map(|s| {
            let external = dataset.metadata.get(&s.movie_id)?.external_rating?;
            Some((s.sentiment_rating, external))
        })
        .unzip()
}
