//! Hybrid movie recommendation from learned content similarity and tweet
//! sentiment.
//!
//! Content similarity between movies is weighted by least squares so that it
//! tracks how often users like both movies, and is then blended with the
//! similarity of the movies' tweet sentiment to rank Top-N recommendations.

pub mod collaborative;
pub mod content;
pub mod corpus;
pub mod engine;
pub mod eval;
pub mod fusion;
pub mod pairs;
pub mod sentiment;
pub mod weights;

pub use collaborative::{CfConfig, CoInterestVector, Metric, UserItemMatrix};
pub use content::{Attribute, FeatureMatrix, FeatureSchema};
pub use corpus::{Dataset, MovieMetadata, MovieRecord, RatingRecord, TweetRecord, UserRecord};
pub use engine::{train, TrainConfig, Training};
pub use eval::{EvalReport, GroundTruth, TruthMode};
pub use fusion::{FusionConfig, Model, Ranking, RecommendationList};
pub use sentiment::{Lexicon, MovieSentiment, ProcessedTweet, SentimentScores};
pub use weights::{LearnedWeights, WeightVector};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Lexicon(#[from] sentiment::LexiconError),
    #[error(transparent)]
    Collaborative(#[from] collaborative::CfError),
    #[error(transparent)]
    Content(#[from] content::ContentError),
    #[error(transparent)]
    Weights(#[from] weights::WeightError),
    #[error(transparent)]
    Fusion(#[from] fusion::FusionError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}
