//! Seeded synthetic corpora with planted structure.
//!
//! Movies fall into two content clusters (shared genres, disjoint from the
//! other cluster) and, independently, two sentiment bands (their tweets use
//! either positive or negative words). Users like the movies of one cluster
//! and dislike the rest, so co-interest follows the content clusters. A
//! movie's relevant set is every other movie with the same cluster and band,
//! which neither signal can recover on its own.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use hybridrec::corpus::{Dataset, MovieMetadata, MovieRecord, RatingRecord, TweetRecord, UserRecord};
use hybridrec::eval::GroundTruth;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Planted {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub cluster: BTreeMap<u32, usize>,
    pub band: BTreeMap<u32, usize>,
}

const CLUSTER_GENRES: [&[&str]; 2] = [&["Action", "Adventure", "Sci-Fi"], &["Drama", "Music", "Romance"]];
const SHARED_GENRES: [&str; 4] = ["Comedy", "Family", "Mystery", "Thriller"];
const POSITIVE: [&str; 8] = ["great", "amazing", "love", "fun", "brilliant", "superb", "enjoyable", "excellent"];
const NEGATIVE: [&str; 8] = ["boring", "awful", "terrible", "dull", "waste", "mess", "lame", "weak"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn names(rng: &mut ChaCha8Rng, prefix: &str, pool: usize, count: usize) -> BTreeSet<String> {
    (0..count)
        .map(|_| format!("{prefix} {}", rng.random_range(0..pool)))
        .collect()
}

/// Builds a corpus of `n_movies` movies (split evenly across clusters, bands
/// alternating) and `n_users` users.
pub fn planted_corpus(seed: u64, n_movies: u32, n_users: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut movies = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut tweets = Vec::new();
    let mut cluster = BTreeMap::new();
    let mut band = BTreeMap::new();

    for idx in 0..n_movies {
        let id = 1000 + idx;
        let c = (idx * 2 / n_movies) as usize;
        let b = (idx % 2) as usize;
        cluster.insert(id, c);
        band.insert(id, b);

        let mut genres: BTreeSet<String> = CLUSTER_GENRES[c].iter().map(|g| g.to_string()).collect();
        genres.insert(pick(&mut rng, &SHARED_GENRES).to_string());
        let title = format!("Synthetic {idx}");
        movies.push(MovieRecord {
            movie_id: id,
            title: title.clone(),
            release_year: 2015 + rng.random_range(0..4),
            genres: genres.clone(),
        });
        metadata.insert(
            id,
            MovieMetadata {
                movie_id: id,
                title,
                runtime_minutes: Some(rng.random_range(90..160)),
                genres,
                director: names(&mut rng, "Director", 12, 1),
                writer: names(&mut rng, "Writer", 15, 2),
                actors: names(&mut rng, "Actor", 25, 3),
                external_rating: Some(rng.random_range(50..90) as f64 / 10.0),
                production_companies: names(&mut rng, "Studio", 6, 1),
                popularity: Some(rng.random_range(10..300) as f64),
                language: pick(&mut rng, &["en", "fr"]).to_string(),
                production_countries: names(&mut rng, "Country", 3, 1),
                budget: Some(rng.random_range(10..200) * 1_000_000),
            },
        );

        let words = if b == 1 { &POSITIVE } else { &NEGATIVE };
        for _ in 0..4 {
            let text = format!("this movie was {} and {}", pick(&mut rng, words), pick(&mut rng, words));
            tweets.push(TweetRecord { movie_id: id, text });
        }
    }

    let mut users = Vec::new();
    let mut ratings = Vec::new();
    let mut ts = 1_420_070_400;
    for user_id in 1..=n_users {
        users.push(UserRecord {
            user_id,
            twitter_id: format!("{}", 9_000_000 + user_id),
        });
        let taste = (user_id % 2) as usize;
        for movie in &movies {
            if !rng.random_bool(0.35) {
                continue;
            }
            let rating = if cluster[&movie.movie_id] == taste {
                rng.random_range(7..=10)
            } else {
                rng.random_range(1..=5)
            };
            ts += rng.random_range(1..1000);
            ratings.push(RatingRecord {
                user_id,
                movie_id: movie.movie_id,
                rating,
                timestamp: ts,
            });
        }
    }

    let (dataset, _) = Dataset::join(ratings, movies, users, metadata, tweets);

    let relevant = cluster
        .keys()
        .map(|&i| {
            let set = cluster
                .keys()
                .copied()
                .filter(|&j| j != i && cluster[&j] == cluster[&i] && band[&j] == band[&i])
                .collect();
            (i, set)
        })
        .collect();
    Planted {
        dataset,
        truth: GroundTruth::new(relevant),
        cluster,
        band,
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/tiny")
}
