//! Per-attribute movie similarity and the pairwise feature matrix.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{format_movie_id, MovieMetadata};
use crate::pairs::{pair_count, pair_index, pairs};

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("feature schema must name at least one attribute")]
    EmptySchema,
    #[error("attribute {0:?} listed twice")]
    DuplicateAttribute(String),
    #[error("no metadata for movie {0}")]
    UnknownMovie(u32),
    #[error("need at least two movies to build pair features, got {0}")]
    TooFewMovies(usize),
    #[error("feature table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ContentError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttributeKind {
    /// Jaccard overlap.
    Set,
    /// 1 when equal, else 0.
    Categorical,
    /// `1 - |a - b| / range`, floored at 0.
    Scalar { range: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Genres,
    Director,
    Writer,
    Actors,
    ProductionCompanies,
    ProductionCountries,
    Language,
    Runtime,
    Budget,
    Popularity,
    ExternalRating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttributeValue<'a> {
    Set(&'a BTreeSet<String>),
    Categorical(Option<&'a str>),
    Scalar(Option<f64>),
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Genres,
        Attribute::Director,
        Attribute::Writer,
        Attribute::Actors,
        Attribute::ProductionCompanies,
        Attribute::ProductionCountries,
        Attribute::Language,
        Attribute::Runtime,
        Attribute::Budget,
        Attribute::Popularity,
        Attribute::ExternalRating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Genres => "genres",
            Attribute::Director => "director",
            Attribute::Writer => "writer",
            Attribute::Actors => "actors",
            Attribute::ProductionCompanies => "production_companies",
            Attribute::ProductionCountries => "production_countries",
            Attribute::Language => "language",
            Attribute::Runtime => "runtime",
            Attribute::Budget => "budget",
            Attribute::Popularity => "popularity",
            Attribute::ExternalRating => "external_rating",
        }
    }

    pub fn kind(self) -> AttributeKind {
        match self {
            Attribute::Language => AttributeKind::Categorical,
            Attribute::Runtime => AttributeKind::Scalar { range: 240.0 },
            Attribute::Budget => AttributeKind::Scalar { range: 300_000_000.0 },
            Attribute::Popularity => AttributeKind::Scalar { range: 1000.0 },
            Attribute::ExternalRating => AttributeKind::Scalar { range: 10.0 },
            _ => AttributeKind::Set,
        }
    }

    pub fn extract(self, meta: &MovieMetadata) -> AttributeValue<'_> {
        match self {
            Attribute::Genres => AttributeValue::Set(&meta.genres),
            Attribute::Director => AttributeValue::Set(&meta.director),
            Attribute::Writer => AttributeValue::Set(&meta.writer),
            Attribute::Actors => AttributeValue::Set(&meta.actors),
            Attribute::ProductionCompanies => AttributeValue::Set(&meta.production_companies),
            Attribute::ProductionCountries => AttributeValue::Set(&meta.production_countries),
            Attribute::Language => {
                AttributeValue::Categorical(Some(meta.language.as_str()).filter(|l| !l.is_empty()))
            }
            Attribute::Runtime => AttributeValue::Scalar(meta.runtime_minutes.map(f64::from)),
            Attribute::Budget => AttributeValue::Scalar(meta.budget.map(|b| b as f64)),
            Attribute::Popularity => AttributeValue::Scalar(meta.popularity),
            Attribute::ExternalRating => AttributeValue::Scalar(meta.external_rating),
        }
    }

    pub fn similarity(self, a: &MovieMetadata, b: &MovieMetadata) -> f64 {
        attribute_similarity(&self.extract(a), &self.extract(b), self.kind())
    }
}

impl FromStr for Attribute {
    type Err = ContentError;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| ContentError::UnknownAttribute(s.to_string()))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let shared = a.intersection(b).count();
    shared as f64 / (a.len() + b.len() - shared) as f64
}

/// Similarity in [0, 1] of two values of one attribute. A missing or empty
/// value on either side scores 0.
pub fn attribute_similarity(a: &AttributeValue, b: &AttributeValue, kind: AttributeKind) -> f64 {
    match (a, b, kind) {
        (AttributeValue::Set(a), AttributeValue::Set(b), AttributeKind::Set) => jaccard(a, b),
        (
            AttributeValue::Categorical(Some(a)),
            AttributeValue::Categorical(Some(b)),
            AttributeKind::Categorical,
        ) => f64::from(u8::from(a == b)),
        (
            AttributeValue::Scalar(Some(a)),
            AttributeValue::Scalar(Some(b)),
            AttributeKind::Scalar { range },
        ) => (1.0 - (a - b).abs() / range).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct FeatureSchema {
    attributes: Vec<Attribute>,
}

impl FeatureSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(ContentError::EmptySchema);
        }
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(*a) {
                return Err(ContentError::DuplicateAttribute(a.name().into()));
            }
        }
        Ok(FeatureSchema { attributes })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let attrs = names
            .iter()
            .map(|n| n.as_ref().parse())
            .collect::<Result<Vec<_>>>()?;
        Self::new(attrs)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name().to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn features(&self, a: &MovieMetadata, b: &MovieMetadata) -> Vec<f64> {
        self.attributes.iter().map(|attr| attr.similarity(a, b)).collect()
    }
}

/// Set-valued credits and companies plus language; scalar attributes are
/// opt-in.
impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            attributes: vec![
                Attribute::Genres,
                Attribute::Director,
                Attribute::Writer,
                Attribute::Actors,
                Attribute::ProductionCompanies,
                Attribute::ProductionCountries,
                Attribute::Language,
            ],
        }
    }
}

impl TryFrom<Vec<Attribute>> for FeatureSchema {
    type Error = ContentError;

    fn try_from(value: Vec<Attribute>) -> Result<Self> {
        FeatureSchema::new(value)
    }
}

impl From<FeatureSchema> for Vec<Attribute> {
    fn from(value: FeatureSchema) -> Self {
        value.attributes
    }
}

/// Sum of the attribute similarities of two distinct movies; 0 for a movie
/// with itself.
pub fn closeness(
    i: u32,
    j: u32,
    metadata: &BTreeMap<u32, MovieMetadata>,
    schema: &FeatureSchema,
) -> Result<f64> {
    let a = metadata.get(&i).ok_or(ContentError::UnknownMovie(i))?;
    let b = metadata.get(&j).ok_or(ContentError::UnknownMovie(j))?;
    if i == j {
        return Ok(0.0);
    }
    Ok(schema.features(a, b).iter().sum())
}

/// `n x M(M-1)/2` attribute similarities, one column per movie pair in
/// lexicographic order. Stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    attribute_names: Vec<String>,
    movie_ids: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_columns(
        attribute_names: Vec<String>,
        movie_ids: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = attribute_names.len() * pair_count(movie_ids.len());
        if values.len() != expected {
            return Err(ContentError::Table(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        Ok(FeatureMatrix {
            attribute_names,
            movie_ids,
            values,
        })
    }

    pub fn n_features(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn n_pairs(&self) -> usize {
        pair_count(self.movie_ids.len())
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn movie_ids(&self) -> &[u32] {
        &self.movie_ids
    }

    pub fn column(&self, pair: usize) -> &[f64] {
        let n = self.n_features();
        &self.values[pair * n..(pair + 1) * n]
    }

    pub fn pair_column(&self, i: usize, j: usize) -> &[f64] {
        self.column(pair_index(i, j, self.movie_ids.len()))
    }

    pub fn get(&self, feature: usize, pair: usize) -> f64 {
        self.values[pair * self.n_features() + feature]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_features().max(1))
    }

    /// Writes `i,j,<attribute...>` rows in pair order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend(self.attribute_names.iter().cloned());
        w.write_record(&header)?;
        for (k, (i, j)) in pairs(self.movie_ids.len()).enumerate() {
            let mut row = vec![
                format_movie_id(self.movie_ids[i]),
                format_movie_id(self.movie_ids[j]),
            ];
            row.extend(self.column(k).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 3 || &header[0] != "i" || &header[1] != "j" {
            return Err(ContentError::Table("header must be i,j,<attributes>".into()));
        }
        let attribute_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();

        let mut pair_ids = Vec::new();
        let mut values = Vec::new();
        for (line, row) in r.records().enumerate() {
            let row = row?;
            let bad = |what: &str| ContentError::Table(format!("row {}: {what}", line + 1));
            if row.len() != header.len() {
                return Err(bad("wrong field count"));
            }
            let i: u32 = row[0].parse().map_err(|_| bad("bad movie id"))?;
            let j: u32 = row[1].parse().map_err(|_| bad("bad movie id"))?;
            pair_ids.push((i, j));
            for v in row.iter().skip(2) {
                values.push(v.parse::<f64>().map_err(|_| bad("bad value"))?);
            }
        }

        // recover the catalog from the first row block: (m0, m1), (m0, m2), ...
        let mut movie_ids: Vec<u32> = Vec::new();
        if let Some(&(first, _)) = pair_ids.first() {
            movie_ids.push(first);
            movie_ids.extend(pair_ids.iter().take_while(|(i, _)| *i == first).map(|(_, j)| *j));
        }
        let expected: Vec<(u32, u32)> = pairs(movie_ids.len())
            .map(|(i, j)| (movie_ids[i], movie_ids[j]))
            .collect();
        if expected != pair_ids {
            return Err(ContentError::Table("rows are not in lexicographic pair order".into()));
        }
        FeatureMatrix::from_columns(attribute_names, movie_ids, values)
    }
}

/// Builds the pair feature matrix over `movies` in the given order.
pub fn build_feature_matrix(movies: &[&MovieMetadata], schema: &FeatureSchema) -> Result<FeatureMatrix> {
    if movies.len() < 2 {
        return Err(ContentError::TooFewMovies(movies.len()));
    }
    let all: Vec<(usize, usize)> = pairs(movies.len()).collect();
    let values: Vec<f64> = all
        .par_iter()
        .flat_map_iter(|&(i, j)| schema.features(movies[i], movies[j]))
        .collect();
    FeatureMatrix::from_columns(
        schema.names(),
        movies.iter().map(|m| m.movie_id).collect(),
        values,
    )
}
