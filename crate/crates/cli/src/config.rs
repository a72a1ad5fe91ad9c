//! The TOML run configuration. Input paths are resolved against the directory
//! holding the config file; the output directory is resolved the same way
//! unless it is overridden on the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybridrec::collaborative::{CfConfig, Metric, DEFAULT_LIKE_THRESHOLD};
use hybridrec::content::FeatureSchema;
use hybridrec::engine::TrainConfig;
use hybridrec::eval::{TruthMode, DEFAULT_TOP_N};
use hybridrec::fusion::{FusionConfig, DEFAULT_D};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MIN_YEAR: i32 = 2014;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub ratings: Option<String>,
    pub movies: Option<String>,
    pub users: Option<String>,
    pub metadata: Option<String>,
    pub tweets: Option<String>,
    /// Directory with `lexicon.tsv`, `boosters.txt`, `negators.txt` and
    /// `stopwords.txt`; the bundled lexicon is used when absent.
    pub lexicon: Option<String>,
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Filter {
    pub min_year: i32,
}

impl Default for Filter {
    fn default() -> Self {
        Filter {
            min_year: DEFAULT_MIN_YEAR,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Collaborative {
    pub k: usize,
    pub metric: Metric,
    pub normalized: bool,
    pub like_threshold: f64,
    pub densify: bool,
    pub min_similarity: f64,
    pub scale_targets: bool,
}

impl Default for Collaborative {
    fn default() -> Self {
        let cf = CfConfig::default();
        let train = TrainConfig::default();
        Collaborative {
            k: cf.k,
            metric: cf.metric,
            normalized: cf.normalized,
            like_threshold: DEFAULT_LIKE_THRESHOLD,
            densify: train.densify,
            min_similarity: train.min_similarity,
            scale_targets: train.scale_targets,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Content {
    pub attributes: FeatureSchema,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fusion {
    pub omega1: f64,
    pub omega2: f64,
    pub d: f64,
}

impl Default for Fusion {
    fn default() -> Self {
        let f = FusionConfig::default();
        Fusion {
            omega1: f.omega1,
            omega2: f.omega2,
            d: DEFAULT_D,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Eval {
    pub top_n: Vec<usize>,
    pub truth_mode: TruthMode,
}

impl Default for Eval {
    fn default() -> Self {
        Eval {
            top_n: DEFAULT_TOP_N.to_vec(),
            truth_mode: TruthMode::Union,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: String,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub inputs: Inputs,
    pub filter: Filter,
    pub collaborative: Collaborative,
    pub content: Content,
    pub fusion: Fusion,
    pub eval: Eval,
    pub output: Output,
}

/// Everything that influences artifact contents. The output directory is
/// left out so the same run written to two places hashes alike.
#[derive(Serialize)]
struct Hashed<'a> {
    inputs: &'a Inputs,
    filter: &'a Filter,
    collaborative: &'a Collaborative,
    content: &'a Content,
    fusion: &'a Fusion,
    eval: &'a Eval,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub file: FileConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub hash: String,
}

impl Config {
    pub fn load(path: &Path, min_year: Option<i32>, out: Option<&Path>) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut file: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Some(year) = min_year {
            file.filter.min_year = year;
        }
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let out_dir = match out {
            Some(dir) => dir.to_path_buf(),
            None => base_dir.join(&file.output.dir),
        };
        Config::from_parts(file, base_dir, out_dir)
    }

    pub fn from_parts(file: FileConfig, base_dir: PathBuf, out_dir: PathBuf) -> Result<Config> {
        let hash = hash_config(&file)?;
        let config = Config {
            file,
            base_dir,
            out_dir,
            hash,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        self.fusion()?;
        let c = &self.file.collaborative;
        if c.k == 0 {
            bail!("collaborative.k must be at least 1");
        }
        if !(0.0..=10.0).contains(&c.like_threshold) {
            bail!("collaborative.like_threshold must lie in [0, 10]");
        }
        if self.file.eval.top_n.is_empty() || self.file.eval.top_n.contains(&0) {
            bail!("eval.top_n must list positive list lengths");
        }
        let inputs = &self.file.inputs;
        let named = [
            ("ratings", &inputs.ratings),
            ("movies", &inputs.movies),
            ("users", &inputs.users),
            ("metadata", &inputs.metadata),
            ("tweets", &inputs.tweets),
            ("lexicon", &inputs.lexicon),
            ("truth", &inputs.truth),
        ];
        for (name, value) in named {
            if let Some(rel) = value {
                let path = self.base_dir.join(rel);
                if !path.exists() {
                    bail!("inputs.{name}: {} does not exist", path.display());
                }
            }
        }
        Ok(())
    }

    /// A required input path, resolved.
    pub fn input(&self, name: &str) -> Result<PathBuf> {
        let inputs = &self.file.inputs;
        let value = match name {
            "ratings" => &inputs.ratings,
            "movies" => &inputs.movies,
            "users" => &inputs.users,
            "metadata" => &inputs.metadata,
            "tweets" => &inputs.tweets,
            "lexicon" => &inputs.lexicon,
            "truth" => &inputs.truth,
            _ => unreachable!("unknown input {name}"),
        };
        match value {
            Some(rel) => Ok(self.base_dir.join(rel)),
            None => bail!("inputs.{name} is not set in the config"),
        }
    }

    pub fn has_input(&self, name: &str) -> bool {
        self.input(name).is_ok()
    }

    pub fn fusion(&self) -> Result<FusionConfig> {
        let f = &self.file.fusion;
        Ok(FusionConfig::new(f.omega1, f.omega2, f.d)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        let c = &self.file.collaborative;
        TrainConfig {
            cf: CfConfig {
                k: c.k,
                metric: c.metric,
                normalized: c.normalized,
            },
            densify: c.densify,
            min_similarity: c.min_similarity,
            like_threshold: c.like_threshold,
            scale_targets: c.scale_targets,
            schema: self.file.content.attributes.clone(),
        }
    }
}

fn hash_config(file: &FileConfig) -> Result<String> {
    let hashed = Hashed {
        inputs: &file.inputs,
        filter: &file.filter,
        collaborative: &file.collaborative,
        content: &file.content,
        fusion: &file.fusion,
        eval: &file.eval,
    };
    let canonical = serde_json::to_string(&hashed)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}
