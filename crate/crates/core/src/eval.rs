//! Top-N precision against reference lists and rank correlations. The
//! fusion-weight sweep lives here too.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::format_movie_id;
use crate::fusion::{FusionConfig, FusionError, Model, Ranking};

pub const DEFAULT_TOP_N: [usize; 2] = [5, 10];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("N must be at least 1")]
    InvalidN,
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("no ground-truth movies are present in the model")]
    EmptyGroundTruth,
    #[error("sweep weight {0} outside [0, 1]")]
    InvalidGrid(f64),
    #[error("truth file line {line}: {reason}")]
    Truth { line: usize, reason: String },
    #[error("unknown ground-truth mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionAtN {
    pub precision: f64,
    pub hits: usize,
}

/// Hits among the first `n` recommendations, and hits / `n`. The denominator
/// stays `n` for shorter lists.
pub fn precision_at_n(recommended: &[u32], relevant: &BTreeSet<u32>, n: usize) -> Result<PrecisionAtN> {
    if n == 0 {
        return Err(EvalError::InvalidN);
    }
    let hits = recommended
        .iter()
        .take(n)
        .filter(|id| relevant.contains(id))
        .count();
    Ok(PrecisionAtN {
        precision: hits as f64 / n as f64,
        hits,
    })
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooShort(x.len()));
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    // sqrt(s * s) == s exactly, so identical rankings give exactly ±1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson on fractional ranks. Without ties this
/// equals `1 − 6·Σd² / (N(N²−1))`.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    plcc(&fractional_ranks(x), &fractional_ranks(y))
}

/// Kendall tau-a: `2(N_c − N_d) / (N(N−1))`; tied pairs count as neither.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let mut balance: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
            if x[i] != x[j] && y[i] != y[j] {
                balance += s as i64;
            }
        }
    }
    Ok(2.0 * balance as f64 / (n * (n - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub plcc: f64,
    pub srocc: f64,
    pub krcc: f64,
    pub n: usize,
}

pub fn correlation_block(x: &[f64], y: &[f64]) -> Result<CorrelationBlock> {
    Ok(CorrelationBlock {
        plcc: plcc(x, y)?,
        srocc: srocc(x, y)?,
        krcc: krcc(x, y)?,
        n: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthMode {
    /// A movie is relevant if any source lists it.
    #[default]
    Union,
    /// A movie is relevant only if every source listing the query agrees.
    Intersection,
}

impl FromStr for TruthMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "union" => Ok(TruthMode::Union),
            "intersection" => Ok(TruthMode::Intersection),
            _ => Err(EvalError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    relevant: BTreeMap<u32, BTreeSet<u32>>,
}

impl GroundTruth {
    /// Self-references are dropped.
    pub fn new(relevant: BTreeMap<u32, BTreeSet<u32>>) -> Self {
        let relevant = relevant
            .into_iter()
            .map(|(id, mut set)| {
                set.remove(&id);
                (id, set)
            })
            .filter(|(_, set)| !set.is_empty())
            .collect();
        GroundTruth { relevant }
    }

    /// Reads `movie_id,relevant_movie_id[,source]` rows; a header row is
    /// optional. Sources are combined per `mode`.
    pub fn read_csv<R: Read>(reader: R, mode: TruthMode) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut by_source: BTreeMap<u32, BTreeMap<String, BTreeSet<u32>>> = BTreeMap::new();
        for (idx, row) in r.records().enumerate() {
            let row = row?;
            let line = idx + 1;
            if idx == 0 && row.get(0).is_some_and(|v| v.parse::<u32>().is_err()) {
                continue;
            }
            if row.len() < 2 {
                return Err(EvalError::Truth {
                    line,
                    reason: "expected movie_id,relevant_movie_id".into(),
                });
            }
            let parse = |v: &str| {
                v.parse::<u32>().map_err(|_| EvalError::Truth {
                    line,
                    reason: format!("bad movie id {v:?}"),
                })
            };
            let (movie, relevant) = (parse(&row[0])?, parse(&row[1])?);
            let source = row.get(2).unwrap_or("").to_string();
            by_source
                .entry(movie)
                .or_default()
                .entry(source)
                .or_default()
                .insert(relevant);
        }
        let relevant = by_source
            .into_iter()
            .map(|(movie, sources)| {
                let mut sets = sources.into_values();
                let first = sets.next().unwrap_or_default();
                let combined = sets.fold(first, |acc, s| match mode {
                    TruthMode::Union => acc.union(&s).copied().collect(),
                    TruthMode::Intersection => acc.intersection(&s).copied().collect(),
                });
                (movie, combined)
            })
            .collect();
        Ok(GroundTruth::new(relevant))
    }

    pub fn relevant(&self, movie_id: u32) -> Option<&BTreeSet<u32>> {
        self.relevant.get(&movie_id)
    }

    pub fn movies(&self) -> impl Iterator<Item = u32> + '_ {
        self.relevant.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovieEval {
    pub movie_id: u32,
    pub precision: Vec<f64>,
    pub hits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub top_n: Vec<usize>,
    pub per_movie: Vec<MovieEval>,
    pub mean_precision: Vec<f64>,
    /// Mean hit count per list; the figure comparable to "average precision"
    /// values above 1.
    pub mean_hits: Vec<f64>,
    pub correlation: Option<CorrelationBlock>,
}

fn metric_header(top_n: &[usize]) -> Vec<String> {
    top_n
        .iter()
        .map(|n| format!("p{n}"))
        .chain(top_n.iter().map(|n| format!("hit{n}")))
        .collect()
}

impl EvalReport {
    /// Writes `movie_id,p5,p10,hit5,hit10` rows and a closing `mean` row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["movie_id".to_string()];
        header.extend(metric_header(&self.top_n));
        w.write_record(&header)?;
        for m in &self.per_movie {
            let mut row = vec![format_movie_id(m.movie_id)];
            row.extend(m.precision.iter().map(f64::to_string));
            row.extend(m.hits.iter().map(usize::to_string));
            w.write_record(&row)?;
        }
        let mut row = vec!["mean".to_string()];
        row.extend(self.mean_precision.iter().map(f64::to_string));
        row.extend(self.mean_hits.iter().map(f64::to_string));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "movies evaluated: {}", self.per_movie.len());
        for (k, n) in self.top_n.iter().enumerate() {
            let _ = writeln!(
                out,
                "top-{n}: precision {:.4}, mean hits {:.4}",
                self.mean_precision[k], self.mean_hits[k]
            );
        }
        match &self.correlation {
            Some(c) => {
                let _ = writeln!(
                    out,
                    "sentiment vs external rating over {} movies: PLCC {:.4}, SROCC {:.4}, KRCC {:.4}",
                    c.n, c.plcc, c.srocc, c.krcc
                );
            }
            None => out.push_str("sentiment vs external rating: not enough data\n"),
        }
        out
    }
}

/// Evaluates every ground-truth movie present in the model.
pub fn evaluate(model: &Model, truth: &GroundTruth, ranking: Ranking, top_n: &[usize]) -> Result<EvalReport> {
    if top_n.contains(&0) || top_n.is_empty() {
        return Err(EvalError::InvalidN);
    }
    let longest = *top_n.iter().max().expect("non-empty");
    let mut per_movie = Vec::new();
    for movie_id in truth.movies().filter(|&id| model.contains(id)) {
        let relevant = truth.relevant(movie_id).expect("listed movie");
        let list = model.recommend_by(movie_id, longest, ranking)?.movie_ids();
        let scores = top_n
            .iter()
            .map(|&n| precision_at_n(&list, relevant, n))
            .collect::<Result<Vec<_>>>()?;
        per_movie.push(MovieEval {
            movie_id,
            precision: scores.iter().map(|s| s.precision).collect(),
            hits: scores.iter().map(|s| s.hits).collect(),
        });
    }
    if per_movie.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let count = per_movie.len() as f64;
    let mean_precision = (0..top_n.len())
        .map(|k| per_movie.iter().map(|m| m.precision[k]).sum::<f64>() / count)
        .collect();
    let mean_hits = (0..top_n.len())
        .map(|k| per_movie.iter().map(|m| m.hits[k] as f64).sum::<f64>() / count)
        .collect();
    Ok(EvalReport {
        top_n: top_n.to_vec(),
        per_movie,
        mean_precision,
        mean_hits,
        correlation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega2: f64,
    pub mean_precision: Vec<f64>,
    pub mean_hits: Vec<f64>,
}

/// Re-evaluates the model for each sentiment weight `ω2` (with `ω1 = 1 − ω2`).
pub fn weight_sweep(
    model: &Model,
    truth: &GroundTruth,
    grid: &[f64],
    d: f64,
    top_n: &[usize],
) -> Result<Vec<SweepRow>> {
    if let Some(&bad) = grid.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(EvalError::InvalidGrid(bad));
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    grid.par_iter()
        .map(|&omega2| {
            let cfg = FusionConfig::with_sentiment_weight(omega2, d)?;
            let report = evaluate(model, truth, Ranking::Fused(cfg), top_n)?;
            Ok(SweepRow {
                omega2,
                mean_precision: report.mean_precision,
                mean_hits: report.mean_hits,
            })
        })
        .collect()
}

/// Writes `omega2,p5,p10,hit5,hit10` rows.
pub fn write_sweep_csv<W: Write>(writer: W, top_n: &[usize], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["omega2".to_string()];
    header.extend(metric_header(top_n));
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.omega2.to_string()];
        row.extend(r.mean_precision.iter().map(f64::to_string));
        row.extend(r.mean_hits.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn precision_examples() {
        let p = precision_at_n(&[1, 2, 3, 4, 5], &set(&[2, 5, 9]), 5).unwrap();
        assert_eq!((p.precision, p.hits), (0.4, 2));
        let p = precision_at_n(&[1, 2], &set(&[1, 2, 3]), 2).unwrap();
        assert_eq!(p.precision, 1.0);
        let p = precision_at_n(&[1, 2], &set(&[]), 2).unwrap();
        assert_eq!((p.precision, p.hits), (0.0, 0));
        // short lists keep the denominator
        let p = precision_at_n(&[1], &set(&[1]), 5).unwrap();
        assert_eq!(p.precision, 0.2);
        assert!(matches!(precision_at_n(&[1], &set(&[1]), 0), Err(EvalError::InvalidN)));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((plcc(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((plcc(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((plcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(plcc(&[1.0, 1.0], &[1.0, 2.0]), Err(EvalError::ZeroVariance)));
        assert!(matches!(plcc(&[1.0], &[1.0]), Err(EvalError::TooShort(1))));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[10.0, 50.0, 51.0]).unwrap(), 1.0);
        assert_eq!(srocc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let r = srocc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
        assert_eq!(fractional_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(krcc(&[1.0, 2.0, 3.0], &[4.0, 5.0, 9.0]).unwrap(), 1.0);
        assert!((krcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(krcc(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn truth_union_and_intersection() {
        let text = "movie_id,relevant_movie_id,source\n1,2,imdb\n1,3,imdb\n1,3,tmdb\n1,1,tmdb\n4,5,tmdb\n";
        let u = GroundTruth::read_csv(text.as_bytes(), TruthMode::Union).unwrap();
        assert_eq!(u.relevant(1), Some(&set(&[2, 3])));
        let i = GroundTruth::read_csv(text.as_bytes(), TruthMode::Intersection).unwrap();
        assert_eq!(i.relevant(1), Some(&set(&[3])));
        assert_eq!(i.relevant(4), Some(&set(&[5])));
        let plain = GroundTruth::read_csv("0451279,0000002\n".as_bytes(), TruthMode::Union).unwrap();
        assert_eq!(plain.relevant(451279), Some(&set(&[2])));
        assert!(GroundTruth::read_csv("1,x\n".as_bytes(), TruthMode::Union).is_err());
    }

    #[test]
    fn report_csv_layout() {
        let report = EvalReport {
            top_n: vec![5, 10],
            per_movie: vec![MovieEval { movie_id: 7, precision: vec![0.4, 0.3], hits: vec![2, 3] }],
            mean_precision: vec![0.4, 0.3],
            mean_hits: vec![2.0, 3.0],
            correlation: None,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "movie_id,p5,p10,hit5,hit10\n0000007,0.4,0.3,2,3\nmean,0.4,0.3,2,3\n"
        );
    }
}
