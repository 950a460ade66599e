//! Intrinsic evaluation: sketch count error by true frequency rank, and
//! agreement of pairwise cosine similarities between two models.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::batch::BatchModel;
use crate::corpus::{rank_by_frequency, CountTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sgns::cosine;
use crate::sketch::SpaceSavingSketch;
use crate::stream::StreamModel;

/// Anything that maps words to target vectors.
pub trait WordVectors {
    type Elem: Scalar;

    fn dim(&self) -> usize;
    fn vector(&self, word: &str) -> Option<&[Self::Elem]>;
    /// Known words, most frequent first.
    fn ranked_words(&self) -> Vec<String>;
}

impl<T: Scalar> WordVectors for StreamModel<T> {
    type Elem = T;

    fn dim(&self) -> usize {
        self.table().dim()
    }
    fn vector(&self, word: &str) -> Option<&[T]> {
        StreamModel::vector(self, word)
    }
    fn ranked_words(&self) -> Vec<String> {
        self.sketch().items().into_iter().map(|(w, _)| w).collect()
    }
}

impl<T: Scalar> WordVectors for BatchModel<T> {
    type Elem = T;

    fn dim(&self) -> usize {
        self.table.dim()
    }
    fn vector(&self, word: &str) -> Option<&[T]> {
        BatchModel::vector(self, word)
    }
    fn ranked_words(&self) -> Vec<String> {
        self.vocab.words().to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorMode {
    /// Non-resident words are estimated at the sketch's smallest count.
    Impute,
    /// Non-resident words get no estimate.
    Omit,
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impute" => Ok(ErrorMode::Impute),
            "omit" => Ok(ErrorMode::Omit),
            other => Err(Error::Config(format!("unknown error mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountErrorRow {
    /// 1-based rank in the true frequency ordering.
    pub rank: usize,
    pub word: String,
    pub true_count: u64,
    pub estimate: Option<u64>,
    pub relative_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountErrorReport {
    pub mode: ErrorMode,
    pub rows: Vec<CountErrorRow>,
}

impl CountErrorReport {
    /// CSV with columns `rank,word,true,est,rel_err`; undefined cells empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "word", "true", "est", "rel_err"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.word.clone(),
                r.true_count.to_string(),
                r.estimate.map(|e| e.to_string()).unwrap_or_default(),
                r.relative_error.map(|e| e.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::corrupt(format!("csv: {other:?}")),
    }
}

/// Relative count error of every true word type, in true rank order.
pub fn count_error_report(sketch: &SpaceSavingSketch, truth: &CountTable, mode: ErrorMode) -> CountErrorReport {
    let floor = sketch.min_count();
    let rows = rank_by_frequency(truth)
        .into_iter()
        .enumerate()
        .map(|(i, (word, true_count))| {
            let estimate = match (sketch.count(&word), mode) {
                (Some(c), _) => Some(c),
                (None, ErrorMode::Impute) => Some(floor),
                (None, ErrorMode::Omit) => None,
            };
            let relative_error = estimate.map(|e| (e as f64 - true_count as f64) / true_count as f64);
            CountErrorRow { rank: i + 1, word, true_count, estimate, relative_error }
        })
        .collect();
    CountErrorReport { mode, rows }
}

/// Inclusive, 1-based rank interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RankInterval {
    pub lo: usize,
    pub hi: usize,
}

impl RankInterval {
    pub fn new(lo: usize, hi: usize) -> Self {
        RankInterval { lo, hi }
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.lo == 0 || self.lo > self.hi || self.hi > len {
            return Err(Error::InvalidInterval { lo: self.lo, hi: self.hi, len });
        }
        Ok(())
    }
}

impl fmt::Display for RankInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for RankInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("rank interval must look like LO-HI, got {s:?}"));
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        Ok(RankInterval {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Rank buckets used for the similarity comparison plots.
pub const DEFAULT_BUCKETS: [RankInterval; 3] = [
    RankInterval { lo: 1, hi: 100 },
    RankInterval { lo: 1601, hi: 1700 },
    RankInterval { lo: 6401, hi: 6500 },
];

/// Uniform sample of `n_pairs` distinct unordered word pairs with one word
/// from each interval. Returns every such pair when there are no more than
/// `n_pairs` of them.
pub fn sample_bucket_pairs<R: Rng + ?Sized>(
    ranked_words: &[String],
    a: RankInterval,
    b: RankInterval,
    n_pairs: usize,
    rng: &mut R,
) -> Result<Vec<(String, String)>> {
    a.check(ranked_words.len())?;
    b.check(ranked_words.len())?;
    let mut universe: Vec<(usize, usize)> = Vec::with_capacity((a.hi - a.lo + 1) * (b.hi - b.lo + 1));
    for i in a.lo - 1..a.hi {
        for j in b.lo - 1..b.hi {
            if i != j {
                universe.push((i.min(j), i.max(j)));
            }
        }
    }
    universe.sort_unstable();
    universe.dedup();
    let chosen: Vec<(usize, usize)> = if universe.len() <= n_pairs {
        universe
    } else {
        let mut picks = rand::seq::index::sample(rng, universe.len(), n_pairs).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|k| universe[k]).collect()
    };
    Ok(chosen
        .into_iter()
        .map(|(i, j)| (ranked_words[i].clone(), ranked_words[j].clone()))
        .collect())
}

/// Sample Pearson correlation; `None` with fewer than two points or a
/// constant series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { left: xs.len(), right: ys.len() });
    }
    let n = xs.len();
    if n < 2 {
        return Ok(None);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityPoint {
    pub word1: String,
    pub word2: String,
    pub sim_a: f64,
    pub sim_b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityReport {
    pub bucket_pair: Option<(RankInterval, RankInterval)>,
    pub pairs_sampled: usize,
    pub defined_pairs: usize,
    pub undefined_fraction: f64,
    pub pearson_r: Option<f64>,
    pub points: Vec<SimilarityPoint>,
}

impl SimilarityReport {
    /// One-line summary: `r=<value|undefined> undefined_fraction=<value>`.
    pub fn summary(&self) -> String {
        let r = self.pearson_r.map_or_else(|| "undefined".to_string(), |r| format!("{r:.6}"));
        let bucket = self
            .bucket_pair
            .map(|(a, b)| format!("buckets={a},{b} "))
            .unwrap_or_default();
        format!(
            "{bucket}pairs={} defined={} r={r} undefined_fraction={:.6}",
            self.pairs_sampled, self.defined_pairs, self.undefined_fraction
        )
    }

    /// Same layout as [`write_similarity_csv`].
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        write_similarity_csv(std::slice::from_ref(self), out)
    }
}

/// Writes the points of several reports into one CSV with bucket columns.
pub fn write_similarity_csv<W: Write>(reports: &[SimilarityReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bucket_a", "bucket_b", "word1", "word2", "sim_a", "sim_b"]).map_err(csv_err)?;
    for rep in reports {
        let (ba, bb) = rep
            .bucket_pair
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .unwrap_or_default();
        for p in &rep.points {
            w.write_record([
                ba.clone(),
                bb.clone(),
                p.word1.clone(),
                p.word2.clone(),
                p.sim_a.to_string(),
                p.sim_b.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn pair_cosine<M: WordVectors>(model: &M, w1: &str, w2: &str) -> Option<f64> {
    let (u, v) = (model.vector(w1)?, model.vector(w2)?);
    cosine(u, v).ok().flatten()
}

/// Compares cosine similarities of `pairs` under two models. A pair counts
/// as defined only if both words resolve in both models and both cosines
/// are defined; the correlation uses defined pairs only.
pub fn similarity_correlation<A, B>(model_a: &A, model_b: &B, pairs: &[(String, String)]) -> SimilarityReport
where
    A: WordVectors,
    B: WordVectors,
{
    let points: Vec<SimilarityPoint> = pairs
        .iter()
        .filter_map(|(w1, w2)| {
            let sim_a = pair_cosine(model_a, w1, w2)?;
            let sim_b = pair_cosine(model_b, w1, w2)?;
            Some(SimilarityPoint { word1: w1.clone(), word2: w2.clone(), sim_a, sim_b })
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.sim_a).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sim_b).collect();
    let pearson_r = pearson(&xs, &ys).expect("equal lengths");
    let undefined_fraction = if pairs.is_empty() {
        0.0
    } else {
        1.0 - points.len() as f64 / pairs.len() as f64
    };
    SimilarityReport {
        bucket_pair: None,
        pairs_sampled: pairs.len(),
        defined_pairs: points.len(),
        undefined_fraction,
        pearson_r,
        points,
    }
}

/// Top `n` words by cosine to `word`'s vector, excluding `word` itself.
/// Ties are broken by word.
pub fn nearest_neighbors<M: WordVectors>(model: &M, word: &str, n: usize) -> Result<Vec<(String, f64)>> {
    let query = model.vector(word).ok_or_else(|| Error::UnknownWord(word.to_owned()))?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut scored: Vec<(String, f64)> = model
        .ranked_words()
        .into_iter()
        .filter(|w| w != word)
        .filter_map(|w| {
            let sim = cosine(query, model.vector(&w)?).ok().flatten()?;
            Some((w, sim))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored)
}
