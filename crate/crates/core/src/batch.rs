//! Two-pass reference trainer in the style of word2vec.
//!
//! The first pass builds an exact min-count vocabulary and a 0.75-smoothed
//! negative sampling table; later passes train with one global, linearly
//! decaying learning rate. Windows are truncated at sentence edges.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use crate::corpus::{rank_by_frequency, CountTable, Sentence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sgns::EmbeddingTable;
use crate::stream::{effective_radius, retention_probability, TrainerConfig};

/// Smoothing exponent of the negative sampling distribution.
pub const SMOOTHING_POWER: f64 = 0.75;

/// Default negative table length.
pub const DEFAULT_TABLE_LEN: usize = 100_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchVocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    total_tokens: u64,
}

impl BatchVocab {
    /// Keeps words with at least `min_count` occurrences, ids assigned by
    /// descending count then ascending word.
    pub fn from_counts(table: &CountTable, min_count: u64) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (w, c) in rank_by_frequency(table) {
            if c < min_count {
                break;
            }
            words.push(w);
            counts.push(c);
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let total_tokens = counts.iter().sum();
        Ok(BatchVocab { words, counts, index, total_tokens })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of corpus tokens belonging to retained words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(out, "{w}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// First pass: exact counts, then the min-count cut.
pub fn build_vocab<I>(sentences: I, min_count: u64) -> Result<BatchVocab>
where
    I: IntoIterator<Item = Result<Sentence>>,
{
    let mut counts = CountTable::new();
    for s in sentences {
        counts.add_sentence(&s?);
    }
    BatchVocab::from_counts(&counts, min_count)
}

/// Fixed-length table of word ids for O(1) smoothed negative draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeTable {
    entries: Vec<u32>,
}

impl NegativeTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.entries[rng.random_range(0..self.entries.len())] as usize
    }
}

/// Largest-remainder apportionment of `table_len` slots in proportion to
/// `count^0.75`. Leftover slots go to the largest fractional parts, ties to
/// the lower id.
pub fn build_negative_table(vocab: &BatchVocab, table_len: usize) -> Result<NegativeTable> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    if table_len < vocab.len() {
        return Err(Error::Config(format!(
            "negative table length {table_len} is smaller than the vocabulary ({})",
            vocab.len()
        )));
    }
    let weights: Vec<f64> = vocab.counts.iter().map(|&c| (c as f64).powf(SMOOTHING_POWER)).collect();
    let total: f64 = weights.iter().sum();
    let mut shares: Vec<usize> = Vec::with_capacity(weights.len());
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    for (id, w) in weights.iter().enumerate() {
        let quota = table_len as f64 * w / total;
        let whole = quota.floor();
        shares.push(whole as usize);
        fractions.push((quota - whole, id));
    }
    let assigned: usize = shares.iter().sum();
    // Floating-point rounding can push the floors a hair over the length.
    let mut leftover = table_len as i64 - assigned as i64;
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut i = 0;
    while leftover > 0 {
        shares[fractions[i % fractions.len()].1] += 1;
        leftover -= 1;
        i += 1;
    }
    let mut j = fractions.len();
    while leftover < 0 {
        j = if j == 0 { fractions.len() - 1 } else { j - 1 };
        let id = fractions[j].1;
        if shares[id] > 0 {
            shares[id] -= 1;
            leftover += 1;
        }
    }
    let mut entries = Vec::with_capacity(table_len);
    for (id, &n) in shares.iter().enumerate() {
        entries.extend(std::iter::repeat_n(id as u32, n));
    }
    Ok(NegativeTable { entries })
}

/// Trains `epochs` passes over the corpus returned by `open`.
///
/// Tokens outside the vocabulary are dropped, the rest are subsampled
/// against their exact relative frequency, and every (center, context) pair
/// in the possibly truncated window gets one update with `S` negatives
/// from `table`. The rate decays linearly from `rho0` to `rho_min` over
/// `epochs * vocab.total_tokens()` tokens.
pub fn batch_train<T, F, I, R>(
    mut open: F,
    vocab: &BatchVocab,
    table: &NegativeTable,
    config: &TrainerConfig,
    epochs: usize,
    rng: &mut R,
) -> Result<EmbeddingTable<T>>
where
    T: Scalar,
    F: FnMut() -> Result<I>,
    I: IntoIterator<Item = Result<Sentence>>,
    R: Rng + ?Sized,
{
    if vocab.is_empty() || table.is_empty() {
        return Err(Error::EmptyVocab);
    }
    config.validate()?;
    let mut emb = EmbeddingTable::random(vocab.len(), config.dim, rng)?;
    if epochs == 0 {
        return Ok(emb);
    }
    let schedule = config.schedule;
    let horizon = epochs as f64 * vocab.total_tokens() as f64 + 1.0;
    let keep_prob: Vec<f64> = (0..vocab.len())
        .map(|id| retention_probability(vocab.count(id), vocab.total_tokens(), config.subsample_threshold))
        .collect();

    let mut processed = 0u64;
    let mut kept: Vec<(u64, usize)> = Vec::new();
    let mut negatives: Vec<usize> = Vec::with_capacity(config.negatives);
    let mut acc: Vec<T> = Vec::with_capacity(config.dim);
    for _ in 0..epochs {
        for sentence in open()? {
            let sentence = sentence?;
            kept.clear();
            for id in sentence.tokens().iter().filter_map(|t| vocab.id(t)) {
                let p = keep_prob[id];
                if p >= 1.0 || rng.random::<f64>() < p {
                    kept.push((processed, id));
                }
                processed += 1;
            }
            for (i, &(position, center)) in kept.iter().enumerate() {
                let rate = (schedule.rho0 * (1.0 - position as f64 / horizon)).max(schedule.rho_min);
                let r = effective_radius(config, rng);
                let lo = i.saturating_sub(r);
                let hi = (i + r).min(kept.len() - 1);
                for (j, &(_, context)) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negatives.clear();
                    negatives.extend((0..config.negatives).map(|_| table.draw(rng)));
                    emb.apply_pair_update(center, context, &negatives, rate, |_| rate, &mut acc);
                }
            }
        }
    }
    Ok(emb)
}

/// Vocabulary plus trained vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchModel<T> {
    pub vocab: BatchVocab,
    pub table: EmbeddingTable<T>,
}

impl<T: Scalar> BatchModel<T> {
    pub fn vector(&self, word: &str) -> Option<&[T]> {
        self.vocab.id(word).map(|id| self.table.target(id))
    }
}
