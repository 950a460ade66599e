//! Synthetic stand-in for a cleaned Wikipedia dump such as text8.
//!
//! The text is a single line of lowercase pseudo-words. It is built from
//! topical segments: each segment picks a topic, and each token is either
//! a shared function word or a word from that topic, both drawn from Zipf
//! distributions. The result has a Zipfian rank/frequency curve with a
//! long tail of rare types and co-occurrence structure that embeddings can
//! learn, which is what the count-error and similarity experiments need.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwxyz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateSpec {
    pub function_words: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    /// Probability that a token is a function word.
    pub function_share: f64,
    /// Zipf exponent of both word distributions.
    pub exponent: f64,
    /// Topics sit on a ring. Each topical token comes from a topic offset
    /// from the segment's topic by a rounded normal draw with this standard
    /// deviation, so relatedness falls off gradually with ring distance.
    pub topic_spread: f64,
    pub min_segment: usize,
    pub max_segment: usize,
    /// Stop after at least this many bytes.
    pub target_bytes: usize,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    /// About 10 MB of text.
    fn default() -> Self {
        SurrogateSpec {
            function_words: 300,
            topics: 60,
            words_per_topic: 2500,
            function_share: 0.35,
            exponent: 1.0,
            topic_spread: 2.0,
            min_segment: 15,
            max_segment: 60,
            target_bytes: 10_000_000,
            seed: 8,
        }
    }
}

/// Spelling of word number `id`: base-100 digits as consonant-vowel
/// syllables, so distinct ids give distinct words.
pub fn spell(mut id: usize) -> String {
    let mut syllables = Vec::new();
    loop {
        let d = id % 100;
        syllables.push([CONSONANTS[d / 5], VOWELS[d % 5]]);
        id /= 100;
        if id == 0 {
            break;
        }
    }
    syllables.iter().rev().flat_map(|s| s.iter().map(|&b| b as char)).collect()
}

struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|r| {
                acc += (r as f64).powf(-exponent);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        ZipfTable { cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }
}

/// Writes the corpus to `out`, returning the number of bytes written.
pub fn generate<W: Write>(spec: &SurrogateSpec, mut out: W) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let function = ZipfTable::new(spec.function_words, spec.exponent);
    let topical = ZipfTable::new(spec.words_per_topic, spec.exponent);
    let function_names: Vec<String> = (0..spec.function_words).map(spell).collect();
    let mut written = 0usize;
    let mut line = String::new();
    while written < spec.target_bytes {
        let topic = rng.random_range(0..spec.topics);
        let len = rng.random_range(spec.min_segment..=spec.max_segment);
        line.clear();
        for _ in 0..len {
            if rng.random::<f64>() < spec.function_share {
                line.push_str(&function_names[function.sample(&mut rng)]);
            } else {
                let offset: f64 = rng.sample::<f64, _>(StandardNormal) * spec.topic_spread;
                let t = (topic as i64 + offset.round() as i64).rem_euclid(spec.topics as i64) as usize;
                let id = spec.function_words + t * spec.words_per_topic + topical.sample(&mut rng);
                line.push_str(&spell(id));
            }
            line.push(' ');
        }
        out.write_all(line.as_bytes())?;
        written += line.len();
    }
    out.flush()?;
    Ok(written)
}

pub fn generate_string(spec: &SurrogateSpec) -> String {
    let mut buf = Vec::with_capacity(spec.target_bytes + 1024);
    generate(spec, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
