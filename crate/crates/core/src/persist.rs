//! Model checkpoints and text embedding interchange.
//!
//! Checkpoint layout (all integers and reals little-endian):
//!
//! ```text
//! magic "SSW2VCKP" | version u32 | scalar width u8
//! config | sketch (length-prefixed TSV) | reservoir
//! embeddings: rows u64, dim u64, target[], context[]
//! step counters u64[] | rng: seed [u8; 32], stream u64, word position u128
//! stats: 7 x u64
//! ```
//!
//! Arrays carry a u64 length prefix. A restored model continues training
//! bit-for-bit like the one that was saved.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::eval::WordVectors;
use crate::reservoir::Reservoir;
use crate::scalar::Scalar;
use crate::sgns::{EmbeddingTable, LearningSchedule, ScheduleKind, SlotLearningState};
use crate::sketch::SpaceSavingSketch;
use crate::stream::{StreamModel, TrainStats, TrainerConfig};

pub const MAGIC: &[u8; 8] = b"SSW2VCKP";
pub const FORMAT_VERSION: u32 = 1;

fn encode_config(enc: &mut Encoder, c: &TrainerConfig) {
    enc.u64(c.vocab_capacity as u64);
    enc.u64(c.reservoir_capacity as u64);
    enc.u64(c.negatives as u64);
    enc.u64(c.dim as u64);
    enc.u64(c.context_radius as u64);
    enc.f64(c.subsample_threshold);
    enc.u8(c.dynamic_windows as u8);
    let s = &c.schedule;
    enc.u8(match s.kind {
        ScheduleKind::Linear => 0,
        ScheduleKind::Polynomial => 1,
    });
    enc.f64(s.rho0);
    enc.f64(s.rho_min);
    enc.u64(s.horizon);
    enc.f64(s.tau);
    enc.f64(s.kappa);
    enc.u64(c.rng_seed);
    enc.u64(c.log_interval);
}

fn decode_config(dec: &mut Decoder<'_>) -> Result<TrainerConfig> {
    let vocab_capacity = dec.usize()?;
    let reservoir_capacity = dec.usize()?;
    let negatives = dec.usize()?;
    let dim = dec.usize()?;
    let context_radius = dec.usize()?;
    let subsample_threshold = dec.f64()?;
    let dynamic_windows = match dec.u8()? {
        0 => false,
        1 => true,
        _ => return Err(Error::corrupt("bad dynamic-window flag")),
    };
    let kind = match dec.u8()? {
        0 => ScheduleKind::Linear,
        1 => ScheduleKind::Polynomial,
        _ => return Err(Error::corrupt("bad schedule kind")),
    };
    let schedule = LearningSchedule {
        kind,
        rho0: dec.f64()?,
        rho_min: dec.f64()?,
        horizon: dec.u64()?,
        tau: dec.f64()?,
        kappa: dec.f64()?,
    };
    let config = TrainerConfig {
        vocab_capacity,
        reservoir_capacity,
        negatives,
        dim,
        context_radius,
        subsample_threshold,
        dynamic_windows,
        schedule,
        rng_seed: dec.u64()?,
        log_interval: dec.u64()?,
    };
    config
        .validate()
        .map_err(|e| Error::corrupt(format!("checkpoint config: {e}")))?;
    Ok(config)
}

/// Serializes a model into checkpoint bytes.
pub fn checkpoint_bytes<T: Scalar>(model: &StreamModel<T>) -> Vec<u8> {
    let mut enc = Encoder::default();
    enc.buf.extend_from_slice(MAGIC);
    enc.u32(FORMAT_VERSION);
    enc.u8(T::WIDTH);
    encode_config(&mut enc, model.config());

    let mut tsv = Vec::new();
    model.sketch().write_tsv(&mut tsv).expect("writing to memory");
    enc.bytes(&tsv);

    model.reservoir().encode(&mut enc);

    let table = model.table();
    enc.u64(table.rows() as u64);
    enc.u64(table.dim() as u64);
    enc.scalars(table.target_data());
    enc.scalars(table.context_data());

    enc.u64s(model.learning().steps());

    let rng = model.rng();
    enc.buf.extend_from_slice(&rng.get_seed());
    enc.u64(rng.get_stream());
    enc.u128(rng.get_word_pos());

    let s = model.stats();
    for v in [
        s.sentences,
        s.tokens,
        s.retained_tokens,
        s.ejections,
        s.contexts_trained,
        s.contexts_skipped,
        s.pairs_trained,
    ] {
        enc.u64(v);
    }
    enc.buf
}

/// Scalar width in bytes recorded in a checkpoint header.
pub fn checkpoint_width(bytes: &[u8]) -> Result<u8> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut dec = Decoder::new(&bytes[MAGIC.len()..]);
    let version = dec.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    dec.u8()
}

/// Rebuilds a model from checkpoint bytes, validating every payload.
pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<StreamModel<T>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut dec = Decoder::new(&bytes[MAGIC.len()..]);
    let version = dec.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let width = dec.u8()?;
    if width != T::WIDTH {
        return Err(Error::corrupt(format!(
            "checkpoint stores {width}-byte reals, expected {}",
            T::WIDTH
        )));
    }
    let config = decode_config(&mut dec)?;

    let tsv = dec.bytes()?;
    let sketch = SpaceSavingSketch::read_tsv(tsv)?;
    if sketch.capacity() != config.vocab_capacity {
        return Err(Error::corrupt("sketch capacity differs from config"));
    }

    let reservoir = Reservoir::decode(&mut dec)?;
    if reservoir.capacity() != config.reservoir_capacity {
        return Err(Error::corrupt("reservoir capacity differs from config"));
    }
    if reservoir.values().iter().any(|&v| v as usize >= sketch.len()) {
        return Err(Error::corrupt("reservoir refers to an unoccupied slot"));
    }

    let rows = dec.usize()?;
    let dim = dec.usize()?;
    if rows != config.vocab_capacity || dim != config.dim {
        return Err(Error::corrupt("embedding shape differs from config"));
    }
    let target = dec.scalars::<T>()?;
    let context = dec.scalars::<T>()?;
    let table = EmbeddingTable::from_parts(rows, dim, target, context)?;
    if !table.is_finite() {
        return Err(Error::corrupt("non-finite embedding values"));
    }

    let steps = dec.u64s()?;
    if steps.len() != rows {
        return Err(Error::corrupt("step counter count differs from slot count"));
    }
    let learning = SlotLearningState::from_parts(steps, config.schedule)?;

    let seed: [u8; 32] = dec.take(32)?.try_into().expect("32 bytes");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(dec.u64()?);
    rng.set_word_pos(dec.u128()?);

    let stats = TrainStats {
        sentences: dec.u64()?,
        tokens: dec.u64()?,
        retained_tokens: dec.u64()?,
        ejections: dec.u64()?,
        contexts_trained: dec.u64()?,
        contexts_skipped: dec.u64()?,
        pairs_trained: dec.u64()?,
    };
    if !dec.is_empty() {
        return Err(Error::corrupt("trailing bytes after checkpoint"));
    }
    if stats.retained_tokens != sketch.observed() || stats.retained_tokens != reservoir.seen() {
        return Err(Error::corrupt("stats disagree with sketch and reservoir"));
    }
    Ok(StreamModel::assemble(config, sketch, reservoir, table, learning, rng, stats))
}

pub fn save_checkpoint<T: Scalar>(model: &StreamModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&checkpoint_bytes(model))?;
    f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<StreamModel<T>> {
    let bytes = std::fs::read(path)?;
    model_from_bytes(&bytes)
}

/// Whether the file at `path` starts with the checkpoint magic bytes.
pub fn is_checkpoint(path: impl AsRef<Path>) -> Result<bool> {
    let mut head = [0u8; 8];
    let mut f = File::open(path)?;
    let mut got = 0;
    while got < head.len() {
        let n = f.read(&mut head[got..])?;
        if n == 0 {
            return Ok(false);
        }
        got += n;
    }
    Ok(&head == MAGIC)
}

/// Writes `<count> <dim>` then one `word v1 .. vD` line per word in rank
/// order. Values use the shortest decimal form that reads back exactly.
pub fn export_embeddings<M: WordVectors, W: Write>(model: &M, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let words = model.ranked_words();
    writeln!(out, "{} {}", words.len(), model.dim())?;
    for w in &words {
        let v = model.vector(w).expect("ranked words resolve");
        out.write_all(w.as_bytes())?;
        for x in v {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_embeddings_to_path<M: WordVectors>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    export_embeddings(model, File::create(path)?)
}

/// Vectors read back from the text format.
#[derive(Clone, Debug, PartialEq)]
pub struct TextEmbeddings<T> {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> TextEmbeddings<T> {
    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines.next().ok_or_else(|| Error::corrupt("missing embedding header"))??;
        let mut h = header.split_ascii_whitespace();
        let (count, dim) = match (h.next(), h.next(), h.next()) {
            (Some(c), Some(d), None) => (
                c.parse::<usize>().map_err(|_| Error::corrupt("bad word count"))?,
                d.parse::<usize>().map_err(|_| Error::corrupt("bad dimension"))?,
            ),
            _ => return Err(Error::corrupt("embedding header must be '<count> <dim>'")),
        };
        let mut words = Vec::with_capacity(count.min(1 << 20));
        let mut index = HashMap::new();
        let mut data = Vec::with_capacity(count.saturating_mul(dim).min(1 << 24));
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_ascii_whitespace();
            let word = parts.next().expect("non-blank line").to_owned();
            let before = data.len();
            for p in parts {
                data.push(p.parse::<T>().map_err(|_| Error::corrupt(format!("bad value {p:?}")))?);
            }
            if data.len() - before != dim {
                return Err(Error::corrupt(format!("word {word:?} has {} values", data.len() - before)));
            }
            if index.insert(word.clone(), words.len()).is_some() {
                return Err(Error::corrupt(format!("duplicate word {word:?}")));
            }
            words.push(word);
        }
        if words.len() != count {
            return Err(Error::corrupt(format!("header promises {count} words, found {}", words.len())));
        }
        Ok(TextEmbeddings { words, index, dim, data })
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<T: Scalar> WordVectors for TextEmbeddings<T> {
    type Elem = T;

    fn dim(&self) -> usize {
        self.dim
    }
    fn vector(&self, word: &str) -> Option<&[T]> {
        self.index.get(word).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }
    fn ranked_words(&self) -> Vec<String> {
        self.words.clone()
    }
}
