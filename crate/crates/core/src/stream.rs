//! Single-pass trainer: space-saving vocabulary, reservoir negatives and
//! slot-indexed embeddings with per-slot learning rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::reservoir::Reservoir;
use crate::scalar::Scalar;
use crate::sgns::{self, EmbeddingTable, GradientStepSpec, LearningSchedule, SlotLearningState};
use crate::sketch::{ObserveOutcome, SpaceSavingSketch};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    /// Sketch slots `K`.
    pub vocab_capacity: usize,
    /// Negative-sampling reservoir size `N`.
    pub reservoir_capacity: usize,
    /// Negative samples per pair `S`.
    pub negatives: usize,
    pub dim: usize,
    /// Context radius `C`.
    pub context_radius: usize,
    /// Subsampling threshold on relative frequency.
    pub subsample_threshold: f64,
    pub dynamic_windows: bool,
    pub schedule: LearningSchedule,
    pub rng_seed: u64,
    /// Emit a progress line every this many input tokens; 0 disables.
    pub log_interval: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            vocab_capacity: 100_000,
            reservoir_capacity: 100_000_000,
            negatives: 5,
            dim: 100,
            context_radius: 2,
            subsample_threshold: 1e-3,
            dynamic_windows: true,
            schedule: LearningSchedule::default(),
            rng_seed: 1,
            log_interval: 1_000_000,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_capacity", self.vocab_capacity),
            ("reservoir_capacity", self.reservoir_capacity),
            ("negatives", self.negatives),
            ("dim", self.dim),
            ("context_radius", self.context_radius),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_capacity > u32::MAX as usize {
            return Err(Error::Config("vocab_capacity must fit in 32 bits".into()));
        }
        if !(self.subsample_threshold > 0.0 && self.subsample_threshold.is_finite()) {
            return Err(Error::Config("subsample_threshold must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Counters reported by the streaming trainer. All are monotone.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub sentences: u64,
    pub tokens: u64,
    pub retained_tokens: u64,
    pub ejections: u64,
    /// Windows whose words were all resident and were trained.
    pub contexts_trained: u64,
    /// Windows skipped because a word was not resident.
    pub contexts_skipped: u64,
    pub pairs_trained: u64,
}

/// Probability of keeping a resident token with sketch count `count` out
/// of `observed`: `min(1, sqrt(threshold / f))` with `f = count / observed`.
pub fn retention_probability(count: u64, observed: u64, threshold: f64) -> f64 {
    if count == 0 || observed == 0 {
        return 1.0;
    }
    let f = count as f64 / observed as f64;
    (threshold / f).sqrt().min(1.0)
}

/// Keeps non-resident tokens; keeps resident ones with
/// [`retention_probability`]. Order is preserved.
pub fn subsample_tokens<'a, R: Rng + ?Sized>(
    sketch: &SpaceSavingSketch,
    threshold: f64,
    tokens: &'a [String],
    rng: &mut R,
) -> Vec<&'a str> {
    let observed = sketch.observed();
    tokens
        .iter()
        .filter(|t| match sketch.count(t) {
            None => true,
            Some(c) => {
                let p = retention_probability(c, observed, threshold);
                p >= 1.0 || rng.random::<f64>() < p
            }
        })
        .map(String::as_str)
        .collect()
}

/// Window radius for one position: uniform on `1..=C` with dynamic
/// windows, otherwise `C`.
pub fn effective_radius<R: Rng + ?Sized>(config: &TrainerConfig, rng: &mut R) -> usize {
    if config.dynamic_windows && config.context_radius > 1 {
        rng.random_range(1..=config.context_radius)
    } else {
        config.context_radius
    }
}

/// Cardinalities of every structure a [`StreamModel`] owns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelFootprint {
    pub sketch: crate::sketch::SketchFootprint,
    pub reservoir_len: usize,
    pub reservoir_capacity: usize,
    pub table_rows: usize,
    pub learning_slots: usize,
}

#[derive(Clone, Debug)]
pub struct StreamModel<T> {
    pub(crate) config: TrainerConfig,
    pub(crate) sketch: SpaceSavingSketch,
    pub(crate) reservoir: Reservoir,
    pub(crate) table: EmbeddingTable<T>,
    pub(crate) learning: SlotLearningState,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) stats: TrainStats,
    step: GradientStepSpec,
    acc: Vec<T>,
    touched: Vec<usize>,
    window_slots: Vec<Option<usize>>,
}

impl<T: Scalar> StreamModel<T> {
    /// Fresh model: empty sketch and reservoir, N(0, 1) embeddings for all
    /// `K` slots, every step counter at 1.
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let table = EmbeddingTable::random(config.vocab_capacity, config.dim, &mut rng)?;
        let sketch = SpaceSavingSketch::new(config.vocab_capacity)?;
        let reservoir = Reservoir::new(config.reservoir_capacity)?;
        let learning = SlotLearningState::new(config.vocab_capacity, config.schedule)?;
        Ok(Self::assemble(config, sketch, reservoir, table, learning, rng, TrainStats::default()))
    }

    pub(crate) fn assemble(
        config: TrainerConfig,
        sketch: SpaceSavingSketch,
        reservoir: Reservoir,
        table: EmbeddingTable<T>,
        learning: SlotLearningState,
        rng: ChaCha8Rng,
        stats: TrainStats,
    ) -> Self {
        StreamModel {
            step: GradientStepSpec::default(),
            acc: Vec::with_capacity(config.dim),
            touched: Vec::new(),
            window_slots: Vec::new(),
            config,
            sketch,
            reservoir,
            table,
            learning,
            rng,
            stats,
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn sketch(&self) -> &SpaceSavingSketch {
        &self.sketch
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    pub fn table(&self) -> &EmbeddingTable<T> {
        &self.table
    }

    pub fn learning(&self) -> &SlotLearningState {
        &self.learning
    }

    pub fn stats(&self) -> TrainStats {
        self.stats
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Target vector of a resident word.
    pub fn vector(&self, word: &str) -> Option<&[T]> {
        self.sketch.slot_of(word).map(|s| self.table.target(s))
    }

    pub fn footprint(&self) -> ModelFootprint {
        ModelFootprint {
            sketch: self.sketch.footprint(),
            reservoir_len: self.reservoir.len(),
            reservoir_capacity: self.reservoir.capacity(),
            table_rows: self.table.rows(),
            learning_slots: self.learning.len(),
        }
    }

    /// Subsamples `sentence` against the current sketch using the model's
    /// generator.
    pub fn subsample_sentence(&mut self, sentence: &Sentence) -> Sentence {
        let kept = subsample_tokens(&self.sketch, self.config.subsample_threshold, sentence.tokens(), &mut self.rng);
        Sentence::new(kept).expect("tokens of a valid sentence")
    }

    /// Processes one sentence: subsample, insert every retained token into
    /// the sketch (resetting ejected slots) and the reservoir, then train
    /// each full window whose words are all resident.
    pub fn train_sentence(&mut self, sentence: &Sentence) {
        self.stats.sentences += 1;
        self.stats.tokens += sentence.len() as u64;
        let kept = subsample_tokens(&self.sketch, self.config.subsample_threshold, sentence.tokens(), &mut self.rng);
        self.stats.retained_tokens += kept.len() as u64;

        for word in &kept {
            let outcome = self.sketch.observe(word).expect("tokens are non-empty");
            if let ObserveOutcome::Replaced { slot, .. } = outcome {
                self.stats.ejections += 1;
                self.table.redraw_row(slot, &mut self.rng);
                self.learning.reset(slot);
            }
            self.reservoir.observe(outcome.slot() as u32, &mut self.rng);
        }

        let c = self.config.context_radius;
        if kept.len() > 2 * c {
            // The sketch does not change while windows are trained.
            self.window_slots.clear();
            self.window_slots.extend(kept.iter().map(|w| self.sketch.slot_of(w)));
            for center in c..kept.len() - c {
                let r = effective_radius(&self.config, &mut self.rng);
                let span = center - r..=center + r;
                if self.window_slots[span.clone()].iter().any(Option::is_none) {
                    self.stats.contexts_skipped += 1;
                    continue;
                }
                self.stats.contexts_trained += 1;
                let input = self.window_slots[center].expect("checked resident");
                for pos in span {
                    if pos == center {
                        continue;
                    }
                    let output = self.window_slots[pos].expect("checked resident");
                    self.train_pair(input, output);
                }
            }
        }

        let before = self.stats.tokens - sentence.len() as u64;
        if let Some(crossed) = self.stats.tokens.checked_div(self.config.log_interval) {
            if before / self.config.log_interval != crossed {
                log::info!(
                    "tokens {} ejections {} min sketch count {}",
                    self.stats.tokens,
                    self.stats.ejections,
                    self.sketch.min_count()
                );
            }
        }
    }

    fn train_pair(&mut self, input: usize, output: usize) {
        self.step.input_slot = input;
        self.step.output_slot = output;
        self.step.negative_slots.clear();
        for _ in 0..self.config.negatives {
            let k = self.reservoir.draw(&mut self.rng).expect("reservoir holds this sentence's tokens");
            self.step.negative_slots.push(k as usize);
        }
        sgns::sgns_step_with(&mut self.table, &mut self.learning, &self.step, &mut self.acc, &mut self.touched)
            .expect("resident slots are in range");
        self.stats.pairs_trained += 1;
    }

    /// Trains on every sentence in order and returns the updated counters.
    /// Can be called repeatedly; training continues from the current state.
    pub fn train_stream<I, E>(&mut self, sentences: I) -> std::result::Result<TrainStats, E>
    where
        I: IntoIterator<Item = std::result::Result<Sentence, E>>,
    {
        for sentence in sentences {
            self.train_sentence(&sentence?);
        }
        Ok(self.stats)
    }

    /// Resident words in rank order with their target vectors.
    pub fn ranked_vectors(&self) -> Vec<(String, &[T])> {
        self.sketch
            .items()
            .into_iter()
            .map(|(w, _)| {
                let slot = self.sketch.slot_of(&w).expect("resident");
                (w, self.table.target(slot))
            })
            .collect()
    }
}
