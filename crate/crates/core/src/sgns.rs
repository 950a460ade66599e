//! Skip-gram negative-sampling kernel: embedding storage, learning-rate
//! schedules and the per-pair gradient step.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm, Scalar};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-major `rows × dim` target and context matrices indexed by slot.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<T> {
    rows: usize,
    dim: usize,
    target: Vec<T>,
    context: Vec<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// Every entry of both matrices drawn from N(0, 1).
    pub fn random<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::Config("embedding table needs at least one row and one dimension".into()));
        }
        let n = rows * dim;
        let target = (0..n).map(|_| T::standard_normal(rng)).collect();
        let context = (0..n).map(|_| T::standard_normal(rng)).collect();
        Ok(EmbeddingTable { rows, dim, target, context })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            rows,
            dim,
            target: vec![T::zero(); rows * dim],
            context: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_parts(rows: usize, dim: usize, target: Vec<T>, context: Vec<T>) -> Result<Self> {
        let n = rows
            .checked_mul(dim)
            .ok_or_else(|| Error::corrupt("embedding shape overflow"))?;
        if dim == 0 || target.len() != n || context.len() != n {
            return Err(Error::corrupt("embedding matrices do not match their shape"));
        }
        Ok(EmbeddingTable { rows, dim, target, context })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target(&self, slot: usize) -> &[T] {
        &self.target[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn context(&self, slot: usize) -> &[T] {
        &self.context[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn target_mut(&mut self, slot: usize) -> &mut [T] {
        &mut self.target[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn context_mut(&mut self, slot: usize) -> &mut [T] {
        &mut self.context[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn target_data(&self) -> &[T] {
        &self.target
    }

    pub fn context_data(&self) -> &[T] {
        &self.context
    }

    pub fn is_finite(&self) -> bool {
        self.target.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Redraws both rows of `slot` from N(0, 1), target first.
    pub fn redraw_row<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R) {
        for x in self.target_mut(slot) {
            *x = T::standard_normal(rng);
        }
        for x in self.context_mut(slot) {
            *x = T::standard_normal(rng);
        }
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot < self.rows {
            Ok(())
        } else {
            Err(Error::SlotOutOfRange { slot, rows: self.rows })
        }
    }

    /// One positive pair plus its negatives, with caller-supplied rates.
    ///
    /// Each context row is read into the input-row accumulator before it is
    /// itself updated; the input row moves once, at the end. `negatives` may
    /// repeat or coincide with `input`/`output`. Slots are not range-checked.
    pub fn apply_pair_update(
        &mut self,
        input: usize,
        output: usize,
        negatives: &[usize],
        input_rate: f64,
        rate_of: impl Fn(usize) -> f64,
        acc: &mut Vec<T>,
    ) {
        let d = self.dim;
        acc.clear();
        acc.resize(d, T::zero());
        let v_in = &self.target[input * d..(input + 1) * d];
        let pairs = std::iter::once((output, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (slot, label) in pairs {
            let ctx = &mut self.context[slot * d..(slot + 1) * d];
            let g = label - sigmoid(dot(v_in, ctx));
            axpy(input_rate * g, ctx, acc);
            axpy(rate_of(slot) * g, v_in, ctx);
        }
        axpy(1.0, acc, &mut self.target[input * d..(input + 1) * d]);
    }
}

/// Random N(0, 1) table of shape `rows × dim`.
pub fn init_table<T: Scalar, R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Result<EmbeddingTable<T>> {
    EmbeddingTable::random(rows, dim, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Linear decay from `rho0` over `horizon` steps, floored at `rho_min`.
    Linear,
    /// `rho0 * (tau / (tau + t - 1))^kappa`, floored at `rho_min`.
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningSchedule {
    pub kind: ScheduleKind,
    pub rho0: f64,
    pub rho_min: f64,
    pub horizon: u64,
    pub tau: f64,
    pub kappa: f64,
}

impl Default for LearningSchedule {
    fn default() -> Self {
        LearningSchedule {
            kind: ScheduleKind::Linear,
            rho0: 2.5e-2,
            rho_min: 2.5e-6,
            horizon: 1_000_000,
            tau: 1.0e4,
            kappa: 0.5,
        }
    }
}

impl LearningSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho0.is_finite()
            && self.rho_min.is_finite()
            && self.rho_min >= 0.0
            && self.rho_min <= self.rho0
            && self.horizon >= 1
            && self.tau > 0.0
            && self.tau.is_finite()
            && self.kappa >= 0.0
            && self.kappa.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid learning-rate schedule {self:?}")))
        }
    }

    /// Rate after `t - 1` previous steps (`t >= 1`).
    pub fn rate(&self, t: u64) -> f64 {
        let elapsed = t.saturating_sub(1) as f64;
        let r = match self.kind {
            ScheduleKind::Linear => self.rho0 * (1.0 - elapsed / self.horizon as f64),
            ScheduleKind::Polynomial => self.rho0 * (self.tau / (self.tau + elapsed)).powf(self.kappa),
        };
        r.max(self.rho_min).min(self.rho0)
    }
}

/// Per-slot step counters `t_k` and the shared schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotLearningState {
    steps: Vec<u64>,
    schedule: LearningSchedule,
}

impl SlotLearningState {
    pub fn new(slots: usize, schedule: LearningSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(SlotLearningState { steps: vec![1; slots], schedule })
    }

    pub fn from_parts(steps: Vec<u64>, schedule: LearningSchedule) -> Result<Self> {
        schedule.validate()?;
        if steps.contains(&0) {
            return Err(Error::corrupt("step counters must be at least 1"));
        }
        Ok(SlotLearningState { steps, schedule })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn schedule(&self) -> &LearningSchedule {
        &self.schedule
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn step(&self, slot: usize) -> u64 {
        self.steps[slot]
    }

    pub fn learning_rate(&self, slot: usize) -> f64 {
        self.schedule.rate(self.steps[slot])
    }

    pub fn advance(&mut self, slot: usize) {
        self.steps[slot] += 1;
    }

    pub fn reset(&mut self, slot: usize) {
        self.steps[slot] = 1;
    }
}

/// Redraws a slot's embeddings and restarts its learning rate.
pub fn reset_slot<T: Scalar, R: Rng + ?Sized>(
    table: &mut EmbeddingTable<T>,
    state: &mut SlotLearningState,
    slot: usize,
    rng: &mut R,
) -> Result<()> {
    table.check_slot(slot)?;
    if slot >= state.len() {
        return Err(Error::SlotOutOfRange { slot, rows: state.len() });
    }
    table.redraw_row(slot, rng);
    state.reset(slot);
    Ok(())
}

/// One (input, output) pair together with its negative samples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GradientStepSpec {
    pub input_slot: usize,
    pub output_slot: usize,
    pub negative_slots: Vec<usize>,
}

/// Gradient ascent on one pair's objective with per-slot learning rates,
/// then one step-counter increment for every distinct slot involved.
pub fn sgns_step<T: Scalar>(
    table: &mut EmbeddingTable<T>,
    state: &mut SlotLearningState,
    spec: &GradientStepSpec,
) -> Result<()> {
    let mut acc = Vec::with_capacity(table.dim());
    let mut touched = Vec::with_capacity(spec.negative_slots.len() + 2);
    sgns_step_with(table, state, spec, &mut acc, &mut touched)
}

pub(crate) fn sgns_step_with<T: Scalar>(
    table: &mut EmbeddingTable<T>,
    state: &mut SlotLearningState,
    spec: &GradientStepSpec,
    acc: &mut Vec<T>,
    touched: &mut Vec<usize>,
) -> Result<()> {
    let rows = table.rows().min(state.len());
    for &slot in [spec.input_slot, spec.output_slot].iter().chain(&spec.negative_slots) {
        if slot >= rows {
            return Err(Error::SlotOutOfRange { slot, rows });
        }
    }
    let input_rate = state.learning_rate(spec.input_slot);
    table.apply_pair_update(
        spec.input_slot,
        spec.output_slot,
        &spec.negative_slots,
        input_rate,
        |slot| state.learning_rate(slot),
        acc,
    );
    touched.clear();
    touched.push(spec.input_slot);
    touched.push(spec.output_slot);
    touched.extend_from_slice(&spec.negative_slots);
    touched.sort_unstable();
    touched.dedup();
    for &slot in touched.iter() {
        state.advance(slot);
    }
    Ok(())
}

/// Cosine similarity, or `None` when either vector has zero norm.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<Option<f64>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Ok(None);
    }
    Ok(Some((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(rows: usize, rho: f64) -> SlotLearningState {
        SlotLearningState::new(
            rows,
            LearningSchedule { rho0: rho, rho_min: rho, ..LearningSchedule::default() },
        )
        .unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-1), evaluated independently to 20 digits.
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        for x in [0.3, 2.0, 17.5, 700.0, 745.0, 1e4] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
            assert!(sigmoid(x).is_finite() && sigmoid(-x).is_finite());
        }
        assert!(sigmoid(-1.0) < sigmoid(-0.5));
    }

    #[test]
    fn init_shapes_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t: EmbeddingTable<f64> = init_table(1000, 500, &mut rng).unwrap();
        assert_eq!((t.rows(), t.dim()), (1000, 500));
        assert_eq!(t.target_data().len(), 500_000);
        assert_eq!(t.context_data().len(), 500_000);
        let all: Vec<f64> = t.target_data().iter().chain(t.context_data()).copied().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        assert!(init_table::<f32, _>(0, 3, &mut rng).is_err());
    }

    #[test]
    fn linear_schedule() {
        let s = LearningSchedule { rho0: 2.5e-2, rho_min: 2.5e-6, horizon: 10_000, ..Default::default() };
        assert_eq!(s.rate(1), 2.5e-2);
        assert!((s.rate(5001) - 1.25e-2).abs() < 1e-15);
        assert_eq!(s.rate(10_001), 2.5e-6);
        assert_eq!(s.rate(1_000_000), 2.5e-6);
    }

    #[test]
    fn polynomial_schedule() {
        let s = LearningSchedule {
            kind: ScheduleKind::Polynomial,
            rho0: 0.1,
            rho_min: 1e-4,
            tau: 100.0,
            kappa: 1.0,
            ..Default::default()
        };
        assert_eq!(s.rate(1), 0.1);
        assert!((s.rate(101) - 0.05).abs() < 1e-15);
        assert_eq!(s.rate(u64::MAX), 1e-4);
    }

    #[test]
    fn reset_restores_rate_and_leaves_others() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut table: EmbeddingTable<f32> = init_table(4, 3, &mut rng).unwrap();
        let mut st = SlotLearningState::new(4, LearningSchedule { horizon: 10, ..Default::default() }).unwrap();
        for _ in 0..5 {
            st.advance(2);
            st.advance(1);
        }
        let before = table.clone();
        reset_slot(&mut table, &mut st, 2, &mut rng).unwrap();
        assert_eq!(st.step(2), 1);
        assert_eq!(st.learning_rate(2), st.schedule().rho0);
        assert_eq!(st.step(1), 6);
        for slot in [0, 1, 3] {
            assert_eq!(table.target(slot), before.target(slot));
            assert_eq!(table.context(slot), before.context(slot));
        }
        assert_ne!(table.target(2), before.target(2));

        let mut a = before.clone();
        let mut b = before.clone();
        let mut sa = st.clone();
        let mut sb = st.clone();
        reset_slot(&mut a, &mut sa, 0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        reset_slot(&mut b, &mut sb, 0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(reset_slot(&mut a, &mut sa, 4, &mut rng).is_err());
    }

    #[test]
    fn zero_rows_are_a_fixed_point() {
        let mut table = EmbeddingTable::<f32>::zeros(5, 4);
        let mut st = state(5, 0.1);
        let spec = GradientStepSpec { input_slot: 0, output_slot: 1, negative_slots: vec![2, 3, 3] };
        sgns_step(&mut table, &mut st, &spec).unwrap();
        assert!(table.target_data().iter().chain(table.context_data()).all(|&x| x == 0.0));
        assert_eq!(st.steps(), &[2, 2, 2, 2, 1]);
    }

    #[test]
    fn one_dimensional_hand_computation() {
        let mut table = EmbeddingTable::<f64>::from_parts(2, 1, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let mut st = state(2, 0.1);
        let spec = GradientStepSpec { input_slot: 0, output_slot: 1, negative_slots: vec![] };
        sgns_step(&mut table, &mut st, &spec).unwrap();
        // alpha = 1 - sigma(1) = 0.2689414213699951
        let expected = 1.0 + 0.1 * 0.268_941_421_369_995_1;
        assert!((table.context(1)[0] - expected).abs() < 1e-12);
        assert!((table.target(0)[0] - expected).abs() < 1e-12);
        assert!((expected - 1.026_894_14).abs() < 1e-8);
    }

    #[test]
    fn out_of_range_slot() {
        let mut table = EmbeddingTable::<f32>::zeros(3, 2);
        let mut st = state(3, 0.1);
        let spec = GradientStepSpec { input_slot: 0, output_slot: 1, negative_slots: vec![3] };
        assert!(matches!(sgns_step(&mut table, &mut st, &spec), Err(Error::SlotOutOfRange { slot: 3, .. })));
        assert_eq!(st.steps(), &[1, 1, 1]);
    }

    #[test]
    fn step_touches_only_named_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut table: EmbeddingTable<f32> = init_table(6, 5, &mut rng).unwrap();
        let before = table.clone();
        let mut st = state(6, 0.05);
        let spec = GradientStepSpec { input_slot: 1, output_slot: 4, negative_slots: vec![2] };
        sgns_step(&mut table, &mut st, &spec).unwrap();
        for slot in 0..6 {
            if slot != 1 {
                assert_eq!(table.target(slot), before.target(slot));
            }
            if ![4, 2].contains(&slot) {
                assert_eq!(table.context(slot), before.context(slot));
            }
        }
        assert!(table.is_finite());
    }

    #[test]
    fn cosine_cases() {
        let v = [1.0f32, -2.0, 0.5];
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &v).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &neg).unwrap().unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 3.0]).unwrap(), Some(0.0));
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 3.0]).unwrap(), None);
        assert!(cosine(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rate_is_monotone_and_bounded(rho0 in 1e-4f64..1.0, frac in 0.0f64..1.0, horizon in 1u64..10_000,
                                            tau in 1.0f64..1e4, kappa in 0.0f64..2.0, poly: bool,
                                            t in 1u64..100_000) {
                let s = LearningSchedule {
                    kind: if poly { ScheduleKind::Polynomial } else { ScheduleKind::Linear },
                    rho0, rho_min: rho0 * frac, horizon, tau, kappa,
                };
                let (a, b) = (s.rate(t), s.rate(t + 1));
                prop_assert!(b <= a);
                prop_assert!(a <= rho0 && a >= s.rho_min);
            }

            #[test]
            fn step_keeps_rows_finite(vals in prop::collection::vec(-50.0f32..50.0, 24), neg in prop::collection::vec(0usize..4, 0..6)) {
                let mut table = EmbeddingTable::from_parts(4, 3, vals[..12].to_vec(), vals[12..].to_vec()).unwrap();
                let mut st = state(4, 0.5);
                let spec = GradientStepSpec { input_slot: 0, output_slot: 1, negative_slots: neg };
                sgns_step(&mut table, &mut st, &spec).unwrap();
                prop_assert!(table.is_finite());
            }
        }
    }
}
