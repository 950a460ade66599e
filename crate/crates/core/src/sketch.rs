//! Space-saving approximate top-K counter.
//!
//! The sketch holds at most `K` words. An unseen word arriving at a full
//! sketch takes over the slot with the smallest count (least recently
//! updated among ties) and inherits that count plus one, so every resident
//! count over-estimates the true count by at most `observed / K`, and every
//! word with true count above `observed / K` is resident.
//!
//! Slots are grouped into a doubly linked list of count buckets (the
//! "stream-summary" layout). Each bucket holds the slots sharing a count in
//! order of their last update, so both the increment and the eviction are
//! O(1).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

const NIL: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Bucket {
    count: u64,
    prev: usize,
    next: usize,
    head: usize,
    tail: usize,
}

/// Result of a single observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObserveOutcome {
    /// The word was already resident.
    Hit(usize),
    /// The word went into a previously empty slot.
    Filled(usize),
    /// The word took over the slot of `ejected`.
    Replaced { slot: usize, ejected: String },
}

impl ObserveOutcome {
    pub fn slot(&self) -> usize {
        match *self {
            ObserveOutcome::Hit(s) | ObserveOutcome::Filled(s) => s,
            ObserveOutcome::Replaced { slot, .. } => slot,
        }
    }

    pub fn ejected(&self) -> Option<&str> {
        match self {
            ObserveOutcome::Replaced { ejected, .. } => Some(ejected),
            _ => None,
        }
    }
}

/// Sizes of every internal structure, for memory-bound checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchFootprint {
    pub capacity: usize,
    pub occupied: usize,
    pub index_entries: usize,
    pub live_buckets: usize,
    pub bucket_arena: usize,
}

#[derive(Clone, Debug)]
pub struct SpaceSavingSketch {
    capacity: usize,
    /// Occupied slots form the prefix `0..items.len()`; slots are never freed.
    items: Vec<String>,
    counts: Vec<u64>,
    observed: u64,
    index: HashMap<String, usize>,
    slot_bucket: Vec<usize>,
    slot_prev: Vec<usize>,
    slot_next: Vec<usize>,
    buckets: Vec<Bucket>,
    free_buckets: Vec<usize>,
    /// Lowest-count bucket.
    min_bucket: usize,
}

impl SpaceSavingSketch {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        Ok(SpaceSavingSketch {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 20)),
            counts: vec![0; capacity],
            observed: 0,
            index: HashMap::new(),
            slot_bucket: vec![NIL; capacity],
            slot_prev: vec![NIL; capacity],
            slot_next: vec![NIL; capacity],
            buckets: Vec::new(),
            free_buckets: Vec::new(),
            min_bucket: NIL,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    /// Word stored in `slot`, if occupied.
    pub fn word(&self, slot: usize) -> Option<&str> {
        self.items.get(slot).map(String::as_str)
    }

    /// Count stored in `slot` (0 for empty slots).
    pub fn slot_count(&self, slot: usize) -> u64 {
        self.counts.get(slot).copied().unwrap_or(0)
    }

    pub fn observe(&mut self, word: &str) -> Result<ObserveOutcome> {
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        self.observed += 1;
        if let Some(&slot) = self.index.get(word) {
            self.increment(slot);
            return Ok(ObserveOutcome::Hit(slot));
        }
        if !self.is_full() {
            let slot = self.items.len();
            self.items.push(word.to_owned());
            self.index.insert(word.to_owned(), slot);
            self.counts[slot] = 1;
            let b = if self.min_bucket != NIL && self.buckets[self.min_bucket].count == 1 {
                self.min_bucket
            } else {
                self.new_bucket_front(1)
            };
            self.push_back(b, slot);
            return Ok(ObserveOutcome::Filled(slot));
        }
        let slot = self.buckets[self.min_bucket].head;
        let ejected = std::mem::replace(&mut self.items[slot], word.to_owned());
        self.index.remove(&ejected);
        self.index.insert(word.to_owned(), slot);
        self.increment(slot);
        Ok(ObserveOutcome::Replaced { slot, ejected })
    }

    pub fn slot_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.slot_of(word).map(|s| self.counts[s])
    }

    /// Smallest resident count, 0 when empty.
    pub fn min_count(&self) -> u64 {
        if self.min_bucket == NIL {
            0
        } else {
            self.buckets[self.min_bucket].count
        }
    }

    /// Resident words, descending by count then ascending by word.
    pub fn items(&self) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self
            .items
            .iter()
            .zip(&self.counts)
            .map(|(w, &c)| (w.clone(), c))
            .collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn footprint(&self) -> SketchFootprint {
        SketchFootprint {
            capacity: self.capacity,
            occupied: self.items.len(),
            index_entries: self.index.len(),
            live_buckets: self.buckets.len() - self.free_buckets.len(),
            bucket_arena: self.buckets.len(),
        }
    }

    /// Slots in eviction order: ascending count, least recently updated
    /// first within a count.
    pub fn eviction_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.items.len());
        let mut b = self.min_bucket;
        while b != NIL {
            let mut s = self.buckets[b].head;
            while s != NIL {
                out.push(s);
                s = self.slot_next[s];
            }
            b = self.buckets[b].next;
        }
        out
    }

    fn alloc_bucket(&mut self, count: u64) -> usize {
        let bucket = Bucket { count, prev: NIL, next: NIL, head: NIL, tail: NIL };
        match self.free_buckets.pop() {
            Some(i) => {
                self.buckets[i] = bucket;
                i
            }
            None => {
                self.buckets.push(bucket);
                self.buckets.len() - 1
            }
        }
    }

    fn new_bucket_front(&mut self, count: u64) -> usize {
        let b = self.alloc_bucket(count);
        let old = self.min_bucket;
        self.buckets[b].next = old;
        if old != NIL {
            self.buckets[old].prev = b;
        }
        self.min_bucket = b;
        b
    }

    fn new_bucket_after(&mut self, after: usize, count: u64) -> usize {
        let b = self.alloc_bucket(count);
        let next = self.buckets[after].next;
        self.buckets[b].prev = after;
        self.buckets[b].next = next;
        self.buckets[after].next = b;
        if next != NIL {
            self.buckets[next].prev = b;
        }
        b
    }

    fn push_back(&mut self, b: usize, slot: usize) {
        let tail = self.buckets[b].tail;
        self.slot_prev[slot] = tail;
        self.slot_next[slot] = NIL;
        if tail == NIL {
            self.buckets[b].head = slot;
        } else {
            self.slot_next[tail] = slot;
        }
        self.buckets[b].tail = slot;
        self.slot_bucket[slot] = b;
    }

    /// Detaches `slot` from its bucket, releasing the bucket if emptied.
    fn unlink(&mut self, slot: usize) {
        let b = self.slot_bucket[slot];
        let (prev, next) = (self.slot_prev[slot], self.slot_next[slot]);
        if prev == NIL {
            self.buckets[b].head = next;
        } else {
            self.slot_next[prev] = next;
        }
        if next == NIL {
            self.buckets[b].tail = prev;
        } else {
            self.slot_prev[next] = prev;
        }
        self.slot_prev[slot] = NIL;
        self.slot_next[slot] = NIL;
        self.slot_bucket[slot] = NIL;
        if self.buckets[b].head == NIL {
            let (bp, bn) = (self.buckets[b].prev, self.buckets[b].next);
            if bp == NIL {
                self.min_bucket = bn;
            } else {
                self.buckets[bp].next = bn;
            }
            if bn != NIL {
                self.buckets[bn].prev = bp;
            }
            self.free_buckets.push(b);
        }
    }

    fn increment(&mut self, slot: usize) {
        let b = self.slot_bucket[slot];
        let count = self.counts[slot] + 1;
        let next = self.buckets[b].next;
        let target = if next != NIL && self.buckets[next].count == count {
            next
        } else {
            self.new_bucket_after(b, count)
        };
        self.unlink(slot);
        self.push_back(target, slot);
        self.counts[slot] = count;
    }

    /// Writes the sketch as TSV: a header line `capacity\t<K>\tobserved\t<n>`
    /// followed by `slot\tword\tcount` rows in eviction order. Reading the
    /// rows back in that order restores the exact internal state.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "capacity\t{}\tobserved\t{}", self.capacity, self.observed)?;
        for slot in self.eviction_order() {
            writeln!(out, "{}\t{}\t{}", slot, self.items[slot], self.counts[slot])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines.next().ok_or_else(|| Error::corrupt("missing sketch header"))??;
        let fields: Vec<&str> = header.split('\t').collect();
        let (capacity, observed) = match fields.as_slice() {
            ["capacity", k, "observed", n] => (
                k.parse::<usize>().map_err(|_| Error::corrupt("bad sketch capacity"))?,
                n.parse::<u64>().map_err(|_| Error::corrupt("bad sketch observed count"))?,
            ),
            _ => return Err(Error::corrupt("malformed sketch header")),
        };
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            let mut parts = line.split('\t');
            let (Some(slot), Some(word), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::corrupt(format!("malformed sketch row: {line:?}")));
            };
            let slot = slot.parse::<usize>().map_err(|_| Error::corrupt("bad slot index"))?;
            let count = count.parse::<u64>().map_err(|_| Error::corrupt("bad slot count"))?;
            rows.push((slot, word.to_owned(), count));
        }
        Self::from_rows(capacity, observed, rows)
    }

    /// Rebuilds a sketch from `(slot, word, count)` rows in eviction order.
    pub fn from_rows(capacity: usize, observed: u64, rows: Vec<(usize, String, u64)>) -> Result<Self> {
        let mut sketch = SpaceSavingSketch::new(capacity)?;
        if rows.len() > capacity {
            return Err(Error::corrupt("more sketch rows than slots"));
        }
        let m = rows.len();
        let mut words: Vec<Option<String>> = vec![None; m];
        let mut total = 0u64;
        let mut last = 0u64;
        for (slot, word, count) in &rows {
            if *slot >= m || words[*slot].is_some() {
                return Err(Error::corrupt("sketch slots must be a permutation of the occupied prefix"));
            }
            if word.is_empty() || *count == 0 || *count < last {
                return Err(Error::corrupt("sketch rows out of order or with empty words"));
            }
            last = *count;
            total = total
                .checked_add(*count)
                .ok_or_else(|| Error::corrupt("sketch count overflow"))?;
            words[*slot] = Some(word.clone());
        }
        if total != observed {
            return Err(Error::corrupt("sketch counts do not sum to observed"));
        }
        sketch.items = words.into_iter().map(|w| w.expect("checked above")).collect();
        for (slot, word) in sketch.items.iter().enumerate() {
            if sketch.index.insert(word.clone(), slot).is_some() {
                return Err(Error::corrupt(format!("duplicate sketch word {word:?}")));
            }
        }
        let mut current = NIL;
        for (slot, _, count) in rows {
            if current == NIL || sketch.buckets[current].count != count {
                current = if current == NIL {
                    sketch.new_bucket_front(count)
                } else {
                    sketch.new_bucket_after(current, count)
                };
            }
            sketch.counts[slot] = count;
            sketch.push_back(current, slot);
        }
        sketch.observed = observed;
        Ok(sketch)
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        let m = self.items.len();
        assert!(m <= self.capacity);
        assert_eq!(self.index.len(), m);
        for (slot, w) in self.items.iter().enumerate() {
            assert_eq!(self.index[w], slot);
            assert!(self.counts[slot] >= 1);
        }
        for slot in m..self.capacity {
            assert_eq!(self.counts[slot], 0);
        }
        assert_eq!(self.counts.iter().sum::<u64>(), self.observed);
        let order = self.eviction_order();
        assert_eq!(order.len(), m);
        for pair in order.windows(2) {
            assert!(self.counts[pair[0]] <= self.counts[pair[1]]);
        }
        for &s in &order {
            assert_eq!(self.buckets[self.slot_bucket[s]].count, self.counts[s]);
        }
    }
}

impl PartialEq for SpaceSavingSketch {
    /// Equal capacity, observations, slot contents and eviction order.
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity
            && self.observed == other.observed
            && self.items == other.items
            && self.counts == other.counts
            && self.eviction_order() == other.eviction_order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(k: usize, stream: &[&str]) -> (SpaceSavingSketch, Vec<ObserveOutcome>) {
        let mut s = SpaceSavingSketch::new(k).unwrap();
        let outs = stream.iter().map(|w| s.observe(w).unwrap()).collect();
        s.check_invariants();
        (s, outs)
    }

    #[test]
    fn construction() {
        let s = SpaceSavingSketch::new(3).unwrap();
        assert_eq!((s.capacity(), s.len(), s.observed(), s.min_count()), (3, 0, 0, 0));
        assert!(SpaceSavingSketch::new(1).is_ok());
        assert!(matches!(SpaceSavingSketch::new(0), Err(Error::ZeroCapacity)));
    }

    #[test]
    fn three_case_update() {
        // a,b,a,c with K=2: c evicts b (count 1) and ends with count 2.
        let (s, outs) = feed(2, &["a", "b", "a", "c"]);
        assert_eq!(outs[0], ObserveOutcome::Filled(0));
        assert_eq!(outs[1], ObserveOutcome::Filled(1));
        assert_eq!(outs[2], ObserveOutcome::Hit(0));
        assert_eq!(outs[3], ObserveOutcome::Replaced { slot: 1, ejected: "b".into() });
        assert_eq!(s.items(), vec![("a".into(), 2), ("c".into(), 2)]);
        assert_eq!(s.count("c"), Some(2));
        assert_eq!(s.slot_of("b"), None);
        assert!(s.slot_of("a").is_some());
        assert_eq!(s.count("zzz"), None);
    }

    #[test]
    fn empty_word_rejected() {
        let mut s = SpaceSavingSketch::new(2).unwrap();
        assert!(matches!(s.observe(""), Err(Error::EmptyWord)));
        assert_eq!(s.observed(), 0);
    }

    #[test]
    fn min_count_cases() {
        let (s, _) = feed(2, &["a", "a", "a", "a", "a", "b", "b"]);
        assert_eq!(s.min_count(), 2);
        let (s, _) = feed(3, &["x", "y", "z"]);
        assert_eq!(s.min_count(), 1);
        let (s, _) = feed(1, &["x"; 7]);
        assert_eq!(s.items(), vec![("x".into(), 7)]);
    }

    #[test]
    fn eviction_prefers_least_recently_updated_minimum() {
        // After a,b,c all have count 1; touching a moves it to count 2.
        // The minimum bucket holds b then c, so d evicts b, then e evicts c.
        let (mut s, _) = feed(3, &["a", "b", "c", "a"]);
        assert_eq!(s.observe("d").unwrap().ejected(), Some("b"));
        // d now has count 2 and was updated after a; c is the lone minimum.
        assert_eq!(s.observe("e").unwrap().ejected(), Some("c"));
        // counts: a=2, d=2, e=2; a was updated earliest.
        assert_eq!(s.observe("f").unwrap().ejected(), Some("a"));
        s.check_invariants();
    }

    #[test]
    fn exact_when_capacity_suffices() {
        let stream = ["p", "q", "p", "r", "q", "p"];
        let (s, outs) = feed(3, &stream);
        assert!(outs.iter().all(|o| o.ejected().is_none()));
        assert_eq!(s.count("p"), Some(3));
        assert_eq!(s.count("q"), Some(2));
        assert_eq!(s.count("r"), Some(1));
    }

    #[test]
    fn tsv_round_trip_preserves_eviction_order() {
        let (s, _) = feed(3, &["a", "b", "c", "a", "d", "b", "e"]);
        let mut buf = Vec::new();
        s.write_tsv(&mut buf).unwrap();
        let back = SpaceSavingSketch::read_tsv(&buf[..]).unwrap();
        back.check_invariants();
        assert_eq!(back, s);
        let mut again = Vec::new();
        back.write_tsv(&mut again).unwrap();
        assert_eq!(buf, again);

        // Continued streams agree.
        let (mut x, mut y) = (s.clone(), back);
        for w in ["f", "g", "a", "h", "c"] {
            assert_eq!(x.observe(w).unwrap(), y.observe(w).unwrap());
        }
    }

    #[test]
    fn tsv_rejects_corruption() {
        assert!(SpaceSavingSketch::read_tsv(&b""[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t2\tobserved\t3\n0\ta\t2\n"[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t2\tobserved\t3\n0\ta\t2\n0\tb\t1\n"[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t2\tobserved\t3\n0\ta\t2\n1\tb\t1\n"[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t2\tobserved\t2\n0\ta\t1\n1\ta\t1\n"[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t1\tobserved\t2\n0\ta\t1\n1\tb\t1\n"[..]).is_err());
        assert!(SpaceSavingSketch::read_tsv(&b"capacity\t2\tobserved\t2\n1\ta\t1\n0\tb\t1\n"[..]).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::collections::HashMap;

        proptest! {
            #[test]
            fn guarantees_hold_on_every_prefix(k in 1usize..8, stream in prop::collection::vec(0u8..12, 0..200)) {
                let mut s = SpaceSavingSketch::new(k).unwrap();
                let mut truth: HashMap<String, u64> = HashMap::new();
                for (i, x) in stream.iter().enumerate() {
                    let w = format!("w{x}");
                    let before: Vec<u64> = (0..k).map(|slot| s.slot_count(slot)).collect();
                    s.observe(&w).unwrap();
                    *truth.entry(w).or_default() += 1;
                    let n = (i + 1) as u64;
                    // exactly one count rose by exactly one
                    let diffs: Vec<i64> = (0..k).map(|slot| s.slot_count(slot) as i64 - before[slot] as i64).collect();
                    prop_assert_eq!(diffs.iter().filter(|&&d| d == 1).count(), 1);
                    prop_assert!(diffs.iter().all(|&d| d == 0 || d == 1));
                    for (word, &t) in &truth {
                        match s.count(word) {
                            Some(c) => prop_assert!(c >= t && (c - t) * k as u64 <= n),
                            None => prop_assert!(t * k as u64 <= n),
                        }
                    }
                }
                s.check_invariants();
                if truth.len() <= k {
                    for (word, &t) in &truth {
                        prop_assert_eq!(s.count(word), Some(t));
                    }
                }
            }
        }
    }
}
