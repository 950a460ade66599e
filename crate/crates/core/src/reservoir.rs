//! Uniform fixed-size sample of a stream (Algorithm R).
//!
//! The streaming trainer stores sketch slot indices here and draws negative
//! samples from it, which makes the negative distribution the unsmoothed
//! empirical distribution over slots.

use rand::Rng;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reservoir {
    capacity: usize,
    values: Vec<u32>,
    seen: u64,
}

impl Reservoir {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        Ok(Reservoir {
            capacity,
            values: Vec::new(),
            seen: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Feeds one stream item. Returns whether the stored sample changed.
    pub fn observe<R: Rng + ?Sized>(&mut self, value: u32, rng: &mut R) -> bool {
        self.seen += 1;
        if self.values.len() < self.capacity {
            self.values.push(value);
            return true;
        }
        let k = rng.random_range(0..self.seen);
        if k < self.capacity as u64 {
            self.values[k as usize] = value;
            true
        } else {
            false
        }
    }

    /// Uniform draw over stored entries, with multiplicity.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u32> {
        if self.values.is_empty() {
            return Err(Error::EmptyReservoir);
        }
        Ok(self.values[rng.random_range(0..self.values.len())])
    }

    /// Binary layout: capacity (u64), seen (u64), then the stored values
    /// as a length-prefixed u32 array, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::default();
        self.encode(&mut enc);
        enc.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        let r = Self::decode(&mut dec)?;
        if !dec.is_empty() {
            return Err(Error::corrupt("trailing bytes after reservoir"));
        }
        Ok(r)
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.capacity as u64);
        enc.u64(self.seen);
        enc.u32s(&self.values);
    }

    pub(crate) fn decode(dec: &mut Decoder<'_>) -> Result<Self> {
        let capacity = dec.usize()?;
        let seen = dec.u64()?;
        let values = dec.u32s()?;
        if capacity == 0 {
            return Err(Error::corrupt("reservoir capacity is zero"));
        }
        if values.len() as u64 != seen.min(capacity as u64) {
            return Err(Error::corrupt("reservoir length disagrees with capacity and seen"));
        }
        Ok(Reservoir { capacity, values, seen })
    }
}
