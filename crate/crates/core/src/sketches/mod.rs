//! Static streaming estimators and the hashing they rely on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::stream::{Query, StreamUpdate};

pub mod ams;
pub mod hash;
pub mod kmv;

pub use ams::AmsSketch;
pub use hash::{FourWiseHash, PairwiseHash};
pub use kmv::KmvSketch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {outputs} outputs vs {truths} truths")]
    LengthMismatch { outputs: usize, truths: usize },
    #[error("bad snapshot: {0}")]
    Snapshot(String),
}

/// A streaming estimator of some query `g(f)`.
pub trait StreamEstimator {
    fn update(&mut self, u: StreamUpdate);
    fn estimate(&self) -> f64;
}

impl<E: StreamEstimator + ?Sized> StreamEstimator for Box<E> {
    fn update(&mut self, u: StreamUpdate) {
        (**self).update(u)
    }

    fn estimate(&self) -> f64 {
        (**self).estimate()
    }
}

/// Zero-error estimator: keeps the exact frequency vector and the running
/// query value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTracker {
    query: Query,
    counts: BTreeMap<u64, i64>,
    value: f64,
}

impl ExactTracker {
    pub fn new(query: Query) -> Self {
        Self { query, counts: BTreeMap::new(), value: 0.0 }
    }

    pub fn query(&self) -> Query {
        self.query
    }

    pub fn count(&self, index: u64) -> i64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }
}

impl StreamEstimator for ExactTracker {
    fn update(&mut self, u: StreamUpdate) {
        if u.delta == 0 {
            return;
        }
        let slot = self.counts.entry(u.index).or_insert(0);
        let before = *slot;
        *slot += u.delta;
        let after = *slot;
        self.value += self.query.term(after) - self.query.term(before);
        if after == 0 {
            self.counts.remove(&u.index);
        }
        if self.value.abs() < 1e-9 && self.counts.is_empty() {
            self.value = 0.0;
        }
    }

    fn estimate(&self) -> f64 {
        self.value
    }
}

/// True iff `|outputs[t] - truths[t]| ≤ eps·|truths[t]|` for every `t`.
pub fn strong_tracking_check(outputs: &[f64], truths: &[f64], eps: f64) -> Result<bool, SketchError> {
    if outputs.len() != truths.len() {
        return Err(SketchError::LengthMismatch { outputs: outputs.len(), truths: truths.len() });
    }
    Ok(outputs.iter().zip(truths).all(|(o, t)| (o - t).abs() <= eps * t.abs()))
}

pub(crate) const SNAPSHOT_MAGIC: &[u8; 4] = b"ADVS";
pub(crate) const SNAPSHOT_VERSION: u8 = 1;
pub(crate) const KIND_AMS: u8 = 1;
pub(crate) const KIND_KMV: u8 = 2;

/// Little-endian reader over a snapshot body.
pub(crate) struct SnapshotReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> SnapshotReader<'a> {
    pub(crate) fn open(bytes: &'a [u8], kind: u8) -> Result<Self, SketchError> {
        if bytes.len() < 6 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(SketchError::Snapshot("missing magic".into()));
        }
        if bytes[4] != SNAPSHOT_VERSION {
            return Err(SketchError::Snapshot(format!("unsupported version {}", bytes[4])));
        }
        if bytes[5] != kind {
            return Err(SketchError::Snapshot(format!("sketch kind {} where {kind} expected", bytes[5])));
        }
        Ok(Self { bytes, pos: 6 })
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], SketchError> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| SketchError::Snapshot("truncated".into()))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, SketchError> {
        Ok(self.take::<1>()?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, SketchError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, SketchError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub(crate) fn i64(&mut self) -> Result<i64, SketchError> {
        Ok(i64::from_le_bytes(self.take()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, SketchError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    pub(crate) fn finish(self) -> Result<(), SketchError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(SketchError::Snapshot(format!("{} trailing bytes", self.bytes.len() - self.pos)))
        }
    }
}
