//! k-minimum-values distinct-elements sketch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::hash::{PairwiseHash, MERSENNE_31};
use super::{SketchError, StreamEstimator};
use crate::stream::StreamUpdate;

/// Keeps the `k` smallest distinct hash values seen. Exact while fewer than
/// `k + 1` distinct hashes have arrived; afterwards estimates `(k - 1) / u_k`
/// where `u_k = (h_k + 1) / P` is the k-th smallest normalised hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmvSketch {
    k: usize,
    seed: u64,
    hash: PairwiseHash,
    mins: BTreeSet<u64>,
    overflowed: bool,
}

impl KmvSketch {
    pub fn new(k: usize, seed: u64) -> Result<Self, SketchError> {
        if k < 2 {
            return Err(SketchError::InvalidParameter(format!("k = {k} must be at least 2")));
        }
        Ok(Self { k, seed, hash: PairwiseHash::from_seed(seed), mins: BTreeSet::new(), overflowed: false })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash_fn(&self) -> &PairwiseHash {
        &self.hash
    }

    pub fn min_hashes(&self) -> impl Iterator<Item = u64> + '_ {
        self.mins.iter().copied()
    }

    pub fn insert(&mut self, index: u64) {
        let h = self.hash.eval(index);
        if self.mins.contains(&h) {
            return;
        }
        if self.mins.len() < self.k {
            self.mins.insert(h);
            return;
        }
        self.overflowed = true;
        let largest = *self.mins.last().expect("full sketch is nonempty");
        if h < largest {
            self.mins.pop_last();
            self.mins.insert(h);
        }
    }

    pub fn estimate(&self) -> f64 {
        if !self.overflowed {
            return self.mins.len() as f64;
        }
        let kth = *self.mins.last().expect("overflowed sketch is full");
        kmv_estimate_from_kth(self.k, kth)
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.mins.len());
        out.extend_from_slice(super::SNAPSHOT_MAGIC);
        out.push(super::SNAPSHOT_VERSION);
        out.push(super::KIND_KMV);
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.overflowed as u8);
        out.extend_from_slice(&(self.mins.len() as u32).to_le_bytes());
        for h in &self.mins {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut r = super::SnapshotReader::open(bytes, super::KIND_KMV)?;
        let k = r.u32()? as usize;
        let seed = r.u64()?;
        let overflowed = r.u8()? != 0;
        let len = r.u32()? as usize;
        let mut sk = Self::new(k, seed)?;
        for _ in 0..len {
            sk.mins.insert(r.u64()?);
        }
        r.finish()?;
        if sk.mins.len() > k {
            return Err(SketchError::Snapshot(format!("{} hashes exceed k = {k}", sk.mins.len())));
        }
        sk.overflowed = overflowed;
        Ok(sk)
    }
}

/// The published estimate as a function of the k-th smallest raw hash.
pub fn kmv_estimate_from_kth(k: usize, kth: u64) -> f64 {
    (k - 1) as f64 * MERSENNE_31 as f64 / (kth + 1) as f64
}

impl StreamEstimator for KmvSketch {
    /// Positive deltas insert the index; others are ignored (insertion-only).
    fn update(&mut self, u: StreamUpdate) {
        if u.delta > 0 {
            self.insert(u.index);
        }
    }

    fn estimate(&self) -> f64 {
        KmvSketch::estimate(self)
    }
}
