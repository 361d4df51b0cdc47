//! AMS second-moment sketch.
//!
//! A `rows × cols` grid of counters. Cell `(i, j)` holds `⟨f, s_ij⟩` for an
//! independent four-wise ±1 vector `s_ij`, so `E[cell²] = F2` and
//! `Var[cell²] ≤ 2·F2²`. The estimate is the median over rows of the mean of
//! squared cells in that row.

use serde::{Deserialize, Serialize};

use super::hash::{FourWiseHash, KeyPowers};
use super::{SketchError, StreamEstimator};
use crate::numeric::{ceil_tol, median};
use crate::seed::sub_seed;
use crate::stream::{FrequencyVector, StreamUpdate};

/// Rows = ⌈ROW_CONSTANT · ln(1/δ)⌉.
pub const ROW_CONSTANT: f64 = 8.0;
/// Columns = ⌈COL_CONSTANT / ε²⌉.
pub const COL_CONSTANT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmsSketch {
    rows: usize,
    cols: usize,
    cells: Vec<i64>,
    hashes: Vec<FourWiseHash>,
    eps: f64,
    delta: f64,
    seed: u64,
}

/// `(rows, cols)` for target `(eps, delta)`.
pub fn ams_shape(eps: f64, delta: f64) -> Result<(usize, usize), SketchError> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(SketchError::InvalidParameter(format!("eps={eps}, delta={delta} must lie in (0,1)")));
    }
    let rows = ceil_tol(ROW_CONSTANT * (1.0 / delta).ln()).max(1.0) as usize;
    let cols = ceil_tol(COL_CONSTANT / (eps * eps)).max(1.0) as usize;
    Ok((rows, cols))
}

impl AmsSketch {
    pub fn new(eps: f64, delta: f64, seed: u64) -> Result<Self, SketchError> {
        let (rows, cols) = ams_shape(eps, delta)?;
        let mut sk = Self::with_shape(rows, cols, seed);
        sk.eps = eps;
        sk.delta = delta;
        Ok(sk)
    }

    /// Explicit grid, bypassing the `(eps, delta)` sizing.
    pub fn with_shape(rows: usize, cols: usize, seed: u64) -> Self {
        let hashes = (0..rows * cols).map(|c| FourWiseHash::from_seed(sub_seed(seed, c as u64))).collect();
        Self { rows, cols, cells: vec![0; rows * cols], hashes, eps: f64::NAN, delta: f64::NAN, seed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[i64] {
        &self.cells
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash(&self, cell: usize) -> &FourWiseHash {
        &self.hashes[cell]
    }

    pub fn update(&mut self, u: StreamUpdate) {
        if u.delta == 0 {
            return;
        }
        let powers = KeyPowers::new(u.index);
        for (cell, h) in self.cells.iter_mut().zip(&self.hashes) {
            *cell += u.delta * h.sign_powers(&powers);
        }
    }

    /// Adds a whole frequency vector at once. Equivalent to replaying any
    /// stream with that net effect, by linearity.
    pub fn absorb(&mut self, f: &FrequencyVector) {
        for (index, value) in f.support() {
            self.update(StreamUpdate::new(index, value));
        }
    }

    pub fn estimate(&self) -> f64 {
        let mut row_means: Vec<f64> = self
            .cells
            .chunks(self.cols.max(1))
            .map(|row| row.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / row.len() as f64)
            .collect();
        median(&mut row_means)
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.cells.len());
        out.extend_from_slice(super::SNAPSHOT_MAGIC);
        out.push(super::SNAPSHOT_VERSION);
        out.push(super::KIND_AMS);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&self.eps.to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for c in &self.cells {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut r = super::SnapshotReader::open(bytes, super::KIND_AMS)?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let eps = r.f64()?;
        let delta = r.f64()?;
        let seed = r.u64()?;
        let mut sk = Self::with_shape(rows, cols, seed);
        sk.eps = eps;
        sk.delta = delta;
        for cell in &mut sk.cells {
            *cell = r.i64()?;
        }
        r.finish()?;
        Ok(sk)
    }
}

impl StreamEstimator for AmsSketch {
    fn update(&mut self, u: StreamUpdate) {
        AmsSketch::update(self, u);
    }

    fn estimate(&self) -> f64 {
        AmsSketch::estimate(self)
    }
}
