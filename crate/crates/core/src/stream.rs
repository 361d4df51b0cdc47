//! Stream models, frequency vectors, query functions and flip numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{ceil_tol, within_window};

/// Constant in front of the insertion-only flip-number bounds.
pub const FLIP_BOUND_CONSTANT: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("index {index} outside universe [1, {n}]")]
    IndexOutOfRange { index: u64, n: u64 },
    #[error("negative delta {delta} at index {index} in an insertion-only stream")]
    InsertionOnlyViolation { index: u64, delta: i64 },
    #[error("coordinate {index} would reach {value}, exceeding the bound {max_coord}")]
    CoordinateBound { index: u64, value: i64, max_coord: u64 },
    #[error("flip number is unbounded for eps = 0")]
    ZeroTolerance,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One update `(a_t, Δ_t)`: add `delta` to coordinate `index` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamUpdate {
    pub index: u64,
    pub delta: i64,
}

impl StreamUpdate {
    pub fn new(index: u64, delta: i64) -> Self {
        Self { index, delta }
    }

    pub fn insert(index: u64) -> Self {
        Self { index, delta: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamMode {
    Turnstile,
    InsertionOnly,
}

/// Universe size `n`, stream-length bound `m` and coordinate bound `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamModel {
    pub mode: StreamMode,
    pub n: u64,
    pub m: u64,
    pub max_coord: u64,
}

impl StreamModel {
    pub fn insertion_only(n: u64, m: u64) -> Self {
        Self { mode: StreamMode::InsertionOnly, n, m, max_coord: m.max(1) }
    }

    pub fn turnstile(n: u64, m: u64, max_coord: u64) -> Self {
        Self { mode: StreamMode::Turnstile, n, m, max_coord }
    }

    /// Checks the update against the model without applying it.
    pub fn check(&self, u: StreamUpdate) -> Result<(), StreamError> {
        if u.index == 0 || u.index > self.n {
            return Err(StreamError::IndexOutOfRange { index: u.index, n: self.n });
        }
        if self.mode == StreamMode::InsertionOnly && u.delta < 0 {
            return Err(StreamError::InsertionOnlyViolation { index: u.index, delta: u.delta });
        }
        Ok(())
    }
}

/// Dense frequency vector `f`, indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyVector {
    counts: Vec<i64>,
}

impl FrequencyVector {
    pub fn zeros(n: u64) -> Self {
        Self { counts: vec![0; n as usize] }
    }

    pub fn from_counts(counts: Vec<i64>) -> Self {
        Self { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    /// `f_index` for a 1-based index.
    pub fn get(&self, index: u64) -> i64 {
        self.counts[(index - 1) as usize]
    }

    /// Nonzero coordinates as `(index, value)` pairs, 1-based.
    pub fn support(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (i as u64 + 1, c))
    }

    /// Applies one update. On error the vector is left unchanged.
    pub fn apply(&mut self, u: StreamUpdate, model: &StreamModel) -> Result<(), StreamError> {
        model.check(u)?;
        if u.index as usize > self.counts.len() {
            return Err(StreamError::IndexOutOfRange { index: u.index, n: self.counts.len() as u64 });
        }
        let slot = &mut self.counts[(u.index - 1) as usize];
        let value = slot
            .checked_add(u.delta)
            .ok_or(StreamError::CoordinateBound { index: u.index, value: i64::MAX, max_coord: model.max_coord })?;
        if value.unsigned_abs() > model.max_coord {
            return Err(StreamError::CoordinateBound { index: u.index, value, max_coord: model.max_coord });
        }
        *slot = value;
        Ok(())
    }

    /// Replays a whole stream from the zero vector.
    pub fn replay(model: &StreamModel, updates: &[StreamUpdate]) -> Result<Self, StreamError> {
        let mut f = Self::zeros(model.n);
        for &u in updates {
            f.apply(u, model)?;
        }
        Ok(f)
    }
}

/// Query function `g` over frequency vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Query {
    /// Number of nonzero coordinates.
    F0,
    /// `Σ |f_i|^p`; `Fp(0.0)` coincides with `F0`.
    Fp(f64),
    /// Second moment, identical to `Fp(2.0)`.
    F2,
}

impl Query {
    pub fn exponent(&self) -> f64 {
        match *self {
            Query::F0 => 0.0,
            Query::Fp(p) => p,
            Query::F2 => 2.0,
        }
    }

    /// Contribution of a single coordinate with value `c`.
    pub fn term(&self, c: i64) -> f64 {
        if c == 0 {
            return 0.0;
        }
        match *self {
            Query::F0 => 1.0,
            Query::F2 => (c as f64) * (c as f64),
            Query::Fp(p) => (c.unsigned_abs() as f64).powf(p),
        }
    }

    pub fn evaluate(&self, f: &FrequencyVector) -> f64 {
        self.evaluate_counts(f.counts())
    }

    pub fn evaluate_counts(&self, counts: &[i64]) -> f64 {
        counts.iter().map(|&c| self.term(c)).sum()
    }

    /// Value on the zero vector, `g(0)`.
    pub fn at_zero(&self) -> f64 {
        0.0
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Query::F0 => write!(f, "f0"),
            Query::F2 => write!(f, "f2"),
            Query::Fp(p) => write!(f, "fp:{p}"),
        }
    }
}

impl std::str::FromStr for Query {
    type Err = StreamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f0" => Ok(Query::F0),
            "f2" => Ok(Query::F2),
            other => {
                let p = other
                    .strip_prefix("fp:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .filter(|p| *p >= 0.0 && p.is_finite())
                    .ok_or_else(|| StreamError::InvalidParameter(format!("unknown query '{s}'")))?;
                Ok(Query::Fp(p))
            }
        }
    }
}

/// `y_0 = g(0), y_1, …, y_m` along a stream.
pub fn query_trace(model: &StreamModel, query: Query, updates: &[StreamUpdate]) -> Result<Vec<f64>, StreamError> {
    let mut f = FrequencyVector::zeros(model.n);
    let mut value = query.at_zero();
    let mut trace = Vec::with_capacity(updates.len() + 1);
    trace.push(value);
    for &u in updates {
        model.check(u)?;
        let before = query.term(f.get(u.index));
        f.apply(u, model)?;
        value += query.term(f.get(u.index)) - before;
        trace.push(value);
    }
    Ok(trace)
}

/// Flip number `λ_eps(y)`: the longest subsequence `i_1 < … < i_k` with
/// `y[i_{j-1}] ∉ (1 ± eps)·y[i_j]` for every consecutive pair.
///
/// Runs of equal adjacent values are collapsed first (members of a run never
/// flip against each other and relate identically to everything else), then a
/// quadratic DP runs over the collapsed sequence. Returns 0 for an empty input.
pub fn flip_number(y: &[f64], eps: f64) -> usize {
    let mut runs: Vec<f64> = Vec::with_capacity(y.len());
    for &v in y {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    let mut best = vec![1usize; runs.len()];
    let mut overall = 0;
    for j in 0..runs.len() {
        for i in 0..j {
            if best[i] + 1 > best[j] && !within_window(runs[i], runs[j], eps) {
                best[j] = best[i] + 1;
            }
        }
        overall = overall.max(best[j]);
    }
    overall
}

/// Insertion-only flip-number bound with constant [`FLIP_BOUND_CONSTANT`]:
/// `c·ln(m)/eps` for F0, `c·ln(n)/eps` for Fp with `p ≤ 2`, and
/// `c·p·ln(n)/eps` for `p > 2`. Takes `n` and `m` as reals so that the bound
/// can be evaluated at non-integer points.
pub fn flip_number_bound(query: Query, eps: f64, n: f64, m: f64) -> Result<u64, StreamError> {
    if eps == 0.0 {
        return Err(StreamError::ZeroTolerance);
    }
    if !(eps > 0.0) || !(n >= 1.0) || !(m >= 1.0) {
        return Err(StreamError::InvalidParameter(format!("eps={eps}, n={n}, m={m}")));
    }
    let c = FLIP_BOUND_CONSTANT;
    let raw = match query {
        Query::F0 => c * m.ln() / eps,
        q => {
            let p = q.exponent();
            if p == 0.0 {
                c * m.ln() / eps
            } else if p <= 2.0 {
                c * n.ln() / eps
            } else {
                c * p * n.ln() / eps
            }
        }
    };
    Ok((ceil_tol(raw) as u64).max(1))
}

/// Parses the line-oriented stream format: one `index delta` pair per line,
/// blank lines and `#` comments ignored.
pub fn parse_stream(text: &str) -> Result<Vec<StreamUpdate>, StreamError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse_err = |message: String| StreamError::Parse { line: lineno + 1, message };
        let index = parts
            .next()
            .ok_or_else(|| parse_err("missing index".into()))?
            .parse::<u64>()
            .map_err(|e| parse_err(format!("index: {e}")))?;
        let delta = parts
            .next()
            .ok_or_else(|| parse_err("missing delta".into()))?
            .parse::<i64>()
            .map_err(|e| parse_err(format!("delta: {e}")))?;
        if parts.next().is_some() {
            return Err(parse_err("trailing fields".into()));
        }
        out.push(StreamUpdate { index, delta });
    }
    Ok(out)
}

pub fn write_stream(updates: &[StreamUpdate]) -> String {
    let mut s = String::with_capacity(updates.len() * 8);
    for u in updates {
        let _ = writeln!(s, "{} {}", u.index, u.delta);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model3() -> StreamModel {
        StreamModel::turnstile(3, 100, 100)
    }

    #[test]
    fn apply_single_coordinate() {
        let mut f = FrequencyVector::zeros(3);
        f.apply(StreamUpdate::new(2, 5), &model3()).unwrap();
        assert_eq!(f.counts(), &[0, 5, 0]);
        f.apply(StreamUpdate::new(2, -5), &model3()).unwrap();
        assert_eq!(f.counts(), &[0, 0, 0]);
    }

    #[test]
    fn insertion_only_rejects_negative_delta() {
        let model = StreamModel::insertion_only(2, 10);
        let mut f = FrequencyVector::from_counts(vec![1, 1]);
        let err = f.apply(StreamUpdate::new(1, -1), &model).unwrap_err();
        assert!(matches!(err, StreamError::InsertionOnlyViolation { .. }));
        assert_eq!(f.counts(), &[1, 1]);
    }

    #[test]
    fn out_of_range_and_coordinate_bound() {
        let mut f = FrequencyVector::zeros(3);
        assert!(matches!(
            f.apply(StreamUpdate::new(4, 1), &model3()),
            Err(StreamError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            f.apply(StreamUpdate::new(0, 1), &model3()),
            Err(StreamError::IndexOutOfRange { .. })
        ));
        let tight = StreamModel::turnstile(3, 100, 2);
        f.apply(StreamUpdate::new(1, -2), &tight).unwrap();
        assert!(matches!(
            f.apply(StreamUpdate::new(1, -1), &tight),
            Err(StreamError::CoordinateBound { .. })
        ));
    }

    #[test]
    fn query_examples() {
        let f = FrequencyVector::from_counts(vec![0, 5, 0, -2]);
        assert_eq!(Query::F0.evaluate(&f), 2.0);
        assert_eq!(Query::Fp(2.0).evaluate_counts(&[3, 4]), 25.0);
        assert_eq!(Query::F2.evaluate_counts(&[3, 4]), 25.0);
        assert_eq!(Query::Fp(1.0).evaluate_counts(&[2, 3, 0]), 5.0);
        assert_eq!(Query::Fp(0.0).evaluate(&f), Query::F0.evaluate(&f));
    }

    #[test]
    fn query_parse_roundtrip() {
        for q in [Query::F0, Query::F2, Query::Fp(1.5)] {
            assert_eq!(q.to_string().parse::<Query>().unwrap(), q);
        }
        assert!("fp:-1".parse::<Query>().is_err());
        assert!("l3".parse::<Query>().is_err());
    }

    #[test]
    fn flip_number_examples() {
        assert_eq!(flip_number(&[5.0, 5.0, 5.0, 5.0], 0.1), 1);
        assert_eq!(flip_number(&[1.0, 2.0, 4.0, 8.0], 0.0), 4);
        assert_eq!(flip_number(&[1.0, 10.0, 1.0, 10.0, 1.0], 0.5), 5);
        assert_eq!(flip_number(&[], 0.5), 0);
        // zero successor admits only an exact zero predecessor
        assert_eq!(flip_number(&[3.0, 0.0], 0.5), 2);
        assert_eq!(flip_number(&[0.0, 0.0], 0.5), 1);
    }

    #[test]
    fn flip_number_direction_is_as_printed() {
        // 1 ∉ (1 ± 0.5)·1.8 = [0.9, 2.7]? no, 1 is inside, so no flip.
        assert_eq!(flip_number(&[1.0, 1.8], 0.5), 1);
        // 1.8 ∉ (1 ± 0.5)·1 = [0.5, 1.5]: flips in this order only.
        assert_eq!(flip_number(&[1.8, 1.0], 0.5), 2);
    }

    #[test]
    fn flip_bound_examples() {
        assert_eq!(flip_number_bound(Query::F0, 0.5, 1024.0, 1e6).unwrap(), 222);
        assert_eq!(flip_number_bound(Query::Fp(1.0), 1.0, std::f64::consts::E, 5.0).unwrap(), 8);
        assert_eq!(flip_number_bound(Query::F0, 0.1, 1024.0, 1e6).unwrap(), 1106);
        assert_eq!(flip_number_bound(Query::F0, 0.0, 1024.0, 1e6), Err(StreamError::ZeroTolerance));
        // p > 2 carries the extra factor p
        let b3 = flip_number_bound(Query::Fp(3.0), 0.5, 1024.0, 1e6).unwrap();
        let b2 = flip_number_bound(Query::F2, 0.5, 1024.0, 1e6).unwrap();
        assert_eq!(b3, (8.0 * 3.0 * 1024f64.ln() / 0.5_f64).ceil() as u64);
        assert_eq!(b2, (8.0 * 1024f64.ln() / 0.5_f64).ceil() as u64);
    }

    #[test]
    fn query_trace_starts_at_zero() {
        let model = StreamModel::insertion_only(4, 10);
        let ups = [StreamUpdate::insert(1), StreamUpdate::insert(1), StreamUpdate::insert(3)];
        assert_eq!(query_trace(&model, Query::F0, &ups).unwrap(), vec![0.0, 1.0, 1.0, 2.0]);
        assert_eq!(query_trace(&model, Query::F2, &ups).unwrap(), vec![0.0, 1.0, 4.0, 5.0]);
    }

    #[test]
    fn stream_text_format() {
        let text = "# header\n1 5\n\n  3 -2\n";
        let ups = parse_stream(text).unwrap();
        assert_eq!(ups, vec![StreamUpdate::new(1, 5), StreamUpdate::new(3, -2)]);
        assert_eq!(parse_stream(&write_stream(&ups)).unwrap(), ups);
        let err = parse_stream("1 2\nx 3\n").unwrap_err();
        assert!(matches!(err, StreamError::Parse { line: 2, .. }));
        assert!(parse_stream("1\n").is_err());
        assert!(parse_stream("1 2 3\n").is_err());
    }
}
