//! Oblivious samplers, the epsilon-approximation error and sample sizes.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::ceil_tol;
use crate::seed::rng_from;

pub mod set_system;

pub use set_system::FiniteSetSystem;

/// Constant in the static sample size `c·(d + ln(1/δ))/ε²`.
pub const STATIC_SAMPLE_CONSTANT: f64 = 10.0;
/// Constant in the robust Bernoulli rate `c·(ln|R| + ln(4/δ))/(ε²n)`.
pub const ROBUST_RATE_CONSTANT: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("out-of-order index {got}, expected {expected}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("rate {p} exceeds 1: the stream is too short for the requested robustness")]
    RateAboveOne { p: f64 },
    #[error("too large for exhaustive evaluation: {0}")]
    TooLarge(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SamplerKind {
    Bernoulli { p: f64 },
    /// `k` indices drawn without replacement from `[1, n]` up front.
    Uniform { k: usize, n: u64 },
    Reservoir { k: usize },
}

impl std::str::FromStr for SamplerKind {
    type Err = SamplerError;

    /// `bernoulli:p=0.01`, `uniform:k=10,n=100`, `reservoir:k=5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| SamplerError::InvalidParameter(m);
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut p = None;
        let mut k = None;
        let mut n = None;
        for kv in params.split(',').filter(|t| !t.trim().is_empty()) {
            let (key, value) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value in '{kv}'")))?;
            let value = value.trim();
            match key.trim() {
                "p" => p = Some(value.parse::<f64>().map_err(|e| bad(format!("p: {e}")))?),
                "k" => k = Some(value.parse::<usize>().map_err(|e| bad(format!("k: {e}")))?),
                "n" => n = Some(value.parse::<u64>().map_err(|e| bad(format!("n: {e}")))?),
                other => return Err(bad(format!("unknown sampler parameter '{other}'"))),
            }
        }
        fn need<T>(v: Option<T>, name: &str, key: &str) -> Result<T, SamplerError> {
            v.ok_or_else(|| SamplerError::InvalidParameter(format!("sampler '{name}' needs {key}=")))
        }
        match name.trim() {
            "bernoulli" => Ok(Self::Bernoulli { p: need(p, name, "p")? }),
            "uniform" => Ok(Self::Uniform { k: need(k, name, "k")?, n: need(n, name, "n")? }),
            "reservoir" => Ok(Self::Reservoir { k: need(k, name, "k")? }),
            other => Err(bad(format!("unknown sampler '{other}'"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            Self::Uniform { k, n } => write!(f, "uniform:k={k},n={n}"),
            Self::Reservoir { k } => write!(f, "reservoir:k={k}"),
        }
    }
}

/// One accepted element of the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampled {
    pub index: u64,
    pub value: u64,
}

/// A sampler together with its current sample. Accept/reject decisions use
/// only the index and the internal RNG.
#[derive(Debug, Clone)]
pub struct SamplerState {
    kind: SamplerKind,
    sample: Vec<Sampled>,
    rng: ChaCha8Rng,
    seed: u64,
    rounds_seen: u64,
    chosen: HashSet<u64>,
}

impl SamplerState {
    pub fn new(kind: SamplerKind, seed: u64) -> Result<Self, SamplerError> {
        let mut rng = rng_from(seed);
        let mut chosen = HashSet::new();
        match kind {
            SamplerKind::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                return Err(SamplerError::InvalidParameter(format!("Bernoulli rate {p} outside [0,1]")))
            }
            SamplerKind::Uniform { k, n } => {
                if k as u64 > n {
                    return Err(SamplerError::InvalidParameter(format!("cannot draw {k} of {n} indices")));
                }
                let n = usize::try_from(n).map_err(|_| SamplerError::TooLarge(format!("n = {n}")))?;
                chosen = rand::seq::index::sample(&mut rng, n, k).iter().map(|i| i as u64 + 1).collect();
            }
            SamplerKind::Reservoir { k } if k == 0 => {
                return Err(SamplerError::InvalidParameter("reservoir needs k >= 1".into()))
            }
            _ => {}
        }
        Ok(Self { kind, sample: Vec::new(), rng, seed, rounds_seen: 0, chosen })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds_seen(&self) -> u64 {
        self.rounds_seen
    }

    pub fn sample(&self) -> &[Sampled] {
        &self.sample
    }

    pub fn sample_values(&self) -> Vec<u64> {
        self.sample.iter().map(|s| s.value).collect()
    }

    pub fn sample_indices(&self) -> Vec<u64> {
        self.sample.iter().map(|s| s.index).collect()
    }

    /// Offers element `index` (must equal `rounds_seen + 1`) with `value`.
    pub fn step(&mut self, index: u64, value: u64) -> Result<bool, SamplerError> {
        let expected = self.rounds_seen + 1;
        if index != expected {
            return Err(SamplerError::OutOfOrder { expected, got: index });
        }
        self.rounds_seen = index;
        let item = Sampled { index, value };
        let accepted = match self.kind {
            SamplerKind::Bernoulli { p } => {
                let a = self.rng.random_bool(p);
                if a {
                    self.sample.push(item);
                }
                a
            }
            SamplerKind::Uniform { .. } => {
                let a = self.chosen.contains(&index);
                if a {
                    self.sample.push(item);
                }
                a
            }
            SamplerKind::Reservoir { k } => {
                if self.sample.len() < k {
                    self.sample.push(item);
                    true
                } else {
                    let j = self.rng.random_range(0..index);
                    if (j as usize) < k {
                        self.sample[j as usize] = item;
                        true
                    } else {
                        false
                    }
                }
            }
        };
        Ok(accepted)
    }

    /// Offers the next element, numbering it automatically.
    pub fn offer(&mut self, value: u64) -> bool {
        self.step(self.rounds_seen + 1, value).expect("sequential index")
    }
}

/// `max_R | |R∩X|/|X| − |R∩S|/|S| |` with multiset counts.
pub fn epsilon_approx_error(x: &[u64], s: &[u64], sys: &FiniteSetSystem) -> Result<f64, SamplerError> {
    Ok(epsilon_approx_witness(x, s, sys)?.0)
}

/// The error together with a 0-based witness range achieving it.
pub fn epsilon_approx_witness(x: &[u64], s: &[u64], sys: &FiniteSetSystem) -> Result<(f64, u64), SamplerError> {
    if x.is_empty() {
        return Err(SamplerError::Empty("stream X"));
    }
    if s.is_empty() {
        return Err(SamplerError::Empty("sample S"));
    }
    let (nx, ns) = (x.len() as f64, s.len() as f64);
    match sys {
        FiniteSetSystem::Explicit { ranges, .. } => {
            let mut best = (f64::NEG_INFINITY, 0);
            for r in 0..ranges.len() as u64 {
                let cx = x.iter().filter(|&&v| sys.contains(r, v)).count() as f64;
                let cs = s.iter().filter(|&&v| sys.contains(r, v)).count() as f64;
                let err = (cx / nx - cs / ns).abs();
                if err > best.0 {
                    best = (err, r);
                }
            }
            Ok(best)
        }
        FiniteSetSystem::PrefixIntervals { n } => {
            // Densities of [1, b] only change at values present in X or S, so
            // those thresholds (clipped to [1, N]) cover every distinct range.
            let mut xs: Vec<u64> = x.to_vec();
            let mut ss: Vec<u64> = s.to_vec();
            xs.sort_unstable();
            ss.sort_unstable();
            let mut thresholds: Vec<u64> =
                xs.iter().chain(&ss).copied().filter(|&v| v >= 1 && v <= *n).chain(std::iter::once(*n)).collect();
            thresholds.sort_unstable();
            thresholds.dedup();
            let zx = xs.partition_point(|&v| v == 0);
            let zs = ss.partition_point(|&v| v == 0);
            let mut best = (0.0, 0);
            let (mut ix, mut is) = (zx, zs);
            for &b in &thresholds {
                while ix < xs.len() && xs[ix] <= b {
                    ix += 1;
                }
                while is < ss.len() && ss[is] <= b {
                    is += 1;
                }
                let cx = (ix - zx) as f64;
                let cs = (is - zs) as f64;
                let err = (cx / nx - cs / ns).abs();
                if err > best.0 {
                    best = (err, b - 1);
                }
            }
            Ok(best)
        }
    }
}

/// `⌈c·(d + ln(1/δ))/ε²⌉` samples for an ε-approximation of a VC-dimension-`d`
/// system with probability `1 − δ` (non-adaptive streams).
pub fn static_sample_size(d: u32, eps: f64, delta: f64) -> Result<u64, SamplerError> {
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    Ok(ceil_tol(STATIC_SAMPLE_CONSTANT * (d as f64 + (1.0 / delta).ln()) / (eps * eps)) as u64)
}

/// Bernoulli rate `10·(ln|R| + ln(4/δ))/(ε²·n)` that is (ε,δ)-robust for
/// streams of length `n`. Errors when the rate would exceed 1.
pub fn robust_sample_rate(range_count: f64, eps: f64, delta: f64, n: f64) -> Result<f64, SamplerError> {
    if !(range_count >= 1.0) || !(n > 0.0) {
        return Err(SamplerError::InvalidParameter(format!("|R| = {range_count}, n = {n}")));
    }
    check_unit("eps", eps)?;
    check_unit("delta", delta)?;
    let p = ROBUST_RATE_CONSTANT * (range_count.ln() + (4.0 / delta).ln()) / (eps * eps * n);
    if p > 1.0 {
        return Err(SamplerError::RateAboveOne { p });
    }
    Ok(p)
}

fn check_unit(name: &str, v: f64) -> Result<(), SamplerError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(SamplerError::InvalidParameter(format!("{name} = {v} must lie in (0,1)")))
    }
}
