//! Interval attack on a Bernoulli sampler over prefix intervals.
//!
//! The adversary keeps a window `(a, b)`: everything accepted so far is at
//! most `a`, everything rejected is at least `b`. Each round it submits
//! `x = ⌊a + (1 − p′)(b − a)⌋`; an accept moves `a` up to `x`, a reject moves
//! `b` down to `x`. In the end the sample sits entirely below the rejected
//! elements, so the range `[1, max S]` separates the two densities.

use serde::{Deserialize, Serialize};

use super::{play_game, Adversary, GameError, GameTranscript, SamplerDefender};
use crate::samplers::{epsilon_approx_witness, FiniteSetSystem, SamplerKind};
use crate::seed::sub_seed;

/// What the adversary submits once `b − a < 2` leaves no room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExhaustionPolicy {
    /// Stop; the stream ends early.
    #[default]
    Truncate,
    /// Keep submitting the pinned value `a` until the stream has `n` items.
    Pad,
}

impl std::str::FromStr for ExhaustionPolicy {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncate" => Ok(Self::Truncate),
            "pad" => Ok(Self::Pad),
            other => Err(GameError::InvalidParameter(format!("unknown exhaustion policy '{other}'"))),
        }
    }
}

/// `p′ = max(p, ln n / n)`.
pub fn p_prime(p: f64, n: u64) -> f64 {
    let n = n as f64;
    p.max(n.ln() / n)
}

/// Next submission `⌊a + (1 − p′)(b − a)⌋`; `None` when `b − a < 2`.
pub fn next_submission(a: u64, b: u64, p_prime: f64) -> Option<u64> {
    if b <= a || b - a < 2 {
        return None;
    }
    let width = b - a;
    let offset = ((1.0 - p_prime) * width as f64).floor() as u64;
    // keep a < x < b despite rounding at 62-bit widths
    Some(a + offset.clamp(1, width - 1))
}

/// Window after the sampler's decision on `x`.
pub fn interval_attack_step(a: u64, b: u64, x: u64, accepted: bool) -> (u64, u64) {
    if accepted {
        (x, b)
    } else {
        (a, x)
    }
}

/// Window state at submission time, recorded with every round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalMarker {
    pub a: u64,
    pub b: u64,
    /// False for padding rounds after exhaustion.
    pub running: bool,
}

#[derive(Debug, Clone)]
pub struct IntervalAttack {
    a: u64,
    b: u64,
    p_prime: f64,
    n: u64,
    policy: ExhaustionPolicy,
    submitted: u64,
    running: bool,
    exhausted_at: Option<u64>,
    pre: IntervalMarker,
}

impl IntervalAttack {
    /// Attack of length `n` against rate `p` over the universe `[1, universe]`.
    pub fn new(n: u64, p: f64, universe: u64, policy: ExhaustionPolicy) -> Result<Self, GameError> {
        if n == 0 || universe < 2 {
            return Err(GameError::InvalidParameter(format!("n = {n}, N = {universe}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(GameError::InvalidParameter(format!("p = {p} must lie in (0,1]")));
        }
        let pp = p_prime(p, n);
        Ok(Self {
            a: 1,
            b: universe,
            p_prime: pp,
            n,
            policy,
            submitted: 0,
            running: true,
            exhausted_at: None,
            pre: IntervalMarker { a: 1, b: universe, running: true },
        })
    }

    pub fn window(&self) -> (u64, u64) {
        (self.a, self.b)
    }

    pub fn p_prime(&self) -> f64 {
        self.p_prime
    }

    /// 1-based round at which the window ran out, if it did.
    pub fn exhausted_at(&self) -> Option<u64> {
        self.exhausted_at
    }
}

impl Adversary for IntervalAttack {
    type Item = u64;
    type Response = bool;
    type Record = u64;
    type Marker = IntervalMarker;

    fn name(&self) -> String {
        format!("interval:p'={}", self.p_prime)
    }

    fn submit(&mut self) -> Option<u64> {
        if self.submitted >= self.n {
            return None;
        }
        let x = match (self.running, next_submission(self.a, self.b, self.p_prime)) {
            (true, Some(x)) => x,
            _ => {
                if self.running {
                    self.running = false;
                    self.exhausted_at = Some(self.submitted + 1);
                }
                match self.policy {
                    ExhaustionPolicy::Truncate => return None,
                    ExhaustionPolicy::Pad => self.a,
                }
            }
        };
        self.pre = IntervalMarker { a: self.a, b: self.b, running: self.running };
        self.submitted += 1;
        Some(x)
    }

    fn observe(&mut self, x: &u64, accepted: &bool) {
        if self.running {
            (self.a, self.b) = interval_attack_step(self.a, self.b, *x, *accepted);
        }
    }

    fn record(&self, x: &u64) -> u64 {
        *x
    }

    fn marker(&self) -> IntervalMarker {
        self.pre
    }
}

pub type IntervalTranscript = GameTranscript<u64, bool, IntervalMarker>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalOutcome {
    pub n: u64,
    pub p: f64,
    pub p_prime: f64,
    pub universe: u64,
    pub policy: ExhaustionPolicy,
    pub stream_len: usize,
    pub sample_size: usize,
    /// Final epsilon-approximation error over prefix intervals; `None` for an
    /// empty sample.
    pub error: Option<f64>,
    /// 0-based witness range, i.e. `[1, witness + 1]`.
    pub witness: Option<u64>,
    pub exhausted_at: Option<u64>,
    /// `|S| < 2np′` at the end.
    pub small_sample: bool,
    /// `b − a ≥ n` at every running round.
    pub wide_window: bool,
    /// First violation of the three-part invariant, if any.
    pub invariant_violation: Option<String>,
    /// `error ≥ 1 − |S|/|X|`; checked only on unpadded runs with the
    /// invariant intact and a nonempty sample.
    pub bound_holds: Option<bool>,
}

impl IntervalOutcome {
    /// The small-sample implication: `|S| < 2np′` ⇒ `b − a ≥ n` throughout.
    pub fn window_implication_holds(&self) -> bool {
        !self.small_sample || self.wide_window
    }
}

/// Checks `max accepted ≤ a_i ≤ x_i < b_i ≤ min rejected` and `a_i < b_i` on
/// every running round. Padding rounds are skipped.
pub fn check_invariant(tr: &IntervalTranscript) -> Result<(), String> {
    let mut max_acc: Option<u64> = None;
    let mut min_rej: Option<u64> = None;
    for r in tr.rounds.iter().filter(|r| r.marker.running) {
        let IntervalMarker { a, b, .. } = r.marker;
        let x = r.submission;
        let ok = a < b
            && a <= x
            && x < b
            && max_acc.is_none_or(|m| m <= a)
            && min_rej.is_none_or(|m| b <= m);
        if !ok {
            return Err(format!(
                "round {}: accepted max {max_acc:?}, a = {a}, x = {x}, b = {b}, rejected min {min_rej:?}",
                r.t
            ));
        }
        if r.response {
            max_acc = Some(max_acc.map_or(x, |m| m.max(x)));
        } else {
            min_rej = Some(min_rej.map_or(x, |m| m.min(x)));
        }
    }
    Ok(())
}

/// Plays the attack against `Bernoulli(p)` and evaluates the result over the
/// prefix system on `[1, universe]`. The sampler seed is derived from `seed`.
pub fn run_interval_attack(
    n: u64,
    p: f64,
    universe: u64,
    policy: ExhaustionPolicy,
    seed: u64,
) -> Result<(IntervalTranscript, IntervalOutcome), GameError> {
    let mut adv = IntervalAttack::new(n, p, universe, policy)?;
    let mut def = SamplerDefender::new(SamplerKind::Bernoulli { p }, sub_seed(seed, 1))?;
    let tr = play_game(&mut adv, &mut def, n as usize, seed)?;
    let outcome = evaluate(&tr, n, p, universe, policy, adv.exhausted_at())?;
    Ok((tr, outcome))
}

/// Recomputes the outcome of an interval-attack transcript.
pub fn evaluate(
    tr: &IntervalTranscript,
    n: u64,
    p: f64,
    universe: u64,
    policy: ExhaustionPolicy,
    exhausted_at: Option<u64>,
) -> Result<IntervalOutcome, GameError> {
    let pp = p_prime(p, n);
    let x: Vec<u64> = tr.rounds.iter().map(|r| r.submission).collect();
    let s: Vec<u64> = tr.rounds.iter().filter(|r| r.response).map(|r| r.submission).collect();
    let sys = FiniteSetSystem::prefix(universe).map_err(|e| GameError::InvalidParameter(e.to_string()))?;
    let (error, witness) = if s.is_empty() || x.is_empty() {
        (None, None)
    } else {
        let (e, w) = epsilon_approx_witness(&x, &s, &sys).map_err(|e| GameError::InvalidParameter(e.to_string()))?;
        (Some(e), Some(w))
    };
    let invariant_violation = check_invariant(tr).err();
    let wide_window = tr.rounds.len() as u64 == n
        && exhausted_at.is_none()
        && tr.rounds.iter().all(|r| !r.marker.running || r.marker.b - r.marker.a >= n);
    let padded = tr.rounds.iter().any(|r| !r.marker.running);
    let bound_holds = match error {
        Some(e) if invariant_violation.is_none() && !padded => {
            Some(e >= 1.0 - s.len() as f64 / x.len() as f64 - 1e-12)
        }
        _ => None,
    };
    Ok(IntervalOutcome {
        n,
        p,
        p_prime: pp,
        universe,
        policy,
        stream_len: x.len(),
        sample_size: s.len(),
        error,
        witness,
        exhausted_at,
        small_sample: (s.len() as f64) < 2.0 * n as f64 * pp,
        wide_window,
        invariant_violation,
        bound_holds,
    })
}
