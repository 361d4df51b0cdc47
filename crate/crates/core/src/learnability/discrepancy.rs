//! The online discrepancy game and the sequential Rademacher estimate.
//!
//! Items are elements of the universe; the painter colors each one red or
//! blue right after it arrives. A range's imbalance is its red count minus
//! its blue count and the discrepancy is the largest absolute imbalance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::adversary::{play_game, Adversary, Defender, GameError, GameTranscript};
use crate::samplers::{epsilon_approx_error, FiniteSetSystem};
use crate::seed::{map_trials, rng_from, sub_seed};

/// Largest range family the game tracks incrementally.
pub const GAME_RANGE_LIMIT: u64 = 1 << 16;
/// Bound on `universe · ranges` for the adaptive item strategy.
pub const ADAPTIVE_WORK_LIMIT: u64 = 1 << 24;

/// Disc of a coloring given as `red[i]` per item.
pub fn disc_coloring(sys: &FiniteSetSystem, x: &[u64], red: &[bool]) -> Result<u64, LearnError> {
    if x.len() != red.len() {
        return Err(LearnError::InvalidParameter(format!("{} items but {} colors", x.len(), red.len())));
    }
    let sign = |r: bool| if r { 1i64 } else { -1 };
    match sys {
        FiniteSetSystem::Explicit { ranges, .. } => Ok((0..ranges.len() as u64)
            .map(|r| x.iter().zip(red).filter(|(&v, _)| sys.contains(r, v)).map(|(_, &c)| sign(c)).sum::<i64>().unsigned_abs())
            .max()
            .unwrap_or(0)),
        FiniteSetSystem::PrefixIntervals { n } => {
            let mut pts: Vec<(u64, i64)> =
                x.iter().zip(red).filter(|(&v, _)| v >= 1 && v <= *n).map(|(&v, &c)| (v, sign(c))).collect();
            pts.sort_unstable();
            let (mut sum, mut best) = (0i64, 0u64);
            for (i, &(v, s)) in pts.iter().enumerate() {
                sum += s;
                if pts.get(i + 1).is_none_or(|&(w, _)| w != v) {
                    best = best.max(sum.unsigned_abs());
                }
            }
            Ok(best)
        }
    }
}

/// `Disc(R, X, I)` for a 1-based red index set `I`.
pub fn disc(sys: &FiniteSetSystem, x: &[u64], red_indices: &[usize]) -> Result<u64, LearnError> {
    let mut red = vec![false; x.len()];
    for &i in red_indices {
        if i == 0 || i > x.len() {
            return Err(LearnError::InvalidParameter(format!("color index {i} outside [1, {}]", x.len())));
        }
        red[i - 1] = true;
    }
    disc_coloring(sys, x, &red)
}

/// Smallest disc over all `2^|X|` colorings, with a coloring achieving it.
pub fn min_disc_bruteforce(sys: &FiniteSetSystem, x: &[u64]) -> Result<(u64, Vec<bool>), LearnError> {
    if x.len() > 20 {
        return Err(LearnError::TooLarge(format!("{} items", x.len())));
    }
    let mut best: Option<(u64, Vec<bool>)> = None;
    for mask in 0u32..1 << x.len() {
        let red: Vec<bool> = (0..x.len()).map(|i| mask >> i & 1 == 1).collect();
        let d = disc_coloring(sys, x, &red)?;
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, red));
        }
    }
    Ok(best.expect("at least one coloring"))
}

/// Items placed so far with their colors and per-range imbalances.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoringState {
    sys: FiniteSetSystem,
    items: Vec<u64>,
    red: Vec<bool>,
    imbalance: Vec<i64>,
}

impl ColoringState {
    pub fn new(sys: &FiniteSetSystem) -> Result<Self, LearnError> {
        let count = sys.range_count();
        if count > GAME_RANGE_LIMIT {
            return Err(LearnError::TooLarge(format!("{count} ranges exceed {GAME_RANGE_LIMIT}")));
        }
        Ok(Self { sys: sys.clone(), items: Vec::new(), red: Vec::new(), imbalance: vec![0; count as usize] })
    }

    pub fn items(&self) -> &[u64] {
        &self.items
    }

    pub fn colors(&self) -> &[bool] {
        &self.red
    }

    pub fn imbalances(&self) -> &[i64] {
        &self.imbalance
    }

    pub fn red_count(&self) -> usize {
        self.red.iter().filter(|&&r| r).count()
    }

    pub fn place(&mut self, x: u64, red: bool) {
        let s = if red { 1 } else { -1 };
        for (r, imb) in self.imbalance.iter_mut().enumerate() {
            if self.sys.contains(r as u64, x) {
                *imb += s;
            }
        }
        self.items.push(x);
        self.red.push(red);
    }

    pub fn disc(&self) -> u64 {
        self.imbalance.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    /// Imbalances rebuilt from the item list.
    pub fn recompute(&self) -> Vec<i64> {
        (0..self.imbalance.len() as u64)
            .map(|r| {
                self.items
                    .iter()
                    .zip(&self.red)
                    .filter(|(&x, _)| self.sys.contains(r, x))
                    .map(|(_, &c)| if c { 1 } else { -1 })
                    .sum()
            })
            .collect()
    }

    /// Largest post-move `|imbalance|` if `x` were colored `red`.
    fn max_after(&self, x: u64, red: bool) -> u64 {
        let s = if red { 1 } else { -1 };
        self.imbalance
            .iter()
            .enumerate()
            .map(|(r, &v)| if self.sys.contains(r as u64, x) { (v + s).unsigned_abs() } else { v.unsigned_abs() })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PainterStrategy {
    /// Fair coin per item.
    Random,
    /// Color minimizing the largest post-move imbalance; ties go red.
    Greedy,
}

impl fmt::Display for PainterStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Greedy => "greedy",
        })
    }
}

impl FromStr for PainterStrategy {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "random" => Ok(Self::Random),
            "greedy" => Ok(Self::Greedy),
            other => Err(LearnError::InvalidParameter(format!("unknown painter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemStrategy {
    /// Uniform elements of the universe.
    Uniform,
    /// A uniform element, then the same element again.
    DuplicatePairs,
    /// The element whose ranges are currently most unbalanced (smallest on ties).
    Adaptive,
    /// A fixed item list, cycled.
    Fixed(Vec<u64>),
}

impl fmt::Display for ItemStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("uniform"),
            Self::DuplicatePairs => f.write_str("pairs"),
            Self::Adaptive => f.write_str("adaptive"),
            Self::Fixed(items) => {
                let s: Vec<String> = items.iter().map(u64::to_string).collect();
                write!(f, "fixed:{}", s.join(","))
            }
        }
    }
}

impl FromStr for ItemStrategy {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(list) = s.strip_prefix("fixed:") {
            let items = list
                .split(',')
                .map(|v| v.trim().parse::<u64>().map_err(|e| LearnError::InvalidParameter(format!("fixed item `{v}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if items.is_empty() {
                return Err(LearnError::InvalidParameter("fixed item list is empty".into()));
            }
            return Ok(Self::Fixed(items));
        }
        match s {
            "uniform" => Ok(Self::Uniform),
            "pairs" => Ok(Self::DuplicatePairs),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(LearnError::InvalidParameter(format!("unknown item strategy `{other}`"))),
        }
    }
}

/// The painter as a defender: answers `true` for red.
pub struct Painter {
    strategy: PainterStrategy,
    state: ColoringState,
    rng: ChaCha8Rng,
    seed: u64,
}

impl Painter {
    pub fn new(strategy: PainterStrategy, sys: &FiniteSetSystem, seed: u64) -> Result<Self, LearnError> {
        Ok(Self { strategy, state: ColoringState::new(sys)?, rng: rng_from(seed), seed })
    }

    pub fn state(&self) -> &ColoringState {
        &self.state
    }
}

impl Defender for Painter {
    type Item = u64;
    type Response = bool;

    fn describe(&self) -> String {
        format!("painter:{}", self.strategy)
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn respond(&mut self, x: &u64) -> Result<bool, GameError> {
        let red = match self.strategy {
            PainterStrategy::Random => self.rng.random_bool(0.5),
            PainterStrategy::Greedy => self.state.max_after(*x, true) <= self.state.max_after(*x, false),
        };
        self.state.place(*x, red);
        Ok(red)
    }
}

/// The item-placing side of the game. The marker is the running disc.
pub struct ItemAdversary {
    strategy: ItemStrategy,
    state: ColoringState,
    rng: ChaCha8Rng,
    pending: Option<u64>,
    next: usize,
}

impl ItemAdversary {
    pub fn new(strategy: ItemStrategy, sys: &FiniteSetSystem, seed: u64) -> Result<Self, LearnError> {
        let u = sys.universe_size();
        match &strategy {
            ItemStrategy::Adaptive if u.saturating_mul(sys.range_count()) > ADAPTIVE_WORK_LIMIT => {
                return Err(LearnError::TooLarge("system too large for the adaptive item strategy".into()));
            }
            ItemStrategy::Fixed(items) if items.iter().any(|&x| x == 0 || x > u) => {
                return Err(LearnError::InvalidParameter(format!("fixed items must lie in [1, {u}]")));
            }
            _ => {}
        }
        Ok(Self { strategy, state: ColoringState::new(sys)?, rng: rng_from(seed), pending: None, next: 0 })
    }

    fn most_unbalanced(&self) -> u64 {
        let sys = &self.state.sys;
        let imb = self.state.imbalances();
        (1..=sys.universe_size())
            .map(|x| {
                let score = (0..imb.len()).filter(|&r| sys.contains(r as u64, x)).map(|r| imb[r].unsigned_abs()).max();
                (score.unwrap_or(0), x)
            })
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, x)| x)
            .expect("nonempty universe")
    }
}

impl Adversary for ItemAdversary {
    type Item = u64;
    type Response = bool;
    type Record = u64;
    type Marker = u64;

    fn name(&self) -> String {
        format!("items:{}", self.strategy)
    }

    fn submit(&mut self) -> Option<u64> {
        let u = self.state.sys.universe_size();
        Some(match &self.strategy {
            ItemStrategy::Uniform => self.rng.random_range(1..=u),
            ItemStrategy::DuplicatePairs => match self.pending.take() {
                Some(x) => x,
                None => {
                    let x = self.rng.random_range(1..=u);
                    self.pending = Some(x);
                    x
                }
            },
            ItemStrategy::Adaptive => self.most_unbalanced(),
            ItemStrategy::Fixed(items) => {
                let x = items[self.next % items.len()];
                self.next += 1;
                x
            }
        })
    }

    fn observe(&mut self, x: &u64, red: &bool) {
        self.state.place(*x, *red);
    }

    fn record(&self, x: &u64) -> u64 {
        *x
    }

    fn marker(&self) -> u64 {
        self.state.disc()
    }
}

pub type DiscTranscript = GameTranscript<u64, bool, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscGameOutcome {
    pub disc: u64,
    pub items: Vec<u64>,
    pub red: Vec<bool>,
}

/// Plays `two_k` rounds and scores the final coloring from scratch.
pub fn play_discrepancy_game(
    painter: PainterStrategy,
    items: &ItemStrategy,
    two_k: usize,
    sys: &FiniteSetSystem,
    seed: u64,
) -> Result<(DiscTranscript, DiscGameOutcome), LearnError> {
    if two_k == 0 || two_k % 2 != 0 {
        return Err(LearnError::InvalidParameter(format!("2k = {two_k} must be positive and even")));
    }
    let mut def = Painter::new(painter, sys, sub_seed(seed, 1))?;
    let mut adv = ItemAdversary::new(items.clone(), sys, sub_seed(seed, 2))?;
    let tr = play_game(&mut adv, &mut def, two_k, seed)?;
    let x: Vec<u64> = tr.rounds.iter().map(|r| r.submission).collect();
    let red: Vec<bool> = tr.rounds.iter().map(|r| r.response).collect();
    let disc = disc_coloring(sys, &x, &red)?;
    Ok((tr, DiscGameOutcome { disc, items: x, red }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub painter: PainterStrategy,
    pub items: ItemStrategy,
    pub rounds: usize,
    pub trials: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Final disc per trial, in trial order.
    pub discs: Vec<u64>,
}

impl RademacherEstimate {
    /// `(disc, count)` pairs in increasing disc order.
    pub fn histogram(&self) -> Vec<(u64, usize)> {
        let mut h = BTreeMap::new();
        for &d in &self.discs {
            *h.entry(d).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            painter: String,
            items: String,
            rounds: usize,
            trials: u64,
            mean: f64,
            std_error: f64,
            histogram: Vec<(u64, usize)>,
            #[serde(skip_serializing_if = "Option::is_none")]
            discs: Option<&'a [u64]>,
        }
        let r = Report {
            painter: self.painter.to_string(),
            items: self.items.to_string(),
            rounds: self.rounds,
            trials: self.trials,
            mean: self.mean,
            std_error: self.std_error,
            histogram: self.histogram(),
            discs: None,
        };
        serde_json::to_string(&r).expect("report serializes")
    }
}

/// Monte-Carlo mean of the final disc over `trials` seeded games.
pub fn estimate_sequential_rademacher(
    sys: &FiniteSetSystem,
    rounds: usize,
    trials: u64,
    painter: PainterStrategy,
    items: &ItemStrategy,
    seed: u64,
) -> Result<RademacherEstimate, LearnError> {
    if trials == 0 {
        return Err(LearnError::InvalidParameter("trials must be at least 1".into()));
    }
    let results = map_trials(seed, trials, |_, s| play_discrepancy_game(painter, items, rounds, sys, s).map(|(_, o)| o.disc));
    let discs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = discs.len() as f64;
    let mean = discs.iter().map(|&d| d as f64).sum::<f64>() / n;
    let var = if discs.len() > 1 { discs.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(RademacherEstimate { painter, items: items.clone(), rounds, trials, mean, std_error: (var / n).sqrt(), discs })
}

/// `√(2T·ln(2|R|))`: Hoeffding plus a union bound for the random painter.
pub fn random_painter_bound(rounds: usize, range_count: u64) -> f64 {
    (2.0 * rounds as f64 * (2.0 * range_count as f64).ln()).sqrt()
}

/// `c·√(d·T)`.
pub fn ldim_rate_bound(c: f64, ldim: u32, rounds: usize) -> f64 {
    c * (ldim as f64 * rounds as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionCheck {
    /// The chosen class is the red one.
    pub red_class: bool,
    pub class_size: usize,
    pub disc: u64,
    /// Epsilon-approximation error of the class as a sample of `X`.
    pub error: f64,
    /// `disc/(2s) + |1 − |X|/(2s)|` for class size `s`.
    pub bound: f64,
}

impl ConnectionCheck {
    pub fn holds(&self) -> bool {
        self.error <= self.bound + 1e-12
    }
}

/// Uses the color class with the smaller approximation error as a sample of
/// `X` and compares it against the disc-derived bound.
pub fn connection_check(sys: &FiniteSetSystem, x: &[u64], red: &[bool]) -> Result<ConnectionCheck, LearnError> {
    let d = disc_coloring(sys, x, red)?;
    let m = x.len() as f64;
    let mut best: Option<ConnectionCheck> = None;
    for class in [true, false] {
        let s: Vec<u64> = x.iter().zip(red).filter(|(_, &c)| c == class).map(|(&v, _)| v).collect();
        if s.is_empty() {
            continue;
        }
        let size = s.len() as f64;
        let error = epsilon_approx_error(x, &s, sys)?;
        let bound = d as f64 / (2.0 * size) + (1.0 - m / (2.0 * size)).abs();
        let c = ConnectionCheck { red_class: class, class_size: s.len(), disc: d, error, bound };
        if best.is_none_or(|b| c.error < b.error) {
            best = Some(c);
        }
    }
    best.ok_or(LearnError::InvalidParameter("no items".into()))
}
