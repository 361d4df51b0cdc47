//! The two-player game harness and concrete attacks.
//!
//! Each round the adversary submits an item, the defender updates and
//! responds, and the adversary observes the response before choosing the next
//! item. [`play_game`] records every round in a [`GameTranscript`].

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robustify::{RobustError, SketchSwitcher};
use crate::samplers::{SamplerError, SamplerKind, SamplerState};
use crate::sketches::StreamEstimator;
use crate::stream::StreamUpdate;

pub mod gapnorm;
pub mod interval;
pub mod kmv_attack;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one round")]
    NoRounds,
    #[error("defender failed: {0}")]
    Defender(String),
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<SamplerError> for GameError {
    fn from(e: SamplerError) -> Self {
        GameError::Defender(e.to_string())
    }
}

impl From<RobustError> for GameError {
    fn from(e: RobustError) -> Self {
        GameError::Defender(e.to_string())
    }
}

pub trait Adversary {
    type Item;
    type Response;
    /// Compact serializable form of a submission.
    type Record: Clone + Serialize + DeserializeOwned;
    /// Internal state worth auditing, captured after each observation.
    type Marker: Clone + Serialize + DeserializeOwned;

    fn name(&self) -> String;
    /// Next submission, or `None` once the strategy is exhausted.
    fn submit(&mut self) -> Option<Self::Item>;
    fn observe(&mut self, item: &Self::Item, response: &Self::Response);
    fn record(&self, item: &Self::Item) -> Self::Record;
    fn marker(&self) -> Self::Marker;
}

pub trait Defender {
    type Item;
    type Response;

    fn describe(&self) -> String;
    fn seed(&self) -> u64;
    fn respond(&mut self, item: &Self::Item) -> Result<Self::Response, GameError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRound<S, R, M> {
    pub t: usize,
    pub submission: S,
    pub response: R,
    pub marker: M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub adversary: String,
    pub defender: String,
    pub seed: u64,
    pub defender_seed: u64,
    pub requested_rounds: usize,
    pub played_rounds: usize,
    /// The adversary stopped before `requested_rounds`.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTranscript<S, R, M> {
    pub header: TranscriptHeader,
    pub rounds: Vec<GameRound<S, R, M>>,
}

impl<S, R, M> GameTranscript<S, R, M>
where
    S: Serialize + DeserializeOwned,
    R: Serialize + DeserializeOwned,
    M: Serialize + DeserializeOwned,
{
    /// Header line followed by one line per round.
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.rounds {
            s.push_str(&serde_json::to_string(r).expect("round serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GameError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(GameError::Transcript { line: 1, message: "empty transcript".into() })?;
        let header: TranscriptHeader =
            serde_json::from_str(first).map_err(|e| GameError::Transcript { line: 1, message: e.to_string() })?;
        let rounds = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| GameError::Transcript { line: i + 1, message: e.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, rounds })
    }
}

impl<S, R, M> GameTranscript<S, R, M> {
    pub fn exhausted(&self) -> bool {
        self.header.exhausted
    }

    pub fn responses(&self) -> impl Iterator<Item = &R> {
        self.rounds.iter().map(|r| &r.response)
    }
}

/// Plays `rounds` rounds (fewer if the adversary runs out). `seed` is the
/// master seed the players were built from and is recorded in the header.
pub fn play_game<A, D>(
    adv: &mut A,
    def: &mut D,
    rounds: usize,
    seed: u64,
) -> Result<GameTranscript<A::Record, A::Response, A::Marker>, GameError>
where
    A: Adversary,
    A::Response: Clone,
    D: Defender<Item = A::Item, Response = A::Response>,
{
    if rounds == 0 {
        return Err(GameError::NoRounds);
    }
    let mut log = Vec::with_capacity(rounds.min(1 << 20));
    let mut exhausted = false;
    for t in 1..=rounds {
        let Some(item) = adv.submit() else {
            exhausted = true;
            break;
        };
        let response = def.respond(&item)?;
        adv.observe(&item, &response);
        log.push(GameRound { t, submission: adv.record(&item), response: response.clone(), marker: adv.marker() });
    }
    let header = TranscriptHeader {
        adversary: adv.name(),
        defender: def.describe(),
        seed,
        defender_seed: def.seed(),
        requested_rounds: rounds,
        played_rounds: log.len(),
        exhausted,
    };
    Ok(GameTranscript { header, rounds: log })
}

/// Oblivious adversary replaying a fixed sequence; `R` is the response type
/// it ignores.
#[derive(Debug, Clone)]
pub struct FixedReplay<T, R> {
    items: Vec<T>,
    next: usize,
    _response: std::marker::PhantomData<fn(R)>,
}

impl<T, R> FixedReplay<T, R> {
    pub fn new(items: Vec<T>) -> Self {
        Self { items, next: 0, _response: std::marker::PhantomData }
    }
}

impl<T, R> Adversary for FixedReplay<T, R>
where
    T: Clone + Serialize + DeserializeOwned,
{
    type Item = T;
    type Response = R;
    type Record = T;
    type Marker = ();

    fn name(&self) -> String {
        "fixed-replay".into()
    }

    fn submit(&mut self) -> Option<T> {
        let item = self.items.get(self.next).cloned();
        self.next += 1;
        item
    }

    fn observe(&mut self, _: &T, _: &R) {}

    fn record(&self, item: &T) -> T {
        item.clone()
    }

    fn marker(&self) {}
}

/// An oblivious sampler as a defender: responds whether the element was
/// accepted.
pub struct SamplerDefender {
    state: SamplerState,
}

impl SamplerDefender {
    pub fn new(kind: SamplerKind, seed: u64) -> Result<Self, GameError> {
        Ok(Self { state: SamplerState::new(kind, seed)? })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }
}

impl Defender for SamplerDefender {
    type Item = u64;
    type Response = bool;

    fn describe(&self) -> String {
        self.state.kind().to_string()
    }

    fn seed(&self) -> u64 {
        self.state.seed()
    }

    fn respond(&mut self, item: &u64) -> Result<bool, GameError> {
        Ok(self.state.offer(*item))
    }
}

/// A streaming estimator as a defender: responds with its estimate.
pub struct EstimatorDefender<E> {
    pub estimator: E,
    label: String,
    seed: u64,
}

impl<E: StreamEstimator> EstimatorDefender<E> {
    pub fn new(estimator: E, label: impl Into<String>, seed: u64) -> Self {
        Self { estimator, label: label.into(), seed }
    }
}

impl<E: StreamEstimator> Defender for EstimatorDefender<E> {
    type Item = StreamUpdate;
    type Response = f64;

    fn describe(&self) -> String {
        self.label.clone()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn respond(&mut self, u: &StreamUpdate) -> Result<f64, GameError> {
        self.estimator.update(*u);
        Ok(self.estimator.estimate())
    }
}

/// A sketch switcher as a defender.
pub struct SwitcherDefender<E> {
    pub switcher: SketchSwitcher<E>,
    label: String,
    seed: u64,
}

impl<E: StreamEstimator + Send> SwitcherDefender<E> {
    pub fn new(switcher: SketchSwitcher<E>, label: impl Into<String>, seed: u64) -> Self {
        Self { switcher, label: label.into(), seed }
    }
}

impl<E: StreamEstimator + Send> Defender for SwitcherDefender<E> {
    type Item = StreamUpdate;
    type Response = f64;

    fn describe(&self) -> String {
        self.label.clone()
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn respond(&mut self, u: &StreamUpdate) -> Result<f64, GameError> {
        Ok(self.switcher.process(*u)?)
    }
}
