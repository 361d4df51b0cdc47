//! GapNorm: a linear-sketch defender and the row-space learning attack.
//!
//! The defender holds `A` (r×n, orthonormal rows) and answers 1 iff
//! `√(n/r)·‖Ax‖ ≥ (1+B)/2`. The adversary probes with Gaussian vectors
//! orthogonal to what it has learned, keeps the positively labelled ones and
//! takes the top eigenvector of their Gram matrix as the next row-space
//! direction. With the row space learned it alternates zero vectors and
//! norm-`B` vectors from the learned complement, which the sketch cannot see.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{play_game, Adversary, Defender, GameError, GameTranscript};
use crate::seed::{rng_from, sub_seed};

pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOLERANCE: f64 = 1e-10;
/// Scale escalations after which learning proceeds with whatever it has.
pub const MAX_ESCALATIONS: usize = 256;

pub struct GapNormDefender {
    a: DMatrix<f64>,
    gap: f64,
    seed: u64,
}

impl GapNormDefender {
    /// Draws a Gaussian `r×n` matrix and orthonormalizes its rows.
    pub fn new(r: usize, n: usize, gap: f64, seed: u64) -> Result<Self, GameError> {
        if r >= n {
            return Err(GameError::InvalidParameter(format!("sketch rows r = {r} must be below n = {n}")));
        }
        if r == 0 {
            return Ok(Self { a: DMatrix::zeros(0, n), gap, seed });
        }
        let mut rng = rng_from(seed);
        let g = DMatrix::<f64>::from_fn(n, r, |_, _| rng.sample(StandardNormal));
        let q = g.qr().q();
        Ok(Self { a: q.transpose(), gap, seed })
    }

    /// Defender with the given rows, assumed orthonormal.
    pub fn from_rows(a: DMatrix<f64>, gap: f64) -> Self {
        Self { a, gap, seed: 0 }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn r(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn threshold(&self) -> f64 {
        (1.0 + self.gap) / 2.0
    }

    /// The rescaled sketch norm `√(n/r)·‖Ax‖`.
    pub fn sketch_norm(&self, x: &DVector<f64>) -> f64 {
        if self.r() == 0 {
            return 0.0;
        }
        ((self.n() as f64) / (self.r() as f64)).sqrt() * (&self.a * x).norm()
    }

    pub fn answer(&self, x: &DVector<f64>) -> bool {
        self.sketch_norm(x) >= self.threshold()
    }

    /// `sqrt((1/r)·Σ_j ‖A v_j‖²)`: how much of the row space the vectors cover.
    pub fn capture(&self, vs: &[DVector<f64>]) -> f64 {
        if self.r() == 0 {
            return 0.0;
        }
        (vs.iter().map(|v| (&self.a * v).norm_squared()).sum::<f64>() / self.r() as f64).sqrt()
    }
}

impl Defender for GapNormDefender {
    type Item = DVector<f64>;
    type Response = bool;

    fn describe(&self) -> String {
        format!("gapnorm:r={},n={},B={}", self.r(), self.n(), self.gap)
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn respond(&mut self, x: &DVector<f64>) -> Result<bool, GameError> {
        if x.len() != self.n() {
            return Err(GameError::Defender(format!("vector of length {} for n = {}", x.len(), self.n())));
        }
        Ok(self.answer(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapNormConfig {
    pub n: usize,
    pub r: usize,
    pub gap: f64,
    /// Learning rounds; defaults to `r`.
    pub learning_rounds: usize,
    pub attack_rounds: usize,
    /// Probes per learning round.
    pub m_probe: usize,
    /// Probes used to check the positive rate at the current scale.
    pub pilot: usize,
    /// Multiplier applied to the probe scale while the pilot rate is too low.
    pub tau_factor: f64,
    pub min_positive_rate: f64,
}

impl GapNormConfig {
    pub fn new(n: usize, r: usize, gap: f64) -> Self {
        Self {
            n,
            r,
            gap,
            learning_rounds: r,
            attack_rounds: 100,
            m_probe: 2 * n * n,
            pilot: 512,
            tau_factor: 2f64.powf(0.25),
            min_positive_rate: 0.2,
        }
    }

    fn validate(&self) -> Result<(), GameError> {
        if self.n == 0 || self.learning_rounds >= self.n || self.pilot == 0 || self.m_probe == 0 || self.tau_factor <= 1.0 {
            return Err(GameError::InvalidParameter(format!("{self:?}")));
        }
        if !(self.gap > 1.0) {
            return Err(GameError::InvalidParameter(format!("gap B = {} must exceed 1", self.gap)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapPhase {
    Pilot,
    Learning,
    Attacking,
}

/// Compact record of a submitted vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub phase: GapPhase,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMarker {
    pub learned: usize,
    pub tau: f64,
    /// In the attack phase: whether the defender's answer was wrong.
    pub fooled: Option<bool>,
}

pub struct GapNormAttack {
    cfg: GapNormConfig,
    rng: ChaCha8Rng,
    learned: Vec<DVector<f64>>,
    tau: f64,
    phase: GapPhase,
    remaining: usize,
    pilot_positive: usize,
    gram: DMatrix<f64>,
    positives: usize,
    escalations: usize,
    attack_rounds: usize,
    mistakes: usize,
    last_fooled: Option<bool>,
    last_was_big: bool,
    submitted_phase: GapPhase,
}

impl GapNormAttack {
    pub fn new(cfg: GapNormConfig, seed: u64) -> Result<Self, GameError> {
        cfg.validate()?;
        let (phase, remaining) =
            if cfg.learning_rounds == 0 { (GapPhase::Attacking, cfg.attack_rounds) } else { (GapPhase::Pilot, cfg.pilot) };
        Ok(Self {
            cfg,
            rng: rng_from(seed),
            learned: Vec::new(),
            tau: 1.0 / (cfg.n as f64).sqrt(),
            phase,
            remaining,
            pilot_positive: 0,
            gram: DMatrix::zeros(cfg.n, cfg.n),
            positives: 0,
            escalations: 0,
            attack_rounds: 0,
            mistakes: 0,
            last_fooled: None,
            last_was_big: false,
            submitted_phase: phase,
        })
    }

    pub fn learned(&self) -> &[DVector<f64>] {
        &self.learned
    }

    pub fn phase(&self) -> GapPhase {
        self.phase
    }

    pub fn escalations(&self) -> usize {
        self.escalations
    }

    pub fn attack_rounds(&self) -> usize {
        self.attack_rounds
    }

    pub fn mistakes(&self) -> usize {
        self.mistakes
    }

    fn gaussian(&mut self, scale: f64) -> DVector<f64> {
        let n = self.cfg.n;
        let rng = &mut self.rng;
        DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
    }

    fn project_out(&self, x: &mut DVector<f64>) {
        for v in &self.learned {
            let c = v.dot(x);
            x.axpy(-c, v, 1.0);
        }
    }

    fn finish_learning_round(&mut self) {
        if self.positives == 0 && self.escalations < MAX_ESCALATIONS {
            self.tau *= self.cfg.tau_factor;
            self.escalations += 1;
            self.phase = GapPhase::Pilot;
            self.remaining = self.cfg.pilot;
            self.pilot_positive = 0;
            return;
        }
        let mut start = self.gaussian(1.0);
        self.project_out(&mut start);
        let mut v = top_eigenvector(&self.gram, start);
        // re-orthonormalize against earlier directions (twice for stability)
        self.project_out(&mut v);
        self.project_out(&mut v);
        v /= v.norm();
        self.learned.push(v);
        self.gram.fill(0.0);
        self.positives = 0;
        self.pilot_positive = 0;
        if self.learned.len() >= self.cfg.learning_rounds {
            self.phase = GapPhase::Attacking;
            self.remaining = self.cfg.attack_rounds;
        } else {
            self.phase = GapPhase::Pilot;
            self.remaining = self.cfg.pilot;
        }
    }
}

/// Power iteration for the top eigenvector of a symmetric PSD matrix.
pub fn top_eigenvector(m: &DMatrix<f64>, start: DVector<f64>) -> DVector<f64> {
    let mut v = start.clone() / start.norm();
    for _ in 0..POWER_ITERATIONS {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        let w = w / norm;
        let change = (&w - &v).norm();
        v = w;
        if change < POWER_TOLERANCE {
            break;
        }
    }
    v
}

impl Adversary for GapNormAttack {
    type Item = DVector<f64>;
    type Response = bool;
    type Record = GapRecord;
    type Marker = GapMarker;

    fn name(&self) -> String {
        format!("gapnorm-learner:m_probe={}", self.cfg.m_probe)
    }

    fn submit(&mut self) -> Option<DVector<f64>> {
        self.submitted_phase = self.phase;
        match self.phase {
            GapPhase::Pilot | GapPhase::Learning => {
                let mut x = self.gaussian(self.tau);
                self.project_out(&mut x);
                Some(x)
            }
            GapPhase::Attacking => {
                if self.remaining == 0 {
                    return None;
                }
                self.last_was_big = self.rng.random_bool(0.5);
                if !self.last_was_big {
                    return Some(DVector::zeros(self.cfg.n));
                }
                loop {
                    let mut x = self.gaussian(1.0);
                    self.project_out(&mut x);
                    self.project_out(&mut x);
                    let norm = x.norm();
                    if norm > 1e-12 {
                        return Some(x * (self.cfg.gap / norm));
                    }
                }
            }
        }
    }

    fn observe(&mut self, x: &DVector<f64>, positive: &bool) {
        self.last_fooled = None;
        match self.phase {
            GapPhase::Pilot => {
                self.pilot_positive += *positive as usize;
                self.remaining -= 1;
                if self.remaining == 0 {
                    let rate = self.pilot_positive as f64 / self.cfg.pilot as f64;
                    self.pilot_positive = 0;
                    if rate < self.cfg.min_positive_rate && self.escalations < MAX_ESCALATIONS {
                        self.tau *= self.cfg.tau_factor;
                        self.escalations += 1;
                        self.remaining = self.cfg.pilot;
                    } else {
                        self.phase = GapPhase::Learning;
                        self.remaining = self.cfg.m_probe;
                    }
                }
            }
            GapPhase::Learning => {
                if *positive {
                    self.gram.ger(1.0, x, x, 1.0);
                    self.positives += 1;
                }
                self.remaining -= 1;
                if self.remaining == 0 {
                    self.finish_learning_round();
                }
            }
            GapPhase::Attacking => {
                // the correct answer is 1 for the norm-B vector, 0 for zero
                let fooled = *positive != self.last_was_big;
                self.attack_rounds += 1;
                self.mistakes += fooled as usize;
                self.last_fooled = Some(fooled);
                self.remaining -= 1;
            }
        }
    }

    fn record(&self, x: &DVector<f64>) -> GapRecord {
        GapRecord { phase: self.submitted_phase, norm: x.norm() }
    }

    fn marker(&self) -> GapMarker {
        GapMarker { learned: self.learned.len(), tau: self.tau, fooled: self.last_fooled }
    }
}

pub type GapNormTranscript = GameTranscript<GapRecord, bool, GapMarker>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapNormOutcome {
    pub fooling_rate: f64,
    pub attack_rounds: usize,
    pub mistakes: usize,
    /// `‖A v_1‖` for the first learned vector.
    pub first_capture: f64,
    /// Capture after each learning round.
    pub capture_by_round: Vec<f64>,
    /// Largest `|⟨v_i, v_j⟩ − δ_ij|` over learned vectors.
    pub orthonormality_error: f64,
    pub escalations: usize,
    pub probes: usize,
}

/// Runs the attack against a fresh defender; defender and adversary seeds
/// are derived from `seed`.
pub fn run_gapnorm_attack(cfg: GapNormConfig, seed: u64) -> Result<(GapNormTranscript, GapNormOutcome), GameError> {
    let mut def = GapNormDefender::new(cfg.r, cfg.n, cfg.gap, sub_seed(seed, 1))?;
    run_gapnorm_against(cfg, &mut def, seed)
}

pub fn run_gapnorm_against(
    cfg: GapNormConfig,
    def: &mut GapNormDefender,
    seed: u64,
) -> Result<(GapNormTranscript, GapNormOutcome), GameError> {
    let mut adv = GapNormAttack::new(cfg, sub_seed(seed, 2))?;
    // the learning phase length depends on how often the scale escalates
    let tr = play_game(&mut adv, def, usize::MAX, seed)?;
    let learned = adv.learned();
    let capture_by_round = (1..=learned.len()).map(|j| def.capture(&learned[..j])).collect();
    let first_capture = learned.first().map_or(0.0, |v| (def.rows() * v).norm());
    let mut ortho = 0.0f64;
    for (i, vi) in learned.iter().enumerate() {
        for (j, vj) in learned.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((vi.dot(vj) - target).abs());
        }
    }
    let probes = tr.rounds.len() - adv.attack_rounds();
    let outcome = GapNormOutcome {
        fooling_rate: if adv.attack_rounds() == 0 { 0.0 } else { adv.mistakes() as f64 / adv.attack_rounds() as f64 },
        attack_rounds: adv.attack_rounds(),
        mistakes: adv.mistakes(),
        first_capture,
        capture_by_round,
        orthonormality_error: ortho,
        escalations: adv.escalations(),
        probes,
    };
    Ok((tr, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_defender(r: usize, n: usize, gap: f64) -> GapNormDefender {
        GapNormDefender::from_rows(DMatrix::from_fn(r, n, |i, j| if i == j { 1.0 } else { 0.0 }), gap)
    }

    #[test]
    fn defender_rows_orthonormal() {
        let d = GapNormDefender::new(5, 40, 2.0, 3).unwrap();
        let aat = d.rows() * d.rows().transpose();
        assert!((aat - DMatrix::identity(5, 5)).amax() < 1e-12);
        assert!(GapNormDefender::new(5, 5, 2.0, 3).is_err());
    }

    #[test]
    fn defender_basic_answers() {
        let d = GapNormDefender::new(5, 100, 2.0, 8).unwrap();
        assert!(!d.answer(&DVector::zeros(100)));
        let row: DVector<f64> = d.rows().row(2).transpose() * 2.0;
        assert!(d.answer(&row));
        // a kernel vector of norm B is missed
        let mut k = DVector::from_fn(100, |i, _| ((i * 7919) % 13) as f64 - 6.0);
        for i in 0..5 {
            let r: DVector<f64> = d.rows().row(i).transpose();
            let c = r.dot(&k);
            k.axpy(-c, &r, 1.0);
        }
        k *= 2.0 / k.norm();
        assert!(!d.answer(&k));
    }

    #[test]
    fn power_iteration_finds_dominant_direction() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 2.0]));
        let v = top_eigenvector(&m, DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert!((v[1].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_sketch_is_fooled_by_every_big_vector() {
        let mut cfg = GapNormConfig::new(20, 0, 2.0);
        cfg.attack_rounds = 400;
        let (_, out) = run_gapnorm_attack(cfg, 4).unwrap();
        assert_eq!(out.attack_rounds, 400);
        assert!((out.fooling_rate - 0.5).abs() < 0.1, "{}", out.fooling_rate);
    }

    #[test]
    fn learned_vectors_are_orthonormal_and_capture_grows() {
        let mut cfg = GapNormConfig::new(30, 3, 2.0);
        cfg.m_probe = 2000;
        cfg.attack_rounds = 20;
        let (tr, out) = run_gapnorm_attack(cfg, 11).unwrap();
        assert!(out.orthonormality_error < 1e-9);
        assert_eq!(out.capture_by_round.len(), 3);
        assert!(out.capture_by_round.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        assert_eq!(tr.rounds.len(), out.probes + out.attack_rounds);
    }

    #[test]
    fn basis_rows_learned_after_one_round() {
        let mut cfg = GapNormConfig::new(40, 1, 2.0);
        cfg.attack_rounds = 1;
        let mut def = basis_defender(4, 40, 2.0);
        let (_, out) = run_gapnorm_against(cfg, &mut def, 5).unwrap();
        assert!(out.first_capture > 0.9, "{}", out.first_capture);
    }

    #[test]
    fn attack_is_deterministic() {
        let mut cfg = GapNormConfig::new(20, 2, 2.0);
        cfg.m_probe = 500;
        cfg.attack_rounds = 10;
        let a = run_gapnorm_attack(cfg, 2).unwrap();
        let b = run_gapnorm_attack(cfg, 2).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
