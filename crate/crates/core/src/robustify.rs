//! Sketch switching: publishes a lazily updated estimate backed by a pool of
//! independent static copies, moving to a fresh copy each time the published
//! value drifts out of the `(1 ± eps/2)` window of the active copy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{ceil_tol, within_window};
use crate::seed::sub_seed;
use crate::sketches::{ExactTracker, KmvSketch, SketchError, StreamEstimator};
use crate::stream::{flip_number_bound, Query, StreamError, StreamUpdate};

/// Below this many copies the per-round fan-out stays on the calling thread.
#[cfg(feature = "parallel")]
const PARALLEL_FANOUT_MIN: usize = 1024;

/// Copies for robust distinct elements: `⌈c·ln(1/eps)/eps⌉`.
pub const CYCLIC_COPY_CONSTANT: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stream longer than the configured bound m = {m}")]
    StreamTooLong { m: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub eps: f64,
    pub delta: f64,
    /// Stream-length bound.
    pub m: u64,
    /// Universe size.
    pub n: u64,
    pub query: Query,
    pub lambda_override: Option<usize>,
    pub seed: u64,
}

impl RobustConfig {
    pub fn new(query: Query, eps: f64, delta: f64, n: u64, m: u64, seed: u64) -> Self {
        Self { eps, delta, m, n, query, lambda_override: None, seed }
    }

    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda_override = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<(), RobustError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(RobustError::Config(format!("eps = {} must lie in (0,1)", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(RobustError::Config(format!("delta = {} must lie in (0,1)", self.delta)));
        }
        if self.m == 0 || self.n == 0 {
            return Err(RobustError::Config("m and n must be at least 1".into()));
        }
        if self.lambda_override == Some(0) {
            return Err(RobustError::Config("lambda override must be at least 1".into()));
        }
        Ok(())
    }

    /// `λ_{eps/8, m}(g)` from the flip-number bound, or the override.
    pub fn lambda(&self) -> Result<usize, RobustError> {
        if let Some(l) = self.lambda_override {
            return Ok(l);
        }
        Ok(flip_number_bound(self.query, self.eps / 8.0, self.n as f64, self.m as f64)? as usize)
    }

    /// Per-copy failure probability `delta / λ`.
    pub fn copy_delta(&self) -> Result<f64, RobustError> {
        Ok(self.delta / self.lambda()? as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchStep {
    pub published: f64,
    /// Estimate of the copy that was read this round.
    pub read_estimate: f64,
    /// 1-based copy that was read.
    pub read_copy: usize,
    pub flipped: bool,
}

#[derive(Debug, Clone)]
pub struct SketchSwitcher<E> {
    copies: Vec<E>,
    rho: usize,
    g_hat: f64,
    eps: f64,
    delta: f64,
    m: u64,
    n: u64,
    cyclic: bool,
    insertion_only: bool,
    switch_count: usize,
    exhausted: bool,
    t: u64,
    last: Option<SwitchStep>,
}

impl<E: StreamEstimator + Send> SketchSwitcher<E> {
    /// Builds `λ` copies with `factory(copy_index, copy_seed)`.
    pub fn new<F, Err>(cfg: &RobustConfig, mut factory: F) -> Result<Self, RobustError>
    where
        F: FnMut(usize, u64) -> Result<E, Err>,
        RobustError: From<Err>,
    {
        cfg.validate()?;
        let lambda = cfg.lambda()?;
        let copies = (0..lambda).map(|i| factory(i, sub_seed(cfg.seed, i as u64))).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_copies(cfg, copies, false))
    }

    pub fn from_copies(cfg: &RobustConfig, copies: Vec<E>, cyclic: bool) -> Self {
        assert!(!copies.is_empty(), "switcher needs at least one copy");
        Self {
            copies,
            rho: 1,
            g_hat: cfg.query.at_zero(),
            eps: cfg.eps,
            delta: cfg.delta,
            m: cfg.m,
            n: cfg.n,
            cyclic,
            insertion_only: false,
            switch_count: 0,
            exhausted: false,
            t: 0,
            last: None,
        }
    }

    pub fn set_cyclic(mut self, cyclic: bool) -> Self {
        self.cyclic = cyclic;
        self
    }

    /// Rejects negative deltas from now on.
    pub fn insertion_only(mut self) -> Self {
        self.insertion_only = true;
        self
    }

    pub fn lambda(&self) -> usize {
        self.copies.len()
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn output(&self) -> f64 {
        self.g_hat
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn switch_count(&self) -> usize {
        self.switch_count
    }

    /// Set once a non-cyclic switcher ran past its last copy.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn copies(&self) -> &[E] {
        &self.copies
    }

    pub fn last_step(&self) -> Option<SwitchStep> {
        self.last
    }

    fn fan_out(&mut self, u: StreamUpdate) {
        #[cfg(feature = "parallel")]
        if self.copies.len() >= PARALLEL_FANOUT_MIN && rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            self.copies.par_iter_mut().for_each(|c| c.update(u));
            return;
        }
        for c in &mut self.copies {
            c.update(u);
        }
    }

    pub fn process(&mut self, u: StreamUpdate) -> Result<f64, RobustError> {
        if self.t >= self.m {
            return Err(RobustError::StreamTooLong { m: self.m });
        }
        if u.index == 0 || u.index > self.n {
            return Err(StreamError::IndexOutOfRange { index: u.index, n: self.n }.into());
        }
        if self.insertion_only && u.delta < 0 {
            return Err(StreamError::InsertionOnlyViolation { index: u.index, delta: u.delta }.into());
        }
        self.t += 1;
        self.fan_out(u);
        let read_copy = self.rho;
        let y = self.copies[read_copy - 1].estimate();
        let flipped = !within_window(self.g_hat, y, self.eps / 2.0);
        if flipped {
            self.g_hat = y;
            self.switch_count += 1;
            if self.rho < self.copies.len() {
                self.rho += 1;
            } else if self.cyclic {
                self.rho = 1;
            } else {
                self.exhausted = true;
            }
        }
        self.last = Some(SwitchStep { published: self.g_hat, read_estimate: y, read_copy, flipped });
        Ok(self.g_hat)
    }
}

/// Switcher over zero-error copies.
pub fn oracle_switcher(cfg: &RobustConfig) -> Result<SketchSwitcher<ExactTracker>, RobustError> {
    let q = cfg.query;
    SketchSwitcher::new(cfg, |_, _| Ok::<_, RobustError>(ExactTracker::new(q)))
}

/// Copy count `⌈c·ln(1/eps)/eps⌉` used with cyclic reuse.
pub fn cyclic_copy_count(eps: f64) -> Result<usize, RobustError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RobustError::Config(format!("eps = {eps} must lie in (0,1)")));
    }
    Ok((ceil_tol(CYCLIC_COPY_CONSTANT * (1.0 / eps).ln() / eps) as usize).max(1))
}

/// Robust distinct elements: cyclic switcher over KMV copies of capacity `k`,
/// insertion-only. `cfg.lambda_override` replaces the cyclic copy count.
pub fn robust_distinct_elements(cfg: &RobustConfig, k: usize) -> Result<SketchSwitcher<KmvSketch>, RobustError> {
    if !matches!(cfg.query, Query::F0) && cfg.query.exponent() != 0.0 {
        return Err(RobustError::Config(format!("distinct elements needs the F0 query, got {}", cfg.query)));
    }
    cfg.validate()?;
    let copies = match cfg.lambda_override {
        Some(l) => l,
        None => cyclic_copy_count(cfg.eps)?,
    };
    let kmv = (0..copies).map(|i| KmvSketch::new(k, sub_seed(cfg.seed, i as u64))).collect::<Result<Vec<_>, _>>()?;
    Ok(SketchSwitcher::from_copies(cfg, kmv, true).insertion_only())
}

/// One row of a switcher run report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub truth: Option<f64>,
    pub published: f64,
    pub rho: usize,
    pub flipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<RoundRecord>,
    pub exhausted: bool,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn published(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.published).collect()
    }

    pub fn truths(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.truth).collect()
    }

    /// Number of distinct consecutive published values, counting `g(0)`.
    pub fn distinct_outputs(&self, initial: f64) -> usize {
        let mut prev = initial;
        let mut n = 1;
        for r in &self.records {
            if r.published != prev {
                n += 1;
                prev = r.published;
            }
        }
        n
    }
}

/// Feeds `updates` through the switcher, recording the exact `truth` query
/// value when one is given.
pub fn run_switcher<E: StreamEstimator + Send>(
    sw: &mut SketchSwitcher<E>,
    updates: &[StreamUpdate],
    truth: Option<Query>,
) -> Result<RunReport, RobustError> {
    let mut oracle = truth.map(ExactTracker::new);
    let mut report = RunReport::default();
    for &u in updates {
        let published = sw.process(u)?;
        let truth = oracle.as_mut().map(|o| {
            o.update(u);
            o.estimate()
        });
        let step = sw.last_step().expect("processed at least one update");
        report.records.push(RoundRecord { t: sw.rounds(), truth, published, rho: sw.rho(), flipped: step.flipped });
    }
    report.exhausted = sw.exhausted();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f0_cfg(eps: f64, n: u64, m: u64) -> RobustConfig {
        RobustConfig::new(Query::F0, eps, 0.1, n, m, 1)
    }

    #[test]
    fn lambda_from_flip_bound() {
        let cfg = f0_cfg(0.8, 1024, 1_000_000);
        assert_eq!(cfg.lambda().unwrap(), 1106);
    }

    #[test]
    fn fresh_output_is_g_of_zero() {
        let sw = oracle_switcher(&f0_cfg(0.5, 10, 100)).unwrap();
        assert_eq!(sw.output(), 0.0);
        assert_eq!(sw.rho(), 1);
    }

    #[test]
    fn override_fixes_copy_count() {
        let sw = oracle_switcher(&f0_cfg(0.5, 10, 100).with_lambda(5)).unwrap();
        assert_eq!(sw.lambda(), 5);
    }

    #[test]
    fn empty_stream_keeps_output() {
        let mut sw = oracle_switcher(&f0_cfg(0.5, 10, 100)).unwrap();
        let rep = run_switcher(&mut sw, &[], Some(Query::F0)).unwrap();
        assert!(rep.records.is_empty());
        assert_eq!(sw.output(), 0.0);
    }

    #[test]
    fn first_insertion_forces_flip() {
        let mut sw = oracle_switcher(&f0_cfg(0.5, 10, 100)).unwrap();
        assert_eq!(sw.process(StreamUpdate::insert(3)).unwrap(), 1.0);
        assert_eq!(sw.switch_count(), 1);
        assert_eq!(sw.rho(), 2);
    }

    /// Repeated insertions of one index under F2 (truth t² at time t): every
    /// output change is forced by the truth leaving the 1.25 window.
    #[test]
    fn oracle_changes_follow_window_exits() {
        let m = 1000u64;
        let cfg = RobustConfig::new(Query::F2, 0.5, 0.1, 1, m, 7);
        let mut sw = oracle_switcher(&cfg).unwrap();
        let ups = vec![StreamUpdate::insert(1); m as usize];
        let rep = run_switcher(&mut sw, &ups, Some(Query::F2)).unwrap();
        let mut published = 0.0;
        for r in &rep.records {
            let truth = r.truth.unwrap();
            let should_flip = !within_window(published, truth, 0.25);
            assert_eq!(r.flipped, should_flip, "t = {}", r.t);
            if r.flipped {
                published = truth;
            }
        }
        let cap = ((m * m) as f64).ln() / 1.25f64.ln();
        assert!(sw.switch_count() as f64 <= cap.ceil() + 1.0);
    }

    #[test]
    fn non_cyclic_exhaustion_is_flagged() {
        let mut sw = oracle_switcher(&f0_cfg(0.5, 100, 100).with_lambda(2)).unwrap();
        for i in 1..=10 {
            sw.process(StreamUpdate::insert(i)).unwrap();
        }
        assert!(sw.exhausted());
        assert_eq!(sw.rho(), 2);
    }

    #[test]
    fn cyclic_wraps() {
        let cfg = f0_cfg(0.5, 100, 100).with_lambda(2);
        let copies = vec![ExactTracker::new(Query::F0), ExactTracker::new(Query::F0)];
        let mut sw = SketchSwitcher::from_copies(&cfg, copies, true);
        sw.process(StreamUpdate::insert(1)).unwrap();
        sw.process(StreamUpdate::insert(2)).unwrap();
        assert_eq!(sw.rho(), 1);
        assert!(!sw.exhausted());
    }

    #[test]
    fn too_long_stream_errors() {
        let mut sw = oracle_switcher(&f0_cfg(0.5, 10, 2)).unwrap();
        sw.process(StreamUpdate::insert(1)).unwrap();
        sw.process(StreamUpdate::insert(1)).unwrap();
        assert!(matches!(sw.process(StreamUpdate::insert(1)), Err(RobustError::StreamTooLong { .. })));
    }

    #[test]
    fn cyclic_copy_count_example() {
        assert_eq!(cyclic_copy_count(0.5).unwrap(), 12);
    }

    #[test]
    fn robust_de_rejects_deletions() {
        let mut sw = robust_distinct_elements(&f0_cfg(0.5, 100, 100), 16).unwrap();
        sw.process(StreamUpdate::insert(4)).unwrap();
        assert!(sw.process(StreamUpdate::new(4, -1)).is_err());
    }

    #[test]
    fn robust_de_exact_below_capacity() {
        let eps = 0.5;
        let mut sw = robust_distinct_elements(&f0_cfg(eps, 1000, 1000), 64).unwrap();
        for d in 1..=64u64 {
            let out = sw.process(StreamUpdate::insert(d * 13)).unwrap();
            assert!(within_window(out, d as f64, eps), "d = {d}, out = {out}");
        }
    }

    #[test]
    fn robust_de_duplicates_hold_output() {
        let mut sw = robust_distinct_elements(&f0_cfg(0.5, 10, 100), 16).unwrap();
        for _ in 0..50 {
            assert_eq!(sw.process(StreamUpdate::insert(7)).unwrap(), 1.0);
        }
        assert_eq!(sw.switch_count(), 1);
    }

    #[test]
    fn report_emitters() {
        let mut sw = oracle_switcher(&f0_cfg(0.5, 10, 100)).unwrap();
        let rep = run_switcher(&mut sw, &[StreamUpdate::insert(1), StreamUpdate::insert(2)], Some(Query::F0)).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("t,truth,published,rho,flipped\n"));
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(rep.to_jsonl().lines().count(), 2);
        let back: RunReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.distinct_outputs(0.0), 3);
    }
}
