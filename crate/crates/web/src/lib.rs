//! wasm-bindgen entry points for the static demo in `www/`.
//!
//! Each function returns a JSON string the page draws on a canvas.

use advstream::adversary::interval::{run_interval_attack, ExhaustionPolicy};
use advstream::learnability::discrepancy::random_painter_bound;
use advstream::learnability::{estimate_sequential_rademacher, ItemStrategy, PainterStrategy};
use advstream::robustify::{robust_distinct_elements, run_switcher, RobustConfig};
use advstream::samplers::FiniteSetSystem;
use advstream::seed::rng_from;
use advstream::stream::{Query, StreamUpdate};
use rand::Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct SwitchTrace {
    lambda: usize,
    switches: usize,
    t: Vec<u64>,
    truth: Vec<f64>,
    published: Vec<f64>,
    rho: Vec<usize>,
}

/// Robust distinct elements on a uniform insertion stream over `[1, universe]`.
pub fn switching_trace_json(
    eps: f64,
    k: usize,
    length: u64,
    universe: u64,
    seed: u64,
) -> Result<String, String> {
    if length == 0 || length > 200_000 || universe == 0 {
        return Err(format!(
            "length = {length} must lie in [1, 200000], universe = {universe} positive"
        ));
    }
    let cfg = RobustConfig::new(Query::F0, eps, 0.1, universe, length, seed);
    let mut sw = robust_distinct_elements(&cfg, k).map_err(|e| e.to_string())?;
    let mut rng = rng_from(seed ^ 0x5eed);
    let updates: Vec<StreamUpdate> = (0..length)
        .map(|_| StreamUpdate::insert(rng.random_range(1..=universe)))
        .collect();
    let report = run_switcher(&mut sw, &updates, Some(Query::F0)).map_err(|e| e.to_string())?;
    let r = &report.records;
    let trace = SwitchTrace {
        lambda: sw.lambda(),
        switches: sw.switch_count(),
        t: r.iter().map(|x| x.t).collect(),
        truth: r.iter().map(|x| x.truth.unwrap_or(f64::NAN)).collect(),
        published: r.iter().map(|x| x.published).collect(),
        rho: r.iter().map(|x| x.rho).collect(),
    };
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct IntervalTrace {
    x: Vec<u64>,
    accepted: Vec<bool>,
    a: Vec<u64>,
    b: Vec<u64>,
    error: Option<f64>,
    sample_size: usize,
    stream_len: usize,
    exhausted_at: Option<u64>,
}

/// Interval attack against `Bernoulli(p)` over the prefix system on `[1, universe]`.
pub fn interval_attack_json(
    n: u64,
    p: f64,
    universe: u64,
    pad: bool,
    seed: u64,
) -> Result<String, String> {
    if n > 100_000 {
        return Err(format!("n = {n} exceeds 100000"));
    }
    let policy = if pad {
        ExhaustionPolicy::Pad
    } else {
        ExhaustionPolicy::Truncate
    };
    let (tr, out) = run_interval_attack(n, p, universe, policy, seed).map_err(|e| e.to_string())?;
    let trace = IntervalTrace {
        x: tr.rounds.iter().map(|r| r.submission).collect(),
        accepted: tr.rounds.iter().map(|r| r.response).collect(),
        a: tr.rounds.iter().map(|r| r.marker.a).collect(),
        b: tr.rounds.iter().map(|r| r.marker.b).collect(),
        error: out.error,
        sample_size: out.sample_size,
        stream_len: out.stream_len,
        exhausted_at: out.exhausted_at,
    };
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DiscHistogram {
    mean: f64,
    std_error: f64,
    bound: f64,
    histogram: Vec<(u64, usize)>,
}

/// Final-disc histogram of the online discrepancy game on `prefix:universe`.
pub fn disc_histogram_json(
    universe: u64,
    rounds: usize,
    trials: u64,
    painter: &str,
    items: &str,
    seed: u64,
) -> Result<String, String> {
    if trials > 20_000 || rounds > 20_000 {
        return Err("at most 20000 rounds and 20000 trials".into());
    }
    let painter = painter
        .parse::<PainterStrategy>()
        .map_err(|e| e.to_string())?;
    let items = items.parse::<ItemStrategy>().map_err(|e| e.to_string())?;
    let sys = FiniteSetSystem::prefix(universe).map_err(|e| e.to_string())?;
    let est = estimate_sequential_rademacher(&sys, rounds, trials, painter, &items, seed)
        .map_err(|e| e.to_string())?;
    let h = DiscHistogram {
        mean: est.mean,
        std_error: est.std_error,
        bound: random_painter_bound(rounds, sys.range_count()),
        histogram: est.histogram(),
    };
    serde_json::to_string(&h).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = switchingTrace)]
pub fn switching_trace(
    eps: f64,
    k: usize,
    length: u32,
    universe: u32,
    seed: u32,
) -> Result<String, JsError> {
    switching_trace_json(eps, k, length.into(), universe.into(), seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = intervalAttack)]
pub fn interval_attack(
    n: u32,
    p: f64,
    universe: f64,
    pad: bool,
    seed: u32,
) -> Result<String, JsError> {
    interval_attack_json(n.into(), p, universe as u64, pad, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = discHistogram)]
pub fn disc_histogram(
    universe: u32,
    rounds: u32,
    trials: u32,
    painter: &str,
    items: &str,
    seed: u32,
) -> Result<String, JsError> {
    disc_histogram_json(
        universe.into(),
        rounds as usize,
        trials.into(),
        painter,
        items,
        seed.into(),
    )
    .map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switching_trace_tracks_truth() {
        let s = switching_trace_json(0.3, 256, 2000, 5000, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["lambda"], 33);
        let truth = v["truth"].as_array().unwrap();
        let publ = v["published"].as_array().unwrap();
        assert_eq!(truth.len(), 2000);
        let (t, g) = (truth[1999].as_f64().unwrap(), publ[1999].as_f64().unwrap());
        assert!((g - t).abs() <= 0.3 * t, "{g} vs {t}");
    }

    #[test]
    fn interval_attack_separates_sample() {
        let s = interval_attack_json(500, 0.01, 1 << 40, false, 3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["error"].as_f64().unwrap() >= 0.5);
        assert_eq!(
            v["x"].as_array().unwrap().len(),
            v["stream_len"].as_u64().unwrap() as usize
        );
    }

    #[test]
    fn disc_histogram_counts_trials() {
        let s = disc_histogram_json(16, 20, 40, "greedy", "uniform", 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let total: u64 = v["histogram"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p[1].as_u64().unwrap())
            .sum();
        assert_eq!(total, 40);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(disc_histogram_json(16, 21, 4, "random", "uniform", 0).is_err());
        assert!(disc_histogram_json(16, 20, 4, "psychic", "uniform", 0).is_err());
        assert!(interval_attack_json(0, 0.1, 100, false, 0).is_err());
        assert!(switching_trace_json(1.5, 16, 10, 10, 0).is_err());
    }
}
