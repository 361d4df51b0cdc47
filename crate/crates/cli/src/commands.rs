use std::path::Path;

use advstream::adversary::gapnorm::{run_gapnorm_attack, GapNormConfig};
use advstream::adversary::interval::{run_interval_attack, ExhaustionPolicy};
use advstream::adversary::kmv_attack::{run_kmv_attack, KmvTarget};
use advstream::adversary::{Defender, EstimatorDefender, SamplerDefender, TranscriptHeader};
use advstream::learnability::discrepancy::{ldim_rate_bound, random_painter_bound};
use advstream::learnability::{
    estimate_sequential_rademacher, littlestone_dimension, vc_dimension, DimensionReport,
};
use advstream::robustify::{
    oracle_switcher, robust_distinct_elements, run_switcher, RobustConfig, SketchSwitcher,
};
use advstream::samplers::{epsilon_approx_error, robust_sample_rate, FiniteSetSystem, SamplerKind, SamplerState};
use advstream::seed::{map_trials, rng_from, sub_seed};
use advstream::sketches::{AmsSketch, KmvSketch, StreamEstimator};
use advstream::stream::{
    flip_number, flip_number_bound, parse_stream, query_trace, FrequencyVector, Query, StreamModel, StreamUpdate,
};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::output;
use crate::{
    AttackGapnormArgs, AttackIntervalArgs, AttackKmvArgs, Cli, CliError, Command, CopyKind, DimsArgs, DiscArgs,
    FlipsArgs, KmvTargetArg, Policy, ReplayArgs, RobustifyArgs, SampleArgs, SketchArgs, SketchKind,
};

pub fn run(cli: &Cli) -> Result<String, CliError> {
    if cli.trials == 0 {
        return Err(CliError::Config("trials: must be at least 1".into()));
    }
    match &cli.command {
        Command::Sketch(a) => sketch(cli, a),
        Command::Robustify(a) => robustify(cli, a),
        Command::Flips(a) => flips(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::AttackInterval(a) => attack_interval(cli, a),
        Command::AttackGapnorm(a) => attack_gapnorm(cli, a),
        Command::AttackKmv(a) => attack_kmv(cli, a),
        Command::Dims(a) => dims(cli, a),
        Command::Disc(a) => disc(cli, a),
        Command::Replay(a) => replay(a),
    }
}

fn collect<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

fn read_stream(path: &Path) -> Result<Vec<StreamUpdate>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("stream: {}: {e}", path.display())))?;
    Ok(parse_stream(&text)?)
}

fn random_insertions(seed: u64, universe: u64, length: u64) -> Vec<StreamUpdate> {
    let mut rng = rng_from(seed);
    (0..length).map(|_| StreamUpdate::insert(rng.random_range(1..=universe))).collect()
}

fn load_system(spec: &str) -> Result<FiniteSetSystem, CliError> {
    let path = Path::new(spec);
    if !spec.starts_with("prefix:") && path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(FiniteSetSystem::parse(&text)?);
    }
    FiniteSetSystem::from_spec(spec).map_err(|e| CliError::Config(format!("system: {e}")))
}

fn fraction(n: usize, of: usize) -> f64 {
    n as f64 / of as f64
}

#[derive(Serialize)]
struct SketchRecord {
    trial: u64,
    seed: u64,
    truth: f64,
    estimate: f64,
    rel_error: f64,
    failed: bool,
}

fn sketch(cli: &Cli, a: &SketchArgs) -> Result<String, CliError> {
    let fixed = a.stream.as_deref().map(read_stream).transpose()?;
    let universe = match &fixed {
        Some(s) => s.iter().map(|u| u.index).max().unwrap_or(1).max(a.universe),
        None => a.universe,
    };
    let recs = collect(map_trials(cli.seed, cli.trials, |trial, seed| {
        let updates = match &fixed {
            Some(s) => s.clone(),
            None => random_insertions(sub_seed(seed, 3), universe, a.length as u64),
        };
        let model = StreamModel::turnstile(universe, updates.len().max(1) as u64, u64::MAX);
        let f = FrequencyVector::replay(&model, &updates)?;
        let (truth, estimate) = match a.kind {
            SketchKind::Ams => {
                let mut sk = AmsSketch::new(a.eps, a.delta, sub_seed(seed, 4))?;
                sk.absorb(&f);
                (Query::F2.evaluate(&f), sk.estimate())
            }
            SketchKind::Kmv => {
                let mut sk = KmvSketch::new(a.k, sub_seed(seed, 4))?;
                for u in &updates {
                    sk.update(*u);
                }
                (Query::F0.evaluate(&f), sk.estimate())
            }
        };
        let rel_error = if truth == 0.0 { estimate.abs() } else { (estimate - truth).abs() / truth };
        Ok(SketchRecord { trial, seed, truth, estimate, rel_error, failed: rel_error > a.eps })
    }))?;
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let failed = recs.iter().filter(|r| r.failed).count();
    Ok(format!(
        "sketch {:?}: failure fraction {:.4} over {} trials (eps {}, delta {})",
        a.kind,
        fraction(failed, recs.len()),
        recs.len(),
        a.eps,
        a.delta
    )
    .to_lowercase())
}

#[derive(Serialize)]
struct RobustRecord {
    trial: u64,
    seed: u64,
    lambda: usize,
    switches: usize,
    output_changes: usize,
    exhausted: bool,
    max_rel_error: f64,
    tracking_ok: bool,
}

fn run_robust<E: StreamEstimator + Send>(
    mut sw: SketchSwitcher<E>,
    updates: &[StreamUpdate],
    a: &RobustifyArgs,
    trial: u64,
    seed: u64,
    trace: bool,
) -> Result<(RobustRecord, Option<String>), CliError> {
    let lambda = sw.lambda();
    let report = run_switcher(&mut sw, updates, Some(a.query))?;
    let mut max_rel = 0.0f64;
    for r in &report.records {
        let t = r.truth.unwrap_or(0.0);
        let err = if t == 0.0 { r.published.abs() } else { (r.published - t).abs() / t };
        max_rel = max_rel.max(err);
    }
    let rec = RobustRecord {
        trial,
        seed,
        lambda,
        switches: sw.switch_count(),
        output_changes: report.distinct_outputs(a.query.at_zero()) - 1,
        exhausted: report.exhausted,
        max_rel_error: max_rel,
        tracking_ok: max_rel <= a.eps,
    };
    let text = trace.then(|| report.to_csv());
    Ok((rec, text))
}

fn robustify(cli: &Cli, a: &RobustifyArgs) -> Result<String, CliError> {
    if a.exhaustive {
        return robustify_exhaustive(a);
    }
    let fixed = a.stream.as_deref().map(read_stream).transpose()?;
    let results = map_trials(cli.seed, cli.trials, |trial, seed| {
        let updates = match &fixed {
            Some(s) => s.clone(),
            None => random_insertions(sub_seed(seed, 3), a.universe, a.length),
        };
        let mut cfg = RobustConfig::new(a.query, a.eps, a.delta, a.universe, a.length, sub_seed(seed, 1));
        if let Some(l) = a.lambda {
            cfg = cfg.with_lambda(l);
        }
        let trace = trial == 0 && a.trace.is_some();
        match a.copies {
            CopyKind::Oracle => run_robust(oracle_switcher(&cfg)?.set_cyclic(a.cyclic), &updates, a, trial, seed, trace),
            CopyKind::Ams => {
                if a.query.exponent() != 2.0 {
                    return Err(CliError::Config(format!("query: AMS copies estimate f2, not {}", a.query)));
                }
                let copy_eps = a.copy_eps.unwrap_or(a.eps / 2.0);
                let copy_delta = cfg.copy_delta()?;
                let sw = SketchSwitcher::new(&cfg, |_, s| AmsSketch::new(copy_eps, copy_delta, s))?;
                run_robust(sw.set_cyclic(a.cyclic), &updates, a, trial, seed, trace)
            }
            CopyKind::Kmv => {
                if a.query.exponent() != 0.0 {
                    return Err(CliError::Config(format!("query: KMV copies estimate f0, not {}", a.query)));
                }
                let sw = if a.cyclic {
                    robust_distinct_elements(&cfg, a.k)?
                } else {
                    SketchSwitcher::new(&cfg, |_, s| KmvSketch::new(a.k, s))?.insertion_only()
                };
                run_robust(sw, &updates, a, trial, seed, trace)
            }
        }
    });
    let mut recs = Vec::new();
    for r in results {
        let (rec, trace) = r?;
        if let (Some(text), Some(path)) = (trace, &a.trace) {
            output::write_text(path, &text)?;
        }
        recs.push(rec);
    }
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let ok = recs.iter().filter(|r| r.tracking_ok).count();
    let summary = format!(
        "robustify {:?}: within eps in {ok}/{} trials, max output changes {}, lambda {}",
        a.copies,
        recs.len(),
        recs.iter().map(|r| r.output_changes).max().unwrap_or(0),
        recs[0].lambda
    )
    .to_lowercase();
    if a.copies == CopyKind::Oracle && ok < recs.len() {
        return Err(CliError::Invariant(format!("oracle copies left the eps window; {summary}")));
    }
    if !a.cyclic {
        if let Some(r) = recs.iter().find(|r| r.output_changes > r.lambda + 1) {
            return Err(CliError::Invariant(format!("trial {}: {} output changes exceed lambda + 1", r.trial, r.output_changes)));
        }
    }
    Ok(summary)
}

fn robustify_exhaustive(a: &RobustifyArgs) -> Result<String, CliError> {
    let total: f64 = (1..=a.length).map(|l| (a.universe as f64).powi(l as i32)).sum();
    if total > 5e7 {
        return Err(CliError::Config(format!("exhaustive: {total:.0} streams is too many")));
    }
    let cfg = RobustConfig::new(a.query, a.eps, a.delta, a.universe, a.length, 0);
    let root = oracle_switcher(&cfg)?.insertion_only();
    let mut prefixes = 0u64;
    let mut violations = 0u64;
    let mut stack = vec![(root, vec![0i64; a.universe as usize])];
    while let Some((sw, counts)) = stack.pop() {
        if sw.rounds() == a.length {
            continue;
        }
        let mut parent = Some(sw);
        for x in 1..=a.universe {
            let mut next = if x == a.universe { parent.take().expect("parent") } else { parent.clone().expect("parent") };
            let mut c = counts.clone();
            c[(x - 1) as usize] += 1;
            let out = next.process(StreamUpdate::insert(x))?;
            let truth = a.query.evaluate_counts(&c);
            if (out - truth).abs() > a.eps * truth.abs() {
                violations += 1;
            }
            prefixes += 1;
            stack.push((next, c));
        }
    }
    let summary = format!("robustify exhaustive: {prefixes} stream prefixes checked, {violations} violations");
    if violations > 0 {
        return Err(CliError::Invariant(summary));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct FlipRecord {
    trial: u64,
    seed: u64,
    flip_number: usize,
    bound: u64,
    within: bool,
}

fn flips(cli: &Cli, a: &FlipsArgs) -> Result<String, CliError> {
    let bound = flip_number_bound(a.query, a.eps, a.universe as f64, a.length as f64)?;
    let model = StreamModel::insertion_only(a.universe, a.length);
    let recs = collect(map_trials(cli.seed, cli.trials, |trial, seed| {
        let updates = random_insertions(seed, a.universe, a.length);
        let trace = query_trace(&model, a.query, &updates)?;
        let f = flip_number(&trace[1..], a.eps);
        Ok(FlipRecord { trial, seed, flip_number: f, bound, within: f as u64 <= bound })
    }))?;
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let within = recs.iter().filter(|r| r.within).count();
    let summary = format!(
        "flips {}: max flip number {}, bound {bound}, within bound in {within}/{}",
        a.query,
        recs.iter().map(|r| r.flip_number).max().unwrap_or(0),
        recs.len()
    );
    if within < recs.len() {
        return Err(CliError::Invariant(summary));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct SampleRecord {
    trial: u64,
    seed: u64,
    sample_size: usize,
    error: Option<f64>,
}

#[derive(Serialize)]
struct PositionCount {
    index: u64,
    count: u64,
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<String, CliError> {
    if a.uniformity {
        return sample_uniformity(cli, a);
    }
    let sys = load_system(&a.system)?;
    let universe = sys.universe_size();
    let recs = collect(map_trials(cli.seed, cli.trials, |trial, seed| {
        let mut rng = rng_from(sub_seed(seed, 3));
        let x: Vec<u64> = (0..a.length).map(|_| rng.random_range(1..=universe)).collect();
        let mut s = SamplerState::new(a.sampler, sub_seed(seed, 1))?;
        for &v in &x {
            s.offer(v);
        }
        let sv = s.sample_values();
        let error = if sv.is_empty() { None } else { Some(epsilon_approx_error(&x, &sv, &sys)?) };
        Ok(SampleRecord { trial, seed, sample_size: sv.len(), error })
    }))?;
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let errs: Vec<f64> = recs.iter().filter_map(|r| r.error).collect();
    let mean = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
    Ok(format!("sample {}: mean error {mean:.4} over {} nonempty samples of {}", a.sampler, errs.len(), recs.len()))
}

fn sample_uniformity(cli: &Cli, a: &SampleArgs) -> Result<String, CliError> {
    let picks = collect(map_trials(cli.seed, cli.trials, |_, seed| {
        let mut s = SamplerState::new(a.sampler, seed)?;
        for v in 1..=a.length {
            s.offer(v);
        }
        Ok(s.sample_indices())
    }))?;
    let mut counts = vec![0u64; a.length as usize];
    let mut total = 0u64;
    for p in picks.iter().flatten() {
        counts[(*p - 1) as usize] += 1;
        total += 1;
    }
    if a.length < 2 || total == 0 {
        return Err(CliError::Config("uniformity needs length >= 2 and a nonempty sample".into()));
    }
    let expect = total as f64 / a.length as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let dof = (a.length - 1) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| CliError::Run(e.to_string()))?;
    let crit = dist.inverse_cdf(0.999);
    let p_value = 1.0 - dist.cdf(chi2);
    let recs: Vec<PositionCount> =
        counts.iter().enumerate().map(|(i, &count)| PositionCount { index: i as u64 + 1, count }).collect();
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let verdict = if chi2 <= crit { "pass" } else { "fail" };
    Ok(format!(
        "sample {} uniformity: chi-square {chi2:.1} on {dof} dof, p-value {p_value:.4}, critical {crit:.1} at 0.001: {verdict}",
        a.sampler
    ))
}

#[derive(Serialize)]
struct IntervalRecord {
    trial: u64,
    seed: u64,
    p: f64,
    stream_len: usize,
    sample_size: usize,
    error: Option<f64>,
    exhausted_at: Option<u64>,
    small_sample: bool,
    wide_window: bool,
    invariant_ok: bool,
    success: bool,
}

fn attack_interval(cli: &Cli, a: &AttackIntervalArgs) -> Result<String, CliError> {
    let p = if a.robust {
        let ranges = a.ranges.unwrap_or(a.universe);
        robust_sample_rate(ranges as f64, a.eps, a.delta, a.n as f64)?
    } else {
        a.p.ok_or_else(|| CliError::Config("p: required without --robust".into()))?
    };
    let threshold = a.threshold.unwrap_or(if a.robust { a.eps } else { 0.5 });
    let policy = match a.policy {
        Policy::Truncate => ExhaustionPolicy::Truncate,
        Policy::Pad => ExhaustionPolicy::Pad,
    };
    let results = map_trials(cli.seed, cli.trials, |trial, seed| {
        let (tr, o) = run_interval_attack(a.n, p, a.universe, policy, seed)?;
        let transcript = (trial == 0).then(|| tr.to_jsonl());
        let rec = IntervalRecord {
            trial,
            seed,
            p,
            stream_len: o.stream_len,
            sample_size: o.sample_size,
            error: o.error,
            exhausted_at: o.exhausted_at,
            small_sample: o.small_sample,
            wide_window: o.wide_window,
            invariant_ok: o.invariant_violation.is_none(),
            // an empty sample misrepresents every nonempty range
            success: o.error.is_none_or(|e| e >= threshold),
        };
        Ok::<_, CliError>((rec, transcript))
    });
    let mut recs = Vec::new();
    for r in results {
        let (rec, tr) = r?;
        if let (Some(text), Some(path)) = (tr, &a.transcript) {
            output::write_text(path, &text)?;
        }
        recs.push(rec);
    }
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let success = recs.iter().filter(|r| r.success).count();
    let summary = format!(
        "attack-interval p={p:.6}: error >= {threshold} in {:.4} of {} trials",
        fraction(success, recs.len()),
        recs.len()
    );
    if let Some(r) = recs.iter().find(|r| !r.invariant_ok) {
        return Err(CliError::Invariant(format!("trial {}: interval invariant broken; {summary}", r.trial)));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct GapRecord {
    trial: u64,
    seed: u64,
    fooling_rate: f64,
    mistakes: usize,
    capture: f64,
    escalations: usize,
    probes: usize,
}

fn attack_gapnorm(cli: &Cli, a: &AttackGapnormArgs) -> Result<String, CliError> {
    let mut cfg = GapNormConfig::new(a.n, a.r, a.gap);
    cfg.attack_rounds = a.attack_rounds;
    if let Some(m) = a.m_probe {
        cfg.m_probe = m;
    }
    let results = map_trials(cli.seed, cli.trials, |trial, seed| {
        let (tr, o) = run_gapnorm_attack(cfg, seed)?;
        let transcript = (trial == 0).then(|| tr.to_jsonl());
        let rec = GapRecord {
            trial,
            seed,
            fooling_rate: o.fooling_rate,
            mistakes: o.mistakes,
            capture: o.capture_by_round.last().copied().unwrap_or(0.0),
            escalations: o.escalations,
            probes: o.probes,
        };
        Ok::<_, CliError>((rec, transcript))
    });
    let mut recs = Vec::new();
    for r in results {
        let (rec, tr) = r?;
        if let (Some(text), Some(path)) = (tr, &a.transcript) {
            output::write_text(path, &text)?;
        }
        recs.push(rec);
    }
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let fooled = recs.iter().filter(|r| r.fooling_rate >= 0.25).count();
    let captured = recs.iter().filter(|r| r.capture >= 0.95).count();
    Ok(format!(
        "attack-gapnorm n={} r={} B={}: fooling rate >= 1/4 in {:.3} of trials, capture >= 0.95 in {:.3}",
        a.n,
        a.r,
        a.gap,
        fraction(fooled, recs.len()),
        fraction(captured, recs.len())
    ))
}

#[derive(Serialize)]
struct KmvRecord {
    trial: u64,
    seed: u64,
    target: &'static str,
    broken: bool,
    max_rel_error: f64,
    first_violation: Option<usize>,
    learned_at: Option<usize>,
}

fn attack_kmv(cli: &Cli, a: &AttackKmvArgs) -> Result<String, CliError> {
    let mut targets = Vec::new();
    if a.target != KmvTargetArg::Switcher {
        targets.push(("single", KmvTarget::Single { k: a.k }));
    }
    if a.target != KmvTargetArg::Single {
        targets.push(("switcher", KmvTarget::Switcher { k: a.k, eps: a.eps, delta: a.delta }));
    }
    let results = map_trials(cli.seed, cli.trials, |trial, seed| {
        let mut out = Vec::new();
        let mut transcript = None;
        for &(name, target) in &targets {
            let (tr, o) = run_kmv_attack(target, a.rounds, a.eps, seed)?;
            if trial == 0 && transcript.is_none() {
                transcript = Some(tr.to_jsonl());
            }
            out.push(KmvRecord {
                trial,
                seed,
                target: name,
                broken: o.first_violation.is_some(),
                max_rel_error: o.max_relative_error,
                first_violation: o.first_violation,
                learned_at: o.learned_at,
            });
        }
        Ok::<_, CliError>((out, transcript))
    });
    let mut recs = Vec::new();
    for r in results {
        let (mut rs, tr) = r?;
        if let (Some(text), Some(path)) = (tr, &a.transcript) {
            output::write_text(path, &text)?;
        }
        recs.append(&mut rs);
    }
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    let parts: Vec<String> = targets
        .iter()
        .map(|(name, _)| {
            let of: Vec<&KmvRecord> = recs.iter().filter(|r| r.target == *name).collect();
            let broken = of.iter().filter(|r| r.broken).count();
            format!("{name} broken in {:.3}", fraction(broken, of.len()))
        })
        .collect();
    Ok(format!("attack-kmv k={} eps={}: {} over {} trials", a.k, a.eps, parts.join(", "), cli.trials))
}

#[derive(Serialize)]
struct RandomDimsRecord {
    trial: u64,
    seed: u64,
    universe: u64,
    ranges: u64,
    vc: u32,
    ldim: i32,
    vc_le_ldim: bool,
}

fn dims(cli: &Cli, a: &DimsArgs) -> Result<String, CliError> {
    if let Some(count) = a.random {
        if a.max_universe == 0 || a.max_ranges == 0 {
            return Err(CliError::Config("max-universe and max-ranges must be positive".into()));
        }
        let recs = collect(map_trials(cli.seed, count, |trial, seed| {
            let mut rng = rng_from(seed);
            let u = rng.random_range(1..=a.max_universe);
            let r = rng.random_range(1..=a.max_ranges);
            let sys = FiniteSetSystem::random(u, r, &mut rng);
            let vc = vc_dimension(&sys)?;
            let ldim = littlestone_dimension(&sys)?;
            Ok(RandomDimsRecord {
                trial,
                seed,
                universe: sys.universe_size(),
                ranges: sys.range_count(),
                vc,
                ldim,
                vc_le_ldim: vc as i32 <= ldim,
            })
        }))?;
        output::write(cli.out.as_deref(), cli.format, &recs)?;
        let ok = recs.iter().filter(|r| r.vc_le_ldim).count();
        let summary = format!("dims random: vc <= ldim on {ok}/{} systems", recs.len());
        if ok < recs.len() {
            return Err(CliError::Invariant(summary));
        }
        return Ok(summary);
    }
    let spec = a.system.as_deref().ok_or_else(|| CliError::Config("system: required".into()))?;
    let sys = load_system(spec)?;
    let report = DimensionReport::compute(&sys, a.tree)?;
    if let Some(tree) = &report.tree {
        if !tree.verify(&sys) {
            return Err(CliError::Invariant("mistake tree failed verification".into()));
        }
    }
    if let Some(path) = &cli.out {
        output::write_text(path, &(report.to_json() + "\n"))?;
    }
    Ok(format!("vc={} ldim={}", report.vc, report.ldim))
}

#[derive(Serialize)]
struct DiscRecord {
    trial: u64,
    disc: u64,
}

fn disc(cli: &Cli, a: &DiscArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let est = estimate_sequential_rademacher(&sys, a.rounds, cli.trials, a.painter, &a.items, cli.seed)?;
    let recs: Vec<DiscRecord> = est.discs.iter().enumerate().map(|(i, &disc)| DiscRecord { trial: i as u64, disc }).collect();
    output::write(cli.out.as_deref(), cli.format, &recs)?;
    if let Some(path) = &a.report {
        output::write_text(path, &(est.to_json() + "\n"))?;
    }
    let hoeffding = random_painter_bound(a.rounds, sys.range_count());
    let mut summary = format!(
        "disc painter={} items={}: mean {:.3} (se {:.3}) over {} trials; sqrt(2T ln 2|R|) = {hoeffding:.2}",
        a.painter, a.items, est.mean, est.std_error, est.trials
    );
    if let Ok(d) = littlestone_dimension(&sys) {
        summary.push_str(&format!(", 4 sqrt(dT) = {:.1}", ldim_rate_bound(4.0, d.max(0) as u32, a.rounds)));
    }
    Ok(summary)
}

fn replay(a: &ReplayArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&a.transcript)
        .map_err(|e| CliError::Config(format!("transcript: {}: {e}", a.transcript.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: TranscriptHeader = serde_json::from_str(
        lines.next().ok_or_else(|| CliError::Config("transcript: empty file".into()))?,
    )
    .map_err(|e| CliError::Config(format!("transcript header: {e}")))?;
    let rounds = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str::<serde_json::Value>(l).map_err(|e| CliError::Config(format!("transcript line {}: {e}", i + 2))))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = a.defender_seed.unwrap_or(header.defender_seed);
    let field = |v: &serde_json::Value, key: &str, t: usize| {
        v.get(key).cloned().ok_or_else(|| CliError::Config(format!("transcript round {t}: missing `{key}`")))
    };
    let mismatch = |t: usize, want: String, got: String| {
        CliError::Invariant(format!("round {t}: recorded response {want}, defender gave {got}"))
    };
    if let Some(k) = a.defender.strip_prefix("kmv:k=") {
        let k: usize = k.parse().map_err(|e| CliError::Config(format!("defender: k: {e}")))?;
        let mut def = EstimatorDefender::new(KmvSketch::new(k, seed)?, a.defender.clone(), seed);
        for (t, r) in rounds.iter().enumerate() {
            let u: StreamUpdate = serde_json::from_value(field(r, "submission", t + 1)?)?;
            let want: f64 = serde_json::from_value(field(r, "response", t + 1)?)?;
            let got = def.respond(&u)?;
            if got.to_bits() != want.to_bits() {
                return Err(mismatch(t + 1, want.to_string(), got.to_string()));
            }
        }
    } else {
        let kind: SamplerKind = a.defender.parse().map_err(|e| CliError::Config(format!("defender: {e}")))?;
        let mut def = SamplerDefender::new(kind, seed)?;
        for (t, r) in rounds.iter().enumerate() {
            let x: u64 = serde_json::from_value(field(r, "submission", t + 1)?)?;
            let want: bool = serde_json::from_value(field(r, "response", t + 1)?)?;
            let got = def.respond(&x)?;
            if got != want {
                return Err(mismatch(t + 1, want.to_string(), got.to_string()));
            }
        }
    }
    Ok(format!("replay: {} rounds reproduced against {} (seed {seed})", rounds.len(), a.defender))
}
