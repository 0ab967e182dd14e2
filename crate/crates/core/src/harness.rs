//! Seeded trials and experiments.
//!
//! Regret is always measured against the true means: round `t` adds
//! `max_a mu_t(a) - mu_t(pi_t)`, so a trace is the exact conditional expected
//! regret given the arms played. Expectations over the policy and the noise
//! are approximated by averaging over seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{oracle_policy, safe_singleton_policy, UniformPolicy};
use crate::config::{ExperimentConfig, PolicyName, PolicySpec};
use crate::env::RewardModel;
use crate::error::{Error, Result};
use crate::ground_truth::{compute_significant_shifts_capped, GroundTruthReport, PhaseAnnotation};
use crate::meta::{audit_restarts, restart_rounds, DoublingMeta, EvictionConfig, MetaPolicy};
use crate::policy::{Event, EventKind, Policy};
use crate::rng::{Purpose, StreamKey};

/// Per-round regret of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub increments: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub arms: Vec<usize>,
    pub events: Vec<Event>,
}

impl RegretTrace {
    pub fn rounds(&self) -> usize {
        self.increments.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn restart_rounds(&self) -> Vec<usize> {
        restart_rounds(&self.events)
    }
}

/// Drive `policy` for `rounds` rounds on `model`. Reward noise comes from the
/// stream keyed by `seed`.
pub fn run_trial<P: Policy + ?Sized>(
    model: &RewardModel,
    policy: &mut P,
    seed: u64,
    rounds: usize,
) -> Result<RegretTrace> {
    if rounds > model.horizon() {
        return Err(Error::range(
            "rounds",
            rounds,
            format!("<= environment horizon {}", model.horizon()),
        ));
    }
    if policy.num_arms() != model.num_arms() {
        return Err(Error::Usage(format!(
            "policy has {} arms, environment has {}",
            policy.num_arms(),
            model.num_arms()
        )));
    }
    let mut noise = StreamKey::new(seed, 0, Purpose::RewardNoise).rng();
    let mut increments = Vec::with_capacity(rounds);
    let mut cumulative = Vec::with_capacity(rounds);
    let mut arms = Vec::with_capacity(rounds);
    let mut events = Vec::new();
    let mut total = 0.0;
    for t in 1..=rounds {
        let arm = policy.select()?;
        let reward = model.sample(t, arm, &mut noise)?;
        policy.observe(arm, reward)?;
        let r = model.best_mean(t) - model.mean(t, arm)?;
        total += r;
        increments.push(r);
        cumulative.push(total);
        arms.push(arm);
        events.append(&mut policy.drain_events());
    }
    Ok(RegretTrace {
        increments,
        cumulative,
        arms,
        events,
    })
}

/// Instantiate a policy by name for one trial.
pub fn build_policy(
    spec: &PolicySpec,
    model: &RewardModel,
    annotation: Option<&PhaseAnnotation>,
    seed: u64,
) -> Result<Box<dyn Policy>> {
    let key = StreamKey::new(seed, 0, Purpose::ArmSelection);
    let k = model.num_arms();
    let need = || {
        annotation.ok_or_else(|| {
            Error::Usage(format!(
                "policy `{}` needs a ground-truth annotation",
                spec.name.as_str()
            ))
        })
    };
    Ok(match spec.name {
        PolicyName::Meta => Box::new(MetaPolicy::new(model.horizon(), k, spec.eviction, key)?),
        PolicyName::MetaDoubling => Box::new(DoublingMeta::new(k, spec.eviction, key)?),
        PolicyName::Oracle => Box::new(oracle_policy(need()?, model, key)?),
        PolicyName::SafeSingleton => Box::new(safe_singleton_policy(need()?, model, key)?),
        PolicyName::Uniform => Box::new(UniformPolicy::new(k, key)?),
        PolicyName::Exp3S | PolicyName::SlidingWindowUcb | PolicyName::AdSwitch => {
            return Err(Error::Config(format!(
                "policy name `{}` is reserved but not implemented",
                spec.name.as_str()
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub final_regret: f64,
    pub num_restarts: usize,
    pub num_replays: usize,
    pub restart_rounds: Vec<usize>,
    /// `(duration, count)` pairs.
    pub replays_by_duration: Vec<(usize, usize)>,
    /// Restarts not preceded by eviction of every arm from the master set.
    pub restart_audit_violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub mean_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub num_seeds: usize,
    pub mean_regret: f64,
    pub std_error: f64,
    pub mean_restarts: f64,
    pub curve: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthReport>,
    /// `mean_regret / (ln(T)^3 * sum_sqrt)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub policy: String,
    pub eviction: EvictionConfig,
    pub horizons: Vec<HorizonSummary>,
    /// Log-log slope of mean regret against `T`, when the horizons allow a fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub trials: Vec<TrialRecord>,
}

/// Mean and standard error (sample std / sqrt(n)).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Least-squares slope of `ln(regret)` against `ln(T)`.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Numeric(format!(
            "need at least 3 horizons, got {}",
            points.len()
        )));
    }
    if let Some(&(t, r)) = points.iter().find(|&&(t, r)| !(t > 0.0 && r > 0.0)) {
        return Err(Error::Numeric(format!(
            "non-positive point (T = {t}, regret = {r})"
        )));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi < 8.0 * lo {
        return Err(Error::Numeric(format!(
            "horizons span {lo}..{hi}, need at least 8x"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Rounds at which the mean regret curve is sampled.
fn curve_rounds(horizon: usize, points: usize) -> Vec<usize> {
    if points == 0 {
        return Vec::new();
    }
    let n = points.min(horizon);
    let mut rounds: Vec<usize> = (1..=n).map(|i| (i * horizon).div_ceil(n)).collect();
    rounds.dedup();
    rounds
}

struct Prepared {
    horizon: usize,
    model: Arc<RewardModel>,
    annotation: Option<Arc<PhaseAnnotation>>,
    ground_truth: Option<GroundTruthReport>,
}

struct TrialOutcome {
    record: TrialRecord,
    curve: Vec<f64>,
    events: Vec<Event>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Added to every seed (fleet sharding).
    pub seed_offset: u64,
    /// Overrides the config's parallelism.
    pub parallelism: Option<usize>,
    /// Keep per-trial events in memory for the events output.
    pub keep_events: bool,
}

/// `(T, seed)` cells of an experiment, in output order.
pub fn trial_grid(cfg: &ExperimentConfig, seed_offset: u64) -> Vec<(usize, u64)> {
    let seeds = cfg.seeds.resolve(seed_offset);
    cfg.horizons()
        .into_iter()
        .flat_map(|h| seeds.iter().map(move |&s| (h, s)))
        .collect()
}

fn prepare(cfg: &ExperimentConfig, horizon: usize) -> Result<Prepared> {
    let spec = if horizon == cfg.env.horizon() {
        cfg.env.clone()
    } else {
        cfg.env.with_horizon(horizon)?
    };
    let model = spec.expand()?;
    let (annotation, ground_truth) = if horizon <= cfg.ground_truth_cap {
        let ann = compute_significant_shifts_capped(&model, cfg.ground_truth_cap)?;
        let report = GroundTruthReport::from_annotation(&model, &ann, false);
        (Some(Arc::new(ann)), Some(report))
    } else if cfg.policy.name.needs_ground_truth() {
        return Err(Error::Resource {
            cap: cfg.ground_truth_cap,
            requested: horizon,
        });
    } else {
        (None, None)
    };
    Ok(Prepared {
        horizon,
        model: Arc::new(model),
        annotation,
        ground_truth,
    })
}

fn run_cell(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    seed: u64,
    curve_at: &[usize],
    keep_events: bool,
) -> Result<TrialOutcome> {
    let mut policy = build_policy(&cfg.policy, &prep.model, prep.annotation.as_deref(), seed)?;
    let trace = run_trial(&prep.model, policy.as_mut(), seed, prep.horizon)?;
    let mut by_duration: Vec<(usize, usize)> = Vec::new();
    for e in &trace.events {
        if let EventKind::ReplayStart { duration, .. } = e.kind {
            match by_duration.binary_search_by_key(&duration, |&(d, _)| d) {
                Ok(i) => by_duration[i].1 += 1,
                Err(i) => by_duration.insert(i, (duration, 1)),
            }
        }
    }
    let restarts = trace.restart_rounds();
    let record = TrialRecord {
        horizon: prep.horizon,
        seed,
        final_regret: trace.final_regret(),
        num_restarts: restarts.len(),
        num_replays: by_duration.iter().map(|&(_, c)| c).sum(),
        restart_rounds: restarts,
        replays_by_duration: by_duration,
        restart_audit_violations: audit_restarts(&trace.events, prep.model.num_arms()).len(),
    };
    let curve = curve_at.iter().map(|&r| trace.cumulative[r - 1]).collect();
    Ok(TrialOutcome {
        record,
        curve,
        events: if keep_events {
            trace.events
        } else {
            Vec::new()
        },
    })
}

/// Run every `(T, seed)` cell and aggregate. Output order depends only on the
/// configuration, not on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    Ok(run_experiment_with_events(cfg, opts)?.0)
}

/// Events of one trial, keyed by horizon and seed.
pub type TrialEvents = (usize, u64, Vec<Event>);

/// Like [`run_experiment`], also returning each trial's events (empty unless
/// `opts.keep_events`).
pub fn run_experiment_with_events(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(ExperimentResult, Vec<TrialEvents>)> {
    cfg.validate()?;
    let seeds = cfg.seeds.resolve(opts.seed_offset);
    let prepared: Vec<Prepared> = cfg
        .horizons()
        .into_iter()
        .map(|h| prepare(cfg, h))
        .collect::<Result<_>>()?;
    let curves: Vec<Vec<usize>> = prepared
        .iter()
        .map(|p| curve_rounds(p.horizon, cfg.curve_points))
        .collect();
    let cells: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();

    let threads = opts.parallelism.or(cfg.parallelism).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, seed)| run_cell(cfg, &prepared[i], seed, &curves[i], opts.keep_events))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut summaries = Vec::with_capacity(prepared.len());
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut events = Vec::new();
    for (i, prep) in prepared.iter().enumerate() {
        let group: Vec<&TrialOutcome> = outcomes
            .iter()
            .zip(&cells)
            .filter(|(_, c)| c.0 == i)
            .map(|(o, _)| o)
            .collect();
        let finals: Vec<f64> = group.iter().map(|o| o.record.final_regret).collect();
        let (mean, se) = mean_and_se(&finals);
        let n = group.len() as f64;
        let curve = curves[i]
            .iter()
            .enumerate()
            .map(|(j, &round)| CurvePoint {
                round,
                mean_regret: group.iter().map(|o| o.curve[j]).sum::<f64>() / n,
            })
            .collect();
        let bound_ratio = prep.ground_truth.as_ref().and_then(|gt| {
            let denom = (prep.horizon as f64).ln().powi(3) * gt.bounds.sum_sqrt;
            (denom > 0.0).then(|| mean / denom)
        });
        summaries.push(HorizonSummary {
            horizon: prep.horizon,
            num_seeds: group.len(),
            mean_regret: mean,
            std_error: se,
            mean_restarts: group
                .iter()
                .map(|o| o.record.num_restarts as f64)
                .sum::<f64>()
                / n,
            curve,
            ground_truth: prep.ground_truth.clone(),
            bound_ratio,
        });
    }
    for o in outcomes {
        if opts.keep_events {
            events.push((o.record.horizon, o.record.seed, o.events));
        }
        trials.push(o.record);
    }

    let points: Vec<(f64, f64)> = summaries
        .iter()
        .map(|s| (s.horizon as f64, s.mean_regret))
        .collect();
    Ok((
        ExperimentResult {
            policy: cfg.policy.name.as_str().to_string(),
            eviction: cfg.policy.eviction,
            horizons: summaries,
            slope: fit_scaling_exponent(&points).ok(),
            trials,
        },
        events,
    ))
}

/// Per-trial CSV: `T,seed,final_regret,num_restarts,num_replays`.
pub fn write_trials_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "seed", "final_regret", "num_restarts", "num_replays"])?;
    for t in &result.trials {
        w.write_record([
            t.horizon.to_string(),
            t.seed.to_string(),
            format!("{:.10}", t.final_regret),
            t.num_restarts.to_string(),
            t.num_replays.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EventLine<'a> {
    #[serde(rename = "T")]
    horizon: usize,
    seed: u64,
    #[serde(flatten)]
    event: &'a Event,
}

/// JSON-lines event log.
pub fn write_events_jsonl<W: Write>(events: &[TrialEvents], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    for (horizon, seed, list) in events {
        for event in list {
            serde_json::to_writer(
                &mut w,
                &EventLine {
                    horizon: *horizon,
                    seed: *seed,
                    event,
                },
            )?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the outputs named in `cfg.outputs`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    events: &[TrialEvents],
    base: &Path,
) -> Result<()> {
    if let Some(p) = &cfg.outputs.csv {
        write_trials_csv(result, File::create(base.join(p))?)?;
    }
    if let Some(p) = &cfg.outputs.json {
        let mut f = BufWriter::new(File::create(base.join(p))?);
        serde_json::to_writer_pretty(&mut f, result)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    if let Some(p) = &cfg.outputs.events {
        write_events_jsonl(events, File::create(base.join(p))?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub violation_fraction: f64,
}

/// Empirical check of the estimator's concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E1Report {
    pub windows: usize,
    /// Largest `|deviation| / (ln(T) (sqrt(K (s2 - s1)) + K))` observed.
    pub max_ratio: f64,
    pub sweep: Vec<SweepPoint>,
}

/// Sample windows `[s1, s2]` and arm pairs from a finished run and compare
/// the summed estimator with its conditional mean
/// `mu_t(a') 1{a' in A_t} - mu_t(a) 1{a in A_t}`. Reports, for each `c` in
/// `sweep`, the fraction of windows whose deviation exceeds
/// `c ln(T) (sqrt(K (s2 - s1)) + K)`.
pub fn diagnostics_e1(
    model: &RewardModel,
    policy: &MetaPolicy,
    windows: usize,
    sweep: &[f64],
    seed: u64,
) -> Result<E1Report> {
    let history = policy.history().ok_or_else(|| {
        Error::Usage("diagnostics need a policy built with record_history".into())
    })?;
    let prefix = policy.prefix_sums();
    let rounds = prefix.rounds();
    let k = model.num_arms();
    if rounds < 2 || k < 2 {
        return Err(Error::Usage("need at least 2 rounds and 2 arms".into()));
    }
    if model.horizon() < rounds {
        return Err(Error::Usage(
            "model is shorter than the recorded run".into(),
        ));
    }
    let log_t = (policy.horizon() as f64).ln();
    let mut rng = StreamKey::new(seed, 0, Purpose::Diagnostics).rng();
    let mut ratios = Vec::with_capacity(windows);
    for _ in 0..windows {
        let s1 = rng.random_range(1..rounds);
        let s2 = rng.random_range(s1 + 1..=rounds);
        let better = rng.random_range(0..k);
        let arm = (better + rng.random_range(1..k)) % k;
        let estimate = crate::meta::gap_estimate_sum(prefix, better, arm, s1, s2);
        let expected: f64 = (s1..=s2)
            .map(|t| {
                let active = history.active[t - 1];
                let row = model.row(t);
                let mut m = 0.0;
                if active.contains(better) {
                    m += row[better];
                }
                if active.contains(arm) {
                    m -= row[arm];
                }
                m
            })
            .sum();
        let scale = log_t * (((k * (s2 - s1)) as f64).sqrt() + k as f64);
        ratios.push((estimate - expected).abs() / scale);
    }
    let n = ratios.len().max(1) as f64;
    Ok(E1Report {
        windows: ratios.len(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        sweep: sweep
            .iter()
            .map(|&c| SweepPoint {
                c,
                violation_fraction: ratios.iter().filter(|&&r| r > c).count() as f64 / n,
            })
            .collect(),
    })
}
