//! Sequence simulation by Ogata thinning, Monte-Carlo expected-count
//! prediction, and time-rescaling residuals.
//!
//! The thinning envelope is refreshed over short forward windows: within a
//! window the total-intensity bound is constant, candidate gaps are drawn
//! from `Exp(λ̄)`, and candidates are accepted with probability `Σλ_c/λ̄`.
//! Every simulation run owns its own seeded RNG stream, so runs for
//! different replicates are independent and reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Database, EventSequence};
use crate::error::{Error, Result};
use crate::model::{HawkesModel, HistoryView, SeqCtx};
use crate::preprocess::sample_for_event;

/// Simulation horizon and controls.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t_begin: f64,
    pub t_end: f64,
    /// Observed sequence to continue; its events at or before `t_begin`
    /// condition the intensity but are not part of the output.
    pub seed_sequence: Option<EventSequence>,
    /// Hard cap on generated events.
    pub max_events: usize,
    pub rng_seed: u64,
    /// Length of the forward window over which one envelope is valid.
    pub bound_refresh_width: f64,
    /// Sequence index used for embedded sequence features.
    pub seq_index: usize,
}

impl SimConfig {
    pub fn new(t_begin: f64, t_end: f64) -> Self {
        SimConfig {
            t_begin,
            t_end,
            seed_sequence: None,
            max_events: 100_000,
            rng_seed: 0,
            bound_refresh_width: 1.0,
            seq_index: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_begin >= self.t_end {
            return Err(Error::InvalidConfig(format!(
                "simulation horizon [{}, {}] is empty",
                self.t_begin, self.t_end
            )));
        }
        if self.max_events == 0 {
            return Err(Error::InvalidConfig("max_events must be ≥ 1".into()));
        }
        if self.bound_refresh_width <= 0.0 {
            return Err(Error::InvalidConfig(
                "bound_refresh_width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Rolling bounded history: keeps the last `capacity` events.
struct RollingHistory {
    types: Vec<usize>,
    times: Vec<f64>,
    capacity: usize,
}

impl RollingHistory {
    fn new(capacity: usize) -> Self {
        RollingHistory {
            types: Vec::with_capacity(capacity + 1),
            times: Vec::with_capacity(capacity + 1),
            capacity,
        }
    }

    fn push(&mut self, c: usize, t: f64) {
        self.types.push(c);
        self.times.push(t);
        if self.types.len() > self.capacity {
            self.types.remove(0);
            self.times.remove(0);
        }
    }

    fn view(&self) -> HistoryView<'_> {
        HistoryView {
            types: &self.types,
            times: &self.times,
        }
    }
}

/// Simulate one sequence over `(t_begin, t_end]` by thinning.
///
/// Returns the generated events only; seed history conditions the intensity
/// but is not echoed to the output. A model whose intensity is identically
/// zero yields an empty sequence. An acceptance ratio above one aborts with
/// a diagnostic, since it can only come from an unsound kernel bound.
pub fn simulate(model: &HawkesModel, cfg: &SimConfig) -> Result<EventSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut hist = RollingHistory::new(model.memory_size());
    let seed_feature = cfg.seed_sequence.as_ref().and_then(|s| s.seq_feature.clone());
    if let Some(seed) = &cfg.seed_sequence {
        for (&t, &c) in seed.times.iter().zip(&seed.events) {
            if t <= cfg.t_begin {
                hist.push(c, t);
            }
        }
    }
    let ctx_feature = seed_feature.as_deref();

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut t = cfg.t_begin;

    while t < cfg.t_end && events.len() < cfg.max_events {
        let window_end = (t + cfg.bound_refresh_width).min(cfg.t_end);
        let ctx = SeqCtx {
            seq_index: cfg.seq_index,
            feature: ctx_feature,
        };
        let bound = model.total_intensity_bound(t, window_end - t, hist.view(), ctx)?;
        if bound <= 0.0 {
            t = window_end;
            continue;
        }
        let u: f64 = rng.random();
        let gap = -(1.0 - u).ln() / bound;
        if t + gap > window_end {
            // no candidate inside this window; advance and refresh
            t = window_end;
            continue;
        }
        t += gap;
        let mut lambdas = vec![0.0; model.num_types()];
        let mut total = 0.0;
        for (c, l) in lambdas.iter_mut().enumerate() {
            *l = model.intensity_at(c, t, hist.view(), ctx)?.max(0.0);
            total += *l;
        }
        let ratio = total / bound;
        if ratio > 1.0 + 1e-9 {
            return Err(Error::EnvelopeViolated { time: t, ratio });
        }
        if rng.random::<f64>() < ratio {
            // accepted: assign the type proportionally to per-type intensity
            let mut pick: f64 = rng.random::<f64>() * total;
            let mut chosen = model.num_types() - 1;
            for (c, &l) in lambdas.iter().enumerate() {
                if pick < l {
                    chosen = c;
                    break;
                }
                pick -= l;
            }
            times.push(t);
            events.push(chosen);
            hist.push(chosen, t);
        }
    }

    Ok(EventSequence {
        times,
        events,
        seq_feature: seed_feature,
        t_start: cfg.t_begin,
        t_stop: cfg.t_end,
        label: None,
    })
}

/// Per-replicate event counts in `[t0, t1]` for continuations of one
/// sequence, one row per replicate. Continuations start at the sequence's
/// `t_stop` so self-excitation can bridge the gap up to `t0`.
pub fn predict_replicate_counts(
    model: &HawkesModel,
    seq: &EventSequence,
    seq_index: usize,
    t0: f64,
    t1: f64,
    replicates: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let cfg = SimConfig {
            t_begin: seq.t_stop,
            t_end: t1,
            seed_sequence: Some(seq.clone()),
            max_events: 1_000_000,
            rng_seed: derive_seed(rng_seed, seq_index as u64, r as u64),
            bound_refresh_width: 1.0,
            seq_index,
        };
        let sim = simulate(model, &cfg)?;
        let mut counts = vec![0.0; model.num_types()];
        for (&t, &c) in sim.times.iter().zip(&sim.events) {
            if t >= t0 && t <= t1 {
                counts[c] += 1.0;
            }
        }
        rows.push(counts);
    }
    Ok(rows)
}

/// Monte-Carlo expected counts per type in `[t0, t1]` for every sequence of
/// the corpus, averaged over `replicates` simulated continuations.
/// Deterministic given the seed. Requires `t0 ≥ t_stop` for every sequence.
pub fn predict(
    model: &HawkesModel,
    db: &Database,
    t0: f64,
    t1: f64,
    replicates: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be ≥ 1".into()));
    }
    if t0 >= t1 {
        return Err(Error::InvalidConfig(format!(
            "prediction horizon [{t0}, {t1}] is empty"
        )));
    }
    for (s, seq) in db.sequences.iter().enumerate() {
        if t0 < seq.t_stop {
            return Err(Error::PredictHorizon {
                name: db.idx2seq[s].clone(),
                t0,
                t_stop: seq.t_stop,
            });
        }
    }
    let mut out = Vec::with_capacity(db.sequences.len());
    for (s, seq) in db.sequences.iter().enumerate() {
        let rows = predict_replicate_counts(model, seq, s, t0, t1, replicates, rng_seed)?;
        let mut mean = vec![0.0; model.num_types()];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= replicates as f64;
        }
        out.push(mean);
    }
    Ok(out)
}

/// Compensator increments Λ(t_i) − Λ(t_{i−1}) of the total process, one per
/// event. Under a correctly specified model these are i.i.d. Exp(1).
pub fn time_rescaling_residuals(model: &HawkesModel, seq: &EventSequence) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(seq.len());
    let mut counts = vec![0.0; model.num_types()];
    for i in 0..seq.len() {
        let sample = sample_for_event(seq, 0, i, model.memory_size(), model.num_types());
        model.expected_counts_between(
            HistoryView {
                types: &sample.history_types,
                times: &sample.history_times,
            },
            SeqCtx {
                seq_index: sample.seq_index,
                feature: sample.seq_feature.as_deref(),
            },
            sample.prev_time,
            sample.target_time,
            &mut counts,
        )?;
        out.push(counts.iter().sum());
    }
    Ok(out)
}

/// Independent per-run stream: mix the base seed with run coordinates.
fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xbf58476d1ce4e5b9);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Activation, DataDims, ExoKind, ExoSpec, GroupKey, ImpactKind, ImpactSpec, KernelSpec,
        ModelConfig,
    };

    fn model_with(mu: &[f64], alpha: &[f64], kernel: KernelSpec, memory: usize) -> HawkesModel {
        let c = mu.len();
        let cfg = ModelConfig {
            memory_size: memory,
            exogenous: ExoSpec {
                kind: ExoKind::Constant,
                activation: Activation::Identity,
            },
            impact: ImpactSpec {
                kind: ImpactKind::Basic,
                activation: Activation::Identity,
            },
            kernel,
            kernel_trainable: (false, false),
            outer: Activation::Identity,
            embed_dim: 3,
            hidden_dim: 4,
            quadrature: 16,
            init_seed: 0,
        };
        let mut model = cfg.build(&DataDims::bare(c)).unwrap();
        model.group_data_mut(GroupKey::ExoMu).copy_from_slice(mu);
        model.group_data_mut(GroupKey::ImpactAlpha).copy_from_slice(alpha);
        model
    }

    #[test]
    fn zero_model_gives_empty_sequence() {
        let model = model_with(&[0.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let out = simulate(&model, &SimConfig::new(0.0, 100.0)).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.t_start, 0.0);
        assert_eq!(out.t_stop, 100.0);
    }

    #[test]
    fn poisson_count_matches_rate() {
        let model = model_with(&[2.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let mut total = 0usize;
        let runs = 3;
        for seed in 0..runs {
            let mut cfg = SimConfig::new(0.0, 1000.0);
            cfg.rng_seed = seed;
            let out = simulate(&model, &cfg).unwrap();
            total += out.len();
        }
        let mean = total as f64 / runs as f64;
        // expectation 2000, tolerance 3σ of a per-run Poisson count average
        let sigma = (2000.0_f64 / runs as f64).sqrt();
        assert!(
            (mean - 2000.0).abs() < 3.0 * sigma,
            "mean count {mean} vs 2000 ± {}",
            3.0 * sigma
        );
    }

    #[test]
    fn simulated_times_strictly_inside_horizon_and_increasing() {
        let model = model_with(
            &[0.5, 0.3],
            &[0.2, 0.1, 0.05, 0.15],
            KernelSpec::Exponential { omega: 1.0, delta: 0.0 },
            16,
        );
        let mut cfg = SimConfig::new(5.0, 50.0);
        cfg.rng_seed = 42;
        let out = simulate(&model, &cfg).unwrap();
        assert!(!out.is_empty());
        assert!(out.times.windows(2).all(|w| w[1] > w[0]));
        assert!(out.times.iter().all(|&t| t > 5.0 && t <= 50.0));
        assert!(out.events.iter().all(|&c| c < 2));
    }

    #[test]
    fn determinism_same_seed_same_output() {
        let model = model_with(
            &[0.5],
            &[0.4],
            KernelSpec::Exponential { omega: 1.0, delta: 0.0 },
            32,
        );
        let mut cfg = SimConfig::new(0.0, 200.0);
        cfg.rng_seed = 9;
        let a = simulate(&model, &cfg).unwrap();
        let b = simulate(&model, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.events, b.events);
        cfg.rng_seed = 10;
        let c = simulate(&model, &cfg).unwrap();
        assert_ne!(a.times, c.times);
    }

    #[test]
    fn hawkes_branching_ratio_mean_rate() {
        // μ=0.5, α=0.4, mass 1 → stationary rate μ/(1−ρ) = 0.8333
        let model = model_with(
            &[0.5],
            &[0.4],
            KernelSpec::Exponential { omega: 1.0, delta: 0.0 },
            64,
        );
        let mut total = 0usize;
        let horizon = 3000.0;
        let runs = 3;
        for seed in 0..runs {
            let mut cfg = SimConfig::new(0.0, horizon);
            cfg.rng_seed = seed + 100;
            total += simulate(&model, &cfg).unwrap().len();
        }
        let rate = total as f64 / (horizon * runs as f64);
        let expected = 0.5 / (1.0 - 0.4);
        assert!(
            (rate - expected).abs() / expected < 0.05,
            "empirical rate {rate} vs {expected}"
        );
    }

    #[test]
    fn max_events_cap_respected() {
        let model = model_with(&[5.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let mut cfg = SimConfig::new(0.0, 1000.0);
        cfg.max_events = 17;
        let out = simulate(&model, &cfg).unwrap();
        assert_eq!(out.len(), 17);
    }

    #[test]
    fn continuation_excites_future() {
        // a seed history right before t_begin raises early intensity
        let model = model_with(
            &[0.1],
            &[0.8],
            KernelSpec::Exponential { omega: 0.5, delta: 0.0 },
            32,
        );
        let seed_seq = EventSequence {
            times: vec![9.0, 9.5, 9.9],
            events: vec![0, 0, 0],
            seq_feature: None,
            t_start: 0.0,
            t_stop: 10.0,
            label: None,
        };
        let runs = 200;
        let mut with_seed = 0usize;
        let mut without = 0usize;
        for r in 0..runs {
            let mut cfg = SimConfig::new(10.0, 12.0);
            cfg.rng_seed = r;
            cfg.seed_sequence = Some(seed_seq.clone());
            with_seed += simulate(&model, &cfg).unwrap().len();
            let mut cfg2 = SimConfig::new(10.0, 12.0);
            cfg2.rng_seed = r;
            without += simulate(&model, &cfg2).unwrap().len();
        }
        assert!(
            with_seed > without,
            "seeded {with_seed} vs unseeded {without}"
        );
    }

    #[test]
    fn predict_requires_forecast_region() {
        let model = model_with(&[1.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let mut db = Database::with_types(&["A"]);
        db.push_sequence(
            "obs",
            EventSequence {
                times: vec![1.0, 2.0],
                events: vec![0, 0],
                seq_feature: None,
                t_start: 0.0,
                t_stop: 5.0,
                label: None,
            },
        );
        let err = predict(&model, &db, 3.0, 8.0, 4, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("obs"), "{msg}");
    }

    #[test]
    fn predict_poisson_matches_rate_times_length() {
        let model = model_with(&[1.5, 0.5], &[0.0; 4], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let mut db = Database::with_types(&["A", "B"]);
        db.push_sequence("obs", EventSequence::empty(0.0, 0.0));
        let reps = 400;
        let out = predict(&model, &db, 0.0, 10.0, reps, 7).unwrap();
        // per-type expectation μ·Δ with Poisson MC error
        for (c, &mu) in [1.5, 0.5].iter().enumerate() {
            let expected = mu * 10.0;
            let se = (expected / reps as f64).sqrt();
            assert!(
                (out[0][c] - expected).abs() < 3.0 * se,
                "type {c}: {} vs {expected} ± {}",
                out[0][c],
                3.0 * se
            );
        }
    }

    #[test]
    fn predict_single_replicate_equals_single_run() {
        let model = model_with(&[1.0], &[0.3], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 16);
        let seq = EventSequence {
            times: vec![0.5, 1.0],
            events: vec![0, 0],
            seq_feature: None,
            t_start: 0.0,
            t_stop: 2.0,
            label: None,
        };
        let rows = predict_replicate_counts(&model, &seq, 0, 2.0, 12.0, 1, 33).unwrap();
        let cfg = SimConfig {
            t_begin: 2.0,
            t_end: 12.0,
            seed_sequence: Some(seq.clone()),
            max_events: 1_000_000,
            rng_seed: super::derive_seed(33, 0, 0),
            bound_refresh_width: 1.0,
            seq_index: 0,
        };
        let run = simulate(&model, &cfg).unwrap();
        assert_eq!(rows[0][0], run.len() as f64);
    }

    #[test]
    fn residuals_poisson_rate_one_are_gaps() {
        let model = model_with(&[1.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let seq = EventSequence {
            times: vec![0.5, 1.7, 1.9, 4.0],
            events: vec![0, 0, 0, 0],
            seq_feature: None,
            t_start: 0.0,
            t_stop: 4.0,
            label: None,
        };
        let res = time_rescaling_residuals(&model, &seq).unwrap();
        let gaps = [0.5, 1.2, 0.2, 2.1];
        for (r, g) in res.iter().zip(&gaps) {
            assert!((r - g).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_empty_sequence_empty() {
        let model = model_with(&[1.0], &[0.0], KernelSpec::Exponential { omega: 1.0, delta: 0.0 }, 8);
        let seq = EventSequence::empty(0.0, 5.0);
        assert!(time_rescaling_residuals(&model, &seq).unwrap().is_empty());
    }

    #[test]
    fn gate_kernel_simulation_respects_envelope() {
        // delayed excitation exercises the windowed bound
        let model = model_with(
            &[0.4],
            &[0.6],
            KernelSpec::Gate { omega: 1.0, delta: 2.0 },
            32,
        );
        let mut cfg = SimConfig::new(0.0, 500.0);
        cfg.rng_seed = 4;
        cfg.bound_refresh_width = 0.5;
        let out = simulate(&model, &cfg).unwrap();
        assert!(out.len() > 100, "gate-kernel run too short: {}", out.len());
    }
}
