//! Parameter learning: the three loss functions, Adam/SGD with exponential
//! learning-rate decay, L1/L2 regularization, nonnegativity projection, and
//! the fit/validation loops.
//!
//! Losses are batch sums. The training objective per step is
//! `loss + l1·‖θ‖₁ + l2·‖θ‖₂²`, with the L1 term scoped to the
//! impact-coefficient groups by default (structural sparsity) and the L1
//! subgradient at zero taken as zero.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Database;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{GroupKey, HawkesModel, LossAdjoints, ModelGrads, ALL_KEYS};
use crate::preprocess::{make_samples_for, sample_for_event, TrainingSample};

/// Which loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// −Σ (log λ_{c_i}(t_i) − Σ_c ∫ λ_c)
    MaxLogLike,
    /// Σ ‖∫ λ − 1_{c_i}‖²
    LeastSquare,
    /// −Σ log softmax(∫ λ)[c_i]
    CrossEntropy,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::MaxLogLike => "mle",
            LossKind::LeastSquare => "lse",
            LossKind::CrossEntropy => "crossentropy",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" | "maxloglike" => Ok(LossKind::MaxLogLike),
            "lse" | "leastsquare" => Ok(LossKind::LeastSquare),
            "crossentropy" | "ce" => Ok(LossKind::CrossEntropy),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss '{other}' (expected mle, lse, or crossentropy)"
            ))),
        }
    }
}

/// Negative log-likelihood of the batch, per-event formulation.
/// Errors when the intensity at an observed event is not strictly positive,
/// which signals an identity outer activation with inadmissible parameters.
pub fn loss_mle(model: &HawkesModel, batch: &[TrainingSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in batch {
        let lambda = model.intensity(s, s.target_type)?;
        if lambda <= 0.0 {
            return Err(Error::NonPositiveIntensity {
                seq_index: s.seq_index,
                time: s.target_time,
            });
        }
        let counts = model.expected_counts(s)?;
        total += counts.iter().sum::<f64>() - lambda.ln();
    }
    Ok(total)
}

/// Squared distance between per-sample expected counts and the observed
/// one-hot, summed over the batch.
pub fn loss_lse(model: &HawkesModel, batch: &[TrainingSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in batch {
        let counts = model.expected_counts(s)?;
        for (c, &v) in counts.iter().enumerate() {
            let target = if c == s.target_type { 1.0 } else { 0.0 };
            total += (v - target) * (v - target);
        }
    }
    Ok(total)
}

/// Cross-entropy of the observed type under a softmax over expected counts.
pub fn loss_ce(model: &HawkesModel, batch: &[TrainingSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in batch {
        let counts = model.expected_counts(s)?;
        total += log_sum_exp(&counts) - counts[s.target_type];
    }
    Ok(total)
}

pub fn loss_value(model: &HawkesModel, batch: &[TrainingSample], kind: LossKind) -> Result<f64> {
    match kind {
        LossKind::MaxLogLike => loss_mle(model, batch),
        LossKind::LeastSquare => loss_lse(model, batch),
        LossKind::CrossEntropy => loss_ce(model, batch),
    }
}

/// Loss value plus analytic gradients for one batch.
pub fn loss_and_grad(
    model: &HawkesModel,
    batch: &[TrainingSample],
    kind: LossKind,
) -> Result<(f64, ModelGrads)> {
    let c_total = model.num_types();
    let mut adj = LossAdjoints::zeros(batch.len(), c_total);
    let mut total = 0.0;
    for (i, s) in batch.iter().enumerate() {
        let counts = model.expected_counts(s)?;
        match kind {
            LossKind::MaxLogLike => {
                let lambda = model.intensity(s, s.target_type)?;
                if lambda <= 0.0 {
                    return Err(Error::NonPositiveIntensity {
                        seq_index: s.seq_index,
                        time: s.target_time,
                    });
                }
                total += counts.iter().sum::<f64>() - lambda.ln();
                adj.wrt_intensity[i] = -1.0 / lambda;
                adj.wrt_counts[i].iter_mut().for_each(|a| *a = 1.0);
            }
            LossKind::LeastSquare => {
                for (c, &v) in counts.iter().enumerate() {
                    let target = if c == s.target_type { 1.0 } else { 0.0 };
                    total += (v - target) * (v - target);
                    adj.wrt_counts[i][c] = 2.0 * (v - target);
                }
            }
            LossKind::CrossEntropy => {
                let lse = log_sum_exp(&counts);
                total += lse - counts[s.target_type];
                for (c, &v) in counts.iter().enumerate() {
                    let p = (v - lse).exp();
                    adj.wrt_counts[i][c] = p - if c == s.target_type { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let grads = model.model_param_grad(batch, &adj)?;
    Ok((total, grads))
}

/// Scope of a norm regularizer over the model's parameter groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegScope {
    /// The impact-coefficient groups (structural parameters).
    #[default]
    ImpactCoefficients,
    /// Every trainable group.
    AllTrainable,
    /// Explicit group names.
    Groups(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer with per-group state; `step` applies one update in place.
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, model: &HawkesModel) -> Self {
        let sizes = model.group_sizes();
        Optimizer {
            kind,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    /// One update: SGD is θ ← θ − lr·g; Adam keeps bias-corrected first and
    /// second moments. Non-trainable groups are left untouched.
    pub fn step(&mut self, model: &mut HawkesModel, grads: &ModelGrads, lr: f64) {
        self.steps += 1;
        for &key in &ALL_KEYS {
            if !model.has_group(key) || !model.group_trainable(key) {
                continue;
            }
            let g = grads.slot(key);
            match self.kind {
                OptimizerKind::Sgd => {
                    let theta = model.group_data_mut(key);
                    for (t, &gi) in theta.iter_mut().zip(g) {
                        *t -= lr * gi;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let m = &mut self.m[key as usize];
                    let v = &mut self.v[key as usize];
                    let bc1 = 1.0 - beta1.powi(self.steps as i32);
                    let bc2 = 1.0 - beta2.powi(self.steps as i32);
                    let theta = model.group_data_mut(key);
                    for i in 0..theta.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let mhat = m[i] / bc1;
                        let vhat = v[i] / bc2;
                        theta[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Everything `fit` needs besides the data and the loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning-rate multiplier applied after each epoch, in (0, 1].
    pub lr_decay_gamma: f64,
    pub optimizer: OptimizerKind,
    pub l1_weight: f64,
    pub l2_weight: f64,
    #[serde(default)]
    pub l1_scope: RegScope,
    /// Parameter groups to clip at zero after each step, by dotted name
    /// (or the single entry "all"). `None` disables the projection, which
    /// is the right choice when the impact activation is a softplus.
    pub nonnegative: Option<Vec<String>>,
    pub memory_size: usize,
    pub rng_seed: u64,
    /// Fraction of sequences held out for per-epoch validation.
    pub validation_fraction: f64,
    /// Shuffle samples each epoch (disable for reproducing exact orders).
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

fn default_true() -> bool {
    true
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 10,
            batch_size: 128,
            learning_rate: 0.01,
            lr_decay_gamma: 0.95,
            optimizer: OptimizerKind::default(),
            l1_weight: 0.0,
            l2_weight: 0.0,
            l1_scope: RegScope::default(),
            nonnegative: Some(vec!["all".into()]),
            memory_size: 64,
            rng_seed: 0,
            validation_fraction: 0.0,
            shuffle: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch size must be ≥ 1".into(),
            ));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be ≥ 0".into()));
        }
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay_gamma must be in (0, 1]".into()));
        }
        if self.l1_weight < 0.0 || self.l2_weight < 0.0 {
            return Err(Error::InvalidConfig("regularizer weights must be ≥ 0".into()));
        }
        if self.memory_size == 0 {
            return Err(Error::InvalidConfig("memorysize must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(
                "validation_fraction must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the training report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
    pub total_seconds: f64,
}

impl TrainingReport {
    /// Line-oriented JSON, one epoch per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1_keys(scope: &RegScope, model: &HawkesModel) -> Result<Vec<GroupKey>> {
    match scope {
        RegScope::ImpactCoefficients => Ok(model
            .group_keys()
            .into_iter()
            .filter(|k| k.is_impact_coefficient())
            .collect()),
        RegScope::AllTrainable => Ok(model
            .group_keys()
            .into_iter()
            .filter(|&k| model.group_trainable(k))
            .collect()),
        RegScope::Groups(names) => resolve_group_names(names, model),
    }
}

/// Resolve dotted group names (or "all") against the model's live groups.
pub fn resolve_group_names(names: &[String], model: &HawkesModel) -> Result<Vec<GroupKey>> {
    let present = model.group_keys();
    if names.len() == 1 && names[0] == "all" {
        return Ok(present);
    }
    let mut out = Vec::new();
    for name in names {
        match present.iter().find(|&&k| model.group_name(k) == *name) {
            Some(&k) => out.push(k),
            None => {
                let valid: Vec<String> = present.iter().map(|&k| model.group_name(k)).collect();
                return Err(Error::InvalidConfig(format!(
                    "unknown parameter group '{name}' (model has: {})",
                    valid.join(", ")
                )));
            }
        }
    }
    Ok(out)
}

fn add_regularizer_grads(
    model: &HawkesModel,
    grads: &mut ModelGrads,
    l1_weight: f64,
    l1: &[GroupKey],
    l2_weight: f64,
) {
    if l1_weight > 0.0 {
        for &k in l1 {
            let theta = model.group_data(k);
            let slot = grads.slot_mut(k);
            for (g, &t) in slot.iter_mut().zip(theta) {
                *g += l1_weight * sign(t);
            }
        }
    }
    if l2_weight > 0.0 {
        for &k in &ALL_KEYS {
            if !model.has_group(k) || !model.group_trainable(k) {
                continue;
            }
            let theta = model.group_data(k);
            let slot = grads.slot_mut(k);
            for (g, &t) in slot.iter_mut().zip(theta) {
                *g += 2.0 * l2_weight * t;
            }
        }
    }
}

/// Clip the listed groups at zero. Idempotent.
pub fn project_nonnegative(model: &mut HawkesModel, keys: &[GroupKey]) {
    for &k in keys {
        for x in model.group_data_mut(k) {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
    }
}

/// Average per-sample loss over the selected sequences, no updates.
fn average_loss_over(
    model: &HawkesModel,
    db: &Database,
    seq_indices: &[usize],
    memory_size: usize,
    kind: LossKind,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for &s in seq_indices {
        let seq = &db.sequences[s];
        for i in 0..seq.len() {
            let sample = sample_for_event(seq, s, i, memory_size, db.num_types);
            total += loss_value(model, std::slice::from_ref(&sample), kind)?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoSamples);
    }
    Ok(total / n as f64)
}

/// Average per-sample loss over a whole corpus without updating parameters.
/// Deterministic given the model and data.
pub fn validation(
    model: &HawkesModel,
    db: &Database,
    cfg: &FitConfig,
    kind: LossKind,
) -> Result<f64> {
    let all: Vec<usize> = (0..db.sequences.len()).collect();
    average_loss_over(model, db, &all, cfg.memory_size, kind)
}

/// Train the model on the corpus.
///
/// Each epoch runs shuffled mini-batches; per step the objective is the
/// batch loss plus the configured penalties, optimized by the configured
/// rule, followed by the nonnegativity projection. The learning rate is
/// multiplied by `lr_decay_gamma` after every epoch. The reported per-epoch
/// `train_loss` is the data loss averaged over the training samples with
/// the post-epoch parameters, so with `validation_fraction = 0` it matches
/// a subsequent `validation` call on the same data.
pub fn fit(
    model: &mut HawkesModel,
    db: &Database,
    cfg: &FitConfig,
    kind: LossKind,
) -> Result<TrainingReport> {
    cfg.validate()?;
    let start = Instant::now();

    // split sequences into train/validation
    let mut order: Vec<usize> = (0..db.sequences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    if cfg.validation_fraction > 0.0 {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    let n_val = (cfg.validation_fraction * order.len() as f64).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_idx: Vec<usize> = {
        let mut v = train_idx.to_vec();
        v.sort_unstable();
        v
    };
    let val_idx: Vec<usize> = {
        let mut v = val_idx.to_vec();
        v.sort_unstable();
        v
    };
    let train_events: usize = train_idx.iter().map(|&s| db.sequences[s].len()).sum();
    if train_events == 0 {
        return Err(Error::NoSamples);
    }

    let l1 = l1_keys(&cfg.l1_scope, model)?;
    let nonneg = match &cfg.nonnegative {
        Some(names) => resolve_group_names(names, model)?,
        None => Vec::new(),
    };
    let mut optimizer = Optimizer::new(cfg.optimizer, model);
    let mut lr = cfg.learning_rate;
    let mut report = TrainingReport::default();

    for epoch in 1..=cfg.epochs {
        let epoch_start = Instant::now();
        let stream = make_samples_for(
            db,
            &train_idx,
            cfg.memory_size,
            cfg.batch_size,
            cfg.shuffle,
            cfg.rng_seed.wrapping_add(epoch as u64),
        )?;
        for (step, batch) in stream.enumerate() {
            let (loss, mut grads) = loss_and_grad(model, &batch, kind)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    value: loss,
                });
            }
            add_regularizer_grads(model, &mut grads, cfg.l1_weight, &l1, cfg.l2_weight);
            optimizer.step(model, &grads, lr);
            if !nonneg.is_empty() {
                project_nonnegative(model, &nonneg);
            }
        }
        let train_loss = average_loss_over(model, db, &train_idx, cfg.memory_size, kind)?;
        let val_loss = if val_idx.is_empty() {
            None
        } else {
            Some(average_loss_over(model, db, &val_idx, cfg.memory_size, kind)?)
        };
        report.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
        lr *= cfg.lr_decay_gamma;
    }

    report.total_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Full-sequence negative log-likelihood including the censored tail
/// interval `[t_last, t_stop]` of every sequence. Evaluation-only companion
/// to the per-event training losses.
pub fn full_sequence_neg_log_likelihood(
    model: &HawkesModel,
    db: &Database,
    memory_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (s, seq) in db.sequences.iter().enumerate() {
        for i in 0..seq.len() {
            let sample = sample_for_event(seq, s, i, memory_size, db.num_types);
            let lambda = model.intensity(&sample, sample.target_type)?;
            if lambda <= 0.0 {
                return Err(Error::NonPositiveIntensity {
                    seq_index: s,
                    time: sample.target_time,
                });
            }
            let counts = model.expected_counts(&sample)?;
            total += counts.iter().sum::<f64>() - lambda.ln();
        }
        // censored tail: compensator mass after the last event
        let t_lo = seq.times.last().copied().unwrap_or(seq.t_start);
        if seq.t_stop > t_lo {
            let m = memory_size;
            let n = seq.len();
            let lo = n.saturating_sub(m);
            let mut hist_types = vec![db.num_types; m];
            let mut hist_times = vec![seq.t_start; m];
            for k in 0..(n - lo) {
                hist_types[m - (n - lo) + k] = seq.events[lo + k];
                hist_times[m - (n - lo) + k] = seq.times[lo + k];
            }
            let mut counts = vec![0.0; model.num_types()];
            model.expected_counts_between(
                crate::model::HistoryView {
                    types: &hist_types,
                    times: &hist_times,
                },
                crate::model::SeqCtx {
                    seq_index: s,
                    feature: seq.seq_feature.as_deref(),
                },
                t_lo,
                seq.t_stop,
                &mut counts,
            )?;
            total += counts.iter().sum::<f64>();
        }
    }
    Ok(total)
}
