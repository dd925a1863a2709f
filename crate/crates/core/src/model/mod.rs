//! The composed intensity model.
//!
//! λ_c(t) = g_λ( μ_c(f_c, f_s) + Σ_{history j} Σ_m α_{c c_j m}(f_c, f_{c_j}) · κ_m(t − t_j) )
//!
//! where μ comes from an exogenous model, α from an impact-coefficient
//! model, κ from a [`KernelBank`](crate::kernels::KernelBank), and g_λ is an
//! outer [`Activation`]. Histories are bounded: an intensity conditions on
//! at most `memory_size` past events, matching the batch sampler.
//!
//! Evaluation never mutates the model, so a model can be shared read-only
//! across workers; gradient accumulation happens in a separate
//! [`ModelGrads`] value per worker.

mod activation;
mod grads;

pub use activation::Activation;
pub use grads::{GroupKey, ModelGrads, ParamGroup, ALL_KEYS, GROUP_COUNT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Database, FeatureMatrix};
use crate::error::{Error, Result};
use crate::kernels::KernelBank;
use crate::math::gauss_legendre;
use crate::preprocess::TrainingSample;

/// Exogenous-intensity families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExoKind {
    /// μ_c, raw lookup.
    Constant,
    /// g(μ_c).
    Naive,
    /// g(w_c · f_s).
    Linear,
    /// One-hidden-layer network over [f_c; f_s].
    Neural,
}

/// Impact-coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ImpactKind {
    /// α_{cc'm}, raw lookup.
    Basic,
    /// g(α_{cc'm}).
    Naive,
    /// g(u_{cm} · v_{c'm}) with latent dimension d.
    Factorized { dim: usize },
    /// g(w_{cm} · f_{c'}).
    Linear,
    /// g(f_c · W_m · f_{c'}).
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoSpec {
    pub kind: ExoKind,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSpec {
    pub kind: ImpactKind,
    pub activation: Activation,
}

/// Kernel family plus concrete initial parameters and trainable flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Exponential { omega: f64, delta: f64 },
    Rayleigh { omega: f64 },
    Gaussian { sigma: f64 },
    Powerlaw { omega: f64, delta: f64 },
    Gate { omega: f64, delta: f64 },
    MultiGauss { centers: Vec<f64>, widths: Vec<f64> },
}

impl KernelSpec {
    pub fn build(&self, trainable: (bool, bool)) -> Result<KernelBank> {
        let bank = match self {
            KernelSpec::Exponential { omega, delta } => KernelBank::exponential(*omega, *delta)?,
            KernelSpec::Rayleigh { omega } => KernelBank::rayleigh(*omega)?,
            KernelSpec::Gaussian { sigma } => KernelBank::gaussian(*sigma)?,
            KernelSpec::Powerlaw { omega, delta } => KernelBank::powerlaw(*omega, *delta)?,
            KernelSpec::Gate { omega, delta } => KernelBank::gate(*omega, *delta)?,
            KernelSpec::MultiGauss { centers, widths } => {
                KernelBank::multi_gauss(centers.clone(), widths.clone())?
            }
        };
        Ok(bank.with_trainable(trainable.0, trainable.1))
    }

    /// Evenly spaced multi-Gaussian grid on `[0, t_max]` with widths equal
    /// to half the spacing.
    pub fn multi_gauss_grid(basis: usize, t_max: f64) -> KernelSpec {
        let basis = basis.max(2);
        let t_max = if t_max > 0.0 { t_max } else { 1.0 };
        let spacing = t_max / (basis - 1) as f64;
        let centers: Vec<f64> = (0..basis).map(|m| m as f64 * spacing).collect();
        let widths = vec![spacing / 2.0; basis];
        KernelSpec::MultiGauss { centers, widths }
    }
}

/// Where per-sequence features come from at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SeqFeatureSource {
    /// The model ignores sequence features.
    None,
    /// Features are supplied with each sample.
    Given { dim: usize },
    /// A learnable S × dim table indexed by sequence.
    Embedded { dim: usize, count: usize },
}

/// Where per-type features come from at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum EventFeatureSource {
    None,
    /// Fixed D_e × C matrix captured from the corpus.
    Given(FeatureMatrix),
    /// A learnable (C+1) × dim table; the pad row stays zero.
    Embedded { dim: usize },
}

/// Composition choices and hyperparameters; `build` instantiates the model
/// against a corpus's dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub memory_size: usize,
    pub exogenous: ExoSpec,
    pub impact: ImpactSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub kernel_trainable: (bool, bool),
    pub outer: Activation,
    /// Width of embedding fallbacks when the corpus lacks features.
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    /// Hidden width of the neural exogenous model.
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    /// Gauss–Legendre node count for compensators under nonlinear outer
    /// activations.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    /// Seed for parameter initialization.
    #[serde(default)]
    pub init_seed: u64,
}

fn default_embed_dim() -> usize {
    8
}

fn default_hidden_dim() -> usize {
    16
}

fn default_quadrature() -> usize {
    16
}

/// Corpus dimensions a model is instantiated against.
#[derive(Debug, Clone)]
pub struct DataDims {
    pub num_types: usize,
    pub num_seqs: usize,
    pub seq_feature_dim: Option<usize>,
    pub event_features: Option<FeatureMatrix>,
}

impl DataDims {
    pub fn from_database(db: &Database) -> Self {
        DataDims {
            num_types: db.num_types,
            num_seqs: db.sequences.len(),
            seq_feature_dim: db.seq_feature_dim(),
            event_features: db.event_features.clone(),
        }
    }

    /// Dimensions with no features and a single sequence slot.
    pub fn bare(num_types: usize) -> Self {
        DataDims {
            num_types,
            num_seqs: 1,
            seq_feature_dim: None,
            event_features: None,
        }
    }
}

/// Per-sample sequence context: the sample's feature vector (if the corpus
/// carries one) and its sequence index (for embedding lookups).
#[derive(Debug, Clone, Copy)]
pub struct SeqCtx<'a> {
    pub seq_index: usize,
    pub feature: Option<&'a [f64]>,
}

impl<'a> SeqCtx<'a> {
    pub fn from_sample(sample: &'a TrainingSample) -> Self {
        SeqCtx {
            seq_index: sample.seq_index,
            feature: sample.seq_feature.as_deref(),
        }
    }
}

/// A borrowed event history: types and times of the same length, padded
/// entries carrying the null type index C.
#[derive(Debug, Clone, Copy)]
pub struct HistoryView<'a> {
    pub types: &'a [usize],
    pub times: &'a [f64],
}

impl<'a> HistoryView<'a> {
    pub fn from_sample(sample: &'a TrainingSample) -> Self {
        HistoryView {
            types: &sample.history_types,
            times: &sample.history_times,
        }
    }
}

/// Per-sample loss adjoints driving the backward pass: one adjoint for the
/// intensity at the observed event, and one per type for the expected-count
/// vector.
#[derive(Debug, Clone)]
pub struct LossAdjoints {
    pub wrt_intensity: Vec<f64>,
    pub wrt_counts: Vec<Vec<f64>>,
}

impl LossAdjoints {
    pub fn zeros(batch: usize, num_types: usize) -> Self {
        LossAdjoints {
            wrt_intensity: vec![0.0; batch],
            wrt_counts: vec![vec![0.0; num_types]; batch],
        }
    }
}

/// The composed point process model and all of its learnable parameters.
#[derive(Debug, Clone)]
pub struct HawkesModel {
    num_types: usize,
    memory_size: usize,
    exo: ExoSpec,
    impact: ImpactSpec,
    kernels: KernelBank,
    outer: Activation,
    seq_source: SeqFeatureSource,
    event_source: EventFeatureSource,
    hidden_dim: usize,
    quadrature: usize,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    groups: Vec<Option<ParamGroup>>,
}

impl ModelConfig {
    /// Instantiate the model against a corpus. Feature-hungry components
    /// fall back to learnable embeddings when the corpus lacks features.
    pub fn build(&self, dims: &DataDims) -> Result<HawkesModel> {
        let needs_seq = matches!(self.exogenous.kind, ExoKind::Linear | ExoKind::Neural);
        let needs_event = matches!(self.exogenous.kind, ExoKind::Neural)
            || matches!(
                self.impact.kind,
                ImpactKind::Linear | ImpactKind::Bilinear
            );
        let seq_source = if needs_seq {
            match dims.seq_feature_dim {
                Some(dim) => SeqFeatureSource::Given { dim },
                None => SeqFeatureSource::Embedded {
                    dim: self.embed_dim,
                    count: dims.num_seqs.max(1),
                },
            }
        } else {
            SeqFeatureSource::None
        };
        let event_source = if needs_event {
            match &dims.event_features {
                Some(m) => EventFeatureSource::Given(m.clone()),
                None => EventFeatureSource::Embedded {
                    dim: self.embed_dim,
                },
            }
        } else {
            EventFeatureSource::None
        };
        self.build_with_sources(dims.num_types, seq_source, event_source)
    }

    /// Instantiate with explicit feature sources (used by manifest loading).
    pub fn build_with_sources(
        &self,
        num_types: usize,
        seq_source: SeqFeatureSource,
        event_source: EventFeatureSource,
    ) -> Result<HawkesModel> {
        if num_types == 0 {
            return Err(Error::InvalidConfig("model needs at least one type".into()));
        }
        if self.memory_size == 0 {
            return Err(Error::InvalidConfig("memory_size must be ≥ 1".into()));
        }
        if self.quadrature == 0 {
            return Err(Error::InvalidConfig("quadrature must be ≥ 1".into()));
        }
        self.exogenous.activation.validate()?;
        self.impact.activation.validate()?;
        self.outer.validate()?;
        if let ImpactKind::Factorized { dim } = self.impact.kind {
            if dim == 0 {
                return Err(Error::InvalidConfig("factorized dim must be ≥ 1".into()));
            }
        }

        let kernels = self.kernel.build(self.kernel_trainable)?;
        let c = num_types;
        let m = kernels.basis();
        let ds = match seq_source {
            SeqFeatureSource::None => 0,
            SeqFeatureSource::Given { dim } => dim,
            SeqFeatureSource::Embedded { dim, .. } => dim,
        };
        let de = match &event_source {
            EventFeatureSource::None => 0,
            EventFeatureSource::Given(mat) => mat.dim,
            EventFeatureSource::Embedded { dim } => *dim,
        };

        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let uniform = |lo: f64, hi: f64, n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
        };

        let mut groups: Vec<Option<ParamGroup>> = vec![None; GROUP_COUNT];
        let set = |key: GroupKey, g: ParamGroup, groups: &mut Vec<Option<ParamGroup>>| {
            groups[key as usize] = Some(g);
        };

        // exogenous parameters
        let mu_hi = 0.5 / c as f64;
        let mu_lo = 0.1 / c as f64;
        match self.exogenous.kind {
            ExoKind::Constant | ExoKind::Naive => {
                let data = uniform(mu_lo, mu_hi, c, &mut rng);
                set(GroupKey::ExoMu, ParamGroup::new(data, vec![c], true), &mut groups);
            }
            ExoKind::Linear => {
                let scale = mu_hi / ds.max(1) as f64;
                let data = uniform(0.2 * scale, scale, c * ds, &mut rng);
                set(
                    GroupKey::ExoWeights,
                    ParamGroup::new(data, vec![c, ds], true),
                    &mut groups,
                );
            }
            ExoKind::Neural => {
                let h = self.hidden_dim.max(1);
                let din = de + ds;
                let w1: Vec<f64> = (0..h * din).map(|_| normal.sample(&mut rng)).collect();
                let w2: Vec<f64> = (0..h).map(|_| normal.sample(&mut rng)).collect();
                set(GroupKey::ExoW1, ParamGroup::new(w1, vec![h, din], true), &mut groups);
                set(GroupKey::ExoB1, ParamGroup::new(vec![0.0; h], vec![h], true), &mut groups);
                set(GroupKey::ExoW2, ParamGroup::new(w2, vec![h], true), &mut groups);
                let b2 = uniform(mu_lo, mu_hi, 1, &mut rng);
                set(GroupKey::ExoB2, ParamGroup::new(b2, vec![1], true), &mut groups);
            }
        }

        // impact parameters
        let a_hi = 0.1 / (c * m) as f64;
        match self.impact.kind {
            ImpactKind::Basic | ImpactKind::Naive => {
                let data = uniform(0.0, a_hi, c * c * m, &mut rng);
                set(
                    GroupKey::ImpactAlpha,
                    ParamGroup::new(data, vec![c, c, m], true),
                    &mut groups,
                );
            }
            ImpactKind::Factorized { dim } => {
                let scale = (a_hi / dim as f64).sqrt();
                let u = uniform(0.0, scale, c * m * dim, &mut rng);
                let v = uniform(0.0, scale, c * m * dim, &mut rng);
                set(GroupKey::ImpactU, ParamGroup::new(u, vec![c, m, dim], true), &mut groups);
                set(GroupKey::ImpactV, ParamGroup::new(v, vec![c, m, dim], true), &mut groups);
            }
            ImpactKind::Linear => {
                let scale = a_hi / de.max(1) as f64;
                let data = uniform(0.0, scale, c * m * de, &mut rng);
                set(
                    GroupKey::ImpactW,
                    ParamGroup::new(data, vec![c, m, de], true),
                    &mut groups,
                );
            }
            ImpactKind::Bilinear => {
                let scale = a_hi / (de * de).max(1) as f64;
                let data = uniform(0.0, scale, m * de * de, &mut rng);
                set(
                    GroupKey::ImpactWm,
                    ParamGroup::new(data, vec![m, de, de], true),
                    &mut groups,
                );
            }
        }

        // embedding fallbacks
        if let SeqFeatureSource::Embedded { dim, count } = seq_source {
            let data: Vec<f64> = (0..count * dim).map(|_| normal.sample(&mut rng)).collect();
            set(
                GroupKey::SeqEmbed,
                ParamGroup::new(data, vec![count, dim], true),
                &mut groups,
            );
        }
        if let EventFeatureSource::Embedded { dim } = event_source {
            let mut data: Vec<f64> = (0..(c + 1) * dim).map(|_| normal.sample(&mut rng)).collect();
            // pad row embeds to zero and stays there
            for x in data[c * dim..].iter_mut() {
                *x = 0.0;
            }
            set(
                GroupKey::EventEmbed,
                ParamGroup::new(data, vec![c + 1, dim], true),
                &mut groups,
            );
        }

        let (gl_nodes, gl_weights) = gauss_legendre(self.quadrature);
        Ok(HawkesModel {
            num_types,
            memory_size: self.memory_size,
            exo: self.exogenous.clone(),
            impact: self.impact.clone(),
            kernels,
            outer: self.outer,
            seq_source,
            event_source,
            hidden_dim: self.hidden_dim.max(1),
            quadrature: self.quadrature,
            gl_nodes,
            gl_weights,
            groups,
        })
    }
}

impl HawkesModel {
    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn memory_size(&self) -> usize {
        self.memory_size
    }

    pub fn kernels(&self) -> &KernelBank {
        &self.kernels
    }

    pub fn outer_activation(&self) -> Activation {
        self.outer
    }

    pub fn exo_spec(&self) -> &ExoSpec {
        &self.exo
    }

    pub fn impact_spec(&self) -> &ImpactSpec {
        &self.impact
    }

    pub fn seq_source(&self) -> SeqFeatureSource {
        self.seq_source
    }

    pub fn event_source(&self) -> &EventFeatureSource {
        &self.event_source
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Mark a parameter group trainable or frozen.
    pub fn set_group_trainable(&mut self, key: GroupKey, trainable: bool) {
        match key {
            GroupKey::KernelP0 => {
                let p1 = self.kernels.p1_trainable();
                self.kernels.set_trainable(trainable, p1);
            }
            GroupKey::KernelP1 => {
                let p0 = self.kernels.p0_trainable();
                self.kernels.set_trainable(p0, trainable);
            }
            _ => {
                if let Some(g) = self.groups[key as usize].as_mut() {
                    g.trainable = trainable;
                }
            }
        }
    }

    /// Replace the fixed event-feature matrix (manifest loading).
    pub(crate) fn set_event_features(&mut self, m: FeatureMatrix) -> Result<()> {
        match &self.event_source {
            EventFeatureSource::Given(old) if old.dim == m.dim && old.num_cols == m.num_cols => {
                self.event_source = EventFeatureSource::Given(m);
                Ok(())
            }
            _ => Err(Error::ShapeMismatch("event feature matrix".into())),
        }
    }

    // ---- parameter group plumbing -------------------------------------

    /// Keys of the groups this model actually has, in canonical order.
    pub fn group_keys(&self) -> Vec<GroupKey> {
        ALL_KEYS
            .iter()
            .copied()
            .filter(|&k| self.has_group(k))
            .collect()
    }

    pub fn has_group(&self, key: GroupKey) -> bool {
        match key {
            GroupKey::KernelP0 => true,
            GroupKey::KernelP1 => !self.kernels.p1().is_empty(),
            _ => self.groups[key as usize].is_some(),
        }
    }

    pub fn group_data(&self, key: GroupKey) -> &[f64] {
        match key {
            GroupKey::KernelP0 => self.kernels.p0(),
            GroupKey::KernelP1 => self.kernels.p1(),
            _ => &self.groups[key as usize].as_ref().expect("group present").data,
        }
    }

    pub fn group_data_mut(&mut self, key: GroupKey) -> &mut [f64] {
        match key {
            GroupKey::KernelP0 => self.kernels.p0_mut(),
            GroupKey::KernelP1 => self.kernels.p1_mut(),
            _ => &mut self.groups[key as usize].as_mut().expect("group present").data,
        }
    }

    pub fn group_shape(&self, key: GroupKey) -> Vec<usize> {
        match key {
            GroupKey::KernelP0 => vec![self.kernels.p0().len()],
            GroupKey::KernelP1 => vec![self.kernels.p1().len()],
            _ => self.groups[key as usize].as_ref().expect("group present").shape.clone(),
        }
    }

    pub fn group_trainable(&self, key: GroupKey) -> bool {
        match key {
            GroupKey::KernelP0 => self.kernels.p0_trainable(),
            GroupKey::KernelP1 => self.kernels.p1_trainable(),
            _ => self.groups[key as usize]
                .as_ref()
                .map(|g| g.trainable)
                .unwrap_or(false),
        }
    }

    /// Dotted display name, kernel slots resolved per family.
    pub fn group_name(&self, key: GroupKey) -> String {
        match key {
            GroupKey::KernelP0 => self.kernels.slot_names().0.to_string(),
            GroupKey::KernelP1 => self.kernels.slot_names().1.unwrap_or("kernel.p1").to_string(),
            _ => key.base_name().to_string(),
        }
    }

    /// Group sizes for building an aligned [`ModelGrads`].
    pub fn group_sizes(&self) -> [usize; GROUP_COUNT] {
        let mut out = [0usize; GROUP_COUNT];
        for &k in &ALL_KEYS {
            if self.has_group(k) {
                out[k as usize] = self.group_data(k).len();
            }
        }
        out
    }

    pub fn new_grads(&self) -> ModelGrads {
        ModelGrads::with_sizes(&self.group_sizes())
    }

    /// Total number of parameters, trainable or not.
    pub fn num_params(&self) -> usize {
        self.group_keys().iter().map(|&k| self.group_data(k).len()).sum()
    }

    // ---- feature resolution -------------------------------------------

    fn resolved_seq_feat<'a>(&'a self, ctx: SeqCtx<'a>) -> Result<&'a [f64]> {
        match self.seq_source {
            SeqFeatureSource::None => Err(Error::MissingFeatures(
                "model does not use sequence features".into(),
            )),
            SeqFeatureSource::Given { dim } => {
                let f = ctx.feature.ok_or_else(|| {
                    Error::MissingFeatures("sample carries no sequence feature".into())
                })?;
                if f.len() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "sequence feature has length {}, model expects {dim}",
                        f.len()
                    )));
                }
                Ok(f)
            }
            SeqFeatureSource::Embedded { dim, count } => {
                if ctx.seq_index >= count {
                    return Err(Error::ShapeMismatch(format!(
                        "sequence index {} outside embedding table of {count}",
                        ctx.seq_index
                    )));
                }
                let data = self.group_data(GroupKey::SeqEmbed);
                Ok(&data[ctx.seq_index * dim..(ctx.seq_index + 1) * dim])
            }
        }
    }

    /// Feature of event type `c`; `c` may be the pad index C under the
    /// embedding fallback (the frozen zero row).
    fn event_feat(&self, c: usize) -> &[f64] {
        match &self.event_source {
            EventFeatureSource::None => &[],
            EventFeatureSource::Given(m) => m.col(c),
            EventFeatureSource::Embedded { dim } => {
                let data = self.group_data(GroupKey::EventEmbed);
                &data[c * dim..(c + 1) * dim]
            }
        }
    }

    // ---- exogenous intensity -------------------------------------------

    /// μ_c(f_c, f_s): the time-independent exogenous intensity of type `c`.
    pub fn exo_value(&self, c: usize, ctx: SeqCtx<'_>) -> Result<f64> {
        debug_assert!(c < self.num_types);
        let g = self.exo.activation;
        match self.exo.kind {
            ExoKind::Constant => Ok(self.group_data(GroupKey::ExoMu)[c]),
            ExoKind::Naive => Ok(g.value(self.group_data(GroupKey::ExoMu)[c])),
            ExoKind::Linear => {
                let f = self.resolved_seq_feat(ctx)?;
                let w = self.group_data(GroupKey::ExoWeights);
                let ds = f.len();
                let pre = dot(&w[c * ds..(c + 1) * ds], f);
                Ok(g.value(pre))
            }
            ExoKind::Neural => {
                let (out, _, _) = self.neural_forward(c, ctx)?;
                Ok(out)
            }
        }
    }

    /// Forward pass of the neural exogenous model, returning the output and
    /// the intermediate pre-activations needed by the backward pass.
    fn neural_forward(&self, c: usize, ctx: SeqCtx<'_>) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let g = self.exo.activation;
        let fc = self.event_feat(c);
        let fs = self.resolved_seq_feat(ctx)?;
        let din = fc.len() + fs.len();
        let h = self.hidden_dim;
        let w1 = self.group_data(GroupKey::ExoW1);
        let b1 = self.group_data(GroupKey::ExoB1);
        let w2 = self.group_data(GroupKey::ExoW2);
        let b2 = self.group_data(GroupKey::ExoB2)[0];

        let mut z = Vec::with_capacity(din);
        z.extend_from_slice(fc);
        z.extend_from_slice(fs);
        let mut hpre = vec![0.0; h];
        for j in 0..h {
            hpre[j] = b1[j] + dot(&w1[j * din..(j + 1) * din], &z);
        }
        let mut out_pre = b2;
        for j in 0..h {
            out_pre += w2[j] * g.value(hpre[j]);
        }
        Ok((g.value(out_pre), z, hpre))
    }

    fn exo_backward(&self, c: usize, ctx: SeqCtx<'_>, adjoint: f64, grads: &mut ModelGrads) {
        if adjoint == 0.0 {
            return;
        }
        let g = self.exo.activation;
        match self.exo.kind {
            ExoKind::Constant => grads.add(GroupKey::ExoMu, c, adjoint),
            ExoKind::Naive => {
                let pre = self.group_data(GroupKey::ExoMu)[c];
                grads.add(GroupKey::ExoMu, c, adjoint * g.grad(pre));
            }
            ExoKind::Linear => {
                let f = self.resolved_seq_feat(ctx).expect("checked in forward");
                let ds = f.len();
                let w = self.group_data(GroupKey::ExoWeights);
                let pre = dot(&w[c * ds..(c + 1) * ds], f);
                let a = adjoint * g.grad(pre);
                for k in 0..ds {
                    grads.add(GroupKey::ExoWeights, c * ds + k, a * f[k]);
                }
                if matches!(self.seq_source, SeqFeatureSource::Embedded { .. }) {
                    let wc: Vec<f64> = w[c * ds..(c + 1) * ds].to_vec();
                    let row = ctx.seq_index * ds;
                    for k in 0..ds {
                        grads.add(GroupKey::SeqEmbed, row + k, a * wc[k]);
                    }
                }
            }
            ExoKind::Neural => {
                let (_, z, hpre) = self.neural_forward(c, ctx).expect("checked in forward");
                let h = self.hidden_dim;
                let din = z.len();
                let w1 = self.group_data(GroupKey::ExoW1).to_vec();
                let w2 = self.group_data(GroupKey::ExoW2).to_vec();
                let b2 = self.group_data(GroupKey::ExoB2)[0];
                let mut out_pre = b2;
                for j in 0..h {
                    out_pre += w2[j] * g.value(hpre[j]);
                }
                let a_out = adjoint * g.grad(out_pre);
                grads.add(GroupKey::ExoB2, 0, a_out);
                let mut a_z = vec![0.0; din];
                for j in 0..h {
                    grads.add(GroupKey::ExoW2, j, a_out * g.value(hpre[j]));
                    let a_hpre = a_out * w2[j] * g.grad(hpre[j]);
                    grads.add(GroupKey::ExoB1, j, a_hpre);
                    for k in 0..din {
                        grads.add(GroupKey::ExoW1, j * din + k, a_hpre * z[k]);
                        a_z[k] += a_hpre * w1[j * din + k];
                    }
                }
                let de = self.event_feat(c).len();
                if matches!(self.event_source, EventFeatureSource::Embedded { .. }) {
                    let dim = de;
                    for k in 0..dim {
                        grads.add(GroupKey::EventEmbed, c * dim + k, a_z[k]);
                    }
                }
                if matches!(self.seq_source, SeqFeatureSource::Embedded { .. }) {
                    let ds = din - de;
                    let row = ctx.seq_index * ds;
                    for k in 0..ds {
                        grads.add(GroupKey::SeqEmbed, row + k, a_z[de + k]);
                    }
                }
            }
        }
    }

    // ---- impact coefficients --------------------------------------------

    /// α_{cc'm} for all m. The null pad source (c' = C) contributes zeros.
    pub fn impact_coeff(&self, c: usize, c_src: usize) -> Result<Vec<f64>> {
        if c >= self.num_types || c_src > self.num_types {
            return Err(Error::TypeOutOfRange(c.max(c_src), self.num_types));
        }
        let mut out = vec![0.0; self.kernels.basis()];
        self.impact_coeff_into(c, c_src, &mut out);
        Ok(out)
    }

    fn impact_coeff_into(&self, c: usize, c_src: usize, out: &mut [f64]) {
        let m_count = self.kernels.basis();
        debug_assert_eq!(out.len(), m_count);
        if c_src == self.num_types {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let g = self.impact.activation;
        let c_total = self.num_types;
        match self.impact.kind {
            ImpactKind::Basic => {
                let a = self.group_data(GroupKey::ImpactAlpha);
                let base = (c * c_total + c_src) * m_count;
                out.copy_from_slice(&a[base..base + m_count]);
            }
            ImpactKind::Naive => {
                let a = self.group_data(GroupKey::ImpactAlpha);
                let base = (c * c_total + c_src) * m_count;
                for m in 0..m_count {
                    out[m] = g.value(a[base + m]);
                }
            }
            ImpactKind::Factorized { dim } => {
                let u = self.group_data(GroupKey::ImpactU);
                let v = self.group_data(GroupKey::ImpactV);
                for m in 0..m_count {
                    let ub = (c * m_count + m) * dim;
                    let vb = (c_src * m_count + m) * dim;
                    out[m] = g.value(dot(&u[ub..ub + dim], &v[vb..vb + dim]));
                }
            }
            ImpactKind::Linear => {
                let w = self.group_data(GroupKey::ImpactW);
                let f = self.event_feat(c_src);
                let de = f.len();
                for m in 0..m_count {
                    let wb = (c * m_count + m) * de;
                    out[m] = g.value(dot(&w[wb..wb + de], f));
                }
            }
            ImpactKind::Bilinear => {
                let wm = self.group_data(GroupKey::ImpactWm);
                let ft = self.event_feat(c);
                let fs = self.event_feat(c_src);
                let de = ft.len();
                for m in 0..m_count {
                    let mut pre = 0.0;
                    for r in 0..de {
                        if ft[r] != 0.0 {
                            pre += ft[r] * dot(&wm[(m * de + r) * de..(m * de + r + 1) * de], fs);
                        }
                    }
                    out[m] = g.value(pre);
                }
            }
        }
    }

    fn impact_backward(&self, c: usize, c_src: usize, adj: &[f64], grads: &mut ModelGrads) {
        if c_src == self.num_types {
            return;
        }
        let m_count = self.kernels.basis();
        let c_total = self.num_types;
        let g = self.impact.activation;
        match self.impact.kind {
            ImpactKind::Basic => {
                let base = (c * c_total + c_src) * m_count;
                for m in 0..m_count {
                    grads.add(GroupKey::ImpactAlpha, base + m, adj[m]);
                }
            }
            ImpactKind::Naive => {
                let a = self.group_data(GroupKey::ImpactAlpha);
                let base = (c * c_total + c_src) * m_count;
                for m in 0..m_count {
                    let coef = adj[m] * g.grad(a[base + m]);
                    grads.add(GroupKey::ImpactAlpha, base + m, coef);
                }
            }
            ImpactKind::Factorized { dim } => {
                let u = self.group_data(GroupKey::ImpactU);
                let v = self.group_data(GroupKey::ImpactV);
                for m in 0..m_count {
                    if adj[m] == 0.0 {
                        continue;
                    }
                    let ub = (c * m_count + m) * dim;
                    let vb = (c_src * m_count + m) * dim;
                    let pre = dot(&u[ub..ub + dim], &v[vb..vb + dim]);
                    let coef = adj[m] * g.grad(pre);
                    let u_row: Vec<f64> = u[ub..ub + dim].to_vec();
                    let v_row: Vec<f64> = v[vb..vb + dim].to_vec();
                    for k in 0..dim {
                        grads.add(GroupKey::ImpactU, ub + k, coef * v_row[k]);
                        grads.add(GroupKey::ImpactV, vb + k, coef * u_row[k]);
                    }
                }
            }
            ImpactKind::Linear => {
                let f: Vec<f64> = self.event_feat(c_src).to_vec();
                let de = f.len();
                let w = self.group_data(GroupKey::ImpactW);
                for m in 0..m_count {
                    if adj[m] == 0.0 {
                        continue;
                    }
                    let wb = (c * m_count + m) * de;
                    let pre = dot(&w[wb..wb + de], &f);
                    let coef = adj[m] * g.grad(pre);
                    let w_row: Vec<f64> = w[wb..wb + de].to_vec();
                    for k in 0..de {
                        grads.add(GroupKey::ImpactW, wb + k, coef * f[k]);
                    }
                    if matches!(self.event_source, EventFeatureSource::Embedded { .. }) {
                        for k in 0..de {
                            grads.add(GroupKey::EventEmbed, c_src * de + k, coef * w_row[k]);
                        }
                    }
                }
            }
            ImpactKind::Bilinear => {
                let ft: Vec<f64> = self.event_feat(c).to_vec();
                let fs: Vec<f64> = self.event_feat(c_src).to_vec();
                let de = ft.len();
                let wm = self.group_data(GroupKey::ImpactWm);
                let embedded = matches!(self.event_source, EventFeatureSource::Embedded { .. });
                for m in 0..m_count {
                    if adj[m] == 0.0 {
                        continue;
                    }
                    let mut pre = 0.0;
                    for r in 0..de {
                        pre += ft[r] * dot(&wm[(m * de + r) * de..(m * de + r + 1) * de], &fs);
                    }
                    let coef = adj[m] * g.grad(pre);
                    for r in 0..de {
                        for q in 0..de {
                            grads.add(
                                GroupKey::ImpactWm,
                                (m * de + r) * de + q,
                                coef * ft[r] * fs[q],
                            );
                        }
                    }
                    if embedded {
                        // d pre / d ft = W_m · fs ; d pre / d fs = W_mᵀ · ft
                        for r in 0..de {
                            let wfs = dot(&wm[(m * de + r) * de..(m * de + r + 1) * de], &fs);
                            grads.add(GroupKey::EventEmbed, c * de + r, coef * wfs);
                        }
                        for q in 0..de {
                            let mut wt = 0.0;
                            for r in 0..de {
                                wt += wm[(m * de + r) * de + q] * ft[r];
                            }
                            grads.add(GroupKey::EventEmbed, c_src * de + q, coef * wt);
                        }
                    }
                }
            }
        }
    }

    // ---- intensity and compensator ---------------------------------------

    /// Pre-activation Σ μ + Σ α·κ at time `t`.
    fn inner_at(&self, c: usize, t: f64, hist: HistoryView<'_>, ctx: SeqCtx<'_>) -> Result<f64> {
        let mut x = self.exo_value_pre_outer(c, ctx)?;
        let m_count = self.kernels.basis();
        let mut alpha = vec![0.0; m_count];
        let mut kappa = vec![0.0; m_count];
        for (&cj, &tj) in hist.types.iter().zip(hist.times) {
            if cj == self.num_types {
                continue;
            }
            let dt = (t - tj).max(0.0);
            self.impact_coeff_into(c, cj, &mut alpha);
            self.kernels.value_into(dt, &mut kappa);
            x += dot(&alpha, &kappa);
        }
        Ok(x)
    }

    /// Exogenous value as it enters the outer activation (identical to
    /// `exo_value`: the composition applies g_λ once, outside).
    fn exo_value_pre_outer(&self, c: usize, ctx: SeqCtx<'_>) -> Result<f64> {
        self.exo_value(c, ctx)
    }

    /// λ_c(t) for an arbitrary history and context.
    pub fn intensity_at(
        &self,
        c: usize,
        t: f64,
        hist: HistoryView<'_>,
        ctx: SeqCtx<'_>,
    ) -> Result<f64> {
        Ok(self.outer.value(self.inner_at(c, t, hist, ctx)?))
    }

    /// λ_c at the sample's target time given its bounded history.
    pub fn intensity(&self, sample: &TrainingSample, c: usize) -> Result<f64> {
        self.intensity_at(
            c,
            sample.target_time,
            HistoryView::from_sample(sample),
            SeqCtx::from_sample(sample),
        )
    }

    /// ∫_{t0}^{t1} λ_c(s) ds for every type, with the history held fixed.
    ///
    /// Exact in closed form when the outer activation is the identity;
    /// fixed-node Gauss–Legendre quadrature otherwise.
    pub fn expected_counts_between(
        &self,
        hist: HistoryView<'_>,
        ctx: SeqCtx<'_>,
        t0: f64,
        t1: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if t0 > t1 {
            return Err(Error::InvalidParameter(format!(
                "integration bounds reversed: [{t0}, {t1}]"
            )));
        }
        debug_assert_eq!(out.len(), self.num_types);
        let m_count = self.kernels.basis();
        if self.outer.is_identity() {
            let mut alpha = vec![0.0; m_count];
            let mut k_hi = vec![0.0; m_count];
            let mut k_lo = vec![0.0; m_count];
            for c in 0..self.num_types {
                let mut acc = self.exo_value_pre_outer(c, ctx)? * (t1 - t0);
                for (&cj, &tj) in hist.types.iter().zip(hist.times) {
                    if cj == self.num_types {
                        continue;
                    }
                    self.impact_coeff_into(c, cj, &mut alpha);
                    self.kernels.integral_into((t1 - tj).max(0.0), &mut k_hi);
                    self.kernels.integral_into((t0 - tj).max(0.0), &mut k_lo);
                    for m in 0..m_count {
                        acc += alpha[m] * (k_hi[m] - k_lo[m]);
                    }
                }
                out[c] = acc;
            }
        } else {
            let half = 0.5 * (t1 - t0);
            let mid = 0.5 * (t0 + t1);
            for x in out.iter_mut() {
                *x = 0.0;
            }
            for (xq, wq) in self.gl_nodes.iter().zip(&self.gl_weights) {
                let s = mid + half * xq;
                for c in 0..self.num_types {
                    let lam = self.outer.value(self.inner_at(c, s, hist, ctx)?);
                    out[c] += wq * half * lam;
                }
            }
        }
        Ok(())
    }

    /// Expected counts over the sample's inter-event interval
    /// `[prev_time, target_time]`.
    pub fn expected_counts(&self, sample: &TrainingSample) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_types];
        self.expected_counts_between(
            HistoryView::from_sample(sample),
            SeqCtx::from_sample(sample),
            sample.prev_time,
            sample.target_time,
            &mut out,
        )?;
        Ok(out)
    }

    /// Expected counts via Gauss–Legendre quadrature with an explicit node
    /// count, regardless of the outer activation. The second route for
    /// checking the closed-form compensator.
    pub fn expected_counts_via_quadrature(
        &self,
        sample: &TrainingSample,
        nodes: usize,
    ) -> Result<Vec<f64>> {
        let hist = HistoryView::from_sample(sample);
        let ctx = SeqCtx::from_sample(sample);
        let (t0, t1) = (sample.prev_time, sample.target_time);
        let (xs, ws) = gauss_legendre(nodes);
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        let mut out = vec![0.0; self.num_types];
        for (xq, wq) in xs.iter().zip(&ws) {
            let s = mid + half * xq;
            for (c, acc) in out.iter_mut().enumerate() {
                *acc += wq * half * self.outer.value(self.inner_at(c, s, hist, ctx)?);
            }
        }
        Ok(out)
    }

    // ---- backward -------------------------------------------------------

    fn backward_intensity(
        &self,
        sample: &TrainingSample,
        c: usize,
        adjoint: f64,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        if adjoint == 0.0 {
            return Ok(());
        }
        let hist = HistoryView::from_sample(sample);
        let ctx = SeqCtx::from_sample(sample);
        self.backward_intensity_at(c, sample.target_time, hist, ctx, adjoint, grads)
    }

    fn backward_intensity_at(
        &self,
        c: usize,
        t: f64,
        hist: HistoryView<'_>,
        ctx: SeqCtx<'_>,
        adjoint: f64,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        let inner = self.inner_at(c, t, hist, ctx)?;
        let a = adjoint * self.outer.grad(inner);
        if a == 0.0 {
            return Ok(());
        }
        self.exo_backward(c, ctx, a, grads);
        let m_count = self.kernels.basis();
        let kernel_trainable = self.kernels.p0_trainable() || self.kernels.p1_trainable();
        let mut alpha = vec![0.0; m_count];
        let mut kappa = vec![0.0; m_count];
        let mut adj_m = vec![0.0; m_count];
        for (&cj, &tj) in hist.types.iter().zip(hist.times) {
            if cj == self.num_types {
                continue;
            }
            let dt = (t - tj).max(0.0);
            self.kernels.value_into(dt, &mut kappa);
            for m in 0..m_count {
                adj_m[m] = a * kappa[m];
            }
            self.impact_backward(c, cj, &adj_m, grads);
            if kernel_trainable {
                self.impact_coeff_into(c, cj, &mut alpha);
                let kg = self.kernels.param_grad(dt)?;
                for m in 0..m_count {
                    grads.add(GroupKey::KernelP0, m, a * alpha[m] * kg.dk_dp0[m]);
                    if !kg.dk_dp1.is_empty() {
                        grads.add(GroupKey::KernelP1, m, a * alpha[m] * kg.dk_dp1[m]);
                    }
                }
            }
        }
        Ok(())
    }

    fn backward_counts(
        &self,
        sample: &TrainingSample,
        adj: &[f64],
        grads: &mut ModelGrads,
    ) -> Result<()> {
        if adj.iter().all(|&a| a == 0.0) {
            return Ok(());
        }
        let hist = HistoryView::from_sample(sample);
        let ctx = SeqCtx::from_sample(sample);
        let (t0, t1) = (sample.prev_time, sample.target_time);
        let m_count = self.kernels.basis();
        let kernel_trainable = self.kernels.p0_trainable() || self.kernels.p1_trainable();

        if self.outer.is_identity() {
            let mut alpha = vec![0.0; m_count];
            let mut k_hi = vec![0.0; m_count];
            let mut k_lo = vec![0.0; m_count];
            let mut adj_m = vec![0.0; m_count];
            for c in 0..self.num_types {
                let a = adj[c];
                if a == 0.0 {
                    continue;
                }
                self.exo_backward(c, ctx, a * (t1 - t0), grads);
                for (&cj, &tj) in hist.types.iter().zip(hist.times) {
                    if cj == self.num_types {
                        continue;
                    }
                    let dt_hi = (t1 - tj).max(0.0);
                    let dt_lo = (t0 - tj).max(0.0);
                    self.kernels.integral_into(dt_hi, &mut k_hi);
                    self.kernels.integral_into(dt_lo, &mut k_lo);
                    for m in 0..m_count {
                        adj_m[m] = a * (k_hi[m] - k_lo[m]);
                    }
                    self.impact_backward(c, cj, &adj_m, grads);
                    if kernel_trainable {
                        self.impact_coeff_into(c, cj, &mut alpha);
                        let g_hi = self.kernels.param_grad(dt_hi)?;
                        let g_lo = self.kernels.param_grad(dt_lo)?;
                        for m in 0..m_count {
                            grads.add(
                                GroupKey::KernelP0,
                                m,
                                a * alpha[m] * (g_hi.di_dp0[m] - g_lo.di_dp0[m]),
                            );
                            if !g_hi.di_dp1.is_empty() {
                                grads.add(
                                    GroupKey::KernelP1,
                                    m,
                                    a * alpha[m] * (g_hi.di_dp1[m] - g_lo.di_dp1[m]),
                                );
                            }
                        }
                    }
                }
            }
        } else {
            // differentiate through the quadrature nodes
            let half = 0.5 * (t1 - t0);
            let mid = 0.5 * (t0 + t1);
            for (xq, wq) in self.gl_nodes.iter().zip(&self.gl_weights) {
                let s = mid + half * xq;
                for c in 0..self.num_types {
                    let a = adj[c];
                    if a == 0.0 {
                        continue;
                    }
                    self.backward_intensity_at(c, s, hist, ctx, a * wq * half, grads)?;
                }
            }
        }
        Ok(())
    }

    /// Exact chain-rule gradients of every trainable parameter for a batch,
    /// driven by per-sample adjoints on the target intensity and on the
    /// expected-count vector. Zero adjoints yield zero gradients.
    pub fn model_param_grad(
        &self,
        batch: &[TrainingSample],
        adjoints: &LossAdjoints,
    ) -> Result<ModelGrads> {
        debug_assert_eq!(adjoints.wrt_intensity.len(), batch.len());
        debug_assert_eq!(adjoints.wrt_counts.len(), batch.len());
        let mut grads = self.new_grads();
        for (i, sample) in batch.iter().enumerate() {
            self.backward_intensity(sample, sample.target_type, adjoints.wrt_intensity[i], &mut grads)?;
            self.backward_counts(sample, &adjoints.wrt_counts[i], &mut grads)?;
        }
        // frozen slots contribute nothing
        for &k in &ALL_KEYS {
            if self.has_group(k) && !self.group_trainable(k) {
                grads.slot_mut(k).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        Ok(grads)
    }

    // ---- structure export -------------------------------------------------

    /// C×C Granger-causality adjacency: entry (c, c') = Σ_m α_{cc'm}·K_m(∞),
    /// the total mass of type c'’s influence on type c. Row-major.
    pub fn infectivity_matrix(&self) -> Vec<f64> {
        let c_total = self.num_types;
        let mass = self.kernels.total_mass();
        let mut out = vec![0.0; c_total * c_total];
        let mut alpha = vec![0.0; self.kernels.basis()];
        for c in 0..c_total {
            for c_src in 0..c_total {
                self.impact_coeff_into(c, c_src, &mut alpha);
                out[c * c_total + c_src] = dot(&alpha, &mass);
            }
        }
        out
    }

    /// Exogenous intensity per type under a default context (sequence 0,
    /// zero feature vector when the model expects one). Used by exports.
    pub fn exo_vector_default(&self) -> Result<Vec<f64>> {
        let zero;
        let ctx = match self.seq_source {
            SeqFeatureSource::Given { dim } => {
                zero = vec![0.0; dim];
                SeqCtx {
                    seq_index: 0,
                    feature: Some(&zero),
                }
            }
            _ => SeqCtx {
                seq_index: 0,
                feature: None,
            },
        };
        (0..self.num_types).map(|c| self.exo_value(c, ctx)).collect()
    }

    /// Upper bound on Σ_c λ_c over `[t, t + width]` for the given history.
    /// Sound for any composition: positive impact terms are bounded by the
    /// kernel's supremum on the window, negative ones by zero (or the
    /// reverse when the outer activation is order-reversing).
    pub fn total_intensity_bound(
        &self,
        t: f64,
        width: f64,
        hist: HistoryView<'_>,
        ctx: SeqCtx<'_>,
    ) -> Result<f64> {
        let m_count = self.kernels.basis();
        let mut alpha = vec![0.0; m_count];
        let mut total = 0.0;
        let increasing = self.outer.is_nondecreasing();
        for c in 0..self.num_types {
            let mut inner = self.exo_value_pre_outer(c, ctx)?;
            for (&cj, &tj) in hist.types.iter().zip(hist.times) {
                if cj == self.num_types {
                    continue;
                }
                let lo = (t - tj).max(0.0);
                let hi = (t + width - tj).max(0.0);
                let sup = self.kernels.upper_bound(lo, hi)?;
                self.impact_coeff_into(c, cj, &mut alpha);
                for m in 0..m_count {
                    if increasing {
                        if alpha[m] > 0.0 {
                            inner += alpha[m] * sup[m];
                        }
                    } else if alpha[m] < 0.0 {
                        inner += alpha[m] * sup[m];
                    }
                }
            }
            total += self.outer.value(inner).max(0.0);
        }
        Ok(total)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
