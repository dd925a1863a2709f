//! Named parameter groups and the gradient structure mirroring them.
//!
//! Every learnable array of a model lives in one of a fixed set of slots,
//! identified by `GroupKey`. Optimizers, regularizers, serialization, and
//! gradient checks all address parameters through this one scheme.

/// Identifies one parameter array of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum GroupKey {
    /// Exogenous base rates μ, length C.
    ExoMu = 0,
    /// Exogenous linear weights, C × D_s.
    ExoWeights,
    /// Neural exogenous first layer, H × (D_e + D_s).
    ExoW1,
    /// Neural exogenous first-layer bias, H.
    ExoB1,
    /// Neural exogenous output weights, H.
    ExoW2,
    /// Neural exogenous output bias, 1.
    ExoB2,
    /// Impact coefficients α, C × C × M.
    ImpactAlpha,
    /// Factorized impact target factors u, C × M × d.
    ImpactU,
    /// Factorized impact source factors v, C × M × d.
    ImpactV,
    /// Linear impact weights, C × M × D_e.
    ImpactW,
    /// Bilinear impact matrices, M × D_e × D_e.
    ImpactWm,
    /// First kernel parameter slot (ω / σ / centers).
    KernelP0,
    /// Second kernel parameter slot (δ / widths).
    KernelP1,
    /// Event-type embedding table, (C+1) × d, pad row frozen at zero.
    EventEmbed,
    /// Sequence embedding table, S × d.
    SeqEmbed,
}

pub const GROUP_COUNT: usize = 15;

pub const ALL_KEYS: [GroupKey; GROUP_COUNT] = [
    GroupKey::ExoMu,
    GroupKey::ExoWeights,
    GroupKey::ExoW1,
    GroupKey::ExoB1,
    GroupKey::ExoW2,
    GroupKey::ExoB2,
    GroupKey::ImpactAlpha,
    GroupKey::ImpactU,
    GroupKey::ImpactV,
    GroupKey::ImpactW,
    GroupKey::ImpactWm,
    GroupKey::KernelP0,
    GroupKey::KernelP1,
    GroupKey::EventEmbed,
    GroupKey::SeqEmbed,
];

impl GroupKey {
    /// Stable dotted name; kernel slots are resolved by the model since
    /// their names depend on the kernel family.
    pub fn base_name(&self) -> &'static str {
        match self {
            GroupKey::ExoMu => "exogenous.mu",
            GroupKey::ExoWeights => "exogenous.weights",
            GroupKey::ExoW1 => "exogenous.w1",
            GroupKey::ExoB1 => "exogenous.b1",
            GroupKey::ExoW2 => "exogenous.w2",
            GroupKey::ExoB2 => "exogenous.b2",
            GroupKey::ImpactAlpha => "impact.alpha",
            GroupKey::ImpactU => "impact.u",
            GroupKey::ImpactV => "impact.v",
            GroupKey::ImpactW => "impact.w",
            GroupKey::ImpactWm => "impact.wm",
            GroupKey::KernelP0 => "kernel.p0",
            GroupKey::KernelP1 => "kernel.p1",
            GroupKey::EventEmbed => "embedding.event",
            GroupKey::SeqEmbed => "embedding.seq",
        }
    }

    /// True for the impact-coefficient groups, the default scope of L1
    /// (structural sparsity) regularization.
    pub fn is_impact_coefficient(&self) -> bool {
        matches!(
            self,
            GroupKey::ImpactAlpha
                | GroupKey::ImpactU
                | GroupKey::ImpactV
                | GroupKey::ImpactW
                | GroupKey::ImpactWm
        )
    }
}

/// One named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

impl ParamGroup {
    pub fn new(data: Vec<f64>, shape: Vec<usize>, trainable: bool) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        ParamGroup {
            data,
            shape,
            trainable,
        }
    }
}

/// Gradient accumulator with one slot per possible group; slots of absent
/// groups stay empty. Addition is plain accumulation, so shards computed on
/// disjoint batches can be reduced in any fixed order.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    slots: Vec<Vec<f64>>,
}

impl ModelGrads {
    pub fn with_sizes(sizes: &[usize; GROUP_COUNT]) -> Self {
        ModelGrads {
            slots: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn slot(&self, key: GroupKey) -> &[f64] {
        &self.slots[key as usize]
    }

    pub fn slot_mut(&mut self, key: GroupKey) -> &mut [f64] {
        &mut self.slots[key as usize]
    }

    #[inline]
    pub fn add(&mut self, key: GroupKey, index: usize, value: f64) {
        self.slots[key as usize][index] += value;
    }

    /// Accumulate another gradient of the same layout.
    pub fn merge(&mut self, other: &ModelGrads) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.slots {
            for x in s.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slots
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |acc: f64, &x| acc.max(x.abs()))
    }

    pub fn is_all_zero(&self) -> bool {
        self.slots.iter().all(|s| s.iter().all(|&x| x == 0.0))
    }
}
