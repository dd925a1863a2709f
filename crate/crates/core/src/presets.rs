//! Named model recipes: each preset pins one (exogenous, impact, kernel,
//! activation, loss) tuple. Multi-Gaussian presets derive their basis grid
//! from the corpus (centers evenly spaced up to the 95th percentile of
//! inter-event gaps).

use crate::data::Database;
use crate::error::{Error, Result};
use crate::learning::LossKind;
use crate::model::{
    Activation, ExoKind, ExoSpec, ImpactKind, ImpactSpec, KernelSpec, ModelConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    LinearHawkesExp,
    LinearHawkesMultigaussMle,
    LinearHawkesMultigaussLse,
    FactorizedPp,
    SemiParametricHawkes,
    SelfCorrecting,
    MutuallyCorrecting,
}

pub const ALL_PRESETS: [PresetName; 7] = [
    PresetName::LinearHawkesExp,
    PresetName::LinearHawkesMultigaussMle,
    PresetName::LinearHawkesMultigaussLse,
    PresetName::FactorizedPp,
    PresetName::SemiParametricHawkes,
    PresetName::SelfCorrecting,
    PresetName::MutuallyCorrecting,
];

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::LinearHawkesExp => "linear-hawkes-exp",
            PresetName::LinearHawkesMultigaussMle => "linear-hawkes-multigauss-mle",
            PresetName::LinearHawkesMultigaussLse => "linear-hawkes-multigauss-lse",
            PresetName::FactorizedPp => "factorized-pp",
            PresetName::SemiParametricHawkes => "semi-parametric-hawkes",
            PresetName::SelfCorrecting => "self-correcting",
            PresetName::MutuallyCorrecting => "mutually-correcting",
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_PRESETS
            .iter()
            .find(|p| p.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = ALL_PRESETS.iter().map(|p| p.as_str()).collect();
                Error::InvalidConfig(format!(
                    "unknown preset '{s}'; valid presets: {}",
                    valid.join(", ")
                ))
            })
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs shared by all presets.
#[derive(Debug, Clone)]
pub struct PresetOptions {
    pub memory_size: usize,
    /// Basis count for multi-Gaussian kernels.
    pub basis: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub quadrature: usize,
    pub init_seed: u64,
    /// Use the sign-flipped softplus for auditing.
    pub paper_softplus: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions {
            memory_size: 64,
            basis: 3,
            embed_dim: 8,
            hidden_dim: 16,
            quadrature: 16,
            init_seed: 0,
            paper_softplus: false,
        }
    }
}

/// The q-th percentile of within-sequence inter-event gaps, used to size
/// multi-Gaussian kernel grids.
pub fn gap_percentile(db: &Database, q: f64) -> f64 {
    let mut gaps: Vec<f64> = db
        .sequences
        .iter()
        .flat_map(|s| s.times.windows(2).map(|w| w[1] - w[0]))
        .collect();
    if gaps.is_empty() {
        return 1.0;
    }
    gaps.sort_by(f64::total_cmp);
    let idx = ((gaps.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    let v = gaps[idx];
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Materialize a preset against a corpus: the model composition plus the
/// loss the preset trains under.
pub fn build_preset(
    name: PresetName,
    db: &Database,
    opts: &PresetOptions,
) -> (ModelConfig, LossKind) {
    let softplus = if opts.paper_softplus {
        Activation::SoftplusPaper { beta: 1.0 }
    } else {
        Activation::Softplus { beta: 1.0 }
    };
    let multigauss = || KernelSpec::multi_gauss_grid(opts.basis, gap_percentile(db, 0.95));
    let exponential = KernelSpec::Exponential { omega: 1.0, delta: 0.0 };

    let (exo, impact, kernel, act, loss) = match name {
        PresetName::LinearHawkesExp => (
            ExoKind::Naive,
            ImpactKind::Naive,
            exponential,
            Activation::Identity,
            LossKind::MaxLogLike,
        ),
        PresetName::LinearHawkesMultigaussMle => (
            ExoKind::Naive,
            ImpactKind::Naive,
            multigauss(),
            Activation::Identity,
            LossKind::MaxLogLike,
        ),
        PresetName::LinearHawkesMultigaussLse => (
            ExoKind::Naive,
            ImpactKind::Naive,
            multigauss(),
            Activation::Identity,
            LossKind::LeastSquare,
        ),
        PresetName::FactorizedPp => (
            ExoKind::Linear,
            ImpactKind::Factorized { dim: opts.embed_dim.max(1) },
            exponential,
            Activation::Identity,
            LossKind::LeastSquare,
        ),
        PresetName::SemiParametricHawkes => (
            ExoKind::Linear,
            ImpactKind::Naive,
            multigauss(),
            Activation::Identity,
            LossKind::MaxLogLike,
        ),
        PresetName::SelfCorrecting => (
            ExoKind::Linear,
            ImpactKind::Linear,
            KernelSpec::Gate { omega: 0.0, delta: 1.0 },
            softplus,
            LossKind::MaxLogLike,
        ),
        PresetName::MutuallyCorrecting => (
            ExoKind::Linear,
            ImpactKind::Linear,
            KernelSpec::Gaussian { sigma: 1.0 },
            softplus,
            LossKind::CrossEntropy,
        ),
    };

    let config = ModelConfig {
        memory_size: opts.memory_size,
        exogenous: ExoSpec {
            kind: exo,
            activation: act,
        },
        impact: ImpactSpec {
            kind: impact,
            activation: act,
        },
        kernel,
        kernel_trainable: (false, false),
        outer: act,
        embed_dim: opts.embed_dim,
        hidden_dim: opts.hidden_dim,
        quadrature: opts.quadrature,
        init_seed: opts.init_seed,
    };
    (config, loss)
}
