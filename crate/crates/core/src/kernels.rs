//! Decay-kernel bank: κ_m(t) for m = 1..M, with closed-form integrals
//! K_m(t) = ∫₀ᵗ κ_m(s) ds, exact parameter gradients, total mass K_m(∞),
//! and upper bounds over a forward horizon for thinning envelopes.
//!
//! Six kernel families are provided. All are single-basis (M = 1) except
//! the multi-Gaussian bank. Gradients at a discontinuity point (gate edges,
//! the exponential/power-law kink at t = δ) follow the right-hand branch.

use crate::error::{Error, Result};
use crate::math::{erf, normal_pdf};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// κ(t) = ω·exp(−ω(t−δ)) for t ≥ δ, else 0. Parameters (ω > 0, δ ≥ 0).
    Exponential,
    /// κ(t) = ω·t·exp(−ω·t²/2). Parameter (ω > 0); the scale is fixed so
    /// the kernel is a unit-mass Rayleigh density.
    Rayleigh,
    /// κ(t) = N(t; 0, σ²) restricted to t ≥ 0; total mass ½. Parameter (σ > 0).
    Gaussian,
    /// κ(t) = (ω−1)/δ for t < δ, (ω−1)·δ^{ω−1}·t^{−ω} for t ≥ δ.
    /// Parameters (ω > 1, δ > 0).
    Powerlaw,
    /// κ(t) = 1/δ on [ω, ω+δ], else 0. Parameters (ω ≥ 0, δ > 0).
    Gate,
    /// κ_m(t) = N(t; t_m, σ_m²), m = 1..M. Parameters (centers, widths).
    MultiGauss,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Exponential => "exponential",
            KernelKind::Rayleigh => "rayleigh",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Powerlaw => "powerlaw",
            KernelKind::Gate => "gate",
            KernelKind::MultiGauss => "multigauss",
        }
    }
}

/// A bank of M decay kernels of one family. Parameters live in two slots
/// (`p0`, `p1`) whose meaning depends on the family; accessors below give
/// them their usual names. Each slot carries its own trainable flag.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    kind: KernelKind,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p0_trainable: bool,
    p1_trainable: bool,
    basis: usize,
}

/// Per-parameter gradients of κ and K at one time point, one entry per
/// basis. Slots for an absent second parameter are empty.
#[derive(Debug, Clone, Default)]
pub struct KernelParamGrad {
    pub dk_dp0: Vec<f64>,
    pub dk_dp1: Vec<f64>,
    pub di_dp0: Vec<f64>,
    pub di_dp1: Vec<f64>,
}

impl KernelBank {
    pub fn exponential(omega: f64, delta: f64) -> Result<Self> {
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential kernel needs ω > 0, got {omega}"
            )));
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponential kernel needs δ ≥ 0, got {delta}"
            )));
        }
        Ok(Self::raw(KernelKind::Exponential, vec![omega], vec![delta]))
    }

    pub fn rayleigh(omega: f64) -> Result<Self> {
        if omega <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rayleigh kernel needs ω > 0, got {omega}"
            )));
        }
        Ok(Self::raw(KernelKind::Rayleigh, vec![omega], vec![]))
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gaussian kernel needs σ > 0, got {sigma}"
            )));
        }
        Ok(Self::raw(KernelKind::Gaussian, vec![sigma], vec![]))
    }

    pub fn powerlaw(omega: f64, delta: f64) -> Result<Self> {
        if omega <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "powerlaw kernel needs ω > 1, got {omega}"
            )));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "powerlaw kernel needs δ > 0, got {delta}"
            )));
        }
        Ok(Self::raw(KernelKind::Powerlaw, vec![omega], vec![delta]))
    }

    pub fn gate(omega: f64, delta: f64) -> Result<Self> {
        if omega < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gate kernel needs ω ≥ 0, got {omega}"
            )));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gate kernel needs δ > 0, got {delta}"
            )));
        }
        Ok(Self::raw(KernelKind::Gate, vec![omega], vec![delta]))
    }

    pub fn multi_gauss(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != widths.len() {
            return Err(Error::InvalidParameter(
                "multigauss kernel needs matching nonempty centers/widths".into(),
            ));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "multigauss centers must be strictly increasing".into(),
            ));
        }
        if widths.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidParameter(
                "multigauss widths must be positive".into(),
            ));
        }
        Ok(Self::raw(KernelKind::MultiGauss, centers, widths))
    }

    fn raw(kind: KernelKind, p0: Vec<f64>, p1: Vec<f64>) -> Self {
        let basis = match kind {
            KernelKind::MultiGauss => p0.len(),
            _ => 1,
        };
        KernelBank {
            kind,
            p0,
            p1,
            p0_trainable: false,
            p1_trainable: false,
            basis,
        }
    }

    pub fn with_trainable(mut self, p0: bool, p1: bool) -> Self {
        self.set_trainable(p0, p1);
        self
    }

    pub fn set_trainable(&mut self, p0: bool, p1: bool) {
        self.p0_trainable = p0;
        self.p1_trainable = p1 && !self.p1.is_empty();
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Number of basis kernels M.
    pub fn basis(&self) -> usize {
        self.basis
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn p0_mut(&mut self) -> &mut [f64] {
        &mut self.p0
    }

    pub fn p1_mut(&mut self) -> &mut [f64] {
        &mut self.p1
    }

    pub fn p0_trainable(&self) -> bool {
        self.p0_trainable
    }

    pub fn p1_trainable(&self) -> bool {
        self.p1_trainable
    }

    /// Names of the two parameter slots in the model's dotted naming scheme.
    pub fn slot_names(&self) -> (&'static str, Option<&'static str>) {
        match self.kind {
            KernelKind::Exponential => ("kernel.omega", Some("kernel.delta")),
            KernelKind::Rayleigh => ("kernel.omega", None),
            KernelKind::Gaussian => ("kernel.sigma", None),
            KernelKind::Powerlaw => ("kernel.omega", Some("kernel.delta")),
            KernelKind::Gate => ("kernel.omega", Some("kernel.delta")),
            KernelKind::MultiGauss => ("kernel.centers", Some("kernel.widths")),
        }
    }

    /// κ_m(t) for every basis. Errors on negative t.
    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let mut out = vec![0.0; self.basis];
        self.value_into(t, &mut out);
        Ok(out)
    }

    /// K_m(t) = ∫₀ᵗ κ_m(s) ds for every basis. Errors on negative t.
    pub fn integral(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let mut out = vec![0.0; self.basis];
        self.integral_into(t, &mut out);
        Ok(out)
    }

    /// κ values written into a caller buffer; `t` must be nonnegative.
    pub fn value_into(&self, t: f64, out: &mut [f64]) {
        debug_assert!(t >= 0.0);
        debug_assert_eq!(out.len(), self.basis);
        match self.kind {
            KernelKind::Exponential => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = if t < delta {
                    0.0
                } else {
                    omega * (-omega * (t - delta)).exp()
                };
            }
            KernelKind::Rayleigh => {
                let omega = self.p0[0];
                out[0] = omega * t * (-omega * t * t / 2.0).exp();
            }
            KernelKind::Gaussian => {
                out[0] = normal_pdf(t, self.p0[0]);
            }
            KernelKind::Powerlaw => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = if t < delta {
                    (omega - 1.0) / delta
                } else {
                    (omega - 1.0) * delta.powf(omega - 1.0) * t.powf(-omega)
                };
            }
            KernelKind::Gate => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = if t >= omega && t <= omega + delta {
                    1.0 / delta
                } else {
                    0.0
                };
            }
            KernelKind::MultiGauss => {
                for m in 0..self.basis {
                    out[m] = normal_pdf(t - self.p0[m], self.p1[m]);
                }
            }
        }
    }

    /// Integral values written into a caller buffer; `t` must be nonnegative.
    pub fn integral_into(&self, t: f64, out: &mut [f64]) {
        debug_assert!(t >= 0.0);
        debug_assert_eq!(out.len(), self.basis);
        match self.kind {
            KernelKind::Exponential => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = if t < delta {
                    0.0
                } else {
                    1.0 - (-omega * (t - delta)).exp()
                };
            }
            KernelKind::Rayleigh => {
                let omega = self.p0[0];
                out[0] = 1.0 - (-omega * t * t / 2.0).exp();
            }
            KernelKind::Gaussian => {
                let sigma = self.p0[0];
                out[0] = 0.5 * erf(t / (sigma * SQRT_2));
            }
            KernelKind::Powerlaw => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = if t < delta {
                    (omega - 1.0) * t / delta
                } else {
                    omega - (t / delta).powf(1.0 - omega)
                };
            }
            KernelKind::Gate => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                out[0] = ((t - omega) / delta).clamp(0.0, 1.0);
            }
            KernelKind::MultiGauss => {
                for m in 0..self.basis {
                    let (c, s) = (self.p0[m], self.p1[m]);
                    out[m] = 0.5 * (erf((t - c) / (s * SQRT_2)) + erf(c / (s * SQRT_2)));
                }
            }
        }
    }

    /// Total mass K_m(∞) per basis.
    pub fn total_mass(&self) -> Vec<f64> {
        match self.kind {
            KernelKind::Exponential | KernelKind::Rayleigh | KernelKind::Gate => vec![1.0],
            KernelKind::Gaussian => vec![0.5],
            KernelKind::Powerlaw => vec![self.p0[0]],
            KernelKind::MultiGauss => (0..self.basis)
                .map(|m| 0.5 * (1.0 + erf(self.p0[m] / (self.p1[m] * SQRT_2))))
                .collect(),
        }
    }

    /// Exact partial derivatives of κ and K with respect to each parameter
    /// slot at time t. Slots not marked trainable return zeros; gradients at
    /// discontinuity points use the right-hand branch.
    pub fn param_grad(&self, t: f64) -> Result<KernelParamGrad> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let mut g = KernelParamGrad {
            dk_dp0: vec![0.0; self.basis],
            dk_dp1: if self.p1.is_empty() {
                Vec::new()
            } else {
                vec![0.0; self.basis]
            },
            di_dp0: vec![0.0; self.basis],
            di_dp1: if self.p1.is_empty() {
                Vec::new()
            } else {
                vec![0.0; self.basis]
            },
        };
        match self.kind {
            KernelKind::Exponential => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                if t >= delta {
                    let e = (-omega * (t - delta)).exp();
                    g.dk_dp0[0] = (1.0 - omega * (t - delta)) * e;
                    g.dk_dp1[0] = omega * omega * e;
                    g.di_dp0[0] = (t - delta) * e;
                    g.di_dp1[0] = -omega * e;
                }
            }
            KernelKind::Rayleigh => {
                let omega = self.p0[0];
                let u = (-omega * t * t / 2.0).exp();
                g.dk_dp0[0] = t * u * (1.0 - omega * t * t / 2.0);
                g.di_dp0[0] = (t * t / 2.0) * u;
            }
            KernelKind::Gaussian => {
                let sigma = self.p0[0];
                let k = normal_pdf(t, sigma);
                g.dk_dp0[0] = k * (t * t - sigma * sigma) / (sigma * sigma * sigma);
                g.di_dp0[0] = -(t / sigma) * k;
            }
            KernelKind::Powerlaw => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                if t < delta {
                    g.dk_dp0[0] = 1.0 / delta;
                    g.dk_dp1[0] = -(omega - 1.0) / (delta * delta);
                    g.di_dp0[0] = t / delta;
                    g.di_dp1[0] = -(omega - 1.0) * t / (delta * delta);
                } else {
                    let k = (omega - 1.0) * delta.powf(omega - 1.0) * t.powf(-omega);
                    let r = (t / delta).powf(1.0 - omega);
                    g.dk_dp0[0] = k * (1.0 / (omega - 1.0) + (delta / t).ln());
                    g.dk_dp1[0] = k * (omega - 1.0) / delta;
                    g.di_dp0[0] = 1.0 + r * (t / delta).ln();
                    g.di_dp1[0] = -(omega - 1.0) * r / delta;
                }
            }
            KernelKind::Gate => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                if t >= omega && t < omega + delta {
                    g.dk_dp1[0] = -1.0 / (delta * delta);
                    g.di_dp0[0] = -1.0 / delta;
                    g.di_dp1[0] = -(t - omega) / (delta * delta);
                }
            }
            KernelKind::MultiGauss => {
                for m in 0..self.basis {
                    let (c, s) = (self.p0[m], self.p1[m]);
                    let k = normal_pdf(t - c, s);
                    let k0 = normal_pdf(c, s);
                    g.dk_dp0[m] = k * (t - c) / (s * s);
                    g.dk_dp1[m] = k * ((t - c) * (t - c) - s * s) / (s * s * s);
                    g.di_dp0[m] = k0 - k;
                    g.di_dp1[m] = -((t - c) / s) * k - (c / s) * k0;
                }
            }
        }
        if !self.p0_trainable {
            g.dk_dp0.iter_mut().for_each(|x| *x = 0.0);
            g.di_dp0.iter_mut().for_each(|x| *x = 0.0);
        }
        if !self.p1_trainable {
            g.dk_dp1.iter_mut().for_each(|x| *x = 0.0);
            g.di_dp1.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(g)
    }

    /// Per-basis upper bound on κ_m over `[t0, t1]`, tight for monotone
    /// pieces (the bound is attained at an endpoint or the interior mode).
    pub fn upper_bound(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        if t0 < 0.0 {
            return Err(Error::NegativeTime(t0));
        }
        if t1 < t0 {
            return Err(Error::InvalidParameter(format!(
                "upper_bound horizon [{t0}, {t1}] is reversed"
            )));
        }
        let mut out = vec![0.0; self.basis];
        let mut buf = vec![0.0; self.basis];
        match self.kind {
            KernelKind::Exponential => {
                let delta = self.p1[0];
                if t1 >= delta {
                    self.value_into(t0.max(delta), &mut buf);
                    out[0] = buf[0];
                }
            }
            KernelKind::Rayleigh => {
                let mode = 1.0 / self.p0[0].sqrt();
                self.value_into(mode.clamp(t0, t1), &mut buf);
                out[0] = buf[0];
            }
            KernelKind::Gaussian | KernelKind::Powerlaw => {
                // non-increasing on t ≥ 0
                self.value_into(t0, &mut buf);
                out[0] = buf[0];
            }
            KernelKind::Gate => {
                let (omega, delta) = (self.p0[0], self.p1[0]);
                if t0 <= omega + delta && t1 >= omega {
                    out[0] = 1.0 / delta;
                }
            }
            KernelKind::MultiGauss => {
                for m in 0..self.basis {
                    let at = self.p0[m].clamp(t0, t1);
                    out[m] = normal_pdf(at - self.p0[m], self.p1[m]);
                }
            }
        }
        Ok(out)
    }
}
