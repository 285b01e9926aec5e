//! Kernel functions evaluated on M-dimensional prediction-difference vectors.
//!
//! Every kernel here is bounded by 1, attains its maximum 1 at the origin and
//! is non-negative. The compactly supported ones (naive, Epanechnikov,
//! bi-weight, tri-weight, compact Gaussian) vanish outside a finite radius;
//! Gaussian and 4-exponential decay but never reach zero.
//!
//! Two bandwidth conventions coexist and are kept explicit:
//!
//! - **Divisive**: `K_h(z) = K(z / h)`: the classical scaling, valid for
//!   every kernel, used by grid search over compact kernels.
//! - **Multiplicative**: `K_h(z) = exp(-h ||z||^2 / (2 sigma^2))` (Gaussian)
//!   or `exp(-h ||z||^4 / (2 sigma^4))` (4-exponential): the form whose
//!   h-derivative is available in closed form, used by gradient descent.
//!
//! Mixing Multiplicative with a compact kernel is rejected rather than
//! silently reinterpreted.

use crate::error::{Error, Result};

/// Floor used when projecting a bandwidth back into the positive half-line.
pub const MIN_BANDWIDTH: f64 = 1e-8;

/// Kernel family selector plus shape constants.
///
/// `sigma` is the shape scale of the (compact) Gaussian and 4-exponential
/// kernels; `rho1` is the support radius of the compact Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Naive,
    Epanechnikov,
    BiWeight,
    TriWeight,
    CompactGaussian { sigma: f64, rho1: f64 },
    Gaussian { sigma: f64 },
    Exp4 { sigma: f64 },
}

impl KernelSpec {
    /// Compact Gaussian with the stated experimental defaults sigma = 1, rho1 = 3.
    pub fn compact_gaussian(sigma: f64, rho1: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be a positive finite real, got {sigma}"
            )));
        }
        if !(rho1 > 0.0 && rho1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho1 must be a positive finite real, got {rho1}"
            )));
        }
        Ok(KernelSpec::CompactGaussian { sigma, rho1 })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be a positive finite real, got {sigma}"
            )));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn exp4(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be a positive finite real, got {sigma}"
            )));
        }
        Ok(KernelSpec::Exp4 { sigma })
    }

    /// Name accepted in configuration files.
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Naive => "naive",
            KernelSpec::Epanechnikov => "epanechnikov",
            KernelSpec::BiWeight => "biweight",
            KernelSpec::TriWeight => "triweight",
            KernelSpec::CompactGaussian { .. } => "compact-gaussian",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Exp4 { .. } => "exp4",
        }
    }

    /// Builds a kernel from its config name. `sigma` defaults to 1 and
    /// `rho1` to 3 when not supplied.
    pub fn from_name(name: &str, sigma: Option<f64>, rho1: Option<f64>) -> Result<Self> {
        let sigma = sigma.unwrap_or(1.0);
        let rho1 = rho1.unwrap_or(3.0);
        match name {
            "naive" => Ok(KernelSpec::Naive),
            "epanechnikov" => Ok(KernelSpec::Epanechnikov),
            "biweight" => Ok(KernelSpec::BiWeight),
            "triweight" => Ok(KernelSpec::TriWeight),
            "compact-gaussian" => KernelSpec::compact_gaussian(sigma, rho1),
            "gaussian" => KernelSpec::gaussian(sigma),
            "exp4" => KernelSpec::exp4(sigma),
            other => Err(Error::InvalidConfig(format!(
                "unknown kernel {other:?} (expected one of naive, epanechnikov, biweight, \
                 triweight, compact-gaussian, gaussian, exp4)"
            ))),
        }
    }

    /// True for kernels that vanish outside a bounded set.
    pub fn is_compact(&self) -> bool {
        !matches!(self, KernelSpec::Gaussian { .. } | KernelSpec::Exp4 { .. })
    }

    /// True when the Multiplicative parametrization (and hence the analytic
    /// h-derivative) is defined for this kernel.
    pub fn supports_multiplicative(&self) -> bool {
        matches!(self, KernelSpec::Gaussian { .. } | KernelSpec::Exp4 { .. })
    }

    /// Evaluates `K(z)`.
    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        check_finite(z)?;
        Ok(self.eval_raw(z))
    }

    /// Evaluates `K_h(z)` under the declared parametrization.
    pub fn evaluate_h(&self, bw: &BandwidthParam, z: &[f64]) -> Result<f64> {
        check_finite(z)?;
        bw.check_compatible(self)?;
        Ok(self.eval_h_raw(bw, z))
    }

    /// Analytic `d K_h(z) / d h`. Defined only for Gaussian and 4-exponential
    /// kernels under the Multiplicative parametrization; everything else gets
    /// a `NotDifferentiable` error so callers can fall back to a numerical
    /// gradient.
    pub fn grad_h(&self, bw: &BandwidthParam, z: &[f64]) -> Result<f64> {
        check_finite(z)?;
        bw.check_compatible(self)?;
        if bw.parametrization != Parametrization::Multiplicative {
            return Err(Error::NotDifferentiable(format!(
                "analytic bandwidth derivative requires the Multiplicative parametrization, \
                 got Divisive with kernel {}",
                self.name()
            )));
        }
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let s = sq_norm(z);
                Ok(-(s / (2.0 * sigma * sigma)) * self.eval_h_raw(bw, z))
            }
            KernelSpec::Exp4 { sigma } => {
                let s = sq_norm(z);
                let sigma4 = sigma.powi(4);
                Ok(-(s * s / (2.0 * sigma4)) * self.eval_h_raw(bw, z))
            }
            _ => Err(Error::NotDifferentiable(format!(
                "kernel {} has no analytic bandwidth derivative",
                self.name()
            ))),
        }
    }

    /// `K(z)` without finiteness checks; inner loop of the weight computation.
    pub(crate) fn eval_raw(&self, z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Naive => {
                if z.iter().all(|v| v.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelSpec::Epanechnikov => poly_compact(sq_norm(z), 1),
            KernelSpec::BiWeight => poly_compact(sq_norm(z), 2),
            KernelSpec::TriWeight => poly_compact(sq_norm(z), 3),
            KernelSpec::CompactGaussian { sigma, rho1 } => {
                let s = sq_norm(z);
                if s <= rho1 * rho1 {
                    (-s / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            }
            KernelSpec::Gaussian { sigma } => (-sq_norm(z) / (2.0 * sigma * sigma)).exp(),
            KernelSpec::Exp4 { sigma } => {
                let s = sq_norm(z);
                (-s * s / (2.0 * sigma.powi(4))).exp()
            }
        }
    }

    /// `K_h(z)` without checks. Callers must have validated the
    /// kernel/parametrization pairing.
    pub(crate) fn eval_h_raw(&self, bw: &BandwidthParam, z: &[f64]) -> f64 {
        let max_abs = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.eval_h_from_stats(bw, sq_norm(z), max_abs)
    }

    /// `K_h` from precomputed difference statistics. Every kernel in the
    /// family is a function of the squared norm except the naive box, which
    /// only needs the largest coordinate magnitude; passing the two scalars
    /// keeps the weight loops allocation-free.
    pub(crate) fn eval_h_from_stats(
        &self,
        bw: &BandwidthParam,
        sq_norm: f64,
        max_abs: f64,
    ) -> f64 {
        match bw.parametrization {
            Parametrization::Divisive => match *self {
                KernelSpec::Naive => {
                    if max_abs <= bw.h {
                        1.0
                    } else {
                        0.0
                    }
                }
                KernelSpec::Epanechnikov => poly_compact(sq_norm / (bw.h * bw.h), 1),
                KernelSpec::BiWeight => poly_compact(sq_norm / (bw.h * bw.h), 2),
                KernelSpec::TriWeight => poly_compact(sq_norm / (bw.h * bw.h), 3),
                KernelSpec::CompactGaussian { sigma, rho1 } => {
                    let s = sq_norm / (bw.h * bw.h);
                    if s <= rho1 * rho1 {
                        (-s / (2.0 * sigma * sigma)).exp()
                    } else {
                        0.0
                    }
                }
                KernelSpec::Gaussian { sigma } => {
                    (-sq_norm / (2.0 * bw.h * bw.h * sigma * sigma)).exp()
                }
                KernelSpec::Exp4 { sigma } => {
                    let s = sq_norm / (bw.h * bw.h);
                    (-s * s / (2.0 * sigma.powi(4))).exp()
                }
            },
            Parametrization::Multiplicative => match *self {
                KernelSpec::Gaussian { sigma } => (-bw.h * sq_norm / (2.0 * sigma * sigma)).exp(),
                KernelSpec::Exp4 { sigma } => {
                    (-bw.h * sq_norm * sq_norm / (2.0 * sigma.powi(4))).exp()
                }
                // check_compatible rejects this pairing on the public paths.
                _ => f64::NAN,
            },
        }
    }

    /// Fused `(K_h, dK_h/dh)` for the Multiplicative Gaussian/Exp4 case,
    /// from the squared norm of the difference vector.
    pub(crate) fn eval_and_grad_h_from_sq(&self, bw: &BandwidthParam, sq_norm: f64) -> (f64, f64) {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let a = sq_norm / (2.0 * sigma * sigma);
                let k = (-bw.h * a).exp();
                (k, -a * k)
            }
            KernelSpec::Exp4 { sigma } => {
                let a = sq_norm * sq_norm / (2.0 * sigma.powi(4));
                let k = (-bw.h * a).exp();
                (k, -a * k)
            }
            _ => (f64::NAN, f64::NAN),
        }
    }
}

/// How the bandwidth enters the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// `K_h(z) = K(z / h)`.
    Divisive,
    /// `K_h(z) = exp(-h ||z||^2 / (2 sigma^2))` (Gaussian) or the analogous
    /// fourth-power form (4-exponential).
    Multiplicative,
}

/// A positive bandwidth together with its parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthParam {
    pub h: f64,
    pub parametrization: Parametrization,
}

impl BandwidthParam {
    pub fn new(h: f64, parametrization: Parametrization) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be a positive finite real, got {h}"
            )));
        }
        Ok(BandwidthParam { h, parametrization })
    }

    pub fn divisive(h: f64) -> Result<Self> {
        Self::new(h, Parametrization::Divisive)
    }

    pub fn multiplicative(h: f64) -> Result<Self> {
        Self::new(h, Parametrization::Multiplicative)
    }

    /// Rejects Multiplicative bandwidths paired with compact kernels.
    pub fn check_compatible(&self, spec: &KernelSpec) -> Result<()> {
        if self.parametrization == Parametrization::Multiplicative
            && !spec.supports_multiplicative()
        {
            return Err(Error::InvalidCombination(format!(
                "the Multiplicative parametrization is only defined for gaussian and exp4 \
                 kernels, got {}",
                spec.name()
            )));
        }
        Ok(())
    }
}

#[inline]
fn sq_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// `(1 - s)^p` on `s <= 1`, zero outside; `s` is the squared norm.
#[inline]
fn poly_compact(s: f64, p: i32) -> f64 {
    if s <= 1.0 {
        (1.0 - s).powi(p)
    } else {
        0.0
    }
}

fn check_finite(z: &[f64]) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("kernel argument"))
    }
}
