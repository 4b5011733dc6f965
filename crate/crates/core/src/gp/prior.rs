//! Length-scale hyperpriors.
//!
//! Densities are defined on the natural length scale ℓ and differentiated with
//! respect to the raw parameter ln ℓ by the chain rule (no Jacobian term), so
//! the stationary point in raw space is the density's mode.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::GpHyperparams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DSP_DEFAULTS_TOML: &str = include_str!("../../config/dsp_prior.toml");

/// Base constants of the dimensionality-scaled log-normal prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspConstants {
    pub base_location: f64,
    pub base_scale: f64,
}

impl DspConstants {
    /// Constants shipped in `config/dsp_prior.toml`.
    pub fn shipped() -> Self {
        toml::from_str(DSP_DEFAULTS_TOML).expect("shipped DSP prior config parses")
    }
}

impl Default for DspConstants {
    fn default() -> Self {
        Self::shipped()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hyperprior {
    /// Pure maximum likelihood.
    #[default]
    None,
    /// Gamma(shape, rate) on each length scale.
    Gamma { shape: f64, rate: f64 },
    /// Log-normal on each length scale with location `base_location + ½ ln dim`.
    DimScaledLogNormal { base_location: f64, base_scale: f64, dim: usize },
    /// Uniform on `[lo, hi]` for each length scale.
    UniformBox { lo: f64, hi: f64 },
}

impl Hyperprior {
    /// Gamma(3, 6), mode 1/3.
    pub fn gamma_3_6() -> Self {
        Hyperprior::Gamma { shape: 3.0, rate: 6.0 }
    }

    /// Dimensionality-scaled log-normal with the shipped base constants.
    pub fn dim_scaled(dim: usize) -> Self {
        Self::dim_scaled_with(dim, DspConstants::shipped())
    }

    pub fn dim_scaled_with(dim: usize, c: DspConstants) -> Self {
        Hyperprior::DimScaledLogNormal { base_location: c.base_location, base_scale: c.base_scale, dim }
    }

    pub fn uniform_box(lo: f64, hi: f64) -> Self {
        Hyperprior::UniformBox { lo, hi }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Hyperprior::None)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Hyperprior::None => true,
            Hyperprior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Hyperprior::DimScaledLogNormal { base_location, base_scale, dim } => {
                base_location.is_finite() && base_scale > 0.0 && dim >= 1
            }
            Hyperprior::UniformBox { lo, hi } => lo >= 0.0 && hi > lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperprior {self:?}")))
        }
    }

    /// Location of ln ℓ for the log-normal prior.
    fn log_normal_location(base_location: f64, dim: usize) -> f64 {
        base_location + 0.5 * (dim as f64).ln()
    }

    /// Mode of the per-length-scale density; `None` for the flat priors.
    pub fn mode(&self) -> Option<f64> {
        match *self {
            Hyperprior::None | Hyperprior::UniformBox { .. } => None,
            Hyperprior::Gamma { shape, rate } => Some(((shape - 1.0) / rate).max(0.0)),
            Hyperprior::DimScaledLogNormal { base_location, base_scale, dim } => {
                Some((Self::log_normal_location(base_location, dim) - base_scale * base_scale).exp())
            }
        }
    }

    /// Draws one length scale.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            Hyperprior::None => return Err(Error::Config("cannot sample from an absent hyperprior".into())),
            Hyperprior::Gamma { shape, rate } => {
                Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Config(e.to_string()))?.sample(rng)
            }
            Hyperprior::DimScaledLogNormal { base_location, base_scale, dim } => {
                LogNormal::new(Self::log_normal_location(base_location, dim), base_scale)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(rng)
            }
            Hyperprior::UniformBox { lo, hi } => {
                Uniform::new(lo, hi).map_err(|e| Error::Config(e.to_string()))?.sample(rng)
            }
        })
    }

    /// Log-density of one length scale and its derivative with respect to ln ℓ.
    fn log_density_raw<T: Scalar>(&self, ell: T) -> (T, T) {
        match *self {
            Hyperprior::None => (T::zero(), T::zero()),
            Hyperprior::Gamma { shape, rate } => {
                let (a, b) = (T::of(shape), T::of(rate));
                let norm = T::of(shape * rate.ln() - libm::lgamma(shape));
                let value = norm + (a - T::one()) * ell.ln() - b * ell;
                (value, (a - T::one()) - b * ell)
            }
            Hyperprior::DimScaledLogNormal { base_location, base_scale, dim } => {
                let mu = T::of(Self::log_normal_location(base_location, dim));
                let s2 = T::of(base_scale * base_scale);
                let z = ell.ln() - mu;
                let norm = T::of(-(base_scale * (2.0 * std::f64::consts::PI).sqrt()).ln());
                let value = norm - ell.ln() - z * z / (T::of(2.0) * s2);
                (value, -T::one() - z / s2)
            }
            Hyperprior::UniformBox { lo, hi } => {
                let (lo, hi) = (T::of(lo), T::of(hi));
                if ell >= lo && ell <= hi {
                    (-(hi - lo).ln(), T::zero())
                } else {
                    (T::neg_infinity(), T::zero())
                }
            }
        }
    }
}

/// Log prior density of all length scales and its gradient over the raw
/// vector `[ln ℓ…, ln σ_f², ln σ_n²]` (the variance entries are always zero).
///
/// Outside the support of a uniform prior the value is `−∞` with a zero gradient.
pub fn log_prior<T: Scalar>(prior: &Hyperprior, params: &GpHyperparams<T>) -> (T, Vec<T>) {
    let mut grad = vec![T::zero(); params.raw_len()];
    let mut value = T::zero();
    for (g, &ell) in grad.iter_mut().zip(&params.lengthscales) {
        let (v, dv) = prior.log_density_raw(ell);
        value += v;
        *g = dv;
    }
    if value == T::neg_infinity() {
        grad.iter_mut().for_each(|g| *g = T::zero());
    }
    (value, grad)
}
