//! Classical graph adaptive filters with a fixed bandlimited projector.
//!
//! Every method performs `x[t+1] = x[t] + mu * B * g(eps[t])` with
//! `eps[t] = D_S (y[t] - x[t])` and `B = U Sigma U^T`:
//!
//! | method | `g(eps)`                      |
//! |--------|-------------------------------|
//! | glms   | `eps`                         |
//! | glmp   | `abs(eps)^(p-1) * sign(eps)`  |
//! | gsign  | `sign(eps)`                   |
//!
//! The normalized variants (gnlms, gnlmp) divide the spectral update at every
//! kept frequency by an exponentially weighted energy of the masked error.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::gnn::lp_error_transform;
use crate::spectral::{GftBasis, SamplingMask, SpectralFilter};

pub const DEFAULT_NORM_FLOOR: f64 = 1e-6;
pub const DEFAULT_FORGETTING: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMethod {
    Glms,
    Gnlms,
    Glmp,
    Gnlmp,
    Gsign,
}

impl FilterMethod {
    pub fn name(self) -> &'static str {
        match self {
            FilterMethod::Glms => "glms",
            FilterMethod::Gnlms => "gnlms",
            FilterMethod::Glmp => "glmp",
            FilterMethod::Gnlmp => "gnlmp",
            FilterMethod::Gsign => "gsign",
        }
    }

    pub fn uses_p(self) -> bool {
        matches!(self, FilterMethod::Glmp | FilterMethod::Gnlmp)
    }

    pub fn is_normalized(self) -> bool {
        matches!(self, FilterMethod::Gnlms | FilterMethod::Gnlmp)
    }
}

impl fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "glms" => FilterMethod::Glms,
            "gnlms" => FilterMethod::Gnlms,
            "glmp" => FilterMethod::Glmp,
            "gnlmp" => FilterMethod::Gnlmp,
            "gsign" | "g-sign" => FilterMethod::Gsign,
            other => return Err(Error::param(format!("unknown adaptive filter `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveFilterConfig {
    pub method: FilterMethod,
    pub step_size: f64,
    /// Exponent of the error measure; only read by glmp/gnlmp.
    pub p: f64,
    pub band_filter: SpectralFilter,
    pub norm_floor: f64,
    pub forgetting: f64,
}

impl AdaptiveFilterConfig {
    pub fn new(method: FilterMethod, step_size: f64, band_filter: SpectralFilter) -> Self {
        Self {
            method,
            step_size,
            p: 2.0,
            band_filter,
            norm_floor: DEFAULT_NORM_FLOOR,
            forgetting: DEFAULT_FORGETTING,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::param(format!("p must lie in [1, 2], got {}", self.p)));
        }
        if !(self.norm_floor > 0.0) {
            return Err(Error::param(format!(
                "norm floor must be positive, got {}",
                self.norm_floor
            )));
        }
        if !(0.0..1.0).contains(&self.forgetting) {
            return Err(Error::param(format!(
                "forgetting factor must lie in [0, 1), got {}",
                self.forgetting
            )));
        }
        Ok(())
    }
}

/// Estimate plus the running per-frequency error energy of the normalized variants.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub estimate: DVector<f64>,
    pub spectral_energy: DVector<f64>,
    pub t: usize,
}

impl FilterState {
    pub fn new(estimate: DVector<f64>) -> Self {
        let n = estimate.len();
        Self {
            estimate,
            spectral_energy: DVector::zeros(n),
            t: 0,
        }
    }
}

/// `D_S (y - x_hat)`.
pub fn error_term(state: &FilterState, y: &DVector<f64>, mask: &SamplingMask) -> Result<DVector<f64>> {
    check_len("observation", state.estimate.len(), y.len())?;
    mask.apply(&(y - &state.estimate))
}

/// A configured filter bound to a basis, with the projector `U Sigma U^T` precomputed.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter<'a> {
    config: AdaptiveFilterConfig,
    basis: &'a GftBasis,
    projector: DMatrix<f64>,
}

impl<'a> AdaptiveFilter<'a> {
    pub fn new(config: AdaptiveFilterConfig, basis: &'a GftBasis) -> Result<Self> {
        config.validate()?;
        let projector = basis.operator(config.band_filter.response())?;
        Ok(Self {
            config,
            basis,
            projector,
        })
    }

    pub fn config(&self) -> &AdaptiveFilterConfig {
        &self.config
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    /// Default starting point: the band projection of the (masked) first observation.
    pub fn initial_estimate(&self, first_observation: &DVector<f64>, mask: &SamplingMask) -> Result<DVector<f64>> {
        Ok(&self.projector * mask.apply(first_observation)?)
    }

    fn update_direction(&self, eps: &DVector<f64>) -> DVector<f64> {
        match self.config.method {
            FilterMethod::Glms | FilterMethod::Gnlms => eps.clone(),
            FilterMethod::Gsign => eps.map(sign),
            FilterMethod::Glmp | FilterMethod::Gnlmp => lp_error_transform(eps, self.config.p),
        }
    }

    pub fn step(&self, state: &FilterState, y: &DVector<f64>, mask: &SamplingMask) -> Result<FilterState> {
        let n = self.basis.n();
        check_len("estimate", n, state.estimate.len())?;
        check_len("mask", n, mask.n())?;
        let eps = error_term(state, y, mask)?;
        let g = self.update_direction(&eps);
        let mu = self.config.step_size;

        let mut spectral_energy = state.spectral_energy.clone();
        let estimate = if self.config.method.is_normalized() {
            let u = self.basis.eigenvectors();
            let lambda = self.config.forgetting;
            let err_spec = u.tr_mul(&eps);
            for (e, s) in spectral_energy.iter_mut().zip(err_spec.iter()) {
                *e = lambda * *e + (1.0 - lambda) * s * s;
            }
            let mut coeff = u.tr_mul(&g);
            let band = self.config.band_filter.response();
            for k in 0..n {
                coeff[k] *= band[k] / spectral_energy[k].max(self.config.norm_floor);
            }
            &state.estimate + (u * coeff) * mu
        } else {
            &state.estimate + (&self.projector * g) * mu
        };

        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { timestep: state.t });
        }
        Ok(FilterState {
            estimate,
            spectral_energy,
            t: state.t + 1,
        })
    }

    /// One-step-ahead estimates: entry `t` is the estimate held before `y[t]` was ingested.
    pub fn run_online(
        &self,
        initial_estimate: DVector<f64>,
        observations: &[(DVector<f64>, SamplingMask)],
    ) -> Result<Vec<DVector<f64>>> {
        let mut state = FilterState::new(initial_estimate);
        let mut out = Vec::with_capacity(observations.len());
        for (y, mask) in observations {
            out.push(state.estimate.clone());
            state = self.step(&state, y, mask)?;
        }
        Ok(out)
    }
}

/// Stateless convenience wrapper around [`AdaptiveFilter::step`].
pub fn step(
    config: &AdaptiveFilterConfig,
    state: &FilterState,
    y: &DVector<f64>,
    mask: &SamplingMask,
    basis: &GftBasis,
) -> Result<FilterState> {
    AdaptiveFilter::new(config.clone(), basis)?.step(state, y, mask)
}

pub fn run_online(
    config: &AdaptiveFilterConfig,
    basis: &GftBasis,
    initial_estimate: DVector<f64>,
    observations: &[(DVector<f64>, SamplingMask)],
) -> Result<Vec<DVector<f64>>> {
    AdaptiveFilter::new(config.clone(), basis)?.run_online(initial_estimate, observations)
}

/// Sign with `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
