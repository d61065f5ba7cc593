//! Additive noise models: Gaussian, symmetric alpha-stable, Cauchy, Student's t and Laplace.
//!
//! All samplers draw from ChaCha8 seeded through `seed_from_u64`, so a given
//! `(spec, seed)` produces the same stream on every platform.
//!
//! Symmetric alpha-stable draws use the Chambers-Mallows-Stuck transform with
//! the characteristic function `exp(j mu x - gamma |x|^alpha)`, i.e. the
//! standard stable variate is scaled by `gamma^(1/alpha)`.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc, gamma::ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Sas,
    Cauchy,
    StudentT,
    Laplace,
}

impl std::fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Sas => "sas",
            NoiseFamily::Cauchy => "cauchy",
            NoiseFamily::StudentT => "student_t",
            NoiseFamily::Laplace => "laplace",
        };
        f.write_str(s)
    }
}

/// Parameters of one noise distribution.
///
/// `scale` is sigma (gaussian), gamma (sas, cauchy), b (laplace) or a
/// location-scale multiplier for Student's t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    #[serde(default)]
    pub location: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl NoiseSpec {
    fn base(family: NoiseFamily, scale: f64) -> Self {
        Self {
            family,
            location: 0.0,
            scale,
            alpha: None,
            nu: None,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::base(NoiseFamily::Gaussian, sigma)
    }

    pub fn sas(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::base(NoiseFamily::Sas, gamma)
        }
    }

    pub fn cauchy(gamma: f64) -> Self {
        Self::base(NoiseFamily::Cauchy, gamma)
    }

    pub fn student_t(nu: f64) -> Self {
        Self {
            nu: Some(nu),
            ..Self::base(NoiseFamily::StudentT, 1.0)
        }
    }

    pub fn laplace(b: f64) -> Self {
        Self::base(NoiseFamily::Laplace, b)
    }

    pub fn with_location(mut self, location: f64) -> Self {
        self.location = location;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.location.is_finite() {
            return Err(Error::param(format!(
                "noise location must be finite, got {}",
                self.location
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::param(format!(
                "noise scale must be positive, got {}",
                self.scale
            )));
        }
        match self.family {
            NoiseFamily::Sas => match self.alpha {
                Some(a) if a > 0.0 && a <= 2.0 => {}
                Some(a) => return Err(Error::param(format!("alpha must lie in (0, 2], got {a}"))),
                None => return Err(Error::param("sas noise requires alpha")),
            },
            NoiseFamily::StudentT => match self.nu {
                Some(nu) if nu > 0.0 && nu.is_finite() => {}
                Some(nu) => return Err(Error::param(format!("nu must be positive, got {nu}"))),
                None => return Err(Error::param("student_t noise requires nu")),
            },
            _ => {}
        }
        if self.alpha.is_some() && self.family != NoiseFamily::Sas {
            return Err(Error::param(format!(
                "alpha only applies to sas noise, not {}",
                self.family
            )));
        }
        if self.nu.is_some() && self.family != NoiseFamily::StudentT {
            return Err(Error::param(format!(
                "nu only applies to student_t noise, not {}",
                self.family
            )));
        }
        Ok(())
    }

    fn alpha_value(&self) -> f64 {
        self.alpha.unwrap_or(2.0)
    }

    fn nu_value(&self) -> f64 {
        self.nu.unwrap_or(f64::INFINITY)
    }

    /// Draws one variate from `rng`. The spec must already be valid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mu, s) = (self.location, self.scale);
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                mu + s * z
            }
            NoiseFamily::Sas => {
                let alpha = self.alpha_value();
                mu + s.powf(1.0 / alpha) * standard_symmetric_stable(alpha, rng)
            }
            NoiseFamily::Cauchy => {
                let u: f64 = rng.sample(Open01);
                mu + s * (PI * (u - 0.5)).tan()
            }
            NoiseFamily::StudentT => {
                let t: f64 = StudentT::new(self.nu_value()).expect("validated nu").sample(rng);
                mu + s * t
            }
            NoiseFamily::Laplace => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                mu - s * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    /// Closed-form density at `t`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        pdf(self, t)
    }

    /// Closed-form cumulative distribution at `t`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        cdf(self, t)
    }
}

/// Chambers-Mallows-Stuck draw with characteristic function `exp(-|x|^alpha)`.
fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = PI * (u - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let cos_v = v.cos();
    (alpha * v).sin() / cos_v.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `n` i.i.d. draws, deterministic in `seed`.
pub fn sample(spec: &NoiseSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| spec.draw(&mut rng)).collect())
}

/// Reduces a closed-form-capable alpha-stable spec to its Gaussian or Cauchy equivalent.
fn resolve_closed_form(spec: &NoiseSpec) -> Result<NoiseSpec> {
    spec.validate()?;
    if spec.family != NoiseFamily::Sas {
        return Ok(*spec);
    }
    let alpha = spec.alpha_value();
    if alpha == 2.0 {
        Ok(NoiseSpec::gaussian((2.0 * spec.scale).sqrt()).with_location(spec.location))
    } else if alpha == 1.0 {
        Ok(NoiseSpec::cauchy(spec.scale).with_location(spec.location))
    } else {
        Err(Error::UnsupportedDensity { alpha })
    }
}

pub fn pdf(spec: &NoiseSpec, t: f64) -> Result<f64> {
    let spec = resolve_closed_form(spec)?;
    let (mu, s) = (spec.location, spec.scale);
    let z = (t - mu) / s;
    Ok(match spec.family {
        NoiseFamily::Gaussian => (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt()),
        NoiseFamily::Cauchy => 1.0 / (PI * s * (1.0 + z * z)),
        NoiseFamily::StudentT => {
            let nu = spec.nu_value();
            let log_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln();
            (log_norm - (nu + 1.0) / 2.0 * (1.0 + z * z / nu).ln()).exp() / s
        }
        NoiseFamily::Laplace => (-z.abs()).exp() / (2.0 * s),
        NoiseFamily::Sas => unreachable!("resolved above"),
    })
}

pub fn cdf(spec: &NoiseSpec, t: f64) -> Result<f64> {
    let spec = resolve_closed_form(spec)?;
    let z = (t - spec.location) / spec.scale;
    Ok(match spec.family {
        NoiseFamily::Gaussian => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
        NoiseFamily::Cauchy => 0.5 + z.atan() / PI,
        NoiseFamily::StudentT => {
            let nu = spec.nu_value();
            let tail = 0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + z * z));
            if z >= 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
        NoiseFamily::Laplace => {
            if z < 0.0 {
                0.5 * z.exp()
            } else {
                1.0 - 0.5 * (-z).exp()
            }
        }
        NoiseFamily::Sas => unreachable!("resolved above"),
    })
}

/// Characteristic function `E[exp(j x W)]`.
///
/// For alpha-stable noise this is `exp(j mu x - gamma |x|^alpha)`. Gaussian,
/// Cauchy and Laplace use their closed forms; Student's t is not supported.
pub fn characteristic_function(spec: &NoiseSpec, x: f64) -> Result<Complex<f64>> {
    spec.validate()?;
    let (mu, s) = (spec.location, spec.scale);
    let phase = Complex::new(0.0, mu * x).exp();
    let magnitude = match spec.family {
        NoiseFamily::Sas => (-s * x.abs().powf(spec.alpha_value())).exp(),
        NoiseFamily::Gaussian => (-0.5 * s * s * x * x).exp(),
        NoiseFamily::Cauchy => (-s * x.abs()).exp(),
        NoiseFamily::Laplace => 1.0 / (1.0 + s * s * x * x),
        NoiseFamily::StudentT => {
            return Err(Error::param(
                "characteristic function not available for student_t noise",
            ))
        }
    };
    Ok(phase * magnitude)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the noise stream for one `(repetition, timestep)` cell:
/// `base_seed XOR hash(repetition, timestep)`.
pub fn derive_seed(base_seed: u64, repetition: u64, timestep: u64) -> u64 {
    base_seed ^ splitmix64(splitmix64(repetition) ^ timestep.rotate_left(32) ^ 0xA076_1D64_78BD_642F)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_densities_at_location() {
        assert_relative_eq!(
            pdf(&NoiseSpec::cauchy(0.1), 0.0).unwrap(),
            1.0 / (0.1 * PI),
            max_relative = 1e-14
        );
        assert_relative_eq!(pdf(&NoiseSpec::cauchy(0.1), 0.0).unwrap(), 3.18310, max_relative = 1e-5);
        assert_relative_eq!(
            pdf(&NoiseSpec::laplace(3.0), 0.0).unwrap(),
            1.0 / 6.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            pdf(&NoiseSpec::gaussian(1.0), 0.0).unwrap(),
            1.0 / (2.0 * PI).sqrt(),
            max_relative = 1e-14
        );
        let shifted = NoiseSpec::laplace(3.0).with_location(2.5);
        assert_relative_eq!(pdf(&shifted, 2.5).unwrap(), 1.0 / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn student_t_one_dof_is_cauchy() {
        for &t in &[-3.0, -0.2, 0.0, 1.7, 10.0] {
            assert_relative_eq!(
                pdf(&NoiseSpec::student_t(1.0), t).unwrap(),
                pdf(&NoiseSpec::cauchy(1.0), t).unwrap(),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                cdf(&NoiseSpec::student_t(1.0), t).unwrap(),
                cdf(&NoiseSpec::cauchy(1.0), t).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn sas_density_only_for_closed_forms() {
        assert!(matches!(
            pdf(&NoiseSpec::sas(1.5, 0.1), 0.0),
            Err(Error::UnsupportedDensity { .. })
        ));
        assert_relative_eq!(
            pdf(&NoiseSpec::sas(2.0, 0.1), 0.0).unwrap(),
            1.0 / (0.2 * 2.0 * PI).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            pdf(&NoiseSpec::sas(1.0, 0.1), 0.0).unwrap(),
            1.0 / (0.1 * PI),
            max_relative = 1e-14
        );
    }

    #[test]
    fn characteristic_function_values() {
        let spec = NoiseSpec::sas(1.3, 0.4);
        let phi0 = characteristic_function(&spec, 0.0).unwrap();
        assert_eq!(phi0, Complex::new(1.0, 0.0));
        let phi = characteristic_function(&NoiseSpec::sas(2.0, 0.1), 1.0).unwrap();
        assert_relative_eq!(phi.re, (-0.1f64).exp(), max_relative = 1e-15);
        assert_eq!(phi.im, 0.0);
        let shifted = NoiseSpec::sas(1.3, 0.4).with_location(0.7);
        let phi = characteristic_function(&shifted, 2.0).unwrap();
        assert_relative_eq!(phi.norm(), (-0.4 * 2f64.powf(1.3)).exp(), max_relative = 1e-14);
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        for spec in [
            NoiseSpec::gaussian(1.0),
            NoiseSpec::sas(1.2, 0.1),
            NoiseSpec::cauchy(0.1),
            NoiseSpec::student_t(10.0),
            NoiseSpec::laplace(3.0),
        ] {
            let a = sample(&spec, 64, 11).unwrap();
            assert_eq!(a, sample(&spec, 64, 11).unwrap());
            assert_ne!(a, sample(&spec, 64, 12).unwrap());
            assert!(a.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn validation() {
        assert!(sample(&NoiseSpec::sas(2.5, 0.1), 1, 0).is_err());
        assert!(sample(&NoiseSpec::sas(0.0, 0.1), 1, 0).is_err());
        assert!(sample(&NoiseSpec::gaussian(0.0), 1, 0).is_err());
        assert!(sample(&NoiseSpec::student_t(-1.0), 1, 0).is_err());
        assert!(sample(&NoiseSpec::gaussian(1.0).with_location(f64::NAN), 1, 0).is_err());
        assert!(sample(&NoiseSpec::gaussian(1.0), 0, 0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(5, 0, 1);
        assert_ne!(a, derive_seed(5, 1, 0));
        assert_ne!(a, derive_seed(5, 0, 2));
        assert_eq!(a, derive_seed(5, 0, 1));
    }

    #[test]
    fn config_keys() {
        let spec: NoiseSpec = toml::from_str("family = \"sas\"\nalpha = 1.4\nscale = 0.1").unwrap();
        assert_eq!(spec, NoiseSpec::sas(1.4, 0.1));
        assert!(toml::from_str::<NoiseSpec>("family = \"sas\"\nbeta = 0.1").is_err());
    }
}
