//! Synthetic bandlimited time-varying signals on random geometric graphs.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::random_geometric_graph;
use crate::spectral::GftBasis;

/// Ground truth supported on the `band` lowest graph frequencies. Spectral
/// coefficients start at `N(0, amplitude^2)` and follow a Gaussian random walk
/// with per-step standard deviation `drift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_band")]
    pub band: usize,
    #[serde(default = "default_timesteps")]
    pub timesteps: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_drift")]
    pub drift: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_nodes() -> usize {
    50
}
fn default_band() -> usize {
    8
}
fn default_timesteps() -> usize {
    200
}
fn default_amplitude() -> f64 {
    10.0
}
fn default_drift() -> f64 {
    0.2
}
fn default_radius() -> f64 {
    0.25
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            nodes: default_nodes(),
            band: default_band(),
            timesteps: default_timesteps(),
            amplitude: default_amplitude(),
            drift: default_drift(),
            radius: default_radius(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<Dataset> {
        if self.band == 0 || self.band > self.nodes {
            return Err(Error::param(format!(
                "band must lie in 1..={}, got {}",
                self.nodes, self.band
            )));
        }
        if self.timesteps < 2 {
            return Err(Error::param("synthetic dataset needs at least 2 timesteps"));
        }
        if !(self.amplitude > 0.0) || !(self.drift >= 0.0) {
            return Err(Error::param("amplitude must be positive and drift nonnegative"));
        }
        let (graph, _) = random_geometric_graph(self.nodes, self.radius, self.seed)?;
        let basis = GftBasis::from_graph(&graph)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x05EE_D0F5_16A1);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut coeff: Vec<f64> = (0..self.band).map(|_| self.amplitude * normal()).collect();
        let u = basis.eigenvectors();
        let band_vectors = u.columns(0, self.band);
        let mut signals = DMatrix::zeros(self.timesteps, self.nodes);
        for t in 0..self.timesteps {
            let x = band_vectors * DVector::from_column_slice(&coeff);
            signals.set_row(t, &x.transpose());
            for c in coeff.iter_mut() {
                *c += self.drift * normal();
            }
        }
        Dataset::new(format!("synthetic-n{}-b{}", self.nodes, self.band), signals, graph)
    }
}
