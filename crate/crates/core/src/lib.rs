//! Robust online estimation of time-varying graph signals under impulsive
//! noise.
//!
//! The crate provides the graph and spectral primitives ([`graph`],
//! [`spectral`]), heavy-tailed noise models ([`noise`]), classical graph
//! adaptive filters ([`adaptive`]), the unrolled least-mean-p-power GNN
//! ([`gnn`]) and a Monte-Carlo experiment harness ([`harness`]).
//!
//! ```
//! use lmpgnn::{FilterMethod, AdaptiveFilterConfig, AdaptiveFilter, GftBasis, Graph, SamplingMask, SpectralFilter};
//! use nalgebra::DVector;
//!
//! let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
//! let basis = GftBasis::from_graph(&g).unwrap();
//! let cfg = AdaptiveFilterConfig::new(FilterMethod::Glms, 0.5, SpectralFilter::all_pass(3));
//! let filter = AdaptiveFilter::new(cfg, &basis).unwrap();
//! let mask = SamplingMask::full(3);
//! let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
//! let x0 = filter.initial_estimate(&y, &mask).unwrap();
//! assert_eq!(x0.len(), 3);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod noise;
pub mod parallel;
pub mod spectral;

pub use adaptive::{AdaptiveFilter, AdaptiveFilterConfig, FilterMethod, FilterState};
pub use error::{Error, Result};
pub use gnn::{Activation, GnnConfig, LmpGnnLayer, LmpGnnNetwork, LossTarget, TrainSchedule};
pub use graph::{build_knn_graph, laplacian, GeoCoord, Graph};
pub use harness::{run_experiment, run_experiment_with, ExperimentConfig, ExperimentSpec, ResultTable};
pub use noise::{NoiseFamily, NoiseSpec};
pub use parallel::ExecutionMode;
pub use spectral::{GftBasis, SamplingMask, SpectralFilter};
