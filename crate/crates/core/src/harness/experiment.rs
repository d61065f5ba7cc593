//! Observation simulation and multi-repetition experiment execution.

use std::sync::Arc;

use nalgebra::DVector;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::adaptive::{AdaptiveFilter, AdaptiveFilterConfig, FilterMethod, DEFAULT_FORGETTING, DEFAULT_NORM_FLOOR};
use crate::error::{check_len, Error, Result};
use crate::gnn::{run_online_gnn, Activation, GnnConfig, LmpGnnNetwork, LossTarget, TrainSchedule};
use crate::gnn::{DEFAULT_DELTA_GRAD, DEFAULT_LEARNING_RATE, DEFAULT_PRETRAIN_EPOCHS};
use crate::noise::{derive_seed, splitmix64, NoiseSpec};
use crate::parallel::{map_indexed, ExecutionMode};
use crate::spectral::{greedy_bandlimit, GftBasis, SamplingMask, SpectralFilter};

const MASK_STREAM: u64 = 0x6D61_736B_5EED;

/// Estimator family of one method entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodKind {
    Filter(FilterMethod),
    /// LMP-GNN; Sign-GNN and LMS-GNN are the `p = 1` and `p = 2` cases.
    Gnn,
}

/// Fully resolved parameters of one method in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub kind: MethodKind,
    pub mu: f64,
    pub p: f64,
    pub norm_floor: f64,
    pub forgetting: f64,
    pub layers: usize,
    pub eta: f64,
    pub activation: Activation,
    pub pretrain_epochs: usize,
    pub delta_grad: f64,
    pub stop_gradient: bool,
    pub loss_target: LossTarget,
}

impl MethodSpec {
    fn base(label: &str, kind: MethodKind, mu: f64, p: f64) -> Self {
        Self {
            label: label.to_owned(),
            kind,
            mu,
            p,
            norm_floor: DEFAULT_NORM_FLOOR,
            forgetting: DEFAULT_FORGETTING,
            layers: 1,
            eta: DEFAULT_LEARNING_RATE,
            activation: Activation::Identity,
            pretrain_epochs: DEFAULT_PRETRAIN_EPOCHS,
            delta_grad: DEFAULT_DELTA_GRAD,
            stop_gradient: false,
            loss_target: LossTarget::Current,
        }
    }

    pub fn filter(method: FilterMethod, mu: f64) -> Self {
        let p = match method {
            FilterMethod::Gsign => 1.0,
            _ => 2.0,
        };
        Self::base(method.name(), MethodKind::Filter(method), mu, p)
    }

    pub fn gnn(label: &str, p: f64, mu: f64) -> Self {
        Self::base(label, MethodKind::Gnn, mu, p)
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_owned();
        self
    }

    pub fn gnn_config(&self) -> GnnConfig {
        GnnConfig {
            layers: self.layers,
            p: self.p,
            step_size: self.mu,
            learning_rate: self.eta,
            delta_grad: self.delta_grad,
            activation: self.activation,
            stop_gradient: self.stop_gradient,
            loss_target: self.loss_target,
        }
    }

    pub fn filter_config(&self, method: FilterMethod, band: SpectralFilter) -> AdaptiveFilterConfig {
        AdaptiveFilterConfig {
            method,
            step_size: self.mu,
            p: self.p,
            band_filter: band,
            norm_floor: self.norm_floor,
            forgetting: self.forgetting,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: Arc<Dataset>,
    pub noise: NoiseSpec,
    pub observed_count: usize,
    pub train_prefix: usize,
    pub band_size: usize,
    pub methods: Vec<MethodSpec>,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Node whose ground truth and predictions are kept for the first repetition.
    pub trace_node: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.dataset.n_nodes();
        let t = self.dataset.n_timesteps();
        self.noise.validate()?;
        if self.observed_count > n {
            return Err(Error::param(format!(
                "observed_count {} exceeds node count {n}",
                self.observed_count
            )));
        }
        if self.train_prefix >= t {
            return Err(Error::param(format!(
                "train_prefix {} must be below timestep count {t}",
                self.train_prefix
            )));
        }
        if self.band_size == 0 || self.band_size > n {
            return Err(Error::param(format!(
                "band_size must lie in 1..={n}, got {}",
                self.band_size
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions must be at least 1"));
        }
        if self.trace_node >= n {
            return Err(Error::param(format!(
                "trace_node {} out of range 0..{n}",
                self.trace_node
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::param("at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::param(format!("duplicate method label `{}`", m.label)));
            }
        }
        Ok(())
    }

    pub fn test_len(&self) -> usize {
        self.dataset.n_timesteps() - self.train_prefix
    }
}

/// Uniform random subset of `observed_count` nodes, deterministic in `seed`.
pub fn choose_sampling_set(n_nodes: usize, observed_count: usize, seed: u64) -> Result<SamplingMask> {
    if observed_count > n_nodes {
        return Err(Error::param(format!(
            "cannot observe {observed_count} of {n_nodes} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample_indices(&mut rng, n_nodes, observed_count).into_vec();
    picked.sort_unstable();
    SamplingMask::new(n_nodes, &picked)
}

/// `y[t] = D_S (x[t] + w[t])` for every timestep of one repetition.
///
/// `w[t]` is drawn for all `N` nodes from the stream seeded by
/// `derive_seed(base_seed, repetition, t)`, so any repetition can be replayed alone.
pub fn make_observations(
    dataset: &Dataset,
    noise: &NoiseSpec,
    mask: &SamplingMask,
    base_seed: u64,
    repetition: u64,
) -> Result<Vec<(DVector<f64>, SamplingMask)>> {
    noise.validate()?;
    let n = dataset.n_nodes();
    check_len("mask", n, mask.n())?;
    let d = mask.as_diagonal();
    (0..dataset.n_timesteps())
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, repetition, t as u64));
            let y = DVector::from_fn(n, |i, _| {
                let w = noise.draw(&mut rng);
                if d[i] != 0.0 {
                    dataset.signals[(t, i)] + w
                } else {
                    0.0
                }
            });
            Ok((y, mask.clone()))
        })
        .collect()
}

/// `(1/N) sum_i (x_i - x_hat_i)^2` over all nodes.
pub fn mse_at(x_true: &DVector<f64>, x_pred: &DVector<f64>) -> Result<f64> {
    check_len("prediction", x_true.len(), x_pred.len())?;
    if x_true.is_empty() {
        return Err(Error::param("empty signal"));
    }
    Ok((x_true - x_pred).norm_squared() / x_true.len() as f64)
}

/// Outcome of one method in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    /// `MSE[t]` over the test segment.
    Completed(Vec<f64>),
    Diverged {
        timestep: usize,
    },
}

impl RunOutcome {
    pub fn series(&self) -> Option<&[f64]> {
        match self {
            RunOutcome::Completed(s) => Some(s),
            RunOutcome::Diverged { .. } => None,
        }
    }

    /// Mean of the series; `+inf` for a diverged run.
    pub fn mean(&self) -> f64 {
        match self {
            RunOutcome::Completed(s) => s.iter().sum::<f64>() / s.len() as f64,
            RunOutcome::Diverged { .. } => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub label: String,
    /// Indexed by repetition.
    pub runs: Vec<RunOutcome>,
    /// Test-segment predictions at the trace node, first repetition only.
    pub trace: Option<Vec<f64>>,
}

/// Summary statistics of one method across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    /// Mean over all stored `(t, r)` values of completed repetitions.
    pub mean_mse: f64,
    /// Sample standard deviation of the per-repetition means.
    pub std_mse: f64,
    /// Median per-repetition mean, diverged runs counting as `+inf`.
    pub median_mse: f64,
    pub diverged: usize,
}

impl MethodResult {
    pub fn per_repetition_means(&self) -> Vec<f64> {
        self.runs.iter().map(RunOutcome::mean).collect()
    }

    pub fn diverged_count(&self) -> usize {
        self.runs.iter().filter(|r| r.series().is_none()).count()
    }

    pub fn summary(&self) -> MethodSummary {
        let completed: Vec<&[f64]> = self.runs.iter().filter_map(RunOutcome::series).collect();
        let count: usize = completed.iter().map(|s| s.len()).sum();
        let mean_mse = if count == 0 {
            f64::NAN
        } else {
            completed.iter().flat_map(|s| s.iter()).sum::<f64>() / count as f64
        };
        let rep_means: Vec<f64> = completed
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect();
        let std_mse = if rep_means.len() < 2 {
            0.0
        } else {
            let m = rep_means.iter().sum::<f64>() / rep_means.len() as f64;
            (rep_means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rep_means.len() - 1) as f64).sqrt()
        };
        MethodSummary {
            label: self.label.clone(),
            mean_mse,
            std_mse,
            median_mse: median(&self.per_repetition_means()),
            diverged: self.diverged_count(),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: String,
    /// First timestep of the test segment.
    pub test_start: usize,
    pub methods: Vec<MethodResult>,
    /// Mean squared observation error on observed nodes over the test segment, per repetition.
    pub observation_mse: Vec<f64>,
    pub trace_node: usize,
    /// Ground truth at the trace node over the test segment.
    pub trace_truth: Vec<f64>,
}

impl ResultTable {
    pub fn summaries(&self) -> Vec<MethodSummary> {
        self.methods.iter().map(MethodResult::summary).collect()
    }

    pub fn method(&self, label: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// Everything shared by all repetitions.
struct Prepared {
    basis: Arc<GftBasis>,
    band: SpectralFilter,
    mask: SamplingMask,
}

fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    spec.validate()?;
    let basis = Arc::new(GftBasis::from_graph(&spec.dataset.graph)?);
    let train_rows = spec.train_prefix.max(1);
    let training = spec.dataset.signals.rows(0, train_rows).into_owned();
    let band = greedy_bandlimit(&training, &basis, spec.band_size)?;
    let mask = choose_sampling_set(
        spec.dataset.n_nodes(),
        spec.observed_count,
        splitmix64(spec.base_seed ^ MASK_STREAM),
    )?;
    Ok(Prepared { basis, band, mask })
}

struct RepetitionOutput {
    outcomes: Vec<(RunOutcome, Option<Vec<f64>>)>,
    observation_mse: f64,
}

fn run_method(
    spec: &ExperimentSpec,
    prep: &Prepared,
    method: &MethodSpec,
    observations: &[(DVector<f64>, SamplingMask)],
    initial: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    match method.kind {
        MethodKind::Filter(fm) => {
            let filter = AdaptiveFilter::new(method.filter_config(fm, prep.band.clone()), &prep.basis)?;
            let all = filter.run_online(initial.clone(), observations)?;
            Ok(all[spec.train_prefix..].to_vec())
        }
        MethodKind::Gnn => {
            let mut net = LmpGnnNetwork::new(prep.basis.clone(), &method.gnn_config(), &prep.band)?;
            run_online_gnn(
                &mut net,
                observations,
                TrainSchedule {
                    train_steps: spec.train_prefix,
                    epochs: method.pretrain_epochs,
                },
                initial,
            )
        }
    }
}

fn run_repetition(spec: &ExperimentSpec, prep: &Prepared, repetition: usize) -> Result<RepetitionOutput> {
    let dataset = &spec.dataset;
    let observations = make_observations(dataset, &spec.noise, &prep.mask, spec.base_seed, repetition as u64)?;
    let projector = prep.basis.operator(prep.band.response())?;
    let initial = &projector * &observations[0].0;
    let truth_at = |t: usize| dataset.signals.row(t).transpose();

    let mut outcomes = Vec::with_capacity(spec.methods.len());
    for method in &spec.methods {
        let outcome = match run_method(spec, prep, method, &observations, &initial) {
            Ok(preds) => {
                let series = preds
                    .iter()
                    .enumerate()
                    .map(|(k, p)| mse_at(&truth_at(spec.train_prefix + k), p))
                    .collect::<Result<Vec<_>>>()?;
                let trace = (repetition == 0).then(|| preds.iter().map(|p| p[spec.trace_node]).collect());
                (RunOutcome::Completed(series), trace)
            }
            Err(Error::Divergence { timestep }) => (RunOutcome::Diverged { timestep }, None),
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
    }

    let observed = prep.mask.observed();
    let mut obs_total = 0.0;
    for (t, (y, _)) in observations.iter().enumerate().skip(spec.train_prefix) {
        obs_total += observed
            .iter()
            .map(|&i| (y[i] - dataset.signals[(t, i)]).powi(2))
            .sum::<f64>();
    }
    let observation_mse = if observed.is_empty() {
        0.0
    } else {
        obs_total / (observed.len() * spec.test_len()) as f64
    };
    Ok(RepetitionOutput {
        outcomes,
        observation_mse,
    })
}

/// Runs every method on identical observation streams for every repetition.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_experiment_with(spec, ExecutionMode::default())
}

/// As [`run_experiment`] with an explicit execution mode; the result does not depend on it.
pub fn run_experiment_with(spec: &ExperimentSpec, mode: ExecutionMode) -> Result<ResultTable> {
    let prep = prepare(spec)?;
    let reps = map_indexed(spec.repetitions, mode, |r| run_repetition(spec, &prep, r));
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;

    let mut methods: Vec<MethodResult> = spec
        .methods
        .iter()
        .map(|m| MethodResult {
            label: m.label.clone(),
            runs: Vec::with_capacity(spec.repetitions),
            trace: None,
        })
        .collect();
    let mut observation_mse = Vec::with_capacity(spec.repetitions);
    for rep in reps {
        observation_mse.push(rep.observation_mse);
        for (m, (outcome, trace)) in methods.iter_mut().zip(rep.outcomes) {
            m.runs.push(outcome);
            if trace.is_some() {
                m.trace = trace;
            }
        }
    }
    let trace_truth = (spec.train_prefix..spec.dataset.n_timesteps())
        .map(|t| spec.dataset.signals[(t, spec.trace_node)])
        .collect();
    Ok(ResultTable {
        experiment: spec.name.clone(),
        test_start: spec.train_prefix,
        methods,
        observation_mse,
        trace_node: spec.trace_node,
        trace_truth,
    })
}
