mod common;

use std::sync::Arc;

use lmpgnn::adaptive::{AdaptiveFilter, AdaptiveFilterConfig, FilterMethod, FilterState};
use lmpgnn::gnn::{run_online_gnn, Activation, GnnConfig, LmpGnnNetwork, LossTarget, TrainSchedule};
use lmpgnn::graph::{random_geometric_graph, Graph};
use lmpgnn::spectral::{GftBasis, SamplingMask, SpectralFilter};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn basis(n: usize, seed: u64) -> Arc<GftBasis> {
    let (g, _) = random_geometric_graph(n, 0.5, seed).unwrap();
    Arc::new(GftBasis::from_graph(&g).unwrap())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn random_network(
    rng: &mut ChaCha8Rng,
    basis: &Arc<GftBasis>,
    layers: usize,
    p: f64,
    activation: Activation,
) -> LmpGnnNetwork {
    let n = basis.n();
    let mut cfg = GnnConfig::new(layers, p, 0.4);
    cfg.activation = activation;
    let mut net = LmpGnnNetwork::new(basis.clone(), &cfg, &SpectralFilter::all_pass(n)).unwrap();
    for layer in net.layers_mut() {
        layer.theta = random_vec(rng, n, 1.5);
        layer.bias = random_vec(rng, n, 0.3);
    }
    net
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = basis(6, 1);
    let mask = SamplingMask::new(6, &[0, 2, 3, 5]).unwrap();
    let mut checked = 0;
    for &p in &[1.1, 1.3, 1.7, 2.0] {
        for activation in [Activation::Identity, Activation::Tanh, Activation::LeakyRelu(0.1)] {
            for layers in 1..=3 {
                let net = random_network(&mut rng, &b, layers, p, activation);
                let x = random_vec(&mut rng, 6, 2.0);
                let y = mask.apply(&random_vec(&mut rng, 6, 4.0)).unwrap();
                if common::min_observed_error(&net, &x, &y, &mask) <= 1e-3 {
                    continue;
                }
                let err = common::max_gradient_error(&net, &x, &y, &mask, 1e-5);
                assert!(err < 1e-4, "p={p} {activation:?} L={layers}: {err}");
                checked += 1;
            }
        }
    }
    assert!(checked > 30);
}

#[test]
fn next_step_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b = basis(5, 4);
    let mask = SamplingMask::new(5, &[0, 1, 4]).unwrap();
    let h = 1e-5;
    let mut checked = 0;
    for _ in 0..10 {
        let net = random_network(&mut rng, &b, 2, 1.4, Activation::Identity);
        let x = random_vec(&mut rng, 5, 2.0);
        let y = mask.apply(&random_vec(&mut rng, 5, 3.0)).unwrap();
        let target = mask.apply(&random_vec(&mut rng, 5, 3.0)).unwrap();
        let (pred, cache) = net.forward(&x, &y, &mask).unwrap();
        let smallest = mask
            .observed()
            .iter()
            .flat_map(|&i| {
                cache
                    .layers
                    .iter()
                    .map(move |c| c.eps[i].abs())
                    .chain([(target[i] - pred[i]).abs()])
            })
            .fold(f64::INFINITY, f64::min);
        if smallest <= 1e-3 {
            continue;
        }
        let (_, grads, _) = net.gradients_against(&x, &y, &mask, &target, &mask).unwrap();
        let loss_of = |n: &LmpGnnNetwork| {
            let (pred, _) = n.forward(&x, &y, &mask).unwrap();
            n.loss(&pred, &target, &mask).unwrap()
        };
        for l in 0..2 {
            for k in 0..5 {
                let mut up = net.clone();
                up.layers_mut()[l].theta[k] += h;
                let mut down = net.clone();
                down.layers_mut()[l].theta[k] -= h;
                let numeric = (loss_of(&up) - loss_of(&down)) / (2.0 * h);
                let analytic = grads.theta[l][k];
                let scale = analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() <= 1e-4 * scale,
                    "l={l} k={k}: {numeric} vs {analytic}"
                );
            }
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn stop_gradient_drops_the_error_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = basis(5, 2);
    let mask = SamplingMask::full(5);
    let mut net = random_network(&mut rng, &b, 2, 1.5, Activation::Identity);
    let x = random_vec(&mut rng, 5, 1.0);
    let y = random_vec(&mut rng, 5, 3.0);
    let (_, full, _) = net.gradients(&x, &y, &mask).unwrap();
    net.stop_gradient = true;
    let (_, stopped, _) = net.gradients(&x, &y, &mask).unwrap();
    // The last layer's gradients never pass through an earlier error term.
    assert_eq!(full.theta[1], stopped.theta[1]);
    assert_ne!(full.theta[0], stopped.theta[0]);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = basis(7, 3);
    let mut net = random_network(&mut rng, &b, 2, 1.2, Activation::Identity);
    net.learning_rate = 0.0;
    let before = net.layers().to_vec();
    let mask = SamplingMask::new(7, &[1, 2, 6]).unwrap();
    let x = random_vec(&mut rng, 7, 1.0);
    let y = mask.apply(&random_vec(&mut rng, 7, 2.0)).unwrap();
    let pred = net.online_update(&x, &y, &mask).unwrap();
    assert_eq!(net.layers(), &before[..]);
    assert_eq!(pred, net.forward(&x, &y, &mask).unwrap().0);
}

#[test]
fn pow_evaluations_only_for_fractional_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = basis(6, 6);
    let x = random_vec(&mut rng, 6, 1.0);
    let y = random_vec(&mut rng, 6, 2.0);
    let mask = SamplingMask::full(6);
    let count = |p: f64| {
        let net = LmpGnnNetwork::new(b.clone(), &GnnConfig::new(3, p, 0.3), &SpectralFilter::all_pass(6)).unwrap();
        net.forward(&x, &y, &mask).unwrap().1.pow_evaluations
    };
    assert_eq!(count(1.0), 0);
    assert_eq!(count(2.0), 0);
    assert!(count(1.5) > 0);
}

#[test]
fn sign_update_is_clipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b = basis(8, 5);
    let u = b.eigenvectors();
    for _ in 0..50 {
        let theta = random_vec(&mut rng, 8, 2.0);
        let eps = random_vec(&mut rng, 8, 1e6);
        let mu = 0.3;
        let s = u.tr_mul(&eps.map(lmpgnn::adaptive::sign));
        let update = u * theta.component_mul(&s) * mu;
        let middle = (0..8)
            .map(|i| (0..8).map(|k| (u[(i, k)] * theta[k] * s[k]).abs()).sum::<f64>())
            .fold(0.0, f64::max)
            * mu;
        assert!(update.amax() <= middle + 1e-12);
        assert!(middle <= mu * theta.norm() * (8f64).sqrt() * 8f64.sqrt() + 1e-12);
    }
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = basis(6, 7);
    let net = random_network(&mut rng, &b, 3, 1.3, Activation::LeakyRelu(0.05));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    net.save_checkpoint(&path).unwrap();
    let back = LmpGnnNetwork::load_checkpoint(b.clone(), &path).unwrap();
    assert_eq!(back.layers(), net.layers());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("lmpgnn-checkpoint 1\nn 6\nlayers 3\n"));

    let other = basis(5, 7);
    assert!(LmpGnnNetwork::load_checkpoint(other, &path).is_err());
    std::fs::write(&path, text.replace("theta", "thet")).unwrap();
    assert!(LmpGnnNetwork::load_checkpoint(b, &path).is_err());
}

fn stream(n: usize, len: usize, seed: u64, mask: &SamplingMask) -> Vec<(DVector<f64>, SamplingMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|t| {
            let y = DVector::from_fn(n, |i, _| {
                (i as f64 + 0.1 * t as f64).sin() + rng.random_range(-0.2..0.2)
            });
            (mask.apply(&y).unwrap(), mask.clone())
        })
        .collect()
}

#[test]
fn online_gnn_is_deterministic_and_aligned() {
    let b = basis(8, 9);
    let mask = SamplingMask::new(8, &[0, 1, 3, 4, 6]).unwrap();
    let obs = stream(8, 40, 1, &mask);
    let x0 = DVector::zeros(8);
    for loss in [LossTarget::Current, LossTarget::Next] {
        let mut cfg = GnnConfig::new(2, 1.2, 0.3);
        cfg.loss_target = loss;
        let schedule = TrainSchedule {
            train_steps: 10,
            epochs: 3,
        };
        let run = || {
            let mut net = LmpGnnNetwork::new(b.clone(), &cfg, &SpectralFilter::all_pass(8)).unwrap();
            run_online_gnn(&mut net, &obs, schedule, &x0).unwrap()
        };
        let a = run();
        assert_eq!(a.len(), 30);
        assert_eq!(a, run());

        // A prediction never depends on the observation it is scored against.
        let mut changed = obs.clone();
        changed[25].0 *= 100.0;
        let mut net = LmpGnnNetwork::new(b.clone(), &cfg, &SpectralFilter::all_pass(8)).unwrap();
        let c = run_online_gnn(&mut net, &changed, schedule, &x0).unwrap();
        assert_eq!(a[..16], c[..16]);
        assert_ne!(a[16], c[16]);
    }
    let mut net = LmpGnnNetwork::new(b, &GnnConfig::new(1, 1.0, 0.3), &SpectralFilter::all_pass(8)).unwrap();
    let all = run_online_gnn(
        &mut net,
        &obs,
        TrainSchedule {
            train_steps: 40,
            epochs: 1,
        },
        &x0,
    )
    .unwrap();
    assert!(all.is_empty());
}

#[test]
fn untrained_gnn_matches_classical_filter() {
    let b = basis(8, 12);
    let mask = SamplingMask::new(8, &[0, 2, 3, 5, 7]).unwrap();
    let obs = stream(8, 30, 2, &mask);
    let band = SpectralFilter::bandlimited(8, &[0, 1, 2]).unwrap();
    let x0 = b.operator(band.response()).unwrap() * &obs[0].0;
    for (method, p) in [
        (FilterMethod::Glms, 2.0),
        (FilterMethod::Gsign, 1.0),
        (FilterMethod::Glmp, 1.4),
    ] {
        let filter = AdaptiveFilter::new(AdaptiveFilterConfig::new(method, 0.3, band.clone()).with_p(p), &b).unwrap();
        let classical = filter.run_online(x0.clone(), &obs).unwrap();
        let mut cfg = GnnConfig::new(1, p, 0.3);
        cfg.learning_rate = 0.0;
        let mut net = LmpGnnNetwork::new(b.clone(), &cfg, &band).unwrap();
        let gnn = run_online_gnn(
            &mut net,
            &obs,
            TrainSchedule {
                train_steps: 0,
                epochs: 0,
            },
            &x0,
        )
        .unwrap();
        for (a, g) in classical.iter().zip(&gnn) {
            assert!((a - g).amax() < 1e-12, "{method}");
        }
    }
}

#[test]
fn scalar_lms_step_and_contraction() {
    let g = Graph::from_edges(1, &[]).unwrap();
    let b = GftBasis::from_graph(&g).unwrap();
    let mask = SamplingMask::full(1);
    let cfg = AdaptiveFilterConfig::new(FilterMethod::Glms, 0.5, SpectralFilter::all_pass(1));
    let f = AdaptiveFilter::new(cfg, &b).unwrap();
    let y = DVector::from_element(1, 1.0);
    let next = f.step(&FilterState::new(DVector::zeros(1)), &y, &mask).unwrap();
    assert_eq!(next.estimate[0], 0.5);

    let obs: Vec<_> = (0..30).map(|_| (y.clone(), mask.clone())).collect();
    let est = f.run_online(DVector::from_element(1, -3.0), &obs).unwrap();
    for w in est.windows(2) {
        let (e0, e1) = ((w[0][0] - 1.0).abs(), (w[1][0] - 1.0).abs());
        assert!((e1 - 0.5 * e0).abs() < 1e-12);
    }
}

#[test]
fn sign_filter_step_is_bounded() {
    let b = basis(9, 13);
    let band = SpectralFilter::bandlimited(9, &[0, 1, 2, 3]).unwrap();
    let f = AdaptiveFilter::new(AdaptiveFilterConfig::new(FilterMethod::Gsign, 0.2, band), &b).unwrap();
    let mask = SamplingMask::new(9, &[0, 1, 2, 5, 8]).unwrap();
    let norm_inf = (0..9)
        .map(|i| f.projector().row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = FilterState::new(DVector::zeros(9));
    for _ in 0..50 {
        let y = mask.apply(&random_vec(&mut rng, 9, 1e4)).unwrap();
        let next = f.step(&state, &y, &mask).unwrap();
        assert!((&next.estimate - &state.estimate).amax() <= 0.2 * norm_inf + 1e-12);
        state = next;
    }
}

#[test]
fn divergence_is_reported_with_timestep() {
    let b = basis(6, 14);
    let f = AdaptiveFilter::new(
        AdaptiveFilterConfig::new(FilterMethod::Glms, 1e300, SpectralFilter::all_pass(6)),
        &b,
    )
    .unwrap();
    let mask = SamplingMask::full(6);
    let obs: Vec<_> = (0..10)
        .map(|t| (DVector::from_element(6, 1e10 * (t as f64 + 1.0)), mask.clone()))
        .collect();
    match f.run_online(DVector::zeros(6), &obs) {
        Err(lmpgnn::Error::Divergence { timestep }) => assert!(timestep < 10),
        other => panic!("{other:?}"),
    }
}
