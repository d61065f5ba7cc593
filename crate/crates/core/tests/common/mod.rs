#![allow(dead_code)]

/// Coefficient of the 1% two-sided Kolmogorov-Smirnov critical value.
pub const KS_C_1PCT: f64 = 1.628;

pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_critical_one(n: usize) -> f64 {
    KS_C_1PCT / (n as f64).sqrt()
}

pub fn ks_critical_two(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_1PCT * ((n + m) / (n * m)).sqrt()
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

use lmpgnn::gnn::LmpGnnNetwork;
use lmpgnn::spectral::SamplingMask;
use nalgebra::DVector;

/// Smallest `|eps_i|` on observed nodes over all layers and the output error.
pub fn min_observed_error(net: &LmpGnnNetwork, x: &DVector<f64>, y: &DVector<f64>, mask: &SamplingMask) -> f64 {
    let (pred, cache) = net.forward(x, y, mask).unwrap();
    let mut m = f64::INFINITY;
    for &i in mask.observed() {
        for c in &cache.layers {
            m = m.min(c.eps[i].abs());
        }
        m = m.min((y[i] - pred[i]).abs());
    }
    m
}

/// Largest relative deviation between analytic and central-difference gradients
/// over every theta and bias entry.
pub fn max_gradient_error(net: &LmpGnnNetwork, x: &DVector<f64>, y: &DVector<f64>, mask: &SamplingMask, h: f64) -> f64 {
    let (_, grads, _) = net.gradients(x, y, mask).unwrap();
    let loss_of = |n: &LmpGnnNetwork| {
        let (pred, _) = n.forward(x, y, mask).unwrap();
        n.loss(&pred, y, mask).unwrap()
    };
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for l in 0..net.layers().len() {
        for k in 0..net.n() {
            for which in 0..2 {
                let analytic = if which == 0 {
                    grads.theta[l][k]
                } else {
                    grads.bias[l][k]
                };
                let orig = if which == 0 {
                    net.layers()[l].theta[k]
                } else {
                    net.layers()[l].bias[k]
                };
                let set = |n: &mut LmpGnnNetwork, v: f64| {
                    let layer = &mut n.layers_mut()[l];
                    if which == 0 {
                        layer.theta[k] = v;
                    } else {
                        layer.bias[k] = v;
                    }
                };
                set(&mut probe, orig + h);
                let up = loss_of(&probe);
                set(&mut probe, orig - h);
                let down = loss_of(&probe);
                set(&mut probe, orig);
                let numeric = (up - down) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}
