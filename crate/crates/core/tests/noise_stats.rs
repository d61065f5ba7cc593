mod common;

use common::{integrate, ks_critical_one, ks_critical_two, ks_one_sample, ks_two_sample, median};
use lmpgnn::noise::{cdf, characteristic_function, pdf, sample, NoiseSpec};

#[test]
fn pdf_values_at_location() {
    assert!((pdf(&NoiseSpec::cauchy(0.1), 0.0).unwrap() - 3.18310).abs() < 1e-5);
    assert!((pdf(&NoiseSpec::laplace(3.0), 0.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    let g = pdf(&NoiseSpec::gaussian(1.0), 0.0).unwrap();
    assert!((g - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
}

#[test]
fn pdfs_integrate_to_one() {
    let light = [
        NoiseSpec::gaussian(0.7).with_location(1.0),
        NoiseSpec::laplace(2.0).with_location(-3.0),
    ];
    for spec in light {
        let (mu, s) = (spec.location, spec.scale);
        let f = |t: f64| pdf(&spec, t).unwrap();
        let total = integrate(&f, mu - 50.0 * s, mu, 1e-10) + integrate(&f, mu, mu + 50.0 * s, 1e-10);
        assert!((total - 1.0).abs() < 1e-3, "{spec:?}: {total}");
    }
    let heavy = [
        NoiseSpec::cauchy(0.1),
        NoiseSpec::student_t(1.5),
        NoiseSpec::student_t(4.0),
        NoiseSpec::sas(1.0, 0.5),
    ];
    for spec in heavy {
        let (mu, s) = (spec.location, spec.scale);
        let f = |t: f64| pdf(&spec, t).unwrap();
        let total = integrate(&f, mu - 1e4 * s, mu, 1e-9) + integrate(&f, mu, mu + 1e4 * s, 1e-9);
        assert!((total - 1.0).abs() < 1e-2, "{spec:?}: {total}");
    }
}

#[test]
fn cdf_is_integral_of_pdf() {
    for spec in [
        NoiseSpec::gaussian(1.3),
        NoiseSpec::laplace(0.5),
        NoiseSpec::cauchy(2.0),
        NoiseSpec::student_t(3.0),
    ] {
        let f = |t: f64| pdf(&spec, t).unwrap();
        for t in [-2.0f64, -0.3, 0.0, 0.8, 3.0] {
            let lo = -200.0 * spec.scale;
            let area = integrate(&f, lo, t.min(0.0), 1e-11) + if t > 0.0 { integrate(&f, 0.0, t, 1e-11) } else { 0.0 };
            let expected = cdf(&spec, t).unwrap() - cdf(&spec, lo).unwrap();
            assert!((area - expected).abs() < 1e-6, "{spec:?} at {t}: {area} vs {expected}");
        }
    }
}

#[test]
fn empirical_characteristic_function() {
    let specs = [
        NoiseSpec::sas(1.5, 0.5),
        NoiseSpec::sas(0.8, 0.3).with_location(0.2),
        NoiseSpec::laplace(1.0),
    ];
    for spec in specs {
        let w = sample(&spec, 1_000_000, 17).unwrap();
        for x in [0.5, 1.0, 2.0] {
            let n = w.len() as f64;
            let re = w.iter().map(|v| (x * v).cos()).sum::<f64>() / n;
            let im = w.iter().map(|v| (x * v).sin()).sum::<f64>() / n;
            let cf = characteristic_function(&spec, x).unwrap();
            let err = ((re - cf.re).powi(2) + (im - cf.im).powi(2)).sqrt();
            assert!(err < 0.01, "{spec:?} at x={x}: |diff| = {err}");
        }
    }
    let one = characteristic_function(&NoiseSpec::sas(1.3, 0.4), 0.0).unwrap();
    assert_eq!((one.re, one.im), (1.0, 0.0));
    let g = characteristic_function(&NoiseSpec::sas(2.0, 0.1), 1.0).unwrap();
    assert!((g.re - (-0.1f64).exp()).abs() < 1e-15 && g.im == 0.0);
}

#[test]
fn ks_against_closed_form_cdfs() {
    let n = 100_000;
    for (i, spec) in [
        NoiseSpec::gaussian(1.0),
        NoiseSpec::laplace(0.5).with_location(2.0),
        NoiseSpec::cauchy(0.1),
    ]
    .into_iter()
    .enumerate()
    {
        let w = sample(&spec, n, 100 + i as u64).unwrap();
        let d = ks_one_sample(&w, |t| cdf(&spec, t).unwrap());
        assert!(d < ks_critical_one(n), "{spec:?}: D = {d}");
    }
}

#[test]
fn stable_special_cases_match_named_families() {
    let n = 100_000;
    let crit = ks_critical_two(n, n);
    let pairs = [
        (NoiseSpec::sas(2.0, 0.5), NoiseSpec::gaussian(1.0)),
        (NoiseSpec::sas(1.0, 1.0), NoiseSpec::cauchy(1.0)),
        (NoiseSpec::student_t(1.0), NoiseSpec::cauchy(1.0)),
    ];
    for (a, b) in pairs {
        let d = ks_two_sample(&sample(&a, n, 5).unwrap(), &sample(&b, n, 6).unwrap());
        assert!(d < crit, "{a:?} vs {b:?}: D = {d}");
    }
}

#[test]
fn medians_converge_to_location() {
    let n = 100_000;
    for spec in [NoiseSpec::gaussian(2.0), NoiseSpec::laplace(1.5)] {
        let m = median(&sample(&spec, n, 9).unwrap());
        assert!(m.abs() < 5.0 * spec.scale / (n as f64).sqrt(), "{spec:?}: median {m}");
    }
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    for spec in [
        NoiseSpec::sas(1.2, 0.1),
        NoiseSpec::student_t(2.5),
        NoiseSpec::laplace(1.0),
        NoiseSpec::gaussian(1.0),
    ] {
        let a = sample(&spec, 64, 1).unwrap();
        assert_eq!(a, sample(&spec, 64, 1).unwrap());
        assert_ne!(a, sample(&spec, 64, 2).unwrap());
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(sample(&NoiseSpec::gaussian(0.0), 10, 0).is_err());
    assert!(sample(&NoiseSpec::sas(2.5, 1.0), 10, 0).is_err());
    assert!(sample(&NoiseSpec::student_t(-1.0), 10, 0).is_err());
    let mut stray = NoiseSpec::cauchy(1.0);
    stray.alpha = Some(1.5);
    assert!(stray.validate().is_err());
    assert!(pdf(&NoiseSpec::sas(1.5, 1.0), 0.0).is_err());
}
