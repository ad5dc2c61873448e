//! Batch privatizer against independent oracles.

use dp_evalue::dist::{SimpleDistribution, TestingPair};
use dp_evalue::evar::{law_under, BoundedEVariable};
use dp_evalue::noise::NoiseMode;
use dp_evalue::optimal::OptimalEVariable;
use dp_evalue::privatize::{
    calibrate, calibrate_with, max_feasible_lambda, mixed_log_statistic, objective, release, BatchPrivatizer,
    PowerModel, ReleaseOptions,
};
use dp_evalue::tslr::TslrEVariable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bern_pair() -> TestingPair {
    TestingPair::new(SimpleDistribution::bernoulli(0.3).unwrap(), SimpleDistribution::bernoulli(0.7).unwrap()).unwrap()
}

/// Dense maximisation of the objective on a log grid in `s = top - λ`.
fn grid_argmax(lo: f64, hi: f64, eps: f64, n: usize, model: &PowerModel) -> (f64, f64) {
    let top = max_feasible_lambda(lo, hi, eps);
    let m = 200_000;
    (0..m)
        .map(|i| {
            let s = top * 1e-12 * (1e12f64).powf(i as f64 / (m - 1) as f64);
            let l = top - s;
            (l, objective(l, lo, hi, eps, n, model))
        })
        .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

#[test]
fn large_n_choice_tracks_inverse_power() {
    let e = OptimalEVariable::new(bern_pair(), 1.0).unwrap();
    let (lo, hi) = e.range();
    let mu = e.construction().rate;
    assert!((max_feasible_lambda(lo, hi, 1.0) - 1.0).abs() < 1e-12);
    for n in [10_000usize, 100_000] {
        let (l_grid, _) = grid_argmax(lo, hi, 1.0, n, &PowerModel::ConcavityBound { mu });
        let c = calibrate(lo, hi, 1.0, n, mu).unwrap();
        let s = 1.0 - c.lambda;
        let sn = s * n as f64 * mu;
        assert!((sn - 1.0).abs() < 0.2, "n = {n}: s·nμ = {sn}");
        assert!(((1.0 - l_grid) - s).abs() < 1e-3 * s);
    }
}

#[test]
fn symmetric_range_matches_closed_form_parameterisation() {
    // For [e^-ε, e^ε] the feasible set ends at λ = 1/2. With C = 4 tanh(ε/2)/ε
    // and B = nμ, s = (C - sqrt(C² + B²) + B)/(CB) is the closed-form choice
    // λ = 1/2 - s, with guaranteed objective B/2 - ln B - 1 + ln(2C) - asinh(C/B).
    for eps in [0.5f64, 1.0, 2.0] {
        for (n, mu) in [(100usize, 0.05), (1000, 0.02), (10_000, 0.01)] {
            let (lo, hi) = ((-eps).exp(), eps.exp());
            assert!((max_feasible_lambda(lo, hi, eps) - 0.5).abs() < 1e-12);
            let c = calibrate(lo, hi, eps, n, mu).unwrap();
            let cc = 4.0 * (eps / 2.0).tanh() / eps;
            let b = n as f64 * mu;
            let s = (cc - (cc * cc + b * b).sqrt() + b) / (cc * b);
            let closed_obj = objective(0.5 - s, lo, hi, eps, n, &PowerModel::ConcavityBound { mu });
            let bound = b / 2.0 - b.ln() - 1.0 + (2.0 * cc).ln() - (cc / b).asinh();
            assert!(c.objective >= closed_obj - 1e-12, "eps {eps} n {n}");
            assert!(closed_obj >= bound - 1e-9, "eps {eps} n {n}: {closed_obj} < {bound}");
            // Both choices sit at the same distance from the edge up to O(1) factors.
            let ratio = (0.5 - c.lambda) / s;
            assert!(ratio > 0.5 && ratio < 2.0, "eps {eps} n {n}: ratio {ratio}");
        }
    }
}

#[test]
fn golden_section_matches_grid_for_exact_model() {
    let pair = bern_pair();
    let e = OptimalEVariable::new(pair.clone(), 1.0).unwrap();
    let (lo, hi) = e.range();
    let model = PowerModel::Exact { law: law_under(&e, pair.alt()).unwrap().unwrap() };
    for n in [10usize, 50, 500] {
        let c = calibrate_with(lo, hi, 1.0, n, &model).unwrap();
        let (_, best) = grid_argmax(lo, hi, 1.0, n, &model);
        assert!(c.objective >= best - 1e-9, "n = {n}");
        // Exact power dominates the concavity bound.
        let cb = calibrate(lo, hi, 1.0, n, model.mu()).unwrap();
        assert!(c.objective >= cb.objective - 1e-12);
    }
}

#[test]
fn exact_null_expectation_is_one() {
    let pair = bern_pair();
    for eps in [0.5, 1.0, 3.0] {
        let e = OptimalEVariable::new(pair.clone(), eps).unwrap();
        let (lo, hi) = e.range();
        for n in [1usize, 50, 400] {
            let c = calibrate(lo, hi, eps, n, e.construction().rate).unwrap();
            let m1: f64 = law_under(&e, pair.null())
                .unwrap()
                .unwrap()
                .iter()
                .map(|&(w, v)| w * (1.0 - c.lambda + c.lambda * v))
                .sum();
            let ln_mean = n as f64 * m1.ln() - (1.0 - c.b * c.b).ln() - c.compensator;
            assert!(ln_mean <= 1e-12, "eps {eps} n {n}: {ln_mean}");
        }
    }
}

#[test]
fn neighbouring_datasets_move_statistic_by_at_most_b_epsilon() {
    let pair = bern_pair();
    let eps = 1.0;
    let e = OptimalEVariable::new(pair, eps).unwrap();
    let priv_ = BatchPrivatizer::new(&e, eps, 50, &PowerModel::ConcavityBound { mu: e.construction().rate }).unwrap();
    let cal = *priv_.calibration();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let mut x: Vec<f64> = (0..50).map(|_| rng.random_range(0..2) as f64).collect();
        let v = |x: &[f64]| x.iter().map(|&x| e.value(x).unwrap()).collect::<Vec<_>>();
        let a = mixed_log_statistic(&v(&x), cal.lambda, e.range()).unwrap();
        let k = rng.random_range(0..50);
        x[k] = 1.0 - x[k];
        let b = mixed_log_statistic(&v(&x), cal.lambda, e.range()).unwrap();
        assert!((a - b).abs() <= cal.b * eps * (1.0 + 1e-12));
    }
}

#[test]
fn release_is_reproducible_and_zero_noise_is_exact() {
    let pair = bern_pair();
    let e = TslrEVariable::new(pair, 1.0).unwrap();
    let (lo, hi) = e.range();
    let cal = calibrate(lo, hi, 1.0, 20, 0.05).unwrap();
    let data: Vec<f64> = (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let a = release(&e, &cal, &data, 42, ReleaseOptions::default()).unwrap();
    let b = release(&e, &cal, &data, 42, ReleaseOptions::default()).unwrap();
    assert_eq!(a.log_evalue.to_bits(), b.log_evalue.to_bits());
    let c = release(&e, &cal, &data, 43, ReleaseOptions::default()).unwrap();
    assert_ne!(a.log_evalue, c.log_evalue);
    let z = release(&e, &cal, &data, 42, ReleaseOptions { noise: NoiseMode::Disabled, compensate: true }).unwrap();
    assert_eq!(z.log_evalue, z.statistic - cal.compensator);
    assert!(release(&e, &cal, &data[..19], 42, ReleaseOptions::default()).is_err());
}
