use renewal_exponents::linalg::Matrix;
use renewal_exponents::model::{simulate_path, TransitionPlan};
use renewal_exponents::{GaussMarkovModel, Hypothesis, Purpose, StreamFactory};

#[test]
fn every_sample_is_stationary() {
    // Sample covariance of X_n over independent paths against Q(∞); the
    // standard error of entry (i, j) is √((Σ_ii Σ_jj + Σ_ij²) / M).
    let model = GaussMarkovModel::rlc();
    let holding = [0.3, 2.0, 0.0, 1.5, 7.0];
    let reps = 100_000;
    let plan = TransitionPlan::new(&model, &holding).unwrap();
    let f = StreamFactory::new(2024);
    let mut sums = vec![Matrix::zeros(2, 2); holding.len()];
    for r in 0..reps {
        let path = renewal_exponents::model::simulate_planned(
            &model,
            &plan,
            Hypothesis::SignalPlusNoise,
            &mut f.stream(Purpose::States, r),
        );
        for (acc, x) in sums.iter_mut().zip(&path.states) {
            *acc += x * x.transpose();
        }
    }
    let q = model.qinf();
    for (n, acc) in sums.iter().enumerate() {
        let cov = acc / reps as f64;
        for i in 0..2 {
            for j in 0..2 {
                let se = ((q[(i, i)] * q[(j, j)] + q[(i, j)].powi(2)) / reps as f64).sqrt();
                assert!((cov[(i, j)] - q[(i, j)]).abs() < 4.0 * se, "sample {n}, entry ({i},{j}): {} vs {}", cov[(i, j)], q[(i, j)]);
            }
        }
    }
}

#[test]
fn paths_reproduce_bit_for_bit() {
    let model = GaussMarkovModel::scalar_ou(0.4, 2.0).unwrap();
    let holding = vec![0.5, 1.0, 0.25, 3.0];
    let f = StreamFactory::new(1);
    let a = simulate_path(&model, &holding, Hypothesis::SignalPlusNoise, &mut f.stream(Purpose::States, 7)).unwrap();
    let b = simulate_path(&model, &holding, Hypothesis::SignalPlusNoise, &mut f.stream(Purpose::States, 7)).unwrap();
    let bits = |p: &renewal_exponents::model::SampledPath| -> Vec<u64> {
        p.observations.iter().chain(&p.states).flat_map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn snr_definition() {
    let m = GaussMarkovModel::rlc();
    let expected = (m.c() * m.qinf() * m.c().transpose()).trace() / 2.0;
    assert!((m.snr() - expected).abs() < 1e-14);
    for snr in [0.5, 1.0, 10f64.powf(0.3)] {
        assert!((GaussMarkovModel::scalar_ou(0.8, snr).unwrap().snr() - snr).abs() < 1e-12);
        assert!((m.with_snr(snr).unwrap().snr() - snr).abs() < 1e-12);
    }
}
