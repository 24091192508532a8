use renewal_exponents::exponents::{
    mc_exponent_h0_noise, mc_exponent_h0_signal, monotonicity_scan, regular_exponents_with_period, snr_scan,
};
use renewal_exponents::{GaussMarkovModel, McConfig, RenewalSpec};

#[test]
fn regular_chain_matches_closed_form_at_other_periods() {
    let model = GaussMarkovModel::rlc();
    let cfg = McConfig::new(200_000, 6);
    for period in [0.5, 2.0] {
        let tau = RenewalSpec::regular(period).unwrap();
        let closed = regular_exponents_with_period(&model, period).unwrap();
        let rescaled = regular_exponents_with_period(&model.time_rescaled(period).unwrap(), 1.0).unwrap();
        assert!((closed.noise - rescaled.noise).abs() < 1e-10);
        let noise = mc_exponent_h0_noise(&model, &tau, &cfg).unwrap();
        let signal = mc_exponent_h0_signal(&model, &tau, &cfg).unwrap();
        assert!((noise.value - closed.noise).abs() <= 3.0 * noise.stderr, "{noise:?} vs {}", closed.noise);
        assert!((signal.value - closed.signal).abs() <= 3.0 * signal.stderr, "{signal:?} vs {}", closed.signal);
    }
}

#[test]
fn exponents_are_positive() {
    let cfg = McConfig::new(100_000, 2);
    let models = [GaussMarkovModel::rlc(), GaussMarkovModel::scalar_ou(0.5, 0.5).unwrap()];
    let laws = [RenewalSpec::poisson(1.0).unwrap(), RenewalSpec::bernoulli(0.5, 0.4).unwrap()];
    for m in &models {
        for tau in &laws {
            for e in [mc_exponent_h0_noise(m, tau, &cfg).unwrap(), mc_exponent_h0_signal(m, tau, &cfg).unwrap()] {
                assert!(e.value > 5.0 * e.stderr, "{e:?}");
            }
        }
    }
}

#[test]
fn different_seeds_agree_within_error() {
    let m = GaussMarkovModel::rlc();
    let tau = RenewalSpec::poisson(1.0).unwrap();
    let a = mc_exponent_h0_noise(&m, &tau, &McConfig::new(100_000, 1)).unwrap();
    let b = mc_exponent_h0_noise(&m, &tau, &McConfig::new(100_000, 2)).unwrap();
    assert_ne!(a.value, b.value);
    assert!((a.value - b.value).abs() <= 6.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
}

#[test]
fn replicates_pool_to_smaller_error() {
    let m = GaussMarkovModel::scalar_ou(1.0, 1.0).unwrap();
    let tau = RenewalSpec::poisson(1.0).unwrap();
    let one = mc_exponent_h0_noise(&m, &tau, &McConfig::new(50_000, 3)).unwrap();
    let four = mc_exponent_h0_noise(&m, &tau, &McConfig::new(50_000, 3).with_replicates(4)).unwrap();
    assert!(four.stderr < one.stderr);
}

#[test]
fn signal_exponent_decreases_in_a_and_increases_in_snr() {
    let tau = RenewalSpec::poisson(1.0).unwrap();
    let cfg = McConfig::new(100_000, 9);
    let scan = monotonicity_scan(1.0, &[0.1, 0.5, 1.0, 2.0, 4.0], &tau, &cfg).unwrap();
    for w in scan.windows(2) {
        assert!(w[1].value <= w[0].value + 3.0 * (w[0].stderr + w[1].stderr), "{w:?}");
    }
    let scan = snr_scan(1.0, &[0.5, 1.0, 2.0], &tau, &cfg).unwrap();
    for w in scan.windows(2) {
        assert!(w[1].value >= w[0].value - 3.0 * (w[0].stderr + w[1].stderr), "{w:?}");
    }
}

#[test]
fn signal_exponent_approaches_half_snr_for_slow_processes() {
    // The a → 0 limit is approached like √a; a = 1e−4 is close enough for 0.01.
    let tau = RenewalSpec::poisson(1.0).unwrap();
    let cfg = McConfig::new(200_000, 5);
    let scan = monotonicity_scan(1.0, &[1e-4, 1e-3, 1e-2], &tau, &cfg).unwrap();
    assert!((scan[0].value - 0.5).abs() < 0.01, "{:?}", scan[0]);
    assert!(scan[0].value > scan[1].value && scan[1].value > scan[2].value);
}
