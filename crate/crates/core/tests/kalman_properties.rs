use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renewal_exponents::kalman::{self, covariance_chain, lipschitz_identity_check, transition_product};
use renewal_exponents::linalg::{self, max_abs, max_eigenvalue, min_eigenvalue, operator_norm, Matrix};
use renewal_exponents::model::{simulate_path, TransitionPlan};
use renewal_exponents::{CovarianceTrajectory, GaussMarkovModel, Hypothesis, Purpose, RenewalSpec, StreamFactory};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Uniform-ish covariance in `[0, Q(∞)]`: `L W Lᵀ` with `Q(∞) = LLᵀ`, `0 ⪯ W ⪯ I`.
fn covariance_below(qinf: &Matrix, rng: &mut ChaCha8Rng) -> Matrix {
    let q = qinf.nrows();
    let l = qinf.clone().cholesky().unwrap().l();
    let m = random_matrix(rng, q, q);
    let w = &m * m.transpose();
    let w = w.clone() / (max_eigenvalue(&w) * rng.random_range(1.0..2.0));
    linalg::symmetrize(&(&l * w * l.transpose()))
}

fn three_state_model() -> GaussMarkovModel {
    let a = Matrix::from_row_slice(3, 3, &[1.0, 0.4, 0.0, -0.6, 0.8, 0.2, 0.1, 0.0, 1.5]);
    let b = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 0.7, 0.0, 0.5]);
    let c = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
    GaussMarkovModel::validate(a, b, c).unwrap()
}

#[test]
fn covariance_updates_stay_in_invariant_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for model in [GaussMarkovModel::rlc(), three_state_model(), GaussMarkovModel::scalar_ou(0.3, 2.0).unwrap()] {
        let q = model.state_dim();
        let top = max_eigenvalue(model.qinf());
        for _ in 0..10_000 {
            let p = covariance_below(model.qinf(), &mut rng);
            let hold = -(-rng.random::<f64>()).ln_1p() * 2.0;
            let next = kalman::cov_update(&model, &p, hold).unwrap();
            let eig = linalg::symmetric_eigenvalues(&next);
            assert!(eig[0] >= -1e-10 && eig[q - 1] <= top + 1e-8, "{eig:?}");
            assert!(min_eigenvalue(&(model.qinf() - &next)) >= -1e-8);
            assert!(max_abs(&(&next - next.transpose())) <= 1e-12);
            let delta = model.c() * &p * model.c().transpose() + Matrix::identity(model.obs_dim(), model.obs_dim());
            assert!(min_eigenvalue(&delta) >= 1.0 - 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_inversion_lemma(seed in any::<u64>(), q in 1usize..5, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, q, q);
        let p = &m * m.transpose() + Matrix::identity(q, q) * 0.1;
        let c = random_matrix(&mut rng, d, q);
        let inner = (&c * &p * c.transpose() + Matrix::identity(d, d)).try_inverse().unwrap();
        let lhs = &p - &p * c.transpose() * inner * &c * &p;
        let rhs = (p.clone().try_inverse().unwrap() + c.transpose() * &c).try_inverse().unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) <= 1e-10 * (1.0 + max_abs(&p)));
    }

    #[test]
    fn difference_identity_holds(seed in any::<u64>()) {
        let model = GaussMarkovModel::rlc();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = covariance_below(model.qinf(), &mut rng);
        let q = covariance_below(model.qinf(), &mut rng);
        let hold: Vec<f64> = (0..50).map(|_| -(-rng.random::<f64>()).ln_1p()).collect();
        prop_assert!(lipschitz_identity_check(&model, &p, &q, &hold).unwrap() <= 1e-8);
    }
}

#[test]
fn extreme_starts_stay_ordered() {
    let model = three_state_model();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let hold: Vec<f64> = (0..50).map(|_| -(-rng.random::<f64>()).ln_1p()).collect();
    let top = model.qinf().clone();
    let zero = Matrix::zeros(3, 3);
    assert!(lipschitz_identity_check(&model, &top, &zero, &hold).unwrap() <= 1e-8);
    let upper = covariance_chain(&model, &top, &hold).unwrap();
    let lower = covariance_chain(&model, &zero, &hold).unwrap();
    for (u, l) in upper.iter().zip(&lower) {
        assert!(min_eigenvalue(&(u - l)) >= -1e-10);
    }
}

#[test]
fn transition_products_obey_deterministic_bound() {
    // ‖Θ_{n,0}‖² ≤ ‖Z̃_n‖ ‖Z̃_0⁻¹‖ Π_k (1 − λ_min(Q(I_k)) / ‖Z̃_k‖).
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for model in [GaussMarkovModel::rlc(), three_state_model()] {
        for _ in 0..20 {
            let q = model.state_dim();
            let p0 = covariance_below(model.qinf(), &mut rng) + model.gramian(0.5).unwrap();
            let hold: Vec<f64> = (0..60).map(|_| rng.random_range(0.2..3.0)).collect();
            let chain = covariance_chain(&model, &p0, &hold).unwrap();
            let prods = transition_product(&model, &p0, &hold).unwrap();
            let inv0 = operator_norm(&p0.clone().try_inverse().unwrap());
            let mut factor = 1.0;
            for n in 1..=hold.len() {
                let qk = model.gramian(hold[n - 1]).unwrap();
                factor *= 1.0 - min_eigenvalue(&qk) / operator_norm(&chain[n]);
                let bound = operator_norm(&chain[n]) * inv0 * factor;
                let lhs = operator_norm(&prods[n]).powi(2);
                assert!(lhs <= bound * (1.0 + 1e-9), "q={q} n={n}: {lhs} > {bound}");
            }
        }
    }
}

#[test]
fn transition_products_decay_geometrically() {
    let model = GaussMarkovModel::rlc();
    let f = StreamFactory::new(77);
    let hold = RenewalSpec::poisson(1.0).unwrap().draw_holding_times(200, &mut f.stream(Purpose::HoldingTimes, 0)).unwrap();
    let prods = transition_product(&model, model.qinf(), &hold).unwrap();
    let pts: Vec<(f64, f64)> = (1..=200).map(|n| (n as f64, operator_norm(&prods[n]).ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 200.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 200.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(slope < 0.0, "slope {slope}");
}

#[test]
fn innovations_are_white_under_signal() {
    let model = GaussMarkovModel::rlc();
    let f = StreamFactory::new(31);
    let n = 100_000;
    let hold = RenewalSpec::poisson(1.0).unwrap().draw_holding_times(n, &mut f.stream(Purpose::HoldingTimes, 0)).unwrap();
    let path = simulate_path(&model, &hold, Hypothesis::SignalPlusNoise, &mut f.stream(Purpose::States, 0)).unwrap();
    let traj = CovarianceTrajectory::new(&model, &TransitionPlan::new(&model, &hold).unwrap());
    let z = traj.whitened_innovations(&path.observations);
    // 20 equiprobable bins of N(0, 1).
    let bins = 20;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for v in z.iter().flat_map(|v| v.iter().copied()) {
        let k = ((normal.cdf(v) * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
        total += 1;
    }
    let expected = total as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat}, p = {p_value}");
}

#[test]
fn trajectory_and_reference_filters_agree() {
    let model = three_state_model();
    let f = StreamFactory::new(4);
    let tau = RenewalSpec::bernoulli(0.5, 0.3).unwrap();
    for hyp in [Hypothesis::Noise, Hypothesis::SignalPlusNoise] {
        let hold = tau.draw_holding_times(500, &mut f.stream(Purpose::HoldingTimes, 1)).unwrap();
        let path = simulate_path(&model, &hold, hyp, &mut f.stream(Purpose::States, 1)).unwrap();
        let slow = kalman::llr(&model, &path).unwrap().total;
        let fast = CovarianceTrajectory::new(&model, &TransitionPlan::new(&model, &hold).unwrap()).llr(&path.observations);
        assert!((slow - fast).abs() < 1e-12);
    }
}
