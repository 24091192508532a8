//! The Kalman filter viewed as a random iterated function system.
//!
//! The filter state is the pair `(x̂_n, P_n)` of one-step prediction mean and
//! covariance. One step consumes an observation `Y_n` and the next holding
//! time `I_{n+1}`:
//!
//! ```text
//! Δ_n     = C P_n Cᵀ + I_d
//! G(P)    = P Cᵀ Δ⁻¹
//! Θ(I, P) = e^{−IA} (I_q − G(P) C)
//! x̂_{n+1} = Θ x̂_n + e^{−IA} G(P_n) Y_n
//! P_{n+1} = e^{−IA} (I_q − G(P_n) C) P_n e^{−IAᵀ} + Q(I)
//! ```
//!
//! The covariance recursion does not involve `Y`, so `(P_n)` is a Markov chain
//! of its own driven by the holding times alone. It stays in `[0, Q(∞)]`.
//!
//! Besides the recursions this module carries the exact identities used as
//! test oracles: transition products `Θ_{n,0}` and the difference identity
//! `Z̃ₙᵖ − Z̃ₙ^q = Θ_{n,0}ᵖ (p − q) (Θ_{n,0}^q)ᵀ` between two covariance chains
//! sharing their holding times.

use std::io::{self, Write};

use nalgebra::{Cholesky, Dyn};
use thiserror::Error;

use crate::linalg::{self, max_abs, Matrix, Vector};
use crate::model::{GaussMarkovModel, ModelError, SampledPath, Transition, TransitionPlan};
use crate::stats::CompensatedSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty observation sequence")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Prediction mean `x̂_n` and error covariance `P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub xhat: Vector,
    pub p: Matrix,
}

impl KalmanState {
    /// `(x̂_1, P_1) = (0, Q(∞))`, the prior of a stationary first sample.
    pub fn initial(model: &GaussMarkovModel) -> Self {
        Self { xhat: Vector::zeros(model.state_dim()), p: model.qinf().clone() }
    }
}

/// Innovation covariance `Δ = CPCᵀ + I` with its Cholesky factor and the gain.
#[derive(Debug, Clone)]
pub struct Innovation {
    pub delta: Matrix,
    pub gain: Matrix,
    pub logdet: f64,
    chol: Cholesky<f64, Dyn>,
}

impl Innovation {
    pub fn new(model: &GaussMarkovModel, p: &Matrix) -> Self {
        let c = model.c();
        let d = model.obs_dim();
        let cp = c * p;
        let delta = linalg::symmetrize(&(&cp * c.transpose())) + Matrix::identity(d, d);
        let chol = delta.clone().cholesky().expect("CPCᵀ + I is positive definite");
        let logdet = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        // G = P Cᵀ Δ⁻¹ = (Δ⁻¹ C P)ᵀ by symmetry of P and Δ.
        let gain = chol.solve(&cp).transpose();
        Self { delta, gain, logdet, chol }
    }

    /// `eᵀ Δ⁻¹ e`.
    pub fn quad(&self, e: &Vector) -> f64 {
        let z = self.whiten(e);
        z.dot(&z)
    }

    /// `L⁻¹ e` with `Δ = L Lᵀ`; standard normal when `e` is a true innovation.
    pub fn whiten(&self, e: &Vector) -> Vector {
        self.chol
            .l_dirty()
            .solve_lower_triangular(e)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `tr(Δ⁻¹ M)`.
    pub fn trace_solve(&self, m: &Matrix) -> f64 {
        self.chol.solve(m).trace()
    }
}

/// `G(P) = P Cᵀ (I + C P Cᵀ)⁻¹`.
pub fn gain(model: &GaussMarkovModel, p: &Matrix) -> Matrix {
    Innovation::new(model, p).gain
}

/// `Θ(I, P) = e^{−IA} (I − G(P) C)`.
pub fn kalman_transition(model: &GaussMarkovModel, tr: &Transition, gain: &Matrix) -> Matrix {
    let q = model.state_dim();
    &tr.phi * (Matrix::identity(q, q) - gain * model.c())
}

/// `F̃_I(P)` for a precomputed transition.
pub fn cov_update_with(model: &GaussMarkovModel, p: &Matrix, tr: &Transition, innov: &Innovation) -> Matrix {
    let filtered = p - &innov.gain * (model.c() * p);
    linalg::project_psd(&(&tr.phi * filtered * tr.phi.transpose() + &tr.q))
}

/// `F̃_I(P) = e^{−IA}(I − G(P)C) P e^{−IAᵀ} + Q(I)`.
pub fn cov_update(model: &GaussMarkovModel, p: &Matrix, holding: f64) -> Result<Matrix, KalmanError> {
    check_square(model, p)?;
    let tr = model.transition(holding)?;
    Ok(cov_update_with(model, p, &tr, &Innovation::new(model, p)))
}

/// The three data-dependent terms of one summand of the log-likelihood ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikTerms {
    pub logdet_delta: f64,
    pub innovation_quad: f64,
    pub y_sq: f64,
}

impl LoglikTerms {
    /// `½ (log det Δ + eᵀΔ⁻¹e − YᵀY)`.
    pub fn summand(&self) -> f64 {
        0.5 * (self.logdet_delta + self.innovation_quad - self.y_sq)
    }
}

#[derive(Debug, Clone)]
pub struct FilterStep {
    /// State after the update, i.e. `(x̂_{n+1}, P_{n+1})`.
    pub state: KalmanState,
    pub gain: Matrix,
    pub theta: Matrix,
    /// `Δ_n`, computed from the pre-update covariance.
    pub delta: Matrix,
    pub innovation: Vector,
    pub loglik: LoglikTerms,
}

/// One full filter step `F_η(x̂, P)` with `η = (I, Y)`.
pub fn full_update(
    model: &GaussMarkovModel,
    state: &KalmanState,
    holding: f64,
    y: &Vector,
) -> Result<FilterStep, KalmanError> {
    let tr = model.transition(holding)?;
    full_update_with(model, state, &tr, y)
}

pub fn full_update_with(
    model: &GaussMarkovModel,
    state: &KalmanState,
    tr: &Transition,
    y: &Vector,
) -> Result<FilterStep, KalmanError> {
    check_square(model, &state.p)?;
    if state.xhat.len() != model.state_dim() {
        return Err(KalmanError::Dimension(format!(
            "state mean has length {}, expected {}",
            state.xhat.len(),
            model.state_dim()
        )));
    }
    if y.len() != model.obs_dim() {
        return Err(KalmanError::Dimension(format!(
            "observation has length {}, expected {}",
            y.len(),
            model.obs_dim()
        )));
    }
    let innov = Innovation::new(model, &state.p);
    let innovation = y - model.c() * &state.xhat;
    let loglik = LoglikTerms {
        logdet_delta: innov.logdet,
        innovation_quad: innov.quad(&innovation),
        y_sq: y.dot(y),
    };
    let xhat = &tr.phi * (&state.xhat + &innov.gain * &innovation);
    let p = cov_update_with(model, &state.p, tr, &innov);
    let theta = kalman_transition(model, tr, &innov.gain);
    Ok(FilterStep {
        state: KalmanState { xhat, p },
        gain: innov.gain,
        theta,
        delta: innov.delta,
        innovation,
        loglik,
    })
}

fn check_square(model: &GaussMarkovModel, p: &Matrix) -> Result<(), KalmanError> {
    let q = model.state_dim();
    if p.shape() != (q, q) {
        return Err(KalmanError::Dimension(format!(
            "covariance is {}x{}, expected {q}x{q}",
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(())
}

/// Normalized LLR `L_N = (1/N) log f₀/f₁` with its per-step summands.
#[derive(Debug, Clone)]
pub struct LlrTrace {
    pub total: f64,
    pub per_step: Vec<f64>,
    pub terms: Vec<LoglikTerms>,
}

/// `L_N` for a sampled path, running the filter from `(0, Q(∞))`.
///
/// Observation `n` is predicted from the previous ones; the holding time
/// `I_{n+1}` then carries the filter to the next sample. `I_1` only positions
/// the first sample and does not enter the likelihood.
pub fn llr(model: &GaussMarkovModel, path: &SampledPath) -> Result<LlrTrace, KalmanError> {
    let n = path.observations.len();
    if n == 0 {
        return Err(KalmanError::Empty);
    }
    if path.holding_times.len() != n {
        return Err(KalmanError::Dimension("holding times and observations differ in length".into()));
    }
    let mut state = KalmanState::initial(model);
    let mut terms = Vec::with_capacity(n);
    let mut cache = TransitionCache::default();
    for (k, y) in path.observations.iter().enumerate() {
        let next = path.holding_times.get(k + 1).copied().unwrap_or(0.0);
        let step = full_update_with(model, &state, cache.get(model, next)?, y)?;
        terms.push(step.loglik);
        state = step.state;
    }
    let per_step: Vec<f64> = terms.iter().map(LoglikTerms::summand).collect();
    let total = per_step.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    Ok(LlrTrace { total, per_step, terms })
}

/// Writes `n, I_n, logdet_delta, innovation_quad, y_sq`.
pub fn write_trace_csv<W: Write>(mut out: W, holding_times: &[f64], trace: &LlrTrace) -> io::Result<()> {
    writeln!(out, "n,I_n,logdet_delta,innovation_quad,y_sq")?;
    for (k, t) in trace.terms.iter().enumerate() {
        let hold = holding_times.get(k).copied().unwrap_or(f64::NAN);
        writeln!(out, "{},{},{},{},{}", k + 1, hold, t.logdet_delta, t.innovation_quad, t.y_sq)?;
    }
    Ok(())
}

/// Remembers the last transition so that runs of equal holding times
/// (regular sampling) compute `e^{−IA}` and `Q(I)` once.
#[derive(Debug, Default, Clone)]
pub struct TransitionCache {
    last: Option<(f64, Transition)>,
}

impl TransitionCache {
    pub fn get(&mut self, model: &GaussMarkovModel, holding: f64) -> Result<&Transition, ModelError> {
        let hit = matches!(&self.last, Some((h, _)) if *h == holding);
        if !hit {
            self.last = Some((holding, model.transition(holding)?));
        }
        Ok(&self.last.as_ref().expect("cache filled above").1)
    }
}

struct TrajectoryStep {
    innov: Innovation,
    /// Transition to the next sample; `None` after the last one.
    phi: Option<Matrix>,
}

/// The covariance side of the filter precomputed along a holding-time sequence.
///
/// Because `(P_n)` ignores the observations, every path sharing the holding
/// times can reuse the gains; only the mean recursion runs per path.
pub struct CovarianceTrajectory {
    steps: Vec<TrajectoryStep>,
    c: Matrix,
}

impl CovarianceTrajectory {
    pub fn new(model: &GaussMarkovModel, plan: &TransitionPlan) -> Self {
        let n = plan.len();
        let mut steps = Vec::with_capacity(n);
        let mut p = model.qinf().clone();
        for k in 0..n {
            let innov = Innovation::new(model, &p);
            let phi = if k + 1 < n {
                let tr = plan.transition(k + 1);
                p = cov_update_with(model, &p, tr, &innov);
                Some(tr.phi.clone())
            } else {
                None
            };
            steps.push(TrajectoryStep { innov, phi });
        }
        Self { steps, c: model.c().clone() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `log det Δ_n` along the trajectory.
    pub fn logdets(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.innov.logdet)
    }

    /// Normalized LLR `L_N` of `observations` (at most `len()` of them).
    pub fn llr(&self, observations: &[Vector]) -> f64 {
        let mut acc = CompensatedSum::new();
        self.run(observations, |terms, _| acc.add(terms.summand()));
        acc.value() / observations.len() as f64
    }

    /// Innovations `L⁻¹(Y_n − Ŷ_n)` whitened by the Cholesky factor of `Δ_n`.
    pub fn whitened_innovations(&self, observations: &[Vector]) -> Vec<Vector> {
        let mut out = Vec::with_capacity(observations.len());
        self.run(observations, |_, z| out.push(z.clone()));
        out
    }

    fn run<F: FnMut(LoglikTerms, &Vector)>(&self, observations: &[Vector], mut visit: F) {
        assert!(observations.len() <= self.steps.len(), "trajectory shorter than observation sequence");
        let mut xhat = Vector::zeros(self.c.ncols());
        for (step, y) in self.steps.iter().zip(observations) {
            let e = y - &self.c * &xhat;
            let z = step.innov.whiten(&e);
            visit(
                LoglikTerms { logdet_delta: step.innov.logdet, innovation_quad: z.dot(&z), y_sq: y.dot(y) },
                &z,
            );
            if let Some(phi) = &step.phi {
                xhat = phi * (xhat + &step.innov.gain * e);
            }
        }
    }
}

/// Covariance chain `Z̃_0 = p0, Z̃_k = F̃_{I_k}(Z̃_{k−1})` for `k = 1..N`.
pub fn covariance_chain(
    model: &GaussMarkovModel,
    p0: &Matrix,
    holding_times: &[f64],
) -> Result<Vec<Matrix>, KalmanError> {
    check_square(model, p0)?;
    let mut chain = Vec::with_capacity(holding_times.len() + 1);
    chain.push(p0.clone());
    for &h in holding_times {
        let next = cov_update(model, chain.last().expect("non-empty"), h)?;
        chain.push(next);
    }
    Ok(chain)
}

/// `Θ_{n,0} = Θ_n ⋯ Θ_1` for `n = 0..N`, where `Θ_k = e^{−I_k A}(I − G(Z̃_{k−1})C)`
/// along the covariance chain started at `p0`. Entry 0 is the identity.
pub fn transition_product(
    model: &GaussMarkovModel,
    p0: &Matrix,
    holding_times: &[f64],
) -> Result<Vec<Matrix>, KalmanError> {
    check_square(model, p0)?;
    let q = model.state_dim();
    let mut products = Vec::with_capacity(holding_times.len() + 1);
    products.push(Matrix::identity(q, q));
    let mut p = p0.clone();
    for &h in holding_times {
        let tr = model.transition(h)?;
        let innov = Innovation::new(model, &p);
        let theta = kalman_transition(model, &tr, &innov.gain);
        let next = &theta * products.last().expect("non-empty");
        products.push(next);
        p = cov_update_with(model, &p, &tr, &innov);
    }
    Ok(products)
}

/// Largest max-norm residual of `Z̃ₙᵖ − Z̃ₙ^q − Θ_{n,0}ᵖ (p − q) (Θ_{n,0}^q)ᵀ`
/// over `n = 1..N`, for two chains sharing `holding_times`.
pub fn lipschitz_identity_check(
    model: &GaussMarkovModel,
    p: &Matrix,
    q_mat: &Matrix,
    holding_times: &[f64],
) -> Result<f64, KalmanError> {
    let zp = covariance_chain(model, p, holding_times)?;
    let zq = covariance_chain(model, q_mat, holding_times)?;
    let tp = transition_product(model, p, holding_times)?;
    let tq = transition_product(model, q_mat, holding_times)?;
    let diff0 = p - q_mat;
    let mut worst = 0.0_f64;
    for n in 1..=holding_times.len() {
        let predicted = &tp[n] * &diff0 * tq[n].transpose();
        worst = worst.max(max_abs(&(&zp[n] - &zq[n] - predicted)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_path, Hypothesis};
    use crate::rng::{Purpose, StreamFactory};

    fn scalar() -> GaussMarkovModel {
        GaussMarkovModel::scalar_ou(1.0, 1.0).unwrap()
    }

    #[test]
    fn gain_at_zero_and_scalar_half() {
        let m = GaussMarkovModel::rlc();
        assert_eq!(gain(&m, &Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
        let g = gain(&scalar(), &Matrix::from_element(1, 1, 1.0));
        assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gain_defining_identity() {
        let m = GaussMarkovModel::rlc();
        let p = m.qinf() * 0.7;
        let g = gain(&m, &p);
        let lhs = &g * (m.c() * &p * m.c().transpose() + Matrix::identity(2, 2));
        assert!(max_abs(&(lhs - &p * m.c().transpose())) < 1e-12);
    }

    #[test]
    fn cov_update_edge_cases() {
        let m = GaussMarkovModel::rlc();
        let zero = Matrix::zeros(2, 2);
        let q = m.transition(0.8).unwrap().q;
        assert!(max_abs(&(cov_update(&m, &zero, 0.8).unwrap() - q)) < 1e-15);
        let p = m.qinf() * 0.5;
        let g = gain(&m, &p);
        let measured = &p - &g * m.c() * &p;
        assert!(max_abs(&(cov_update(&m, &p, 0.0).unwrap() - measured)) < 1e-14);
    }

    #[test]
    fn cov_update_rejects_bad_dimensions() {
        let m = GaussMarkovModel::rlc();
        assert!(matches!(cov_update(&m, &Matrix::zeros(3, 3), 1.0), Err(KalmanError::Dimension(_))));
        assert!(matches!(cov_update(&m, &Matrix::zeros(2, 2), -1.0), Err(KalmanError::Model(_))));
    }

    #[test]
    fn zero_input_keeps_zero_mean() {
        let m = GaussMarkovModel::rlc();
        let state = KalmanState::initial(&m);
        let step = full_update(&m, &state, 0.7, &Vector::zeros(2)).unwrap();
        assert_eq!(step.state.xhat, Vector::zeros(2));
    }

    #[test]
    fn full_update_against_direct_transcription() {
        let m = GaussMarkovModel::rlc();
        let state = KalmanState { xhat: Vector::from_vec(vec![0.3, -0.2]), p: m.qinf().clone() };
        let y = Vector::from_vec(vec![1.1, -0.4]);
        let step = full_update(&m, &state, 0.9, &y).unwrap();
        // Right-hand side written out with an explicit inverse.
        let c = m.c();
        let p = &state.p;
        let e = linalg::expm(m.a(), -0.9).unwrap();
        let s_inv = (c * p * c.transpose() + Matrix::identity(2, 2)).try_inverse().unwrap();
        let k = p * c.transpose() * &s_inv;
        let ident = Matrix::identity(2, 2);
        let x_next = &e * (&ident - &k * c) * &state.xhat + &e * &k * &y;
        let q = linalg::gramian_q(m.a(), m.b(), 0.9).unwrap();
        let p_next = &e * (&ident - &k * c) * p * e.transpose() + q;
        assert!((step.state.xhat - x_next).amax() < 1e-12);
        assert!(max_abs(&(step.state.p - p_next)) < 1e-12);
        assert!(linalg::min_eigenvalue(&step.delta) >= 1.0 - 1e-10);
    }

    #[test]
    fn theta_form_of_covariance_update() {
        // P_k = Θ_k P_{k−1} Θ_kᵀ + e^{−IA} G Gᵀ e^{−IAᵀ} + Q(I).
        let m = GaussMarkovModel::rlc();
        let p = m.qinf() * 0.6 + Matrix::identity(2, 2) * 0.01;
        for &h in &[0.1, 1.0, 3.0] {
            let tr = m.transition(h).unwrap();
            let g = gain(&m, &p);
            let theta = kalman_transition(&m, &tr, &g);
            let qbar = &tr.phi * &g * g.transpose() * tr.phi.transpose() + &tr.q;
            let via_theta = &theta * &p * theta.transpose() + qbar;
            assert!(max_abs(&(via_theta - cov_update(&m, &p, h).unwrap())) < 1e-10);
        }
    }

    #[test]
    fn single_sample_llr_with_zero_observation() {
        let m = GaussMarkovModel::scalar_ou(0.5, 1.0).unwrap();
        let path = SampledPath {
            holding_times: vec![1.0],
            states: vec![Vector::zeros(1)],
            observations: vec![Vector::zeros(1)],
            hypothesis: Hypothesis::Noise,
        };
        let trace = llr(&m, &path).unwrap();
        assert!((trace.total - 0.5 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_observations_give_positive_llr() {
        let m = GaussMarkovModel::rlc();
        let n = 20;
        let path = SampledPath {
            holding_times: vec![0.5; n],
            states: vec![Vector::zeros(2); n],
            observations: vec![Vector::zeros(2); n],
            hypothesis: Hypothesis::Noise,
        };
        let trace = llr(&m, &path).unwrap();
        let logdets: f64 = trace.terms.iter().map(|t| t.logdet_delta).sum();
        assert!((trace.total - logdets / (2.0 * n as f64)).abs() < 1e-14);
        assert!(trace.total > 0.0);
    }

    #[test]
    fn llr_matches_joint_gaussian_density() {
        // Brute force: Y ~ N(0, R) with R_ij = e^{−a|T_i−T_j|} Q(∞) + δ_ij.
        let (a, qinf) = (0.7, 1.3);
        let m = GaussMarkovModel::scalar_ou(a, qinf).unwrap();
        let holding = vec![0.4, 1.1, 0.25];
        let ys = [0.9, -1.4, 0.3];
        let path = SampledPath {
            holding_times: holding.clone(),
            states: vec![Vector::zeros(1); 3],
            observations: ys.iter().map(|&v| Vector::from_element(1, v)).collect(),
            hypothesis: Hypothesis::Noise,
        };
        let times: Vec<f64> = holding
            .iter()
            .scan(0.0, |t, h| {
                *t += h;
                Some(*t)
            })
            .collect();
        let r = Matrix::from_fn(3, 3, |i, j| {
            (-a * (times[i] - times[j]).abs()).exp() * qinf + if i == j { 1.0 } else { 0.0 }
        });
        let y = Vector::from_row_slice(&ys);
        let quad_r = (y.transpose() * r.clone().try_inverse().unwrap() * &y)[(0, 0)];
        let oracle = 0.5 * (r.determinant().ln() + quad_r - y.dot(&y)) / 3.0;
        let trace = llr(&m, &path).unwrap();
        assert!((trace.total - oracle).abs() < 1e-12, "{} vs {}", trace.total, oracle);
    }

    #[test]
    fn trajectory_route_matches_full_updates() {
        let m = GaussMarkovModel::rlc();
        let f = StreamFactory::new(3);
        let hold = crate::sampling::RenewalSpec::poisson(1.0)
            .unwrap()
            .draw_holding_times(200, &mut f.stream(Purpose::HoldingTimes, 0))
            .unwrap();
        let path = simulate_path(&m, &hold, Hypothesis::SignalPlusNoise, &mut f.stream(Purpose::States, 0)).unwrap();
        let slow = llr(&m, &path).unwrap().total;
        let traj = CovarianceTrajectory::new(&m, &TransitionPlan::new(&m, &hold).unwrap());
        let fast = traj.llr(&path.observations);
        assert!((slow - fast).abs() < 1e-12);
    }

    #[test]
    fn transition_product_conventions() {
        let m = GaussMarkovModel::rlc();
        let p0 = m.qinf() * 0.4;
        let prods = transition_product(&m, &p0, &[0.7, 1.3]).unwrap();
        assert_eq!(prods[0], Matrix::identity(2, 2));
        let tr = m.transition(0.7).unwrap();
        let theta1 = kalman_transition(&m, &tr, &gain(&m, &p0));
        assert!(max_abs(&(&prods[1] - theta1)) < 1e-15);
    }

    #[test]
    fn lipschitz_identity_same_start_is_zero() {
        let m = GaussMarkovModel::rlc();
        let p = m.qinf() * 0.3;
        assert_eq!(lipschitz_identity_check(&m, &p, &p, &[1.0, 0.2, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn trace_csv_layout() {
        let m = scalar();
        let path = SampledPath {
            holding_times: vec![1.0, 2.0],
            states: vec![Vector::zeros(1); 2],
            observations: vec![Vector::from_element(1, 0.5), Vector::from_element(1, -1.0)],
            hypothesis: Hypothesis::Noise,
        };
        let trace = llr(&m, &path).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &path.holding_times, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,I_n,logdet_delta,innovation_quad,y_sq");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2,2,"));
        assert!(lines[2].ends_with(",1"));
    }
}
