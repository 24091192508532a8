//! Type II error exponents of the two test orientations.
//!
//! Both exponents are integrals against the invariant law of the Kalman chain
//! and are estimated by ergodic averages along one long simulated chain:
//!
//! * noise-null test: the chain `(x̂_n, P_n)` driven by `Y ~ N(0, I_d)` and
//!   `I ~ τ`, averaging `½{log det Δ + tr[C(x̂x̂ᵀ − P)Cᵀ Δ⁻¹]}`;
//! * signal-null test: the covariance chain alone, giving
//!   `½{tr(C Q(∞) Cᵀ) − E log det(C P Cᵀ + I)}`.
//!
//! Regular sampling, the scalar model and very long holding times have closed
//! forms that serve as cross-checks.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::kalman::{cov_update_with, Innovation, KalmanState, TransitionCache};
use crate::linalg::{self, LinalgError, Matrix, DARE_DEFAULT_MAX_ITER, DARE_DEFAULT_TOL};
use crate::model::{standard_normal, GaussMarkovModel, ModelError};
use crate::rng::{Purpose, SimRng, StreamFactory};
use crate::sampling::{RenewalSpec, SamplingError};
use crate::stats::{BatchMeans, MeanEstimate, DEFAULT_BATCHES};

/// Relative accuracy attributed to a Monte Carlo estimate whose batch means
/// agree to rounding, which happens when the covariance chain is deterministic.
pub const STDERR_FLOOR: f64 = 1e-10;

pub const DEFAULT_CHAIN_LENGTH: usize = 1_000_000;
const MIN_BURN_IN: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarloNoise,
    MonteCarloSignal,
    RegularClosedForm,
    ScalarClosedForm,
    LargeSLimit,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MonteCarloNoise => "mc_h0_noise",
            Method::MonteCarloSignal => "mc_h0_signal",
            Method::RegularClosedForm => "regular_closed_form",
            Method::ScalarClosedForm => "scalar_closed_form",
            Method::LargeSLimit => "large_s_limit",
        })
    }
}

/// An exponent in nats per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub chain_length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub method: Method,
}

impl ExponentEstimate {
    pub fn closed_form(value: f64, method: Method) -> Self {
        Self { value, stderr: 0.0, chain_length: 0, burn_in: 0, seed: 0, method }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Steps per replicate chain, burn-in included.
    pub chain_length: usize,
    /// Defaults to `max(1000, chain_length / 100)`.
    pub burn_in: Option<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub batches: usize,
}

impl McConfig {
    pub fn new(chain_length: usize, seed: u64) -> Self {
        Self { chain_length, burn_in: None, replicates: 1, seed, batches: DEFAULT_BATCHES }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| MIN_BURN_IN.max(self.chain_length / 100))
    }

    pub fn validate(&self) -> Result<(), ExponentError> {
        let burn = self.burn_in();
        if self.chain_length <= burn {
            return Err(ExponentError::Config(format!(
                "chain length {} must exceed burn-in {burn}",
                self.chain_length
            )));
        }
        if self.replicates == 0 {
            return Err(ExponentError::Config("at least one replicate is required".into()));
        }
        if self.batches < 2 {
            return Err(ExponentError::Config("at least two batches are required".into()));
        }
        Ok(())
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self::new(DEFAULT_CHAIN_LENGTH, 0)
    }
}

/// Random inputs of one chain. Holding times and observations never share a
/// stream, so the covariance chain is the same whatever the observation seed.
pub struct ChainStreams {
    pub holding: SimRng,
    pub observations: SimRng,
}

impl ChainStreams {
    pub fn replicate(factory: &StreamFactory, index: u64) -> Self {
        Self {
            holding: factory.stream(Purpose::HoldingTimes, index),
            observations: factory.stream(Purpose::Observations, index),
        }
    }
}

/// Mean of `½{log det Δ + tr[C(x̂x̂ᵀ − P)CᵀΔ⁻¹]}` along one chain.
pub fn noise_chain(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    cfg: &McConfig,
    streams: &mut ChainStreams,
) -> Result<MeanEstimate, ExponentError> {
    let burn = cfg.burn_in();
    let c = model.c();
    let d = model.obs_dim();
    let mut state = KalmanState::initial(model);
    let mut cache = TransitionCache::default();
    let mut bm = BatchMeans::new(cfg.chain_length - burn, cfg.batches);
    for n in 0..cfg.chain_length {
        let innov = Innovation::new(model, &state.p);
        let predicted = c * &state.xhat;
        if n >= burn {
            let cpc = &innov.delta - Matrix::identity(d, d);
            bm.push(0.5 * (innov.logdet + innov.quad(&predicted) - innov.trace_solve(&cpc)));
        }
        let y = standard_normal(d, &mut streams.observations);
        let tr = cache.get(model, sampling.draw(&mut streams.holding))?;
        state.xhat = &tr.phi * (&state.xhat + &innov.gain * (y - predicted));
        state.p = cov_update_with(model, &state.p, tr, &innov);
    }
    Ok(bm.finish())
}

/// Mean of `log det(C P C ᵀ + I)` along one covariance chain.
pub fn logdet_chain(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    cfg: &McConfig,
    streams: &mut ChainStreams,
) -> Result<MeanEstimate, ExponentError> {
    let burn = cfg.burn_in();
    let mut p = model.qinf().clone();
    let mut cache = TransitionCache::default();
    let mut bm = BatchMeans::new(cfg.chain_length - burn, cfg.batches);
    for n in 0..cfg.chain_length {
        let innov = Innovation::new(model, &p);
        if n >= burn {
            bm.push(innov.logdet);
        }
        let tr = cache.get(model, sampling.draw(&mut streams.holding))?;
        p = cov_update_with(model, &p, tr, &innov);
    }
    Ok(bm.finish())
}

/// Pools equal-length replicates: mean of means, `√(Σ se²) / R`.
fn pool(parts: &[MeanEstimate]) -> (f64, f64) {
    let r = parts.len() as f64;
    let mean = parts.iter().map(|e| e.mean).sum::<f64>() / r;
    let se = parts.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / r;
    (mean, se)
}

fn run_replicates<F>(cfg: &McConfig, chain: F) -> Result<Vec<MeanEstimate>, ExponentError>
where
    F: Fn(&mut ChainStreams) -> Result<MeanEstimate, ExponentError> + Sync,
{
    cfg.validate()?;
    let factory = StreamFactory::new(cfg.seed);
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| chain(&mut ChainStreams::replicate(&factory, r)))
        .collect()
}

fn estimate(value: f64, stderr: f64, cfg: &McConfig, method: Method) -> ExponentEstimate {
    ExponentEstimate {
        value,
        stderr: stderr.max(STDERR_FLOOR * (1.0 + value.abs())),
        chain_length: cfg.chain_length,
        burn_in: cfg.burn_in(),
        seed: cfg.seed,
        method,
    }
}

/// Monte Carlo estimate of the exponent of the test with pure noise as null.
pub fn mc_exponent_h0_noise(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    cfg: &McConfig,
) -> Result<ExponentEstimate, ExponentError> {
    sampling.validate()?;
    let parts = run_replicates(cfg, |s| noise_chain(model, sampling, cfg, s))?;
    let (mean, se) = pool(&parts);
    Ok(estimate(mean, se, cfg, Method::MonteCarloNoise))
}

/// Monte Carlo estimate of the exponent of the test with signal plus noise as null.
pub fn mc_exponent_h0_signal(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    cfg: &McConfig,
) -> Result<ExponentEstimate, ExponentError> {
    sampling.validate()?;
    let parts = run_replicates(cfg, |s| logdet_chain(model, sampling, cfg, s))?;
    let (mean, se) = pool(&parts);
    let value = 0.5 * (trace_cqc(model) - mean);
    Ok(estimate(value, 0.5 * se, cfg, Method::MonteCarloSignal))
}

fn cqc(model: &GaussMarkovModel) -> Matrix {
    linalg::symmetrize(&(model.c() * model.qinf() * model.c().transpose()))
}

fn trace_cqc(model: &GaussMarkovModel) -> f64 {
    cqc(model).trace()
}

/// Steady state of the filter under regular sampling with its two exponents.
#[derive(Debug, Clone)]
pub struct RegularSolution {
    pub period: f64,
    pub phi: Matrix,
    pub q: Matrix,
    /// Stabilizing solution of the discrete algebraic Riccati equation.
    pub p_r: Matrix,
    pub gain: Matrix,
    /// Stationary covariance of `x̂` when `Y` is white noise.
    pub sigma: Matrix,
    pub noise: f64,
    pub signal: f64,
}

/// Closed-form exponents for sampling with period 1.
pub fn regular_exponents(model: &GaussMarkovModel) -> Result<RegularSolution, ExponentError> {
    regular_exponents_with_period(model, 1.0)
}

pub fn regular_exponents_with_period(model: &GaussMarkovModel, period: f64) -> Result<RegularSolution, ExponentError> {
    if !(period.is_finite() && period > 0.0) {
        return Err(ExponentError::Config(format!("sampling period must be positive and finite, got {period}")));
    }
    let tr = model.transition(period)?;
    let c = model.c();
    let d = model.obs_dim();
    let p_r = linalg::dare_solve(&tr.phi, c, &tr.q, DARE_DEFAULT_TOL, DARE_DEFAULT_MAX_ITER)?;
    let m = linalg::symmetrize(&(c * &p_r * c.transpose())) + Matrix::identity(d, d);
    let chol = m.clone().cholesky().ok_or(LinalgError::Singular("innovation covariance"))?;
    let gain = chol.solve(&(c * &p_r)).transpose();
    let sigma = linalg::sigma_solve(&tr.phi, &gain, c, DARE_DEFAULT_TOL)?;
    let logdet_m = linalg::logdet_spd(&m)?;
    let tr_p = chol.solve(&(c * &p_r * c.transpose())).trace();
    let tr_s = chol.solve(&(c * &sigma * c.transpose())).trace();
    let noise = 0.5 * (logdet_m - tr_p + tr_s);
    let signal = 0.5 * (trace_cqc(model) - logdet_m);
    Ok(RegularSolution { period, phi: tr.phi, q: tr.q, p_r, gain, sigma, noise, signal })
}

/// Scalar model `dX = −aX dt + B dW`, `C = 1`, `Q(∞) = snr`, sampled with period 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRegular {
    pub p_r: f64,
    pub noise: f64,
    pub signal: f64,
}

pub fn scalar_regular_exponents(a: f64, snr: f64) -> Result<ScalarRegular, ExponentError> {
    if !(a.is_finite() && a > 0.0 && snr.is_finite() && snr > 0.0) {
        return Err(ExponentError::Config(format!("need a > 0 and snr > 0, got a = {a}, snr = {snr}")));
    }
    let phi = (-a).exp();
    let phi2 = phi * phi;
    // 1 − Φ² without cancellation for small a.
    let u = -(-2.0 * a).exp_m1();
    let s1 = snr - 1.0;
    let p = 0.5 * (s1 * u + (s1 * s1 * u * u + 4.0 * snr * u).sqrt());
    let l = p.ln_1p();
    let noise = 0.5 * (l + p / (1.0 + p) * (phi2 * p / ((1.0 + p).powi(2) - phi2) - 1.0));
    let signal = 0.5 * (snr - l);
    Ok(ScalarRegular { p_r: p, noise, signal })
}

/// Limits as the holding times grow without bound: the Kullback-Leibler
/// divergences between `N(0, I)` and `N(0, CQ(∞)Cᵀ + I)` in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeSLimits {
    pub noise: f64,
    pub signal: f64,
}

pub fn large_s_limits(model: &GaussMarkovModel) -> Result<LargeSLimits, ExponentError> {
    let cqc = cqc(model);
    let d = model.obs_dim();
    let m = &cqc + Matrix::identity(d, d);
    let chol = m.clone().cholesky().ok_or(LinalgError::Singular("CQCᵀ + I"))?;
    let logdet = linalg::logdet_spd(&m)?;
    Ok(LargeSLimits {
        noise: 0.5 * (logdet - chol.solve(&cqc).trace()),
        signal: 0.5 * (cqc.trace() - logdet),
    })
}

fn check_increasing(grid: &[f64], name: &str) -> Result<(), ExponentError> {
    if grid.is_empty() {
        return Err(ExponentError::Config(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExponentError::Config(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Signal-null exponent of `scalar_ou(a, snr)` along `a_grid`. Every grid point
/// reuses the same seed, hence the same holding-time sequence.
pub fn monotonicity_scan(
    snr: f64,
    a_grid: &[f64],
    sampling: &RenewalSpec,
    cfg: &McConfig,
) -> Result<Vec<ExponentEstimate>, ExponentError> {
    check_increasing(a_grid, "a")?;
    a_grid
        .iter()
        .map(|&a| mc_exponent_h0_signal(&GaussMarkovModel::scalar_ou(a, snr)?, sampling, cfg))
        .collect()
}

/// Signal-null exponent of `scalar_ou(a, snr)` along `snr_grid`, common random numbers.
pub fn snr_scan(
    a: f64,
    snr_grid: &[f64],
    sampling: &RenewalSpec,
    cfg: &McConfig,
) -> Result<Vec<ExponentEstimate>, ExponentError> {
    check_increasing(snr_grid, "snr")?;
    snr_grid
        .iter()
        .map(|&snr| mc_exponent_h0_signal(&GaussMarkovModel::scalar_ou(a, snr)?, sampling, cfg))
        .collect()
}
