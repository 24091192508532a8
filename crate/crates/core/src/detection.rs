//! Simulated Neyman-Pearson tests.
//!
//! A trial draws fresh holding times and observations of length `N` under one
//! hypothesis and evaluates the normalized log-likelihood ratio
//! `L_N = (1/N) log f_noise(Y) / f_signal(Y)`. The test statistic is oriented so
//! that large values speak against the null:
//!
//! | orientation | null           | statistic |
//! |-------------|----------------|-----------|
//! | `H0Noise`   | noise          | `−L_N`    |
//! | `H0Signal`  | signal + noise | `L_N`     |
//!
//! The threshold is the empirical `(1−ε)`-quantile of the statistic over the
//! null trials, and `β̂` is the fraction of alternative trials at or below it.

use std::fmt;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::kalman::CovarianceTrajectory;
use crate::model::{simulate_planned, GaussMarkovModel, Hypothesis, ModelError, TransitionPlan};
use crate::rng::{Purpose, SimRng, StreamFactory};
use crate::sampling::{RenewalSpec, SamplingError};
use crate::stats::mean_and_variance;

pub const MIN_TRIALS: usize = 1000;
/// `β̂` below `CENSOR_COUNT / trials` rests on fewer than this many misses.
pub const CENSOR_COUNT: f64 = 10.0;
pub const MIN_CONVERGENCE_LENGTH: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("false-alarm level must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("invalid detection setup: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    H0Noise,
    H0Signal,
}

impl Orientation {
    pub fn null(self) -> Hypothesis {
        match self {
            Orientation::H0Noise => Hypothesis::Noise,
            Orientation::H0Signal => Hypothesis::SignalPlusNoise,
        }
    }

    pub fn alternative(self) -> Hypothesis {
        match self {
            Orientation::H0Noise => Hypothesis::SignalPlusNoise,
            Orientation::H0Signal => Hypothesis::Noise,
        }
    }

    /// Maps `L_N` to the statistic that is large under the alternative.
    pub fn statistic(self, llr: f64) -> f64 {
        match self {
            Orientation::H0Noise => -llr,
            Orientation::H0Signal => llr,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::H0Noise => "h0_noise",
            Orientation::H0Signal => "h0_signal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    pub n: usize,
    pub epsilon: f64,
    pub threshold: f64,
    pub beta_hat: f64,
    pub trials_h0: usize,
    pub trials_h1: usize,
    /// `−log(β̂) / N`; infinite when no alternative trial was missed.
    pub rate_hat: f64,
    pub orientation: Orientation,
    /// Set when `β̂ < 10 / trials`; the value is then only an upper bound.
    pub censored: bool,
}

/// Evaluates `L_N` on simulated paths of a fixed length.
pub struct TrialRunner<'a> {
    model: &'a GaussMarkovModel,
    sampling: &'a RenewalSpec,
    n: usize,
    /// Shared plan and gains when every holding time is the same.
    fixed: Option<(TransitionPlan, CovarianceTrajectory)>,
}

impl<'a> TrialRunner<'a> {
    pub fn new(model: &'a GaussMarkovModel, sampling: &'a RenewalSpec, n: usize) -> Result<Self, DetectionError> {
        if n == 0 {
            return Err(DetectionError::Config("paths need at least one sample".into()));
        }
        sampling.validate()?;
        let fixed = match sampling.degenerate_value() {
            Some(h) => {
                let plan = TransitionPlan::new(model, &vec![h; n])?;
                let traj = CovarianceTrajectory::new(model, &plan);
                Some((plan, traj))
            }
            None => None,
        };
        Ok(Self { model, sampling, n, fixed })
    }

    /// `L_N` of one path drawn under `hypothesis`; holding times come first
    /// from `rng`, then the path.
    pub fn llr(&self, hypothesis: Hypothesis, rng: &mut SimRng) -> Result<f64, DetectionError> {
        match &self.fixed {
            Some((plan, traj)) => {
                let path = simulate_planned(self.model, plan, hypothesis, rng);
                Ok(traj.llr(&path.observations))
            }
            None => {
                let hold = self.sampling.draw_holding_times(self.n, rng)?;
                let plan = TransitionPlan::new(self.model, &hold)?;
                let path = simulate_planned(self.model, &plan, hypothesis, rng);
                Ok(CovarianceTrajectory::new(self.model, &plan).llr(&path.observations))
            }
        }
    }

    /// `L_N` for trials `0..trials`, each on its own stream.
    pub fn llr_sample(
        &self,
        hypothesis: Hypothesis,
        purpose: Purpose,
        trials: usize,
        factory: &StreamFactory,
    ) -> Result<Vec<f64>, DetectionError> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| self.llr(hypothesis, &mut factory.stream(purpose, t)))
            .collect()
    }
}

fn check_epsilon(eps: f64) -> Result<(), DetectionError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(DetectionError::Epsilon(eps))
    }
}

/// Empirical `(1−ε)`-quantile: the `⌈(1−ε)n⌉`-th smallest value, so that at
/// most a fraction `ε` of the sample exceeds it.
pub fn upper_quantile(sorted: &[f64], eps: f64) -> f64 {
    let n = sorted.len();
    let rank = ((1.0 - eps) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Tests at several false-alarm levels sharing one set of simulated trials.
#[allow(clippy::too_many_arguments)]
pub fn estimate_beta_levels(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    n: usize,
    epsilons: &[f64],
    trials: usize,
    orientation: Orientation,
    seed: u64,
) -> Result<Vec<DetectionResult>, DetectionError> {
    for &eps in epsilons {
        check_epsilon(eps)?;
    }
    if trials < MIN_TRIALS {
        return Err(DetectionError::Config(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let runner = TrialRunner::new(model, sampling, n)?;
    let factory = StreamFactory::new(seed);
    let stat = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|l| orientation.statistic(l)).collect() };
    let mut null = stat(runner.llr_sample(orientation.null(), Purpose::NullTrials, trials, &factory)?);
    let mut alt = stat(runner.llr_sample(orientation.alternative(), Purpose::AltTrials, trials, &factory)?);
    null.sort_by(f64::total_cmp);
    alt.sort_by(f64::total_cmp);
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let threshold = upper_quantile(&null, eps);
            let misses = alt.partition_point(|&s| s <= threshold);
            let beta_hat = misses as f64 / trials as f64;
            DetectionResult {
                n,
                epsilon: eps,
                threshold,
                beta_hat,
                trials_h0: trials,
                trials_h1: trials,
                rate_hat: -beta_hat.ln() / n as f64,
                orientation,
                censored: beta_hat < CENSOR_COUNT / trials as f64,
            }
        })
        .collect())
}

pub fn estimate_beta(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    n: usize,
    epsilon: f64,
    trials: usize,
    orientation: Orientation,
    seed: u64,
) -> Result<DetectionResult, DetectionError> {
    let mut out = estimate_beta_levels(model, sampling, n, &[epsilon], trials, orientation, seed)?;
    Ok(out.remove(0))
}

/// Binomial standard error of `β̂`.
pub fn beta_stderr(r: &DetectionResult) -> f64 {
    (r.beta_hat * (1.0 - r.beta_hat) / r.trials_h1 as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares line through `(N, −log β̂_N)` over the uncensored results.
/// `None` when fewer than two distinct lengths remain.
pub fn fit_decay_rate(results: &[DetectionResult]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| !r.censored && r.beta_hat > 0.0)
        .map(|r| (r.n as f64, -r.beta_hat.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit { slope, intercept: my - slope * mx, points: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCheck {
    /// Mean of the null-oriented `L_N` (`L_N` under noise, `−L_N` under signal).
    pub mean: f64,
    /// Half-width of the 95% Student-t interval.
    pub ci_halfwidth: f64,
    pub replicates: usize,
}

/// Replicate paths of length `n` under the null; `L_N` should approach the
/// exponent of the orientation.
pub fn llr_convergence_check(
    model: &GaussMarkovModel,
    sampling: &RenewalSpec,
    n: usize,
    orientation: Orientation,
    replicates: usize,
    seed: u64,
) -> Result<ConvergenceCheck, DetectionError> {
    if n < MIN_CONVERGENCE_LENGTH {
        return Err(DetectionError::Config(format!(
            "path length {n} is below the minimum {MIN_CONVERGENCE_LENGTH}"
        )));
    }
    if replicates < 2 {
        return Err(DetectionError::Config("need at least two replicates".into()));
    }
    let runner = TrialRunner::new(model, sampling, n)?;
    let factory = StreamFactory::new(seed);
    let values: Vec<f64> = runner
        .llr_sample(orientation.null(), Purpose::NullTrials, replicates, &factory)?
        .into_iter()
        .map(|l| -orientation.statistic(l))
        .collect();
    let (mean, var) = mean_and_variance(&values);
    let r = replicates as f64;
    let t = StudentsT::new(0.0, 1.0, r - 1.0).expect("positive degrees of freedom").inverse_cdf(0.975);
    Ok(ConvergenceCheck { mean, ci_halfwidth: t * (var / r).sqrt(), replicates })
}
