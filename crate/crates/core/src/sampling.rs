//! Renewal sampling laws for the holding times `I_k = T_k − T_{k−1}`.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("invalid sampling parameter: {0}")]
    InvalidParameter(String),
    #[error("empirical holding times: {0}")]
    Empirical(String),
}

/// Law `τ` of the i.i.d. holding times.
#[derive(Debug, Clone, PartialEq)]
pub enum RenewalSpec {
    /// Every holding time equals `period`.
    Regular { period: f64 },
    /// Exponential holding times with the given rate (Poisson sampling).
    Poisson { rate: f64 },
    /// `period · K` with `K ~ Geometric(prob)` on `{1, 2, …}`: a regular grid
    /// where each sample is kept with probability `prob`.
    Bernoulli { period: f64, prob: f64 },
    /// Uniform resampling from recorded holding times.
    Empirical { samples: Arc<[f64]> },
}

impl RenewalSpec {
    pub fn regular(period: f64) -> Result<Self, SamplingError> {
        let spec = Self::Regular { period };
        spec.validate()?;
        Ok(spec)
    }

    pub fn poisson(rate: f64) -> Result<Self, SamplingError> {
        let spec = Self::Poisson { rate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bernoulli(period: f64, prob: f64) -> Result<Self, SamplingError> {
        let spec = Self::Bernoulli { period, prob };
        spec.validate()?;
        Ok(spec)
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self, SamplingError> {
        let spec = Self::Empirical { samples: samples.into() };
        spec.validate()?;
        Ok(spec)
    }

    /// Reads one nonnegative decimal per line; blank lines and `#` comments are skipped.
    pub fn load_empirical(path: &Path) -> Result<Self, SamplingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SamplingError::Empirical(format!("{}: {e}", path.display())))?;
        Self::parse_empirical(&text)
    }

    pub fn parse_empirical(text: &str) -> Result<Self, SamplingError> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                SamplingError::Empirical(format!("line {}: not a number: {line:?}", lineno + 1))
            })?;
            samples.push(v);
        }
        Self::empirical(samples)
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SamplingError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Self::Regular { period } => positive("period", *period),
            Self::Poisson { rate } => positive("rate", *rate),
            Self::Bernoulli { period, prob } => {
                positive("period", *period)?;
                if prob.is_finite() && *prob > 0.0 && *prob <= 1.0 {
                    Ok(())
                } else {
                    Err(SamplingError::InvalidParameter(format!("prob must lie in (0, 1], got {prob}")))
                }
            }
            Self::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(SamplingError::Empirical("no samples".into()));
                }
                if let Some(bad) = samples.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(SamplingError::Empirical(format!("invalid holding time {bad}")));
                }
                if samples.iter().all(|v| *v == 0.0) {
                    return Err(SamplingError::Empirical("all holding times are zero".into()));
                }
                Ok(())
            }
        }
    }

    /// The law of `s·I`.
    pub fn scale(&self, s: f64) -> Result<Self, SamplingError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(SamplingError::InvalidParameter(format!("scale must be positive, got {s}")));
        }
        self.validate()?;
        Ok(match self {
            Self::Regular { period } => Self::Regular { period: period * s },
            Self::Poisson { rate } => Self::Poisson { rate: rate / s },
            Self::Bernoulli { period, prob } => Self::Bernoulli { period: period * s, prob: *prob },
            Self::Empirical { samples } => Self::Empirical {
                samples: samples.iter().map(|v| v * s).collect(),
            },
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Regular { period } => *period,
            Self::Poisson { rate } => 1.0 / rate,
            Self::Bernoulli { period, prob } => period / prob,
            Self::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// `P(I ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Regular { period } => f64::from(u8::from(x >= *period)),
            Self::Poisson { rate } => -(-rate * x).exp_m1(),
            Self::Bernoulli { period, prob } => {
                let k = (x / period).floor();
                1.0 - (1.0 - prob).powf(k)
            }
            Self::Empirical { samples } => {
                samples.iter().filter(|v| **v <= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// The constant holding time, when the law is a point mass.
    pub fn degenerate_value(&self) -> Option<f64> {
        match self {
            Self::Regular { period } => Some(*period),
            Self::Bernoulli { period, prob } if *prob == 1.0 => Some(*period),
            Self::Empirical { samples } if samples.iter().all(|v| *v == samples[0]) => Some(samples[0]),
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Regular { period } => *period,
            Self::Poisson { rate } => {
                let u: f64 = rng.random();
                -(-u).ln_1p() / rate
            }
            Self::Bernoulli { period, prob } => {
                if *prob >= 1.0 {
                    return *period;
                }
                let u: f64 = rng.random();
                let k = ((-u).ln_1p() / (-prob).ln_1p()).ceil().max(1.0);
                period * k
            }
            Self::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    pub fn draw_holding_times<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>, SamplingError> {
        self.validate()?;
        if n == 0 {
            return Err(SamplingError::InvalidParameter("need at least one holding time".into()));
        }
        Ok((0..n).map(|_| self.draw(rng)).collect())
    }
}
