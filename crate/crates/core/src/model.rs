//! The signal model `dX = −A X dt + B dW`, observed as `Y_n = C X(T_n) + V_n`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, Vector};

/// Minimal eigenvalue of `Q(1)` for `(A, B)` to count as controllable.
pub const CONTROLLABILITY_MARGIN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("drift A is not positive stable (smallest eigenvalue real part {min_real_part:e})")]
    Unstable { min_real_part: f64 },
    #[error("(A, B) is not controllable (smallest eigenvalue of Q(1) is {min_eigenvalue:e})")]
    Uncontrollable { min_eigenvalue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A validated `(A, B, C)` realization together with its stationary covariance.
#[derive(Debug, Clone)]
pub struct GaussMarkovModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    bbt: Matrix,
    qinf: Matrix,
    a_norm1: f64,
}

impl GaussMarkovModel {
    /// Checks dimensions, positive stability of `A` and controllability of `(A, B)`.
    pub fn validate(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, ModelError> {
        let q = a.nrows();
        if q == 0 || a.ncols() != q {
            return Err(ModelError::Dimension(format!("A must be square and non-empty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != q || b.ncols() == 0 {
            return Err(ModelError::Dimension(format!("B must be {q}xp, got {}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != q || c.nrows() == 0 {
            return Err(ModelError::Dimension(format!("C must be dx{q}, got {}x{}", c.nrows(), c.ncols())));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter("model matrices must be finite".into()));
        }
        let min_real_part = linalg::min_real_part(&a)?;
        if min_real_part <= linalg::STABILITY_MARGIN {
            return Err(ModelError::Unstable { min_real_part });
        }
        let q1 = linalg::gramian_q(&a, &b, 1.0)?;
        let min_eigenvalue = linalg::min_eigenvalue(&q1);
        if min_eigenvalue <= CONTROLLABILITY_MARGIN {
            return Err(ModelError::Uncontrollable { min_eigenvalue });
        }
        let qinf = linalg::lyapunov_qinf(&a, &b)?;
        let bbt = &b * b.transpose();
        let a_norm1 = a
            .column_iter()
            .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self { a, b, c, bbt, qinf, a_norm1 })
    }

    /// Scalar Ornstein-Uhlenbeck process observed directly, with `b` chosen so
    /// that `Q(∞) = b²/(2a)` equals `snr`.
    pub fn scalar_ou(a: f64, snr: f64) -> Result<Self, ModelError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(ModelError::InvalidParameter(format!("a must be positive, got {a}")));
        }
        if !(snr.is_finite() && snr > 0.0) {
            return Err(ModelError::InvalidParameter(format!("snr must be positive, got {snr}")));
        }
        let b = (2.0 * a * snr).sqrt();
        Self::validate(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, 1.0),
        )
    }

    /// Two-dimensional RLC-circuit example: `A = [[0, −1], [1, 1]]`, `B = [0; 1]`, `C = I₂`.
    pub fn rlc() -> Self {
        Self::validate(
            Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 1.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2),
        )
        .expect("RLC example is stable and controllable")
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Stationary covariance `Q(∞)`.
    pub fn qinf(&self) -> &Matrix {
        &self.qinf
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `tr(C Q(∞) Cᵀ) / d`.
    pub fn snr(&self) -> f64 {
        (&self.c * &self.qinf * self.c.transpose()).trace() / self.obs_dim() as f64
    }

    /// Same dynamics with `B` rescaled so that [`snr`](Self::snr) equals `target`.
    pub fn with_snr(&self, target: f64) -> Result<Self, ModelError> {
        if !(target.is_finite() && target > 0.0) {
            return Err(ModelError::InvalidParameter(format!("target SNR must be positive, got {target}")));
        }
        let current = self.snr();
        if current <= 0.0 {
            return Err(ModelError::InvalidParameter("model has zero SNR, cannot rescale".into()));
        }
        let factor = (target / current).sqrt();
        Self::validate(self.a.clone(), &self.b * factor, self.c.clone())
    }

    /// The model seen on the time axis `t' = t / s`: `A → sA`, `B → √s B`.
    /// `Q(∞)` is unchanged and `transition(I)` of the result equals
    /// `transition(s·I)` of `self`.
    pub fn time_rescaled(&self, s: f64) -> Result<Self, ModelError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(ModelError::InvalidParameter(format!("time scale must be positive, got {s}")));
        }
        Self::validate(&self.a * s, &self.b * s.sqrt(), self.c.clone())
    }

    /// `Q(x)`.
    pub fn gramian(&self, x: f64) -> Result<Matrix, ModelError> {
        if x.is_nan() || x < 0.0 {
            return Err(ModelError::InvalidParameter(format!("holding time must be >= 0, got {x}")));
        }
        Ok(self.transition(x)?.q)
    }

    /// State transition `e^{−IA}` and innovation covariance `Q(I)` over a
    /// holding time `I`.
    pub fn transition(&self, holding: f64) -> Result<Transition, ModelError> {
        if holding.is_nan() || holding < 0.0 {
            return Err(ModelError::InvalidParameter(format!("holding time must be >= 0, got {holding}")));
        }
        let q = self.state_dim();
        if holding == 0.0 {
            return Ok(Transition { phi: Matrix::identity(q, q), q: Matrix::zeros(q, q) });
        }
        if holding.is_infinite() {
            return Ok(Transition { phi: Matrix::zeros(q, q), q: self.qinf.clone() });
        }
        if q == 1 {
            let a = self.a[(0, 0)];
            let phi = (-a * holding).exp();
            let var = -self.qinf[(0, 0)] * (-2.0 * a * holding).exp_m1();
            return Ok(Transition {
                phi: Matrix::from_element(1, 1, phi),
                q: Matrix::from_element(1, 1, var),
            });
        }
        if holding * self.a_norm1 <= linalg::VAN_LOAN_MAX_EXPONENT {
            let (phi, q) = linalg::van_loan(&self.a, &self.bbt, holding)?;
            return Ok(Transition { phi, q });
        }
        let phi = linalg::expm(&self.a, -holding)?;
        let q = linalg::gramian_complement(&self.qinf, &phi);
        Ok(Transition { phi, q })
    }
}

/// `(e^{−IA}, Q(I))` for one holding time.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub phi: Matrix,
    pub q: Matrix,
}

/// Draws `N(0, Σ)` through a square-root factor of the (clipped) covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: Option<Matrix>,
    dim: usize,
}

impl GaussianSampler {
    /// Uses a Cholesky factor when `Σ` is definite and an eigenvalue square
    /// root otherwise; an all-zero covariance yields the zero vector.
    pub fn new(cov: &Matrix) -> Self {
        let dim = cov.nrows();
        let cov = linalg::project_psd(cov);
        if cov.iter().all(|v| *v == 0.0) {
            return Self { factor: None, dim };
        }
        let factor = match cov.clone().cholesky() {
            Some(ch) => ch.unpack(),
            None => {
                let eig = cov.symmetric_eigen();
                let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * Matrix::from_diagonal(&roots)
            }
        };
        Self { factor: Some(factor), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match &self.factor {
            None => Vector::zeros(self.dim),
            Some(l) => l * standard_normal(self.dim, rng),
        }
    }
}

pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// `Y_n = V_n`.
    Noise,
    /// `Y_n = C X(T_n) + V_n`.
    SignalPlusNoise,
}

#[derive(Debug, Clone)]
pub struct SampledPath {
    pub holding_times: Vec<f64>,
    pub states: Vec<Vector>,
    pub observations: Vec<Vector>,
    pub hypothesis: Hypothesis,
}

impl SampledPath {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Precomputed transitions and noise factors for a fixed holding-time sequence.
#[derive(Debug, Clone)]
pub struct TransitionPlan {
    holding_times: Vec<f64>,
    steps: Vec<(Transition, GaussianSampler)>,
}

impl TransitionPlan {
    pub fn new(model: &GaussMarkovModel, holding_times: &[f64]) -> Result<Self, ModelError> {
        let mut steps: Vec<(Transition, GaussianSampler)> = Vec::with_capacity(holding_times.len());
        for (k, &h) in holding_times.iter().enumerate() {
            // Runs of equal holding times (regular sampling) share one transition.
            if k > 0 && holding_times[k - 1] == h {
                let prev = steps[k - 1].clone();
                steps.push(prev);
                continue;
            }
            let tr = model.transition(h)?;
            let sampler = GaussianSampler::new(&tr.q);
            steps.push((tr, sampler));
        }
        Ok(Self { holding_times: holding_times.to_vec(), steps })
    }

    pub fn holding_times(&self) -> &[f64] {
        &self.holding_times
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Transition over the holding time `I_{k+1}` (zero-based `k`).
    pub fn transition(&self, k: usize) -> &Transition {
        &self.steps[k].0
    }

    pub fn noise(&self, k: usize) -> &GaussianSampler {
        &self.steps[k].1
    }
}

/// Simulates `X_0 ~ N(0, Q(∞))`, `X_n = e^{−I_n A} X_{n−1} + U_n` and the
/// observations `Y_1..Y_N` under `hypothesis`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &GaussMarkovModel,
    holding_times: &[f64],
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<SampledPath, ModelError> {
    let plan = TransitionPlan::new(model, holding_times)?;
    Ok(simulate_planned(model, &plan, hypothesis, rng))
}

pub fn simulate_planned<R: Rng + ?Sized>(
    model: &GaussMarkovModel,
    plan: &TransitionPlan,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> SampledPath {
    let n = plan.len();
    let d = model.obs_dim();
    let stationary = GaussianSampler::new(model.qinf());
    let mut x = stationary.sample(rng);
    let mut states = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    for k in 0..n {
        x = &plan.transition(k).phi * &x + plan.noise(k).sample(rng);
        let noise = standard_normal(d, rng);
        let y = match hypothesis {
            Hypothesis::Noise => noise,
            Hypothesis::SignalPlusNoise => model.c() * &x + noise,
        };
        states.push(x.clone());
        observations.push(y);
    }
    SampledPath {
        holding_times: plan.holding_times().to_vec(),
        states,
        observations,
        hypothesis,
    }
}
