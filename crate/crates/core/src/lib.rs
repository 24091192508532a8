//! Error exponents for detecting a sampled Gauss-Markov signal in white noise
//! when the sampling instants form a renewal process.
//!
//! The state `X(t) ∈ ℝ^q` follows `dX = −A X dt + B dW`; it is observed at
//! renewal instants `T_n` as `Y_n = C X(T_n) + V_n` with `V_n ~ N(0, I_d)`.
//! The crate evaluates the Neyman-Pearson error exponents of the two
//! hypothesis orientations (noise only against signal plus noise, and the
//! reverse) by Monte Carlo along the Kalman filter chain, in closed form for
//! regular sampling, and checks them against simulated detection.

pub mod cli;
pub mod detection;
pub mod exponents;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use detection::{DetectionResult, Orientation};
pub use exponents::{ExponentEstimate, McConfig, Method};
pub use kalman::{CovarianceTrajectory, KalmanState};
pub use linalg::{Matrix, Vector};
pub use model::{GaussMarkovModel, Hypothesis};
pub use rng::{Purpose, StreamFactory};
pub use sampling::RenewalSpec;
