//! Dense small-matrix kernels.
//!
//! Everything here works on [`Matrix`] (a dynamically sized `nalgebra` matrix)
//! and targets the dimensions of a state-space model, i.e. a handful of rows.
//! The routines favour accuracy over raw speed:
//!
//! * [`expm`] is Higham's scaling-and-squaring with diagonal Padé approximants
//!   (degrees 3, 5, 7, 9 and 13).
//! * [`gramian_q`] evaluates the controllability Gramian
//!   `Q(x) = ∫₀ˣ e^{-uA} B Bᵀ e^{-uAᵀ} du` with Van Loan's block exponential.
//! * [`lyapunov_qinf`] solves `Q Aᵀ + A Q = B Bᵀ` in Kronecker form.
//! * [`dare_solve`] finds the steady-state prediction covariance of a
//!   regularly sampled filter by fixed-point iteration.
//! * [`sigma_solve`] sums the geometric series of a Stein equation.
//!
//! Covariance-valued outputs go through [`project_psd`], which symmetrizes and
//! clips round-off negative eigenvalues to zero.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues in `[-PSD_CLIP, 0)` (relative to `1 + ‖M‖_max`) are treated as round-off.
pub const PSD_CLIP: f64 = 1e-12;

/// Minimal real part for an eigenvalue of a positive-stable matrix.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Van Loan's construction grows like `e^{x‖A‖}`; past this product the
/// complement form `Q(∞) − e^{-xA} Q(∞) e^{-xAᵀ}` is used instead.
pub const VAN_LOAN_MAX_EXPONENT: f64 = 4.0;

pub const DARE_DEFAULT_TOL: f64 = 1e-12;
pub const DARE_DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("matrix is not stable: {0}")]
    Stability(String),
    #[error("singular system in {0}")]
    Singular(&'static str),
    #[error("non-finite entries produced by {0}")]
    NonFinite(&'static str),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

fn ensure_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn ensure_finite(m: Matrix, op: &'static str) -> Result<Matrix> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(LinalgError::NonFinite(op))
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm `λ_max(MᵀM)^{1/2}`.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    symmetric_eigenvalues(&gram)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v))
        .max(0.0)
        .sqrt()
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Symmetrize and zero out eigenvalues that are negative only by round-off.
///
/// Genuinely negative eigenvalues (below the clip threshold) are kept so that
/// callers checking the invariant set still see them.
pub fn project_psd(m: &Matrix) -> Matrix {
    let sym = symmetrize(m);
    let n = sym.nrows();
    let floor = -PSD_CLIP * (1.0 + max_abs(&sym));
    if n == 1 {
        let v = sym[(0, 0)];
        return if v < 0.0 && v >= floor { Matrix::zeros(1, 1) } else { sym };
    }
    if n == 0 || sym.clone().cholesky().is_some() {
        return sym;
    }
    let eig = sym.clone().symmetric_eigen();
    if !eig.eigenvalues.iter().any(|&v| v < 0.0 && v >= floor) {
        return sym;
    }
    let clipped = eig
        .eigenvalues
        .map(|v| if v < 0.0 && v >= floor { 0.0 } else { v });
    let rebuilt = &eig.eigenvectors * Matrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&rebuilt)
}

/// `log det` of a symmetric positive definite matrix.
pub fn logdet_spd(m: &Matrix) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or(LinalgError::Singular("logdet_spd"))?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    let n = ensure_square(m, "eigenvalue input")?;
    if n == 1 {
        return Ok(vec![(m[(0, 0)], 0.0)]);
    }
    Ok(m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// Smallest real part over the spectrum.
pub fn min_real_part(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::INFINITY, f64::min))
}

/// All eigenvalues have real part above [`STABILITY_MARGIN`].
pub fn is_positive_stable(a: &Matrix) -> Result<bool> {
    Ok(min_real_part(a)? > STABILITY_MARGIN)
}

// Padé coefficients b_k for degrees 3, 5, 7, 9 and 13 (Higham 2005, Table 10.4).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds θ_m below which degree m reaches unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// `e^{tM}` by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &Matrix, t: f64) -> Result<Matrix> {
    let n = ensure_square(m, "expm input")?;
    if !t.is_finite() {
        return Err(LinalgError::Domain(format!("expm time must be finite, got {t}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("expm input"));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if n == 1 {
        return ensure_finite(Matrix::from_element(1, 1, (t * m[(0, 0)]).exp()), "expm");
    }
    let a = m * t;
    let norm = norm1(&a);
    let ident = Matrix::identity(n, n);

    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(&a, coeffs, &ident);
            return ensure_finite(pade_quotient(&u, &v)?, "expm");
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = &a * 2f64.powi(-squarings);
    let (u, v) = pade13(&scaled, &ident);
    let mut result = pade_quotient(&u, &v)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    ensure_finite(result, "expm")
}

fn pade_low(a: &Matrix, b: &[f64], ident: &Matrix) -> (Matrix, Matrix) {
    let a2 = a * a;
    // powers[k] = A^{2k}
    let degree = b.len() - 1;
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() * 2 <= degree {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = Matrix::zeros(a.nrows(), a.ncols());
    let mut v = Matrix::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        if 2 * k < degree {
            u_inner += p * b[2 * k + 1];
        }
        if 2 * k <= degree {
            v += p * b[2 * k];
        }
    }
    (a * u_inner, v)
}

fn pade13(a: &Matrix, ident: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1];
    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (a * u_inner, v)
}

fn pade_quotient(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let denom = v - u;
    let numer = v + u;
    denom.lu().solve(&numer).ok_or(LinalgError::Singular("expm Padé denominator"))
}

/// `e^{-xA}` and `Q(x)` from one exponential of the Van Loan block matrix
/// `x·[[-A, BBᵀ], [0, Aᵀ]]`, whose top blocks are `e^{-xA}` and `Q(x) e^{xAᵀ}`.
pub fn van_loan(a: &Matrix, bbt: &Matrix, x: f64) -> Result<(Matrix, Matrix)> {
    let q = ensure_square(a, "drift")?;
    if bbt.shape() != (q, q) {
        return Err(LinalgError::Dimension(format!(
            "BBᵀ must be {q}x{q}, got {}x{}",
            bbt.nrows(),
            bbt.ncols()
        )));
    }
    let mut block = Matrix::zeros(2 * q, 2 * q);
    block.view_mut((0, 0), (q, q)).copy_from(&(-a));
    block.view_mut((0, q), (q, q)).copy_from(bbt);
    block.view_mut((q, q), (q, q)).copy_from(&a.transpose());
    let e = expm(&block, x)?;
    let phi = e.view((0, 0), (q, q)).into_owned();
    let upper = e.view((0, q), (q, q)).into_owned();
    let gram = project_psd(&(upper * phi.transpose()));
    Ok((phi, gram))
}

/// Controllability Gramian `Q(x)`; `x = +∞` gives the Lyapunov solution.
pub fn gramian_q(a: &Matrix, b: &Matrix, x: f64) -> Result<Matrix> {
    let q = ensure_square(a, "drift")?;
    if b.nrows() != q {
        return Err(LinalgError::Dimension(format!(
            "diffusion must have {q} rows, got {}",
            b.nrows()
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(LinalgError::Domain(format!("Gramian horizon must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(Matrix::zeros(q, q));
    }
    if x.is_infinite() {
        return lyapunov_qinf(a, b);
    }
    let bbt = b * b.transpose();
    if x * norm1(a) <= VAN_LOAN_MAX_EXPONENT {
        return van_loan(a, &bbt, x).map(|(_, g)| g);
    }
    let qinf = lyapunov_qinf(a, b)?;
    let phi = expm(a, -x)?;
    Ok(gramian_complement(&qinf, &phi))
}

/// `Q(x) = Q(∞) − e^{-xA} Q(∞) e^{-xAᵀ}`, accurate once `Q(x)` is comparable to `Q(∞)`.
pub fn gramian_complement(qinf: &Matrix, phi: &Matrix) -> Matrix {
    project_psd(&(qinf - phi * qinf * phi.transpose()))
}

/// Solves `Q Aᵀ + A Q = B Bᵀ` for positive-stable `A`.
pub fn lyapunov_qinf(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let q = ensure_square(a, "drift")?;
    if b.nrows() != q {
        return Err(LinalgError::Dimension(format!(
            "diffusion must have {q} rows, got {}",
            b.nrows()
        )));
    }
    let re = min_real_part(a)?;
    if re <= STABILITY_MARGIN {
        return Err(LinalgError::Stability(format!(
            "drift has an eigenvalue with real part {re:e}"
        )));
    }
    let bbt = b * b.transpose();
    let ident = Matrix::identity(q, q);
    // vec(AQ) = (I⊗A) vec Q and vec(QAᵀ) = (A⊗I) vec Q for column-major vec.
    let k = ident.kronecker(a) + a.kronecker(&ident);
    let rhs = Vector::from_column_slice(bbt.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(LinalgError::Singular("Lyapunov equation"))?;
    let qinf = Matrix::from_column_slice(q, q, sol.as_slice());
    ensure_finite(project_psd(&qinf), "lyapunov_qinf")
}

/// Solves the Stein equation `X − Θ X Θᵀ = R` by a Kronecker linear solve.
pub fn stein_solve(theta: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let n = ensure_square(theta, "Stein transition")?;
    if rhs.shape() != (n, n) {
        return Err(LinalgError::Dimension("Stein right-hand side".into()));
    }
    let k = Matrix::identity(n * n, n * n) - theta.kronecker(theta);
    let r = Vector::from_column_slice(rhs.as_slice());
    let sol = k.lu().solve(&r).ok_or(LinalgError::Singular("Stein equation"))?;
    ensure_finite(
        symmetrize(&Matrix::from_column_slice(n, n, sol.as_slice())),
        "stein_solve",
    )
}

/// One step of the regular-sampling covariance map
/// `P ↦ Φ (P − PCᵀ(CPCᵀ+I)⁻¹CP) Φᵀ + Q`.
pub fn riccati_map(phi: &Matrix, c: &Matrix, q: &Matrix, p: &Matrix) -> Result<Matrix> {
    let d = c.nrows();
    let cp = c * p;
    let delta = &cp * c.transpose() + Matrix::identity(d, d);
    let chol = delta.cholesky().ok_or(LinalgError::Singular("innovation covariance"))?;
    let filtered = p - cp.transpose() * chol.solve(&cp);
    Ok(project_psd(&(phi * filtered * phi.transpose() + q)))
}

/// Steady-state prediction covariance of a regularly sampled Kalman filter.
///
/// Iterates [`riccati_map`] from the stationary covariance of `X ↦ ΦX + U`,
/// `U ~ N(0, Q)`, which is the upper end of the invariant set. Stops when two
/// successive iterates agree to `tol` in max-norm.
pub fn dare_solve(phi: &Matrix, c: &Matrix, q: &Matrix, tol: f64, max_iter: usize) -> Result<Matrix> {
    let n = ensure_square(phi, "Φ")?;
    if c.ncols() != n || q.shape() != (n, n) {
        return Err(LinalgError::Dimension("DARE operands".into()));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if min_eigenvalue(q) <= 0.0 {
        return Err(LinalgError::Domain("process covariance must be positive definite".into()));
    }
    let mut p = project_psd(&stein_solve(phi, q)?);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = riccati_map(phi, c, q, &p)?;
        residual = max_abs(&(&next - &p));
        p = next;
        if residual <= tol {
            return ensure_finite(p, "dare_solve");
        }
    }
    Err(LinalgError::NoConvergence { iterations: max_iter, residual })
}

/// Solves `Σ − ΘΣΘᵀ = ΦGGᵀΦᵀ` with `Θ = Φ(I − GC)` by Smith's doubling of the
/// series `Σ Θⁿ ΦGGᵀΦᵀ (Θᵀ)ⁿ`, stopping once an increment drops below `tol`.
pub fn sigma_solve(phi: &Matrix, g: &Matrix, c: &Matrix, tol: f64) -> Result<Matrix> {
    let n = ensure_square(phi, "Φ")?;
    if g.nrows() != n || c.ncols() != n || g.ncols() != c.nrows() {
        return Err(LinalgError::Dimension("Σ-equation operands".into()));
    }
    let theta = phi * (Matrix::identity(n, n) - g * c);
    let rho = spectral_radius(&theta)?;
    if rho >= 1.0 {
        return Err(LinalgError::Stability(format!(
            "closed-loop transition has spectral radius {rho}"
        )));
    }
    let phig = phi * g;
    let mut sigma = &phig * phig.transpose();
    let mut power = theta;
    // Each pass doubles the number of summed terms; 64 passes cover 2^64 terms.
    for _ in 0..64 {
        let increment = &power * &sigma * power.transpose();
        let size = max_abs(&increment);
        sigma += increment;
        if size <= tol {
            return ensure_finite(project_psd(&sigma), "sigma_solve");
        }
        power = &power * &power;
    }
    Err(LinalgError::NoConvergence { iterations: 64, residual: f64::NAN })
}
