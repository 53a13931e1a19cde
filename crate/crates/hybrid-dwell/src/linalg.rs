//! Dense real-matrix kernels: Lyapunov solves, principal square roots,
//! spectral norms and radii, Hurwitz and Schur predicates, and matrix
//! exponentials. All operations are pure functions over immutable inputs.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::tol;

/// Dense real matrix used throughout the library.
pub type Mat = DMatrix<f64>;

/// Dense real column vector.
pub type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },
    #[error("Lyapunov solve is ill-conditioned (residual {residual:.3e} exceeds {bound:.3e})")]
    IllConditioned { residual: f64, bound: f64 },
    #[error("matrix is not symmetric (relative deviation {deviation:.3e})")]
    NotSymmetric { deviation: f64 },
    #[error("matrix is not positive definite (minimum eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("entry ({row},{col}) = {value:.6e} is negative in a nonnegative matrix")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("eigenvalue iteration did not converge within {0} iterations")]
    EigenFailed(usize),
    #[error("matrix exponential overflowed the representable range")]
    Overflow,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Symmetric positive definite matrix. Construction validates symmetry to a
/// relative tolerance and strict positive definiteness.
#[derive(Clone, Debug, PartialEq)]
pub struct SymPd {
    m: Mat,
}

impl SymPd {
    /// Validates and wraps a symmetric positive definite matrix. The stored
    /// matrix is the symmetrized `(M + M') / 2`.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let deviation = (&m - m.transpose()).norm() / scale;
        if deviation > tol::SYMMETRY_REL {
            return Err(LinalgError::NotSymmetric { deviation });
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eigs = sym_eigenvalues(&sym)?;
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { min_eig });
        }
        Ok(SymPd { m: sym })
    }

    /// Scalar convenience constructor for 1x1 matrices.
    pub fn scalar(value: f64) -> Result<Self> {
        SymPd::new(Mat::from_element(1, 1, value))
    }

    pub fn mat(&self) -> &Mat {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Smallest eigenvalue (positive by construction).
    pub fn min_eig(&self) -> f64 {
        sym_eigenvalues(&self.m)
            .expect("validated symmetric matrix")
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue.
    pub fn max_eig(&self) -> f64 {
        sym_eigenvalues(&self.m)
            .expect("validated symmetric matrix")
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Principal square root.
    pub fn sqrt(&self) -> SymPd {
        self.powf(0.5)
    }

    /// Inverse of the principal square root.
    pub fn inv_sqrt(&self) -> SymPd {
        self.powf(-0.5)
    }

    /// Symmetric power through the eigendecomposition.
    fn powf(&self, p: f64) -> SymPd {
        let eig = sym_eigen(&self.m).expect("validated symmetric matrix");
        let d = Mat::from_diagonal(&eig.0.map(|v| v.powf(p)));
        let m = &eig.1 * d * eig.1.transpose();
        SymPd {
            m: (&m + m.transpose()) * 0.5,
        }
    }

    /// Rescales so the smallest eigenvalue becomes exactly the target.
    pub fn normalized_min_eig(&self, target: f64) -> SymPd {
        let factor = target / self.min_eig();
        SymPd {
            m: &self.m * factor,
        }
    }

    /// Quadratic form `v' M v`.
    pub fn quad(&self, v: &Vector) -> f64 {
        (v.transpose() * &self.m * v)[(0, 0)]
    }
}

/// Eigenvalues of a general square matrix via QR-type Schur reduction with
/// a hard iteration cap.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex<f64>>> {
    require_square(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = m
        .clone()
        .try_schur(tol::EIG_EPS, tol::EIG_MAX_ITER)
        .ok_or(LinalgError::EigenFailed(tol::EIG_MAX_ITER))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix (real, via the symmetric solver).
fn sym_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    Ok(sym_eigen(m)?.0.iter().copied().collect())
}

fn sym_eigen(m: &Mat) -> Result<(Vector, Mat)> {
    let eig = m
        .clone()
        .try_symmetric_eigen(tol::EIG_EPS, tol::EIG_MAX_ITER)
        .ok_or(LinalgError::EigenFailed(tol::EIG_MAX_ITER))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Largest real part over the eigenvalues.
pub fn spectral_abscissa(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Largest singular value (induced 2-norm).
pub fn spectral_norm(m: &Mat) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let svd = m
        .clone()
        .try_svd(false, false, tol::EIG_EPS, tol::EIG_MAX_ITER)
        .ok_or(LinalgError::EigenFailed(tol::EIG_MAX_ITER))?;
    Ok(svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max))
}

/// True iff all eigenvalues have real part below the Hurwitz margin.
pub fn is_hurwitz(m: &Mat) -> Result<bool> {
    Ok(spectral_abscissa(m)? < -tol::HURWITZ_MARGIN)
}

/// Solves `A'Q + QA = -C` for symmetric positive definite `Q` through the
/// Kronecker-vectorized dense linear system (dimensions are small here, so
/// simplicity wins over a Schur-form solver).
pub fn solve_lyapunov(a: &Mat, c: &SymPd) -> Result<SymPd> {
    require_square(a)?;
    let n = a.nrows();
    if c.dim() != n {
        return Err(LinalgError::Dimension(format!(
            "A is {n}x{n} but C is {cx}x{cx}",
            cx = c.dim()
        )));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= -tol::HURWITZ_MARGIN {
        return Err(LinalgError::NotHurwitz { abscissa });
    }
    // vec(A'Q) = (I (x) A') vec(Q), vec(QA) = (A' (x) I) vec(Q), columns stacked.
    let at = a.transpose();
    let eye = Mat::identity(n, n);
    let k = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = Vector::from_column_slice((-c.mat()).as_slice());
    let v = k
        .lu()
        .solve(&rhs)
        .ok_or(LinalgError::IllConditioned {
            residual: f64::INFINITY,
            bound: 0.0,
        })?;
    let q = Mat::from_column_slice(n, n, v.as_slice());
    let q = (&q + q.transpose()) * 0.5;
    let residual = (a.transpose() * &q + &q * a + c.mat()).norm();
    let bound = tol::LYAP_RESIDUAL_REL * (a.norm() * q.norm() + c.mat().norm());
    if residual > bound {
        return Err(LinalgError::IllConditioned { residual, bound });
    }
    SymPd::new(q).map_err(|_| LinalgError::IllConditioned { residual, bound })
}

/// Principal (symmetric positive definite) square root of a symmetric
/// positive definite matrix, via the symmetric eigendecomposition.
pub fn principal_sqrt(q: &Mat) -> Result<SymPd> {
    let q = SymPd::new(q.clone())?;
    let b = q.sqrt();
    let residual = (b.mat() * b.mat() - q.mat()).norm();
    if residual > tol::SQRT_RESIDUAL_REL * q.mat().norm() {
        return Err(LinalgError::IllConditioned {
            residual,
            bound: tol::SQRT_RESIDUAL_REL * q.mat().norm(),
        });
    }
    Ok(b)
}

/// Result of the Schur test for a nonnegative matrix.
#[derive(Clone, Debug)]
pub struct SchurTest {
    /// True iff the spectral radius is below `1 - SCHUR_MARGIN`.
    pub schur: bool,
    /// The computed spectral radius.
    pub radius: f64,
    /// Strictly positive `p` with `M'p < p` componentwise, present iff
    /// `schur` is true.
    pub witness: Option<Vector>,
}

/// Schur test for an entrywise nonnegative matrix, with a positive witness
/// vector. For a nonnegative Schur matrix, `p = (I - M')^{-1} 1` satisfies
/// `p >= 1 > 0` and `M'p = p - 1 < p` componentwise.
pub fn is_schur_positive(m: &Mat) -> Result<SchurTest> {
    require_square(m)?;
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let value = m[(row, col)];
            if value < 0.0 {
                return Err(LinalgError::NegativeEntry { row, col, value });
            }
        }
    }
    let radius = spectral_radius(m)?;
    if radius >= 1.0 - tol::SCHUR_MARGIN {
        return Ok(SchurTest {
            schur: false,
            radius,
            witness: None,
        });
    }
    let n = m.nrows();
    let ones = Vector::from_element(n, 1.0);
    let witness = (Mat::identity(n, n) - m.transpose())
        .lu()
        .solve(&ones)
        .filter(|p| {
            let mp = m.transpose() * p;
            p.iter().all(|&v| v > 0.0) && mp.iter().zip(p.iter()).all(|(&l, &r)| l < r)
        });
    match witness {
        Some(p) => Ok(SchurTest {
            schur: true,
            radius,
            witness: Some(p),
        }),
        // The linear solve cannot produce an invalid witness for a radius
        // this far below 1; treat a failure as an iteration problem.
        None => Err(LinalgError::EigenFailed(tol::EIG_MAX_ITER)),
    }
}

/// Matrix exponential `e^{At}` by scaling and squaring with the diagonal
/// degree-13 Pade approximant.
pub fn expm(a: &Mat, t: f64) -> Result<Mat> {
    require_square(a)?;
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Overflow);
    }
    let n = a.nrows();
    if t == 0.0 {
        return Ok(Mat::identity(n, n));
    }
    let at = a * t;
    // Largest norm at which the degree-13 approximant keeps full accuracy.
    const THETA_13: f64 = 5.371_920_351_148_152;
    let norm = one_norm(&at);
    if !norm.is_finite() {
        return Err(LinalgError::Overflow);
    }
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = &at * 0.5_f64.powi(squarings);
    let mut result = pade_13(&scaled)?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Overflow);
    }
    Ok(result)
}

/// Degree-13 diagonal Pade approximant of `e^A` for `||A||_1` below the
/// accuracy threshold.
fn pade_13(a: &Mat) -> Result<Mat> {
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let eye = Mat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &eye * B[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &eye * B[0];
    (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or(LinalgError::Overflow)
}

/// Maximum absolute column sum.
fn one_norm(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum())
        .fold(0.0, f64::max)
}

fn require_square(m: &Mat) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}
