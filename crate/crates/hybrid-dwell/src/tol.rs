//! Centralized numerical tolerances and algorithm constants.
//!
//! Every threshold used by the library is defined here so that accuracy
//! contracts are auditable in one place. Constants are grouped by the kind
//! of guarantee they back.

// ---------------------------------------------------------------------------
// Matrix kernel accuracy
// ---------------------------------------------------------------------------

/// Relative residual allowed for a Lyapunov solve:
/// `||A'Q + QA + C||_F <= LYAP_RESIDUAL_REL * (||A|| ||Q|| + ||C||)`.
pub const LYAP_RESIDUAL_REL: f64 = 1e-10;

/// Relative residual allowed for the principal square root:
/// `||B^2 - Q|| <= SQRT_RESIDUAL_REL * ||Q||`.
pub const SQRT_RESIDUAL_REL: f64 = 1e-10;

/// Relative symmetry deviation accepted when constructing a symmetric
/// positive definite matrix.
pub const SYMMETRY_REL: f64 = 1e-12;

/// A matrix counts as Hurwitz when its spectral abscissa is below this
/// (strictly negative) margin.
pub const HURWITZ_MARGIN: f64 = 1e-12;

/// A nonnegative matrix counts as Schur when its spectral radius is below
/// `1 - SCHUR_MARGIN`.
pub const SCHUR_MARGIN: f64 = 1e-12;

/// Hard iteration cap for QR-type eigenvalue/singular-value iterations.
/// Exceeding the cap is reported as an error instead of spinning.
pub const EIG_MAX_ITER: usize = 10_000;

/// Convergence threshold handed to the iterative eigen/SVD kernels.
pub const EIG_EPS: f64 = 1e-15;

// ---------------------------------------------------------------------------
// Model and decoupling structure
// ---------------------------------------------------------------------------

/// A fast-block matrix is treated as singular when `|det|` relative to its
/// size-normalized magnitude falls below this bound.
pub const SINGULAR_DET_REL: f64 = 1e-12;

/// Tolerance for exact structural identities (reordering round trips,
/// explicit versus product forms of the reset blocks).
pub const STRUCT_EQ_REL: f64 = 1e-12;

/// Agreement required between trajectories of equivalent representations
/// (original versus reordered, augmented versus direct).
pub const SIM_AGREEMENT: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Certification constants
// ---------------------------------------------------------------------------

/// Width of the band around 1 inside which the slow reset gain is treated
/// as exactly 1 (the more conservative dispatch applies).
pub const GAMMA11_ONE_BAND: f64 = 1e-12;

/// Fraction of `lambda_f / lambda_s` kept as headroom when fixing the
/// fast-coupling threshold, so the beta denominators stay away from zero.
pub const EPS2_SAFETY: f64 = 0.99;

/// Default fraction of the spectral abscissa used as the per-mode decay
/// rate when constructing Lyapunov certificates.
pub const KAPPA_DEFAULT: f64 = 0.9;

/// Iterations of golden-section search for the witness weight parameter.
/// The search runs on the logarithm of the weight, so this collapses the
/// bracket to machine precision for any practical window.
pub const GOLDEN_ITERS: usize = 200;

/// Absolute bracket width at which the dwell-time bisection stops. Tighter
/// than the documented `1e-9 * max(1, tau)` so the bisection bound can
/// never exceed the closed form by more than the comparison slack.
pub const BISECT_TOL: f64 = 1e-12;

/// Verification shift: certified bounds are infima, so Schur and witness
/// checks evaluate at `tau + CERT_CHECK_SHIFT`.
pub const CERT_CHECK_SHIFT: f64 = 1e-9;

/// Relative slack in the certificate self-checks. At a binding optimum the
/// true margin is proportional to a column denominator that can sit far
/// below f64 resolution, so the checks tolerate rounding-scale violations;
/// structural errors violate by many orders of magnitude more.
pub const CERT_CHECK_SLACK: f64 = 1e-12;

/// Schedules respecting a certificate must keep gaps at or above
/// `tau * (1 + TAU_SCHEDULE_MARGIN)`.
pub const TAU_SCHEDULE_MARGIN: f64 = 1e-6;

/// Lowest eigenvalue allowed for `-(A'Q + QA + 2 lambda Q)` when verifying
/// supplied or constructed Lyapunov data.
pub const LYAP_VERIFY_MIN_EIG: f64 = -1e-10;

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Default divergence cap as a multiple of the initial state norm.
pub const DIVERGENCE_FACTOR_DEFAULT: f64 = 1e6;

/// State magnitudes beyond this are recorded as divergence regardless of
/// the configured cap (guards against floating-point overflow).
pub const HARD_STATE_LIMIT: f64 = 1e300;

/// Default convergence threshold for trajectory classification.
pub const CONVERGE_THRESHOLD_DEFAULT: f64 = 1e-3;

/// Default horizon is `HORIZON_RATE_FACTOR / lambda_s` when decay rates are
/// available, else `HORIZON_FALLBACK` seconds.
pub const HORIZON_RATE_FACTOR: f64 = 50.0;
pub const HORIZON_FALLBACK: f64 = 10.0;

/// Default artificial-coordinate decay is this multiple of the fastest
/// known rate (or of `1 / epsilon` when no rates are available yet).
pub const AUGMENT_LAMBDA_FACTOR: f64 = 10.0;

/// Absolute slack for the interval envelope and event recursion checks on
/// witness samples.
pub const WITNESS_SLACK: f64 = 1e-7;

/// Relative increase tolerated between consecutive in-interval samples of
/// the combined witness energy (which is non-increasing in exact math).
pub const ENERGY_MONOTONE_REL: f64 = 1e-8;
