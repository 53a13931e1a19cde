//! Per-mode change of variables that decouples slow and fast parts.
//!
//! In each reordered mode the substitution `y = z + h x` with
//! `h = A22^{-1} A21` (applied by `P = [[I, 0], [h, I]]`) turns the
//! `(x, z)` dynamics into a block-triangular-plus-perturbation form
//!
//! ```text
//! dx/dt = A0 x + B1 y
//! eps dy/dt = (A22 + eps B3) y + eps B2 x
//! ```
//!
//! with `A0 = A11 - A12 h` (the Schur complement of `A22`), `B1 = A12`,
//! `B2 = h A0`, and `B3 = h A12`. Jumps become `R = P_target J P_source^{-1}`
//! with equally explicit blocks. The slow part alone,
//! `dx/dt = A0 x` with jumps `R11`, is the reduced-order model.

use std::collections::BTreeMap;

use crate::linalg::{LinalgError, Mat};
use crate::model::{HybridDynamics, ReorderedSystem};
use crate::tol;

/// Errors raised while building the decoupled form.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecoupleError {
    #[error(
        "mode {mode}: fast-fast block is numerically singular \
         (|det| = {det:.3e} against scale {scale:.3e}); cannot decouple"
    )]
    SingularA22 { mode: usize, det: f64, scale: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

/// Invertibility report for one mode's fast-fast block.
#[derive(Debug, Clone, PartialEq)]
pub struct A22Report {
    /// Mode index.
    pub mode: usize,
    /// Absolute determinant of `A22`.
    pub abs_det: f64,
    /// Hadamard scale (product of row norms); `abs_det / scale` is a
    /// size-independent singularity measure in [0, 1].
    pub scale: f64,
    /// Ratio of largest to smallest singular value; large values warn that
    /// the decoupling, while defined, amplifies roundoff.
    pub condition: f64,
}

/// One mode after the change of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledMode {
    /// Coupling solve `h = A22^{-1} A21`, shape `n_z x n_x`.
    pub h: Mat,
    /// Change of variables `(x, y) = P (x, z)`, `P = [[I, 0], [h, I]]`.
    pub p: Mat,
    /// Inverse change of variables, `[[I, 0], [-h, I]]`.
    pub p_inv: Mat,
    /// Slow flow `A0 = A11 - A12 h`.
    pub a0: Mat,
    /// Fast-to-slow coupling `B1 = A12`.
    pub b1: Mat,
    /// Slow-to-fast coupling `B2 = h A0`.
    pub b2: Mat,
    /// Fast self-coupling correction `B3 = h A12`.
    pub b3: Mat,
    /// Fast-fast block carried over from the reordered mode.
    pub a22: Mat,
}

/// Jump blocks in the decoupled frame for one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBlocks {
    /// Slow-to-slow reset gain.
    pub r11: Mat,
    /// Fast-to-slow reset gain.
    pub r12: Mat,
    /// Slow-to-fast reset gain.
    pub r21: Mat,
    /// Fast-to-fast reset gain.
    pub r22: Mat,
}

impl TransitionBlocks {
    /// The four blocks assembled into the full `(x, y)` jump map.
    pub fn full(&self) -> Mat {
        let n_x = self.r11.nrows();
        let n_z = self.r21.nrows();
        let mut r = Mat::zeros(n_x + n_z, n_x + n_z);
        r.view_mut((0, 0), (n_x, self.r11.ncols())).copy_from(&self.r11);
        r.view_mut((0, self.r11.ncols()), (n_x, self.r12.ncols())).copy_from(&self.r12);
        r.view_mut((n_x, 0), (n_z, self.r21.ncols())).copy_from(&self.r21);
        r.view_mut((n_x, self.r21.ncols()), (n_z, self.r22.ncols())).copy_from(&self.r22);
        r
    }
}

/// The fully decoupled system: per-mode blocks plus per-transition resets.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledSystem {
    /// Time-scale ratio carried over.
    pub epsilon: f64,
    /// Slow dimension.
    pub n_x: usize,
    /// Fast dimension.
    pub n_z: usize,
    /// Per-mode decoupled blocks.
    pub modes: Vec<DecoupledMode>,
    /// Per-transition reset blocks keyed by
    /// `(source mode, jump index, target mode)`.
    pub transitions: BTreeMap<(usize, usize, usize), TransitionBlocks>,
}

/// Checks every mode's fast-fast block for invertibility.
///
/// Returns one report per mode when all blocks are invertible; fails with the
/// first numerically singular block. Near-singular blocks pass but carry a
/// large condition number in their report.
pub fn check_a22(reordered: &ReorderedSystem) -> Result<Vec<A22Report>, DecoupleError> {
    let mut reports = Vec::with_capacity(reordered.modes.len());
    for (mode, m) in reordered.modes.iter().enumerate() {
        let a22 = m.a22();
        let abs_det = a22.clone().lu().determinant().abs();
        let scale: f64 = (0..a22.nrows()).map(|r| a22.row(r).norm()).product();
        if scale == 0.0 || abs_det < tol::SINGULAR_DET_REL * scale {
            return Err(DecoupleError::SingularA22 { mode, det: abs_det, scale });
        }
        let svd = a22
            .clone()
            .try_svd(false, false, tol::EIG_EPS, tol::EIG_MAX_ITER)
            .ok_or(LinalgError::EigenFailed(tol::EIG_MAX_ITER))?;
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
        reports.push(A22Report { mode, abs_det, scale, condition });
    }
    Ok(reports)
}

/// Builds the decoupled system from a reordered one.
pub fn build_decoupled(reordered: &ReorderedSystem) -> Result<DecoupledSystem, DecoupleError> {
    check_a22(reordered)?;
    let n_x = reordered.n_x;
    let n_z = reordered.n_z;
    let mut modes = Vec::with_capacity(reordered.modes.len());
    for (mode, m) in reordered.modes.iter().enumerate() {
        let a22 = m.a22();
        let lu = a22.clone().lu();
        let h = lu.solve(&m.a21()).ok_or(DecoupleError::SingularA22 {
            mode,
            det: 0.0,
            scale: 1.0,
        })?;
        let mut p = Mat::identity(n_x + n_z, n_x + n_z);
        p.view_mut((n_x, 0), (n_z, n_x)).copy_from(&h);
        let mut p_inv = Mat::identity(n_x + n_z, n_x + n_z);
        p_inv.view_mut((n_x, 0), (n_z, n_x)).copy_from(&(-&h));
        let b1 = m.a12();
        let a0 = m.a11() - &b1 * &h;
        let b2 = &h * &a0;
        let b3 = &h * &b1;
        modes.push(DecoupledMode { h, p, p_inv, a0, b1, b2, b3, a22 });
    }
    let mut transitions = BTreeMap::new();
    for (&(source, jump, target), j) in &reordered.jumps {
        let h_src = &modes[source].h;
        let h_tgt = &modes[target].h;
        let j11 = j.view((0, 0), (n_x, n_x)).into_owned();
        let j12 = j.view((0, n_x), (n_x, n_z)).into_owned();
        let j21 = j.view((n_x, 0), (n_z, n_x)).into_owned();
        let j22 = j.view((n_x, n_x), (n_z, n_z)).into_owned();
        let r11 = &j11 - &j12 * h_src;
        let r12 = j12.clone();
        let r21 = h_tgt * &r11 + &j21 - &j22 * h_src;
        let r22 = h_tgt * &j12 + &j22;
        transitions.insert((source, jump, target), TransitionBlocks { r11, r12, r21, r22 });
    }
    Ok(DecoupledSystem { epsilon: reordered.epsilon, n_x, n_z, modes, transitions })
}

impl DecoupledSystem {
    /// Dynamics of the `(x, y)` variables, with the time scaling folded in:
    /// mode `i` evolves as
    /// `d/dt (x, y) = [[A0, B1], [B2, A22/eps + B3]] (x, y)` and transitions
    /// apply the assembled reset blocks.
    pub fn dynamics(&self) -> HybridDynamics {
        let n = self.n_x + self.n_z;
        let generators = self
            .modes
            .iter()
            .map(|m| {
                let mut g = Mat::zeros(n, n);
                g.view_mut((0, 0), (self.n_x, self.n_x)).copy_from(&m.a0);
                g.view_mut((0, self.n_x), (self.n_x, self.n_z)).copy_from(&m.b1);
                g.view_mut((self.n_x, 0), (self.n_z, self.n_x)).copy_from(&m.b2);
                g.view_mut((self.n_x, self.n_x), (self.n_z, self.n_z))
                    .copy_from(&(&m.a22 / self.epsilon + &m.b3));
                g
            })
            .collect();
        let jumps = self
            .transitions
            .iter()
            .map(|(&key, blocks)| (key, blocks.full()))
            .collect();
        HybridDynamics { generators, jumps }
    }

    /// The reduced-order model over the slow variables alone:
    /// `dx/dt = A0 x` with jumps `x -> R11 x`.
    pub fn reduced_order_model(&self) -> HybridDynamics {
        let generators = self.modes.iter().map(|m| m.a0.clone()).collect();
        let jumps = self
            .transitions
            .iter()
            .map(|(&key, blocks)| (key, blocks.r11.clone()))
            .collect();
        HybridDynamics { generators, jumps }
    }
}
