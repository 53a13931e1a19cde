//! Shared fixtures: the two worked 2x2 switching systems used across the
//! test suites, plus helpers for building specs in tests.

#![allow(dead_code)]

use hybrid_dwell::linalg::{spectral_abscissa, spectral_norm, Mat};
use hybrid_dwell::model::{build_permutation, HybridSystemSpec, JumpSpec, ModeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First worked example: two planar modes whose slow/fast roles swap at each
/// switch, state continuous across switches (identity jumps).
///
/// Mode 0 has flow [[-1, 0.5], [-1, -2]] with scales (slow, fast); mode 1 has
/// flow [[-2.5, -2], [3, 1]] with scales (fast, slow).
pub fn example_1(epsilon: f64) -> HybridSystemSpec {
    two_mode_swap(
        epsilon,
        Mat::from_row_slice(2, 2, &[-1.0, 0.5, -1.0, -2.0]),
        Mat::from_row_slice(2, 2, &[-2.5, -2.0, 3.0, 1.0]),
    )
}

/// Second worked example: same structure as the first but with stronger
/// cross-coupling, so the slow part contracts more slowly than the switches
/// expand it and a positive dwell time is required.
///
/// Mode 0 has flow [[-1, 0.5], [-3, -2]] with scales (slow, fast); mode 1 has
/// flow [[-2.5, -4], [1, 0.5]] with scales (fast, slow).
pub fn example_2(epsilon: f64) -> HybridSystemSpec {
    two_mode_swap(
        epsilon,
        Mat::from_row_slice(2, 2, &[-1.0, 0.5, -3.0, -2.0]),
        Mat::from_row_slice(2, 2, &[-2.5, -4.0, 1.0, 0.5]),
    )
}

fn two_mode_swap(epsilon: f64, flow0: Mat, flow1: Mat) -> HybridSystemSpec {
    HybridSystemSpec {
        epsilon,
        modes: vec![
            ModeSpec { flow: flow0, fast_mask: vec![false, true] },
            ModeSpec { flow: flow1, fast_mask: vec![true, false] },
        ],
        jumps: vec![
            JumpSpec { matrix: Mat::identity(2, 2), transitions: vec![(0, 1)] },
            JumpSpec { matrix: Mat::identity(2, 2), transitions: vec![(1, 0)] },
        ],
    }
}

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

fn rand_hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let raw = rand_mat(rng, n, n, 1.0);
    let shift =
        spectral_abscissa(&raw).expect("finite matrix").max(0.0) + margin + rng.gen_range(0.0..1.0);
    raw - Mat::identity(n, n) * shift
}

/// Deterministic generator of random specs whose slow and fast blocks are
/// Hurwitz by construction in every mode.
///
/// The blocks are drawn in slow-first coordinates: the fast block and the
/// Schur complement are shifted to be stably damped, the couplings are
/// moderate, and the top-left block is reconstructed so the Schur complement
/// comes out to the drawn value. Each mode gets its own interleaved
/// slow/fast layout (with common counts), and every ordered pair of distinct
/// modes is connected by a jump scaled to a subunit norm.
pub fn random_stable_spec(seed: u64) -> HybridSystemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_x = rng.gen_range(1..=3usize);
    let n_z = rng.gen_range(1..=3usize);
    let n_modes = rng.gen_range(2..=3usize);
    random_spec_from(&mut rng, n_x, n_z, n_modes)
}

/// Same construction as [`random_stable_spec`] but with exactly two modes.
pub fn random_two_mode_spec(seed: u64) -> HybridSystemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_x = rng.gen_range(1..=3usize);
    let n_z = rng.gen_range(1..=3usize);
    random_spec_from(&mut rng, n_x, n_z, 2)
}

fn random_spec_from(
    rng: &mut ChaCha8Rng,
    n_x: usize,
    n_z: usize,
    n_modes: usize,
) -> HybridSystemSpec {
    let n = n_x + n_z;

    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let mut mask = vec![false; n];
        let mut placed = 0;
        while placed < n_z {
            let k = rng.gen_range(0..n);
            if !mask[k] {
                mask[k] = true;
                placed += 1;
            }
        }
        let a22 = rand_hurwitz(rng, n_z, 1.5);
        let a12 = rand_mat(rng, n_x, n_z, 1.0);
        let a21 = rand_mat(rng, n_z, n_x, 1.0);
        let a0 = rand_hurwitz(rng, n_x, 1.0);
        let h = a22.clone().lu().solve(&a21).expect("fast block invertible");
        let a11 = &a0 + &a12 * &h;
        let mut slow_first = Mat::zeros(n, n);
        slow_first.view_mut((0, 0), (n_x, n_x)).copy_from(&a11);
        slow_first.view_mut((0, n_x), (n_x, n_z)).copy_from(&a12);
        slow_first.view_mut((n_x, 0), (n_z, n_x)).copy_from(&a21);
        slow_first.view_mut((n_x, n_x), (n_z, n_z)).copy_from(&a22);
        let s = build_permutation(&mask);
        let flow = s.transpose() * slow_first * s;
        modes.push(ModeSpec { flow, fast_mask: mask });
    }

    let mut jumps = Vec::new();
    for source in 0..n_modes {
        for target in 0..n_modes {
            if source == target {
                continue;
            }
            let raw = rand_mat(rng, n, n, 1.0);
            let norm = spectral_norm(&raw).expect("finite matrix");
            let scale = rng.gen_range(0.3..0.9);
            let matrix =
                if norm > 0.0 { raw * (scale / norm) } else { Mat::identity(n, n) * scale };
            jumps.push(JumpSpec { matrix, transitions: vec![(source, target)] });
        }
    }

    HybridSystemSpec { epsilon: 0.01, modes, jumps }
}

/// Deterministic generator of random specs whose per-mode slow and fast
/// counts differ, so the state dimension changes across events and the
/// system needs augmentation before any constant-dimension analysis.
///
/// Each mode draws its own counts in 1..=2, flows are Hurwitz-block built
/// as in [`random_stable_spec`], and every ordered mode pair gets a rectangular
/// jump of subunit spectral norm mapping the source dimension to the target
/// dimension.
pub fn random_varying_spec(seed: u64) -> HybridSystemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_modes = rng.gen_range(2..=3usize);
    let mut counts: Vec<(usize, usize)> = Vec::new();
    loop {
        counts.clear();
        for _ in 0..n_modes {
            counts.push((rng.gen_range(1..=2usize), rng.gen_range(1..=2usize)));
        }
        let constant = counts.iter().all(|c| c == &counts[0]);
        if !constant {
            break;
        }
    }

    let mut modes = Vec::with_capacity(n_modes);
    for &(n_x, n_z) in &counts {
        let n = n_x + n_z;
        let mut mask = vec![false; n];
        let mut placed = 0;
        while placed < n_z {
            let k = rng.gen_range(0..n);
            if !mask[k] {
                mask[k] = true;
                placed += 1;
            }
        }
        let a22 = rand_hurwitz(&mut rng, n_z, 1.5);
        let a12 = rand_mat(&mut rng, n_x, n_z, 1.0);
        let a21 = rand_mat(&mut rng, n_z, n_x, 1.0);
        let a0 = rand_hurwitz(&mut rng, n_x, 1.0);
        let h = a22.clone().lu().solve(&a21).expect("fast block invertible");
        let a11 = &a0 + &a12 * &h;
        let mut slow_first = Mat::zeros(n, n);
        slow_first.view_mut((0, 0), (n_x, n_x)).copy_from(&a11);
        slow_first.view_mut((0, n_x), (n_x, n_z)).copy_from(&a12);
        slow_first.view_mut((n_x, 0), (n_z, n_x)).copy_from(&a21);
        slow_first.view_mut((n_x, n_x), (n_z, n_z)).copy_from(&a22);
        let s = build_permutation(&mask);
        let flow = s.transpose() * slow_first * s;
        modes.push(ModeSpec { flow, fast_mask: mask });
    }

    let mut jumps = Vec::new();
    for source in 0..n_modes {
        for target in 0..n_modes {
            if source == target {
                continue;
            }
            let rows = counts[target].0 + counts[target].1;
            let cols = counts[source].0 + counts[source].1;
            let raw = rand_mat(&mut rng, rows, cols, 1.0);
            let norm = spectral_norm(&raw).expect("finite matrix");
            let scale = rng.gen_range(0.3..0.9);
            let matrix = if norm > 0.0 { raw * (scale / norm) } else { raw };
            jumps.push(JumpSpec { matrix, transitions: vec![(source, target)] });
        }
    }

    HybridSystemSpec { epsilon: 0.05, modes, jumps }
}
