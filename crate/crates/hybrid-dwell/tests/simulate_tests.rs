//! Trajectory simulation: exactness of the exponential stepping, event
//! sample bookkeeping, divergence handling, classification, and the witness
//! inequalities along certified runs.

mod common;

use std::collections::BTreeMap;

use common::{example_1, example_2};
use hybrid_dwell::certify::{build_lyapunov, closed_form_certificate, CertifyOptions};
use hybrid_dwell::decouple::build_decoupled;
use hybrid_dwell::linalg::{expm, Mat, Vector};
use hybrid_dwell::model::{
    augment, default_augment_lambda, reorder, EventSchedule, HybridDynamics, HybridSystemSpec,
    JumpSpec, ModeSpec, ScheduleEvent,
};
use hybrid_dwell::simulate::{
    classify, max_energy_increase, max_event_recursion_violation, max_fast_envelope_violation,
    simulate, simulate_spec, witnesses, Classification, Sample, SimError, SimOptions, Trajectory,
};
use hybrid_dwell::tol;

fn single_mode_spec(flow: Mat, fast_mask: Vec<bool>, epsilon: f64) -> HybridSystemSpec {
    HybridSystemSpec {
        epsilon,
        modes: vec![ModeSpec { flow, fast_mask }],
        jumps: vec![],
    }
}

fn single_event_schedule(horizon: f64) -> EventSchedule {
    EventSchedule::from_events(vec![ScheduleEvent { t: 0.0, mode: 0, jump: None }], horizon)
        .expect("valid schedule")
}

fn identity_jump_pair(epsilon: f64) -> HybridSystemSpec {
    let flow = Mat::from_row_slice(2, 2, &[-1.0, 0.5, -1.0, -2.0]);
    HybridSystemSpec {
        epsilon,
        modes: vec![
            ModeSpec { flow: flow.clone(), fast_mask: vec![false, true] },
            ModeSpec { flow, fast_mask: vec![false, true] },
        ],
        jumps: vec![
            JumpSpec { matrix: Mat::identity(2, 2), transitions: vec![(0, 1)] },
            JumpSpec { matrix: Mat::identity(2, 2), transitions: vec![(1, 0)] },
        ],
    }
}

fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn single_mode_flow_matches_the_matrix_exponential() {
    let spec = single_mode_spec(
        Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
        vec![false, true],
        0.5,
    );
    let dynamics = HybridDynamics::from_spec(&spec).expect("valid spec");
    let schedule = single_event_schedule(2.0);
    let options = SimOptions { sample_dt: 0.3, ..SimOptions::default() };
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let traj = simulate(&dynamics, &schedule, &options, &x0).expect("simulation runs");

    assert!(traj.diverged_at.is_none());
    let last = traj.samples.last().expect("samples recorded");
    assert_eq!(last.t, 2.0);
    let mut previous_norm = f64::INFINITY;
    for sample in &traj.samples {
        let exact = expm(&dynamics.generators[0], sample.t).expect("finite exponential") * &x0;
        assert!(
            rel_diff(&sample.state, &exact) < 1e-12,
            "state at t = {} drifted from the exponential",
            sample.t
        );
        assert!(sample.state.norm() <= previous_norm * (1.0 + 1e-14));
        previous_norm = sample.state.norm();
    }
}

#[test]
fn event_times_carry_exactly_one_pre_and_one_post_sample() {
    let spec = example_1(0.1);
    let schedule = EventSchedule::periodic(&spec, 0.25, 1.1, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![1.0, -1.0]);
    let options = SimOptions { sample_dt: 0.1, ..SimOptions::default() };
    let traj = simulate_spec(&spec, &schedule, &options, &x0).expect("simulation runs");

    assert!(!traj.samples[0].is_post_jump);
    assert_eq!(traj.samples[0].t, 0.0);
    for pair in traj.samples.windows(2) {
        assert!(pair[1].t >= pair[0].t, "sample times must be non-decreasing");
    }
    for event in schedule.events.iter().skip(1) {
        let at_event: Vec<&Sample> =
            traj.samples.iter().filter(|s| s.t == event.t).collect();
        assert_eq!(at_event.len(), 2, "event at t = {} must be sampled twice", event.t);
        assert!(!at_event[0].is_post_jump && at_event[1].is_post_jump);
        assert_eq!(at_event[1].mode, event.mode);
        assert_ne!(at_event[0].mode, event.mode, "these examples always switch modes");
    }
}

#[test]
fn state_dimension_follows_the_active_mode() {
    // Mode 0 is planar, mode 1 has an extra fast coordinate; rectangular
    // jump maps mediate the dimension change.
    let spec = HybridSystemSpec {
        epsilon: 0.2,
        modes: vec![
            ModeSpec {
                flow: Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.1, -2.0]),
                fast_mask: vec![false, true],
            },
            ModeSpec {
                flow: Mat::from_row_slice(3, 3, &[-1.0, 0.0, 0.1, 0.0, -2.0, 0.0, 0.2, 0.0, -3.0]),
                fast_mask: vec![false, true, true],
            },
        ],
        jumps: vec![
            JumpSpec {
                matrix: Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.0]),
                transitions: vec![(0, 1)],
            },
            JumpSpec {
                matrix: Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.3, 0.0, 1.0, 0.0]),
                transitions: vec![(1, 0)],
            },
        ],
    };
    let schedule = EventSchedule::periodic(&spec, 0.4, 1.5, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![1.0, 0.5]);
    let traj = simulate_spec(&spec, &schedule, &SimOptions::default(), &x0)
        .expect("simulation runs");
    for sample in &traj.samples {
        let want = if sample.mode == 0 { 2 } else { 3 };
        assert_eq!(sample.state.len(), want, "dimension at t = {}", sample.t);
    }
}

#[test]
fn halving_the_sample_step_leaves_common_states_unchanged() {
    let spec = example_1(1e-3);
    let schedule = EventSchedule::periodic(&spec, 7e-4, 0.05, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let coarse_opts = SimOptions { sample_dt: 1e-4, ..SimOptions::default() };
    let fine_opts = SimOptions { sample_dt: 5e-5, ..SimOptions::default() };
    let coarse = simulate_spec(&spec, &schedule, &coarse_opts, &x0).expect("runs");
    let fine = simulate_spec(&spec, &schedule, &fine_opts, &x0).expect("runs");

    let mut matched = 0usize;
    for sample in &coarse.samples {
        let twin = fine
            .samples
            .iter()
            .find(|s| s.t == sample.t && s.is_post_jump == sample.is_post_jump)
            .expect("coarse sample times are a subset of fine sample times");
        assert!(
            rel_diff(&sample.state, &twin.state) < 1e-10,
            "states at t = {} disagree across step sizes",
            sample.t
        );
        matched += 1;
    }
    assert!(matched > 100, "expected a substantial overlap, got {matched}");
    assert!(fine.samples.len() > coarse.samples.len());
}

#[test]
fn identity_jumps_keep_the_state_continuous() {
    let spec = identity_jump_pair(0.25);
    let schedule = EventSchedule::periodic(&spec, 0.3, 2.0, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![1.0, 2.0]);
    let traj = simulate_spec(&spec, &schedule, &SimOptions::default(), &x0)
        .expect("simulation runs");
    let mut events = 0usize;
    for pair in traj.samples.windows(2) {
        if pair[1].is_post_jump {
            assert_eq!(pair[0].state, pair[1].state, "identity jump must not move the state");
            events += 1;
        }
    }
    assert_eq!(events, schedule.events.len() - 1);
}

#[test]
fn example_1_converges_at_the_certified_dwell_time() {
    let spec = example_1(1e-3);
    let schedule = EventSchedule::periodic(&spec, 6.16e-4, 2.0, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let options = SimOptions { sample_dt: 1e-3, ..SimOptions::default() };
    let traj = simulate_spec(&spec, &schedule, &options, &x0).expect("simulation runs");
    assert!(traj.diverged_at.is_none());
    assert_eq!(classify(&traj, 2.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Converging);
}

#[test]
fn example_2_diverges_below_and_converges_above_the_dwell_threshold() {
    let spec = example_2(1e-3);
    let x0 = Vector::from_vec(vec![2.0, 1.0]);

    let fast = EventSchedule::periodic(&spec, 0.16, 12.0, 0).expect("valid schedule");
    let traj = simulate_spec(&spec, &fast, &SimOptions::default(), &x0).expect("runs");
    assert_eq!(classify(&traj, 12.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Diverging);
    let crossed = traj.diverged_at.expect("divergence threshold must be crossed");
    assert!(crossed > 5.0 && crossed < 12.0, "crossing at t = {crossed}");

    let slow = EventSchedule::periodic(&spec, 0.406, 40.0, 0).expect("valid schedule");
    let options = SimOptions { sample_dt: 0.02, ..SimOptions::default() };
    let traj = simulate_spec(&spec, &slow, &options, &x0).expect("runs");
    assert!(traj.diverged_at.is_none());
    assert_eq!(classify(&traj, 40.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Converging);
}

#[test]
fn zero_initial_state_classifies_as_converging() {
    let spec = example_1(1e-2);
    let schedule = EventSchedule::periodic(&spec, 0.05, 1.0, 0).expect("valid schedule");
    let traj = simulate_spec(&spec, &schedule, &SimOptions::default(), &Vector::zeros(2))
        .expect("simulation runs");
    assert!(traj.diverged_at.is_none());
    assert!(traj.samples.iter().all(|s| s.state.norm() == 0.0));
    assert_eq!(classify(&traj, 1.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Converging);
}

#[test]
fn divergence_is_recorded_in_the_trajectory_not_raised() {
    let spec = single_mode_spec(
        Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]),
        vec![false, true],
        0.5,
    );
    let schedule = single_event_schedule(12.0);
    let options = SimOptions { sample_dt: 0.1, ..SimOptions::default() };
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let traj = simulate_spec(&spec, &schedule, &options, &x0).expect("divergence is not an error");

    let crossed = traj.diverged_at.expect("growth crosses the divergence factor");
    // The unstable coordinate grows like e^{2t}: the factor 1e6 over the
    // initial norm is reached shortly after t = ln(1e6)/2.
    assert!(crossed > 6.0 && crossed < 8.0, "crossing at t = {crossed}");
    assert_eq!(traj.samples.last().expect("samples").t, 12.0, "run continues to the horizon");
    assert_eq!(classify(&traj, 12.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Diverging);
}

#[test]
fn overflowing_states_truncate_at_the_hard_limit() {
    let spec = single_mode_spec(
        Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]),
        vec![false, true],
        0.5,
    );
    let schedule = single_event_schedule(400.0);
    let options = SimOptions { sample_dt: 1.0, ..SimOptions::default() };
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let traj = simulate_spec(&spec, &schedule, &options, &x0).expect("overflow is not an error");

    assert!(traj.diverged_at.is_some());
    let last = traj.samples.last().expect("samples");
    assert!(last.t < 400.0, "simulation must stop before the horizon");
    assert!(
        traj.samples.iter().all(|s| s.state.iter().all(|v| v.is_finite())),
        "recorded states stay finite"
    );
    assert_eq!(classify(&traj, 400.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Diverging);
}

#[test]
fn bounded_non_decaying_trajectories_stay_undecided() {
    // With the fast row scaled by epsilon = 0.5, the generator is an exact
    // rotation: the norm neither decays nor grows.
    let spec = single_mode_spec(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -0.5, 0.0]),
        vec![false, true],
        0.5,
    );
    let schedule = single_event_schedule(5.0);
    let x0 = Vector::from_vec(vec![1.0, 0.0]);
    let traj = simulate_spec(&spec, &schedule, &SimOptions::default(), &x0).expect("runs");
    assert!(traj.diverged_at.is_none());
    assert_eq!(classify(&traj, 5.0, tol::CONVERGE_THRESHOLD_DEFAULT), Classification::Undecided);
}

#[test]
fn classification_requires_horizon_coverage() {
    let spec = example_1(1e-2);
    let schedule = EventSchedule::periodic(&spec, 0.05, 1.0, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let traj = simulate_spec(&spec, &schedule, &SimOptions::default(), &x0).expect("runs");
    assert_eq!(classify(&traj, 2.0, 0.9), Classification::Undecided);
}

#[test]
fn witness_values_reflect_the_weighted_decoupled_coordinates() {
    // Block-diagonal single mode: the coupling term vanishes, the slow
    // weight normalizes to the identity, and the fast weight is scalar one.
    let spec = single_mode_spec(
        Mat::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0]),
        vec![false, false, true],
        0.1,
    );
    let reordered = reorder(&spec).expect("constant structure");
    let decoupled = build_decoupled(&reordered).expect("invertible fast block");
    let lyap = build_lyapunov(&decoupled, &CertifyOptions::default()).expect("stable blocks");

    let on_sphere = |x1: f64, x2: f64, z: f64| Sample {
        t: 0.0,
        mode: 0,
        state: Vector::from_vec(vec![x1, x2, z]),
        is_post_jump: false,
    };
    let traj = Trajectory {
        samples: vec![
            on_sphere(1.0, 0.0, 0.0),
            on_sphere(0.6, 0.8, 0.0),
            on_sphere(0.0, 0.0, 3.0),
            on_sphere(0.0, 0.0, 0.0),
        ],
        diverged_at: None,
        initial_norm: 1.0,
    };
    let wits = witnesses(&traj, &reordered, &decoupled, &lyap.modes).expect("dimensions match");
    assert!((wits[0].w_s - 1.0).abs() < 1e-9, "unit slow state has unit witness");
    assert!((wits[1].w_s - 1.0).abs() < 1e-9);
    assert!(wits[0].w_f.abs() < 1e-12 && wits[1].w_f.abs() < 1e-12);
    assert!((wits[2].w_f - 3.0).abs() < 1e-9, "pure fast state scales linearly");
    assert!(wits[2].w_s.abs() < 1e-12);
    assert_eq!((wits[3].w_s, wits[3].w_f), (0.0, 0.0));
}

#[test]
fn witness_inequalities_hold_along_a_certified_run() {
    let epsilon = 1e-3;
    let spec = example_1(epsilon);
    let reordered = reorder(&spec).expect("constant structure");
    let decoupled = build_decoupled(&reordered).expect("invertible fast block");
    let lyap = build_lyapunov(&decoupled, &CertifyOptions::default()).expect("stable blocks");
    let cert = closed_form_certificate(&lyap, epsilon).expect("certificate exists");

    let tau = cert.tau_closed_form * 1.05;
    let schedule = EventSchedule::periodic(&spec, tau, 1.0, 0).expect("valid schedule");
    let options = SimOptions { sample_dt: 2e-4, ..SimOptions::default() };
    let x0 = Vector::from_vec(vec![2.0, 1.0]);
    let traj = simulate_spec(&spec, &schedule, &options, &x0).expect("runs");
    let wits = witnesses(&traj, &reordered, &decoupled, &lyap.modes).expect("dimensions match");

    let energy = max_energy_increase(&traj.samples, &wits);
    assert!(
        energy <= tol::ENERGY_MONOTONE_REL,
        "combined energy increased by a relative {energy}"
    );
    let envelope =
        max_fast_envelope_violation(&traj.samples, &wits, lyap.lambda_f, lyap.beta1, epsilon);
    assert!(envelope <= tol::WITNESS_SLACK, "fast envelope violated by {envelope}");
    let recursion = max_event_recursion_violation(&traj.samples, &wits, &lyap, epsilon)
        .expect("admissible epsilon");
    assert!(recursion <= tol::WITNESS_SLACK, "event recursion violated by {recursion}");
}

#[test]
fn original_and_reordered_simulations_agree_through_the_permutations() {
    let spec = example_1(1e-2);
    let reordered = reorder(&spec).expect("constant structure");
    let schedule = EventSchedule::periodic(&spec, 0.07, 1.0, 0).expect("valid schedule");
    let options = SimOptions { sample_dt: 0.01, ..SimOptions::default() };
    let x0 = Vector::from_vec(vec![2.0, 1.0]);

    let original = simulate_spec(&spec, &schedule, &options, &x0).expect("runs");
    let x0_reordered = &reordered.modes[0].s * &x0;
    let transformed = simulate(&reordered.dynamics(), &schedule, &options, &x0_reordered)
        .expect("runs");

    assert_eq!(original.samples.len(), transformed.samples.len());
    for (a, b) in original.samples.iter().zip(&transformed.samples) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.mode, b.mode);
        let mapped = &reordered.modes[a.mode].s * &a.state;
        assert!(
            (mapped - &b.state).norm() <= tol::SIM_AGREEMENT * b.state.norm().max(1.0),
            "frames disagree at t = {}",
            a.t
        );
    }
}

#[test]
fn augmentation_leaves_original_coordinates_untouched() {
    // Mode 1 has no fast coordinate and two slow ones, so augmentation pads
    // mode 0 with a slow coordinate and mode 1 with a fast one.
    let spec = HybridSystemSpec {
        epsilon: 0.05,
        modes: vec![
            ModeSpec {
                flow: Mat::from_row_slice(2, 2, &[-1.0, 0.3, 0.2, -3.0]),
                fast_mask: vec![false, true],
            },
            ModeSpec {
                flow: Mat::from_row_slice(2, 2, &[-0.5, 0.1, 0.4, -0.8]),
                fast_mask: vec![false, false],
            },
        ],
        jumps: vec![
            JumpSpec {
                matrix: Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
                transitions: vec![(0, 1)],
            },
            JumpSpec {
                matrix: Mat::from_row_slice(2, 2, &[0.7, 0.0, 0.2, 0.6]),
                transitions: vec![(1, 0)],
            },
        ],
    };
    let lambda = default_augment_lambda(spec.epsilon, None);
    let augmented = augment(&spec, lambda).expect("augmentable");
    assert_eq!(augmented.modes[0].flow.nrows(), 3);

    let events = vec![
        ScheduleEvent { t: 0.0, mode: 0, jump: None },
        ScheduleEvent { t: 0.4, mode: 1, jump: Some(0) },
        ScheduleEvent { t: 0.9, mode: 0, jump: Some(1) },
        ScheduleEvent { t: 1.3, mode: 1, jump: Some(0) },
    ];
    let schedule = EventSchedule::from_events(events, 1.8).expect("valid schedule");
    let x0 = Vector::from_vec(vec![1.5, -0.7]);
    let x0_aug = Vector::from_vec(vec![1.5, -0.7, 0.0]);

    let original = simulate_spec(&spec, &schedule, &SimOptions::default(), &x0).expect("runs");
    let padded = simulate_spec(&augmented, &schedule, &SimOptions::default(), &x0_aug)
        .expect("runs");

    assert_eq!(original.samples.len(), padded.samples.len());
    for (a, b) in original.samples.iter().zip(&padded.samples) {
        assert_eq!(a.t, b.t);
        let restricted = b.state.rows(0, 2).into_owned();
        assert!(
            (&restricted - &a.state).norm() <= tol::SIM_AGREEMENT * a.state.norm().max(1.0),
            "original coordinates disturbed at t = {}",
            a.t
        );
        assert_eq!(b.state[2], 0.0, "artificial coordinate must stay exactly zero");
    }
}

#[test]
fn incompatible_inputs_are_rejected_with_precise_errors() {
    let spec = example_1(1e-2);
    let dynamics = HybridDynamics::from_spec(&spec).expect("valid spec");
    let schedule = EventSchedule::periodic(&spec, 0.1, 1.0, 0).expect("valid schedule");
    let x0 = Vector::from_vec(vec![2.0, 1.0]);

    for bad_dt in [0.0, -0.5, f64::NAN] {
        let options = SimOptions { sample_dt: bad_dt, ..SimOptions::default() };
        let err = simulate(&dynamics, &schedule, &options, &x0).expect_err("bad step");
        assert!(matches!(err, SimError::BadSampleStep(_)));
    }

    let ghost_mode = EventSchedule::from_events(
        vec![ScheduleEvent { t: 0.0, mode: 7, jump: None }],
        1.0,
    )
    .expect("structurally valid");
    assert_eq!(
        simulate(&dynamics, &ghost_mode, &SimOptions::default(), &x0),
        Err(SimError::UnknownMode { index: 0, mode: 7, count: 2 })
    );

    let ghost_jump = EventSchedule::from_events(
        vec![
            ScheduleEvent { t: 0.0, mode: 0, jump: None },
            ScheduleEvent { t: 0.5, mode: 1, jump: Some(5) },
        ],
        1.0,
    )
    .expect("structurally valid");
    assert_eq!(
        simulate(&dynamics, &ghost_jump, &SimOptions::default(), &x0),
        Err(SimError::MissingJumpMap { index: 1, jump: 5, from: 0, to: 1 })
    );

    assert_eq!(
        simulate(&dynamics, &schedule, &SimOptions::default(), &Vector::zeros(3)),
        Err(SimError::StateDimension { mode: 0, got: 3, want: 2 })
    );

    let mut mangled = HybridDynamics::from_spec(&spec).expect("valid spec");
    let mut jumps = BTreeMap::new();
    jumps.insert((0usize, 0usize, 1usize), Mat::zeros(3, 2));
    jumps.insert((1usize, 1usize, 0usize), Mat::identity(2, 2));
    mangled.jumps = jumps;
    assert_eq!(
        simulate(&mangled, &schedule, &SimOptions::default(), &x0),
        Err(SimError::JumpShape { index: 1, rows: 3, cols: 2, want_rows: 2, want_cols: 2 })
    );
}
