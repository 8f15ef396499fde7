//! Release gates for the whole stack. Each test guards one criterion and
//! prints a PASS line with the measured numbers, so `--nocapture` doubles
//! as a release report. Budgets and tolerances are pinned as constants.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use majordomo::executor::{Executor, Outcome};
use majordomo::fixtures::fixtures_root;
use majordomo::grammar::{frame_to_goal, GrammarSpec};
use majordomo::hallway::{
    run_batch, run_trial, CorridorSpec, HumanModel, SignalPolicy, TrialOutcome,
};
use majordomo::hfsm::{Machine, MachineDefinition};
use majordomo::planner;
use majordomo::prism::{
    annotate_detections, estimate_homography, CameraIntrinsics, CameraMount, Detection,
    DetectionFile, RobotPose, SignText, VerbatimExtractor,
};
use majordomo::scenario::run_scenario;
use majordomo::sim::{SimWorld, WorldSpec};
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const ROUNDTRIP_PAIRS: u64 = 10_000;
const ROUNDTRIP_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_WORLDS: u64 = 200;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const ORACLE_COST_TOL: f64 = 1e-6;
const POSE_CASES: u64 = 100;
const POSE_BUDGET: Duration = Duration::from_secs(5);
const POSE_TOL_M: f64 = 1e-6;
const POSE_TOL_RAD: f64 = 1e-6;
const POSE_TOL_RMS_PX: f64 = 1e-9;
const HALLWAY_N: u64 = 10_000;
const HALLWAY_RATE_TOL: f64 = 0.01;
const HALLWAY_GRID_N: u64 = 5_000;
const HALLWAY_TICKS: usize = 50_000;
const HALLWAY_BUDGET: Duration = Duration::from_secs(30);
const MACHINE_BUDGET: Duration = Duration::from_secs(5);

fn budget(name: &str, elapsed: Duration, limit: Duration) {
    assert!(
        elapsed <= limit,
        "{name} took {elapsed:.2?}, over its {limit:.2?} budget"
    );
}

#[test]
fn roundtrip_every_generated_command_parses_back_identically() {
    let grammar = GrammarSpec::from_file(fixtures_root().join("grammar.json")).unwrap();
    let start = Instant::now();
    for seed in 0..ROUNDTRIP_PAIRS {
        let (utterance, frame) = grammar.generate(seed);
        let reparsed = grammar
            .parse(&utterance)
            .unwrap_or_else(|e| panic!("seed {seed}: {utterance:?} failed to parse: {e}"));
        assert_eq!(reparsed, frame, "seed {seed}: {utterance:?} parsed differently");
    }
    let elapsed = start.elapsed();
    budget("round-trip", elapsed, ROUNDTRIP_BUDGET);
    println!("PASS [1/7] grammar round-trip: {ROUNDTRIP_PAIRS} pairs identical in {elapsed:.2?}");
}

#[test]
fn planner_cost_matches_an_independent_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let start = Instant::now();
    let mut solved = 0u64;
    let mut unsolvable = 0u64;
    for case in 0..ORACLE_WORLDS {
        let spec = common::random_world(&mut rng);
        let goal = common::random_goal(&mut rng, &spec);
        spec.validate().expect("generated worlds are valid");
        let kb = spec.initial_kb().expect("generated worlds load");
        let planned = match planner::plan(&kb, &goal) {
            Ok(p) => Some(p.cost),
            Err(planner::PlanError::NoPlan) => None,
            Err(e) => panic!("case {case}: unexpected planner error {e}"),
        };
        let oracle = common::oracle_cost(&spec, &goal);
        match (planned, oracle) {
            (Some(a), Some(b)) => {
                assert!(
                    (a - b).abs() < ORACLE_COST_TOL,
                    "case {case}: planner {a} vs oracle {b} for {goal} in {spec:#?}"
                );
                solved += 1;
            }
            (None, None) => unsolvable += 1,
            (a, b) => panic!("case {case}: planner {a:?} vs oracle {b:?} for {goal}"),
        }
    }
    let elapsed = start.elapsed();
    budget("planner oracle", elapsed, ORACLE_BUDGET);
    println!(
        "PASS [2/7] planner equivalence: {ORACLE_WORLDS} worlds ({solved} solvable, \
         {unsolvable} agreed unsolvable) in {elapsed:.2?}"
    );
}

/// The apartment fetch story: the operator claims there is an apple in the
/// kitchen, and the robot sweeps kitchen surfaces cheapest-first.
#[test]
fn hidden_object_search_refutes_exactly_the_cheaper_guesses() {
    let root = fixtures_root();
    let grammar = GrammarSpec::from_file(root.join("grammar.json")).unwrap();
    let base = WorldSpec::from_file(root.join("worlds/demo_apartment.json")).unwrap();
    // kitchen placements by travel cost from the start: counter 4 m,
    // kitchen-table 5 m, cupboard 6 m
    let ladder = ["counter", "kitchen-table", "cupboard"];

    let run = |spec: &WorldSpec| {
        let mut kb = spec.initial_kb().unwrap();
        let mut sim = SimWorld::new(spec);
        let frame = grammar.parse("bring me an apple from the kitchen").unwrap();
        let goal = frame_to_goal(&frame, &mut kb).unwrap();
        let mut executor = Executor::new();
        executor.execute(&goal, &mut kb, &mut sim)
    };

    for (i, spot) in ladder.iter().enumerate() {
        let k = i + 1;
        let mut spec = base.clone();
        spec.objects
            .iter_mut()
            .find(|o| o.id == "apple-1")
            .unwrap()
            .true_location = spot.to_string();
        let first = run(&spec);
        assert_eq!(first.outcome, Outcome::Succeeded, "k={k}: {:#?}", first.log);
        assert_eq!(first.plans_made, k, "k={k} should take {k} plans");
        assert_eq!(first.refutations, k - 1, "k={k} should refute {} guesses", k - 1);
        let second = run(&spec);
        assert_eq!(first.log, second.log, "k={k}: reruns must log identically");
    }

    let mut gone = base.clone();
    gone.objects.retain(|o| o.id != "apple-1");
    let result = run(&gone);
    let Outcome::Diagnosis(report) = &result.outcome else {
        panic!("no-apple world should end in a diagnosis, got {:?}", result.outcome);
    };
    assert_eq!(report.conclusion, "invalid");
    assert_eq!(result.refutations, 3, "all three kitchen guesses must be refuted");
    println!(
        "PASS [3/7] open-world search: k∈{{1,2,3}} ladders exact, empty kitchen diagnosed invalid"
    );
}

fn rot_z(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a).into_inner()
}

fn rot_x(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), a).into_inner()
}

#[test]
fn noiseless_pose_recovery_is_exact_to_tolerance() {
    let intrinsics = CameraIntrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0 };
    let k = intrinsics.matrix();
    let model: Vec<[f64; 2]> =
        vec![[-0.15, -0.1], [0.15, -0.1], [0.15, 0.1], [-0.15, 0.1], [0.0, -0.1], [0.0, 0.1]];
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let start = Instant::now();

    for case in 0..POSE_CASES {
        // ground truth: a sign pose in the camera frame and a robot pose
        let rot_cp = Rotation3::from_euler_angles(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
        .into_inner();
        let t_cp = Vector3::new(
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.3..0.3),
            rng.random_range(1.0..4.0),
        );
        let pose = RobotPose {
            x: rng.random_range(-5.0..5.0),
            y: rng.random_range(-5.0..5.0),
            theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
        let mount = CameraMount {
            height: rng.random_range(0.5..1.6),
            pitch: rng.random_range(-0.3..0.5),
        };

        // project the model through the ground-truth homography
        let h_true = k * Matrix3::from_columns(&[
            rot_cp.column(0).into_owned(),
            rot_cp.column(1).into_owned(),
            t_cp,
        ]);
        let image: Vec<[f64; 2]> = model
            .iter()
            .map(|&[mx, my]| {
                let v = h_true * Vector3::new(mx, my, 1.0);
                [v.x / v.z, v.y / v.z]
            })
            .collect();

        let file = DetectionFile {
            camera: intrinsics,
            mount,
            robot_pose: pose,
            detections: vec![Detection {
                class: "placard".into(),
                model_points: model.clone(),
                image_points: image.clone(),
                text: Some(SignText::Text { content: format!("case {case}") }),
            }],
        };
        let outcome = annotate_detections(&file, &VerbatimExtractor);
        assert!(outcome.skipped.is_empty(), "case {case}: {:?}", outcome.skipped);
        let annotation = &outcome.annotations[0];
        assert!(
            annotation.residual_px < POSE_TOL_RMS_PX,
            "case {case}: rms {} px",
            annotation.residual_px
        );

        // independent expectation: compose the frames by hand
        let align = Matrix3::from_columns(&[
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
        ]);
        let r_mc = rot_z(pose.theta) * align * rot_x(-mount.pitch);
        let expected_p = r_mc * t_cp + Vector3::new(pose.x, pose.y, mount.height);
        let expected_n = r_mc * (rot_cp * Vector3::new(0.0, 0.0, -1.0));
        let expected_theta = expected_n.y.atan2(expected_n.x);

        let dx = annotation.x - expected_p.x;
        let dy = annotation.y - expected_p.y;
        assert!(
            dx.hypot(dy) < POSE_TOL_M,
            "case {case}: position off by {} m",
            dx.hypot(dy)
        );
        let mut dth = (annotation.theta - expected_theta).abs();
        if dth > std::f64::consts::PI {
            dth = std::f64::consts::TAU - dth;
        }
        assert!(dth < POSE_TOL_RAD, "case {case}: heading off by {dth} rad");
    }

    // collinear model points cannot pin down a plane
    let collinear: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 0.05, 0.0]).collect();
    let image: Vec<[f64; 2]> = collinear.iter().map(|&[x, _]| [100.0 + 400.0 * x, 200.0]).collect();
    assert!(
        estimate_homography(&collinear, &image).is_err(),
        "collinear correspondences must be rejected"
    );

    let elapsed = start.elapsed();
    budget("pose recovery", elapsed, POSE_BUDGET);
    println!(
        "PASS [4/7] pose recovery: {POSE_CASES} noiseless poses within {POSE_TOL_M} m / \
         {POSE_TOL_RAD} rad, rms < {POSE_TOL_RMS_PX} px, collinear rejected, in {elapsed:.2?}"
    );
}

#[test]
fn hallway_rates_calibrate_and_never_move_after_a_full_stop() {
    let corridor = CorridorSpec::default();
    let start = Instant::now();

    // calibration: a barely-understood signal vs. one taught by demonstration
    let signal = run_batch(
        &corridor,
        &HumanModel::with_p_comply(0.10),
        SignalPolicy::TurnSignal,
        HALLWAY_N,
        42,
    )
    .unwrap();
    assert!(
        (signal.rate - 0.90).abs() <= HALLWAY_RATE_TOL,
        "turn-signal conflict rate {} should be 0.90 ± {HALLWAY_RATE_TOL}",
        signal.rate
    );
    let demo = run_batch(
        &corridor,
        &HumanModel::with_p_comply(0.80),
        SignalPolicy::TurnSignalWithPassiveDemo,
        HALLWAY_N,
        43,
    )
    .unwrap();
    assert!(
        (demo.rate - 0.20).abs() <= HALLWAY_RATE_TOL,
        "demo conflict rate {} should be 0.20 ± {HALLWAY_RATE_TOL}",
        demo.rate
    );

    // monotonicity over the compliance grid (shared seeds couple the draws)
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut previous = f64::INFINITY;
    let mut rates = Vec::new();
    for p in grid {
        let report = run_batch(
            &corridor,
            &HumanModel::with_p_comply(p),
            SignalPolicy::TurnSignal,
            HALLWAY_GRID_N,
            7,
        )
        .unwrap();
        assert!(
            report.rate <= previous,
            "conflict rate must not rise with compliance: {rates:?} then {}",
            report.rate
        );
        previous = report.rate;
        rates.push(report.rate);
    }

    // once stopped, the robot must hold still for the rest of the trial
    let mut ticks = 0usize;
    let mut stopped_trials = 0u64;
    let mut seed = 0u64;
    while ticks < HALLWAY_TICKS {
        for p in [0.0, 1.0] {
            let trial: TrialOutcome = run_trial(
                &corridor,
                &HumanModel::with_p_comply(p),
                SignalPolicy::TurnSignal,
                seed,
            )
            .unwrap();
            ticks += trial.trace.len();
            if let Some(stop) = trial.full_stop_tick {
                stopped_trials += 1;
                let frozen = trial
                    .trace
                    .iter()
                    .find(|t| t.robot_stopped)
                    .expect("stop tick implies a stopped trace entry");
                for t in trial.trace.iter().filter(|t| t.t >= frozen.t) {
                    assert!(
                        t.robot_x == frozen.robot_x && t.robot_y == frozen.robot_y,
                        "seed {seed}: robot moved after stopping at tick {stop}"
                    );
                }
            }
            seed += 1;
        }
    }
    assert!(stopped_trials > 0, "the sample must include full stops");

    let elapsed = start.elapsed();
    budget("hallway", elapsed, HALLWAY_BUDGET);
    println!(
        "PASS [5/7] hallway: rates {:.4}/{:.4} within ±{HALLWAY_RATE_TOL}, grid {rates:?} \
         monotone, {ticks} ticks with no post-stop motion ({stopped_trials} stops), in {elapsed:.2?}",
        signal.rate, demo.rate
    );
}

/// Walk one machine level by the active path prefix.
fn definition_at<'a>(def: &'a MachineDefinition, path: &[String]) -> &'a MachineDefinition {
    let mut m = def;
    for name in path {
        m = m
            .states
            .iter()
            .find(|s| s.name == *name)
            .and_then(|s| s.machine.as_deref())
            .expect("path prefix descends through composites");
    }
    m
}

fn is_terminal(def: &MachineDefinition, path: &[String]) -> bool {
    let leaf = definition_at(def, &path[..path.len() - 1]);
    leaf.states
        .iter()
        .find(|s| s.name == *path.last().unwrap())
        .is_some_and(|s| s.terminal.is_some())
}

fn lands_on_recovery(def: &MachineDefinition, path: &[String]) -> bool {
    (0..path.len()).any(|level| {
        definition_at(def, &path[..level]).recovery.as_deref() == Some(path[level].as_str())
    })
}

#[test]
fn every_bundled_machine_recovers_from_errors_in_one_step() {
    let start = Instant::now();
    let dir = fixtures_root().join("machines");
    let mut checked = 0u64;
    let mut configs_total = 0u64;
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    assert!(!entries.is_empty());

    for path in entries {
        let def = MachineDefinition::from_file(&path).unwrap();
        assert!(def.validate().is_empty(), "{}: must validate", path.display());

        // collect every event any machine in the tree declares
        fn alphabet(def: &MachineDefinition, into: &mut BTreeSet<String>) {
            into.extend(def.events.iter().cloned());
            for s in &def.states {
                if let Some(child) = &s.machine {
                    alphabet(child, into);
                }
            }
        }
        let mut events = BTreeSet::new();
        alphabet(&def, &mut events);
        events.insert("error".to_string());

        // breadth-first closure over reachable configurations
        let mut machine = Machine::new(def.clone()).unwrap();
        machine.reset().unwrap();
        let mut frontier = vec![machine];
        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        seen.insert(frontier[0].active_path().to_vec());
        let mut non_terminal = 0u64;

        while let Some(m) = frontier.pop() {
            let path_here = m.active_path().to_vec();
            if is_terminal(&def, &path_here) {
                continue;
            }
            non_terminal += 1;

            // the gate itself: one injected error must land on a recovery state
            let mut probe = m.clone();
            probe.step("error").unwrap();
            assert!(
                lands_on_recovery(&def, probe.active_path()),
                "{}: error in {:?} landed on {:?}, not a recovery state",
                path.display(),
                path_here,
                probe.active_path()
            );

            for event in &events {
                let mut next = m.clone();
                if next.step(event).is_err() {
                    continue; // undeclared for this machine tree
                }
                if seen.insert(next.active_path().to_vec()) {
                    frontier.push(next);
                }
            }
        }
        configs_total += non_terminal;
        checked += 1;
    }

    let elapsed = start.elapsed();
    budget("machine safety", elapsed, MACHINE_BUDGET);
    println!(
        "PASS [6/7] machine safety: {checked} machines, {configs_total} reachable \
         non-terminal configurations all recover in one step, in {elapsed:.2?}"
    );
}

#[test]
fn every_bundled_scenario_logs_identically_across_runs() {
    let dir = fixtures_root().join("scenarios");
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    assert!(!entries.is_empty());
    let mut bytes_total = 0usize;
    for path in &entries {
        let first = run_scenario(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let second = run_scenario(path).unwrap();
        assert_eq!(first.status, second.status, "{}", path.display());
        assert_eq!(
            first.log_jsonl().into_bytes(),
            second.log_jsonl().into_bytes(),
            "{}: logs differ between runs",
            path.display()
        );
        bytes_total += first.log_jsonl().len();
    }
    println!(
        "PASS [7/7] determinism: {} scenarios, {bytes_total} log bytes byte-identical twice",
        entries.len()
    );
}
