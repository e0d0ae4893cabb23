use std::sync::OnceLock;

use koopman_esc::experiments::{
    self, compute_metrics, trajectory_spec, Cost, CostMode, MetricsConfig, RunConfig, SweepConfig,
    TrainingConfig,
};
use koopman_esc::lifting::{self, KoopmanModel};
use koopman_esc::plant::{InterferenceParams, PlantParams};
use koopman_esc::signal::{DetectorConfig, RelayConfig};
use koopman_esc::{Error, Execution};

fn default_model() -> &'static KoopmanModel {
    static MODEL: OnceLock<KoopmanModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        experiments::train(
            &TrainingConfig::default(),
            &PlantParams::default(),
            &InterferenceParams::default(),
            8,
            1e-10,
            Execution::default(),
        )
        .expect("training")
    })
}

fn short_run() -> RunConfig {
    RunConfig {
        duration: 200.0,
        log_start: 10.0,
        ..RunConfig::default()
    }
}

#[test]
fn sequential_and_parallel_training_agree() {
    let cfg = TrainingConfig {
        n_trajectories: 16,
        traj_duration: 10.0,
        seed: 9,
        ..Default::default()
    };
    let (p, i) = (PlantParams::default(), InterferenceParams::default());
    let a = experiments::train(&cfg, &p, &i, 8, 1e-10, Execution::Sequential).unwrap();
    let b = experiments::train(&cfg, &p, &i, 8, 1e-10, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_changes_the_model() {
    let cfg = TrainingConfig {
        n_trajectories: 8,
        traj_duration: 10.0,
        ..Default::default()
    };
    let (p, i) = (PlantParams::default(), InterferenceParams::default());
    let a = experiments::train(&cfg, &p, &i, 8, 1e-10, Execution::default()).unwrap();
    let b = experiments::train(
        &TrainingConfig { seed: 1, ..cfg },
        &p,
        &i,
        8,
        1e-10,
        Execution::default(),
    )
    .unwrap();
    assert_ne!(a.k_matrix, b.k_matrix);
}

#[test]
fn trajectory_draws_do_not_depend_on_count() {
    let small = TrainingConfig {
        n_trajectories: 5,
        ..Default::default()
    };
    let large = TrainingConfig {
        n_trajectories: 500,
        ..Default::default()
    };
    for i in 0..5 {
        assert_eq!(trajectory_spec(&small, i), trajectory_spec(&large, i));
    }
    let s = trajectory_spec(&large, 3);
    assert!(
        (-5.0..5.0).contains(&s.theta) && (3.0..9.0).contains(&s.x0) && (-3.0..3.0).contains(&s.y0)
    );
}

#[test]
fn trained_model_survives_file_round_trip() {
    let m = default_model();
    let mut buf = Vec::new();
    lifting::write_model(m, &mut buf).unwrap();
    let back = lifting::read_model(buf.as_slice()).unwrap();
    assert_eq!(&back, m);
    for (x, y) in [(6.0, 0.0), (3.2, -1.7), (-4.0, 8.0)] {
        assert_eq!(back.project_energy(x, y), m.project_energy(x, y));
    }
}

#[test]
fn frozen_relay_keeps_theta() {
    let relay = RelayConfig {
        step_k: 0.0,
        ..RelayConfig::default()
    };
    let log = experiments::run_closed_loop(
        &PlantParams::default(),
        &InterferenceParams::default(),
        Cost::Raw,
        &relay,
        &DetectorConfig::default(),
        &short_run(),
    )
    .unwrap();
    assert!(log.theta.iter().all(|&th| th == 2.0));
    assert_eq!(log.t[0], 10.0);
    assert_eq!(*log.t.last().unwrap(), 200.0);
    assert_eq!(log.len(), 38_001);
}

#[test]
fn zero_duration_is_rejected() {
    let run = RunConfig {
        duration: 0.0,
        ..short_run()
    };
    let err = experiments::run_closed_loop(
        &PlantParams::default(),
        &InterferenceParams::default(),
        Cost::Raw,
        &RelayConfig::default(),
        &DetectorConfig::default(),
        &run,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn divergence_keeps_partial_log() {
    let plant = PlantParams {
        force_amp: 1e9,
        ..PlantParams::default()
    };
    let run = RunConfig {
        log_start: 0.0,
        ..short_run()
    };
    let err = experiments::run_closed_loop(
        &plant,
        &InterferenceParams::default(),
        Cost::Raw,
        &RelayConfig::default(),
        &DetectorConfig::default(),
        &run,
    )
    .unwrap_err();
    match err {
        Error::RunDiverged { last, partial } => {
            assert!(last.x.is_finite() && last.y.is_finite());
            assert!(!partial.is_empty());
            assert!(partial.t.last().unwrap() <= &last.t);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn static_map_covers_the_ramp() {
    let sweep = SweepConfig {
        duration: 200.0,
        log_start: 20.0,
        ..SweepConfig::default()
    };
    let map = experiments::static_map(
        &PlantParams::default(),
        &InterferenceParams::default(),
        Cost::Raw,
        &DetectorConfig::default(),
        &sweep,
    )
    .unwrap();
    assert_eq!(map.points.len(), 36_001);
    let (first, last) = (map.points[0].0, map.points.last().unwrap().0);
    assert!((first - (2.0 - 7.0 * 0.1)).abs() < 1e-3);
    assert!(last > -5.0 && last < first);
    assert!(map.points.iter().all(|p| p.1 >= 0.0));
}

#[test]
fn lifted_mode_requires_a_model() {
    assert!(Cost::new(CostMode::Lifted, None).is_err());
    assert!(matches!(Cost::new(CostMode::Raw, None), Ok(Cost::Raw)));
    assert_eq!("lifted".parse::<CostMode>().unwrap(), CostMode::Lifted);
    assert!("both".parse::<CostMode>().is_err());
}

#[test]
fn flipped_initial_direction_still_converges() {
    let model = default_model();
    let (p, i, d) = (
        PlantParams::default(),
        InterferenceParams::default(),
        DetectorConfig::default(),
    );
    let run = RunConfig::default();
    let cost = Cost::Lifted(model);
    let base =
        experiments::run_closed_loop(&p, &i, cost, &RelayConfig::default(), &d, &run).unwrap();
    let flipped_cfg = RelayConfig {
        epsilon_init: -1.0,
        ..RelayConfig::default()
    };
    let flipped = experiments::run_closed_loop(&p, &i, cost, &flipped_cfg, &d, &run).unwrap();
    assert_ne!(base.theta, flipped.theta);
    let m = compute_metrics(
        &flipped,
        &MetricsConfig {
            theta_star: -3.0,
            tol: 0.25,
            r_star: 0.0,
            tail_frac: 0.3,
        },
    )
    .unwrap();
    assert!(m.t_hit.is_some());
    let tail = &flipped.theta[flipped.len() * 7 / 10..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((mean + 3.0).abs() < 1.0, "tail mean theta {mean}");
}

#[test]
fn closed_loop_runs_are_repeatable() {
    let model = default_model();
    let args = (
        PlantParams::default(),
        InterferenceParams::default(),
        DetectorConfig::default(),
    );
    let a = experiments::run_closed_loop(
        &args.0,
        &args.1,
        Cost::Lifted(model),
        &RelayConfig::default(),
        &args.2,
        &short_run(),
    )
    .unwrap();
    let b = experiments::run_closed_loop(
        &args.0,
        &args.1,
        Cost::Lifted(model),
        &RelayConfig::default(),
        &args.2,
        &short_run(),
    )
    .unwrap();
    assert_eq!(a, b);
}
