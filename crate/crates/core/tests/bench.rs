use std::path::PathBuf;

use interact_core::bench::{
    self, cross_task_transfer_check, report_from_dir, rmse, run_benchmark, scenario, write_outputs, EpisodeKey,
    EpisodeMetrics, EpisodeRecord, MetricsReport, Scenario, TaskKind, Thresholds,
};
use interact_core::Error;
use proptest::prelude::*;

#[test]
fn rmse_examples() {
    assert_eq!(rmse(&[2.0; 8], &[0.0; 8]).unwrap(), 2.0);
    assert_eq!(rmse(&[1.5, -0.5, 4.0], &[1.5, -0.5, 4.0]).unwrap(), 0.0);
    let alternating: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 3.0 } else { -3.0 }).collect();
    assert_eq!(rmse(&alternating, &[0.0; 10]).unwrap(), 3.0);
    assert!(matches!(rmse(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1))));
    assert!(rmse(&[], &[]).is_err());
}

proptest! {
    #[test]
    fn rmse_is_symmetric_and_bounded(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64)) {
        let (d, m): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let e = rmse(&d, &m).unwrap();
        prop_assert_eq!(e, rmse(&m, &d).unwrap());
        let worst = d.iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mean_abs = d.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() / d.len() as f64;
        prop_assert!(e <= worst * (1.0 + 1e-12));
        prop_assert!(e >= mean_abs * (1.0 - 1e-12));
    }
}

fn record(scenario: &str, task: TaskKind, variant: &str, seed: u64, final_error: Option<f64>) -> EpisodeRecord {
    EpisodeRecord {
        key: EpisodeKey {
            scenario: scenario.into(),
            task,
            variant: variant.into(),
            seed,
        },
        outcome: final_error
            .map(|e| EpisodeMetrics {
                rmse: e,
                final_error: e,
                mean_force: 0.0,
                max_force: 0.0,
            })
            .ok_or_else(|| "fell over".to_string()),
    }
}

#[test]
fn summary_averages_successful_episodes() {
    let report = MetricsReport::from_records(vec![
        record("door", TaskKind::Door, "a", 0, Some(1.0)),
        record("door", TaskKind::Door, "a", 1, Some(3.0)),
        record("door", TaskKind::Door, "a", 2, None),
    ]);
    let row = report.row("door", "a").unwrap();
    assert_eq!((row.episodes, row.failures), (3, 1));
    assert_eq!(row.mean_final_error, 2.0);
}

#[test]
fn transfer_requires_every_scenario_of_both_tasks() {
    let report = MetricsReport::from_records(vec![
        record("light", TaskKind::Door, "good", 0, Some(1.0)),
        record("heavy", TaskKind::Door, "good", 0, Some(4.9)),
        record("lift", TaskKind::Lift, "good", 0, Some(0.009)),
        record("light", TaskKind::Door, "door_only", 0, Some(1.0)),
        record("heavy", TaskKind::Door, "door_only", 0, Some(1.0)),
        record("lift", TaskKind::Lift, "door_only", 0, Some(0.02)),
        record("light", TaskKind::Door, "crashes", 0, Some(1.0)),
        record("light", TaskKind::Door, "crashes", 1, None),
        record("lift", TaskKind::Lift, "crashes", 0, Some(0.001)),
        record("heavy", TaskKind::Door, "no_lift", 0, Some(1.0)),
    ]);
    let results = cross_task_transfer_check(&report, &Thresholds::default());
    let get = |v: &str| results.iter().find(|r| r.variant == v).unwrap().clone();
    assert!(get("good").passed());
    let door_only = get("door_only");
    assert!(door_only.door && !door_only.lift);
    let crashes = get("crashes");
    assert!(!crashes.door && crashes.lift);
    let no_lift = get("no_lift");
    assert!(no_lift.door && !no_lift.lift);
    assert_eq!(results.len(), 4);
}

fn short(s: Scenario) -> Scenario {
    Scenario { duration: 2.0, ..s }
}

fn small_matrix() -> (Vec<Scenario>, Vec<bench::ControllerConfig>) {
    let scenarios = vec![
        short(scenario::light_door()).balanced().unwrap(),
        short(scenario::lift()).balanced().unwrap(),
    ];
    (scenarios, bench::default_variants())
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("interact-bench-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn small_benchmark_is_deterministic_and_recomputable() {
    let (scenarios, variants) = small_matrix();
    let first = run_benchmark(&scenarios, &variants, &[1, 2], true);
    let second = run_benchmark(&scenarios, &variants, &[1, 2], true);
    assert_eq!(first.report.episodes.len(), scenarios.len() * variants.len() * 2);
    assert_eq!(first.report.episodes_csv(), second.report.episodes_csv());
    assert_eq!(first.report.summary_csv(), second.report.summary_csv());
    for (a, b) in first.logs.iter().zip(&second.logs) {
        assert_eq!(a.as_ref().map(|l| l.to_binary()), b.as_ref().map(|l| l.to_binary()));
    }
    assert!(
        first.logs.iter().all(Option::is_some),
        "{}",
        first.report.episodes_csv()
    );

    let noiseless = run_benchmark(&scenarios, &variants, &[1, 2], false);
    assert_ne!(noiseless.report.episodes_csv(), first.report.episodes_csv());

    let dir = scratch_dir("roundtrip");
    write_outputs(&dir, &first).unwrap();
    let rebuilt = report_from_dir(&dir).unwrap();
    assert_eq!(rebuilt.episodes_csv(), first.report.episodes_csv());
    assert_eq!(rebuilt.summary_csv(), first.report.summary_csv());
    let written = std::fs::read_to_string(dir.join("episodes.csv")).unwrap();
    assert_eq!(written, first.report.episodes_csv());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seeds_change_noisy_outcomes() {
    let (scenarios, variants) = small_matrix();
    let run = run_benchmark(&scenarios[..1], &variants[..1], &[1, 2], true);
    let m: Vec<_> = run.report.episodes.iter().map(|e| e.outcome.clone().unwrap()).collect();
    assert_ne!(m[0].rmse, m[1].rmse);
}
