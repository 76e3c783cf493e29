//! Benchmark harness: scenarios × controller variants × seeds.

pub mod controller;
pub mod metrics;
pub mod scenario;

pub use controller::{ControllerConfig, MpcTuning, TaskController, VariantKind};
pub use metrics::{episode_metrics, lyapunov_series, max_windowed_slope, rmse, EpisodeMetrics};
pub use scenario::{Scenario, Task};

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::MracGains;
use crate::error::{Error, Result};
use crate::estimation::{DoorEstimatorConfig, MiacConfig};
use crate::sim::{run_episode, SimConfig, SimLog, TorqueTrackingGains};

pub fn default_mpc() -> MpcTuning {
    MpcTuning {
        horizon: 1.2,
        nodes: 24,
        iterations: 1,
        q_pos: vec![20.0, 20.0, 0.5, 0.5],
        q_vel: vec![2.0, 2.0, 0.2, 0.2],
        r: vec![1e-3, 1e-2, 1e-2],
        q_ee: [150.0, 150.0, 0.0],
        terminal_scale: 5.0,
        follow_base: Some(0),
    }
}

pub fn default_tracking() -> TorqueTrackingGains {
    TorqueTrackingGains {
        kp: vec![0.0, 20.0, 20.0],
        kd: vec![20.0, 2.0, 2.0],
    }
}

fn config(variant: VariantKind) -> ControllerConfig {
    ControllerConfig {
        variant,
        mpc: default_mpc(),
        tracking: default_tracking(),
        door: DoorEstimatorConfig::default(),
    }
}

pub fn baseline_pd() -> ControllerConfig {
    config(VariantKind::BaselinePd {
        k_radial: 50.0,
        k_tangential: 50.0,
        d_radial: 10.0,
        d_tangential: 20.0,
    })
}

pub fn miac() -> ControllerConfig {
    config(VariantKind::Miac {
        filter: MiacConfig {
            p0: [1.0, 10.0, 1.0, 25.0],
            r_w: 4.0,
            ..MiacConfig::default()
        },
        observer_gain: 150.0,
    })
}

pub fn mrac() -> ControllerConfig {
    config(VariantKind::Mrac {
        gains: MracGains {
            lambda: 2.0,
            k_s: 60.0,
            k_pi: [1.0, 0.2, 0.05, 0.02],
        },
        initial_estimate: [0.0; 4],
    })
}

/// The three controllers with their default gains.
pub fn default_variants() -> Vec<ControllerConfig> {
    vec![baseline_pd(), miac(), mrac()]
}

/// Runs one episode of `scenario` under `config` with noise seeded by `seed`.
pub fn run_one(scenario: &Scenario, config: &ControllerConfig, seed: u64, noise: bool) -> Result<SimLog> {
    let mut controller = TaskController::new(scenario, config)?;
    let setup = scenario.episode_setup(config.tracking.clone(), config.variant.label())?;
    let sim = SimConfig {
        noise: if noise { scenario.noise } else { Default::default() },
        seed,
        ..SimConfig::default()
    };
    run_episode(&setup, &mut controller, &sim)
}

/// Pass thresholds on the final tracking error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub door_final_deg: f64,
    pub lift_final_m: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            door_final_deg: 5.0,
            lift_final_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Door,
    Lift,
}

impl TaskKind {
    pub fn of(task: &Task) -> Self {
        match task {
            Task::Door { .. } => TaskKind::Door,
            Task::Lift { .. } => TaskKind::Lift,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Door => "door",
            TaskKind::Lift => "lift",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            TaskKind::Door => "deg",
            TaskKind::Lift => "m",
        }
    }
}

/// Which episode a log belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeKey {
    pub scenario: String,
    pub task: TaskKind,
    pub variant: String,
    pub seed: u64,
}

impl EpisodeKey {
    pub fn file_stem(&self) -> String {
        format!("{}__{}__{}", self.scenario, self.variant, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub key: EpisodeKey,
    /// Metrics, or the error that ended the episode.
    pub outcome: std::result::Result<EpisodeMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub task: TaskKind,
    pub variant: String,
    pub episodes: usize,
    pub failures: usize,
    pub mean_rmse: f64,
    pub mean_final_error: f64,
    pub mean_force: f64,
    pub max_force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub episodes: Vec<EpisodeRecord>,
    pub summary: Vec<SummaryRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl MetricsReport {
    /// Aggregates per (scenario, variant) in order of first appearance.
    pub fn from_records(episodes: Vec<EpisodeRecord>) -> Self {
        let mut groups: Vec<(String, TaskKind, String)> = Vec::new();
        for e in &episodes {
            let g = (e.key.scenario.clone(), e.key.task, e.key.variant.clone());
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        let summary = groups
            .into_iter()
            .map(|(scenario, task, variant)| {
                let members: Vec<&EpisodeRecord> = episodes
                    .iter()
                    .filter(|e| e.key.scenario == scenario && e.key.variant == variant)
                    .collect();
                let ok: Vec<&EpisodeMetrics> = members.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
                SummaryRow {
                    episodes: members.len(),
                    failures: members.len() - ok.len(),
                    mean_rmse: mean(ok.iter().map(|m| m.rmse)),
                    mean_final_error: mean(ok.iter().map(|m| m.final_error)),
                    mean_force: mean(ok.iter().map(|m| m.mean_force)),
                    max_force: ok.iter().map(|m| m.max_force).fold(f64::NAN, f64::max),
                    scenario,
                    task,
                    variant,
                }
            })
            .collect();
        Self { episodes, summary }
    }

    pub fn row(&self, scenario: &str, variant: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.scenario == scenario && r.variant == variant)
    }

    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("scenario,task,variant,seed,rmse,final_error,mean_force,max_force,error\n");
        for e in &self.episodes {
            let k = &e.key;
            let _ = match &e.outcome {
                Ok(m) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},",
                    k.scenario,
                    k.task.as_str(),
                    k.variant,
                    k.seed,
                    m.rmse,
                    m.final_error,
                    m.mean_force,
                    m.max_force
                ),
                Err(msg) => writeln!(
                    out,
                    "{},{},{},{},,,,,\"{}\"",
                    k.scenario,
                    k.task.as_str(),
                    k.variant,
                    k.seed,
                    msg.replace('"', "'")
                ),
            };
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("scenario,task,variant,episodes,failures,mean_rmse,mean_final_error,mean_force,max_force\n");
        for r in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.task.as_str(),
                r.variant,
                r.episodes,
                r.failures,
                r.mean_rmse,
                r.mean_final_error,
                r.mean_force,
                r.max_force
            );
        }
        out
    }

    /// Plain-text comparison: one row per controller, RMSE and final error
    /// per scenario.
    pub fn summary_table(&self) -> String {
        let mut scenarios: Vec<(&str, TaskKind)> = Vec::new();
        let mut variants: Vec<&str> = Vec::new();
        for r in &self.summary {
            if !scenarios.iter().any(|(s, _)| *s == r.scenario) {
                scenarios.push((&r.scenario, r.task));
            }
            if !variants.contains(&r.variant.as_str()) {
                variants.push(&r.variant);
            }
        }
        let mut header = format!("{:<14}", "controller");
        for (s, task) in &scenarios {
            let _ = write!(header, " | {:^27}", format!("{s} [{}]", task.unit()));
        }
        let mut out = header.clone();
        out.push('\n');
        let _ = write!(out, "{:<14}", "");
        for _ in &scenarios {
            let _ = write!(out, " | {:>12} {:>14}", "RMSE", "final error");
        }
        out.push('\n');
        out.push_str(&"-".repeat(header.len()));
        out.push('\n');
        for v in &variants {
            let _ = write!(out, "{v:<14}");
            for (s, _) in &scenarios {
                match self.row(s, v) {
                    Some(r) if r.failures == 0 => {
                        let _ = write!(out, " | {:>12.4} {:>14.4}", r.mean_rmse, r.mean_final_error);
                    }
                    Some(r) => {
                        let _ = write!(out, " | {:>12} {:>14}", format!("{} failed", r.failures), "");
                    }
                    None => {
                        let _ = write!(out, " | {:>12} {:>14}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pass/fail of one variant across tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub variant: String,
    pub door: bool,
    pub lift: bool,
}

impl TransferResult {
    pub fn passed(&self) -> bool {
        self.door && self.lift
    }
}

/// A variant passes a task when every scenario of that task has no failed
/// episodes and a mean final error within the threshold. Variants missing a
/// task fail it.
pub fn cross_task_transfer_check(report: &MetricsReport, thresholds: &Thresholds) -> Vec<TransferResult> {
    let mut variants: Vec<&str> = Vec::new();
    for r in &report.summary {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
    }
    let passes = |variant: &str, task: TaskKind| {
        let limit = match task {
            TaskKind::Door => thresholds.door_final_deg,
            TaskKind::Lift => thresholds.lift_final_m,
        };
        let mut rows = report
            .summary
            .iter()
            .filter(|r| r.variant == variant && r.task == task)
            .peekable();
        rows.peek().is_some() && rows.all(|r| r.failures == 0 && r.mean_final_error <= limit)
    };
    variants
        .into_iter()
        .map(|v| TransferResult {
            variant: v.to_string(),
            door: passes(v, TaskKind::Door),
            lift: passes(v, TaskKind::Lift),
        })
        .collect()
}

pub struct BenchRun {
    pub report: MetricsReport,
    /// Logs in the order of `report.episodes`; `None` for failed episodes.
    pub logs: Vec<Option<SimLog>>,
}

/// Runs every (scenario, variant, seed) combination. Episodes execute in
/// parallel; results keep the enumeration order, so the outcome does not
/// depend on scheduling.
pub fn run_benchmark(scenarios: &[Scenario], variants: &[ControllerConfig], seeds: &[u64], noise: bool) -> BenchRun {
    let mut jobs = Vec::new();
    for s in scenarios {
        for v in variants {
            for &seed in seeds {
                jobs.push((s, v, seed));
            }
        }
    }
    let results: Vec<(EpisodeRecord, Option<SimLog>)> = jobs
        .par_iter()
        .map(|&(s, v, seed)| {
            let key = EpisodeKey {
                scenario: s.name.clone(),
                task: TaskKind::of(&s.task),
                variant: v.variant.label().to_string(),
                seed,
            };
            let run = run_one(s, v, seed, noise).and_then(|log| Ok((episode_metrics(&log)?, log)));
            match run {
                Ok((m, log)) => (EpisodeRecord { key, outcome: Ok(m) }, Some(log)),
                Err(e) => (
                    EpisodeRecord {
                        key,
                        outcome: Err(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let (records, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    BenchRun {
        report: MetricsReport::from_records(records),
        logs,
    }
}

/// Index of the episodes in an output directory, enough to rebuild the
/// report from the logs alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub episodes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub key: EpisodeKey,
    /// Error message of a failed episode, which has no log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots desired and actual task trajectories of every logged episode."""
import csv
import pathlib
import sys

import matplotlib.pyplot as plt

root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent)
groups = {}
for path in sorted((root / "logs").glob("*.csv")):
    scenario, variant, seed = path.stem.split("__")
    groups.setdefault(scenario, []).append((variant, seed, path))

for scenario, runs in groups.items():
    fig, ax = plt.subplots(figsize=(7, 4))
    for variant, seed, path in runs:
        with open(path) as f:
            rows = list(csv.DictReader(f))
        t = [float(r["t"]) for r in rows]
        ax.plot(t, [float(r["track"]) for r in rows], label=f"{variant} seed {seed}", lw=0.8)
    ax.plot(t, [float(r["track_ref"]) for r in rows], "k--", label="reference")
    ax.set_title(scenario)
    ax.set_xlabel("t [s]")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(root / f"{scenario}.png", dpi=150)
"#;

/// Writes tables, per-episode logs, a manifest and the plotting script.
pub fn write_outputs(dir: &Path, run: &BenchRun) -> Result<()> {
    let logs_dir = dir.join("logs");
    std::fs::create_dir_all(&logs_dir)?;
    let mut manifest = Manifest { episodes: Vec::new() };
    for (rec, log) in run.report.episodes.iter().zip(&run.logs) {
        if let Some(log) = log {
            log.write_csv(&logs_dir.join(format!("{}.csv", rec.key.file_stem())))?;
        }
        manifest.episodes.push(ManifestEntry {
            key: rec.key.clone(),
            error: rec.outcome.as_ref().err().cloned(),
        });
    }
    let manifest = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("manifest.toml"), manifest)?;
    std::fs::write(dir.join("episodes.csv"), run.report.episodes_csv())?;
    std::fs::write(dir.join("summary.csv"), run.report.summary_csv())?;
    std::fs::write(dir.join("summary.txt"), run.report.summary_table())?;
    std::fs::write(dir.join("plot.py"), PLOT_SCRIPT)?;
    Ok(())
}

/// Rebuilds the report from a directory written by [`write_outputs`].
pub fn report_from_dir(dir: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let mut records = Vec::with_capacity(manifest.episodes.len());
    for entry in manifest.episodes {
        let outcome = match entry.error {
            Some(msg) => Err(msg),
            None => {
                let path = dir.join("logs").join(format!("{}.csv", entry.key.file_stem()));
                let log = SimLog::from_csv(&std::fs::read_to_string(path)?)?;
                Ok(episode_metrics(&log)?)
            }
        };
        records.push(EpisodeRecord {
            key: entry.key,
            outcome,
        });
    }
    Ok(MetricsReport::from_records(records))
}
