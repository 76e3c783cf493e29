use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use interact_core::bench::{
    self, cross_task_transfer_check, episode_metrics, report_from_dir, run_benchmark, run_one, scenario, write_outputs,
    ControllerConfig, MetricsReport, Scenario, TaskKind, Thresholds,
};
use interact_core::config;

#[derive(Parser)]
#[command(
    name = "interact",
    about = "Interaction-control benchmark for a planar mobile manipulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one controller.
    Run {
        /// Built-in scenario name or path to a scenario file.
        #[arg(long)]
        scenario: String,
        /// baseline_pd, miac, mrac or a controller file.
        #[arg(long)]
        variant: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Directory for the CSV and binary logs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every scenario under every controller and seed.
    Bench {
        /// Scenario names or files; all built-ins when omitted.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        /// Variant names or controller files; all defaults when omitted.
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Recompute the report from a directory written by `bench`.
    Report {
        #[arg(long, default_value = "bench-out")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct NoiseArgs {
    /// Disable measurement noise.
    #[arg(long, conflicts_with_all = ["torque_std", "encoder_std"])]
    no_noise: bool,
    /// Override the torque-measurement noise std, N·m.
    #[arg(long)]
    torque_std: Option<f64>,
    /// Override the encoder noise std, rad.
    #[arg(long)]
    encoder_std: Option<f64>,
}

impl NoiseArgs {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(s) = self.torque_std {
            scenario.noise.torque_std = s;
        }
        if let Some(s) = self.encoder_std {
            scenario.noise.encoder_std = s;
        }
    }
}

fn load_scenario(arg: &str, noise: &NoiseArgs) -> Result<Scenario> {
    let builtin = match arg {
        "light_door" => Some(scenario::light_door()),
        "heavy_door" => Some(scenario::heavy_door()),
        "lift" => Some(scenario::lift()),
        _ => None,
    };
    let mut scenario = match builtin {
        Some(s) => s.balanced()?,
        None => config::load_scenario(Path::new(arg)).with_context(|| format!("loading scenario {arg}"))?,
    };
    noise.apply(&mut scenario);
    scenario.validate()?;
    Ok(scenario)
}

fn load_variant(arg: &str) -> Result<ControllerConfig> {
    Ok(match arg {
        "baseline_pd" => bench::baseline_pd(),
        "miac" => bench::miac(),
        "mrac" => bench::mrac(),
        path => config::load_controller(Path::new(path)).with_context(|| format!("loading controller {path}"))?,
    })
}

fn print_report(report: &MetricsReport) -> bool {
    print!("{}", report.summary_table());
    let mut ok = true;
    for e in &report.episodes {
        if let Err(msg) = &e.outcome {
            ok = false;
            eprintln!("FAILED {}: {msg}", e.key.file_stem());
        }
    }
    let has = |task| report.summary.iter().any(|r| r.task == task);
    if !(has(TaskKind::Door) && has(TaskKind::Lift)) {
        return ok;
    }
    println!();
    for t in cross_task_transfer_check(report, &Thresholds::default()) {
        let mark = |b: bool| if b { "pass" } else { "fail" };
        println!(
            "transfer {:<12} door {} lift {} -> {}",
            t.variant,
            mark(t.door),
            mark(t.lift),
            mark(t.passed())
        );
    }
    ok
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            variant,
            seed,
            noise,
            out,
        } => {
            let scenario = load_scenario(&scenario, &noise)?;
            let config = load_variant(&variant)?;
            let log = run_one(&scenario, &config, seed, !noise.no_noise)?;
            std::fs::create_dir_all(&out)?;
            let stem = format!("{}__{}__{seed}", scenario.name, config.variant.label());
            log.write_csv(&out.join(format!("{stem}.csv")))?;
            std::fs::write(out.join(format!("{stem}.slog")), log.to_binary())?;
            let m = episode_metrics(&log)?;
            println!(
                "{stem}: rmse {:.4} final error {:.4} mean force {:.3} N max force {:.3} N",
                m.rmse, m.final_error, m.mean_force, m.max_force
            );
            Ok(true)
        }
        Command::Bench {
            scenarios,
            variants,
            seeds,
            noise,
            out,
        } => {
            let scenarios = if scenarios.is_empty() {
                ["light_door", "heavy_door", "lift"].map(String::from).to_vec()
            } else {
                scenarios
            };
            let variants = if variants.is_empty() {
                ["baseline_pd", "miac", "mrac"].map(String::from).to_vec()
            } else {
                variants
            };
            let scenarios = scenarios
                .iter()
                .map(|s| load_scenario(s, &noise))
                .collect::<Result<Vec<_>>>()?;
            let variants = variants.iter().map(|v| load_variant(v)).collect::<Result<Vec<_>>>()?;
            if seeds.is_empty() {
                bail!("at least one seed is required");
            }
            let run = run_benchmark(&scenarios, &variants, &seeds, !noise.no_noise);
            write_outputs(&out, &run)?;
            let ok = print_report(&run.report);
            println!("outputs written to {}", out.display());
            Ok(ok)
        }
        Command::Report { dir } => {
            let report = report_from_dir(&dir)?;
            let ok = print_report(&report);
            let stored = std::fs::read_to_string(dir.join("episodes.csv")).ok();
            if stored.as_deref().is_some_and(|s| s != report.episodes_csv()) {
                eprintln!("recomputed metrics differ from {}", dir.join("episodes.csv").display());
                return Ok(false);
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
