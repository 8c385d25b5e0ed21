//! Command-line front end: plan coverage tours, run missions, recompute
//! metrics from logs, and compare mission modes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmsense::coverage::{plan_coverage, plan_to_csv, select_cell_size, CoverageParams};
use swarmsense::experiment::{
    compare_modes, compute_run_metrics, run_experiment, summary_table, ExperimentConfig,
};
use swarmsense::presets::{builtin, BUILTIN_NAMES};
use swarmsense::runner::{RunMode, RunRecord, RunnerConfig};
use swarmsense::world::WorldScenario;
use swarmsense::{Error, Result, Scalar};

#[derive(Parser)]
#[command(
    name = "swarmsense",
    about = "Multi-robot gas-source localization: coverage planning, active sensing, and experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute and print the coverage plan for a scenario.
    Plan {
        /// Scenario JSON path or a built-in name (survey-synthetic,
        /// survey-rssi, urban-5, urban-9).
        #[arg(long)]
        scenario: String,
        /// Grid cell size in meters; omitted = budget-driven search.
        #[arg(long)]
        cell_size: Option<f64>,
        /// Write the waypoint CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full mission experiment.
    Run {
        #[arg(long)]
        scenario: String,
        /// Base RNG seed; repetition r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of repetitions.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Mission composition.
        #[arg(long, default_value = "cpp-as")]
        mode: String,
        /// Output directory for CSV logs and the summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Particles per agent.
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        /// Basis count of the estimation template (perfect square).
        #[arg(long, default_value_t = 16)]
        basis: usize,
        /// Coverage cell size in meters; omitted = budget-driven search.
        #[arg(long)]
        cell_size: Option<f64>,
    },
    /// Recompute metrics from a logged run directory.
    Metrics {
        /// Scenario the run was produced from.
        #[arg(long)]
        scenario: String,
        /// Run directory containing record.json.
        #[arg(long)]
        logs: PathBuf,
    },
    /// Paired comparison of two mission modes on one scenario.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// First mode of the pair.
        #[arg(long, default_value = "cpp-as")]
        mode_a: String,
        /// Second mode of the pair.
        #[arg(long, default_value = "as-only")]
        mode_b: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 16)]
        basis: usize,
        /// Coverage cell size in meters; omitted = budget-driven search.
        #[arg(long)]
        cell_size: Option<f64>,
    },
}

fn load_scenario(arg: &str) -> Result<WorldScenario<Scalar>> {
    if let Some(sc) = builtin(arg) {
        return Ok(sc);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Config(format!(
            "'{arg}' is neither a file nor a built-in scenario (built-ins: {})",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let text = fs::read_to_string(path)?;
    let sc = WorldScenario::from_json(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    sc.validate()?;
    Ok(sc)
}

fn parse_mode(s: &str) -> Result<RunMode> {
    s.parse()
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Plan {
            scenario,
            cell_size,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let start = sc.robots[0].position;
            let n = sc.robots.len();
            let cell = match cell_size {
                Some(c) => c,
                None => {
                    let choice = select_cell_size(
                        sc.arena,
                        &sc.static_obstacles,
                        start,
                        sc.budget_s,
                        sc.leader_speed,
                        n,
                    )?;
                    if choice.over_budget {
                        eprintln!(
                            "warning: no cell size fits the {} s budget; using {:.3} m (predicted {:.1} s)",
                            sc.budget_s, choice.cell_size, choice.predicted_tt
                        );
                    }
                    choice.cell_size
                }
            };
            let plan = plan_coverage(
                sc.arena,
                &sc.static_obstacles,
                start,
                &CoverageParams::new(cell, n, sc.leader_speed),
            )?;
            eprintln!(
                "cell {:.3} m, {} blocks, {} waypoints, predicted {:.1} s, coverage {:.1}%",
                cell,
                plan.blocks.len(),
                plan.waypoints.len(),
                plan.predicted_tt,
                100.0 * plan.coverage_fraction
            );
            let csv = plan_to_csv(&plan);
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Cmd::Run {
            scenario,
            seed,
            reps,
            mode,
            out,
            particles,
            basis,
            cell_size,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut runner = RunnerConfig::new(parse_mode(&mode)?, basis, particles);
            runner.cell_size = cell_size;
            let config = ExperimentConfig::new(runner, reps, seed)?;
            let res = run_experiment(&sc, &config, out.as_deref())?;
            if let Some(dir) = &out {
                for rec in &res.records {
                    let run_dir = dir.join(format!("run-{}", rec.seed));
                    fs::write(
                        run_dir.join("record.json"),
                        serde_json::to_string(rec).expect("record serializes"),
                    )?;
                }
            }
            print!("{}", summary_table(&res.summary));
        }
        Cmd::Metrics { scenario, logs } => {
            let sc = load_scenario(&scenario)?;
            let path = logs.join("record.json");
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let record: RunRecord<Scalar> = serde_json::from_str(&text)?;
            let metrics = compute_run_metrics(&record, &sc);
            println!(
                "{}",
                serde_json::to_string_pretty(&metrics).expect("metrics serialize")
            );
        }
        Cmd::Compare {
            scenario,
            seed,
            reps,
            mode_a,
            mode_b,
            out,
            particles,
            basis,
            cell_size,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut base = RunnerConfig::new(RunMode::CppAs, basis, particles);
            base.cell_size = cell_size;
            let cmp = compare_modes(
                &sc,
                &base,
                parse_mode(&mode_a)?,
                parse_mode(&mode_b)?,
                reps,
                seed,
                out.as_deref(),
            )?;
            println!(
                "{:>10}  {:>14}  {:>14}",
                "time_s",
                format!("anmse {}", cmp.mode_a),
                format!("anmse {}", cmp.mode_b)
            );
            for (t, a, b) in &cmp.rows {
                println!("{t:>10.1}  {a:>14.6}  {b:>14.6}");
            }
            println!(
                "final: {} {:.6} vs {} {:.6}",
                cmp.mode_a, cmp.final_a, cmp.mode_b, cmp.final_b
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Scenario(_) | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
