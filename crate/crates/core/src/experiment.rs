//! Experiment orchestration: per-run metric computation, repeated runs with
//! seed ladders, CSV/text reporting, and the paired mode comparison.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    anmse, anmse_prefix, estimated_source, mean_ci95, source_error, whca, MseEvaluator,
    MSE_LATTICE_STEP,
};
use crate::runner::{run_mission, RunMode, RunRecord, RunnerConfig};
use crate::world::{SourceMode, WorldScenario};
use crate::Scalar;

/// One experiment: a scenario run `reps` times with seeds
/// `seed_base .. seed_base + reps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub runner: RunnerConfig<Scalar>,
    pub reps: usize,
    pub seed_base: u64,
}

impl ExperimentConfig {
    pub fn new(runner: RunnerConfig<Scalar>, reps: usize, seed_base: u64) -> Result<Self> {
        if reps == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        Ok(Self {
            runner,
            reps,
            seed_base,
        })
    }
}

/// Scalar metrics of one run. Field-error metrics are `None` in RSSI mode,
/// where the true field is unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Final cumulative ANMSE over all agents and epochs.
    pub anmse_final: Option<Scalar>,
    /// Cumulative ANMSE after each epoch.
    pub anmse_curve: Option<Vec<Scalar>>,
    /// Distance from the final estimated source to the true source,
    /// averaged over agents.
    pub source_error: Option<Scalar>,
    /// Diameter of the final estimated high-concentration area (level 1.0).
    pub whca: Option<Scalar>,
    pub coverage_final_pct: Option<f64>,
    pub collisions: usize,
    pub path_length_total: Scalar,
    pub final_time: Scalar,
}

/// Compute every scalar metric for one finished run.
pub fn compute_run_metrics(
    record: &RunRecord<Scalar>,
    scenario: &WorldScenario<Scalar>,
) -> RunMetrics {
    let arena = scenario.arena;
    let step = MSE_LATTICE_STEP;
    let truth = match &scenario.source {
        SourceMode::SyntheticField(spec) => Some(spec),
        SourceMode::RssiEmitter { .. } => None,
    };

    let (anmse_final, anmse_curve) = match truth {
        Some(t) => {
            let eval = MseEvaluator::new(&record.template, t, arena, step);
            let per_agent: Vec<Vec<Scalar>> = record
                .estimates
                .iter()
                .map(|agent| agent.iter().map(|e| eval.mse(e)).collect())
                .collect();
            (Some(anmse(&per_agent)), Some(anmse_prefix(&per_agent)))
        }
        None => (None, None),
    };

    let true_source = scenario.source.source_position();
    let source_err = true_source.and_then(|ls| {
        let per_agent: Vec<Scalar> = record
            .estimates
            .iter()
            .filter_map(|agent| agent.last())
            .map(|est| {
                let (hat, _, _) = estimated_source(est, &record.template, arena, step);
                source_error(hat, ls)
            })
            .collect();
        if per_agent.is_empty() {
            None
        } else {
            Some(per_agent.iter().sum::<Scalar>() / per_agent.len() as Scalar)
        }
    });

    let whca_val = record.estimates.first().and_then(|agent| {
        agent
            .last()
            .map(|est| whca(est, &record.template, arena, step, 1.0))
    });

    RunMetrics {
        seed: record.seed,
        anmse_final,
        anmse_curve,
        source_error: source_err,
        whca: whca_val,
        coverage_final_pct: record.coverage_curve.last().map(|c| c.1),
        collisions: record.collisions.len(),
        path_length_total: record.path_lengths.iter().sum(),
        final_time: record.final_time,
    }
}

/// One row of the summary: metric name, mean, 95% CI half-width, sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

/// Everything an experiment produces in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: String,
    pub mode: RunMode,
    pub records: Vec<RunRecord<Scalar>>,
    pub metrics: Vec<RunMetrics>,
    pub summary: Vec<SummaryRow>,
}

fn summarize(metrics: &[RunMetrics]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let mut push = |name: &str, samples: Vec<f64>| {
        if let Ok((mean, ci)) = mean_ci95(&samples) {
            rows.push(SummaryRow {
                metric: name.to_string(),
                mean,
                ci95: ci,
                n: samples.len(),
            });
        }
    };
    push(
        "anmse_final",
        metrics.iter().filter_map(|m| m.anmse_final).collect(),
    );
    push(
        "source_error_m",
        metrics.iter().filter_map(|m| m.source_error).collect(),
    );
    push("whca_m", metrics.iter().filter_map(|m| m.whca).collect());
    push(
        "coverage_final_pct",
        metrics.iter().filter_map(|m| m.coverage_final_pct).collect(),
    );
    push(
        "collisions",
        metrics.iter().map(|m| m.collisions as f64).collect(),
    );
    push(
        "path_length_total_m",
        metrics.iter().map(|m| m.path_length_total).collect(),
    );
    rows
}

/// Run the configured repetitions and summarize. When `out` is given, each
/// run writes CSV logs under `out/run-<seed>/` and the summary lands in
/// `out/summary.csv` plus `out/summary.txt`.
pub fn run_experiment(
    scenario: &WorldScenario<Scalar>,
    config: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<ExperimentResult> {
    let mut records = Vec::with_capacity(config.reps);
    let mut metrics = Vec::with_capacity(config.reps);
    for rep in 0..config.reps {
        let seed = config.seed_base + rep as u64;
        let record = run_mission(scenario, &config.runner, seed)?;
        let m = compute_run_metrics(&record, scenario);
        if let Some(dir) = out {
            let run_dir = dir.join(format!("run-{seed}"));
            fs::create_dir_all(&run_dir)?;
            write_run_csvs(&record, &m, &run_dir)?;
        }
        records.push(record);
        metrics.push(m);
    }
    let summary = summarize(&metrics);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), summary_csv(&summary))?;
        fs::write(dir.join("summary.txt"), summary_table(&summary))?;
    }
    Ok(ExperimentResult {
        scenario: scenario.name.clone(),
        mode: config.runner.mode,
        records,
        metrics,
        summary,
    })
}

/// CSV logs of one run: estimates, trajectory, events, coverage, metrics.
pub fn write_run_csvs(
    record: &RunRecord<Scalar>,
    metrics: &RunMetrics,
    dir: &Path,
) -> Result<()> {
    // estimates.csv: one row per agent per epoch; gains are a
    // semicolon-joined list to keep the column count fixed.
    let mut s = String::from("epoch,time_s,agent,noise_var_hat,gains\n");
    for (agent, per_epoch) in record.estimates.iter().enumerate() {
        for (e, est) in per_epoch.iter().enumerate() {
            let gains = est
                .gains_hat
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(";");
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e, record.epoch_times[e], agent, est.noise_var_hat, gains
            ));
        }
    }
    fs::write(dir.join("estimates.csv"), s)?;

    let mut s = String::from("time_s,robot,x,y\n");
    for (t, ps) in &record.trajectory {
        for (i, p) in ps.iter().enumerate() {
            s.push_str(&format!("{t},{i},{},{}\n", p.x, p.y));
        }
    }
    fs::write(dir.join("trajectory.csv"), s)?;

    let mut s = String::from("time_s,kind,detail\n");
    for c in &record.mode_changes {
        s.push_str(&format!("{},mode-change,{}->{}\n", c.time, c.from, c.to));
    }
    for c in &record.collisions {
        let detail = match c.other_robot {
            Some(j) => format!("robot {} with robot {j}", c.robot),
            None => format!("robot {} with obstacle", c.robot),
        };
        s.push_str(&format!("{},collision,{}\n", c.time, detail));
    }
    fs::write(dir.join("events.csv"), s)?;

    if !record.coverage_curve.is_empty() {
        let mut s = String::from("time_s,coverage_pct\n");
        for (t, pct) in &record.coverage_curve {
            s.push_str(&format!("{t},{pct}\n"));
        }
        fs::write(dir.join("coverage.csv"), s)?;
    }

    if let Some(curve) = &metrics.anmse_curve {
        let mut s = String::from("epoch,time_s,anmse\n");
        for (e, v) in curve.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", e, record.epoch_times[e], v));
        }
        fs::write(dir.join("anmse.csv"), s)?;
    }

    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(metrics).expect("metrics serialize"),
    )?;
    Ok(())
}

/// Machine-readable summary.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("metric,mean,ci95,n\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.metric, r.mean, r.ci95, r.n));
    }
    s
}

/// Aligned text table of the summary.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let name_w = rows
        .iter()
        .map(|r| r.metric.len())
        .chain(std::iter::once("metric".len()))
        .max()
        .unwrap_or(6);
    let mut s = format!("{:<name_w$}  {:>14}  {:>14}  {:>3}\n", "metric", "mean", "ci95", "n");
    for r in rows {
        s.push_str(&format!(
            "{:<name_w$}  {:>14.6}  {:>14.6}  {:>3}\n",
            r.metric, r.mean, r.ci95, r.n
        ));
    }
    s
}

/// Paired comparison of two modes on the same scenario and seed ladder:
/// time-indexed mean ANMSE curves side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub mode_a: RunMode,
    pub mode_b: RunMode,
    /// (simulated time, mean ANMSE of A, mean ANMSE of B). Times form a
    /// uniform grid; each run contributes its latest cumulative ANMSE at or
    /// before the grid time (measurement epochs differ across modes, so
    /// curves are compared on the time axis, not the epoch axis).
    pub rows: Vec<(Scalar, Scalar, Scalar)>,
    /// Mean over repetitions of the final cumulative ANMSE of each mode.
    pub final_a: Scalar,
    pub final_b: Scalar,
}

/// Spacing of the comparison time grid, seconds.
pub const COMPARE_GRID_STEP: Scalar = 10.0;

/// Cumulative-ANMSE value of one run at time `t`: the value at the latest
/// epoch not after `t`, or `None` before the first epoch.
fn curve_at(times: &[Scalar], curve: &[Scalar], t: Scalar) -> Option<Scalar> {
    let k = times.partition_point(|&et| et <= t);
    if k == 0 {
        None
    } else {
        Some(curve[(k - 1).min(curve.len() - 1)])
    }
}

/// Run both modes and pair their mean cumulative ANMSE curves on a common
/// time grid. Synthetic-truth scenarios only.
pub fn compare_modes(
    scenario: &WorldScenario<Scalar>,
    base_runner: &RunnerConfig<Scalar>,
    mode_a: RunMode,
    mode_b: RunMode,
    reps: usize,
    seed_base: u64,
    out: Option<&Path>,
) -> Result<Comparison> {
    let mut cfg_a = base_runner.clone();
    cfg_a.mode = mode_a;
    let mut cfg_b = base_runner.clone();
    cfg_b.mode = mode_b;
    let res_a = run_experiment(scenario, &ExperimentConfig::new(cfg_a, reps, seed_base)?, None)?;
    let res_b = run_experiment(scenario, &ExperimentConfig::new(cfg_b, reps, seed_base)?, None)?;

    // Each run as (epoch times, cumulative ANMSE curve).
    let run_curves = |res: &ExperimentResult| -> Result<Vec<(Vec<Scalar>, Vec<Scalar>)>> {
        res.metrics
            .iter()
            .zip(&res.records)
            .map(|(m, r)| {
                let c = m.anmse_curve.as_ref().ok_or_else(|| {
                    Error::Config("comparison needs a synthetic-truth scenario".into())
                })?;
                Ok((r.epoch_times.clone(), c.clone()))
            })
            .collect()
    };
    let runs_a = run_curves(&res_a)?;
    let runs_b = run_curves(&res_b)?;
    // Grid spans from after every run's first epoch to the earliest last
    // epoch, so every grid point averages all repetitions of both modes.
    let all = runs_a.iter().chain(runs_b.iter());
    let t_lo = all
        .clone()
        .filter_map(|(t, _)| t.first().copied())
        .fold(Scalar::NEG_INFINITY, Scalar::max);
    let t_hi = all
        .filter_map(|(t, _)| t.last().copied())
        .fold(Scalar::INFINITY, Scalar::min);
    let mean_at = |runs: &[(Vec<Scalar>, Vec<Scalar>)], t: Scalar| -> Option<Scalar> {
        let vals: Vec<Scalar> = runs
            .iter()
            .filter_map(|(times, curve)| curve_at(times, curve, t))
            .collect();
        (vals.len() == runs.len())
            .then(|| vals.iter().sum::<Scalar>() / vals.len() as Scalar)
    };
    let mut rows = Vec::new();
    let mut k = (t_lo / COMPARE_GRID_STEP).ceil().max(1.0) as u64;
    loop {
        let t = COMPARE_GRID_STEP * k as Scalar;
        if t > t_hi {
            break;
        }
        if let (Some(a), Some(b)) = (mean_at(&runs_a, t), mean_at(&runs_b, t)) {
            rows.push((t, a, b));
        }
        k += 1;
    }
    // Always close the grid at the common endpoint so short runs still
    // produce at least one paired row.
    if rows.last().map_or(true, |r| r.0 < t_hi) && t_hi >= t_lo {
        if let (Some(a), Some(b)) = (mean_at(&runs_a, t_hi), mean_at(&runs_b, t_hi)) {
            rows.push((t_hi, a, b));
        }
    }
    let final_mean = |runs: &[(Vec<Scalar>, Vec<Scalar>)]| -> Scalar {
        let vals: Vec<Scalar> = runs
            .iter()
            .filter_map(|(_, curve)| curve.last().copied())
            .collect();
        if vals.is_empty() {
            Scalar::NAN
        } else {
            vals.iter().sum::<Scalar>() / vals.len() as Scalar
        }
    };
    let cmp = Comparison {
        scenario: scenario.name.clone(),
        mode_a,
        mode_b,
        final_a: final_mean(&runs_a),
        final_b: final_mean(&runs_b),
        rows,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut s = format!("time_s,anmse_{mode_a},anmse_{mode_b}\n");
        for (t, a, b) in &cmp.rows {
            s.push_str(&format!("{t},{a},{b}\n"));
        }
        fs::write(dir.join("compare.csv"), s)?;
    }
    Ok(cmp)
}
