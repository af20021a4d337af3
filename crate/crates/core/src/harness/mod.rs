//! Experiment plans, sweep execution and result tables.
//!
//! Every (sweep value, seed) cell runs the four algorithms on one generated
//! scenario. Cells run in parallel, but rows are ordered by sweep value,
//! seed and algorithm, and no timing data enters `results.csv`, so the table
//! is a pure function of the plan.

pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_feasible, ScenarioSpec, SolutionReport, Trajectory, Venue};
use crate::orchestrator::{
    alternating_solve_with, baseline_greedy, baseline_local, baseline_random, SolverSettings,
    GREEDY, LOCAL, PROPOSED, RANDOM,
};
use crate::scenario::{generate, GeneratorParams};

pub use plot::emit_plots;

/// Algorithms in result-table order.
pub const ALGORITHMS: [&str; 4] = [PROPOSED, RANDOM, GREEDY, LOCAL];

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const UES_FILE: &str = "ues.csv";
pub const PLAN_FILE: &str = "plan.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    Trajectory,
    StorageSweep,
    WorkloadSweep,
}

impl ExperimentKind {
    pub fn is_sweep(self) -> bool {
        matches!(self, Self::StorageSweep | Self::WorkloadSweep)
    }

    /// Axis label of the swept quantity.
    pub fn sweep_label(self) -> &'static str {
        match self {
            Self::WorkloadSweep => "workload coefficient",
            _ => "UAV storage (units)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    /// Values of the swept parameter. Ignored by non-sweep kinds, whose
    /// rows carry the generator's UAV storage instead.
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub generator: GeneratorParams,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_num_seeds() -> usize {
    20
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.kind.is_sweep() {
            if self.sweep_values.is_empty() {
                return Err(Error::Config(
                    "sweep_values must not be empty for a sweep".into(),
                ));
            }
            if self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(
                    "sweep_values must be strictly increasing".into(),
                ));
            }
            if self.sweep_values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep_values must be finite".into()));
            }
        }
        self.generator
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for v in self.sweep_values() {
            self.params_for(v, 0)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Swept values actually used.
    pub fn sweep_values(&self) -> Vec<f64> {
        if self.kind.is_sweep() {
            self.sweep_values.clone()
        } else {
            vec![self.generator.uav_storage]
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64)
            .map(|s| self.generator.seed.wrapping_add(s))
            .collect()
    }

    /// Generator parameters of one cell.
    pub fn params_for(&self, sweep_value: f64, seed: u64) -> GeneratorParams {
        let mut p = self.generator.clone();
        p.seed = seed;
        match self.kind {
            ExperimentKind::StorageSweep => p.uav_storage = sweep_value,
            ExperimentKind::WorkloadSweep => p.workload_coefficient = sweep_value,
            ExperimentKind::Convergence | ExperimentKind::Trajectory => {}
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub algorithm: String,
    pub total_energy_j: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub algorithm: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub algorithm: String,
    pub mean_energy_j: f64,
    /// Mean over seeds of `1 - proposed / algorithm`, in percent.
    pub proposed_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep_value: f64,
    pub seed: u64,
    /// 0 is the starting point.
    pub round: usize,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub waypoint: usize,
    pub x: f64,
    pub y: f64,
    pub straight_x: f64,
    pub straight_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub ue: usize,
    pub x: f64,
    pub y: f64,
    /// Slots in which the proposed solution serves this UE from the UAV.
    pub uav_slots: usize,
}

/// One cell's four reports, in [`ALGORITHMS`] order.
#[derive(Debug, Clone)]
pub struct Cell {
    pub sweep_value: f64,
    pub seed: u64,
    pub spec: ScenarioSpec,
    pub reports: Vec<SolutionReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub plan: ExperimentPlan,
    pub cells: Vec<Cell>,
}

fn run_cell(plan: &ExperimentPlan, sweep_value: f64, seed: u64) -> Result<Cell> {
    let spec = generate(&plan.params_for(sweep_value, seed))?;
    let reports = vec![
        alternating_solve_with(&spec, &plan.solver)?,
        baseline_random(&spec, seed)?,
        baseline_greedy(&spec)?,
        baseline_local(&spec)?,
    ];
    for r in &reports {
        if let Some(v) = check_feasible(&spec, &r.placement, &r.offload_plan, &r.trajectory)
            .into_iter()
            .next()
        {
            return Err(Error::ConstraintViolation(v));
        }
    }
    info!(
        "cell sweep={sweep_value} seed={seed}: proposed {:.4} J",
        reports[0].total_energy
    );
    Ok(Cell {
        sweep_value,
        seed,
        spec,
        reports,
    })
}

/// Runs every cell of the plan. `threads` of `None` uses rayon's default.
pub fn run_experiment(plan: &ExperimentPlan, threads: Option<usize>) -> Result<ExperimentResults> {
    plan.validate()?;
    let cells: Vec<(f64, u64)> = plan
        .sweep_values()
        .into_iter()
        .flat_map(|v| plan.seeds().into_iter().map(move |s| (v, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        cells
            .par_iter()
            .map(|&(v, s)| run_cell(plan, v, s))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentResults {
        plan: plan.clone(),
        cells,
    })
}

impl ExperimentResults {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.reports.iter().map(move |r| ResultRow {
                    sweep_value: c.sweep_value,
                    seed: c.seed,
                    algorithm: r.algorithm.clone(),
                    total_energy_j: r.total_energy,
                    iterations: r.stats.rounds,
                })
            })
            .collect()
    }

    pub fn timings(&self) -> Vec<TimingRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.reports.iter().map(move |r| TimingRow {
                    sweep_value: c.sweep_value,
                    seed: c.seed,
                    algorithm: r.algorithm.clone(),
                    wall_time_s: r.stats.wall_time_s,
                })
            })
            .collect()
    }

    pub fn trace(&self) -> Vec<TraceRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                let r = &c.reports[0];
                std::iter::once(r.initial_energy)
                    .chain(r.per_iteration_energy.iter().copied())
                    .enumerate()
                    .map(move |(round, energy_j)| TraceRow {
                        sweep_value: c.sweep_value,
                        seed: c.seed,
                        round,
                        energy_j,
                    })
            })
            .collect()
    }

    pub fn trajectories(&self) -> Vec<TrajectoryRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                let straight = Trajectory::for_spec(&c.spec);
                c.reports[0]
                    .trajectory
                    .positions
                    .iter()
                    .zip(straight.positions)
                    .enumerate()
                    .map(move |(waypoint, (p, s))| TrajectoryRow {
                        sweep_value: c.sweep_value,
                        seed: c.seed,
                        waypoint,
                        x: p.x,
                        y: p.y,
                        straight_x: s.x,
                        straight_y: s.y,
                    })
            })
            .collect()
    }

    pub fn ues(&self) -> Vec<UeRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                let venues = &c.reports[0].offload_plan.venue;
                c.spec.ues.iter().enumerate().map(move |(i, ue)| UeRow {
                    sweep_value: c.sweep_value,
                    seed: c.seed,
                    ue: i,
                    x: ue.position.x,
                    y: ue.position.y,
                    uav_slots: venues[i].iter().filter(|v| **v == Venue::Uav).count(),
                })
            })
            .collect()
    }
}

/// Mean energy per (sweep value, algorithm) and the proposed algorithm's
/// mean reduction against each, in sweep then [`ALGORITHMS`] order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut values: Vec<f64> = rows.iter().map(|r| r.sweep_value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out = Vec::new();
    for v in values {
        let at: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_value == v).collect();
        let mut seeds: Vec<u64> = at.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let energy = |alg: &str, seed: u64| {
            at.iter()
                .find(|r| r.algorithm == alg && r.seed == seed)
                .map(|r| r.total_energy_j)
        };
        for alg in ALGORITHMS {
            let mine: Vec<f64> = seeds.iter().filter_map(|&s| energy(alg, s)).collect();
            if mine.is_empty() {
                continue;
            }
            let reductions: Vec<f64> = seeds
                .iter()
                .filter_map(|&s| Some((energy(PROPOSED, s)?, energy(alg, s)?)))
                .map(|(p, a)| if a > 0.0 { 100.0 * (1.0 - p / a) } else { 0.0 })
                .collect();
            out.push(SummaryRow {
                sweep_value: v,
                algorithm: alg.to_string(),
                mean_energy_j: mine.iter().sum::<f64>() / mine.len() as f64,
                proposed_reduction_pct: reductions.iter().sum::<f64>()
                    / reductions.len().max(1) as f64,
            });
        }
    }
    out
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Writes every table and a copy of the plan into `out_dir`, returning the
/// files written.
pub fn write_results(out_dir: &Path, results: &ExperimentResults) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let rows = results.rows();
    let files = [
        RESULTS_FILE,
        TIMINGS_FILE,
        SUMMARY_FILE,
        TRACE_FILE,
        TRAJECTORY_FILE,
        UES_FILE,
        PLAN_FILE,
    ];
    let path = |f: &str| out_dir.join(f);
    write_csv(&path(RESULTS_FILE), &rows)?;
    write_csv(&path(TIMINGS_FILE), &results.timings())?;
    write_csv(&path(SUMMARY_FILE), &summarize(&rows))?;
    write_csv(&path(TRACE_FILE), &results.trace())?;
    write_csv(&path(TRAJECTORY_FILE), &results.trajectories())?;
    write_csv(&path(UES_FILE), &results.ues())?;
    fs::write(path(PLAN_FILE), results.plan.to_toml_string()?)?;
    Ok(files.iter().map(|f| path(f)).collect())
}
