use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use agmec::harness::{emit_plots, run_experiment, write_results, ExperimentPlan};
use agmec::model::{check_feasible, evaluate_energy, ScenarioSpec, SolutionReport};
use agmec::orchestrator::{
    alternating_solve_with, baseline_greedy, baseline_local, baseline_random, SolverSettings,
};
use agmec::scenario::{generate, GeneratorParams};

#[derive(Parser)]
#[command(name = "agmec", version, about = "Air-ground MEC energy minimisation")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated scenario as TOML.
    Generate {
        #[command(flatten)]
        params: GenArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve one scenario and write the report as JSON.
    Solve {
        scenario: PathBuf,
        #[arg(short, long, value_enum, default_value_t = Algorithm::Proposed)]
        algorithm: Algorithm,
        /// Seed of the random baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solver settings (TOML); defaults when omitted.
        #[arg(long)]
        settings: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan and write its tables.
    Run {
        plan: PathBuf,
        /// Overrides the plan's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
        /// Also render the figures.
        #[arg(long)]
        plot: bool,
    },
    /// Render figures from a results directory (or a table inside one).
    Plot { table: PathBuf },
    /// Check a solution report against its scenario.
    Validate {
        scenario: PathBuf,
        solution: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Proposed,
    Random,
    Greedy,
    Local,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = GeneratorParams::default().num_ues)]
    num_ues: usize,
    #[arg(long, default_value_t = GeneratorParams::default().num_services)]
    num_services: usize,
    #[arg(long, default_value_t = GeneratorParams::default().num_slots)]
    num_slots: usize,
    #[arg(long, default_value_t = GeneratorParams::default().zipf_skew)]
    zipf_skew: f64,
    #[arg(long, default_value_t = GeneratorParams::default().workload_coefficient)]
    workload_coefficient: f64,
    #[arg(long, default_value_t = GeneratorParams::default().uav_storage)]
    uav_storage: f64,
    #[arg(long, default_value_t = GeneratorParams::default().seed)]
    seed: u64,
}

impl From<GenArgs> for GeneratorParams {
    fn from(a: GenArgs) -> Self {
        Self {
            num_ues: a.num_ues,
            num_services: a.num_services,
            num_slots: a.num_slots,
            zipf_skew: a.zipf_skew,
            workload_coefficient: a.workload_coefficient,
            uav_storage: a.uav_storage,
            seed: a.seed,
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_settings(path: Option<&Path>) -> Result<SolverSettings> {
    let Some(p) = path else {
        return Ok(SolverSettings::default());
    };
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let s: SolverSettings =
        toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    s.validate()?;
    Ok(s)
}

fn results_dir(table: &Path) -> PathBuf {
    if table.is_dir() {
        table.to_path_buf()
    } else {
        table
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Returns whether the solution was valid.
fn validate(scenario: &Path, solution: &Path) -> Result<bool> {
    let spec = ScenarioSpec::load(scenario)?;
    let report = SolutionReport::load(solution)
        .with_context(|| format!("reading {}", solution.display()))?;
    let violations = check_feasible(
        &spec,
        &report.placement,
        &report.offload_plan,
        &report.trajectory,
    );
    if !violations.is_empty() {
        for v in &violations {
            println!("violation: {v}");
        }
        return Ok(false);
    }
    let energy = evaluate_energy(
        &spec,
        &report.placement,
        &report.offload_plan,
        &report.trajectory,
    )?;
    let drift = (energy - report.total_energy).abs();
    if drift > 1e-9 * energy.abs().max(1.0) {
        println!(
            "energy mismatch: report says {} J, evaluated {energy} J",
            report.total_energy
        );
        return Ok(false);
    }
    println!("ok: feasible, {energy:.6} J");
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { params, out } => {
            let spec = generate(&params.into())?;
            emit(out.as_deref(), &spec.to_toml_string()?)?;
        }
        Command::Solve {
            scenario,
            algorithm,
            seed,
            settings,
            out,
        } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let report = match algorithm {
                Algorithm::Proposed => {
                    alternating_solve_with(&spec, &load_settings(settings.as_deref())?)?
                }
                Algorithm::Random => baseline_random(&spec, seed)?,
                Algorithm::Greedy => baseline_greedy(&spec)?,
                Algorithm::Local => baseline_local(&spec)?,
            };
            info!(
                "{}: {:.6} J in {} rounds",
                report.algorithm, report.total_energy, report.stats.rounds
            );
            emit(out.as_deref(), &report.to_json_string()?)?;
        }
        Command::Run {
            plan,
            seed,
            out_dir,
            threads,
            plot,
        } => {
            let mut plan = ExperimentPlan::load(&plan)?;
            if let Some(s) = seed {
                plan.generator.seed = s;
            }
            if threads == Some(0) {
                bail!("--threads must be at least 1");
            }
            let results = run_experiment(&plan, threads)?;
            for f in write_results(&out_dir, &results)? {
                println!("{}", f.display());
            }
            if plot {
                for f in emit_plots(&out_dir)? {
                    println!("{}", f.display());
                }
            }
        }
        Command::Plot { table } => {
            for f in emit_plots(&results_dir(&table))? {
                println!("{}", f.display());
            }
        }
        Command::Validate { scenario, solution } => return validate(&scenario, &solution),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
