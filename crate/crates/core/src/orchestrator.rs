//! The alternating scheme and the three comparison baselines.
//!
//! A round re-places services by branch and bound for the current
//! trajectory (warm-started from the current placement), fixes the
//! closed-form CPU allocation, then moves the trajectory by SCA. Each block
//! keeps the current point feasible and never raises the energy, so the
//! per-round trace is non-increasing.

use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    evaluate_energy, OffloadPlan, Placement, ScenarioSpec, ServerKind, SolutionReport, SolverStats,
    Trajectory, STORAGE_TOL,
};
use crate::placement::{bnb_place_with, solve_offload_given_placement, BnbOptions};
use crate::scenario::{stream, Stream};
use crate::trajectory::{sca_optimize_with, ScaOptions};

/// Algorithm names as they appear in reports and result tables.
pub const PROPOSED: &str = "proposed";
pub const RANDOM: &str = "random";
pub const GREEDY: &str = "greedy";
pub const LOCAL: &str = "local";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop once a round lowers the energy by less than this (J).
    pub tol: f64,
    pub max_iters: usize,
    /// Node budget of each placement search; 0 searches to optimality.
    pub bnb_node_limit: u64,
    pub sca: ScaOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iters: 10,
            bnb_node_limit: 1000,
            sca: ScaOptions::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        if self.sca.max_iters == 0 || !(self.sca.kkt_tol > 0.0) || !(self.sca.min_decrease >= 0.0) {
            return Err(Error::InvalidParams("SCA options out of range".into()));
        }
        Ok(())
    }
}

/// Alternating optimisation with default settings apart from `tol` and
/// `max_iters`.
pub fn alternating_solve(
    spec: &ScenarioSpec,
    tol: f64,
    max_iters: usize,
) -> Result<SolutionReport> {
    alternating_solve_with(
        spec,
        &SolverSettings {
            tol,
            max_iters,
            ..SolverSettings::default()
        },
    )
}

pub fn alternating_solve_with(
    spec: &ScenarioSpec,
    settings: &SolverSettings,
) -> Result<SolutionReport> {
    spec.validate()?;
    settings.validate()?;
    let started = Instant::now();

    let mut traj = Trajectory::for_spec(spec);
    let mut placement = greedy_placement(spec);
    let mut plan = solve_offload_given_placement(spec, &placement, &traj)?;
    let initial = evaluate_energy(spec, &placement, &plan, &traj)?;
    let mut energy = initial;
    let mut trace = Vec::new();
    let mut stats = SolverStats::default();

    for round in 1..=settings.max_iters {
        let opts = BnbOptions {
            warm_start: Some(placement.clone()),
            node_limit: (settings.bnb_node_limit > 0).then_some(settings.bnb_node_limit),
            ..BnbOptions::default()
        };
        let placed = bnb_place_with(spec, &traj, &opts)?;
        stats.bnb_nodes += placed.nodes;
        stats.bnb_gap = placed.objective - placed.lower_bound;

        let (new_traj, new_plan) =
            match sca_optimize_with(spec, &placed.placement, &placed.plan, &traj, &settings.sca) {
                Ok(out) => {
                    stats.sca_iterations += out.iterations as u64;
                    (out.trajectory, out.plan)
                }
                Err(Error::SubproblemInfeasible(why)) => {
                    warn!("round {round}: trajectory kept ({why})");
                    (traj.clone(), placed.plan.clone())
                }
                Err(e) => return Err(e),
            };
        let new_energy = evaluate_energy(spec, &placed.placement, &new_plan, &new_traj)?;
        stats.rounds = round as u64;
        if new_energy > energy {
            // Only reachable through rounding; keep the better point.
            trace.push(energy);
            break;
        }
        let decrease = energy - new_energy;
        placement = placed.placement;
        plan = new_plan;
        traj = new_traj;
        energy = new_energy;
        trace.push(energy);
        info!("round {round}: {energy:.6} J (decrease {decrease:.3e})");
        if decrease < settings.tol {
            break;
        }
    }

    stats.wall_time_s = started.elapsed().as_secs_f64();
    SolutionReport::from_solution(
        PROPOSED,
        spec,
        placement,
        plan,
        traj,
        Some(initial),
        trace,
        stats,
    )
}

/// Packs services in the given order, skipping any that no longer fit.
fn pack(spec: &ScenarioSpec, kind: ServerKind, order: &[usize], placement: &mut Placement) {
    let cap = spec.storage_capacity(kind);
    let mut used = 0.0;
    for &k in order {
        let size = spec.services.sizes[k];
        if used + size <= cap + STORAGE_TOL {
            placement.set(k, kind, true);
            used += size;
        }
    }
}

/// Smallest services first on each server, ties by id: the most services
/// that fit.
pub fn greedy_placement(spec: &ScenarioSpec) -> Placement {
    let sizes = &spec.services.sizes;
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[a].total_cmp(&sizes[b]).then(a.cmp(&b)));
    let mut p = Placement::empty(sizes.len());
    for kind in ServerKind::ALL {
        pack(spec, kind, &order, &mut p);
    }
    p
}

/// Services in an independent seeded random order per server, each placed
/// if it still fits.
pub fn random_placement(spec: &ScenarioSpec, seed: u64) -> Placement {
    let mut rng = stream(seed, Stream::RandomPlacement);
    let n = spec.num_services();
    let mut p = Placement::empty(n);
    for kind in ServerKind::ALL {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        pack(spec, kind, &order, &mut p);
    }
    p
}

fn baseline(spec: &ScenarioSpec, name: &str, placement: Placement) -> Result<SolutionReport> {
    spec.validate()?;
    let started = Instant::now();
    let traj = Trajectory::for_spec(spec);
    let plan = solve_offload_given_placement(spec, &placement, &traj)?;
    let stats = SolverStats {
        rounds: 1,
        wall_time_s: started.elapsed().as_secs_f64(),
        ..SolverStats::default()
    };
    SolutionReport::from_solution(name, spec, placement, plan, traj, None, Vec::new(), stats)
}

/// Random placement, exact offloading, straight-line flight.
pub fn baseline_random(spec: &ScenarioSpec, seed: u64) -> Result<SolutionReport> {
    baseline(spec, RANDOM, random_placement(spec, seed))
}

/// Size-greedy placement, exact offloading, straight-line flight.
pub fn baseline_greedy(spec: &ScenarioSpec) -> Result<SolutionReport> {
    baseline(spec, GREEDY, greedy_placement(spec))
}

/// Everything runs on the UEs.
pub fn baseline_local(spec: &ScenarioSpec) -> Result<SolutionReport> {
    spec.validate()?;
    let traj = Trajectory::for_spec(spec);
    let plan = OffloadPlan::all_local(spec.num_ues(), spec.num_slots);
    let stats = SolverStats {
        rounds: 1,
        ..SolverStats::default()
    };
    SolutionReport::from_solution(
        LOCAL,
        spec,
        Placement::empty(spec.num_services()),
        plan,
        traj,
        None,
        Vec::new(),
        stats,
    )
}
