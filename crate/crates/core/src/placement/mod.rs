//! Service placement and task offloading for a fixed UAV trajectory.

pub mod assign;
mod bnb;
mod brute;

use std::collections::HashMap;

pub use assign::{solve_slot, OffloadOption, SlotLimits, TaskOptions};
pub use bnb::{bnb_place, bnb_place_with, BnbNode, BnbOptions};
pub use brute::{brute_force_place, BRUTE_FORCE_MAX_BITS};

use crate::alloc::{allocate_cpu, min_frequency};
use crate::error::{Error, Result};
use crate::model::{OffloadPlan, Placement, Point2, ScenarioSpec, ServerKind, Trajectory, Venue};
use crate::phys;

/// Largest UE count the cached evaluator supports (one bit per UE).
pub const MAX_UES: usize = 128;

/// Objective ties closer than this are broken by placement order.
pub const TIE_EPS: f64 = 1e-9;

/// Result of a placement search.
#[derive(Debug, Clone)]
pub struct PlacementOutcome {
    pub placement: Placement,
    pub plan: OffloadPlan,
    /// Total UE energy as summed by the evaluator (slot by slot).
    pub objective: f64,
    /// Proven lower bound on the optimum; equals `objective` unless a node
    /// limit stopped the search early.
    pub lower_bound: f64,
    /// Search nodes processed; for brute force, candidate placements
    /// enumerated, feasible or not.
    pub nodes: u64,
}

/// Per-task offloading options under a fixed trajectory, slot-major.
#[derive(Debug, Clone)]
pub struct TaskTable {
    pub num_ues: usize,
    pub num_slots: usize,
    pub tasks: Vec<TaskOptions>,
    pub limits: SlotLimits,
}

impl TaskTable {
    pub fn build(spec: &ScenarioSpec, traj: &Trajectory) -> Self {
        let n_ue = spec.num_ues();
        let limits = SlotLimits {
            max_ues: [spec.uav.max_associated_ues, spec.bs.max_associated_ues],
            cpu: [spec.uav.cpu_capacity, spec.bs.cpu_capacity],
        };
        let mut tasks = Vec::with_capacity(n_ue * spec.num_slots);
        for t in 0..spec.num_slots {
            let uav_pos = traj.slot_position(t);
            for i in 0..n_ue {
                let task = spec.task(i, t);
                let offload =
                    ServerKind::ALL.map(|k| offload_option(spec, i, t, k, uav_pos, &limits));
                tasks.push(TaskOptions {
                    local: spec.local_energy(i, t),
                    offload,
                    service: task.required_service,
                });
            }
        }
        Self {
            num_ues: n_ue,
            num_slots: spec.num_slots,
            tasks,
            limits,
        }
    }

    pub fn slot(&self, t: usize) -> &[TaskOptions] {
        &self.tasks[t * self.num_ues..(t + 1) * self.num_ues]
    }

    pub fn total_local(&self) -> f64 {
        self.tasks.iter().map(|t| t.local).sum()
    }
}

fn offload_option(
    spec: &ScenarioSpec,
    ue: usize,
    slot: usize,
    kind: ServerKind,
    uav_pos: &Point2,
    limits: &SlotLimits,
) -> Option<OffloadOption> {
    if kind == ServerKind::Uav && spec.ues[ue].position.dist(uav_pos) > spec.uav.coverage_radius {
        return None;
    }
    let task = spec.task(ue, slot);
    let rate = spec.link_rate(ue, kind, uav_pos).ok()?;
    let freq = min_frequency(task.cpu_cycles, phys::comm_time(task, rate), spec.slot_len)?;
    if !assign::cpu_fits(freq, limits.cpu[kind.index()]) {
        return None;
    }
    Some(OffloadOption {
        energy: phys::tx_energy(task, spec.ues[ue].tx_power, rate),
        freq,
    })
}

type SlotKey = (u128, u128);

/// Scores placements by exact per-slot offloading, memoising slot results by
/// which UEs may use which server.
pub struct OffloadEvaluator {
    table: TaskTable,
    cache: Vec<HashMap<SlotKey, (f64, Vec<Venue>)>>,
    /// Number of placements scored.
    pub evaluations: u64,
}

impl OffloadEvaluator {
    pub fn new(spec: &ScenarioSpec, traj: &Trajectory) -> Result<Self> {
        if spec.num_ues() > MAX_UES {
            return Err(Error::InvalidScenario(format!(
                "exact offloading supports at most {MAX_UES} UEs, got {}",
                spec.num_ues()
            )));
        }
        if traj.positions.len() != spec.num_slots + 1 {
            return Err(Error::InvalidScenario(
                "trajectory length does not match the slot count".into(),
            ));
        }
        let table = TaskTable::build(spec, traj);
        Ok(Self {
            cache: vec![HashMap::new(); table.num_slots],
            table,
            evaluations: 0,
        })
    }

    pub fn table(&self) -> &TaskTable {
        &self.table
    }

    fn slot_key(&self, t: usize, placed: &[[bool; 2]]) -> SlotKey {
        let mut key = (0u128, 0u128);
        for (i, task) in self.table.slot(t).iter().enumerate() {
            let p = placed[task.service];
            if p[0] && task.saving(ServerKind::Uav).is_some() {
                key.0 |= 1 << i;
            }
            if p[1] && task.saving(ServerKind::Bs).is_some() {
                key.1 |= 1 << i;
            }
        }
        key
    }

    fn slot_solution(&mut self, t: usize, placed: &[[bool; 2]]) -> &(f64, Vec<Venue>) {
        let key = self.slot_key(t, placed);
        let table = &self.table;
        self.cache[t].entry(key).or_insert_with(|| {
            let allowed: Vec<[bool; 2]> = (0..table.num_ues)
                .map(|i| [key.0 >> i & 1 == 1, key.1 >> i & 1 == 1])
                .collect();
            solve_slot(table.slot(t), &allowed, &table.limits)
        })
    }

    /// Minimum total energy achievable with this placement.
    pub fn objective(&mut self, placed: &[[bool; 2]]) -> f64 {
        self.evaluations += 1;
        (0..self.table.num_slots)
            .map(|t| self.slot_solution(t, placed).0)
            .sum()
    }

    /// Optimal venues, `[ue][slot]`.
    pub fn venues(&mut self, placed: &[[bool; 2]]) -> Vec<Vec<Venue>> {
        let n_ue = self.table.num_ues;
        let mut out = vec![vec![Venue::Local; self.table.num_slots]; n_ue];
        for t in 0..self.table.num_slots {
            let (_, v) = self.slot_solution(t, placed);
            for (i, venue) in v.iter().enumerate() {
                out[i][t] = *venue;
            }
        }
        out
    }

    /// Optimal plan with closed-form allocations filled in.
    pub fn plan(
        &mut self,
        spec: &ScenarioSpec,
        placement: &Placement,
        traj: &Trajectory,
    ) -> OffloadPlan {
        let venues = self.venues(&placement.placed);
        allocate_cpu(spec, placement, &venues, traj)
            .expect("slot solver only emits CPU-feasible assignments")
    }
}

/// Exact minimum-energy offloading for a fixed placement and trajectory.
/// Tasks with no feasible offload venue run locally.
pub fn solve_offload_given_placement(
    spec: &ScenarioSpec,
    placement: &Placement,
    traj: &Trajectory,
) -> Result<OffloadPlan> {
    let mut eval = OffloadEvaluator::new(spec, traj)?;
    Ok(eval.plan(spec, placement, traj))
}
