//! Closed-form server CPU allocation.
//!
//! UE energy does not depend on the server frequency, so the energy-optimal
//! allocation is the smallest one that still finishes each offloaded task
//! within its slot: `f = C / (slot_len - comm_time)`.

use serde::{Deserialize, Serialize};

use crate::model::{
    OffloadPlan, Placement, ScenarioSpec, ServerKind, Trajectory, Venue, CPU_REL_TOL,
};
use crate::phys;

/// Offloaded `(ue, slot)` pairs that cannot be served as assigned.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InfeasibleSet {
    pub pairs: Vec<(usize, usize)>,
}

/// Minimal deadline-meeting frequency, or `None` when the upload alone uses
/// up the slot.
pub fn min_frequency(cpu_cycles: f64, comm_time: f64, slot_len: f64) -> Option<f64> {
    let budget = slot_len - comm_time;
    if budget <= 0.0 || !budget.is_finite() {
        return None;
    }
    Some(cpu_cycles / budget)
}

/// `true` when a per-slot frequency sum fits the server capacity.
pub fn fits_capacity(total: f64, capacity: f64) -> bool {
    total <= capacity * (1.0 + CPU_REL_TOL)
}

/// Fills in `cpu_alloc` for the given venues.
///
/// The placement is not consulted: venues are assumed to already satisfy
/// association caps, coverage and placement.
pub fn allocate_cpu(
    spec: &ScenarioSpec,
    _placement: &Placement,
    venues: &[Vec<Venue>],
    traj: &Trajectory,
) -> Result<OffloadPlan, InfeasibleSet> {
    let n_ue = spec.num_ues();
    let mut cpu_alloc = vec![vec![0.0; spec.num_slots]; n_ue];
    let mut bad = Vec::new();

    for t in 0..spec.num_slots {
        let uav_pos = traj.slot_position(t);
        let mut total = [0.0f64; 2];
        let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for i in 0..n_ue {
            let Some(kind) = venues[i][t].server() else {
                continue;
            };
            let task = spec.task(i, t);
            let f = spec.link_rate(i, kind, uav_pos).ok().and_then(|r| {
                min_frequency(task.cpu_cycles, phys::comm_time(task, r), spec.slot_len)
            });
            match f {
                Some(f) => {
                    cpu_alloc[i][t] = f;
                    total[kind.index()] += f;
                    members[kind.index()].push(i);
                }
                None => bad.push((i, t)),
            }
        }
        for kind in ServerKind::ALL {
            if !fits_capacity(total[kind.index()], spec.cpu_capacity(kind)) {
                bad.extend(members[kind.index()].iter().map(|&i| (i, t)));
            }
        }
    }

    if bad.is_empty() {
        Ok(OffloadPlan {
            venue: venues.to_vec(),
            cpu_alloc,
        })
    } else {
        bad.sort_unstable();
        Err(InfeasibleSet { pairs: bad })
    }
}
