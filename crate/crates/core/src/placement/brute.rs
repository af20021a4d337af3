//! Exhaustive placement enumeration, used as the reference for the BnB.

use super::{OffloadEvaluator, PlacementOutcome, TIE_EPS};
use crate::error::{Error, Result};
use crate::model::{Placement, ScenarioSpec, Trajectory};

/// At most this many (service, server) bits are enumerated.
pub const BRUTE_FORCE_MAX_BITS: usize = 16;

/// Scores every storage-feasible placement. Placements are visited in
/// tie-break order, so the first one reaching the optimum wins.
pub fn brute_force_place(spec: &ScenarioSpec, traj: &Trajectory) -> Result<PlacementOutcome> {
    let k_count = spec.num_services();
    let bits = 2 * k_count;
    if bits > BRUTE_FORCE_MAX_BITS {
        return Err(Error::BudgetExceeded {
            services: k_count,
            limit: BRUTE_FORCE_MAX_BITS,
        });
    }
    let mut ev = OffloadEvaluator::new(spec, traj)?;
    let mut best: Option<(Placement, f64)> = None;
    for code in 0u64..(1u64 << bits) {
        // Service 0's UAV bit is the most significant.
        let placed = (0..k_count)
            .map(|k| {
                let shift = bits - 2 - 2 * k;
                [code >> (shift + 1) & 1 == 1, code >> shift & 1 == 1]
            })
            .collect();
        let p = Placement { placed };
        if !p.fits(spec) {
            continue;
        }
        let v = ev.objective(&p.placed);
        if best.as_ref().is_none_or(|(_, b)| v < b - TIE_EPS) {
            best = Some((p, v));
        }
    }
    let (placement, objective) = best.expect("the empty placement always fits");
    let plan = ev.plan(spec, &placement, traj);
    Ok(PlacementOutcome {
        placement,
        plan,
        objective,
        lower_bound: objective,
        nodes: 1u64 << bits,
    })
}
