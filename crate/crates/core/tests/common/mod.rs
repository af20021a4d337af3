#![allow(dead_code)]

use agmec::model::{Placement, Point2, ScenarioSpec, TaskSpec, Trajectory};
use agmec::scenario::{generate, GeneratorParams};
use agmec::testutil::tiny_spec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generated instance small enough for placement enumeration: at most
/// 3 UEs, 4 services and 10 slots, with storage tight enough to bind.
pub fn small_generated(seed: u64) -> ScenarioSpec {
    let mut r = rng(seed ^ 0x5eed);
    generate(&GeneratorParams {
        num_ues: r.gen_range(1..=3),
        num_services: r.gen_range(2..=4),
        num_slots: 10,
        uav_storage: r.gen_range(0.5..2.5),
        seed,
        ..GeneratorParams::default()
    })
    .unwrap()
}

/// One-slot instance with the UAV parked at a random point, random UE
/// positions, caps and CPU budgets.
pub fn one_slot(seed: u64, num_ues: usize) -> (ScenarioSpec, Placement, Trajectory) {
    let mut r = rng(seed);
    let tasks: Vec<TaskSpec> = (0..num_ues)
        .map(|_| TaskSpec {
            cpu_cycles: r.gen_range(1e8..1e9),
            input_bits: r.gen_range(8e5..8e6),
            required_service: r.gen_range(0..3),
        })
        .collect();
    let mut spec = tiny_spec(num_ues, 1, |i, _| tasks[i]);
    for ue in &mut spec.ues {
        ue.position = Point2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0));
    }
    let park = Point2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0));
    spec.uav.start_pos = park;
    spec.uav.end_pos = park;
    spec.uav.coverage_radius = r.gen_range(60.0..140.0);
    spec.uav.cpu_capacity = r.gen_range(1e9..8e9);
    spec.uav.max_associated_ues = r.gen_range(1..=3);
    spec.bs.position = Point2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0));
    spec.bs.cpu_capacity = r.gen_range(2e9..15e9);
    spec.bs.max_associated_ues = r.gen_range(1..=3);
    let n = spec.num_services();
    let mut placement = Placement::empty(n);
    for k in 0..n {
        placement.placed[k] = [r.gen_bool(0.7), r.gen_bool(0.7)];
    }
    let traj = Trajectory::for_spec(&spec);
    (spec, placement, traj)
}

/// Mean horizontal distance between each UAV-served UE and the UAV position
/// of the slot it is served in.
pub fn mean_uav_distance(
    spec: &ScenarioSpec,
    venues: &[Vec<agmec::model::Venue>],
    traj: &Trajectory,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, row) in venues.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            if *v == agmec::model::Venue::Uav {
                sum += spec.ues[i].position.dist(traj.slot_position(t));
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / n as f64)
}
