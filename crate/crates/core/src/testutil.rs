//! Hand-built scenarios for tests and examples.

use crate::model::{
    PhysicsConstants, Point2, ScenarioSpec, ServerSpec, ServiceCatalog, TaskSpec, UavSpec, UeSpec,
};
use crate::scenario::zipf_popularity;

/// A small scenario with the UAV hovering over the area centre and UEs placed
/// on a ring around it. `task(ue, slot)` supplies every task; the catalog has
/// one 0.5-unit service per distinct id used.
pub fn tiny_spec(
    num_ues: usize,
    num_slots: usize,
    task: impl Fn(usize, usize) -> TaskSpec,
) -> ScenarioSpec {
    let tasks: Vec<Vec<TaskSpec>> = (0..num_ues)
        .map(|i| (0..num_slots).map(|t| task(i, t)).collect())
        .collect();
    let num_services = tasks
        .iter()
        .flatten()
        .map(|t| t.required_service + 1)
        .max()
        .unwrap_or(1);
    let ues = (0..num_ues)
        .map(|i| {
            let a = i as f64 * 2.0 * std::f64::consts::PI / num_ues.max(1) as f64;
            UeSpec {
                position: Point2::new(100.0 + 40.0 * a.cos(), 100.0 + 40.0 * a.sin()),
                local_cpu_freq: 1e9,
                tx_power: 0.1,
                requested_service: tasks[i].iter().map(|t| t.required_service).collect(),
            }
        })
        .collect();
    let centre = Point2::new(100.0, 100.0);
    ScenarioSpec {
        area_side: 200.0,
        num_slots,
        slot_len: 1.0,
        seed: 0,
        physics: PhysicsConstants::default(),
        bs: ServerSpec {
            position: Point2::new(150.0, 150.0),
            storage_capacity: 100.0,
            cpu_capacity: 20e9,
            max_associated_ues: 10,
        },
        uav: UavSpec {
            start_pos: centre,
            end_pos: centre,
            altitude: 50.0,
            storage_capacity: 100.0,
            cpu_capacity: 10e9,
            max_associated_ues: 5,
            coverage_radius: 100.0,
            max_step: 30.0,
        },
        services: ServiceCatalog {
            sizes: vec![0.5; num_services],
            popularity: zipf_popularity(num_services, 0.0),
        },
        ues,
        tasks,
    }
}
