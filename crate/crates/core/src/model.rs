//! Scenario description, decision variables and the objective evaluator.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::{self, LinkGeometry};

/// Slack applied to the continuous constraint checks.
pub const GEOM_TOL: f64 = 1e-9;
pub const TIME_TOL: f64 = 1e-9;
/// Relative slack on CPU-capacity sums, so that a sum accumulated in a
/// different order than the checker's still passes.
pub const CPU_REL_TOL: f64 = 1e-12;
pub const STORAGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.sq_dist(other).sqrt()
    }

    pub fn sq_dist(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn lerp(&self, other: &Point2, s: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * s,
            self.y + (other.y - self.y) * s,
        )
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerKind {
    Uav,
    Bs,
}

impl ServerKind {
    pub const ALL: [ServerKind; 2] = [ServerKind::Uav, ServerKind::Bs];

    pub fn index(self) -> usize {
        match self {
            ServerKind::Uav => 0,
            ServerKind::Bs => 1,
        }
    }
}

impl fmt::Display for ServerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerKind::Uav => write!(f, "UAV"),
            ServerKind::Bs => write!(f, "BS"),
        }
    }
}

/// Where a task executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Venue {
    #[default]
    Local,
    Uav,
    Bs,
}

impl Venue {
    pub fn server(self) -> Option<ServerKind> {
        match self {
            Venue::Local => None,
            Venue::Uav => Some(ServerKind::Uav),
            Venue::Bs => Some(ServerKind::Bs),
        }
    }
}

impl From<ServerKind> for Venue {
    fn from(k: ServerKind) -> Self {
        match k {
            ServerKind::Uav => Venue::Uav,
            ServerKind::Bs => Venue::Bs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    pub position: Point2,
    pub local_cpu_freq: f64,
    pub tx_power: f64,
    /// Service requested in each slot.
    pub requested_service: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub position: Point2,
    pub storage_capacity: f64,
    pub cpu_capacity: f64,
    pub max_associated_ues: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub start_pos: Point2,
    pub end_pos: Point2,
    pub altitude: f64,
    pub storage_capacity: f64,
    pub cpu_capacity: f64,
    pub max_associated_ues: usize,
    pub coverage_radius: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceCatalog {
    pub sizes: Vec<f64>,
    pub popularity: Vec<f64>,
}

impl ServiceCatalog {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub cpu_cycles: f64,
    pub input_bits: f64,
    pub required_service: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    pub bandwidth: f64,
    pub kappa: f64,
    pub ref_channel_gain: f64,
    pub noise_power: f64,
    pub bs_pathloss_exponent: f64,
    pub uav_pathloss_exponent: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            bandwidth: 1e6,
            kappa: 1e-27,
            ref_channel_gain: 1e-5,
            noise_power: 1e-13,
            bs_pathloss_exponent: 3.0,
            uav_pathloss_exponent: 2.0,
        }
    }
}

/// One complete experiment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub area_side: f64,
    pub num_slots: usize,
    pub slot_len: f64,
    pub seed: u64,
    pub physics: PhysicsConstants,
    pub bs: ServerSpec,
    pub uav: UavSpec,
    pub services: ServiceCatalog,
    pub ues: Vec<UeSpec>,
    /// `tasks[ue][slot]`.
    pub tasks: Vec<Vec<TaskSpec>>,
}

impl ScenarioSpec {
    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_services(&self) -> usize {
        self.services.len()
    }

    pub fn task(&self, ue: usize, slot: usize) -> &TaskSpec {
        &self.tasks[ue][slot]
    }

    pub fn storage_capacity(&self, kind: ServerKind) -> f64 {
        match kind {
            ServerKind::Uav => self.uav.storage_capacity,
            ServerKind::Bs => self.bs.storage_capacity,
        }
    }

    pub fn cpu_capacity(&self, kind: ServerKind) -> f64 {
        match kind {
            ServerKind::Uav => self.uav.cpu_capacity,
            ServerKind::Bs => self.bs.cpu_capacity,
        }
    }

    pub fn max_associated(&self, kind: ServerKind) -> usize {
        match kind {
            ServerKind::Uav => self.uav.max_associated_ues,
            ServerKind::Bs => self.bs.max_associated_ues,
        }
    }

    /// Geometry of the link from `ue` to `kind`, with the UAV hovering at `uav_pos`.
    pub fn link_geometry(&self, ue: usize, kind: ServerKind, uav_pos: &Point2) -> LinkGeometry {
        let p = &self.ues[ue].position;
        match kind {
            ServerKind::Uav => LinkGeometry {
                horizontal_dist: p.dist(uav_pos),
                altitude: self.uav.altitude,
                server_kind: kind,
            },
            ServerKind::Bs => LinkGeometry {
                horizontal_dist: p.dist(&self.bs.position),
                altitude: 0.0,
                server_kind: kind,
            },
        }
    }

    pub fn link_rate(&self, ue: usize, kind: ServerKind, uav_pos: &Point2) -> Result<f64> {
        let geom = self.link_geometry(ue, kind, uav_pos);
        phys::link_rate(&geom, self.ues[ue].tx_power, &self.physics)
    }

    pub fn local_energy(&self, ue: usize, slot: usize) -> f64 {
        phys::local_energy(
            self.task(ue, slot),
            self.ues[ue].local_cpu_freq,
            self.physics.kappa,
        )
    }

    /// Checks every structural invariant of the scenario.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.area_side > 0.0) {
            return bad(format!("area_side must be > 0, got {}", self.area_side));
        }
        if self.num_slots == 0 {
            return bad("num_slots must be >= 1".into());
        }
        if !(self.slot_len > 0.0) {
            return bad(format!("slot_len must be > 0, got {}", self.slot_len));
        }
        let ph = &self.physics;
        for (name, v) in [
            ("bandwidth", ph.bandwidth),
            ("kappa", ph.kappa),
            ("ref_channel_gain", ph.ref_channel_gain),
            ("noise_power", ph.noise_power),
            ("bs_pathloss_exponent", ph.bs_pathloss_exponent),
            ("uav_pathloss_exponent", ph.uav_pathloss_exponent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!(
                    "physics.{name} must be positive and finite, got {v}"
                ));
            }
        }
        let k = self.services.len();
        if self.services.popularity.len() != k {
            return bad("services.popularity and services.sizes differ in length".into());
        }
        if k > 0 {
            let sum: f64 = self.services.popularity.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return bad(format!("service popularity sums to {sum}"));
            }
            if self.services.popularity.windows(2).any(|w| w[1] > w[0]) {
                return bad("service popularity must be non-increasing".into());
            }
        }
        if let Some(s) = self
            .services
            .sizes
            .iter()
            .find(|s| !(**s >= 0.5 && **s <= 1.0))
        {
            return bad(format!("service size {s} outside [0.5, 1]"));
        }
        let u = &self.uav;
        if !(u.coverage_radius > 0.0) || !(u.max_step > 0.0) {
            return bad("uav coverage_radius and max_step must be > 0".into());
        }
        if !(u.altitude >= 0.0) {
            return bad("uav altitude must be >= 0".into());
        }
        let budget = self.num_slots as f64 * u.max_step;
        let distance = u.start_pos.dist(&u.end_pos);
        if distance > budget + GEOM_TOL {
            return Err(Error::InfeasibleGeometry { distance, budget });
        }
        for (name, s) in [
            ("uav", u.storage_capacity),
            ("bs", self.bs.storage_capacity),
        ] {
            if !(s >= 0.0) {
                return bad(format!("{name} storage_capacity must be >= 0"));
            }
        }
        for (name, c) in [("uav", u.cpu_capacity), ("bs", self.bs.cpu_capacity)] {
            if !(c >= 0.0) {
                return bad(format!("{name} cpu_capacity must be >= 0"));
            }
        }
        if self.tasks.len() != self.ues.len() {
            return bad(format!(
                "tasks defined for {} UEs, scenario has {}",
                self.tasks.len(),
                self.ues.len()
            ));
        }
        for (i, ue) in self.ues.iter().enumerate() {
            let p = ue.position;
            if !(0.0..=self.area_side).contains(&p.x) || !(0.0..=self.area_side).contains(&p.y) {
                return bad(format!(
                    "UE {i} at ({}, {}) lies outside the area",
                    p.x, p.y
                ));
            }
            if !(ue.tx_power > 0.0 && ue.tx_power <= 0.1) {
                return bad(format!(
                    "UE {i} tx_power {} outside (0, 0.1] W",
                    ue.tx_power
                ));
            }
            if !(ue.local_cpu_freq > 0.0) {
                return bad(format!("UE {i} local_cpu_freq must be > 0"));
            }
            if ue.requested_service.len() != self.num_slots || self.tasks[i].len() != self.num_slots
            {
                return bad(format!(
                    "UE {i} must define a task for each of {} slots",
                    self.num_slots
                ));
            }
            for (t, task) in self.tasks[i].iter().enumerate() {
                if task.required_service >= k {
                    return bad(format!(
                        "task ({i}, {t}) requests unknown service {}",
                        task.required_service
                    ));
                }
                if task.required_service != ue.requested_service[t] {
                    return bad(format!(
                        "task ({i}, {t}) disagrees with the UE's requested service"
                    ));
                }
                if !(task.cpu_cycles >= 0.0 && task.cpu_cycles.is_finite())
                    || !(task.input_bits >= 0.0 && task.input_bits.is_finite())
                {
                    return bad(format!("task ({i}, {t}) has negative or non-finite size"));
                }
            }
        }
        Ok(())
    }
}

/// Binary service-to-server placement, indexed `[service][server]` with the
/// UAV first. The derived ordering is the lexicographic tie-break order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Placement {
    pub placed: Vec<[bool; 2]>,
}

impl Placement {
    pub fn empty(num_services: usize) -> Self {
        Self {
            placed: vec![[false; 2]; num_services],
        }
    }

    pub fn full(num_services: usize) -> Self {
        Self {
            placed: vec![[true; 2]; num_services],
        }
    }

    pub fn is_placed(&self, service: usize, kind: ServerKind) -> bool {
        self.placed[service][kind.index()]
    }

    pub fn set(&mut self, service: usize, kind: ServerKind, on: bool) {
        self.placed[service][kind.index()] = on;
    }

    pub fn used_storage(&self, kind: ServerKind, sizes: &[f64]) -> f64 {
        self.placed
            .iter()
            .zip(sizes)
            .filter(|(p, _)| p[kind.index()])
            .map(|(_, s)| s)
            .sum()
    }

    pub fn count(&self, kind: ServerKind) -> usize {
        self.placed.iter().filter(|p| p[kind.index()]).count()
    }

    pub fn fits(&self, spec: &ScenarioSpec) -> bool {
        ServerKind::ALL.iter().all(|&k| {
            self.used_storage(k, &spec.services.sizes) <= spec.storage_capacity(k) + STORAGE_TOL
        })
    }
}

/// Per-task venue and allocated server frequency, indexed `[ue][slot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadPlan {
    pub venue: Vec<Vec<Venue>>,
    pub cpu_alloc: Vec<Vec<f64>>,
}

impl OffloadPlan {
    pub fn all_local(num_ues: usize, num_slots: usize) -> Self {
        Self {
            venue: vec![vec![Venue::Local; num_slots]; num_ues],
            cpu_alloc: vec![vec![0.0; num_slots]; num_ues],
        }
    }

    pub fn num_offloaded(&self, kind: ServerKind) -> usize {
        let v = Venue::from(kind);
        self.venue.iter().flatten().filter(|x| **x == v).count()
    }
}

/// UAV horizontal waypoints; slot `t` is served from `positions[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<Point2>,
}

impl Trajectory {
    /// Straight line from start to end, evenly spaced over the slots.
    pub fn straight_line(start: Point2, end: Point2, num_slots: usize) -> Self {
        let positions = (0..=num_slots)
            .map(|t| {
                if t == num_slots {
                    end
                } else {
                    start.lerp(&end, t as f64 / num_slots as f64)
                }
            })
            .collect();
        Self { positions }
    }

    pub fn for_spec(spec: &ScenarioSpec) -> Self {
        Self::straight_line(spec.uav.start_pos, spec.uav.end_pos, spec.num_slots)
    }

    pub fn slot_position(&self, slot: usize) -> &Point2 {
        &self.positions[slot]
    }

    pub fn max_step(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[0].dist(&w[1]))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub bnb_nodes: u64,
    /// Objective minus proven lower bound of the last placement search.
    #[serde(default)]
    pub bnb_gap: f64,
    pub sca_iterations: u64,
    pub rounds: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub algorithm: String,
    pub total_energy: f64,
    /// Objective of the starting point, before the first round.
    pub initial_energy: f64,
    /// Objective after each round; non-increasing, last entry equals `total_energy`.
    pub per_iteration_energy: Vec<f64>,
    pub per_ue_energy: Vec<f64>,
    pub placement: Placement,
    pub offload_plan: OffloadPlan,
    pub trajectory: Trajectory,
    pub stats: SolverStats,
}

impl SolutionReport {
    /// Assembles a report for a feasible triple, evaluating the energy once.
    pub fn from_solution(
        algorithm: &str,
        spec: &ScenarioSpec,
        placement: Placement,
        offload_plan: OffloadPlan,
        trajectory: Trajectory,
        initial_energy: Option<f64>,
        mut per_iteration_energy: Vec<f64>,
        stats: SolverStats,
    ) -> Result<Self> {
        let per_ue_energy = per_ue_energy(spec, &placement, &offload_plan, &trajectory)?;
        let total_energy: f64 = per_ue_energy.iter().sum();
        match per_iteration_energy.last_mut() {
            Some(last) => *last = total_energy,
            None => per_iteration_energy.push(total_energy),
        }
        Ok(Self {
            algorithm: algorithm.to_string(),
            total_energy,
            initial_energy: initial_energy.unwrap_or(total_energy),
            per_iteration_energy,
            per_ue_energy,
            placement,
            offload_plan,
            trajectory,
            stats,
        })
    }
}

impl ScenarioSpec {
    /// Parses and validates a TOML scenario.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

impl SolutionReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Names the constraint a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    /// Storage capacity.
    C1,
    /// Associated-UE cap.
    C2,
    /// UAV coverage.
    C3,
    /// Per-slot flight distance.
    C4,
    /// Offloaded service must be placed.
    C5,
    CpuCapacity,
    Deadline,
    Endpoint,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub server: Option<ServerKind>,
    pub ue: Option<usize>,
    pub slot: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(constraint: ConstraintId, detail: impl Into<String>) -> Self {
        Self {
            constraint,
            server: None,
            ue: None,
            slot: None,
            detail: detail.into(),
        }
    }

    fn server(mut self, s: ServerKind) -> Self {
        self.server = Some(s);
        self
    }

    fn ue(mut self, i: usize) -> Self {
        self.ue = Some(i);
        self
    }

    fn slot(mut self, t: usize) -> Self {
        self.slot = Some(t);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.constraint)?;
        if let Some(s) = self.server {
            write!(f, " server={s}")?;
        }
        if let Some(i) = self.ue {
            write!(f, " ue={i}")?;
        }
        if let Some(t) = self.slot {
            write!(f, " slot={t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Lists every violated constraint of the decision triple. Empty iff feasible.
pub fn check_feasible(
    spec: &ScenarioSpec,
    placement: &Placement,
    plan: &OffloadPlan,
    traj: &Trajectory,
) -> Vec<Violation> {
    use ConstraintId::*;
    let mut out = Vec::new();
    let n_ue = spec.num_ues();
    let n_slots = spec.num_slots;

    if placement.placed.len() != spec.num_services() {
        out.push(Violation::new(
            Shape,
            format!(
                "placement covers {} services, scenario has {}",
                placement.placed.len(),
                spec.num_services()
            ),
        ));
        return out;
    }
    if plan.venue.len() != n_ue
        || plan.cpu_alloc.len() != n_ue
        || plan.venue.iter().any(|v| v.len() != n_slots)
        || plan.cpu_alloc.iter().any(|v| v.len() != n_slots)
    {
        out.push(Violation::new(
            Shape,
            format!("offload plan must be {n_ue} UEs x {n_slots} slots"),
        ));
        return out;
    }
    if traj.positions.len() != n_slots + 1 {
        out.push(Violation::new(
            Shape,
            format!(
                "trajectory has {} waypoints, expected {}",
                traj.positions.len(),
                n_slots + 1
            ),
        ));
        return out;
    }

    for kind in ServerKind::ALL {
        let used = placement.used_storage(kind, &spec.services.sizes);
        let cap = spec.storage_capacity(kind);
        if used > cap + STORAGE_TOL {
            out.push(
                Violation::new(C1, format!("stores {used:.6} units, capacity {cap:.6}"))
                    .server(kind),
            );
        }
    }

    let first = traj.positions[0];
    let last = traj.positions[n_slots];
    if first.dist(&spec.uav.start_pos) > GEOM_TOL {
        out.push(Violation::new(
            Endpoint,
            "trajectory does not start at the UAV start position",
        ));
    }
    if last.dist(&spec.uav.end_pos) > GEOM_TOL {
        out.push(Violation::new(
            Endpoint,
            "trajectory does not end at the UAV end position",
        ));
    }
    for (t, w) in traj.positions.windows(2).enumerate() {
        let step = w[0].dist(&w[1]);
        if step > spec.uav.max_step + GEOM_TOL {
            out.push(
                Violation::new(
                    C4,
                    format!("step of {step:.6} m exceeds {} m", spec.uav.max_step),
                )
                .slot(t),
            );
        }
    }

    for t in 0..n_slots {
        let uav_pos = traj.slot_position(t);
        let mut count = [0usize; 2];
        let mut cpu = [0.0f64; 2];
        for i in 0..n_ue {
            let venue = plan.venue[i][t];
            let f = plan.cpu_alloc[i][t];
            let Some(kind) = venue.server() else {
                if f != 0.0 {
                    out.push(
                        Violation::new(Shape, "local task carries a server CPU allocation")
                            .ue(i)
                            .slot(t),
                    );
                }
                continue;
            };
            count[kind.index()] += 1;
            cpu[kind.index()] += f;
            let task = spec.task(i, t);
            if !placement.is_placed(task.required_service, kind) {
                out.push(
                    Violation::new(C5, format!("service {} not placed", task.required_service))
                        .server(kind)
                        .ue(i)
                        .slot(t),
                );
            }
            if kind == ServerKind::Uav {
                let d = spec.ues[i].position.dist(uav_pos);
                if d > spec.uav.coverage_radius + GEOM_TOL {
                    out.push(
                        Violation::new(
                            C3,
                            format!(
                                "UE is {d:.3} m from the UAV, radius {}",
                                spec.uav.coverage_radius
                            ),
                        )
                        .ue(i)
                        .slot(t),
                    );
                }
            }
            match spec.link_rate(i, kind, uav_pos) {
                Ok(rate) => {
                    let comm = phys::comm_time(task, rate);
                    let total = if task.cpu_cycles == 0.0 {
                        comm
                    } else if f > 0.0 {
                        comm + phys::comp_time(task, f)
                    } else {
                        f64::INFINITY
                    };
                    if total > spec.slot_len + TIME_TOL {
                        out.push(
                            Violation::new(
                                Deadline,
                                format!(
                                    "completes after {total:.6} s, slot is {} s",
                                    spec.slot_len
                                ),
                            )
                            .server(kind)
                            .ue(i)
                            .slot(t),
                        );
                    }
                }
                Err(e) => out.push(
                    Violation::new(Shape, e.to_string())
                        .server(kind)
                        .ue(i)
                        .slot(t),
                ),
            }
        }
        for kind in ServerKind::ALL {
            let k = kind.index();
            if count[k] > spec.max_associated(kind) {
                out.push(
                    Violation::new(
                        C2,
                        format!(
                            "{} UEs associated, cap {}",
                            count[k],
                            spec.max_associated(kind)
                        ),
                    )
                    .server(kind)
                    .slot(t),
                );
            }
            let cap = spec.cpu_capacity(kind);
            if cpu[k] > cap * (1.0 + CPU_REL_TOL) {
                out.push(
                    Violation::new(
                        CpuCapacity,
                        format!("allocates {:.6e} Hz, capacity {cap:.6e}", cpu[k]),
                    )
                    .server(kind)
                    .slot(t),
                );
            }
        }
    }
    out
}

/// Energy of one task under the given venue, without feasibility checks.
pub fn task_energy(
    spec: &ScenarioSpec,
    ue: usize,
    slot: usize,
    venue: Venue,
    traj: &Trajectory,
) -> Result<f64> {
    match venue.server() {
        None => Ok(spec.local_energy(ue, slot)),
        Some(kind) => {
            let rate = spec.link_rate(ue, kind, traj.slot_position(slot))?;
            Ok(phys::tx_energy(
                spec.task(ue, slot),
                spec.ues[ue].tx_power,
                rate,
            ))
        }
    }
}

/// Per-UE energy over the horizon. Fails on the first violated constraint.
pub fn per_ue_energy(
    spec: &ScenarioSpec,
    placement: &Placement,
    plan: &OffloadPlan,
    traj: &Trajectory,
) -> Result<Vec<f64>> {
    if let Some(v) = check_feasible(spec, placement, plan, traj)
        .into_iter()
        .next()
    {
        return Err(Error::ConstraintViolation(v));
    }
    (0..spec.num_ues())
        .map(|i| {
            (0..spec.num_slots).try_fold(0.0, |acc, t| {
                Ok(acc + task_energy(spec, i, t, plan.venue[i][t], traj)?)
            })
        })
        .collect()
}

/// Total UE energy in joules for a feasible decision triple.
pub fn evaluate_energy(
    spec: &ScenarioSpec,
    placement: &Placement,
    plan: &OffloadPlan,
    traj: &Trajectory,
) -> Result<f64> {
    Ok(per_ue_energy(spec, placement, plan, traj)?.iter().sum())
}
