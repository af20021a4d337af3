//! UAV trajectory optimisation by successive convex approximation.
//!
//! With placement and offloading fixed, only UAV-served tasks depend on the
//! trajectory. The rate `R(z)` is convex in the squared distance `z`, so its
//! tangent at the current trajectory is a global lower bound that is concave
//! in the waypoint. Replacing every UAV rate with that tangent gives a convex
//! problem whose energy upper-bounds the true energy and is tight at the
//! expansion point; solving it and re-expanding never increases the true
//! energy.
//!
//! Each convex subproblem is solved with a log-barrier method. The Newton
//! system is block tridiagonal (2x2 blocks, coupled only through consecutive
//! flight steps) and is solved in linear time.

use log::debug;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::alloc::allocate_cpu;
use crate::error::{Error, Result};
use crate::model::{
    check_feasible, evaluate_energy, OffloadPlan, PhysicsConstants, Placement, Point2,
    ScenarioSpec, Trajectory, Venue,
};
use crate::phys::{rate_at_sq_dist, rate_sq_dist_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Stop once an iteration lowers the true energy by less than this (J).
    pub min_decrease: f64,
    /// Duality-gap target of each convex subproblem (J).
    pub kkt_tol: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            min_decrease: 1e-4,
            kkt_tol: 1e-6,
        }
    }
}

/// First-order expansion of the UAV link rate in squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSurrogate {
    pub z0: f64,
    pub rate0: f64,
    /// `dR/dz` at `z0`; negative.
    pub slope: f64,
    pub altitude: f64,
}

impl RateSurrogate {
    pub fn expand(
        ue_pos: &Point2,
        expansion_point: &Point2,
        altitude: f64,
        tx_power: f64,
        physics: &PhysicsConstants,
    ) -> Result<Self> {
        let z0 = ue_pos.sq_dist(expansion_point) + altitude * altitude;
        let e = physics.uav_pathloss_exponent;
        Ok(Self {
            z0,
            rate0: rate_at_sq_dist(z0, tx_power, e, physics)?,
            slope: rate_sq_dist_derivative(z0, tx_power, e, physics)?,
            altitude,
        })
    }

    pub fn rate(&self, traj_point: &Point2, ue_pos: &Point2) -> f64 {
        let z = traj_point.sq_dist(ue_pos) + self.altitude * self.altitude;
        self.rate0 + self.slope * (z - self.z0)
    }

    /// Gradient with respect to the UAV position.
    pub fn gradient(&self, traj_point: &Point2, ue_pos: &Point2) -> [f64; 2] {
        [
            2.0 * self.slope * (traj_point.x - ue_pos.x),
            2.0 * self.slope * (traj_point.y - ue_pos.y),
        ]
    }
}

/// Lower bound on the UAV link rate at `traj_point`, tight at `expansion_point`.
pub fn surrogate_rate(
    traj_point: &Point2,
    ue_pos: &Point2,
    expansion_point: &Point2,
    altitude: f64,
    tx_power: f64,
    physics: &PhysicsConstants,
) -> Result<f64> {
    let z = traj_point.sq_dist(ue_pos) + altitude * altitude;
    if !(z > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(
        RateSurrogate::expand(ue_pos, expansion_point, altitude, tx_power, physics)?
            .rate(traj_point, ue_pos),
    )
}

/// Snapshot of the SCA loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub current_traj: Trajectory,
    pub iteration: usize,
    /// True UAV-link energy at `current_traj` (J).
    pub objective: f64,
    /// Surrogate rate of each UAV-served task at the current expansion.
    pub rate_bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub trajectory: Trajectory,
    /// Plan with allocations recomputed for the new trajectory.
    pub plan: OffloadPlan,
    /// Total UE energy under the new trajectory.
    pub energy: f64,
    /// True UAV-link energy before the first and after every accepted iteration.
    pub uav_energy_trace: Vec<f64>,
    pub iterations: usize,
    /// Final subproblem duality gap.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    u: Point2,
    bits: f64,
    cycles: f64,
    power: f64,
    sur: RateSurrogate,
}

struct Subproblem {
    /// `slots[p]` holds the terms served from waypoint `p`.
    slots: Vec<Vec<Term>>,
    num_slots: usize,
    cpu_cap: f64,
    radius_sq: f64,
    step_sq: f64,
    tau: f64,
    num_constraints: usize,
}

struct Derivs {
    phi: f64,
    grad: Vec<Vector2<f64>>,
    diag: Vec<Matrix2<f64>>,
    off: Vec<Matrix2<f64>>,
}

impl Subproblem {
    fn free(&self) -> usize {
        self.num_slots.saturating_sub(1)
    }

    /// Surrogate UAV energy at the waypoints.
    fn surrogate_energy(&self, pos: &[Point2]) -> f64 {
        let mut e = 0.0;
        for (p, terms) in self.slots.iter().enumerate().skip(1) {
            for term in terms {
                e += term.power * term.bits / term.sur.rate(&pos[p], &term.u);
            }
        }
        e
    }

    /// Barrier objective `tb * f0 + sum -ln(slack)`, with derivatives when
    /// asked. `None` outside the strict interior.
    fn eval(&self, pos: &[Point2], tb: f64, derivs: bool) -> Option<Derivs> {
        let m = self.free();
        let mut d = Derivs {
            phi: 0.0,
            grad: if derivs {
                vec![Vector2::zeros(); m]
            } else {
                Vec::new()
            },
            diag: if derivs {
                vec![Matrix2::zeros(); m]
            } else {
                Vec::new()
            },
            off: if derivs {
                vec![Matrix2::zeros(); m.saturating_sub(1)]
            } else {
                Vec::new()
            },
        };
        let eye = Matrix2::identity();

        for j in 0..self.num_slots {
            let v = Vector2::new(pos[j + 1].x - pos[j].x, pos[j + 1].y - pos[j].y);
            let slack = self.step_sq - v.norm_squared();
            if !(slack > 0.0) {
                return None;
            }
            d.phi -= slack.ln();
            if derivs {
                let g = v * (2.0 / slack);
                let h = v * v.transpose() * (4.0 / (slack * slack)) + eye * (2.0 / slack);
                let (a_free, b_free) = (j >= 1, j < m);
                if a_free {
                    d.grad[j - 1] -= g;
                    d.diag[j - 1] += h;
                }
                if b_free {
                    d.grad[j] += g;
                    d.diag[j] += h;
                }
                if a_free && b_free {
                    d.off[j - 1] -= h;
                }
            }
        }

        for p in 1..=m {
            let terms = &self.slots[p];
            if terms.is_empty() {
                continue;
            }
            let q = pos[p];
            let mut big_g = 0.0;
            let mut grad_g = Vector2::zeros();
            let mut hess_g = Matrix2::zeros();
            let mut any_cycles = false;
            for term in terms {
                let dv = Vector2::new(q.x - term.u.x, q.y - term.u.y);
                let s = dv.norm_squared();
                let rlb =
                    term.sur.rate0 + term.sur.slope * (s + term.sur.altitude.powi(2) - term.sur.z0);
                let floor = term.bits / self.tau;
                let e_dl = rlb - floor;
                let cov = self.radius_sq - s;
                if !(e_dl > 0.0) || !(cov > 0.0) {
                    return None;
                }
                let pb = term.power * term.bits;
                d.phi += tb * pb / rlb - cov.ln() - e_dl.ln();
                let slope = term.sur.slope;
                let g_c = if term.cycles > 0.0 {
                    any_cycles = true;
                    let den = self.tau * rlb - term.bits;
                    term.cycles * rlb / den
                } else {
                    0.0
                };
                big_g += g_c;
                if !derivs {
                    continue;
                }
                let ddt = dv * dv.transpose();
                // energy
                let hs = -pb * slope / (rlb * rlb);
                let hss = 2.0 * pb * slope * slope / (rlb * rlb * rlb);
                let k = p - 1;
                d.grad[k] += dv * (2.0 * tb * hs);
                d.diag[k] += (ddt * (4.0 * hss) + eye * (2.0 * hs)) * tb;
                // coverage
                d.grad[k] += dv * (2.0 / cov);
                d.diag[k] += eye * (2.0 / cov) + ddt * (4.0 / (cov * cov));
                // deadline
                let grad_r = dv * (2.0 * slope);
                d.grad[k] -= grad_r / e_dl;
                d.diag[k] +=
                    eye * (-2.0 * slope / e_dl) + grad_r * grad_r.transpose() / (e_dl * e_dl);
                // CPU sum
                if term.cycles > 0.0 {
                    let den = self.tau * rlb - term.bits;
                    let g_r = -term.cycles * term.bits / (den * den);
                    let g_rr = 2.0 * term.cycles * term.bits * self.tau / (den * den * den);
                    let gs = g_r * slope;
                    let gss = g_rr * slope * slope;
                    grad_g += dv * (2.0 * gs);
                    hess_g += ddt * (4.0 * gss) + eye * (2.0 * gs);
                }
            }
            if any_cycles {
                let slack = self.cpu_cap - big_g;
                if !(slack > 0.0) {
                    return None;
                }
                d.phi -= slack.ln();
                if derivs {
                    let k = p - 1;
                    d.grad[k] += grad_g / slack;
                    d.diag[k] += hess_g / slack + grad_g * grad_g.transpose() / (slack * slack);
                }
            }
        }
        Some(d)
    }

    fn center(&self, pos: &mut [Point2], tb: f64) -> Option<()> {
        let m = self.free();
        for _ in 0..200 {
            let d = self.eval(pos, tb, true)?;
            let step = solve_block_tridiagonal(&d.diag, &d.off, &d.grad)?;
            // Newton direction is -step.
            let slope: f64 = d.grad.iter().zip(&step).map(|(g, s)| -g.dot(s)).sum();
            if -slope / 2.0 <= 1e-10 {
                return Some(());
            }
            let mut alpha = 1.0;
            let mut trial = pos.to_vec();
            loop {
                for k in 0..m {
                    trial[k + 1] = Point2::new(
                        pos[k + 1].x - alpha * step[k].x,
                        pos[k + 1].y - alpha * step[k].y,
                    );
                }
                if let Some(t) = self.eval(&trial, tb, false) {
                    if t.phi <= d.phi + 0.25 * alpha * slope {
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    return Some(());
                }
            }
            pos.copy_from_slice(&trial);
        }
        Some(())
    }

    /// Runs the barrier method from a strictly feasible start. Returns the
    /// final duality gap, or `None` if the start is not strictly feasible.
    fn solve(&self, pos: &mut [Point2], kkt_tol: f64) -> Option<f64> {
        self.eval(pos, 0.0, false)?;
        if self.free() == 0 {
            return Some(0.0);
        }
        let f0 = self.surrogate_energy(pos).max(1e-9);
        let mc = self.num_constraints as f64;
        let mut tb = mc / f0;
        loop {
            self.center(pos, tb)?;
            let gap = mc / tb;
            if gap <= kkt_tol {
                return Some(gap);
            }
            tb *= 20.0;
        }
    }
}

/// Solves `H x = rhs` for a symmetric positive-definite block-tridiagonal
/// `H` given by its diagonal and super-diagonal 2x2 blocks.
fn solve_block_tridiagonal(
    diag: &[Matrix2<f64>],
    off: &[Matrix2<f64>],
    rhs: &[Vector2<f64>],
) -> Option<Vec<Vector2<f64>>> {
    let m = diag.len();
    if m == 0 {
        return Some(Vec::new());
    }
    let mut s_inv = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    let mut s = diag[0];
    let mut yk = rhs[0];
    for k in 0..m {
        if k > 0 {
            let e = off[k - 1];
            let prev: &Matrix2<f64> = &s_inv[k - 1];
            s = diag[k] - e.transpose() * prev * e;
            yk = rhs[k] - e.transpose() * prev * y[k - 1];
        }
        s_inv.push(s.try_inverse()?);
        y.push(yk);
    }
    let mut x = vec![Vector2::zeros(); m];
    x[m - 1] = s_inv[m - 1] * y[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = s_inv[k] * (y[k] - off[k] * x[k + 1]);
    }
    Some(x)
}

fn uav_pairs(spec: &ScenarioSpec, plan: &OffloadPlan) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for t in 0..spec.num_slots {
        for i in 0..spec.num_ues() {
            if plan.venue[i][t] == Venue::Uav {
                v.push((i, t));
            }
        }
    }
    v
}

/// True UAV-link transmit energy of the plan along `traj`.
pub fn uav_link_energy(spec: &ScenarioSpec, plan: &OffloadPlan, traj: &Trajectory) -> Result<f64> {
    let mut e = 0.0;
    for (i, t) in uav_pairs(spec, plan) {
        let rate = spec.link_rate(i, crate::model::ServerKind::Uav, traj.slot_position(t))?;
        e += spec.ues[i].tx_power * spec.task(i, t).input_bits / rate;
    }
    Ok(e)
}

fn build_subproblem(
    spec: &ScenarioSpec,
    plan: &OffloadPlan,
    traj: &Trajectory,
) -> Result<Subproblem> {
    let mut slots = vec![Vec::new(); spec.num_slots];
    let mut pairs = 0;
    let mut cpu_slots = 0;
    for (i, t) in uav_pairs(spec, plan) {
        let ue = &spec.ues[i];
        let task = spec.task(i, t);
        let sur = RateSurrogate::expand(
            &ue.position,
            traj.slot_position(t),
            spec.uav.altitude,
            ue.tx_power,
            &spec.physics,
        )?;
        if t >= 1 {
            pairs += 1;
            if task.cpu_cycles > 0.0 && !slots[t].iter().any(|x: &Term| x.cycles > 0.0) {
                cpu_slots += 1;
            }
        }
        slots[t].push(Term {
            u: ue.position,
            bits: task.input_bits,
            cycles: task.cpu_cycles,
            power: ue.tx_power,
            sur,
        });
    }
    Ok(Subproblem {
        slots,
        num_slots: spec.num_slots,
        cpu_cap: spec.uav.cpu_capacity,
        radius_sq: spec.uav.coverage_radius.powi(2),
        step_sq: spec.uav.max_step.powi(2),
        tau: spec.slot_len,
        num_constraints: spec.num_slots + 2 * pairs + cpu_slots,
    })
}

pub fn sca_optimize(
    spec: &ScenarioSpec,
    placement: &Placement,
    plan: &OffloadPlan,
    init_traj: &Trajectory,
) -> Result<ScaOutcome> {
    sca_optimize_with(spec, placement, plan, init_traj, &ScaOptions::default())
}

/// Improves the trajectory for a fixed placement and plan.
///
/// Fails with [`Error::InfeasibleInit`] if the starting triple violates a
/// constraint, and with [`Error::SubproblemInfeasible`] when the start sits
/// on a constraint boundary so that no strictly interior point exists to
/// start from.
pub fn sca_optimize_with(
    spec: &ScenarioSpec,
    placement: &Placement,
    plan: &OffloadPlan,
    init_traj: &Trajectory,
    opts: &ScaOptions,
) -> Result<ScaOutcome> {
    if let Some(v) = check_feasible(spec, placement, plan, init_traj)
        .into_iter()
        .next()
    {
        return Err(Error::InfeasibleInit(v.to_string()));
    }
    let mut traj = init_traj.clone();
    let mut objective = uav_link_energy(spec, plan, &traj)?;
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut kkt_residual = 0.0;

    let has_free_pairs = uav_pairs(spec, plan).iter().any(|&(_, t)| t >= 1);
    if has_free_pairs {
        for it in 0..opts.max_iters {
            let sub = build_subproblem(spec, plan, &traj)?;
            let mut pos = traj.positions.clone();
            let Some(gap) = sub.solve(&mut pos, opts.kkt_tol) else {
                if it == 0 {
                    return Err(Error::SubproblemInfeasible(
                        "no strictly feasible trajectory around the initial one".into(),
                    ));
                }
                break;
            };
            let candidate = Trajectory { positions: pos };
            let new_obj = uav_link_energy(spec, plan, &candidate)?;
            debug!("sca iteration {it}: {objective:.9} -> {new_obj:.9} J (gap {gap:.2e})");
            if new_obj > objective {
                break;
            }
            let decrease = objective - new_obj;
            traj = candidate;
            objective = new_obj;
            kkt_residual = gap;
            trace.push(objective);
            iterations += 1;
            if decrease < opts.min_decrease {
                break;
            }
        }
    }

    let plan = allocate_cpu(spec, placement, &plan.venue, &traj).map_err(|bad| {
        Error::SubproblemInfeasible(format!(
            "allocation infeasible after trajectory update at {:?}",
            bad.pairs
        ))
    })?;
    let energy = evaluate_energy(spec, placement, &plan, &traj)?;
    Ok(ScaOutcome {
        trajectory: traj,
        plan,
        energy,
        uav_energy_trace: trace,
        iterations,
        kkt_residual,
    })
}

/// Expansion state of the current trajectory, for inspection.
pub fn sca_state(
    spec: &ScenarioSpec,
    plan: &OffloadPlan,
    traj: &Trajectory,
    iteration: usize,
) -> Result<ScaState> {
    let mut rate_bounds = Vec::new();
    for (i, t) in uav_pairs(spec, plan) {
        let ue = &spec.ues[i];
        let q = traj.slot_position(t);
        rate_bounds.push(surrogate_rate(
            q,
            &ue.position,
            q,
            spec.uav.altitude,
            ue.tx_power,
            &spec.physics,
        )?);
    }
    Ok(ScaState {
        current_traj: traj.clone(),
        iteration,
        objective: uav_link_energy(spec, plan, traj)?,
        rate_bounds,
    })
}
