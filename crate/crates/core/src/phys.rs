//! Channel, latency and energy formulas.
//!
//! Links are deterministic distance-based path loss with no fading. A UE that
//! offloads gets the whole bandwidth for the slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PhysicsConstants, ServerKind, TaskSpec};

/// Geometry of a single UE-to-server uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub horizontal_dist: f64,
    /// Zero for the base station.
    pub altitude: f64,
    pub server_kind: ServerKind,
}

impl LinkGeometry {
    pub fn squared_distance(&self) -> f64 {
        self.horizontal_dist * self.horizontal_dist + self.altitude * self.altitude
    }
}

/// Path-loss exponent for the given server kind.
pub fn pathloss_exponent(kind: ServerKind, physics: &PhysicsConstants) -> f64 {
    match kind {
        ServerKind::Uav => physics.uav_pathloss_exponent,
        ServerKind::Bs => physics.bs_pathloss_exponent,
    }
}

/// Achievable uplink rate in bit/s.
pub fn link_rate(geom: &LinkGeometry, tx_power: f64, physics: &PhysicsConstants) -> Result<f64> {
    let z = geom.squared_distance();
    rate_at_sq_dist(
        z,
        tx_power,
        pathloss_exponent(geom.server_kind, physics),
        physics,
    )
}

/// Rate as a function of the squared 3-D distance `z`.
///
/// `R(z) = B log2(1 + a z^(-e/2))` with `a = P g0 / N0`. This is convex and
/// strictly decreasing in `z` for every `e > 0`, which is what makes the
/// first-order expansion in [`rate_sq_dist_derivative`] a global lower bound.
pub fn rate_at_sq_dist(
    z: f64,
    tx_power: f64,
    exponent: f64,
    physics: &PhysicsConstants,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    let snr = snr_at_sq_dist(z, tx_power, exponent, physics);
    Ok(physics.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

/// `dR/dz` at squared distance `z`.
pub fn rate_sq_dist_derivative(
    z: f64,
    tx_power: f64,
    exponent: f64,
    physics: &PhysicsConstants,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    let snr = snr_at_sq_dist(z, tx_power, exponent, physics);
    // d/dz ln(1 + a z^-k) = -k snr / (z (1 + snr))
    let k = exponent / 2.0;
    Ok(-physics.bandwidth / std::f64::consts::LN_2 * k * snr / (z * (1.0 + snr)))
}

fn snr_at_sq_dist(z: f64, tx_power: f64, exponent: f64, physics: &PhysicsConstants) -> f64 {
    tx_power * physics.ref_channel_gain / (physics.noise_power * z.powf(exponent / 2.0))
}

/// Upload time in seconds.
pub fn comm_time(task: &TaskSpec, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    task.input_bits / rate
}

/// Execution time in seconds at the given CPU frequency.
pub fn comp_time(task: &TaskSpec, cpu_freq: f64) -> f64 {
    debug_assert!(cpu_freq > 0.0);
    task.cpu_cycles / cpu_freq
}

/// Local execution energy `kappa * C * f^2`.
pub fn local_energy(task: &TaskSpec, f_loc: f64, kappa: f64) -> f64 {
    kappa * task.cpu_cycles * f_loc * f_loc
}

/// UE transmit energy for uploading the task input.
pub fn tx_energy(task: &TaskSpec, tx_power: f64, rate: f64) -> f64 {
    tx_power * comm_time(task, rate)
}
