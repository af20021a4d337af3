//! Seeded scenario generation.
//!
//! Every field family draws from its own ChaCha stream, so two parameter sets
//! that differ only in, say, the workload coefficient share all positions,
//! data sizes and service requests.

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    PhysicsConstants, Point2, ScenarioSpec, ServerSpec, ServiceCatalog, TaskSpec, UavSpec, UeSpec,
};

/// Bits per kilobyte (1 KB = 1000 bytes).
pub const BITS_PER_KB: f64 = 8000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub num_ues: usize,
    pub num_services: usize,
    pub num_slots: usize,
    pub zipf_skew: f64,
    pub workload_coefficient: f64,
    /// UAV storage in abstract units; the BS gets twice this.
    pub uav_storage: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            num_ues: 10,
            num_services: 30,
            num_slots: 100,
            zipf_skew: 0.5,
            workload_coefficient: 1.0,
            uav_storage: 10.0,
            seed: 1,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.num_ues == 0 {
            return bad("num_ues must be >= 1");
        }
        if self.num_services == 0 {
            return bad("num_services must be >= 1");
        }
        if self.num_slots == 0 {
            return bad("num_slots must be >= 1");
        }
        if !(self.zipf_skew >= 0.0 && self.zipf_skew.is_finite()) {
            return bad("zipf_skew must be >= 0");
        }
        if !(self.workload_coefficient > 0.0 && self.workload_coefficient.is_finite()) {
            return bad("workload_coefficient must be > 0");
        }
        if !(self.uav_storage >= 0.0 && self.uav_storage.is_finite()) {
            return bad("uav_storage must be >= 0");
        }
        Ok(())
    }
}

/// Zipf popularity `p_k = k^-s / sum_j j^-s` over `k = 1..=n`.
pub fn zipf_popularity(num_services: usize, skew: f64) -> Vec<f64> {
    assert!(
        num_services >= 1,
        "zipf_popularity needs at least one service"
    );
    let weights: Vec<f64> = (1..=num_services).map(|k| (k as f64).powf(-skew)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[derive(Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Positions = 1,
    Cycles = 2,
    DataSizes = 3,
    Services = 4,
    ServiceSizes = 5,
    Servers = 6,
    /// Used by the random placement baseline, not by the generator.
    RandomPlacement = 7,
}

pub(crate) fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Builds the case-study scenario for the given parameters.
pub fn generate(params: &GeneratorParams) -> Result<ScenarioSpec> {
    params.validate()?;
    let area_side = 200.0;
    let n_ue = params.num_ues;
    let n_slots = params.num_slots;
    let n_svc = params.num_services;

    let uav_max_step = 30.0;
    let start = Point2::new(0.0, 0.0);
    let end = Point2::new(area_side, area_side);
    let budget = n_slots as f64 * uav_max_step;
    let distance = start.dist(&end);
    if distance > budget {
        return Err(Error::InfeasibleGeometry { distance, budget });
    }

    let mut pos_rng = stream(params.seed, Stream::Positions);
    let coord = Uniform::new_inclusive(0.0, area_side);
    let positions: Vec<Point2> = (0..n_ue)
        .map(|_| Point2::new(coord.sample(&mut pos_rng), coord.sample(&mut pos_rng)))
        .collect();

    let mut size_rng = stream(params.seed, Stream::ServiceSizes);
    let size_dist = Uniform::new_inclusive(0.5, 1.0);
    let sizes: Vec<f64> = (0..n_svc)
        .map(|_| size_dist.sample(&mut size_rng))
        .collect();
    let popularity = zipf_popularity(n_svc, params.zipf_skew);

    let mut srv_rng = stream(params.seed, Stream::Servers);
    let uav_cpu = Uniform::new_inclusive(5e9, 10e9).sample(&mut srv_rng);
    let uav_max_ues = srv_rng.gen_range(3..=5usize);

    let mut cyc_rng = stream(params.seed, Stream::Cycles);
    let mut data_rng = stream(params.seed, Stream::DataSizes);
    let mut svc_rng = stream(params.seed, Stream::Services);
    let cyc_dist = Uniform::new_inclusive(1e8, 1e9);
    let kb_dist = Uniform::new_inclusive(100.0, 1000.0);
    let svc_dist = WeightedIndex::new(&popularity).expect("zipf weights are positive");

    let mut ues = Vec::with_capacity(n_ue);
    let mut tasks = Vec::with_capacity(n_ue);
    for position in positions {
        let mut row = Vec::with_capacity(n_slots);
        let mut requested = Vec::with_capacity(n_slots);
        for _ in 0..n_slots {
            let base_cycles = cyc_dist.sample(&mut cyc_rng);
            let input_bits = kb_dist.sample(&mut data_rng) * BITS_PER_KB;
            let service = svc_dist.sample(&mut svc_rng);
            requested.push(service);
            row.push(TaskSpec {
                cpu_cycles: base_cycles * params.workload_coefficient,
                input_bits,
                required_service: service,
            });
        }
        ues.push(UeSpec {
            position,
            local_cpu_freq: 1e9,
            tx_power: 0.1,
            requested_service: requested,
        });
        tasks.push(row);
    }

    let spec = ScenarioSpec {
        area_side,
        num_slots: n_slots,
        slot_len: 1.0,
        seed: params.seed,
        physics: PhysicsConstants::default(),
        bs: ServerSpec {
            position: Point2::new(area_side / 2.0, area_side / 2.0),
            storage_capacity: 2.0 * params.uav_storage,
            cpu_capacity: 20e9,
            max_associated_ues: 10,
        },
        uav: UavSpec {
            start_pos: start,
            end_pos: end,
            altitude: 50.0,
            storage_capacity: params.uav_storage,
            cpu_capacity: uav_cpu,
            max_associated_ues: uav_max_ues,
            coverage_radius: 100.0,
            max_step: uav_max_step,
        },
        services: ServiceCatalog { sizes, popularity },
        ues,
        tasks,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_trivial_cases() {
        assert_eq!(zipf_popularity(1, 0.5), vec![1.0]);
        assert_eq!(zipf_popularity(1, 3.0), vec![1.0]);
        assert_eq!(zipf_popularity(2, 0.0), vec![0.5, 0.5]);
    }

    #[test]
    fn zipf_head_for_default_catalog() {
        // Oracle: direct summation of j^-0.5 for j = 1..=30.
        let mut h = 0.0;
        for j in 1..=30 {
            h += 1.0 / (j as f64).sqrt();
        }
        let p = zipf_popularity(30, 0.5);
        assert!((p[0] - 1.0 / h).abs() < 1e-15);
        assert!((p[0] - 0.1046).abs() < 1e-3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn same_seed_same_scenario() {
        let p = GeneratorParams {
            seed: 7,
            ..Default::default()
        };
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
    }

    #[test]
    fn different_seed_differs() {
        let a = generate(&GeneratorParams {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        let b = generate(&GeneratorParams {
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.ues[0].position, b.ues[0].position);
    }

    #[test]
    fn workload_coefficient_scales_cycles_only() {
        let a = generate(&GeneratorParams {
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let b = generate(&GeneratorParams {
            seed: 3,
            workload_coefficient: 2.0,
            ..Default::default()
        })
        .unwrap();
        for i in 0..a.num_ues() {
            assert_eq!(a.ues[i], b.ues[i]);
            for t in 0..a.num_slots {
                let (x, y) = (a.task(i, t), b.task(i, t));
                assert_eq!(y.cpu_cycles, 2.0 * x.cpu_cycles);
                assert_eq!(y.input_bits, x.input_bits);
                assert_eq!(y.required_service, x.required_service);
            }
        }
        assert_eq!(a.uav.cpu_capacity, b.uav.cpu_capacity);
    }

    #[test]
    fn storage_sweep_shares_everything_else() {
        let a = generate(&GeneratorParams {
            seed: 3,
            uav_storage: 2.0,
            ..Default::default()
        })
        .unwrap();
        let b = generate(&GeneratorParams {
            seed: 3,
            uav_storage: 8.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.tasks, b.tasks);
        assert_eq!(a.services, b.services);
        assert_eq!(b.bs.storage_capacity, 16.0);
        assert_eq!(a.bs.storage_capacity, 2.0 * a.uav.storage_capacity);
    }

    #[test]
    fn default_scenario_invariants() {
        let s = generate(&GeneratorParams::default()).unwrap();
        assert_eq!(s.num_ues(), 10);
        assert_eq!(s.num_slots, 100);
        assert_eq!(s.num_services(), 30);
        for row in &s.tasks {
            for t in row {
                assert!((1e8..=1e9).contains(&t.cpu_cycles));
                assert!((8e5..=8e6).contains(&t.input_bits));
                assert!(t.required_service < 30);
            }
        }
        assert!((5e9..=10e9).contains(&s.uav.cpu_capacity));
        assert!((3..=5).contains(&s.uav.max_associated_ues));
        assert!(s.services.sizes.iter().all(|x| (0.5..=1.0).contains(x)));
        assert_eq!(s.uav.start_pos, Point2::new(0.0, 0.0));
        assert_eq!(s.uav.end_pos, Point2::new(200.0, 200.0));
    }

    #[test]
    fn infeasible_geometry_rejected() {
        // 283 m diagonal, 9 slots x 30 m = 270 m
        let p = GeneratorParams {
            num_slots: 9,
            ..Default::default()
        };
        assert!(matches!(
            generate(&p),
            Err(Error::InfeasibleGeometry { .. })
        ));
        let p = GeneratorParams {
            num_slots: 10,
            ..Default::default()
        };
        assert!(generate(&p).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(generate(&GeneratorParams {
            zipf_skew: -1.0,
            ..Default::default()
        })
        .is_err());
        assert!(generate(&GeneratorParams {
            workload_coefficient: 0.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn empirical_requests_follow_zipf() {
        let p = GeneratorParams {
            num_ues: 50,
            num_slots: 2000,
            seed: 11,
            ..Default::default()
        };
        let s = generate(&p).unwrap();
        let mut counts = vec![0usize; 30];
        for row in &s.tasks {
            for t in row {
                counts[t.required_service] += 1;
            }
        }
        let n: usize = counts.iter().sum();
        assert!(n >= 100_000);
        let tv: f64 = counts
            .iter()
            .zip(&s.services.popularity)
            .map(|(&c, &pk)| (c as f64 / n as f64 - pk).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }
}
