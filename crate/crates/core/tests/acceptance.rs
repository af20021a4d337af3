//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line, then exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use agmec::alloc::allocate_cpu;
use agmec::harness::{
    run_experiment, write_results, Cell, ExperimentKind, ExperimentPlan, ExperimentResults,
    RESULTS_FILE,
};
use agmec::model::{
    check_feasible, evaluate_energy, OffloadPlan, PhysicsConstants, Point2, ServerKind, Trajectory,
    Venue,
};
use agmec::orchestrator::{baseline_greedy, GREEDY, LOCAL, PROPOSED, RANDOM};
use agmec::placement::{bnb_place, brute_force_place, solve_offload_given_placement};
use agmec::scenario::{generate, GeneratorParams};
use agmec::testutil::tiny_spec;
use agmec::trajectory::{sca_optimize, RateSurrogate};
use common::{mean_uav_distance, one_slot, rng, small_generated};
use rand::Rng;

const STORAGE_SWEEP: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
const WORKLOAD_SWEEP: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
const SEEDS: usize = 20;
const WORKLOAD_SEEDS: usize = 5;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bnb_matches_brute_force() -> Check {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let spec = small_generated(seed);
        let traj = Trajectory::for_spec(&spec);
        let bnb = bnb_place(&spec, &traj).map_err(|e| e.to_string())?;
        let brute = brute_force_place(&spec, &traj).map_err(|e| e.to_string())?;
        let gap = (bnb.objective - brute.objective).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-9, || {
            format!(
                "seed {seed}: bnb {} J vs brute {} J",
                bnb.objective, brute.objective
            )
        })?;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("50 instances, max gap {worst:.1e} J, {secs:.2} s"))
}

/// Cheapest feasible venue map found by trying all 3^n of them.
fn enumerate_venues(
    spec: &agmec::model::ScenarioSpec,
    placement: &agmec::model::Placement,
    traj: &Trajectory,
) -> f64 {
    let n = spec.num_ues();
    let all = [Venue::Local, Venue::Uav, Venue::Bs];
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let venues: Vec<Vec<Venue>> = (0..n)
            .map(|_| {
                let v = all[c % 3];
                c /= 3;
                vec![v]
            })
            .collect();
        let Ok(plan) = allocate_cpu(spec, placement, &venues, traj) else {
            continue;
        };
        if !check_feasible(spec, placement, &plan, traj).is_empty() {
            continue;
        }
        best = best.min(evaluate_energy(spec, placement, &plan, traj).unwrap());
    }
    best
}

fn assignment_is_exact() -> Check {
    let mut offloaded = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed % 4) as usize;
        let (spec, placement, traj) = one_slot(1000 + seed, n);
        let plan =
            solve_offload_given_placement(&spec, &placement, &traj).map_err(|e| e.to_string())?;
        let got = evaluate_energy(&spec, &placement, &plan, &traj).map_err(|e| e.to_string())?;
        let want = enumerate_venues(&spec, &placement, &traj);
        ensure((got - want).abs() <= 1e-12 * want.max(1.0), || {
            format!("seed {seed}: solver {got} J, enumeration {want} J")
        })?;
        offloaded += plan
            .venue
            .iter()
            .flatten()
            .filter(|v| **v != Venue::Local)
            .count();
    }
    Ok(format!("100 instances, {offloaded} tasks offloaded"))
}

/// Grid search over per-task frequencies (1 MHz steps) for the tasks on one
/// server. Returns the first feasible allocation in lexicographic order.
fn grid_search(cycles: &[f64], comm: &[f64], slot: f64, cap: f64) -> Option<Vec<f64>> {
    let step = 1e6;
    let k_max = (cap / step).floor() as usize;
    let ok = |j: usize, f: f64| cycles[j] / f + comm[j] <= slot;
    let mut idx = vec![1usize; cycles.len()];
    loop {
        let f: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        if f.iter().sum::<f64>() <= cap && (0..f.len()).all(|j| ok(j, f[j])) {
            return Some(f);
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return None;
            }
            idx[j] += 1;
            if idx[j] <= k_max {
                break;
            }
            idx[j] = 1;
            j += 1;
        }
    }
}

fn allocation_matches_grid() -> Check {
    let mut feasible = 0;
    let mut infeasible = 0;
    let mut worst_tight = 0.0f64;
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let m = [r.gen_range(1..=3usize), r.gen_range(0..=3usize)];
        let n = m[0] + m[1];
        let cycles: Vec<f64> = (0..n).map(|_| r.gen_range(5e6..2.5e7)).collect();
        let bits: Vec<f64> = (0..n).map(|_| r.gen_range(8e5..3e6)).collect();
        let mut spec = tiny_spec(n, 1, |i, _| agmec::model::TaskSpec {
            cpu_cycles: cycles[i],
            input_bits: bits[i],
            required_service: 0,
        });
        spec.uav.cpu_capacity = r.gen_range(20e6..80e6);
        spec.bs.cpu_capacity = r.gen_range(20e6..80e6);
        let placement = agmec::model::Placement::full(1);
        let traj = Trajectory::for_spec(&spec);
        let venues: Vec<Vec<Venue>> = (0..n)
            .map(|i| vec![if i < m[0] { Venue::Uav } else { Venue::Bs }])
            .collect();
        let res = allocate_cpu(&spec, &placement, &venues, &traj);

        for kind in ServerKind::ALL {
            let members: Vec<usize> = (0..n)
                .filter(|&i| venues[i][0] == Venue::from(kind))
                .collect();
            if members.is_empty() {
                continue;
            }
            let pos = traj.slot_position(0);
            let comm: Vec<f64> = members
                .iter()
                .map(|&i| bits[i] / spec.link_rate(i, kind, pos).unwrap())
                .collect();
            let cyc: Vec<f64> = members.iter().map(|&i| cycles[i]).collect();
            let cap = spec.cpu_capacity(kind);
            let grid = grid_search(&cyc, &comm, spec.slot_len, cap);
            match &res {
                Err(bad) => {
                    let flagged = members.iter().any(|i| bad.pairs.contains(&(*i, 0)));
                    if flagged {
                        ensure(grid.is_none(), || {
                            format!("seed {seed} {kind}: reported infeasible, grid found {grid:?}")
                        })?;
                    }
                }
                Ok(plan) => {
                    let fs: Vec<f64> = members.iter().map(|&i| plan.cpu_alloc[i][0]).collect();
                    // Rounding up to the grid may overflow a nearly full server.
                    let slack = cap - fs.iter().sum::<f64>();
                    if slack >= members.len() as f64 * 1e6 {
                        ensure(grid.is_some(), || {
                            format!("seed {seed} {kind}: closed form feasible, grid found nothing")
                        })?;
                    }
                    if let Some(g) = &grid {
                        for (j, gf) in g.iter().enumerate() {
                            // Every grid point meeting the deadline sits at or above f*.
                            ensure(*gf >= fs[j] * (1.0 - 1e-12), || {
                                format!("seed {seed} {kind}: grid {gf} below closed form {}", fs[j])
                            })?;
                        }
                    }
                    for (j, f) in fs.iter().enumerate() {
                        let tight = (cyc[j] / f + comm[j] - spec.slot_len).abs();
                        worst_tight = worst_tight.max(tight);
                        ensure(tight <= 1e-9, || {
                            format!("seed {seed} {kind}: deadline slack {tight:e} s")
                        })?;
                    }
                }
            }
        }

        match res {
            Ok(plan) => {
                feasible += 1;
                // Energy is the same for every feasible allocation, so any
                // grid point that fits must score the same.
                let e = evaluate_energy(&spec, &placement, &plan, &traj).unwrap();
                let mut grid_plan = OffloadPlan {
                    venue: venues.clone(),
                    cpu_alloc: plan.cpu_alloc.clone(),
                };
                let mut all_grid = true;
                for kind in ServerKind::ALL {
                    let members: Vec<usize> = (0..n)
                        .filter(|&i| venues[i][0] == Venue::from(kind))
                        .collect();
                    let pos = traj.slot_position(0);
                    let comm: Vec<f64> = members
                        .iter()
                        .map(|&i| bits[i] / spec.link_rate(i, kind, pos).unwrap())
                        .collect();
                    let cyc: Vec<f64> = members.iter().map(|&i| cycles[i]).collect();
                    match grid_search(&cyc, &comm, spec.slot_len, spec.cpu_capacity(kind)) {
                        Some(g) if !members.is_empty() => {
                            for (j, &i) in members.iter().enumerate() {
                                grid_plan.cpu_alloc[i][0] = g[j];
                            }
                        }
                        Some(_) => {}
                        None => all_grid = false,
                    }
                }
                if all_grid {
                    let eg = evaluate_energy(&spec, &placement, &grid_plan, &traj)
                        .map_err(|e| format!("seed {seed}: grid plan rejected: {e}"))?;
                    ensure((eg - e).abs() <= 1e-12 * e.max(1.0), || {
                        format!("seed {seed}: grid energy {eg} vs closed form {e}")
                    })?;
                }
            }
            Err(_) => infeasible += 1,
        }
    }
    Ok(format!(
        "{feasible} feasible / {infeasible} infeasible, max deadline slack {worst_tight:.1e} s"
    ))
}

/// Rate and its derivative in squared distance, written out independently.
fn true_rate(z: f64, p: f64, ph: &PhysicsConstants) -> (f64, f64) {
    let e = ph.uav_pathloss_exponent;
    let snr = p * ph.ref_channel_gain / (ph.noise_power * z.powf(e / 2.0));
    let r = ph.bandwidth * (1.0 + snr).log2();
    let dr = ph.bandwidth / std::f64::consts::LN_2 * snr / (1.0 + snr) * (-e / 2.0) / z;
    (r, dr)
}

fn sca_is_sound() -> Check {
    let ph = PhysicsConstants::default();
    let h = 50.0;
    let p = 0.1;
    let mut r = rng(3000);
    let mut samples = 0;
    let mut worst_tight = 0.0f64;
    let mut worst_grad = 0.0f64;
    for e in 0..20 {
        let u = Point2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0));
        let q0 = Point2::new(r.gen_range(0.0..200.0), r.gen_range(0.0..200.0));
        let sur = RateSurrogate::expand(&u, &q0, h, p, &ph).map_err(|e| e.to_string())?;
        let z0 = u.sq_dist(&q0) + h * h;
        let (r0, dr0) = true_rate(z0, p, &ph);
        let tight = (sur.rate(&q0, &u) - r0).abs() / r0;
        let g = sur.gradient(&q0, &u);
        let gt = [2.0 * dr0 * (q0.x - u.x), 2.0 * dr0 * (q0.y - u.y)];
        let gn = gt[0].hypot(gt[1]).max(f64::MIN_POSITIVE);
        let grad = (g[0] - gt[0]).hypot(g[1] - gt[1]) / gn;
        worst_tight = worst_tight.max(tight);
        worst_grad = worst_grad.max(grad);
        ensure(tight <= 1e-9 && grad <= 1e-9, || {
            format!("expansion {e}: tightness {tight:e}, gradient {grad:e}")
        })?;
        for _ in 0..1000 {
            let q = Point2::new(r.gen_range(-50.0..250.0), r.gen_range(-50.0..250.0));
            let (rt, _) = true_rate(u.sq_dist(&q) + h * h, p, &ph);
            let rs = sur.rate(&q, &u);
            samples += 1;
            ensure(rs <= rt * (1.0 + 1e-12), || {
                format!("expansion {e}: surrogate {rs} above rate {rt} at {q:?}")
            })?;
        }
    }

    let mut moved = 0;
    for seed in 1..=20u64 {
        let spec = generate(&GeneratorParams {
            seed,
            ..GeneratorParams::default()
        })
        .map_err(|e| e.to_string())?;
        let start = baseline_greedy(&spec).map_err(|e| e.to_string())?;
        let out = sca_optimize(
            &spec,
            &start.placement,
            &start.offload_plan,
            &start.trajectory,
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        for w in out.uav_energy_trace.windows(2) {
            ensure(w[1] <= w[0] + 1e-9, || {
                format!("seed {seed}: UAV energy rose {} -> {}", w[0], w[1])
            })?;
        }
        ensure(out.energy <= start.total_energy + 1e-9, || {
            format!(
                "seed {seed}: {} J after vs {} J before",
                out.energy, start.total_energy
            )
        })?;
        if out.energy < start.total_energy {
            moved += 1;
        }
    }
    Ok(format!(
        "{samples} samples, tightness {worst_tight:.1e}, gradient {worst_grad:.1e}, \
         20 runs monotone ({moved} improved)"
    ))
}

/// Reports of one algorithm keyed by (sweep value bits, seed).
fn energies(res: &ExperimentResults, alg: &str) -> BTreeMap<(u64, u64), f64> {
    res.rows()
        .into_iter()
        .filter(|r| r.algorithm == alg)
        .map(|r| ((r.sweep_value.to_bits(), r.seed), r.total_energy_j))
        .collect()
}

fn report<'a>(cell: &'a Cell, alg: &str) -> &'a agmec::model::SolutionReport {
    cell.reports.iter().find(|r| r.algorithm == alg).unwrap()
}

fn default_cells(storage: &ExperimentResults) -> Vec<&Cell> {
    let d = GeneratorParams::default().uav_storage;
    storage
        .cells
        .iter()
        .filter(|c| c.sweep_value == d)
        .collect()
}

fn convergence(storage: &ExperimentResults) -> Check {
    let d = GeneratorParams::default();
    let cell = default_cells(storage)
        .into_iter()
        .find(|c| c.seed == d.seed)
        .ok_or("default cell missing")?;
    let rep = report(cell, PROPOSED);
    let mut trace = vec![rep.initial_energy];
    trace.extend(&rep.per_iteration_energy);
    for w in trace.windows(2) {
        ensure(w[1] <= w[0], || format!("trace rose: {trace:?}"))?;
    }
    let rounds = rep.per_iteration_energy.len();
    let last = trace[trace.len() - 2] - trace[trace.len() - 1];
    ensure(rounds <= 10 && last < 1e-3, || {
        format!("{rounds} rounds, last decrease {last:e} J")
    })?;
    let secs = rep.stats.wall_time_s;
    ensure(secs < 300.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{:.4} J -> {:.4} J in {rounds} rounds ({secs:.1} s)",
        rep.initial_energy, rep.total_energy
    ))
}

fn trajectory_approaches_ues(storage: &ExperimentResults) -> Check {
    let mut ratios = Vec::new();
    for cell in default_cells(storage) {
        let rep = report(cell, PROPOSED);
        let straight = Trajectory::for_spec(&cell.spec);
        let v = &rep.offload_plan.venue;
        let (Some(opt), Some(line)) = (
            mean_uav_distance(&cell.spec, v, &rep.trajectory),
            mean_uav_distance(&cell.spec, v, &straight),
        ) else {
            return Err(format!("seed {}: nothing served by the UAV", cell.seed));
        };
        ensure(opt < line, || {
            format!(
                "seed {}: {opt:.2} m optimised vs {line:.2} m straight",
                cell.seed
            )
        })?;
        ratios.push(opt / line);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(format!(
        "{} seeds, mean distance ratio {mean:.3}",
        ratios.len()
    ))
}

fn dominance(storage: &ExperimentResults) -> Check {
    let cells = default_cells(storage);
    let mut red = [0.0f64; 3];
    for cell in &cells {
        let e = |a: &str| report(cell, a).total_energy;
        let (p, r, g, l) = (e(PROPOSED), e(RANDOM), e(GREEDY), e(LOCAL));
        ensure(p <= g && g <= l && p <= r && r <= l, || {
            format!("seed {}: P {p} R {r} G {g} L {l}", cell.seed)
        })?;
        red[0] += 1.0 - p / l;
        red[1] += 1.0 - p / r;
        red[2] += 1.0 - p / g;
    }
    let n = cells.len() as f64;
    let [vs_local, vs_random, vs_greedy] = red.map(|x| 100.0 * x / n);
    ensure(vs_local >= 50.0, || {
        format!("reduction vs local {vs_local:.2}%")
    })?;
    ensure(vs_random >= vs_greedy, || {
        format!("vs random {vs_random:.2}% < vs greedy {vs_greedy:.2}%")
    })?;
    Ok(format!(
        "{} seeds; reduction vs local {vs_local:.2}%, random {vs_random:.2}%, greedy {vs_greedy:.2}%",
        cells.len()
    ))
}

/// Checks that each seed's column is ordered by `ok` along the sweep.
fn column_ordered(
    res: &ExperimentResults,
    alg: &str,
    values: &[f64],
    ok: impl Fn(f64, f64) -> bool,
) -> Result<(), String> {
    let e = energies(res, alg);
    for seed in res.plan.seeds() {
        let col: Vec<f64> = values.iter().map(|v| e[&(v.to_bits(), seed)]).collect();
        for w in col.windows(2) {
            ensure(ok(w[0], w[1]), || format!("{alg}, seed {seed}: {col:?}"))?;
        }
    }
    Ok(())
}

fn storage_monotone(storage: &ExperimentResults) -> Check {
    column_ordered(storage, PROPOSED, &STORAGE_SWEEP, |a, b| b <= a)?;
    column_ordered(storage, GREEDY, &STORAGE_SWEEP, |a, b| b <= a)?;
    column_ordered(storage, LOCAL, &STORAGE_SWEEP, |a, b| a == b)?;
    Ok(format!(
        "{} seeds x {:?} units",
        storage.plan.num_seeds, STORAGE_SWEEP
    ))
}

fn workload_linear(workload: &ExperimentResults) -> Check {
    let local = energies(workload, LOCAL);
    for seed in workload.plan.seeds() {
        let base = local[&(1.0f64.to_bits(), seed)];
        for v in WORKLOAD_SWEEP {
            let got = local[&(v.to_bits(), seed)];
            let want = v * base;
            ensure((got - want).abs() <= 1e-12 * want, || {
                format!("local, seed {seed}, coefficient {v}: {got} vs {want}")
            })?;
        }
    }
    for alg in [PROPOSED, RANDOM, GREEDY, LOCAL] {
        column_ordered(workload, alg, &WORKLOAD_SWEEP, |a, b| b >= a)?;
    }
    Ok(format!(
        "{} seeds x coefficients {:?}",
        workload.plan.num_seeds, WORKLOAD_SWEEP
    ))
}

fn deterministic() -> Check {
    let plan = ExperimentPlan {
        kind: ExperimentKind::StorageSweep,
        sweep_values: vec![1.0, 3.0],
        num_seeds: 3,
        generator: GeneratorParams {
            num_ues: 5,
            num_services: 8,
            num_slots: 20,
            ..GeneratorParams::default()
        },
        solver: Default::default(),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut tables = Vec::new();
    for threads in [1, 3] {
        let out = dir.path().join(format!("t{threads}"));
        let res = run_experiment(&plan, Some(threads)).map_err(|e| e.to_string())?;
        write_results(&out, &res).map_err(|e| e.to_string())?;
        tables.push(fs::read(out.join(RESULTS_FILE)).map_err(|e| e.to_string())?);
    }
    ensure(tables[0] == tables[1], || {
        "results.csv differs between runs".into()
    })?;
    Ok(format!(
        "{} bytes identical across 1 and 3 threads",
        tables[0].len()
    ))
}

fn sweep(kind: ExperimentKind, values: &[f64], seeds: usize) -> ExperimentResults {
    let plan = ExperimentPlan {
        kind,
        sweep_values: values.to_vec(),
        num_seeds: seeds,
        generator: GeneratorParams::default(),
        solver: Default::default(),
    };
    run_experiment(&plan, None).expect("sweep runs")
}

/// Criterion numbers given on the command line; all when none are.
fn selected() -> Vec<u32> {
    let picked: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|n| (1..=10).contains(n))
        .collect();
    if picked.is_empty() {
        (1..=10).collect()
    } else {
        picked
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let want = selected();
    let on = |n: u32| want.contains(&n);
    let mut failed = 0;
    let mut show = |n: u32, name: &str, check: &dyn Fn() -> Check| {
        if !want.contains(&n) {
            return;
        }
        match check() {
            Ok(d) => println!("criterion {n:>2} PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {d}");
            }
        }
    };

    show(
        1,
        "placement search matches enumeration",
        &bnb_matches_brute_force,
    );
    show(
        2,
        "slot assignment matches enumeration",
        &assignment_is_exact,
    );
    show(
        3,
        "closed-form allocation matches grid search",
        &allocation_matches_grid,
    );
    show(4, "rate surrogate is a tight lower bound", &sca_is_sound);

    if (5..=8).any(on) {
        let storage = sweep(ExperimentKind::StorageSweep, &STORAGE_SWEEP, SEEDS);
        show(5, "alternating scheme converges", &|| convergence(&storage));
        show(6, "trajectory moves towards served UEs", &|| {
            trajectory_approaches_ues(&storage)
        });
        show(7, "dominance over baselines", &|| dominance(&storage));
        show(8, "energy non-increasing in UAV storage", &|| {
            storage_monotone(&storage)
        });
    }
    if on(9) {
        let workload = sweep(
            ExperimentKind::WorkloadSweep,
            &WORKLOAD_SWEEP,
            WORKLOAD_SEEDS,
        );
        show(9, "energy linear and monotone in workload", &|| {
            workload_linear(&workload)
        });
    }
    show(10, "results table is deterministic", &deterministic);

    println!(
        "{} of {} criteria passed in {:.1} s",
        want.len() - failed,
        want.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
