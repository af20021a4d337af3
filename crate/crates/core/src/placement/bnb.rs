//! Best-first branch and bound over service placement.
//!
//! Each node fixes some (service, server) bits. Two lower bounds are combined:
//!
//! * the exact offloading energy with every open bit set to "placed", which is
//!   valid because placing more services never raises the optimum;
//! * a Lagrangian storage bound: per-service savings ignoring the per-slot caps
//!   are separable, so a fractional knapsack on one server with the other
//!   server's storage constraint priced by a multiplier bounds every
//!   completion from below.
//!
//! A node whose all-placed relaxation already fits in storage is solved
//! outright. Ties within [`TIE_EPS`] go to the lexicographically smallest
//! placement.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use super::{OffloadEvaluator, PlacementOutcome, TIE_EPS};
use crate::error::Result;
use crate::model::{Placement, ScenarioSpec, ServerKind, Trajectory, STORAGE_TOL};

#[derive(Debug, Clone, Default)]
pub struct BnbOptions {
    /// Starting incumbent; ignored unless it fits in storage.
    pub warm_start: Option<Placement>,
    /// Write one JSON line per processed node to this file.
    pub trace: Option<PathBuf>,
    /// Stop after this many nodes and return the incumbent. The outcome's
    /// `lower_bound` then says how far from optimal it can be.
    pub node_limit: Option<u64>,
}

/// A partial placement: `None` is undecided, `Some(true)` placed,
/// `Some(false)` excluded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnbNode {
    pub decided: Vec<[Option<bool>; 2]>,
    pub lower_bound: f64,
}

struct Queued {
    node: BnbNode,
    seq: u64,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // BinaryHeap is a max-heap: smallest bound, then oldest, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .node
            .lower_bound
            .total_cmp(&self.node.lower_bound)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    placement: Placement,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, placement: Placement, value: f64) -> bool {
        let better = value < self.value - TIE_EPS
            || (value <= self.value + TIE_EPS && placement < self.placement);
        if better {
            self.placement = placement;
            self.value = value;
        }
        better
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    seq: u64,
    decided: usize,
    lower_bound: f64,
    action: &'a str,
    incumbent: f64,
    /// Per service, `[uav, bs]`; `null` is undecided.
    node: &'a [[Option<bool>; 2]],
}

/// Static data shared by every node.
struct Ctx {
    sizes: Vec<f64>,
    capacity: [f64; 2],
    /// `savings[k][a + 2b]`: energy saved on service `k`'s tasks with UAV bit
    /// `a` and BS bit `b`, ignoring per-slot caps.
    savings: Vec<[f64; 4]>,
    useless: Vec<[bool; 2]>,
    branch_order: Vec<(usize, usize)>,
    greedy_order: Vec<(usize, usize)>,
    total_local: f64,
    /// Per slot, every task that saves something somewhere.
    slot_savings: Vec<Vec<SlotTask>>,
    max_ues: [usize; 2],
    cpu: [f64; 2],
}

impl Ctx {
    fn new(spec: &ScenarioSpec, ev: &OffloadEvaluator) -> Self {
        let k_count = spec.num_services();
        let table = ev.table();
        let mut savings = vec![[0.0; 4]; k_count];
        let mut counts = vec![0usize; k_count];
        for task in &table.tasks {
            let k = task.service;
            counts[k] += 1;
            let su = task.saving(ServerKind::Uav).unwrap_or(0.0);
            let sb = task.saving(ServerKind::Bs).unwrap_or(0.0);
            savings[k][1] += su;
            savings[k][2] += sb;
            savings[k][3] += su.max(sb);
        }
        let slot_savings = (0..table.num_slots)
            .map(|t| {
                table
                    .slot(t)
                    .iter()
                    .map(|x| SlotTask {
                        service: x.service,
                        saving: ServerKind::ALL.map(|k| x.saving(k).unwrap_or(0.0)),
                        freq: ServerKind::ALL.map(|k| x.offload[k.index()].map_or(0.0, |o| o.freq)),
                    })
                    .filter(|x| x.saving[0] > 0.0 || x.saving[1] > 0.0)
                    .collect()
            })
            .collect();
        let useless: Vec<[bool; 2]> = savings.iter().map(|s| [s[1] <= 0.0, s[2] <= 0.0]).collect();

        let mut services: Vec<usize> = (0..k_count).collect();
        let score = |k: usize| {
            let mean = if counts[k] > 0 {
                savings[k][3] / counts[k] as f64
            } else {
                0.0
            };
            spec.services.popularity[k] * mean
        };
        services.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        let branch_order = services.iter().flat_map(|&k| [(k, 0), (k, 1)]).collect();

        let sizes = spec.services.sizes.clone();
        let mut greedy_order: Vec<(usize, usize)> =
            (0..k_count).flat_map(|k| [(k, 0), (k, 1)]).collect();
        let ratio = |&(k, n): &(usize, usize)| savings[k][1 + n] / sizes[k];
        greedy_order.sort_by(|a, b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(b)));

        Self {
            sizes,
            capacity: [spec.uav.storage_capacity, spec.bs.storage_capacity],
            savings,
            useless,
            branch_order,
            greedy_order,
            total_local: table.total_local(),
            slot_savings,
            max_ues: table.limits.max_ues,
            cpu: table.limits.cpu,
        }
    }

    fn remaining(&self, d: &[[Option<bool>; 2]]) -> [f64; 2] {
        let mut rem = self.capacity;
        for (k, bits) in d.iter().enumerate() {
            for n in 0..2 {
                if bits[n] == Some(true) {
                    rem[n] -= self.sizes[k];
                }
            }
        }
        rem
    }

    /// Excludes open bits that are useless or can no longer fit.
    fn propagate(&self, d: &mut [[Option<bool>; 2]], rem: [f64; 2]) {
        for (k, bits) in d.iter_mut().enumerate() {
            for n in 0..2 {
                if bits[n].is_none() && (self.useless[k][n] || self.sizes[k] > rem[n] + STORAGE_TOL)
                {
                    bits[n] = Some(false);
                }
            }
        }
    }

    fn open_storage(&self, d: &[[Option<bool>; 2]]) -> [f64; 2] {
        let mut s = [0.0; 2];
        for (k, bits) in d.iter().enumerate() {
            for n in 0..2 {
                if bits[n].is_none() {
                    s[n] += self.sizes[k];
                }
            }
        }
        s
    }

    /// Lower bound on the objective from the storage knapsack relaxation.
    /// Lower bound on the objective from the storage knapsack relaxation,
    /// with the bit that the tightest relaxation takes fractionally.
    ///
    /// Besides the plain savings, each slot's UE-count or CPU cap is priced
    /// out: a task's saving drops by its price, the caps disappear and the
    /// problem separates by service again, with the price times the capacity
    /// coming back as a constant. Any non-negative prices give a valid
    /// bound. Their shape comes from the slot duals of `reference`, a good
    /// placement consistent with the node, and their scale is searched.
    /// Returns early once the bound exceeds `enough`.
    fn knapsack_bound(
        &self,
        d: &[[Option<bool>; 2]],
        rem: [f64; 2],
        reference: &[[bool; 2]],
        enough: f64,
    ) -> (f64, Option<(usize, usize)>) {
        let mut best = (f64::INFINITY, None);
        let consider =
            |table: &[[f64; 4]], c: f64, best: &mut (f64, Option<(usize, usize)>)| -> f64 {
                let mut worst = f64::INFINITY;
                for s in 0..2 {
                    let (v, frac) = self.lagrangian(table, d, rem, s);
                    worst = worst.min(c + v);
                    if c + v < best.0 {
                        *best = (c + v, frac.map(|k| (k, s)));
                    }
                }
                worst
            };
        consider(&self.savings, 0.0, &mut best);
        if self.total_local - best.0 > enough {
            return (self.total_local - best.0, best.1);
        }

        let prices = self.slot_prices(reference);
        let mut priced = vec![[0.0; 4]; d.len()];
        let mut eval = |theta: f64, best: &mut (f64, Option<(usize, usize)>)| -> f64 {
            let c = self.priced_savings(&prices, theta, &mut priced);
            consider(&priced, c, best)
        };
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, 1.5);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = eval(x1, &mut best);
        let mut f2 = eval(x2, &mut best);
        for _ in 0..4 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1, &mut best);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2, &mut best);
            }
        }
        (self.total_local - best.0, best.1)
    }

    /// Per-slot, per-server prices when exactly `reference` is placed: the
    /// optimal dual of either the count cap or the CPU cap of that slot,
    /// whichever is smaller. The UAV is priced first, the BS given it.
    fn slot_prices(&self, reference: &[[bool; 2]]) -> Vec<[Price; 2]> {
        let mut adv: Vec<(f64, f64)> = Vec::new();
        self.slot_savings
            .iter()
            .map(|tasks| {
                let mut out = [Price::default(); 2];
                for n in 0..2 {
                    adv.clear();
                    for t in tasks {
                        if !reference[t.service][n] || t.saving[n] <= 0.0 {
                            continue;
                        }
                        let m = 1 - n;
                        let other = if reference[t.service][m] {
                            out[m].apply(t.saving[m], t.freq[m])
                        } else {
                            0.0
                        };
                        let a = t.saving[n] - other;
                        if a > 0.0 {
                            adv.push((a, t.freq[n]));
                        }
                    }
                    let dual = |p: &Price, adv: &[(f64, f64)]| {
                        p.constant(self.max_ues[n], self.cpu[n])
                            + adv.iter().map(|&(a, f)| p.apply(a, f)).sum::<f64>()
                    };
                    let mut by_count = Price::default();
                    let cap = self.max_ues[n];
                    if adv.len() > cap {
                        let mut v: Vec<f64> = adv.iter().map(|x| x.0).collect();
                        let (_, nth, _) = v.select_nth_unstable_by(cap, |a, b| b.total_cmp(a));
                        by_count.per_ue = *nth;
                    }
                    let mut by_cpu = Price::default();
                    adv.sort_by(|a, b| (b.0 / b.1).total_cmp(&(a.0 / a.1)));
                    let mut used = 0.0;
                    for &(a, f) in adv.iter() {
                        used += f;
                        if used > self.cpu[n] {
                            by_cpu.per_hz = a / f;
                            break;
                        }
                    }
                    out[n] = if dual(&by_cpu, &adv) < dual(&by_count, &adv) {
                        by_cpu
                    } else {
                        by_count
                    };
                }
                out
            })
            .collect()
    }

    /// Fills `out` with per-service savings under prices scaled by `theta`
    /// and returns the constant the prices contribute.
    fn priced_savings(&self, prices: &[[Price; 2]], theta: f64, out: &mut [[f64; 4]]) -> f64 {
        out.iter_mut().for_each(|x| *x = [0.0; 4]);
        let mut constant = 0.0;
        for (tasks, p) in self.slot_savings.iter().zip(prices) {
            let p = p.map(|x| x.scaled(theta));
            constant += p[0].constant(self.max_ues[0], self.cpu[0])
                + p[1].constant(self.max_ues[1], self.cpu[1]);
            for t in tasks {
                let u = p[0].apply(t.saving[0], t.freq[0]);
                let b = p[1].apply(t.saving[1], t.freq[1]);
                out[t.service][1] += u;
                out[t.service][2] += b;
                out[t.service][3] += u.max(b);
            }
        }
        constant
    }

    /// Upper bound on total savings: fractional knapsack on server `s`, the
    /// other server's storage constraint dualised and the multiplier searched
    /// by golden section (any multiplier gives a valid bound).
    fn lagrangian(
        &self,
        savings: &[[f64; 4]],
        d: &[[Option<bool>; 2]],
        rem: [f64; 2],
        s: usize,
    ) -> (f64, Option<usize>) {
        let l = 1 - s;
        let mut items: Vec<Item> = Vec::with_capacity(d.len());
        let mut dual = |mu: f64| -> (f64, Option<usize>) {
            items.clear();
            let mut base = 0.0;
            for (k, bits) in d.iter().enumerate() {
                let size = self.sizes[k];
                let l_opts: &[bool] = match bits[l] {
                    None => &[false, true],
                    Some(true) => &[true],
                    Some(false) => &[false],
                };
                let value = |on_s: bool| {
                    l_opts
                        .iter()
                        .map(|&on_l| {
                            let mut bit = [false; 2];
                            bit[s] = on_s;
                            bit[l] = on_l;
                            let idx = bit[0] as usize + 2 * bit[1] as usize;
                            let price = if on_l && bits[l].is_none() {
                                mu * size
                            } else {
                                0.0
                            };
                            savings[k][idx] - price
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let (free, weighted) = match bits[s] {
                    Some(v) => (value(v), None),
                    None => (value(false), Some(value(true))),
                };
                base += free;
                if let Some(w) = weighted {
                    if w > free {
                        items.push(Item {
                            value: w - free,
                            weight: size,
                            id: k,
                        });
                    }
                }
            }
            let (packed, frac) = fractional_knapsack(&mut items, rem[s].max(0.0));
            (base + packed + mu * rem[l].max(0.0), frac)
        };

        let mu_max = savings
            .iter()
            .zip(&self.sizes)
            .map(|(sv, sz)| sv.iter().fold(0.0f64, |a, b| a.max(*b)) / sz)
            .fold(0.0, f64::max);
        let mut best = dual(0.0);
        if mu_max <= 0.0 {
            return best;
        }
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, mu_max);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = dual(x1);
        let mut f2 = dual(x2);
        for _ in 0..16 {
            if f1.0 <= f2.0 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = dual(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = dual(x2);
            }
        }
        for f in [f1, f2] {
            if f.0 < best.0 {
                best = f;
            }
        }
        best
    }

    /// Smallest placement (in tie-break order) any completion of `d` can reach.
    fn lexmin_cmp(&self, d: &[[Option<bool>; 2]], other: &Placement) -> Ordering {
        for (bits, p) in d.iter().zip(&other.placed) {
            for n in 0..2 {
                match (bits[n] == Some(true)).cmp(&p[n]) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
        }
        Ordering::Equal
    }

    fn prunable(&self, lb: f64, d: &[[Option<bool>; 2]], inc: &Incumbent) -> bool {
        if lb > inc.value + TIE_EPS {
            return true;
        }
        lb >= inc.value - TIE_EPS && self.lexmin_cmp(d, &inc.placement) != Ordering::Less
    }

    fn greedy_completion(&self, d: &[[Option<bool>; 2]], mut rem: [f64; 2]) -> Placement {
        let mut placed: Vec<[bool; 2]> = d
            .iter()
            .map(|b| [b[0] == Some(true), b[1] == Some(true)])
            .collect();
        for &(k, n) in &self.greedy_order {
            if d[k][n].is_none() && self.sizes[k] <= rem[n] + STORAGE_TOL {
                placed[k][n] = true;
                rem[n] -= self.sizes[k];
            }
        }
        Placement { placed }
    }
}

fn relaxed(d: &[[Option<bool>; 2]]) -> Vec<[bool; 2]> {
    d.iter()
        .map(|b| [b[0] != Some(false), b[1] != Some(false)])
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct SlotTask {
    service: usize,
    saving: [f64; 2],
    freq: [f64; 2],
}

/// Price on one server's per-slot caps.
#[derive(Debug, Clone, Copy, Default)]
struct Price {
    per_ue: f64,
    per_hz: f64,
}

impl Price {
    fn apply(&self, saving: f64, freq: f64) -> f64 {
        (saving - self.per_ue - self.per_hz * freq).max(0.0)
    }

    fn constant(&self, max_ues: usize, cpu: f64) -> f64 {
        self.per_ue * max_ues as f64 + self.per_hz * cpu
    }

    fn scaled(&self, theta: f64) -> Self {
        Self {
            per_ue: theta * self.per_ue,
            per_hz: theta * self.per_hz,
        }
    }
}

struct Item {
    value: f64,
    weight: f64,
    id: usize,
}

/// Best value packable into `cap`, items taken fractionally, and the id of
/// the item that was split. Sorts in place.
fn fractional_knapsack(items: &mut [Item], cap: f64) -> (f64, Option<usize>) {
    items.sort_by(|a, b| {
        (b.value / b.weight)
            .total_cmp(&(a.value / a.weight))
            .then(a.id.cmp(&b.id))
    });
    let mut left = cap;
    let mut total = 0.0;
    for it in items.iter() {
        if it.weight <= left {
            total += it.value;
            left -= it.weight;
        } else {
            return (total + it.value * left / it.weight, Some(it.id));
        }
    }
    (total, None)
}

/// Exact minimum-energy placement for a fixed trajectory.
pub fn bnb_place(spec: &ScenarioSpec, traj: &Trajectory) -> Result<PlacementOutcome> {
    bnb_place_with(spec, traj, &BnbOptions::default())
}

pub fn bnb_place_with(
    spec: &ScenarioSpec,
    traj: &Trajectory,
    opts: &BnbOptions,
) -> Result<PlacementOutcome> {
    let mut ev = OffloadEvaluator::new(spec, traj)?;
    let ctx = Ctx::new(spec, &ev);
    let k_count = spec.num_services();
    let mut trace = match &opts.trace {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };

    let empty = Placement::empty(k_count);
    let mut inc = Incumbent {
        value: ev.objective(&empty.placed),
        placement: empty,
    };
    if let Some(w) = &opts.warm_start {
        if w.placed.len() == k_count && w.fits(spec) {
            let v = ev.objective(&w.placed);
            inc.offer(w.clone(), v);
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Queued {
        node: BnbNode {
            decided: vec![[None; 2]; k_count],
            lower_bound: f64::NEG_INFINITY,
        },
        seq,
    });
    let mut nodes = 0u64;

    let mut lower_bound = f64::INFINITY;
    while let Some(Queued {
        node,
        seq: node_seq,
    }) = heap.pop()
    {
        if opts.node_limit.is_some_and(|l| nodes >= l)
            && !ctx.prunable(node.lower_bound, &node.decided, &inc)
        {
            // Best-first: this node carries the smallest bound still open.
            lower_bound = node.lower_bound;
            break;
        }
        let mut log =
            |action: &str, lb: f64, d: &[[Option<bool>; 2]], inc: &Incumbent| -> Result<()> {
                if let Some(w) = trace.as_mut() {
                    let decided = d.iter().flatten().filter(|b| b.is_some()).count();
                    let line = TraceLine {
                        seq: node_seq,
                        decided,
                        lower_bound: lb,
                        action,
                        incumbent: inc.value,
                        node: d,
                    };
                    serde_json::to_writer(&mut *w, &line)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            };

        if ctx.prunable(node.lower_bound, &node.decided, &inc) {
            log("pruned", node.lower_bound, &node.decided, &inc)?;
            continue;
        }
        let mut d = node.decided;
        let rem = ctx.remaining(&d);
        ctx.propagate(&mut d, rem);
        nodes += 1;
        let mut relax = relaxed(&d);
        let b1 = ev.objective(&relax);
        let open = ctx.open_storage(&d);

        if open[0] <= rem[0] + STORAGE_TOL && open[1] <= rem[1] + STORAGE_TOL {
            // Every completion fits, so the relaxation is attained. Walk the
            // open bits in tie-break order and drop each one the optimum
            // does not need.
            if b1 <= inc.value + TIE_EPS {
                for k in 0..k_count {
                    for n in 0..2 {
                        if d[k][n].is_none() {
                            relax[k][n] = false;
                            if ev.objective(&relax) > b1 + TIE_EPS {
                                relax[k][n] = true;
                            }
                        }
                    }
                }
                let v = ev.objective(&relax);
                inc.offer(Placement { placed: relax }, v);
            }
            log("solved", b1, &d, &inc)?;
            continue;
        }

        let guess = ctx.greedy_completion(&d, rem);
        let v = ev.objective(&guess.placed);
        inc.offer(guess.clone(), v);
        let (kb, critical) = ctx.knapsack_bound(&d, rem, &guess.placed, inc.value + TIE_EPS);
        let lb = b1.max(kb);
        if ctx.prunable(lb, &d, &inc) {
            log("pruned", lb, &d, &inc)?;
            continue;
        }

        let (k, n) = critical
            .filter(|&(k, n)| d[k][n].is_none())
            .unwrap_or_else(|| {
                *ctx.branch_order
                    .iter()
                    .find(|&&(k, n)| d[k][n].is_none())
                    .expect("an infeasible relaxation has an open bit")
            });
        log("branched", lb, &d, &inc)?;
        for choice in [true, false] {
            let mut child = d.clone();
            child[k][n] = Some(choice);
            seq += 1;
            heap.push(Queued {
                node: BnbNode {
                    decided: child,
                    lower_bound: lb,
                },
                seq,
            });
        }
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }

    let plan = ev.plan(spec, &inc.placement, traj);
    let lower_bound = lower_bound.min(inc.value);
    Ok(PlacementOutcome {
        placement: inc.placement,
        plan,
        objective: inc.value,
        lower_bound,
        nodes,
    })
}
