//! Exact per-slot assignment of tasks to {local, UAV, BS}.
//!
//! Each server has a cap on associated UEs and a CPU budget that the
//! closed-form allocations must fit into, so the slot problem is a small
//! two-server knapsack. It is solved exactly by depth-first search with an
//! optimistic remaining-savings bound.

use crate::model::{ServerKind, Venue};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadOption {
    /// UE transmit energy in joules.
    pub energy: f64,
    /// Closed-form server frequency in Hz.
    pub freq: f64,
}

/// Everything the slot solver needs to know about one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskOptions {
    pub local: f64,
    /// Indexed by [`ServerKind::index`]; `None` when the server cannot serve
    /// the task regardless of placement (coverage, deadline, CPU).
    pub offload: [Option<OffloadOption>; 2],
    pub service: usize,
}

impl TaskOptions {
    /// Energy saved against local execution, if strictly positive.
    pub fn saving(&self, kind: ServerKind) -> Option<f64> {
        let o = self.offload[kind.index()]?;
        let s = self.local - o.energy;
        (s > 0.0).then_some(s)
    }

    pub fn cost(&self, venue: Venue) -> f64 {
        match venue.server() {
            None => self.local,
            Some(k) => {
                self.offload[k.index()]
                    .expect("venue has an offload option")
                    .energy
            }
        }
    }
}

/// Resource limits of both servers in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotLimits {
    pub max_ues: [usize; 2],
    pub cpu: [f64; 2],
}

/// CPU check used by the slot solver. Strict, so that the allocator's
/// tolerance-padded check always accepts what the solver produced.
pub fn cpu_fits(total: f64, capacity: f64) -> bool {
    total <= capacity
}

/// Minimum-energy assignment for one slot. `allowed[n]` says whether task `i`
/// may use server `n` (its service is placed there). Returns the energy summed
/// in task order and one venue per task.
pub fn solve_slot(
    tasks: &[TaskOptions],
    allowed: &[[bool; 2]],
    limits: &SlotLimits,
) -> (f64, Vec<Venue>) {
    struct Cand {
        idx: usize,
        // (saving, kind, freq), best first
        opts: Vec<(f64, ServerKind, f64)>,
        best: f64,
    }

    let mut cands: Vec<Cand> = tasks
        .iter()
        .enumerate()
        .filter_map(|(idx, t)| {
            let mut opts: Vec<(f64, ServerKind, f64)> = ServerKind::ALL
                .iter()
                .filter(|k| allowed[idx][k.index()] && limits.max_ues[k.index()] > 0)
                .filter_map(|&k| {
                    let f = t.offload[k.index()]?.freq;
                    t.saving(k)
                        .filter(|_| cpu_fits(f, limits.cpu[k.index()]))
                        .map(|s| (s, k, f))
                })
                .collect();
            if opts.is_empty() {
                return None;
            }
            opts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let best = opts[0].0;
            Some(Cand { idx, opts, best })
        })
        .collect();
    cands.sort_by(|a, b| b.best.total_cmp(&a.best).then(a.idx.cmp(&b.idx)));

    let mut suffix = vec![0.0; cands.len() + 1];
    for j in (0..cands.len()).rev() {
        suffix[j] = suffix[j + 1] + cands[j].best;
    }

    struct Search<'a> {
        cands: &'a [Cand],
        suffix: &'a [f64],
        limits: &'a SlotLimits,
        used: [usize; 2],
        cpu: [f64; 2],
        current: Vec<Option<ServerKind>>,
        best_saving: f64,
        best: Vec<Option<ServerKind>>,
    }

    impl Search<'_> {
        fn go(&mut self, j: usize, saving: f64) {
            if j == self.cands.len() {
                if saving > self.best_saving {
                    self.best_saving = saving;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            if saving + self.suffix[j] <= self.best_saving {
                return;
            }
            let cand = &self.cands[j];
            for &(s, kind, f) in &cand.opts {
                let k = kind.index();
                if self.used[k] < self.limits.max_ues[k]
                    && cpu_fits(self.cpu[k] + f, self.limits.cpu[k])
                {
                    self.used[k] += 1;
                    let prev = self.cpu[k];
                    self.cpu[k] += f;
                    self.current[j] = Some(kind);
                    self.go(j + 1, saving + s);
                    self.current[j] = None;
                    self.cpu[k] = prev;
                    self.used[k] -= 1;
                }
            }
            self.go(j + 1, saving);
        }
    }

    let mut search = Search {
        cands: &cands,
        suffix: &suffix,
        limits,
        used: [0; 2],
        cpu: [0.0; 2],
        current: vec![None; cands.len()],
        best_saving: 0.0,
        best: vec![None; cands.len()],
    };
    search.go(0, 0.0);

    let mut venues = vec![Venue::Local; tasks.len()];
    for (c, choice) in cands.iter().zip(&search.best) {
        if let Some(k) = choice {
            venues[c.idx] = Venue::from(*k);
        }
    }
    let cost = tasks.iter().zip(&venues).map(|(t, v)| t.cost(*v)).sum();
    (cost, venues)
}
