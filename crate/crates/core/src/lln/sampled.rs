//! Monte Carlo expectations for general γ.
//!
//! Every cohort of newly infected mass carries `samples` kernel paths with
//! birth times spread uniformly over its cell. Members sharing the same
//! current γ level decay together, so each level keeps a single running sum
//! `Σ w·e^{−∫γF̄}`; a member only needs individual attention when its path
//! crosses a breakpoint, and is forgotten once it reaches its final segment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{check_residual, LimitConfig, LimitSolution, Renewal, SolverPath};
use crate::error::Result;
use crate::grid::TrajectoryGrid;
use crate::kernel::{InitialLaw, KernelLaw, KernelPath};
use crate::rng::{stream, Tag};

struct Member {
    path: KernelPath,
    birth: f64,
    seg: usize,
    weight: f64,
    /// ∫γF̄ up to the last update and the value of Φ = ∫F̄ at that time.
    exponent: f64,
    phi_at: f64,
    pool: usize,
}

#[derive(PartialEq)]
struct Event {
    time: f64,
    key: u64,
    slot: usize,
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Default)]
struct Pools {
    levels: Vec<f64>,
    sums: Vec<f64>,
}

impl Pools {
    fn index(&mut self, g: f64) -> usize {
        match self.levels.iter().position(|l| *l == g) {
            Some(i) => i,
            None => {
                self.levels.push(g);
                self.sums.push(0.0);
                self.levels.len() - 1
            }
        }
    }

    fn s_bar(&self) -> f64 {
        self.levels.iter().zip(&self.sums).map(|(g, s)| g * s).sum()
    }

    fn mass(&self) -> f64 {
        self.sums.iter().sum()
    }
}

struct State {
    members: Vec<Option<Member>>,
    free: Vec<usize>,
    heap: BinaryHeap<Event>,
    pools: Pools,
}

impl State {
    /// Registers a member whose state is current at time `now` (with Φ(now) = `phi_now`).
    fn insert(&mut self, key: u64, m: Member) {
        let value = m.weight * (-m.exponent).exp();
        self.pools.sums[m.pool] += value;
        if m.seg + 1 >= m.path.num_segments() {
            return;
        }
        let time = m.birth + m.path.breakpoints()[m.seg + 1];
        let slot = match self.free.pop() {
            Some(s) => {
                self.members[s] = Some(m);
                s
            }
            None => {
                self.members.push(Some(m));
                self.members.len() - 1
            }
        };
        self.heap.push(Event { time, key, slot });
    }
}

/// Walks a path from its birth to `end` under the constant force `y` (birth
/// lies in the current cell). Returns (segment, exponent).
fn advance_fresh(path: &KernelPath, birth: f64, end: f64, y: f64) -> (usize, f64) {
    let age = end - birth;
    let seg = path.segment_index(age);
    (seg, y * path.gamma_integral(0.0, age))
}

pub(super) fn solve(law: &KernelLaw, init: &InitialLaw, cfg: &LimitConfig, steps: usize) -> Result<LimitSolution> {
    let dt = cfg.dt;
    let m = cfg.samples;
    let renewal = Renewal::new(law, init, dt, steps);
    let mut st = State {
        members: Vec::new(),
        free: Vec::new(),
        heap: BinaryHeap::new(),
        pools: Pools::default(),
    };
    let mut zs = init.s_fraction();

    // Initially infected and recovered, one sample set each.
    for (group, frac) in [(0u64, init.i_fraction), (1, init.r_fraction())] {
        if frac == 0.0 {
            continue;
        }
        let mut rng = stream(cfg.seed, Tag::SolverInitial, group, 0);
        for i in 0..m {
            let path = if group == 0 {
                init.sample_infected(law, &mut rng)?
            } else {
                init.sample_recovered(law, &mut rng)
            };
            let pool = st.pools.index(path.gamma_in(0));
            let key = group * m as u64 + i as u64;
            st.insert(
                key,
                Member {
                    path,
                    birth: 0.0,
                    seg: 0,
                    weight: frac / m as f64,
                    exponent: 0.0,
                    phi_at: 0.0,
                    pool,
                },
            );
        }
    }

    let mut grid = TrajectoryGrid::with_steps(dt, steps);
    let mut residual = vec![0.0; steps + 1];
    let mut b = Vec::with_capacity(steps);
    let (f0, ibar0) = renewal.evaluate(0, &b);
    let lhs0 = zs + st.pools.mass();
    grid.f_bar[0] = f0;
    grid.s_bar[0] = zs + st.pools.s_bar();
    grid.i_bar[0] = ibar0;
    grid.u_bar[0] = lhs0 - ibar0;
    residual[0] = (lhs0 - 1.0).abs();

    let mut phi_k = 0.0;
    let mut fresh: Vec<(KernelPath, f64, usize, f64)> = Vec::with_capacity(m);
    for k in 0..steps {
        let y = grid.f_bar[k];
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let phi_next = phi_k + y * dt;
        for (g, s) in st.pools.levels.iter().zip(st.pools.sums.iter_mut()) {
            *s *= (-g * y * dt).exp();
        }
        zs *= (-y * dt).exp();

        // Breakpoints crossed during this cell.
        while st.heap.peek().is_some_and(|e| e.time <= t1) {
            let ev = st.heap.pop().unwrap();
            let mut mem = st.members[ev.slot].take().unwrap();
            st.free.push(ev.slot);
            let g_old = st.pools.levels[mem.pool];
            let phi_e = phi_k + y * (ev.time - t0);
            let exp_e = mem.exponent + g_old * (phi_e - mem.phi_at);
            let remain = t1 - ev.time;
            mem.seg += 1;
            let g_new = mem.path.gamma_in(mem.seg);
            let new_pool = st.pools.index(g_new);
            let base = mem.weight * (-exp_e).exp();
            st.pools.sums[mem.pool] -= base * (-g_old * y * remain).exp();
            // Re-express the member as current at t1 in its new pool.
            mem.exponent = exp_e + g_new * y * remain;
            mem.phi_at = phi_next;
            mem.pool = new_pool;
            st.insert(ev.key, mem);
        }

        // New cohort: incidence by the left-point rule, so the scheme's own
        // conservation error is first order and not masked by sampling noise.
        let mut rng = stream(cfg.seed, Tag::SolverCohort, k as u64, 0);
        fresh.clear();
        for _ in 0..m {
            let path = law.sample(&mut rng);
            let birth = t0 + rng.random::<f64>() * dt;
            let (seg, exponent) = advance_fresh(&path, birth, t1, y);
            fresh.push((path, birth, seg, exponent));
        }
        let bk = y * dt * grid.s_bar[k];
        b.push(bk);
        if bk > 0.0 {
            let w = bk / m as f64;
            for (i, (path, birth, seg, exponent)) in fresh.drain(..).enumerate() {
                let pool = st.pools.index(path.gamma_in(seg));
                let key = (k as u64 + 2) * m as u64 + i as u64;
                st.insert(
                    key,
                    Member {
                        path,
                        birth,
                        seg,
                        weight: w,
                        exponent,
                        phi_at: phi_next,
                        pool,
                    },
                );
            }
        }
        phi_k = phi_next;

        let n = k + 1;
        let (f, ibar) = renewal.evaluate(n, &b);
        let lhs = zs + st.pools.mass();
        grid.f_bar[n] = f;
        grid.s_bar[n] = zs + st.pools.s_bar();
        grid.i_bar[n] = ibar;
        grid.u_bar[n] = lhs - ibar;
        residual[n] = (lhs - 1.0).abs();
        check_residual(n as f64 * dt, residual[n], cfg.residual_ceiling)?;
    }

    // Replace each unfinished member's current γ by its γ*.
    let mut s_star = zs + st.pools.s_bar();
    for mem in st.members.iter().flatten() {
        let g = st.pools.levels[mem.pool];
        let value = mem.weight * (-mem.exponent - g * (phi_k - mem.phi_at)).exp();
        s_star += value * (mem.path.gamma_star() - g);
    }
    grid.conservation_residual = Some(residual);
    Ok(LimitSolution {
        grid,
        path: SolverPath::MonteCarlo,
        s_star_truncated: s_star,
    })
}
