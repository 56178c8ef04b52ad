//! Exact event-driven simulation of the N-individual model.
//!
//! Infection candidates arrive at rate N·λ*; each picks an individual
//! uniformly and is accepted with probability γ_k(age)·F̄ᴺ/λ*. Kernel
//! breakpoints are kept in a priority queue so the aggregates F̄ᴺ and S̄ᴺ stay
//! current between candidates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;

use crate::error::{config_err, Error, Result};
use crate::grid::{step_count, TrajectoryGrid};
use crate::kernel::{InitialLaw, KernelLaw, KernelPath};
use crate::rng::{exp1, stream, Stream, Tag};

/// Rebuild the aggregates from scratch after this many events at most.
const REBUILD_EVENTS: u64 = 1_000_000;

#[derive(Clone, Debug)]
struct Individual {
    path: KernelPath,
    last_infection: f64,
    count: u32,
    seg: usize,
    generation: u32,
}

impl Individual {
    fn lambda(&self) -> f64 {
        self.path.lambda_in(self.seg)
    }

    fn gamma(&self) -> f64 {
        self.path.gamma_in(self.seg)
    }

    fn next_breakpoint(&self) -> Option<f64> {
        self.path
            .breakpoints()
            .get(self.seg + 1)
            .map(|b| self.last_infection + b)
    }

    fn infectious_at(&self, t: f64) -> bool {
        t - self.last_infection < self.path.eta()
    }
}

#[derive(PartialEq)]
struct Breakpoint {
    time: f64,
    who: usize,
    generation: u32,
}

impl Eq for Breakpoint {}

impl Ord for Breakpoint {
    // Reversed for a min-heap on (time, individual).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.who.cmp(&self.who))
    }
}

impl PartialOrd for Breakpoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One accepted infection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfectionEvent {
    pub time: f64,
    pub individual: usize,
    pub infection_count: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<InfectionEvent>,
    pub infections: u64,
    pub candidates: u64,
    /// Set when recording stopped at the size limit.
    pub truncated: bool,
}

impl EventLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,individual,infection_count")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.time, e.individual, e.infection_count)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Stop recording events beyond this many (`0` disables the log).
    pub event_limit: usize,
}

pub struct Population<'a> {
    law: &'a KernelLaw,
    seed: u64,
    lambda_star: f64,
    people: Vec<Individual>,
    f_sum: f64,
    s_sum: f64,
    infectious: usize,
    clock: f64,
    queue: BinaryHeap<Breakpoint>,
    candidates: Stream,
    since_rebuild: u64,
}

impl<'a> Population<'a> {
    /// Draws every individual's starting kernel independently.
    pub fn new(n: usize, law: &'a KernelLaw, init: &InitialLaw, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(config_err("abm.n", "population size must be at least 1"));
        }
        law.validate("kernel")?;
        init.validate(law, "initial")?;
        let mut people = Vec::with_capacity(n);
        for k in 0..n {
            let mut rng = stream(seed, Tag::InitialPath, k as u64, 0);
            people.push(Individual {
                path: init.sample(law, &mut rng)?,
                last_infection: 0.0,
                count: 0,
                seg: 0,
                generation: 0,
            });
        }
        let mut pop = Population {
            law,
            seed,
            lambda_star: law.lambda_star(),
            people,
            f_sum: 0.0,
            s_sum: 0.0,
            infectious: 0,
            clock: 0.0,
            queue: BinaryHeap::new(),
            candidates: stream(seed, Tag::Candidates, 0, 0),
            since_rebuild: 0,
        };
        for k in 0..n {
            pop.schedule(k);
        }
        pop.infectious = pop.people.iter().filter(|p| p.infectious_at(0.0)).count();
        (pop.f_sum, pop.s_sum) = pop.recompute();
        Ok(pop)
    }

    pub fn n(&self) -> usize {
        self.people.len()
    }

    /// Σ_k λ_k(age_k) as maintained incrementally.
    pub fn aggregate_f(&self) -> f64 {
        self.f_sum
    }

    pub fn aggregate_s(&self) -> f64 {
        self.s_sum
    }

    pub fn infectious(&self) -> usize {
        self.infectious
    }

    pub fn infection_counts(&self) -> impl Iterator<Item = u32> + '_ {
        self.people.iter().map(|p| p.count)
    }

    fn schedule(&mut self, k: usize) {
        let p = &self.people[k];
        if let Some(time) = p.next_breakpoint() {
            self.queue.push(Breakpoint {
                time,
                who: k,
                generation: p.generation,
            });
        }
    }

    /// Full O(N) recomputation of (Σλ, Σγ).
    pub fn recompute(&self) -> (f64, f64) {
        self.people
            .iter()
            .fold((0.0, 0.0), |(f, s), p| (f + p.lambda(), s + p.gamma()))
    }

    fn rebuild(&mut self) {
        let (f, s) = self.recompute();
        debug_assert!(
            (f - self.f_sum).abs() <= 1e-9 * self.n() as f64 * self.lambda_star + 1e-12,
            "aggregate drift {} vs {}",
            self.f_sum,
            f
        );
        self.f_sum = f;
        self.s_sum = s;
        self.since_rebuild = 0;
    }

    fn apply_breakpoint(&mut self, bp: Breakpoint) {
        let p = &mut self.people[bp.who];
        if p.generation != bp.generation {
            return;
        }
        let ends_infection = p.path.breakpoints()[p.seg + 1] == p.path.eta();
        self.f_sum -= p.lambda();
        self.s_sum -= p.gamma();
        p.seg += 1;
        self.f_sum += p.lambda();
        self.s_sum += p.gamma();
        if ends_infection {
            self.infectious -= 1;
        }
        self.since_rebuild += 1;
        self.schedule(bp.who);
    }

    fn candidate(&mut self, time: f64, log: &mut EventLog, limit: usize) -> Result<()> {
        log.candidates += 1;
        let n = self.n();
        let k = self.candidates.random_range(0..n);
        let u: f64 = self.candidates.random();
        let p = &self.people[k];
        let prob = p.gamma() * (self.f_sum / n as f64) / self.lambda_star;
        if prob > 1.0 + 1e-9 {
            return Err(Error::Invariant(format!(
                "acceptance probability {prob} > 1 at t = {time}: λ* bound breached"
            )));
        }
        if u >= prob {
            return Ok(());
        }
        if p.infectious_at(time) {
            return Err(Error::Invariant(format!(
                "individual {k} accepted an infection while infectious at t = {time}"
            )));
        }
        self.f_sum -= p.lambda();
        self.s_sum -= p.gamma();
        let count = p.count + 1;
        let mut rng = stream(self.seed, Tag::InfectionPath, k as u64, u64::from(count));
        let path = self.law.sample(&mut rng);
        let p = &mut self.people[k];
        p.path = path;
        p.count = count;
        p.last_infection = time;
        p.seg = 0;
        p.generation += 1;
        self.f_sum += p.lambda();
        self.s_sum += p.gamma();
        if p.path.eta() > 0.0 {
            self.infectious += 1;
        }
        self.schedule(k);
        self.since_rebuild += 1;
        log.infections += 1;
        if log.events.len() < limit {
            log.events.push(InfectionEvent {
                time,
                individual: k,
                infection_count: count,
            });
        } else if limit > 0 {
            log.truncated = true;
        }
        Ok(())
    }

    fn record(&self, grid: &mut TrajectoryGrid, k: usize) {
        let n = self.n() as f64;
        grid.f_bar[k] = self.f_sum / n;
        grid.s_bar[k] = self.s_sum / n;
        grid.i_bar[k] = self.infectious as f64 / n;
        grid.u_bar[k] = (self.n() - self.infectious) as f64 / n;
    }

    /// Simulates up to the horizon, sampling aggregates at grid times as
    /// left limits (events at exactly a grid time come after the sample).
    pub fn run(&mut self, cfg: &RunConfig) -> Result<(TrajectoryGrid, EventLog)> {
        let steps = step_count(cfg.horizon, cfg.dt)?;
        let mut grid = TrajectoryGrid::with_steps(cfg.dt, steps);
        let mut log = EventLog::default();
        let rate = self.n() as f64 * self.lambda_star;
        let mut next_candidate = self.clock + exp1(&mut self.candidates) / rate;
        for k in 0..=steps {
            let t = self.clock.max(k as f64 * cfg.dt);
            loop {
                let next_bp = self.queue.peek().map_or(f64::INFINITY, |b| b.time);
                if next_bp.min(next_candidate) >= t {
                    break;
                }
                if next_bp <= next_candidate {
                    let bp = self.queue.pop().unwrap();
                    self.apply_breakpoint(bp);
                } else {
                    self.candidate(next_candidate, &mut log, cfg.event_limit)?;
                    next_candidate += exp1(&mut self.candidates) / rate;
                }
                if self.since_rebuild >= REBUILD_EVENTS {
                    self.rebuild();
                }
            }
            if self.since_rebuild >= (self.n() as u64).min(REBUILD_EVENTS) {
                self.rebuild();
            }
            self.record(&mut grid, k);
        }
        self.clock = cfg.horizon;
        Ok((grid, log))
    }
}

/// Convenience wrapper: build a population and run it.
pub fn simulate(
    n: usize,
    law: &KernelLaw,
    init: &InitialLaw,
    seed: u64,
    cfg: &RunConfig,
) -> Result<(TrajectoryGrid, EventLog)> {
    Population::new(n, law, init, seed)?.run(cfg)
}
