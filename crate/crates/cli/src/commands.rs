use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use reinfect::abm::{simulate as run_abm, RunConfig};
use reinfect::equilibrium::{
    disease_free_limit_s, instability_check, solve_endemic, DiseaseFreeLimit, EquilibriumReport, InstabilityCheck,
    Regime,
};
use reinfect::harness::{converge as run_converge, replication_seed};
use reinfect::kernel::LawStatistics;
use reinfect::lln::{auxiliary_check, solve_limit, SolverPath};
use reinfect::pde::{crosscheck_with, solve_pde, Crosscheck, PdeScenario};
use reinfect::scenario::Scenario;
use reinfect::{Error, Result};

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub out: &'a Path,
    pub seed_offset: u64,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.scenario.seed.wrapping_add(self.seed_offset)
    }

    fn pde_section(&self) -> Result<&PdeScenario> {
        self.scenario.pde.as_ref().ok_or_else(|| Error::Config {
            field: "pde".into(),
            message: "this command needs a [pde] section".into(),
        })
    }

    fn write_with(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
        let path = self.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

pub fn simulate(ctx: &Context, only: Option<usize>) -> Result<Vec<PathBuf>> {
    let scn = ctx.scenario;
    let sizes = match only {
        Some(n) => vec![n],
        None => scn.populations.clone(),
    };
    if sizes.is_empty() {
        return Err(Error::Config {
            field: "populations".into(),
            message: "no population size given".into(),
        });
    }
    let cfg = RunConfig {
        horizon: scn.horizon,
        dt: scn.sample_dt(),
        event_limit: scn.event_limit,
    };
    let mut files = Vec::new();
    for n in sizes {
        let (grid, log) = run_abm(n, &scn.kernel, &scn.initial, replication_seed(ctx.seed(), n, 0), &cfg)?;
        files.push(ctx.write_with(&format!("simulate_N{n}.csv"), |w| grid.write_csv(w))?);
        if scn.event_limit > 0 {
            files.push(ctx.write_with(&format!("events_N{n}.csv"), |w| log.write_csv(w))?);
        }
    }
    Ok(files)
}

#[derive(Serialize)]
struct LimitSummary {
    path: SolverPath,
    horizon: f64,
    dt: f64,
    #[serde(rename = "F_bar_T")]
    f_bar_end: f64,
    #[serde(rename = "S_bar_T")]
    s_bar_end: f64,
    #[serde(rename = "I_bar_T")]
    i_bar_end: f64,
    max_conservation_residual: Option<f64>,
    regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    instability: Option<InstabilityCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    disease_free: Option<DiseaseFreeLimit>,
}

pub fn limit(ctx: &Context) -> Result<Vec<PathBuf>> {
    let scn = ctx.scenario;
    let sol = solve_limit(&scn.kernel, &scn.initial, &scn.limit_config(ctx.seed_offset))?;
    let g = &sol.grid;
    let last = g.last();
    let report = solve_endemic(&scn.kernel)?;
    let mut files = vec![ctx.write_with("limit.csv", |w| g.write_csv(w))?];
    let summary = LimitSummary {
        path: sol.path,
        horizon: scn.horizon,
        dt: scn.dt,
        f_bar_end: g.f_bar[last],
        s_bar_end: g.s_bar[last],
        i_bar_end: g.i_bar[last],
        max_conservation_residual: g.max_residual(),
        regime: report.regime,
        instability: (report.regime == Regime::Endemic)
            .then(|| instability_check(g, &report, scn.tolerances.instability_floor)),
        disease_free: match report.regime {
            Regime::DiseaseFree => disease_free_limit_s(&sol, scn.tolerances.extinction).ok(),
            _ => None,
        },
    };
    files.push(ctx.write_json("limit.json", &summary)?);
    if scn.auxiliary.is_some() {
        let aux = auxiliary_check(g, &scn.kernel, &scn.initial, &scn.auxiliary_config(ctx.seed_offset))?;
        files.push(ctx.write_json("auxiliary.json", &aux)?);
    }
    Ok(files)
}

#[derive(Serialize)]
struct EquilibriumOutput {
    #[serde(flatten)]
    report: EquilibriumReport,
    #[serde(rename = "closed_form_F_star")]
    closed_form_f_star: Option<f64>,
    statistics: LawStatistics,
}

pub fn equilibrium(ctx: &Context) -> Result<Vec<PathBuf>> {
    let law = &ctx.scenario.kernel;
    let report = solve_endemic(law)?;
    let out = EquilibriumOutput {
        closed_form_f_star: report.closed_form_f_star,
        report,
        statistics: law.statistics(),
    };
    Ok(vec![ctx.write_json("equilibrium.json", &out)?])
}

#[derive(Serialize)]
struct PdeSummary {
    max_mass_residual: f64,
    boundary_gap: f64,
    truncated_mass: f64,
}

pub fn pde(ctx: &Context) -> Result<Vec<PathBuf>> {
    let scn = ctx.scenario;
    let sol = solve_pde(ctx.pde_section()?, scn.horizon, scn.dt)?;
    let mut files = vec![ctx.write_with("pde.csv", |w| sol.write_csv(w))?];
    if !sol.snapshots.is_empty() {
        files.push(ctx.write_with("pde_snapshots.csv", |w| sol.write_snapshots(w))?);
    }
    let summary = PdeSummary {
        max_mass_residual: sol.max_mass_residual(),
        boundary_gap: sol.boundary_gap,
        truncated_mass: sol.truncated_mass,
    };
    files.push(ctx.write_json("pde.json", &summary)?);
    Ok(files)
}

pub fn converge(ctx: &Context) -> Result<Vec<PathBuf>> {
    let report = run_converge(ctx.scenario, ctx.seed_offset)?;
    Ok(vec![ctx.write_json("converge.json", &report)?])
}

#[derive(Serialize)]
struct CrosscheckOutput {
    horizon: f64,
    dt: f64,
    #[serde(flatten)]
    gaps: Crosscheck,
}

pub fn crosscheck(ctx: &Context) -> Result<Vec<PathBuf>> {
    let scn = ctx.scenario;
    let gaps = crosscheck_with(ctx.pde_section()?, &scn.limit_config(ctx.seed_offset))?;
    let out = CrosscheckOutput {
        horizon: scn.horizon,
        dt: scn.dt,
        gaps,
    };
    Ok(vec![ctx.write_json("crosscheck.json", &out)?])
}
