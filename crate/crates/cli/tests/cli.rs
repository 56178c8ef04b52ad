mod common;

use common::{fixture, read_csv, read_json, reinfect, run_ok};
use tempfile::TempDir;

fn write_scenario(dir: &TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn limit_on_markov_sis_reaches_one_half() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().display().to_string();
    run_ok(&["limit", "--scenario", fixture("markov_sis.toml").to_str().unwrap(), "--out", &out]);
    let (header, rows) = read_csv(&dir.path().join("limit.csv"));
    assert_eq!(header, ["t", "F_bar", "S_bar", "I_bar", "U_bar", "conservation_residual"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 40.0);
    assert!((last[3] - 0.5).abs() < 1e-3);
    let summary = read_json(&dir.path().join("limit.json"));
    assert_eq!(summary["regime"], "Endemic");
    assert_eq!(summary["instability"]["above_floor"], true);
    let aux = read_json(&dir.path().join("auxiliary.json"));
    assert!(aux["coverage"].as_f64().unwrap() >= 0.93);
}

#[test]
fn equilibrium_on_indicator_gamma_is_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().display().to_string();
    run_ok(&["equilibrium", "--scenario", fixture("indicator_gamma.toml").to_str().unwrap(), "--out", &out]);
    let eq = read_json(&dir.path().join("equilibrium.json"));
    assert!((eq["F_star"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((eq["closed_form_F_star"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(eq["regime"], "Endemic");
    // E[ζ] derived from the declared η and delay laws.
    assert!((eq["statistics"]["E_zeta"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn lone_susceptible_sees_no_infection() {
    let dir = TempDir::new().unwrap();
    let scn = write_scenario(
        &dir,
        "quiet.toml",
        "name = \"quiet\"\nhorizon = 5.0\ndt = 0.5\nseed = 1\npopulations = [1]\n\
         [kernel]\nfamily = \"markov_sis\"\nlambda = 2.0\nbeta = 1.0\n[initial]\ni_fraction = 0.0\n",
    );
    let out = dir.path().join("out").display().to_string();
    run_ok(&["simulate", "--scenario", &scn, "--out", &out]);
    let (_, rows) = read_csv(&dir.path().join("out/simulate_N1.csv"));
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[1] == 0.0 && r[4] == 1.0));
    let events = std::fs::read_to_string(dir.path().join("out/events_N1.csv")).unwrap();
    assert_eq!(events, "t,individual,infection_count\n");
}

#[test]
fn invalid_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let scn = write_scenario(
        &dir,
        "bad.toml",
        "name = \"bad\"\nhorizon = 5.0\ndt = 0.5\nseed = 1\n\
         [kernel]\nfamily = \"indicator_gamma\"\nlambda = 2.0\n\
         eta = { dist = \"exponential\", rate = 1.0 }\ndelay = { dist = \"fixed\", value = 1.0 }\n\
         gamma_star = 1.5\n[initial]\ni_fraction = 0.1\n",
    );
    let out = reinfect(&["limit", "--scenario", &scn, "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kernel.gamma_star"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let scn = write_scenario(
        &dir,
        "typo.toml",
        "name = \"typo\"\nhorizon = 5.0\ndt = 0.5\nseed = 1\nreplicatons = 3\n\
         [kernel]\nfamily = \"markov_sis\"\nlambda = 2.0\nbeta = 1.0\n[initial]\ni_fraction = 0.1\n",
    );
    let out = reinfect(&["limit", "--scenario", &scn]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicatons"));
}

#[test]
fn pde_commands_need_a_pde_section() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().display().to_string();
    let res = reinfect(&["pde", "--scenario", fixture("markov_sis.toml").to_str().unwrap(), "--out", &out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("pde"));
}

#[test]
fn pde_writes_series_and_snapshots() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().display().to_string();
    run_ok(&["pde", "--scenario", fixture("pde_markov_sirs.toml").to_str().unwrap(), "--out", &out]);
    let (header, rows) = read_csv(&dir.path().join("pde.csv"));
    assert_eq!(header, ["t", "S_bar", "I_total", "R_total", "S_frak", "F_frak", "mass_residual"]);
    assert!(rows.iter().all(|r| r[6] <= 1e-3));
    let (header, snaps) = read_csv(&dir.path().join("pde_snapshots.csv"));
    assert_eq!(header, ["t", "age", "I_density", "R_density"]);
    let times: std::collections::BTreeSet<u64> = snaps.iter().map(|r| r[0].to_bits()).collect();
    assert_eq!(times.len(), 3);
}

#[test]
fn converge_without_infection_is_an_exact_match() {
    let dir = TempDir::new().unwrap();
    let scn = write_scenario(
        &dir,
        "none.toml",
        "name = \"none\"\nhorizon = 2.0\ndt = 0.1\nseed = 1\npopulations = [10, 100, 1000]\nreplications = 10\n\
         [kernel]\nfamily = \"markov_sis\"\nlambda = 2.0\nbeta = 1.0\n[initial]\ni_fraction = 0.0\n",
    );
    let out = dir.path().join("out").display().to_string();
    run_ok(&["converge", "--scenario", &scn, "--out", &out]);
    let rep = read_json(&dir.path().join("out/converge.json"));
    assert_eq!(rep["N"], serde_json::json!([10, 100, 1000]));
    assert!(rep["slope"].is_null());
    assert_eq!(rep["pass"], true);
    assert!(rep["mean_error_F"].as_array().unwrap().iter().all(|v| v == 0.0));
}

#[test]
fn converge_refuses_too_few_replications() {
    let dir = TempDir::new().unwrap();
    let scn = write_scenario(
        &dir,
        "few.toml",
        "name = \"few\"\nhorizon = 2.0\ndt = 0.1\nseed = 1\npopulations = [10, 100, 1000]\nreplications = 3\n\
         [kernel]\nfamily = \"markov_sis\"\nlambda = 2.0\nbeta = 1.0\n[initial]\ni_fraction = 0.2\n",
    );
    let res = reinfect(&["converge", "--scenario", &scn, "--out", dir.path().to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("replications"));
}

#[test]
fn seed_offset_changes_simulations() {
    let dir = TempDir::new().unwrap();
    let scn = fixture("markov_sis.toml");
    let scn = scn.to_str().unwrap();
    let a = dir.path().join("a").display().to_string();
    let b = dir.path().join("b").display().to_string();
    run_ok(&["simulate", "--scenario", scn, "--out", &a, "--population", "100"]);
    run_ok(&["simulate", "--scenario", scn, "--out", &b, "--population", "100", "--seed-offset", "1"]);
    let read = |d: &str| std::fs::read(format!("{d}/events_N100.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}
