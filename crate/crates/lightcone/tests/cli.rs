use std::path::{Path, PathBuf};
use std::process::Command;

use lightcone_core::dynamics::IntegratorConfig;
use lightcone_core::tangent::jacobian_field;
use lightcone_core::{Lattice, LatticeSpec, PhaseState, Potential, Site};
use tempfile::TempDir;

const BASE: &str = r#"
seed = 11
[lattice]
dim = 1
radius = 24
coupling = 1.0
[integrator]
dt = 0.01
t_end = 2.0
record_stride = 50
[sampler]
beta = 1.0
sweeps = 130
burn_in = 100
thin = 10
good_set_times = [3]
[experiment]
times = [1.0, 2.0]
members = 4
observation_radius = 4
truncation_radii = [6, 8, 10]
converge_time = 1.0
"#;

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
}

fn run_in(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join(format!("{cmd}-{}.toml", extra.join("_").replace(['-', '/'], "")));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{cmd}-{}", extra.join("_").replace(['-', '/'], "")));
    let res = Command::new(env!("CARGO_BIN_EXE_lightcone"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: res.status.code().unwrap(),
        stderr: String::from_utf8_lossy(&res.stderr).into_owned(),
        out,
    }
}

fn run(cmd: &str, config: &str, extra: &[&str]) -> (TempDir, Run) {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), cmd, config, extra);
    (dir, r)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    read(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

/// Every file under `dir`, relative path and contents, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn with(base: &str, from: &str, to: &str) -> String {
    assert!(base.contains(from), "{from}");
    base.replacen(from, to, 1)
}

#[test]
fn simulate_zero_time_writes_one_snapshot() {
    let cfg = with(BASE, "t_end = 2.0", "t_end = 0.0");
    let (_d, r) = run("simulate", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let traj = rows(&r.out.join("trajectory.csv"));
    assert_eq!(traj.len(), 49);
    assert!(traj.iter().all(|row| row[0] == "0"));
    assert_eq!(read(&r.out.join("trajectory.csv")).lines().next().unwrap(), "t,i1,q,p");
    let energy = read(&r.out.join("energy.csv"));
    assert_eq!(energy.lines().count(), 2);
    assert!(energy.starts_with("t,H,drift\n"));
    assert_eq!(
        read(&r.out.join("initial_state.csv")),
        read(&r.out.join("final_state.csv"))
    );
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "simulate", BASE, &[]);
    let b = run_in(dir.path(), "simulate", BASE, &["--jobs", "2"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(snapshot(&a.out), snapshot(&b.out));
    let drift = json(&a.out.join("simulate.json"))["max_relative_drift"]
        .as_f64()
        .unwrap();
    assert!(drift < 1e-3, "{drift}");
}

#[test]
fn simulate_reads_initial_state_and_reports_blow_up() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("x0.csv");
    let mut text = String::from("i1,q,p\n");
    for i in -3..=3 {
        text.push_str(&format!("{i},{},0\n", if i == 0 { 1e5 } else { 0.1 * i as f64 }));
    }
    std::fs::write(&state, &text).unwrap();
    let cfg = with(BASE, "radius = 24", "radius = 3");
    let cfg = with(
        &cfg,
        "converge_time = 1.0",
        &format!("converge_time = 1.0\ninitial_state = {:?}", state),
    );
    let cfg = cfg.replace("observation_radius = 4\ntruncation_radii = [6, 8, 10]\n", "");
    let r = run_in(dir.path(), "simulate", &with(&cfg, "dt = 0.01", "dt = 0.5"), &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("blew up"), "{}", r.stderr);

    let small = text.replace("100000", "0.5");
    std::fs::write(&state, &small).unwrap();
    let r = run_in(dir.path(), "simulate", &cfg, &["--seed", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(read(&r.out.join("initial_state.csv")), small);
}

#[test]
fn schema_errors_exit_two_naming_the_key() {
    let missing = BASE.replace("radius = 24\n", "");
    let (_d, r) = run("simulate", &missing, &[]);
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("lattice") && r.stderr.contains("radius"),
        "{}",
        r.stderr
    );

    let typo = with(BASE, "burn_in = 100", "burnin = 100");
    let (_d, r) = run("sample", &typo, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("sampler.burnin"), "{}", r.stderr);

    let no_section = BASE[..BASE.find("[integrator]").unwrap()].to_string();
    let (_d, r) = run("tangent", &no_section, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("[integrator]"), "{}", r.stderr);

    let (_d, r) = run("simulate", &with(BASE, "coupling = 1.0", "coupling = -1.0"), &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

fn tangent_config(coupling: &str) -> String {
    let cfg = with(BASE, "coupling = 1.0", &format!("coupling = {coupling}"));
    with(&cfg, "record_stride = 50", "record_stride = 40")
}

#[test]
fn tangent_norms_match_library_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let lattice = Lattice::new(LatticeSpec::new(1, 24, 1.0).unwrap()).unwrap();
    let x0 = PhaseState::new(
        (0..49).map(|i| (0.7 * i as f64).sin()).collect(),
        (0..49).map(|i| 0.5 * (1.3 * i as f64).cos()).collect(),
    )
    .unwrap();
    let state = dir.path().join("x0.csv");
    lightcone::io::write_state(&state, &lattice, &x0).unwrap();
    let cfg = with(
        &tangent_config("1.0"),
        "converge_time = 1.0",
        &format!("converge_time = 1.0\ninitial_state = {state:?}"),
    );
    let r = run_in(dir.path(), "tangent", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let icfg = IntegratorConfig::new(0.01, 2.0, 40).unwrap();
    let fields = jacobian_field(&lattice, &Potential::default(), &x0, &Site::origin(1), &icfg).unwrap();
    let table = rows(&r.out.join("jacobian.csv"));
    assert_eq!(table.len(), fields.len() * lattice.len());
    for (row, (f, j)) in table
        .iter()
        .zip(fields.iter().flat_map(|f| (0..lattice.len()).map(move |j| (f, j))))
    {
        assert_eq!(row[0].parse::<f64>().unwrap(), f.t);
        assert_eq!(row[1], lattice.site_of(j).coords()[0].to_string());
        assert_eq!(row[6].parse::<f64>().unwrap().to_bits(), f.norms[j].to_bits());
        let b = f.blocks[j];
        let parsed: Vec<f64> = row[2..6].iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(parsed, vec![b[0][0], b[0][1], b[1][0], b[1][1]]);
    }
    let compact = rows(&r.out.join("jacobian_norms.csv"));
    assert_eq!(compact.len(), table.len());
    for (c, t) in compact.iter().zip(&table) {
        let n: f64 = t[6].parse().unwrap();
        assert_eq!(c[2].parse::<f64>().unwrap().to_bits(), n.log10().to_bits());
    }
}

#[test]
fn tangent_initial_field_is_concentrated_on_the_source() {
    let cfg = with(
        &tangent_config("1.0"),
        "times = [1.0, 2.0]",
        "times = [1.0, 2.0]\nsource = [5]",
    );
    let (_d, r) = run("tangent", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let at_zero: Vec<Vec<String>> = rows(&r.out.join("jacobian.csv"))
        .into_iter()
        .filter(|r| r[0] == "0")
        .collect();
    assert_eq!(at_zero.len(), 49);
    let nonzero: Vec<&Vec<String>> = at_zero.iter().filter(|r| r[6] != "0").collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0][1], "5");
    assert_eq!(nonzero[0][2..7], ["1", "0", "0", "1", "1"]);
}

#[test]
fn decoupled_tangent_stays_on_the_source() {
    let (_d, r) = run("tangent", &tangent_config("0.0"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&r.out.join("jacobian.csv"));
    assert!(table.len() > 49);
    for row in &table {
        if row[1] != "0" {
            assert_eq!(row[6], "0", "{row:?}");
        } else {
            assert_ne!(row[6], "0");
        }
    }
}

#[test]
fn tangent_in_two_dimensions_labels_sites() {
    let cfg = with(&tangent_config("1.0"), "dim = 1\nradius = 24", "dim = 2\nradius = 3");
    let cfg = with(&cfg, "times = [1.0, 2.0]", "times = [1.0, 2.0]\nsource = [1, -2]");
    let (_d, r) = run("tangent", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&r.out.join("jacobian.csv"));
    assert_eq!(table[0][1], "-3:-3");
    let src: Vec<&Vec<String>> = table.iter().filter(|r| r[0] == "0" && r[6] != "0").collect();
    assert_eq!(src.len(), 1);
    assert_eq!(src[0][1], "1:-2");

    let bad = with(&cfg, "source = [1, -2]", "source = [1]");
    let (_d, r) = run("tangent", &bad, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("experiment.source"), "{}", r.stderr);
}

#[test]
fn sample_writes_ensemble_manifest_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "sample", BASE, &["--jobs", "1"]);
    let b = run_in(dir.path(), "sample", BASE, &["--jobs", "4"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(snapshot(&a.out), snapshot(&b.out));
    let manifest = json(&a.out.join("ensemble/manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["samples"], 3);
    assert_eq!(manifest["acceptance"].as_array().unwrap().len(), 130);
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        read(&a.out.join("config.sha256")).trim()
    );
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        let name = f["file"].as_str().unwrap();
        let path = a.out.join("ensemble").join(name);
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            lightcone::io::sha256_file(&path).unwrap()
        );
    }
    assert!(read(&a.out.join("tail.csv")).starts_with("N,P_tail\n"));
    let stab = read(&a.out.join("superstability.csv"));
    assert!(stab.starts_with("nu,k,C_hat\n"));
    assert!(read(&a.out.join("goodset.csv")).starts_with("k,threshold,failures,blowups,evaluated,failure_fraction\n3,"));

    let c = run_in(dir.path(), "sample", BASE, &["--seed", "12"]);
    assert_ne!(
        read(&a.out.join("ensemble/manifest.json")),
        read(&c.out.join("ensemble/manifest.json"))
    );
}

#[test]
fn sample_without_kept_samples_writes_empty_manifest() {
    let cfg = with(BASE, "thin = 10", "thin = 50");
    let (_d, r) = run("sample", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let manifest = json(&r.out.join("ensemble/manifest.json"));
    assert_eq!(manifest["samples"], 0);
    assert!(manifest["files"].as_array().unwrap().is_empty());
    assert!(!r.out.join("tail.csv").exists());
}

#[test]
fn sample_lambda_overflow_exits_three_with_suggestion() {
    let cfg = with(BASE, "good_set_times = [3]", "good_set_times = [3]\nlambda = 1e6");
    let (_d, r) = run("sample", &cfg, &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("try lambda <="), "{}", r.stderr);
}

#[test]
fn front_outputs_and_job_independence() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "front", BASE, &["--jobs", "1"]);
    let b = run_in(dir.path(), "front", BASE, &["--jobs", "3"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(snapshot(&a.out), snapshot(&b.out));
    let front = read(&a.out.join("front.csv"));
    assert!(front.starts_with("seed,member,t,epsilon,r_front,cone_radius,max_outside,weighted_outside,valid\n"));
    assert_eq!(front.lines().count(), 1 + 4 * 2);
    let summary = json(&a.out.join("summary.json"));
    assert_eq!(
        summary["config_hash"].as_str().unwrap(),
        read(&a.out.join("config.sha256")).trim()
    );
    assert_eq!(summary["per_time"].as_array().unwrap().len(), 2);
    assert_eq!(summary["c1"].as_array().unwrap().len(), 4);
    assert_eq!(summary["failed_members"], 0);
}

#[test]
fn front_from_zero_data_is_the_harmonic_spread() {
    let cfg = with(BASE, "times = [1.0, 2.0]", "times = [1.0, 2.0]\ninitial = \"zero\"");
    let (_d, r) = run("front", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&r.out.join("front.csv"));
    let by_member =
        |m: &str| -> Vec<Vec<String>> { table.iter().filter(|r| r[1] == m).map(|r| r[2..].to_vec()).collect() };
    for m in ["1", "2", "3"] {
        assert_eq!(by_member("0"), by_member(m));
    }
    // fronts of the linear chain: the exact tangent flow from zero data
    let lattice = Lattice::new(LatticeSpec::new(1, 24, 1.0).unwrap()).unwrap();
    for (row, t) in by_member("0").iter().zip([1.0, 2.0]) {
        let icfg = IntegratorConfig::recording_every(0.01, t, t).unwrap();
        let f = jacobian_field(
            &lattice,
            &Potential::default(),
            &PhaseState::zeros(49),
            &Site::origin(1),
            &icfg,
        )
        .unwrap()
        .pop()
        .unwrap();
        let expected = lightcone_core::lightcone::front_radius(&lattice, &f, 1e-6);
        assert_eq!(row[2], expected.to_string());
    }
}

#[test]
fn front_rejects_bad_exponents() {
    let (_d, r) = run(
        "front",
        &with(BASE, "times = [1.0, 2.0]", "times = [1.0, 2.0]\nalpha = 0.5"),
        &[],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("alpha"), "{}", r.stderr);
    let (_d, r) = run(
        "front",
        &with(BASE, "good_set_times = [3]", "good_set_times = [3]\ndelta = 2.0"),
        &[],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("delta"), "{}", r.stderr);
    let (_d, r) = run(
        "front",
        &with(BASE, "good_set_times = [3]", "good_set_times = [3]\ndelta = 1.0"),
        &[],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn front_warns_when_the_cone_leaves_the_box() {
    let cfg = with(BASE, "radius = 24", "radius = 4");
    let cfg = with(&cfg, "t_end = 2.0", "t_end = 6.0");
    let cfg = with(&cfg, "times = [1.0, 2.0]", "times = [1.0, 6.0]");
    let (_d, r) = run("front", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("box boundary"), "{}", r.stderr);
    let table = rows(&r.out.join("front.csv"));
    assert!(table.iter().any(|row| row[8] == "false"));
}

#[test]
fn converge_report_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), "converge", BASE, &["--jobs", "1"]);
    let b = run_in(dir.path(), "converge", BASE, &["--jobs", "4"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(snapshot(&a.out), snapshot(&b.out));
    let table = rows(&a.out.join("converge.csv"));
    assert_eq!(table.len(), 4 * 3);
    assert!(read(&a.out.join("converge.csv")).starts_with("member,n,u_k,displacement,phi\n"));
    let summary = json(&a.out.join("converge_summary.json"));
    for m in summary["members"].as_array().unwrap() {
        assert!(m["log_slope"].as_f64().unwrap() < 0.0);
    }

    let below_k = with(BASE, "truncation_radii = [6, 8, 10]", "truncation_radii = [3, 8]");
    let r = run_in(dir.path(), "converge", &below_k, &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("truncation_radii"));
}

#[test]
fn decoupled_converge_rows_are_zero() {
    let (_d, r) = run("converge", &with(BASE, "coupling = 1.0", "coupling = 0.0"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = rows(&r.out.join("converge.csv"));
    assert!(!table.is_empty());
    assert!(table.iter().all(|row| row[2] == "0"));
    let summary = json(&r.out.join("converge_summary.json"));
    assert!(summary["members"][0]["log_slope"].is_null());
}

#[test]
fn seed_override_reaches_the_echo() {
    let (_d, r) = run("front", BASE, &["--seed", "99"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let echo = read(&r.out.join("config.toml"));
    assert!(echo.contains("seed = 99"), "{echo}");
    assert!(rows(&r.out.join("front.csv")).iter().all(|row| row[0] == "99"));
}
