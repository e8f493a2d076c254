//! Subcommands. Each writes its tables into the output directory together
//! with `config.toml` (the effective configuration) and `config.sha256`.

use std::path::{Path, PathBuf};

use lightcone_core::diagnostics::{linear_grid, q_tail_diagnostic, q_values, superstability_diagnostic};
use lightcone_core::dynamics::{evolve, IntegratorConfig};
use lightcone_core::gibbs::{independent_sample, sample_ensemble, Ensemble};
use lightcone_core::lightcone::{C1Outcome, ExperimentConfig, ExperimentResult};
use lightcone_core::tangent::jacobian_field;
use lightcone_core::{Lattice, PhaseState};
use log::{info, warn};
use serde_json::{json, Value};

use crate::config::{InitialKind, RunConfig};
use crate::error::CliError;
use crate::io::{self, num};
use crate::run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Tangent,
    Sample,
    Front,
    Converge,
}

/// A fully resolved run: configuration with overrides applied, output
/// directory and thread count.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: RunConfig,
    pub out: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Invocation {
    /// `out` overrides the config's directory; `seed` overrides its seed.
    pub fn new(mut config: RunConfig, out: Option<PathBuf>, seed: Option<u64>, jobs: Option<usize>) -> Self {
        if let Some(s) = seed {
            config.seed = s;
        }
        let out = out
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Invocation { config, out, jobs }
    }
}

pub fn execute(cmd: Command, inv: &Invocation) -> Result<(), CliError> {
    io::create_dir(&inv.out)?;
    io::write_text(&inv.out.join("config.toml"), &inv.config.echo())?;
    io::write_text(&inv.out.join("config.sha256"), &format!("{}\n", inv.config.hash()))?;
    run::with_jobs(inv.jobs, || match cmd {
        Command::Simulate => simulate(&inv.config, &inv.out),
        Command::Tangent => tangent(&inv.config, &inv.out),
        Command::Sample => sample(&inv.config, &inv.out),
        Command::Front => front(&inv.config, &inv.out),
        Command::Converge => converge(&inv.config, &inv.out),
    })
}

fn lattice(cfg: &RunConfig) -> Result<Lattice, CliError> {
    Ok(Lattice::new(cfg.lattice_spec()?)?)
}

fn integrator(cfg: &RunConfig) -> Result<IntegratorConfig, CliError> {
    let s = cfg.integrator()?;
    IntegratorConfig::new(s.dt, s.t_end, s.record_stride).map_err(|e| CliError::Config(format!("integrator: {e}")))
}

fn initial_kind(cfg: &RunConfig) -> InitialKind {
    cfg.experiment.as_ref().map_or(InitialKind::Gibbs, |e| e.initial)
}

/// Initial data of job `index`: the configured state file, zeros, or an
/// independent Gibbs sample on stream `index`.
fn initial_state(cfg: &RunConfig, lattice: &Lattice, index: usize) -> Result<PhaseState, CliError> {
    if let Some(path) = cfg.experiment.as_ref().and_then(|e| e.initial_state.as_ref()) {
        return io::read_state(path, lattice);
    }
    match initial_kind(cfg) {
        InitialKind::Zero => Ok(PhaseState::zeros(lattice.len())),
        InitialKind::Gibbs => Ok(independent_sample(
            lattice,
            &cfg.potential()?,
            &cfg.sampler()?,
            index as u64,
        )?),
    }
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let lattice = lattice(cfg)?;
    let pot = cfg.potential()?;
    let icfg = integrator(cfg)?;
    let x0 = initial_state(cfg, &lattice, 0)?;
    info!("simulate: {} sites, {} steps", lattice.len(), icfg.steps());
    let traj = evolve(&lattice, &pot, &x0, &icfg)?;
    let energy = traj.energy_series(&lattice, &pot);
    io::write_state(&out.join("initial_state.csv"), &lattice, &x0)?;
    io::write_state(&out.join("final_state.csv"), &lattice, traj.last())?;
    io::write_trajectory(&out.join("trajectory.csv"), &lattice, &traj)?;
    io::write_energy(&out.join("energy.csv"), &energy)?;
    let drift = energy.iter().map(|e| e.2).fold(0.0, f64::max);
    io::write_json(
        &out.join("simulate.json"),
        &json!({
            "config_hash": cfg.hash(),
            "steps": icfg.steps(),
            "snapshots": traj.len(),
            "initial_energy": num(energy[0].1),
            "max_relative_drift": num(drift),
        }),
    )?;
    info!("simulate: max relative energy drift {drift:.3e}");
    Ok(())
}

fn tangent(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let lattice = lattice(cfg)?;
    let pot = cfg.potential()?;
    let icfg = integrator(cfg)?;
    let source = cfg.source()?;
    lattice
        .index_of(&source)
        .map_err(|e| CliError::Config(format!("experiment.source: {e}")))?;
    let x0 = initial_state(cfg, &lattice, 0)?;
    info!("tangent: source {source}, {} steps", icfg.steps());
    let fields = jacobian_field(&lattice, &pot, &x0, &source, &icfg)?;
    io::write_jacobian(&out.join("jacobian.csv"), &lattice, &fields)?;
    io::write_jacobian_norms(&out.join("jacobian_norms.csv"), &lattice, &fields)?;
    Ok(())
}

fn sample(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let lattice = lattice(cfg)?;
    let pot = cfg.potential()?;
    let scfg = cfg.sampler()?;
    let section = cfg.sampler_section()?;
    info!("sample: {} sweeps, keeping {}", scfg.sweeps, scfg.kept());
    let ens = sample_ensemble(&lattice, &pot, &scfg)?;
    info!("sample: mean acceptance {:.3}", ens.mean_acceptance());

    let mut diagnostics = json!(null);
    if !ens.samples.is_empty() {
        let cubes = lattice.admissible_cubes();
        if cubes.is_empty() {
            return Err(CliError::Config(format!(
                "lattice.radius = {} admits no cube for the superstability estimate",
                lattice.radius()
            )));
        }
        let stab = superstability_diagnostic(
            &lattice,
            &pot,
            &ens.samples,
            section.lambda,
            &cubes,
            section.jackknife_blocks,
        )?;
        let qs = q_values(&lattice, &pot, &ens.samples)?;
        let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = q_tail_diagnostic(&qs, &linear_grid(lo, hi, section.tail_points));
        let good = if section.good_set_times.is_empty() {
            Vec::new()
        } else {
            let dt = cfg.integrator()?.dt;
            run::good_set(&lattice, &pot, &ens.samples, section.delta, &section.good_set_times, dt)?
        };
        io::write_superstability(&out.join("superstability.csv"), &stab)?;
        io::write_tail(&out.join("tail.csv"), &tail)?;
        if !good.is_empty() {
            io::write_goodset(&out.join("goodset.csv"), &good)?;
        }
        diagnostics = json!({
            "superstability": {
                "lambda": num(stab.lambda),
                "cubes": stab.estimates.len(),
                "c_omega": num(stab.c_omega),
                "slope": num(stab.slope),
                "slope_se": num(stab.slope_se),
            },
            "q_tail": { "slope": tail.slope.map_or(Value::Null, num) },
            "good_set": good.iter().map(|r| json!({
                "k": r.k,
                "threshold": num(r.threshold),
                "failures": r.failures,
                "blowups": r.blowups,
                "evaluated": r.evaluated,
            })).collect::<Vec<_>>(),
        });
    }
    write_ensemble(cfg, &lattice, &ens, out)?;
    io::write_json(
        &out.join("sample_summary.json"),
        &json!({
            "config_hash": cfg.hash(),
            "samples": ens.samples.len(),
            "mean_acceptance": num(ens.mean_acceptance()),
            "diagnostics": diagnostics,
        }),
    )
}

/// `ensemble/sample_NNNNN.csv` plus `ensemble/manifest.json`.
fn write_ensemble(cfg: &RunConfig, lattice: &Lattice, ens: &Ensemble, out: &Path) -> Result<(), CliError> {
    let dir = out.join("ensemble");
    io::create_dir(&dir)?;
    let mut files = Vec::with_capacity(ens.samples.len());
    for (i, s) in ens.samples.iter().enumerate() {
        let name = format!("sample_{i:05}.csv");
        let path = dir.join(&name);
        io::write_state(&path, lattice, s)?;
        files.push(json!({ "file": name, "sha256": io::sha256_file(&path)? }));
    }
    io::write_json(
        &dir.join("manifest.json"),
        &json!({
            "seed": cfg.seed,
            "config_hash": cfg.hash(),
            "samples": ens.samples.len(),
            "mean_acceptance": num(ens.mean_acceptance()),
            "acceptance": ens.acceptance.iter().map(|&a| num(a)).collect::<Vec<_>>(),
            "files": files,
        }),
    )
}

fn front(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let exp = cfg.experiment_config()?;
    let escaping = exp.escaping_times();
    if !escaping.is_empty() {
        warn!("front: the cone reaches the box boundary at t = {escaping:?}; those records are marked invalid");
    }
    info!("front: {} members, times {:?}", exp.members, exp.times);
    let result = run::front_experiment(&exp)?;
    for m in &result.members {
        if let Some(e) = &m.failure {
            warn!("front: member {} stopped early: {e}", m.index);
        }
    }
    io::write_front(&out.join("front.csv"), cfg.seed, &result.members)?;
    io::write_sensitivity(&out.join("front_sensitivity.csv"), &result.members)?;
    io::write_profiles(&out.join("profiles.csv"), &result.members)?;
    io::write_q_track(&out.join("q_track.csv"), &result.members)?;
    io::write_json(&out.join("summary.json"), &front_summary(cfg, &exp, &result))
}

fn outcome_name(o: C1Outcome) -> &'static str {
    match o {
        C1Outcome::Fitted => "fitted",
        C1Outcome::AnyPositive => "any_positive",
        C1Outcome::Vacuous => "vacuous",
    }
}

/// Structured report of a front run.
pub fn front_summary(cfg: &RunConfig, exp: &ExperimentConfig, result: &ExperimentResult) -> Value {
    let s = &result.summary;
    let nums = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>();
    json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "members": exp.members,
        "alpha": num(exp.alpha),
        "b": num(exp.b),
        "epsilon": num(exp.epsilon),
        "escaping_times": nums(&exp.escaping_times()),
        "per_time": s.per_time.iter().map(|p| json!({
            "t": num(p.t),
            "cone_radius": num(p.cone_radius),
            "valid_fraction": num(p.valid_fraction),
            "median_r_front": num(p.median_r_front),
            "median_ratio": num(p.median_ratio),
            "median_weighted_outside": num(p.median_weighted_outside),
            "beyond_front_slopes": nums(&p.beyond_front_slopes),
            "median_profile_slope": p.median_profile_slope.map_or(Value::Null, num),
        })).collect::<Vec<_>>(),
        "ratio_spread": num(s.ratio_spread),
        "weighted_non_increasing": s.weighted_non_increasing,
        "final_below_threshold": num(s.final_below_threshold),
        "cone_fit": s.cone_fit.map_or(Value::Null, num),
        "linear_fit": s.linear_fit.map_or(Value::Null, |f| json!({
            "slope": num(f.slope),
            "intercept": num(f.intercept),
            "slope_se": num(f.slope_se),
        })),
        "member_cone_c": nums(&s.member_cone_c),
        "epsilon_sensitivity": s.epsilon_sensitivity.iter().map(|(e, m)| json!({
            "epsilon": num(*e),
            "median_r_front": nums(m),
        })).collect::<Vec<_>>(),
        "c1": s.c1.iter().enumerate().map(|(i, f)| json!({
            "member": i,
            "c1": num(f.c1),
            "outcome": outcome_name(f.outcome),
            "violations": f.violations,
        })).collect::<Vec<_>>(),
        "c1_ratio": num(s.c1_ratio),
        "q_growth_c": nums(&s.q_growth_c),
        "q_growth_c_max": num(s.q_growth_c_max),
        "failed_members": s.failed_members,
        "failures": result.members.iter().filter_map(|m| m.failure.as_ref().map(|e| json!({
            "member": m.index,
            "error": e.to_string(),
        }))).collect::<Vec<_>>(),
    })
}

fn converge(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let outer = lattice(cfg)?;
    let pot = cfg.potential()?;
    let e = cfg.experiment()?;
    let dt = cfg.integrator()?.dt;
    let k = e
        .observation_radius
        .ok_or_else(|| CliError::Config("missing experiment.observation_radius".into()))?;
    let t = e
        .converge_time
        .ok_or_else(|| CliError::Config("missing experiment.converge_time".into()))?;
    if e.truncation_radii.is_empty() {
        return Err(CliError::Config("experiment.truncation_radii is empty".into()));
    }
    for &n in &e.truncation_radii {
        if n < k || n >= outer.radius() {
            return Err(CliError::Config(format!(
                "experiment.truncation_radii: {n} must satisfy observation_radius = {k} <= n < lattice.radius = {}",
                outer.radius()
            )));
        }
    }
    let initials = if e.initial_state.is_some() {
        vec![initial_state(cfg, &outer, 0)?]
    } else {
        match e.initial {
            InitialKind::Zero => vec![PhaseState::zeros(outer.len()); e.members],
            InitialKind::Gibbs => run::gibbs_initials(&outer, &pot, &cfg.sampler()?, e.members)?,
        }
    };
    info!(
        "converge: {} initial states, radii {:?}",
        initials.len(),
        e.truncation_radii
    );
    let reports = run::converge_members(&outer, &pot, &initials, k, &e.truncation_radii, t, dt)?;
    io::write_converge(&out.join("converge.csv"), &reports)?;
    io::write_json(
        &out.join("converge_summary.json"),
        &json!({
            "config_hash": cfg.hash(),
            "k": k,
            "t": num(t),
            "members": reports.iter().enumerate().map(|(i, r)| json!({
                "member": i,
                "q_initial": num(r.q_initial),
                "log_slope": r.log_slope.map_or(Value::Null, num),
                "empirical_n_k": r.empirical_n_k,
            })).collect::<Vec<_>>(),
        }),
    )
}
