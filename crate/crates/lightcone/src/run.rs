//! Job-parallel drivers. Jobs share no mutable state and results are merged
//! in job order, so output does not depend on the thread count.

use lightcone_core::convergence::{convergence_study, ConvergenceReport};
use lightcone_core::diagnostics::{good_set_diagnostic, GoodSetRow};
use lightcone_core::gibbs::{independent_sample, SamplerConfig};
use lightcone_core::lightcone::{run_member, summarize, ExperimentConfig, ExperimentResult, MemberResult};
use lightcone_core::{Lattice, PhaseState, Potential, Result};
use rayon::prelude::*;

/// Runs `f` on a dedicated pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// First error in job order, or all results.
fn in_order<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn front_members(cfg: &ExperimentConfig) -> Result<Vec<MemberResult>> {
    cfg.validate()?;
    let results: Vec<Result<MemberResult>> = (0..cfg.members).into_par_iter().map(|i| run_member(cfg, i)).collect();
    in_order(results)
}

/// Parallel counterpart of `velocity_bound_experiment`; identical output.
pub fn front_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let members = front_members(cfg)?;
    let summary = summarize(cfg, &members);
    Ok(ExperimentResult { members, summary })
}

/// Independent Gibbs samples on streams 0..count.
pub fn gibbs_initials(
    lattice: &Lattice,
    pot: &Potential,
    sampler: &SamplerConfig,
    count: usize,
) -> Result<Vec<PhaseState>> {
    let results: Vec<Result<PhaseState>> = (0..count)
        .into_par_iter()
        .map(|i| independent_sample(lattice, pot, sampler, i as u64))
        .collect();
    in_order(results)
}

/// One convergence study per initial configuration.
pub fn converge_members(
    outer: &Lattice,
    pot: &Potential,
    initials: &[PhaseState],
    k: usize,
    radii: &[usize],
    t: f64,
    dt: f64,
) -> Result<Vec<ConvergenceReport>> {
    let results: Vec<Result<ConvergenceReport>> = initials
        .par_iter()
        .map(|x| convergence_study(outer, pot, x, k, radii, t, dt))
        .collect();
    in_order(results)
}

/// Good-set rows over an ensemble, one job per sample.
pub fn good_set(
    lattice: &Lattice,
    pot: &Potential,
    samples: &[PhaseState],
    delta: f64,
    k_list: &[usize],
    dt: f64,
) -> Result<Vec<GoodSetRow>> {
    // validates arguments and fixes the row layout even for an empty ensemble
    let mut total = good_set_diagnostic(lattice, pot, &[], delta, k_list, dt)?;
    let per_sample: Vec<Result<Vec<GoodSetRow>>> = samples
        .par_iter()
        .map(|s| good_set_diagnostic(lattice, pot, std::slice::from_ref(s), delta, k_list, dt))
        .collect();
    for rows in in_order(per_sample)? {
        for (acc, r) in total.iter_mut().zip(rows) {
            acc.failures += r.failures;
            acc.blowups += r.blowups;
            acc.evaluated += r.evaluated;
        }
    }
    Ok(total)
}
