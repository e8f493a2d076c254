//! Metropolis sampling of the finite-volume Gibbs measure ∝ exp(−βH) with free
//! boundary.
//!
//! Positions are updated by single-site Gaussian proposals in flat site order;
//! momenta are drawn exactly from N(0, 1/β) whenever a sample is kept.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::math;
use crate::potential::Potential;
use crate::rng::{job_rng, SimRng};
use crate::state::PhaseState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub beta: f64,
    /// Total sweeps including burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    pub proposal_sigma: f64,
    pub seed: u64,
    /// Keep every `thin`-th sweep after burn-in.
    pub thin: usize,
}

impl SamplerConfig {
    /// Config with the default proposal scale 0.5/√β.
    pub fn new(beta: f64, sweeps: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        let cfg = SamplerConfig {
            beta,
            sweeps,
            burn_in,
            proposal_sigma: default_sigma(beta),
            seed,
            thin,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta = {} must be positive", self.beta)));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidConfig(format!(
                "burn_in = {} must be smaller than sweeps = {}",
                self.burn_in, self.sweeps
            )));
        }
        if !(self.proposal_sigma > 0.0) || !self.proposal_sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "proposal_sigma = {} must be positive",
                self.proposal_sigma
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        Ok(())
    }

    /// (sweeps − burn_in) / thin.
    pub fn kept(&self) -> usize {
        (self.sweeps - self.burn_in) / self.thin
    }
}

pub fn default_sigma(beta: f64) -> f64 {
    0.5 / math::sqrt(beta)
}

/// Independent N(0, 1/β) momenta, one per site.
pub fn sample_momenta<R: Rng + ?Sized>(len: usize, beta: f64, rng: &mut R) -> Vec<f64> {
    let s = 1.0 / math::sqrt(beta);
    (0..len)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            s * z
        })
        .collect()
}

/// Change in the q-dependent part of H when q_i moves to `proposed`.
fn local_delta(lattice: &Lattice, pot: &Potential, q: &[f64], i: usize, proposed: f64) -> f64 {
    let old = q[i];
    let mut bond = 0.0;
    for &j in lattice.neighbor_indices(i) {
        let qj = q[j as usize];
        bond += (proposed - qj) * (proposed - qj) - (old - qj) * (old - qj);
    }
    pot.value(proposed) - pot.value(old) + 0.5 * lattice.coupling() * bond
}

/// One sequential sweep over all sites; returns the acceptance rate.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    lattice: &Lattice,
    pot: &Potential,
    state: &mut PhaseState,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<f64> {
    state.check_on(lattice)?;
    let mut accepted = 0usize;
    for i in 0..lattice.len() {
        if metropolis_update(lattice, pot, state, i, cfg, rng) {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / lattice.len() as f64)
}

/// One Gaussian-proposal Metropolis update of q at flat index `i`, reversible
/// with respect to exp(−βH) with the other coordinates held fixed. Returns
/// whether the proposal was accepted. Panics if `i` is out of range.
pub fn metropolis_update<R: Rng + ?Sized>(
    lattice: &Lattice,
    pot: &Potential,
    state: &mut PhaseState,
    i: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    let proposed = state.q[i] + cfg.proposal_sigma * z;
    let delta = local_delta(lattice, pot, &state.q, i, proposed);
    let u: f64 = rng.random();
    if delta <= 0.0 || u < math::exp(-cfg.beta * delta) {
        state.q[i] = proposed;
        true
    } else {
        false
    }
}

/// Kept samples of one chain plus per-sweep acceptance rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub samples: Vec<PhaseState>,
    pub acceptance: Vec<f64>,
}

impl Ensemble {
    pub fn mean_acceptance(&self) -> f64 {
        crate::stats::mean(&self.acceptance)
    }
}

/// Chain on stream 0 of `cfg.seed`.
pub fn sample_ensemble(lattice: &Lattice, pot: &Potential, cfg: &SamplerConfig) -> Result<Ensemble> {
    sample_ensemble_with_rng(lattice, pot, cfg, &mut job_rng(cfg.seed, 0))
}

/// Runs a chain from q = 0, discards `burn_in` sweeps and keeps every
/// `thin`-th sweep afterwards, each with fresh momenta.
pub fn sample_ensemble_with_rng(
    lattice: &Lattice,
    pot: &Potential,
    cfg: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<Ensemble> {
    cfg.validate()?;
    let mut state = PhaseState::zeros(lattice.len());
    let mut samples = Vec::with_capacity(cfg.kept());
    let mut acceptance = Vec::with_capacity(cfg.sweeps);
    for sweep in 1..=cfg.sweeps {
        acceptance.push(metropolis_sweep(lattice, pot, &mut state, cfg, rng)?);
        if sweep > cfg.burn_in && (sweep - cfg.burn_in).is_multiple_of(cfg.thin) {
            let p = sample_momenta(lattice.len(), cfg.beta, rng);
            samples.push(PhaseState { q: state.q.clone(), p });
        }
    }
    Ok(Ensemble { samples, acceptance })
}

/// One sample from an independent chain on stream `stream` of `cfg.seed`:
/// burn_in + thin sweeps from q = 0, keeping the last.
pub fn independent_sample(lattice: &Lattice, pot: &Potential, cfg: &SamplerConfig, stream: u64) -> Result<PhaseState> {
    let chain = SamplerConfig {
        sweeps: cfg.burn_in + cfg.thin,
        ..*cfg
    };
    let mut ens = sample_ensemble_with_rng(lattice, pot, &chain, &mut job_rng(cfg.seed, stream))?;
    Ok(ens.samples.pop().expect("one kept sample"))
}
