//! Velocity-Verlet integration of the n-partial dynamics q̇ = p, ṗ = F(q).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{forces_into, hamiltonian_unchecked, q_statistic, QStatistic};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::math;
use crate::potential::Potential;
use crate::state::PhaseState;

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded snapshots.
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, record_stride: usize) -> Result<Self> {
        let cfg = IntegratorConfig {
            dt,
            t_end,
            record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} must be non-negative",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// round(t_end / dt).
    pub fn steps(&self) -> usize {
        math::round(self.t_end / self.dt) as usize
    }

    /// Config whose recording grid lands exactly on multiples of `interval`.
    pub fn recording_every(dt: f64, t_end: f64, interval: f64) -> Result<Self> {
        let stride = steps_for(interval, dt)?;
        IntegratorConfig::new(dt, t_end, stride.max(1))
    }
}

/// Number of steps of size `dt` that reach time `t` exactly (to 1e-9 relative).
pub fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let steps = math::round(t / dt);
    if !(t >= 0.0) || (steps * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "time {t} is not a whole number of steps of {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Snapshots of Φ_t^{(n)}(x) on a uniform time grid starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// (t, H, relative drift |H(t) − H(0)| / max(H(0), 1)) per snapshot.
    pub fn energy_series(&self, lattice: &Lattice, pot: &Potential) -> Vec<(f64, f64, f64)> {
        let h0 = hamiltonian_unchecked(lattice, pot, &self.states[0].q, &self.states[0].p);
        let scale = h0.max(1.0);
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| {
                let h = hamiltonian_unchecked(lattice, pot, &s.q, &s.p);
                (t, h, (h - h0).abs() / scale)
            })
            .collect()
    }

    /// Largest relative energy drift over the recorded snapshots.
    pub fn max_energy_drift(&self, lattice: &Lattice, pot: &Potential) -> f64 {
        self.energy_series(lattice, pot).iter().map(|e| e.2).fold(0.0, f64::max)
    }
}

/// In-place velocity-Verlet stepper that caches the force between steps.
#[derive(Debug, Clone)]
pub struct Verlet<'a> {
    lattice: &'a Lattice,
    pot: &'a Potential,
    dt: f64,
    state: PhaseState,
    force: Vec<f64>,
    step: usize,
}

impl<'a> Verlet<'a> {
    /// `dt` may be negative to run the flow backwards.
    pub fn new(lattice: &'a Lattice, pot: &'a Potential, initial: PhaseState, dt: f64) -> Result<Self> {
        initial.check_on(lattice)?;
        if dt == 0.0 || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt = {dt} must be finite and non-zero")));
        }
        let mut force = vec![0.0; lattice.len()];
        forces_into(lattice, pot, &initial.q, &mut force);
        if let Some(i) = force.iter().position(|f| !f.is_finite()) {
            return Err(Error::ForceOverflow {
                site: lattice.site_of(i),
            });
        }
        Ok(Verlet {
            lattice,
            pot,
            dt,
            state: initial,
            force,
            step: 0,
        })
    }

    pub fn state(&self) -> &PhaseState {
        &self.state
    }

    pub fn into_state(self) -> PhaseState {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Half-kick, drift, recompute force, half-kick.
    pub fn step(&mut self) -> Result<()> {
        let half = 0.5 * self.dt;
        let PhaseState { q, p } = &mut self.state;
        for i in 0..q.len() {
            p[i] += half * self.force[i];
            q[i] += self.dt * p[i];
        }
        forces_into(self.lattice, self.pot, q, &mut self.force);
        self.step += 1;
        for i in 0..q.len() {
            p[i] += half * self.force[i];
            if !p[i].is_finite() || !q[i].is_finite() {
                return Err(Error::BlowUp {
                    site: i,
                    step: self.step,
                    time: self.time(),
                });
            }
        }
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub(crate) fn q(&self) -> &[f64] {
        &self.state.q
    }
}

/// One velocity-Verlet step. Symplectic and time reversible: a step with
/// `-dt` undoes a step with `dt` up to roundoff.
pub fn verlet_step(lattice: &Lattice, pot: &Potential, state: &PhaseState, dt: f64) -> Result<PhaseState> {
    let mut v = Verlet::new(lattice, pot, state.clone(), dt)?;
    v.step()?;
    Ok(v.into_state())
}

/// Integrates Φ_t^{(n)} and records every `record_stride` steps.
pub fn evolve(lattice: &Lattice, pot: &Potential, initial: &PhaseState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut v = Verlet::new(lattice, pot, initial.clone(), cfg.dt)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![initial.clone()],
    };
    while v.steps_taken() < steps {
        v.step()?;
        if v.steps_taken() % cfg.record_stride == 0 {
            traj.times.push(v.time());
            traj.states.push(v.state().clone());
        }
    }
    Ok(traj)
}

/// Q along a trajectory, with the smallest c such that
/// Q(Φ_t x) ≤ c·{Q(x)·log(e + Q(x)) + t⁴} at every recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrowth {
    pub times: Vec<f64>,
    pub values: Vec<QStatistic>,
    pub fitted_c: f64,
}

impl QGrowth {
    pub fn from_series(times: Vec<f64>, values: Vec<QStatistic>) -> Self {
        let fitted_c = q_growth_constant(&times, &values.iter().map(|q| q.value).collect::<Vec<_>>());
        QGrowth {
            times,
            values,
            fitted_c,
        }
    }

    /// sup_{s ≤ t} Q(Φ_s x) over the recorded grid.
    pub fn running_sup(&self, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .take_while(|(&s, _)| s <= t + 1e-12)
            .map(|(_, q)| q.value)
            .fold(0.0, f64::max)
    }
}

/// max_t Q(t) / {Q(0)·log(e + Q(0)) + t⁴}; the first entry must be t = 0.
pub fn q_growth_constant(times: &[f64], q: &[f64]) -> f64 {
    let q0 = q[0];
    let base = q0 * math::ln(math::E + q0);
    times
        .iter()
        .zip(q)
        .map(|(&t, &qt)| qt / (base + t * t * t * t))
        .fold(0.0, f64::max)
}

pub fn q_growth_track(
    lattice: &Lattice,
    pot: &Potential,
    state: &PhaseState,
    cfg: &IntegratorConfig,
) -> Result<QGrowth> {
    let traj = evolve(lattice, pot, state, cfg)?;
    let values = traj
        .states
        .iter()
        .map(|s| q_statistic(lattice, pot, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(QGrowth::from_series(traj.times, values))
}
