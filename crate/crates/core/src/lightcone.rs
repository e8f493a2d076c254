//! Light-cone measurements: perturbation fronts, out-of-cone norms, spatial
//! decay profiles and the fitted constant of the series bound.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{steps_for, QGrowth};
use crate::energy::q_statistic;
use crate::error::{Error, Result};
use crate::gibbs::{independent_sample, SamplerConfig};
use crate::lattice::{Lattice, LatticeSpec, Site};
use crate::math;
use crate::potential::Potential;
use crate::series::log_series_bound;
use crate::state::PhaseState;
use crate::stats::{self, LinearFit};
use crate::tangent::{JacobianField, TangentFlow};

/// Where ensemble members start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// Each member runs its own Metropolis chain.
    Gibbs,
    /// Every member starts from q = p = 0.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lattice: LatticeSpec,
    pub potential: Potential,
    pub dt: f64,
    pub sampler: SamplerConfig,
    pub initial: InitialData,
    /// Perturbed site i0.
    pub source: Site,
    pub alpha: f64,
    /// Rate in the weight e^{bt}.
    pub b: f64,
    pub epsilon: f64,
    /// Good-set exponent; must lie in (1, 4α − 1) when given.
    pub delta: Option<f64>,
    /// Increasing measurement times; the run ends at the last one.
    pub times: Vec<f64>,
    pub members: usize,
    /// Spacing of the Q(Φ_t x) track.
    pub q_interval: f64,
    /// The bound constant is fitted on measurement times ≤ this horizon.
    pub bound_horizon: f64,
    /// Extra thresholds for the front-radius sensitivity table.
    pub sensitivity: Vec<f64>,
    /// Reporting threshold for weighted_outside at the final time.
    pub report_threshold: f64,
}

impl ExperimentConfig {
    /// Defaults: α = 0.75, b = 0.1, ε = 1e-6, δ = 1.5, Q tracked every 0.25,
    /// bound fitted up to t = 4.
    pub fn new(lattice: LatticeSpec, dt: f64, sampler: SamplerConfig, times: Vec<f64>, members: usize) -> Self {
        ExperimentConfig {
            source: Site::origin(lattice.dim),
            lattice,
            potential: Potential::default(),
            dt,
            sampler,
            initial: InitialData::Gibbs,
            alpha: 0.75,
            b: 0.1,
            epsilon: 1e-6,
            delta: Some(1.5),
            times,
            members,
            q_interval: 0.25,
            bound_horizon: 4.0,
            sensitivity: vec![1e-4, 1e-6, 1e-8],
            report_threshold: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if !(self.alpha > 0.5) {
            return Err(Error::InvalidConfig(format!("alpha = {} must exceed 1/2", self.alpha)));
        }
        if !(self.b > 0.0) {
            return Err(Error::InvalidConfig(format!("b = {} must be positive", self.b)));
        }
        for &e in core::iter::once(&self.epsilon).chain(&self.sensitivity) {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig(format!("front threshold {e} must be positive")));
            }
        }
        if let Some(delta) = self.delta {
            let hi = 4.0 * self.alpha - 1.0;
            if !(delta > 1.0 && delta < hi) {
                return Err(Error::InvalidConfig(format!(
                    "delta = {delta} must lie in (1, 4*alpha - 1) = (1, {hi})"
                )));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if self.times.is_empty() {
            return Err(Error::InvalidConfig("no measurement times".into()));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig("measurement times must be increasing".into()));
            }
        }
        for &t in &self.times {
            steps_for(t, self.dt)?;
        }
        if steps_for(self.q_interval, self.dt)? == 0 {
            return Err(Error::InvalidConfig("q_interval must be at least one step".into()));
        }
        if self.members == 0 {
            return Err(Error::InvalidConfig("ensemble size must be >= 1".into()));
        }
        if self.initial == InitialData::Gibbs {
            self.sampler.validate()?;
        }
        Potential::new(self.potential.coeffs())?;
        let lattice = Lattice::new(self.lattice)?;
        lattice.index_of(&self.source)?;
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Measurement times whose cone reaches the box boundary.
    pub fn escaping_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .copied()
            .filter(|&t| cone_radius(t, self.alpha) >= self.lattice.radius as f64)
            .collect()
    }
}

/// t·(ln t)^α, taken as 0 for t ≤ 1.
pub fn cone_radius(t: f64, alpha: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        t * math::powf(math::ln(t), alpha)
    }
}

/// Largest ℓ1 distance from the source among sites with ‖Δ_j‖ ≥ ε; −1 if
/// there is none.
pub fn front_radius(lattice: &Lattice, field: &JacobianField, epsilon: f64) -> i64 {
    field
        .norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= epsilon)
        .map(|(j, _)| lattice.distance(j, field.source) as i64)
        .max()
        .unwrap_or(-1)
}

/// Entry r is the largest ‖Δ_j‖ with |j − i0| = r.
pub fn decay_profile(lattice: &Lattice, field: &JacobianField) -> Vec<f64> {
    let mut profile: Vec<f64> = Vec::new();
    for (j, &n) in field.norms.iter().enumerate() {
        let r = lattice.distance(j, field.source);
        if r >= profile.len() {
            profile.resize(r + 1, 0.0);
        }
        profile[r] = profile[r].max(n);
    }
    profile
}

/// Slope of ln profile against r over r > r_front where the profile is
/// positive.
pub fn beyond_front_slope(profile: &[f64], r_front: i64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = profile
        .iter()
        .enumerate()
        .filter(|(r, &v)| (*r as i64) > r_front && v > 0.0)
        .map(|(r, &v)| (r as f64, math::ln(v)))
        .unzip();
    stats::linear_fit(&x, &y).map(|f| f.slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontRecord {
    pub t: f64,
    pub epsilon: f64,
    pub r_front: i64,
    pub cone_radius: f64,
    /// max ‖Δ_j‖ over |j − i0| > cone_radius.
    pub max_outside: f64,
    /// e^{bt}·max_outside.
    pub weighted_outside: f64,
    /// False once the cone reaches the box boundary.
    pub valid: bool,
}

pub fn front_record(lattice: &Lattice, field: &JacobianField, epsilon: f64, alpha: f64, b: f64) -> FrontRecord {
    let cone = cone_radius(field.t, alpha);
    let max_outside = field
        .norms
        .iter()
        .enumerate()
        .filter(|(j, _)| lattice.distance(*j, field.source) as f64 > cone)
        .map(|(_, &n)| n)
        .fold(0.0, f64::max);
    FrontRecord {
        t: field.t,
        epsilon,
        r_front: front_radius(lattice, field, epsilon),
        cone_radius: cone,
        max_outside,
        weighted_outside: math::exp(b * field.t) * max_outside,
        valid: cone < lattice.radius() as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C1Outcome {
    /// Smallest dominating c1 found to 1%.
    Fitted,
    /// The bound dominates even as c1 → 0.
    AnyPositive,
    /// No c1 up to the search ceiling dominates.
    Vacuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1Fit {
    pub c1: f64,
    pub outcome: C1Outcome,
    /// Measured norms above the bound at the reported c1.
    pub violations: usize,
}

/// One measurement for the bound fit: time, sup_{s≤t} Q(Φ_s x), decay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPoint {
    pub t: f64,
    pub q_sup: f64,
    pub profile: Vec<f64>,
}

const C1_FLOOR: f64 = 1e-12;
const C1_CEILING: f64 = 1e12;

fn violations(points: &[BoundPoint], c1: f64) -> usize {
    let mut count = 0;
    for pt in points {
        for (r, &norm) in pt.profile.iter().enumerate() {
            if norm > 0.0 && math::ln(norm) > log_series_bound(pt.t, pt.q_sup, r as u64, c1) {
                count += 1;
            }
        }
    }
    count
}

/// Smallest c1 (bisection in ln c1 to 1%) for which the series bound
/// dominates every positive entry of every profile.
pub fn bound_comparison(points: &[BoundPoint]) -> C1Fit {
    let ok = |c: f64| violations(points, c) == 0;
    let (mut lo, mut hi) = if ok(1.0) {
        let mut hi = 1.0;
        loop {
            let next = hi * 0.5;
            if next < C1_FLOOR {
                return C1Fit {
                    c1: C1_FLOOR,
                    outcome: C1Outcome::AnyPositive,
                    violations: 0,
                };
            }
            if !ok(next) {
                break (next, hi);
            }
            hi = next;
        }
    } else {
        let mut lo = 1.0;
        loop {
            let next = lo * 2.0;
            if next > C1_CEILING {
                return C1Fit {
                    c1: C1_CEILING,
                    outcome: C1Outcome::Vacuous,
                    violations: violations(points, C1_CEILING),
                };
            }
            if ok(next) {
                break (lo, next);
            }
            lo = next;
        }
    };
    while hi / lo > 1.01 {
        let mid = math::sqrt(lo * hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    C1Fit {
        c1: hi,
        outcome: C1Outcome::Fitted,
        violations: violations(points, hi),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberResult {
    pub index: usize,
    /// Records at the main threshold, one per reached measurement time.
    pub records: Vec<FrontRecord>,
    /// r_front per reached measurement time for each sensitivity threshold.
    pub sensitivity: Vec<(f64, Vec<i64>)>,
    /// Decay profiles per reached measurement time.
    pub profiles: Vec<Vec<f64>>,
    pub q_track: QGrowth,
    pub c1: C1Fit,
    /// Set when the run stopped early.
    pub failure: Option<Error>,
}

/// Initial data for member `index`: stream `index` of the sampler seed runs a
/// fresh chain for burn_in + thin sweeps and its single kept sample is used.
pub fn member_initial(cfg: &ExperimentConfig, lattice: &Lattice, index: usize) -> Result<PhaseState> {
    match cfg.initial {
        InitialData::Zero => Ok(PhaseState::zeros(lattice.len())),
        InitialData::Gibbs => independent_sample(lattice, &cfg.potential, &cfg.sampler, index as u64),
    }
}

/// Sample, evolve, propagate the tangent pair and measure one member.
pub fn run_member(cfg: &ExperimentConfig, index: usize) -> Result<MemberResult> {
    cfg.validate()?;
    let lattice = Lattice::new(cfg.lattice)?;
    let initial = member_initial(cfg, &lattice, index)?;
    Ok(measure_member(cfg, &lattice, initial, index))
}

/// Measurement part of [`run_member`] on given initial data.
pub fn measure_member(cfg: &ExperimentConfig, lattice: &Lattice, initial: PhaseState, index: usize) -> MemberResult {
    let pot = &cfg.potential;
    let measure_steps: Vec<usize> = cfg.times.iter().map(|&t| steps_for(t, cfg.dt).unwrap_or(0)).collect();
    let q_stride = steps_for(cfg.q_interval, cfg.dt).unwrap_or(1).max(1);
    let total = measure_steps.last().copied().unwrap_or(0);

    let mut records = Vec::new();
    let mut profiles = Vec::new();
    let mut sens: Vec<(f64, Vec<i64>)> = cfg.sensitivity.iter().map(|&e| (e, Vec::new())).collect();
    let mut q_times = Vec::new();
    let mut q_values = Vec::new();
    let mut failure = None;

    let mut flow = match TangentFlow::new(lattice, pot, initial, &cfg.source, cfg.dt) {
        Ok(f) => Some(f),
        Err(e) => {
            failure = Some(e);
            None
        }
    };
    if let Some(flow) = flow.as_mut() {
        let mut next = 0;
        for step in 0..=total {
            if step > 0 {
                if let Err(e) = flow.step() {
                    failure = Some(e);
                    break;
                }
            }
            if step % q_stride == 0 || next < measure_steps.len() && measure_steps[next] == step {
                match q_statistic(lattice, pot, flow.state()) {
                    Ok(q) => {
                        q_times.push(flow.time());
                        q_values.push(q);
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            while next < measure_steps.len() && measure_steps[next] == step {
                let field = flow.field();
                records.push(front_record(lattice, &field, cfg.epsilon, cfg.alpha, cfg.b));
                for (e, r) in sens.iter_mut() {
                    r.push(front_radius(lattice, &field, *e));
                }
                profiles.push(decay_profile(lattice, &field));
                next += 1;
            }
        }
    }

    let q_track = if q_values.is_empty() {
        QGrowth {
            times: q_times,
            values: q_values,
            fitted_c: f64::NAN,
        }
    } else {
        QGrowth::from_series(q_times, q_values)
    };
    let points: Vec<BoundPoint> = records
        .iter()
        .zip(&profiles)
        .filter(|(r, _)| r.t <= cfg.bound_horizon + 1e-12)
        .map(|(r, p)| BoundPoint {
            t: r.t,
            q_sup: q_track.running_sup(r.t),
            profile: p.clone(),
        })
        .collect();
    MemberResult {
        index,
        records,
        sensitivity: sens,
        profiles,
        q_track,
        c1: bound_comparison(&points),
        failure,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSummary {
    pub t: f64,
    pub cone_radius: f64,
    /// Valid records over members that reached t.
    pub valid_fraction: f64,
    pub median_r_front: f64,
    /// Median of r_front / cone_radius over valid records.
    pub median_ratio: f64,
    pub median_weighted_outside: f64,
    /// Beyond-front slopes of ln profile against r, one per valid record
    /// where a fit exists.
    pub beyond_front_slopes: Vec<f64>,
    /// Slope of the ensemble-median ln profile beyond the median front.
    pub median_profile_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub per_time: Vec<TimeSummary>,
    /// Relative spread of the per-time median ratios.
    pub ratio_spread: f64,
    pub weighted_non_increasing: bool,
    /// Fraction of members with weighted_outside below the reporting
    /// threshold at the final time.
    pub final_below_threshold: f64,
    /// c in median r_front ≈ c·t·ln^α t.
    pub cone_fit: Option<f64>,
    /// median r_front ≈ v·t + r0.
    pub linear_fit: Option<LinearFit>,
    /// Per member: max over valid times of r_front / cone_radius.
    pub member_cone_c: Vec<f64>,
    /// Per threshold: median r_front at each time.
    pub epsilon_sensitivity: Vec<(f64, Vec<f64>)>,
    pub c1: Vec<C1Fit>,
    /// max / min of the fitted c1 values.
    pub c1_ratio: f64,
    /// Per member Q-growth constant.
    pub q_growth_c: Vec<f64>,
    /// Ensemble constant: max over members.
    pub q_growth_c_max: f64,
    pub failed_members: usize,
}

fn median_of<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    stats::median(&v)
}

pub fn summarize(cfg: &ExperimentConfig, members: &[MemberResult]) -> Summary {
    let mut per_time = Vec::with_capacity(cfg.times.len());
    for (ti, &t) in cfg.times.iter().enumerate() {
        let reached: Vec<(&FrontRecord, &Vec<f64>)> = members
            .iter()
            .filter_map(|m| m.records.get(ti).zip(m.profiles.get(ti)))
            .collect();
        let valid: Vec<(&FrontRecord, &Vec<f64>)> = reached.iter().copied().filter(|(r, _)| r.valid).collect();
        let cone = cone_radius(t, cfg.alpha);
        let median_r_front = median_of(valid.iter().map(|(r, _)| r.r_front.max(0) as f64));
        let median_ratio = median_of(valid.iter().map(|(r, _)| r.r_front.max(0) as f64 / cone));
        let median_weighted_outside = median_of(valid.iter().map(|(r, _)| r.weighted_outside));
        let beyond_front_slopes = valid
            .iter()
            .filter_map(|(r, p)| beyond_front_slope(p, r.r_front))
            .collect();
        let median_profile_slope = if valid.is_empty() {
            None
        } else {
            let len = valid.iter().map(|(_, p)| p.len()).min().unwrap_or(0);
            let med: Vec<f64> = (0..len).map(|r| median_of(valid.iter().map(|(_, p)| p[r]))).collect();
            beyond_front_slope(&med, median_r_front as i64)
        };
        per_time.push(TimeSummary {
            t,
            cone_radius: cone,
            valid_fraction: if reached.is_empty() {
                0.0
            } else {
                valid.len() as f64 / reached.len() as f64
            },
            median_r_front,
            median_ratio,
            median_weighted_outside,
            beyond_front_slopes,
            median_profile_slope,
        });
    }

    let ratios: Vec<f64> = per_time.iter().map(|s| s.median_ratio).collect();
    let weighted: Vec<f64> = per_time.iter().map(|s| s.median_weighted_outside).collect();
    let weighted_non_increasing = weighted.windows(2).all(|w| w[1] <= w[0]);
    let last = cfg.times.len() - 1;
    let final_below_threshold = {
        let at_end: Vec<&FrontRecord> = members.iter().filter_map(|m| m.records.get(last)).collect();
        if at_end.is_empty() {
            0.0
        } else {
            at_end
                .iter()
                .filter(|r| r.weighted_outside < cfg.report_threshold)
                .count() as f64
                / members.len() as f64
        }
    };
    let cones: Vec<f64> = per_time.iter().map(|s| s.cone_radius).collect();
    let meds: Vec<f64> = per_time.iter().map(|s| s.median_r_front).collect();
    let cone_fit = stats::proportional_fit(&cones, &meds);
    let linear_fit = stats::linear_fit(&cfg.times, &meds);
    let member_cone_c = members
        .iter()
        .map(|m| {
            m.records
                .iter()
                .filter(|r| r.valid && r.cone_radius > 0.0)
                .map(|r| r.r_front.max(0) as f64 / r.cone_radius)
                .fold(0.0, f64::max)
        })
        .collect();
    let epsilon_sensitivity = cfg
        .sensitivity
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let per_t = (0..cfg.times.len())
                .map(|ti| {
                    median_of(
                        members
                            .iter()
                            .filter(|m| m.records.get(ti).is_some_and(|r| r.valid))
                            .filter_map(|m| m.sensitivity[k].1.get(ti))
                            .map(|&r| r.max(0) as f64),
                    )
                })
                .collect();
            (e, per_t)
        })
        .collect();
    let c1: Vec<C1Fit> = members.iter().map(|m| m.c1).collect();
    let fitted: Vec<f64> = c1
        .iter()
        .filter(|f| f.outcome == C1Outcome::Fitted)
        .map(|f| f.c1)
        .collect();
    let q_growth_c: Vec<f64> = members.iter().map(|m| m.q_track.fitted_c).collect();
    Summary {
        ratio_spread: stats::relative_spread(&ratios),
        per_time,
        weighted_non_increasing,
        final_below_threshold,
        cone_fit,
        linear_fit,
        member_cone_c,
        epsilon_sensitivity,
        c1_ratio: stats::max_min_ratio(&fitted),
        c1,
        q_growth_c_max: q_growth_c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        q_growth_c,
        failed_members: members.iter().filter(|m| m.failure.is_some()).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub members: Vec<MemberResult>,
    pub summary: Summary,
}

/// Runs every member in order and summarizes.
pub fn velocity_bound_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let members = (0..cfg.members)
        .map(|i| run_member(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &members);
    Ok(ExperimentResult { members, summary })
}
