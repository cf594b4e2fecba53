//! Seeded stochastic scenarios: Weibull breakdowns with truncated-Normal
//! repairs, and Gamma-distributed operation releases.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Weibull};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::env::{horizon_estimate, JsspInstance};
use crate::Scalar;

const MACHINE_STREAM: u64 = 1 << 32;
const JOB_STREAM: u64 = 2 << 32;
/// Breakdowns are sampled over this multiple of the horizon estimate.
const BREAKDOWN_HORIZON_FACTOR: u64 = 4;
const MIN_SKEW: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("{name} = {value} is outside its domain ({rule})")]
    Parameter {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
}

fn check(name: &'static str, value: f64, ok: bool, rule: &'static str) -> Result<(), DomainError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(DomainError::Parameter { name, value, rule })
    }
}

/// Weibull density `(β/η)(t/η)^(β−1) exp(−(t/η)^β)`.
pub fn weibull_pdf<S: Scalar>(t: S, shape: S, scale: S) -> Result<S, DomainError> {
    weibull_domain(t, shape, scale)?;
    let z = t / scale;
    Ok((shape / scale) * z.powf(shape - S::one()) * (-z.powf(shape)).exp())
}

/// Weibull hazard rate `(β/η)(t/η)^(β−1)`.
pub fn weibull_hazard<S: Scalar>(t: S, shape: S, scale: S) -> Result<S, DomainError> {
    weibull_domain(t, shape, scale)?;
    Ok((shape / scale) * (t / scale).powf(shape - S::one()))
}

fn weibull_domain<S: Scalar>(t: S, shape: S, scale: S) -> Result<(), DomainError> {
    check("t", t.as_f64(), t >= S::zero(), "t >= 0")?;
    check("shape", shape.as_f64(), shape > S::zero(), "shape > 0")?;
    check("scale", scale.as_f64(), scale > S::zero(), "scale > 0")
}

/// Gamma density with shape `alpha` and scale `scale`, evaluated in log space.
pub fn gamma_pdf<S: Scalar>(t: S, alpha: S, scale: S) -> Result<S, DomainError> {
    check("t", t.as_f64(), t >= S::zero(), "t >= 0")?;
    check("alpha", alpha.as_f64(), alpha > S::zero(), "alpha > 0")?;
    check("scale", scale.as_f64(), scale > S::zero(), "scale > 0")?;
    if t == S::zero() {
        return Ok(if alpha < S::one() {
            S::infinity()
        } else if alpha == S::one() {
            S::one() / scale
        } else {
            S::zero()
        });
    }
    let log_norm = alpha * scale.ln() + S::of(ln_gamma(alpha.as_f64()));
    Ok(((alpha - S::one()) * t.ln() - t / scale - log_norm).exp())
}

/// Half-open breakdown window `[start, end)` on the step clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, start: u64, end: u64) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub breakdowns_enabled: bool,
    pub weibull_shape: f64,
    /// η is this factor times the instance's mean operation duration.
    pub weibull_scale_factor: f64,
    /// Defaults to the mean operation duration.
    pub repair_mean: Option<f64>,
    /// Defaults to a quarter of the repair mean.
    pub repair_std: Option<f64>,
    pub arrivals_enabled: bool,
    pub skew_range: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            breakdowns_enabled: false,
            weibull_shape: 2.0,
            weibull_scale_factor: 5.0,
            repair_mean: None,
            repair_std: None,
            arrivals_enabled: false,
            skew_range: (0.0, 1.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn disruption_free() -> Self {
        Self::default()
    }

    pub fn breakdowns() -> Self {
        Self {
            breakdowns_enabled: true,
            ..Self::default()
        }
    }

    pub fn breakdowns_and_arrivals() -> Self {
        Self {
            breakdowns_enabled: true,
            arrivals_enabled: true,
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        check("weibull_shape", self.weibull_shape, self.weibull_shape > 0.0, "> 0")?;
        check(
            "weibull_scale_factor",
            self.weibull_scale_factor,
            self.weibull_scale_factor > 0.0,
            "> 0",
        )?;
        if let Some(mu) = self.repair_mean {
            check("repair_mean", mu, mu > 0.0, "> 0")?;
        }
        if let Some(sd) = self.repair_std {
            check("repair_std", sd, sd >= 0.0, ">= 0")?;
        }
        let (lo, hi) = self.skew_range;
        check("skew_range.0", lo, (0.0..=1.0).contains(&lo), "within [0, 1]")?;
        check("skew_range.1", hi, (lo..=1.0).contains(&hi), "within [lo, 1]")
    }

    fn repair_params(&self, mean_duration: f64) -> (f64, f64) {
        let mu = self.repair_mean.unwrap_or(mean_duration);
        (mu, self.repair_std.unwrap_or(0.25 * mu))
    }
}

/// The materialized disruptions of one seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    /// Per machine, sorted disjoint windows.
    pub breakdowns: Vec<Vec<Interval>>,
    /// Per job, per operation, release step.
    pub releases: Vec<Vec<u64>>,
    pub skews: Vec<f64>,
}

impl ScenarioTrace {
    /// No breakdowns, everything released at step 0.
    pub fn empty(instance: &JsspInstance) -> Self {
        Self {
            breakdowns: vec![Vec::new(); instance.n_machines()],
            releases: instance.jobs().iter().map(|ops| vec![0; ops.len()]).collect(),
            skews: vec![0.0; instance.n_jobs()],
        }
    }

    pub fn is_broken(&self, machine: usize, t: u64) -> bool {
        let windows = &self.breakdowns[machine];
        let i = windows.partition_point(|w| w.end <= t);
        windows.get(i).is_some_and(|w| w.contains(t))
    }

    pub fn release(&self, job: usize, op: usize) -> u64 {
        self.releases[job][op]
    }

    /// Breakdown windows of `machine` intersecting `[start, end)`.
    pub fn overlapping(&self, machine: usize, start: u64, end: u64) -> impl Iterator<Item = &Interval> {
        self.breakdowns[machine].iter().filter(move |w| w.overlaps(start, end))
    }

    /// Checks the sorted/disjoint and non-decreasing release invariants and the shape.
    pub fn check_against(&self, instance: &JsspInstance) -> Result<(), String> {
        if self.breakdowns.len() != instance.n_machines() {
            return Err("breakdown table does not match machine count".into());
        }
        if self.releases.len() != instance.n_jobs()
            || self.releases.iter().zip(instance.jobs()).any(|(r, ops)| r.len() != ops.len())
        {
            return Err("release table does not match job lengths".into());
        }
        for (m, ws) in self.breakdowns.iter().enumerate() {
            if ws.iter().any(Interval::is_empty) || ws.windows(2).any(|w| w[0].end > w[1].start) {
                return Err(format!("breakdowns of machine {m} are not sorted and disjoint"));
            }
        }
        for (j, r) in self.releases.iter().enumerate() {
            if r.windows(2).any(|w| w[0] > w[1]) {
                return Err(format!("releases of job {j} decrease"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("trace serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Independent generator for one machine or job of a seeded run.
pub fn sub_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Weibull law of the time between failures, `η = weibull_scale_factor · mean_duration`.
pub fn failure_distribution(config: &ScenarioConfig, mean_duration: f64) -> Result<Weibull<f64>, DomainError> {
    let eta = config.weibull_scale_factor * mean_duration;
    Weibull::new(eta, config.weibull_shape).map_err(|_| DomainError::Parameter {
        name: "weibull_scale",
        value: eta,
        rule: "> 0",
    })
}

/// Breakdown windows on the absolute clock up to `horizon`: Weibull gaps between
/// failures, truncated-Normal repair lengths rounded up.
pub fn sample_breakdowns<R: Rng + ?Sized>(
    horizon: u64,
    mean_duration: f64,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Interval>, DomainError> {
    config.validate()?;
    if !config.breakdowns_enabled {
        return Ok(Vec::new());
    }
    let gaps = failure_distribution(config, mean_duration)?;
    let (mu, sd) = config.repair_params(mean_duration);
    let repair = Normal::new(mu, sd).map_err(|_| DomainError::Parameter {
        name: "repair_std",
        value: sd,
        rule: ">= 0",
    })?;
    let mut out = Vec::new();
    let mut t = 0u64;
    loop {
        let gap = gaps.sample(rng).ceil().max(1.0) as u64;
        let start = t.saturating_add(gap);
        if start >= horizon {
            break;
        }
        let len = truncated_at_one(&repair, rng).ceil() as u64;
        out.push(Interval { start, end: start + len });
        t = start + len;
    }
    Ok(out)
}

/// Rejection-sample `dist` conditioned on `x >= 1`.
fn truncated_at_one<R: Rng + ?Sized>(dist: &Normal<f64>, rng: &mut R) -> f64 {
    for _ in 0..256 {
        let x = dist.sample(rng);
        if x >= 1.0 {
            return x;
        }
    }
    1.0
}

/// Gamma law of operation arrivals for skewness `s` and horizon `h`.
pub fn arrival_distribution(s: f64, horizon: f64) -> Result<Gamma<f64>, DomainError> {
    let s = s.clamp(MIN_SKEW, 1.0);
    check("horizon", horizon, horizon > 0.0, "> 0")?;
    Gamma::new(10.0 * s, 0.1 * horizon).map_err(|_| DomainError::Parameter {
        name: "skew",
        value: s,
        rule: "> 0",
    })
}

/// Release steps for one job: `job_length` sorted Gamma draws, floored.
/// Returns the job's skewness alongside.
pub fn sample_arrivals<R: Rng + ?Sized>(
    job_length: usize,
    horizon: u64,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<(f64, Vec<u64>), DomainError> {
    config.validate()?;
    if !config.arrivals_enabled {
        return Ok((0.0, vec![0; job_length]));
    }
    let (lo, hi) = config.skew_range;
    let s = if hi > lo { rng.random_range(lo..=hi) } else { lo }.clamp(MIN_SKEW, 1.0);
    let dist = arrival_distribution(s, horizon as f64)?;
    let mut draws: Vec<f64> = (0..job_length).map(|_| dist.sample(rng)).collect();
    draws.sort_by(f64::total_cmp);
    Ok((s, draws.into_iter().map(|x| x.floor() as u64).collect()))
}

/// Scenario for a seeded run. Machine `m` and job `j` draw from their own
/// sub-streams, so resizing the instance leaves other streams untouched.
pub fn build_scenario(instance: &JsspInstance, config: &ScenarioConfig) -> Result<ScenarioTrace, DomainError> {
    build_scenario_with_horizon(instance, config, horizon_estimate(instance))
}

pub fn build_scenario_with_horizon(
    instance: &JsspInstance,
    config: &ScenarioConfig,
    horizon: u64,
) -> Result<ScenarioTrace, DomainError> {
    config.validate()?;
    let horizon = horizon.max(1);
    let mean = instance.mean_duration();
    let breakdowns = (0..instance.n_machines())
        .map(|m| {
            let mut rng = sub_stream(config.seed, MACHINE_STREAM | m as u64);
            sample_breakdowns(horizon * BREAKDOWN_HORIZON_FACTOR, mean, config, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut releases = Vec::with_capacity(instance.n_jobs());
    let mut skews = Vec::with_capacity(instance.n_jobs());
    for (j, ops) in instance.jobs().iter().enumerate() {
        let mut rng = sub_stream(config.seed, JOB_STREAM | j as u64);
        let (s, r) = sample_arrivals(ops.len(), horizon, config, &mut rng)?;
        skews.push(s);
        releases.push(r);
    }
    Ok(ScenarioTrace {
        breakdowns,
        releases,
        skews,
    })
}
