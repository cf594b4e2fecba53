//! Proximal policy optimization with action masking.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disruptions::{build_scenario, sub_stream, DomainError, ScenarioConfig};
use crate::env::{EnvError, JobShopEnv, JsspInstance};
use crate::policy::{checkpoint, to_scalar, MaskedDistribution, PolicyError, PolicyParams};
use crate::Scalar;

mod adam;
mod config;
mod gae;
mod rollout;
mod update;

pub use adam::Adam;
pub use config::{MaskingMode, TrainConfig, DEFAULT_LAMBDA_INV};
pub use gae::gae;
pub use rollout::{collect_rollouts, compute_gae, episode_seed, EpisodeSource, RolloutBatch, VecEnv};
pub use update::{batch_loss, minibatch_loss, normalized_advantages, ppo_update, UpdateMetrics};

const EVAL_STREAM: u64 = 4 << 32;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scenario(#[from] DomainError),
    #[error("non-finite value during update: {0}")]
    NonFinite(String),
    #[error("{0} runs requested but only {1} seeds given")]
    NotEnoughSeeds(usize, usize),
    #[error("io: {0}")]
    Io(String),
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub steps: u64,
    /// Mean return of the last 100 finished episodes (NaN before the first).
    pub ep_reward_mean: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub invalid_prob_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub iteration: usize,
    pub mean_makespan: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    /// Parameters after the last update.
    pub params: PolicyParams<S>,
    /// Parameters with the lowest greedy evaluation makespan (the final ones if evaluation is off).
    pub best: PolicyParams<S>,
    pub best_eval: Option<f64>,
    pub log: Vec<LogRow>,
    pub evals: Vec<EvalPoint>,
    pub steps: u64,
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("log row serializes");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Seeds used for periodic greedy evaluation during training.
pub fn eval_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = sub_stream(seed, EVAL_STREAM);
    (0..n).map(|_| rng.random()).collect()
}

/// Roll out the argmax action of the masked policy; returns the makespan.
pub fn greedy_rollout<S: Scalar>(params: &PolicyParams<S>, env: &mut JobShopEnv) -> Result<u64, PpoError> {
    while !env.is_done() {
        let z = params.logits(&to_scalar::<S>(&env.observe()))?;
        let a = MaskedDistribution::new(z, env.mask())?.argmax();
        env.step(a)?;
    }
    Ok(env.makespan())
}

/// Greedy makespans for runs `0..n_runs`, run `r` using `seeds[r]`.
pub fn evaluate_greedy<S: Scalar>(
    params: &PolicyParams<S>,
    instance: &Arc<JsspInstance>,
    scenario: &ScenarioConfig,
    seeds: &[u64],
    n_runs: usize,
) -> Result<Vec<u64>, PpoError> {
    if n_runs > seeds.len() {
        return Err(PpoError::NotEnoughSeeds(n_runs, seeds.len()));
    }
    seeds[..n_runs]
        .iter()
        .map(|&s| {
            let trace = build_scenario(instance, &scenario.with_seed(s))?;
            let mut env = JobShopEnv::new(instance.clone(), trace)?;
            greedy_rollout(params, &mut env)
        })
        .collect()
}

/// Stateful training loop; [`train`] drives it to completion.
pub struct Trainer<S> {
    pub cfg: TrainConfig,
    scenario: ScenarioConfig,
    pub params: PolicyParams<S>,
    opt: Adam<S>,
    venv: VecEnv,
    rng: ChaCha8Rng,
    iteration: usize,
    steps: u64,
    log: Vec<LogRow>,
    evals: Vec<EvalPoint>,
    best: Option<(f64, PolicyParams<S>)>,
    eval_seeds: Vec<u64>,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(instance: Arc<JsspInstance>, scenario: &ScenarioConfig, cfg: &TrainConfig) -> Result<Self, PpoError> {
        cfg.validate()?;
        scenario.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = PolicyParams::new(instance.observation_len(), instance.n_jobs(), &cfg.hidden, &mut rng);
        Self::with_params(instance, scenario, cfg, params, rng)
    }

    /// Continue from given parameters (fresh optimizer state).
    pub fn from_params(
        instance: Arc<JsspInstance>,
        scenario: &ScenarioConfig,
        cfg: &TrainConfig,
        params: PolicyParams<S>,
    ) -> Result<Self, PpoError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::with_params(instance, scenario, cfg, params, rng)
    }

    fn with_params(
        instance: Arc<JsspInstance>,
        scenario: &ScenarioConfig,
        cfg: &TrainConfig,
        params: PolicyParams<S>,
        rng: ChaCha8Rng,
    ) -> Result<Self, PpoError> {
        if params.obs_len() != instance.observation_len() || params.n_actions() != instance.n_jobs() {
            return Err(PolicyError::ShapeMismatch {
                expected: instance.observation_len(),
                got: params.obs_len(),
            }
            .into());
        }
        let venv = VecEnv::new(EpisodeSource::new(instance, scenario.clone(), cfg.seed), cfg.n_envs)?;
        Ok(Self {
            opt: Adam::new(&params, cfg.adam_eps),
            cfg: cfg.clone(),
            scenario: scenario.clone(),
            params,
            venv,
            rng,
            iteration: 0,
            steps: 0,
            log: Vec::new(),
            evals: Vec::new(),
            best: None,
            eval_seeds: eval_seeds(cfg.seed, cfg.eval_runs),
        })
    }

    pub fn finished(&self) -> bool {
        self.steps >= self.cfg.total_steps
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    fn progress_left(&self) -> f64 {
        1.0 - self.iteration as f64 / self.cfg.iterations().max(1) as f64
    }

    /// Mean greedy makespan over the evaluation seeds.
    pub fn evaluate(&self) -> Result<f64, PpoError> {
        let ms = evaluate_greedy(
            &self.params,
            self.venv.instance(),
            &self.scenario,
            &self.eval_seeds,
            self.eval_seeds.len(),
        )?;
        Ok(ms.iter().sum::<u64>() as f64 / ms.len() as f64)
    }

    /// Collect, update, log and (when due) evaluate once.
    pub fn iterate(&mut self) -> Result<&LogRow, PpoError> {
        let frac = self.progress_left();
        let clip = if self.cfg.clip_decay { self.cfg.clip_eps * frac } else { self.cfg.clip_eps }.max(1e-6);
        let lr = if self.cfg.lr_decay { self.cfg.learning_rate * frac } else { self.cfg.learning_rate };
        let batch = collect_rollouts(&self.params, &mut self.venv, &self.cfg, &mut self.rng)?;
        let m = ppo_update(&mut self.params, &mut self.opt, &batch, &self.cfg, clip, lr, &mut self.rng)?;
        self.iteration += 1;
        self.steps += batch.len() as u64;
        if self.cfg.eval_interval > 0 && self.iteration % self.cfg.eval_interval == 0 {
            let score = self.evaluate()?;
            self.evals.push(EvalPoint {
                iteration: self.iteration,
                mean_makespan: score,
            });
            if self.best.as_ref().is_none_or(|(b, _)| score < *b) {
                self.best = Some((score, self.params.clone()));
            }
        }
        self.log.push(LogRow {
            iteration: self.iteration,
            steps: self.steps,
            ep_reward_mean: self.venv.recent_return_mean().unwrap_or(f64::NAN),
            policy_loss: m.policy_loss,
            value_loss: m.value_loss,
            entropy: m.entropy,
            clip_fraction: m.clip_fraction,
            approx_kl: m.approx_kl,
            invalid_prob_mass: m.invalid_prob_mass,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn into_outcome(self) -> TrainOutcome<S> {
        let (best_eval, best) = match self.best {
            Some((s, p)) => (Some(s), p),
            None => (None, self.params.clone()),
        };
        TrainOutcome {
            params: self.params,
            best,
            best_eval,
            log: self.log,
            evals: self.evals,
            steps: self.steps,
        }
    }
}

/// Train to `cfg.total_steps`. With `out_dir`, writes `train_log.csv`,
/// `final.json`, `best.json` and periodic `checkpoint_<iter>.json`.
pub fn train<S: Scalar>(
    instance: Arc<JsspInstance>,
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<S>, PpoError> {
    let mut t = Trainer::new(instance, scenario, cfg)?;
    let io = |e: std::io::Error| PpoError::Io(e.to_string());
    if let Some(d) = out_dir {
        fs::create_dir_all(d).map_err(io)?;
    }
    let meta = |steps: u64| BTreeMap::from([("steps".to_string(), steps.to_string())]);
    while !t.finished() {
        t.iterate()?;
        if let (Some(d), k) = (out_dir, cfg.checkpoint_interval) {
            if k > 0 && t.iteration % k == 0 {
                let p: PathBuf = d.join(format!("checkpoint_{}.json", t.iteration));
                checkpoint::save(&t.params, &meta(t.steps), &p)?;
            }
        }
    }
    let out = t.into_outcome();
    if let Some(d) = out_dir {
        fs::write(d.join("train_log.csv"), log_csv(&out.log)).map_err(io)?;
        checkpoint::save(&out.params, &meta(out.steps), &d.join("final.json"))?;
        checkpoint::save(&out.best, &meta(out.steps), &d.join("best.json"))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
