use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use super::{gae, MaskingMode, PpoError, TrainConfig};
use crate::disruptions::{build_scenario_with_horizon, sub_stream, ScenarioConfig};
use crate::env::{horizon_estimate, JobShopEnv, JsspInstance};
use crate::policy::{to_scalar, MaskedDistribution, PolicyParams};
use crate::Scalar;

const EPISODE_STREAM: u64 = 3 << 32;
const REWARD_WINDOW: usize = 100;

/// Scenario seed for training episode `episode` of a run seeded with `seed`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    sub_stream(seed, EPISODE_STREAM | (episode & 0xffff_ffff)).random()
}

/// Fresh environments for one instance, each with its own seeded scenario.
#[derive(Clone, Debug)]
pub struct EpisodeSource {
    instance: Arc<JsspInstance>,
    scenario: ScenarioConfig,
    horizon: u64,
    seed: u64,
    next_episode: u64,
}

impl EpisodeSource {
    pub fn new(instance: Arc<JsspInstance>, scenario: ScenarioConfig, seed: u64) -> Self {
        let horizon = horizon_estimate(&instance);
        Self {
            instance,
            scenario,
            horizon,
            seed,
            next_episode: 0,
        }
    }

    pub fn instance(&self) -> &Arc<JsspInstance> {
        &self.instance
    }

    pub fn next_env(&mut self) -> Result<JobShopEnv, PpoError> {
        let cfg = self.scenario.with_seed(episode_seed(self.seed, self.next_episode));
        self.next_episode += 1;
        let trace = build_scenario_with_horizon(&self.instance, &cfg, self.horizon)?;
        Ok(JobShopEnv::with_horizon(self.instance.clone(), trace, self.horizon)?)
    }
}

/// Several running episodes stepped round-robin.
#[derive(Clone, Debug)]
pub struct VecEnv {
    source: EpisodeSource,
    envs: Vec<JobShopEnv>,
    running_return: Vec<f64>,
    finished: VecDeque<f64>,
    episodes: u64,
}

impl VecEnv {
    pub fn new(mut source: EpisodeSource, n_envs: usize) -> Result<Self, PpoError> {
        let envs = (0..n_envs).map(|_| source.next_env()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            source,
            running_return: vec![0.0; envs.len()],
            envs,
            finished: VecDeque::with_capacity(REWARD_WINDOW),
            episodes: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn instance(&self) -> &Arc<JsspInstance> {
        self.source.instance()
    }

    /// Mean return of the last (up to) 100 finished episodes.
    pub fn recent_return_mean(&self) -> Option<f64> {
        (!self.finished.is_empty()).then(|| self.finished.iter().sum::<f64>() / self.finished.len() as f64)
    }

    pub fn episodes_finished(&self) -> u64 {
        self.episodes
    }
}

/// Transitions from one collection phase, in collection order.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch<S> {
    pub obs: Vec<Vec<S>>,
    pub masks: Vec<Vec<bool>>,
    /// Action sampled by the agent (before any fallback).
    pub actions: Vec<usize>,
    pub log_probs: Vec<S>,
    pub rewards: Vec<S>,
    pub values: Vec<S>,
    pub dones: Vec<bool>,
    pub env_ids: Vec<usize>,
    /// Value of each environment's state after the last transition.
    pub last_values: Vec<S>,
    pub advantages: Vec<S>,
    pub returns: Vec<S>,
    pub mode: MaskingMode,
    /// Sampled actions the environment had to replace (fallback mode only).
    pub fallbacks: usize,
    /// Returns of episodes that ended during collection.
    pub finished_returns: Vec<f64>,
}

impl<S: Scalar> RolloutBatch<S> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Distribution the agent samples from in this batch's mode.
    pub fn distribution(&self, logits: Vec<S>, t: usize) -> Result<MaskedDistribution<S>, PpoError> {
        Ok(match self.mode {
            MaskingMode::Masked => MaskedDistribution::new(logits, self.masks[t].clone())?,
            MaskingMode::UnmaskedFallback => MaskedDistribution::unmasked(logits),
        })
    }
}

/// Run the policy for `cfg.rollout_length` steps, restarting finished episodes
/// with fresh scenarios, then fill in advantages and returns.
pub fn collect_rollouts<S: Scalar, R: Rng + ?Sized>(
    params: &PolicyParams<S>,
    venv: &mut VecEnv,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<RolloutBatch<S>, PpoError> {
    let n = cfg.rollout_length;
    let mut b = RolloutBatch {
        obs: Vec::with_capacity(n),
        masks: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        log_probs: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        env_ids: Vec::with_capacity(n),
        last_values: Vec::new(),
        advantages: Vec::new(),
        returns: Vec::new(),
        mode: cfg.masking_mode,
        fallbacks: 0,
        finished_returns: Vec::new(),
    };
    for step in 0..n {
        let i = step % venv.envs.len();
        let env = &mut venv.envs[i];
        let obs: Vec<S> = to_scalar(&env.observe());
        let mask = env.mask();
        let (z, v) = params.forward(&obs)?;
        b.obs.push(obs);
        b.masks.push(mask);
        let dist = b.distribution(z, step)?;
        let a = dist.sample(rng);
        let executed = match cfg.masking_mode {
            MaskingMode::Masked => a,
            MaskingMode::UnmaskedFallback => env.fallback_action(a, rng)?,
        };
        b.fallbacks += usize::from(executed != a);
        let res = env.step(executed)?;
        b.actions.push(a);
        b.log_probs.push(dist.log_prob(a)?);
        b.values.push(v);
        b.rewards.push(S::of(res.reward));
        b.dones.push(res.done);
        b.env_ids.push(i);
        venv.running_return[i] += res.reward;
        if res.done {
            let ret = std::mem::take(&mut venv.running_return[i]);
            b.finished_returns.push(ret);
            if venv.finished.len() == REWARD_WINDOW {
                venv.finished.pop_front();
            }
            venv.finished.push_back(ret);
            venv.episodes += 1;
            venv.envs[i] = venv.source.next_env()?;
        }
    }
    b.last_values = venv
        .envs
        .iter()
        .map(|e| params.value(&to_scalar(&e.observe())))
        .collect::<Result<_, _>>()?;
    compute_gae(&mut b, cfg.gamma, cfg.gae_lambda);
    Ok(b)
}

/// Advantages and returns, computed separately along each environment's stream.
pub fn compute_gae<S: Scalar>(b: &mut RolloutBatch<S>, gamma: f64, lambda: f64) {
    b.advantages = vec![S::zero(); b.len()];
    b.returns = vec![S::zero(); b.len()];
    for (env, &last) in b.last_values.iter().enumerate() {
        let idx: Vec<usize> = (0..b.len()).filter(|&t| b.env_ids[t] == env).collect();
        let pick = |v: &[S]| idx.iter().map(|&t| v[t]).collect::<Vec<_>>();
        let dones: Vec<bool> = idx.iter().map(|&t| b.dones[t]).collect();
        let (adv, ret) = gae(&pick(&b.rewards), &pick(&b.values), &dones, last, S::of(gamma), S::of(lambda));
        for (k, &t) in idx.iter().enumerate() {
            b.advantages[t] = adv[k];
            b.returns[t] = ret[k];
        }
    }
}
