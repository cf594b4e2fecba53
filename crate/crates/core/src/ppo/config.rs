use serde::{Deserialize, Serialize};

use super::PpoError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskingMode {
    /// Invalid logits are masked before sampling.
    #[default]
    Masked,
    /// The agent samples from the raw softmax; the environment replaces an
    /// invalid choice with a uniformly random valid one.
    UnmaskedFallback,
}

/// PPO hyperparameters. Loadable from TOML; missing keys take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    /// Decay the clip range linearly to 0 over training.
    pub clip_decay: bool,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to 0 over training.
    pub lr_decay: bool,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Weight of the invalid-probability penalty; 0 disables it.
    pub lambda_inv: f64,
    pub rollout_length: usize,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub total_steps: u64,
    /// Greedy evaluation every this many iterations (0 = never).
    pub eval_interval: usize,
    pub eval_runs: usize,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    pub checkpoint_interval: usize,
    pub seed: u64,
    pub masking_mode: MaskingMode,
    pub hidden: Vec<usize>,
    /// Gradient-norm clip applied to actor and critic separately (0 = off).
    pub max_grad_norm: f64,
    pub n_envs: usize,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            clip_decay: false,
            learning_rate: 3e-4,
            lr_decay: false,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lambda_inv: 0.0,
            rollout_length: 2048,
            epochs_per_update: 10,
            minibatch_size: 256,
            total_steps: 500_000,
            eval_interval: 1,
            eval_runs: 5,
            checkpoint_interval: 0,
            seed: 0,
            masking_mode: MaskingMode::Masked,
            hidden: vec![128, 128],
            max_grad_norm: 0.5,
            n_envs: 1,
            adam_eps: 1e-5,
        }
    }
}

/// Penalty weight used when the invalid-action term is switched on.
pub const DEFAULT_LAMBDA_INV: f64 = 0.5;

impl TrainConfig {
    /// Budget used for small (5x4-class) instances.
    pub fn small_preset() -> Self {
        Self::default()
    }

    /// Budget used for the 15x15 masking ablation.
    pub fn ablation_preset(mode: MaskingMode) -> Self {
        Self {
            total_steps: 5_000_000,
            masking_mode: mode,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PpoError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PpoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn iterations(&self) -> usize {
        self.total_steps.div_ceil(self.rollout_length as u64) as usize
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !unit(self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for (v, name) in [
            (self.value_coef, "value_coef"),
            (self.entropy_coef, "entropy_coef"),
            (self.lambda_inv, "lambda_inv"),
            (self.max_grad_norm, "max_grad_norm"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PpoError::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.rollout_length == 0 || self.epochs_per_update == 0 || self.minibatch_size == 0 {
            return bad("rollout_length, epochs_per_update and minibatch_size must be positive");
        }
        if self.minibatch_size > self.rollout_length {
            return bad("minibatch_size must not exceed rollout_length");
        }
        if self.n_envs == 0 || self.n_envs > self.rollout_length {
            return bad("n_envs must lie in [1, rollout_length]");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.eval_interval > 0 && self.eval_runs == 0 {
            return bad("eval_runs must be positive when evaluation is enabled");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }
}
