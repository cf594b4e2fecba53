//! Actor-critic networks, masked action distributions and their gradients.

use rand::Rng;
use thiserror::Error;

use crate::Scalar;

pub mod checkpoint;
mod dist;
pub mod gradcheck;
pub mod losses;
mod network;

pub use dist::{
    invalid_penalty, log_softmax, mask_logits, policy_gradient_logits, softmax, MaskedDistribution, MASK_PENALTY,
};
pub use network::{Dense, Mlp, MlpTrace};

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("observation has length {got}, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{logits} logits but {mask} mask entries")]
    LengthMismatch { logits: usize, mask: usize },
    #[error("mask has no valid action")]
    AllMasked,
    #[error("action {0} is not valid under the mask")]
    InvalidAction(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Separate actor (logits) and critic (scalar value) networks.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<S> {
    pub actor: Mlp<S>,
    pub critic: Mlp<S>,
}

/// Activations kept from [`PolicyParams::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    actor: MlpTrace<S>,
    critic: MlpTrace<S>,
}

impl<S: Scalar> PolicyParams<S> {
    /// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the actor head, 1 on the critic head.
    pub fn new<R: Rng + ?Sized>(obs_len: usize, n_actions: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_len];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::orthogonal(&sizes(n_actions), 2f64.sqrt(), 0.01, rng);
        let critic = Mlp::orthogonal(&sizes(1), 2f64.sqrt(), 1.0, rng);
        Self { actor, critic }
    }

    pub fn zeros(obs_len: usize, n_actions: usize, hidden: &[usize]) -> Self {
        let sizes = |out: usize| [&[obs_len][..], hidden, &[out]].concat();
        Self {
            actor: Mlp::zeros(&sizes(n_actions)),
            critic: Mlp::zeros(&sizes(1)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            actor: self.actor.zeros_like(),
            critic: self.critic.zeros_like(),
        }
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_len()
    }

    pub fn n_actions(&self) -> usize {
        self.actor.output_len()
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.actor.layers[..self.actor.layers.len() - 1].iter().map(|l| l.outputs).collect()
    }

    fn check(&self, obs: &[S]) -> Result<(), PolicyError> {
        if obs.len() != self.obs_len() || self.critic.input_len() != obs.len() {
            return Err(PolicyError::ShapeMismatch {
                expected: self.obs_len(),
                got: obs.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[S]) -> Result<(Vec<S>, S), PolicyError> {
        self.check(obs)?;
        Ok((self.actor.forward(obs), self.critic.forward(obs)[0]))
    }

    pub fn logits(&self, obs: &[S]) -> Result<Vec<S>, PolicyError> {
        self.check(obs)?;
        Ok(self.actor.forward(obs))
    }

    pub fn value(&self, obs: &[S]) -> Result<S, PolicyError> {
        self.check(obs)?;
        Ok(self.critic.forward(obs)[0])
    }

    pub fn forward_cached(&self, obs: &[S]) -> Result<(Vec<S>, S, ForwardCache<S>), PolicyError> {
        self.check(obs)?;
        let actor = self.actor.forward_trace(obs);
        let critic = self.critic.forward_trace(obs);
        Ok((actor.output().to_vec(), critic.output()[0], ForwardCache { actor, critic }))
    }

    /// Accumulate into `grads` the parameter gradient given d/dlogits and d/dvalue.
    pub fn accumulate(&self, cache: &ForwardCache<S>, d_logits: &[S], d_value: S, grads: &mut Self) {
        if d_logits.iter().any(|&g| g != S::zero()) {
            self.actor.backward(&cache.actor, d_logits, &mut grads.actor);
        }
        if d_value != S::zero() {
            self.critic.backward(&cache.critic, &[d_value], &mut grads.critic);
        }
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params()
    }

    pub fn params(&self) -> impl Iterator<Item = &S> {
        self.actor.params().chain(self.critic.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut S> {
        self.actor.params_mut().chain(self.critic.params_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.actor.same_shape(&other.actor) && self.critic.same_shape(&other.critic)
    }

    pub fn to_flat(&self) -> Vec<S> {
        self.params().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[S]) {
        assert_eq!(flat.len(), self.num_params());
        self.params_mut().zip(flat).for_each(|(p, &v)| *p = v);
    }

    pub fn sq_norm(&self) -> S {
        self.params().map(|&p| p * p).sum()
    }

    pub fn scale(&mut self, k: S) {
        self.params_mut().for_each(|p| *p *= k);
    }

    /// Masked distribution for one observation.
    pub fn distribution(&self, obs: &[S], mask: &[bool]) -> Result<MaskedDistribution<S>, PolicyError> {
        MaskedDistribution::new(self.logits(obs)?, mask.to_vec())
    }

    /// Total unmasked probability assigned to invalid actions.
    pub fn invalid_mass(&self, obs: &[S], mask: &[bool]) -> Result<S, PolicyError> {
        Ok(invalid_penalty(&self.logits(obs)?, mask, S::one())?.0)
    }

    /// Cast to another precision.
    pub fn cast<T: Scalar>(&self) -> PolicyParams<T> {
        let cast = |m: &Mlp<S>| Mlp {
            layers: m
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|w| T::of(w.as_f64())).collect(),
                    bias: l.bias.iter().map(|w| T::of(w.as_f64())).collect(),
                })
                .collect(),
        };
        PolicyParams {
            actor: cast(&self.actor),
            critic: cast(&self.critic),
        }
    }
}

/// Convert an environment observation into the network's scalar type.
pub fn to_scalar<S: Scalar>(obs: &[f64]) -> Vec<S> {
    obs.iter().map(|&x| S::of(x)).collect()
}
