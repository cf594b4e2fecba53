use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, PpoError, RolloutBatch, TrainConfig};
use crate::policy::{invalid_penalty, PolicyParams};
use crate::Scalar;

const ADV_STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub invalid_prob_mass: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub total_loss: f64,
}

impl UpdateMetrics {
    fn add(&mut self, o: &Self, w: f64) {
        self.policy_loss += w * o.policy_loss;
        self.value_loss += w * o.value_loss;
        self.entropy += w * o.entropy;
        self.invalid_prob_mass += w * o.invalid_prob_mass;
        self.clip_fraction += w * o.clip_fraction;
        self.approx_kl += w * o.approx_kl;
        self.total_loss += w * o.total_loss;
    }

    fn check_finite(&self) -> Result<(), PpoError> {
        for (v, name) in [
            (self.policy_loss, "policy loss"),
            (self.value_loss, "value loss"),
            (self.entropy, "entropy"),
            (self.invalid_prob_mass, "invalid penalty"),
        ] {
            if !v.is_finite() {
                return Err(PpoError::NonFinite(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

/// Mean/std normalized advantages (population std, floored).
pub fn normalized_advantages<S: Scalar>(adv: &[S]) -> Vec<S> {
    let n = adv.len().max(1) as f64;
    let mean = adv.iter().map(|a| a.as_f64()).sum::<f64>() / n;
    let var = adv.iter().map(|a| (a.as_f64() - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(ADV_STD_FLOOR);
    adv.iter().map(|a| S::of((a.as_f64() - mean) / std)).collect()
}

/// Loss terms averaged over `idx`, and optionally their parameter gradient.
///
/// `total = −clipped surrogate + C1·value + λ_inv·invalid mass − entropy_coef·entropy`.
pub fn minibatch_loss<S: Scalar>(
    params: &PolicyParams<S>,
    batch: &RolloutBatch<S>,
    adv: &[S],
    idx: &[usize],
    cfg: &TrainConfig,
    clip_eps: f64,
    grads: Option<&mut PolicyParams<S>>,
) -> Result<UpdateMetrics, PpoError> {
    let inv_n = S::of(1.0 / idx.len() as f64);
    let eps = S::of(clip_eps);
    let (c1, ent_c, lam) = (S::of(cfg.value_coef), S::of(cfg.entropy_coef), S::of(cfg.lambda_inv));
    let mut m = UpdateMetrics::default();
    let mut grads = grads;
    for &t in idx {
        let (z, v, cache) = params.forward_cached(&batch.obs[t])?;
        let dist = batch.distribution(z.clone(), t)?;
        let a = batch.actions[t];
        let logp = dist.log_prob(a)?;
        let log_ratio = logp - batch.log_probs[t];
        let ratio = log_ratio.exp();
        let clipped = ratio.max(S::one() - eps).min(S::one() + eps);
        let unclipped_obj = ratio * adv[t];
        let clipped_obj = clipped * adv[t];
        let surrogate = unclipped_obj.min(clipped_obj);
        let diff = v - batch.returns[t];
        let entropy = dist.entropy();
        let (mass, d_mass) = invalid_penalty(&z, &batch.masks[t], S::one())?;

        m.policy_loss -= surrogate.as_f64();
        m.value_loss += (diff * diff).as_f64();
        m.entropy += entropy.as_f64();
        m.invalid_prob_mass += mass.as_f64();
        m.clip_fraction += f64::from(u8::from((ratio - S::one()).abs() > eps));
        m.approx_kl += ((ratio - S::one()) - log_ratio).as_f64();

        if let Some(g) = grads.as_deref_mut() {
            let mut dz = vec![S::zero(); z.len()];
            // gradient flows through the surrogate only where the unclipped term is the minimum
            if unclipped_obj <= clipped_obj && adv[t] != S::zero() {
                let k = -ratio * adv[t] * inv_n;
                for (d, lg) in dz.iter_mut().zip(dist.log_prob_grad(a)?) {
                    *d += k * lg;
                }
            }
            if cfg.entropy_coef > 0.0 {
                for (d, eg) in dz.iter_mut().zip(dist.entropy_grad()) {
                    *d -= ent_c * inv_n * eg;
                }
            }
            if cfg.lambda_inv > 0.0 {
                for (d, pg) in dz.iter_mut().zip(d_mass) {
                    *d += lam * inv_n * pg;
                }
            }
            params.accumulate(&cache, &dz, S::of(2.0) * c1 * diff * inv_n, g);
        }
    }
    let n = idx.len() as f64;
    for x in [
        &mut m.policy_loss,
        &mut m.value_loss,
        &mut m.entropy,
        &mut m.invalid_prob_mass,
        &mut m.clip_fraction,
        &mut m.approx_kl,
    ] {
        *x /= n;
    }
    m.total_loss =
        m.policy_loss + cfg.value_coef * m.value_loss + cfg.lambda_inv * m.invalid_prob_mass - cfg.entropy_coef * m.entropy;
    m.check_finite()?;
    Ok(m)
}

/// Total loss over the whole batch at the current parameters.
pub fn batch_loss<S: Scalar>(
    params: &PolicyParams<S>,
    batch: &RolloutBatch<S>,
    cfg: &TrainConfig,
    clip_eps: f64,
) -> Result<UpdateMetrics, PpoError> {
    let adv = normalized_advantages(&batch.advantages);
    let idx: Vec<usize> = (0..batch.len()).collect();
    minibatch_loss(params, batch, &adv, &idx, cfg, clip_eps, None)
}

/// Rescale the actor and critic gradients separately to norm at most `max` (0 = off).
fn clip_grad_norm<S: Scalar>(grads: &mut PolicyParams<S>, max: f64) -> Result<(), PpoError> {
    for net in [&mut grads.actor, &mut grads.critic] {
        let norm = net.params().map(|&g| g * g).sum::<S>().sqrt().as_f64();
        if !norm.is_finite() {
            return Err(PpoError::NonFinite(format!("gradient norm = {norm}")));
        }
        if max > 0.0 && norm > max {
            let k = S::of(max / norm);
            net.params_mut().for_each(|g| *g *= k);
        }
    }
    Ok(())
}

/// Epochs of shuffled minibatch Adam steps. Returned metrics are averaged over minibatches.
pub fn ppo_update<S: Scalar, R: Rng + ?Sized>(
    params: &mut PolicyParams<S>,
    opt: &mut Adam<S>,
    batch: &RolloutBatch<S>,
    cfg: &TrainConfig,
    clip_eps: f64,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateMetrics, PpoError> {
    let adv = normalized_advantages(&batch.advantages);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut total = UpdateMetrics::default();
    let mut count = 0usize;
    let mut grads = params.zeros_like();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch_size) {
            grads.scale(S::zero());
            let m = minibatch_loss(params, batch, &adv, idx, cfg, clip_eps, Some(&mut grads))?;
            clip_grad_norm(&mut grads, cfg.max_grad_norm)?;
            opt.step(params, &grads, lr);
            if !params.is_finite() {
                return Err(PpoError::NonFinite("parameters after update".into()));
            }
            total.add(&m, 1.0);
            count += 1;
        }
    }
    let mut out = UpdateMetrics::default();
    out.add(&total, 1.0 / count as f64);
    Ok(out)
}
