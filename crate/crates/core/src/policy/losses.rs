//! Per-sample scalar loss terms with their analytic parameter gradients.
//! Each returns `(value, d value / d params)`.

use super::{invalid_penalty, MaskedDistribution, PolicyError, PolicyParams};
use crate::Scalar;

/// `(V(s) - target)^2`.
pub fn value_loss<S: Scalar>(p: &PolicyParams<S>, obs: &[S], target: S) -> Result<(S, PolicyParams<S>), PolicyError> {
    let (_, v, cache) = p.forward_cached(obs)?;
    let mut g = p.zeros_like();
    let diff = v - target;
    p.accumulate(&cache, &[], S::of(2.0) * diff, &mut g);
    Ok((diff * diff, g))
}

/// `log π(action | s)` under the masked distribution.
pub fn log_prob<S: Scalar>(
    p: &PolicyParams<S>,
    obs: &[S],
    mask: &[bool],
    action: usize,
) -> Result<(S, PolicyParams<S>), PolicyError> {
    let (z, _, cache) = p.forward_cached(obs)?;
    let d = MaskedDistribution::new(z, mask.to_vec())?;
    let mut g = p.zeros_like();
    p.accumulate(&cache, &d.log_prob_grad(action)?, S::zero(), &mut g);
    Ok((d.log_prob(action)?, g))
}

/// Entropy of the masked distribution.
pub fn entropy<S: Scalar>(p: &PolicyParams<S>, obs: &[S], mask: &[bool]) -> Result<(S, PolicyParams<S>), PolicyError> {
    let (z, _, cache) = p.forward_cached(obs)?;
    let d = MaskedDistribution::new(z, mask.to_vec())?;
    let mut g = p.zeros_like();
    p.accumulate(&cache, &d.entropy_grad(), S::zero(), &mut g);
    Ok((d.entropy(), g))
}

/// `λ Σ_invalid π_raw(a | s)`.
pub fn invalid_mass<S: Scalar>(
    p: &PolicyParams<S>,
    obs: &[S],
    mask: &[bool],
    lambda: S,
) -> Result<(S, PolicyParams<S>), PolicyError> {
    let (z, _, cache) = p.forward_cached(obs)?;
    let (loss, dz) = invalid_penalty(&z, mask, lambda)?;
    let mut g = p.zeros_like();
    p.accumulate(&cache, &dz, S::zero(), &mut g);
    Ok((loss, g))
}
