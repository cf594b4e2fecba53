//! Softmax distributions over job-selection actions with logit masking.

use rand::Rng;

use super::PolicyError;
use crate::Scalar;

/// Magnitude substituted for invalid logits.
pub const MASK_PENALTY: f64 = 1e8;

/// Replace invalid logits by `-MASK_PENALTY`.
pub fn mask_logits<S: Scalar>(logits: &[S], mask: &[bool]) -> Result<Vec<S>, PolicyError> {
    if logits.len() != mask.len() {
        return Err(PolicyError::LengthMismatch {
            logits: logits.len(),
            mask: mask.len(),
        });
    }
    if !mask.iter().any(|&v| v) {
        return Err(PolicyError::AllMasked);
    }
    Ok(logits
        .iter()
        .zip(mask)
        .map(|(&z, &v)| if v { z } else { -S::of(MASK_PENALTY) })
        .collect())
}

/// Max-subtracted log-softmax.
pub fn log_softmax<S: Scalar>(z: &[S]) -> Vec<S> {
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    let log_sum = z.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
    z.iter().map(|&v| v - max - log_sum).collect()
}

pub fn softmax<S: Scalar>(z: &[S]) -> Vec<S> {
    log_softmax(z).into_iter().map(S::exp).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedDistribution<S> {
    logits: Vec<S>,
    mask: Vec<bool>,
    log_probs: Vec<S>,
    probs: Vec<S>,
}

impl<S: Scalar> MaskedDistribution<S> {
    pub fn new(logits: Vec<S>, mask: Vec<bool>) -> Result<Self, PolicyError> {
        let log_probs = log_softmax(&mask_logits(&logits, &mask)?);
        let probs = log_probs.iter().map(|&l| l.exp()).collect();
        Ok(Self {
            logits,
            mask,
            log_probs,
            probs,
        })
    }

    /// Plain softmax over every action.
    pub fn unmasked(logits: Vec<S>) -> Self {
        let n = logits.len();
        Self::new(logits, vec![true; n]).expect("nonempty logits")
    }

    pub fn logits(&self) -> &[S] {
        &self.logits
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn log_prob(&self, action: usize) -> Result<S, PolicyError> {
        match self.mask.get(action) {
            Some(true) => Ok(self.log_probs[action]),
            _ => Err(PolicyError::InvalidAction(action)),
        }
    }

    /// Entropy over the valid support.
    pub fn entropy(&self) -> S {
        self.valid()
            .map(|i| self.probs[i] * self.log_probs[i])
            .fold(S::zero(), |acc, v| acc - v)
    }

    pub fn log_prob_and_entropy(&self, action: usize) -> Result<(S, S), PolicyError> {
        Ok((self.log_prob(action)?, self.entropy()))
    }

    fn valid(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i)
    }

    /// Inverse-CDF sample restricted to valid actions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = S::of(rng.random::<f64>());
        let mut acc = S::zero();
        let mut last = 0;
        for i in self.valid() {
            acc += self.probs[i];
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    /// Most probable valid action, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = None;
        for i in self.valid() {
            if best.is_none_or(|b: usize| self.probs[i] > self.probs[b]) {
                best = Some(i);
            }
        }
        best.expect("at least one valid action")
    }

    /// Gradient of `log π(action)` with respect to the logits: `1{i=j} − π_j`.
    pub fn log_prob_grad(&self, action: usize) -> Result<Vec<S>, PolicyError> {
        self.log_prob(action)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| if j == action { S::one() - p } else { -p })
            .collect())
    }

    /// Gradient of the valid-support entropy: `−π_j (log π_j + H)` on valid `j`.
    pub fn entropy_grad(&self) -> Vec<S> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .zip(&self.mask)
            .map(|((&p, &lp), &v)| if v { -p * (lp + h) } else { S::zero() })
            .collect()
    }
}

/// Policy-gradient signal on the logits for a sampled action: `Â (1{i=j} − π_j)`.
pub fn policy_gradient_logits<S: Scalar>(
    dist: &MaskedDistribution<S>,
    action: usize,
    advantage: S,
) -> Result<Vec<S>, PolicyError> {
    Ok(dist.log_prob_grad(action)?.into_iter().map(|g| g * advantage).collect())
}

/// `λ Σ_{invalid} p_i` under the unmasked softmax, and its logit gradient
/// `λ p_j (1{j invalid} − Σ_{invalid} p_i)`.
pub fn invalid_penalty<S: Scalar>(raw_logits: &[S], mask: &[bool], lambda: S) -> Result<(S, Vec<S>), PolicyError> {
    if raw_logits.len() != mask.len() {
        return Err(PolicyError::LengthMismatch {
            logits: raw_logits.len(),
            mask: mask.len(),
        });
    }
    let p = softmax(raw_logits);
    let mass: S = p.iter().zip(mask).filter(|(_, &v)| !v).map(|(&pi, _)| pi).sum();
    let grad = p
        .iter()
        .zip(mask)
        .map(|(&pj, &v)| {
            let ind = if v { S::zero() } else { S::one() };
            lambda * pj * (ind - mass)
        })
        .collect();
    Ok((lambda * mass, grad))
}
