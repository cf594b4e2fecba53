use crate::Scalar;

/// Generalized advantage estimation over one environment's contiguous stream.
///
/// `last_value` bootstraps the state after the final transition; it is
/// ignored when that transition is terminal.
pub fn gae<S: Scalar>(rewards: &[S], values: &[S], dones: &[bool], last_value: S, gamma: S, lambda: S) -> (Vec<S>, Vec<S>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![S::zero(); n];
    let mut next_adv = S::zero();
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { S::zero() } else { S::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, ret)
}
