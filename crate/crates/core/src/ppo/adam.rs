use crate::policy::PolicyParams;
use crate::Scalar;

/// Adam over all actor and critic parameters.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    m: PolicyParams<S>,
    v: PolicyParams<S>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(like: &PolicyParams<S>, eps: f64) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps,
        }
    }

    /// Descend along `grads` (a gradient of the loss to minimize).
    pub fn step(&mut self, params: &mut PolicyParams<S>, grads: &PolicyParams<S>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = S::of(lr * c2.sqrt() / c1);
        let eps = S::of(self.eps * c2.sqrt());
        for (((p, &g), m), v) in params
            .params_mut()
            .zip(grads.params())
            .zip(self.m.params_mut())
            .zip(self.v.params_mut())
        {
            *m = b1 * *m + (S::one() - b1) * g;
            *v = b2 * *v + (S::one() - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps);
        }
    }
}
