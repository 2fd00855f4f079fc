//! Adam optimizer over the flat parameter vector.
//!
//! Moments live in visit order (the same fixed order `Policy::flatten`
//! uses), so the optimizer state survives independently of how tensors are
//! nested. Update per step `t`:
//!
//! ```text
//! m <- b1 m + (1-b1) g        mhat = m / (1 - b1^t)
//! v <- b2 v + (1-b2) g^2      vhat = v / (1 - b2^t)
//! p <- p - lr * mhat / (sqrt(vhat) + 1e-8)
//! ```

use crate::policy::Policy;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    m: Vec<S>,
    v: Vec<S>,
    t: u32,
}

impl<S: Real> Adam<S> {
    pub fn new(param_count: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr: S::cast(lr),
            beta1: S::cast(beta1),
            beta2: S::cast(beta2),
            eps: S::cast(1e-8),
            m: vec![S::zero(); param_count],
            v: vec![S::zero(); param_count],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// One update on a flat parameter vector.
    pub fn update(&mut self, params: &mut [S], grads: &[S]) {
        assert_eq!(params.len(), self.m.len(), "optimizer built for another model");
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let one = S::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }

    /// Update a policy in place, then re-project constrained tensors
    /// (strictly positive time constants).
    pub fn step_policy(&mut self, policy: &mut Policy<S>, grads: &Policy<S>) {
        let mut flat = policy.flatten();
        let g = grads.flatten();
        self.update(&mut flat, &g);
        policy.assign_from_flat(&flat).expect("same policy, same length");
        policy.project();
    }
}
