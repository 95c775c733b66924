//! Exogenous mean-reverting "true value" process.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::types::{Nanos, Price};

/// Discrete mean-reverting process stepped on a fixed grid:
///
/// `v' = max(0, round(kappa * mean + (1 - kappa) * v + eps))`, `eps ~ N(0, shock_variance)`.
///
/// The process is advanced lazily up to whatever time is queried, so its
/// path depends only on its own random stream.
#[derive(Debug, Clone)]
pub struct FundamentalProcess {
    pub mean: Price,
    pub kappa: f64,
    pub shock_variance: f64,
    pub step_ns: Nanos,
    value: Price,
    steps_taken: u64,
    rng: ChaCha8Rng,
}

impl FundamentalProcess {
    pub fn new(
        mean: Price,
        kappa: f64,
        shock_variance: f64,
        step_ns: Nanos,
        initial: Price,
        rng: ChaCha8Rng,
    ) -> Self {
        FundamentalProcess {
            mean,
            kappa,
            shock_variance,
            step_ns: step_ns.max(1),
            value: initial.max(0),
            steps_taken: 0,
            rng,
        }
    }

    pub fn value(&self) -> Price {
        self.value
    }

    /// Value at time `t`. Times earlier than the last query return the
    /// current value; the kernel never asks for the past.
    pub fn value_at(&mut self, t: Nanos) -> Price {
        let target = t / self.step_ns;
        while self.steps_taken < target {
            self.value = fundamental_step(
                self.value,
                self.mean,
                self.kappa,
                self.shock_variance,
                &mut self.rng,
            );
            self.steps_taken += 1;
        }
        self.value
    }
}

/// One step of the mean-reverting recursion.
pub fn fundamental_step(
    value: Price,
    mean: Price,
    kappa: f64,
    shock_variance: f64,
    rng: &mut ChaCha8Rng,
) -> Price {
    let shock = if shock_variance > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        z * shock_variance.sqrt()
    } else {
        0.0
    };
    let next = kappa * mean as f64 + (1.0 - kappa) * value as f64 + shock;
    (next.round() as Price).max(0)
}
