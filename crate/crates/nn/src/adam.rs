//! Adam with bias correction and a per-epoch inverse-time-decay schedule.

use crate::{NnError, Params, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_DECAY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Number of completed steps.
    pub t: u64,
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub decay: f64,
    pub steps_per_epoch: u64,
}

impl AdamState {
    /// Zeroed moment buffers shaped like `params`.
    pub fn new<P: Params + ?Sized>(params: &P, lr0: f64, decay: f64, steps_per_epoch: u64) -> Self {
        let shapes: Vec<usize> = params.param_blocks().iter().map(|b| b.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPS,
            decay,
            steps_per_epoch: steps_per_epoch.max(1),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.t / self.steps_per_epoch
    }

    /// Learning rate applied by the next step.
    pub fn current_lr(&self) -> f64 {
        self.lr0 / (1.0 + self.decay * self.epoch() as f64)
    }

    /// Applies one update. Gradients are checked before anything is touched,
    /// so a rejected step leaves both the parameters and the state unchanged.
    pub fn step<P: Params + ?Sized>(&mut self, params: &mut P, grads: &[Vec<f64>]) -> Result<()> {
        let mut blocks = params.param_blocks_mut();
        if blocks.len() != grads.len() || blocks.len() != self.m.len() {
            return Err(NnError::Shape(format!(
                "{} parameter blocks, {} gradient blocks, {} moment blocks",
                blocks.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in blocks.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(NnError::Shape(format!("block {i} has mismatched lengths")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient { block: i });
            }
        }
        let lr = self.current_lr();
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        for (i, p) in blocks.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for (k, &g) in grads[i].iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let update = lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + self.eps);
                if update != 0.0 {
                    p[k] -= update;
                }
            }
        }
        Ok(())
    }
}
