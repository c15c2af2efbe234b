//! SGD with momentum and Adam over a group of parameter tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    /// Classifier optimizer settings (lr 0.01, momentum 0.9).
    pub fn classifier_default() -> Self {
        OptimizerKind::SgdMomentum {
            lr: 0.01,
            momentum: 0.9,
        }
    }

    /// Encoder / generator / discriminator settings (lr 2e-4, betas 0.5 / 0.999).
    pub fn generative_default() -> Self {
        OptimizerKind::Adam {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer buffers for one parameter group.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &[&Tensor]) -> Self {
        let zeros = |ps: &[&Tensor]| ps.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let second = match kind {
            OptimizerKind::Adam { .. } => zeros(params),
            OptimizerKind::SgdMomentum { .. } => Vec::new(),
        };
        OptimizerState {
            kind,
            first: zeros(params),
            second,
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    ///
    /// SGD: `v = momentum * v + g; p -= lr * v`.
    /// Adam: bias-corrected first/second moments.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(Error::shape(
                "optimizer_step",
                format!(
                    "{} params, {} grads, {} buffers",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(Error::shape(
                    "optimizer_step",
                    format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
            g.ensure_finite("optimizer gradient")?;
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::SgdMomentum { lr, momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((pp, &gg), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                        *vv = momentum * *vv + gg;
                        *pp -= lr * *vv;
                    }
                }
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((pp, &gg), mm), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mm = beta1 * *mm + (1.0 - beta1) * gg;
                        *vv = beta2 * *vv + (1.0 - beta2) * gg * gg;
                        let m_hat = *mm / c1;
                        let v_hat = *vv / c2;
                        *pp -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        for p in params.iter() {
            p.ensure_finite("optimizer update")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_lr_leaves_params_bit_identical() {
        for kind in [
            OptimizerKind::SgdMomentum { lr: 0.0, momentum: 0.9 },
            OptimizerKind::Adam {
                lr: 0.0,
                beta1: 0.5,
                beta2: 0.999,
                eps: 1e-8,
            },
        ] {
            let mut w = p(&[0.3, -1.7, 2.5]);
            let before = w.clone();
            let mut st = OptimizerState::new(kind, &[&w]);
            st.step(&mut [&mut w], &[p(&[1.0, -2.0, 3.0])]).unwrap();
            assert_eq!(w, before);
        }
    }

    #[test]
    fn zero_grads_with_fresh_adam_leave_params_unchanged() {
        let mut w = p(&[0.3, -1.7]);
        let before = w.clone();
        let mut st = OptimizerState::new(OptimizerKind::generative_default(), &[&w]);
        st.step(&mut [&mut w], &[p(&[0.0, 0.0])]).unwrap();
        assert_eq!(w, before);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn sgd_hand_iteration() {
        let mut w = p(&[1.0]);
        let mut st = OptimizerState::new(OptimizerKind::SgdMomentum { lr: 0.1, momentum: 0.0 }, &[&w]);
        st.step(&mut [&mut w], &[p(&[2.0])]).unwrap();
        st.step(&mut [&mut w], &[p(&[2.0])]).unwrap();
        assert!((w.item() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut w = p(&[0.0]);
        let mut st = OptimizerState::new(OptimizerKind::SgdMomentum { lr: 1.0, momentum: 0.5 }, &[&w]);
        st.step(&mut [&mut w], &[p(&[1.0])]).unwrap(); // v=1, w=-1
        st.step(&mut [&mut w], &[p(&[1.0])]).unwrap(); // v=1.5, w=-2.5
        assert!((w.item() + 2.5).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With bias correction the first step is lr * g / (|g| + eps).
        let mut w = p(&[1.0, 1.0]);
        let mut st = OptimizerState::new(
            OptimizerKind::Adam {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 0.0,
            },
            &[&w],
        );
        st.step(&mut [&mut w], &[p(&[3.0, -0.5])]).unwrap();
        assert!((w.data()[0] - 0.99).abs() < 1e-12);
        assert!((w.data()[1] - 1.01).abs() < 1e-12);
    }

    #[test]
    fn counter_increments_once_per_call() {
        let mut w = p(&[1.0]);
        let mut st = OptimizerState::new(OptimizerKind::generative_default(), &[&w]);
        for i in 1..=5 {
            st.step(&mut [&mut w], &[p(&[0.1])]).unwrap();
            assert_eq!(st.steps(), i);
        }
    }

    #[test]
    fn rejects_bad_grads() {
        let mut w = p(&[1.0, 2.0]);
        let mut st = OptimizerState::new(OptimizerKind::classifier_default(), &[&w]);
        assert!(st.step(&mut [&mut w], &[p(&[1.0])]).is_err());
        let nan = Tensor::from_parts(vec![2], vec![f64::NAN, 0.0]);
        assert!(matches!(st.step(&mut [&mut w], &[nan]), Err(Error::NonFinite(_))));
    }
}
