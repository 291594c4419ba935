use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::params::{ArrayRecord, NetParams};
use crate::error::{Error, Result};

/// Adam with bias correction, one instance per network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

/// Checkpointed optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<ArrayRecord>,
    pub v: Vec<ArrayRecord>,
}

impl Adam {
    pub fn new(params: &NetParams, lr: f64) -> Self {
        let zeros = || params.iter().map(|p| Array2::zeros(p.value.dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients currently stored in `params`.
    /// A non-finite gradient aborts before any parameter changes.
    pub fn step(&mut self, params: &mut NetParams) -> Result<()> {
        if let Some(p) = params
            .iter()
            .find(|p| p.grad.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "non-finite gradient in parameter {}",
                p.name
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }

    pub fn state(&self, params: &NetParams) -> AdamState {
        let rec = |arrs: &[Array2<f64>]| {
            arrs.iter()
                .zip(params.iter())
                .map(|(a, p)| ArrayRecord {
                    name: p.name.clone(),
                    shape: [a.nrows(), a.ncols()],
                    data: a.iter().copied().collect(),
                })
                .collect()
        };
        AdamState {
            step: self.step,
            m: rec(&self.m),
            v: rec(&self.v),
        }
    }

    pub fn restore(&mut self, state: &AdamState) -> crate::error::Result<()> {
        let load = |dst: &mut Vec<Array2<f64>>, src: &[ArrayRecord]| -> Result<()> {
            if dst.len() != src.len() {
                return Err(Error::Corrupt("optimizer moment count mismatch".into()));
            }
            for (d, r) in dst.iter_mut().zip(src) {
                if d.dim() != (r.shape[0], r.shape[1]) {
                    return Err(Error::Corrupt(format!("optimizer moment {} shape", r.name)));
                }
                *d = Array2::from_shape_vec(d.dim(), r.data.clone())
                    .map_err(|e| Error::Corrupt(e.to_string()))?;
            }
            Ok(())
        };
        load(&mut self.m, &state.m)?;
        load(&mut self.v, &state.v)?;
        self.step = state.step;
        Ok(())
    }
}
