use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Criterion {
    #[default]
    #[serde(rename = "BCE", alias = "bce", alias = "Bce")]
    Bce,
    #[serde(rename = "MSE", alias = "mse", alias = "Mse")]
    Mse,
}

fn check(pred: &Array1<f64>, target: &Array1<f64>) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty prediction vector".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn bce_loss(pred: &Array1<f64>, target: &Array1<f64>) -> Result<f64> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n)
}

/// d(bce_loss)/d(pred); zero where the clamp is active.
pub fn bce_grad(pred: &Array1<f64>, target: &Array1<f64>) -> Result<Array1<f64>> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            if p < BCE_CLAMP || p > 1.0 - BCE_CLAMP {
                0.0
            } else {
                (-t / p + (1.0 - t) / (1.0 - p)) / n
            }
        })
        .collect())
}

impl Criterion {
    pub fn loss(self, pred: &Array1<f64>, target: &Array1<f64>) -> Result<f64> {
        match self {
            Self::Bce => bce_loss(pred, target),
            Self::Mse => {
                check(pred, target)?;
                Ok((pred - target).mapv(|d| d * d).mean().unwrap_or(0.0))
            }
        }
    }

    pub fn grad(self, pred: &Array1<f64>, target: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            Self::Bce => bce_grad(pred, target),
            Self::Mse => {
                check(pred, target)?;
                let n = pred.len() as f64;
                Ok((pred - target).mapv(|d| 2.0 * d / n))
            }
        }
    }

    /// Loss and gradient against a constant target.
    pub fn against(self, pred: &Array1<f64>, target: f64) -> Result<(f64, Array1<f64>)> {
        let t = Array1::from_elem(pred.len(), target);
        Ok((self.loss(pred, &t)?, self.grad(pred, &t)?))
    }
}

/// Literal minimax generator objective `mean(log(1 - D(G(z))))` and its gradient.
pub fn minimax_generator_loss(pred: &Array1<f64>) -> (f64, Array1<f64>) {
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .map(|&p| (1.0 - p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)).ln())
        .sum::<f64>()
        / n;
    let grad = pred.mapv(|p| {
        if p < BCE_CLAMP || p > 1.0 - BCE_CLAMP {
            0.0
        } else {
            -1.0 / ((1.0 - p) * n)
        }
    });
    (loss, grad)
}
