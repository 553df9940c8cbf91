//! DPO reward and loss over precomputed sequence log-probabilities.
//!
//! The implicit reward of a response is `beta * (log pi(y|x) - log pi_ref(y|x))`
//! up to a log-partition term that is identical for both responses of a
//! pair and cancels in the loss, so it is never computed. The pairwise loss
//! is
//!
//! ```text
//! L = -log sigmoid(beta * [(lp_pref - lr_pref) - (lp_rej - lr_rej)])
//! ```
//!
//! This module only evaluates these quantities; it does not train anything.

use serde::{Deserialize, Serialize};

use crate::error::DpoError;

pub const DEFAULT_BETA: f64 = 0.1;

fn default_beta() -> f64 {
    DEFAULT_BETA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub logp_policy_pref: f64,
    pub logp_ref_pref: f64,
    pub logp_policy_rej: f64,
    pub logp_ref_rej: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl DpoInputs {
    pub fn validate(&self) -> Result<(), DpoError> {
        let vals = [
            self.logp_policy_pref,
            self.logp_ref_pref,
            self.logp_policy_rej,
            self.logp_ref_rej,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(DpoError::InvalidInputs("log-probabilities must be finite".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(DpoError::InvalidInputs(format!("beta = {} must be positive", self.beta)));
        }
        Ok(())
    }

    /// Unscaled log-ratio margin between preferred and rejected.
    pub fn margin(&self) -> f64 {
        (self.logp_policy_pref - self.logp_ref_pref) - (self.logp_policy_rej - self.logp_ref_rej)
    }

    /// `beta * margin`, the reward difference.
    pub fn reward_margin(&self) -> f64 {
        self.beta * self.margin()
    }
}

pub fn reward(logp_policy: f64, logp_ref: f64, beta: f64) -> f64 {
    beta * (logp_policy - logp_ref)
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(x) = log(1 + e^-x)`, stable for any finite x.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn dpo_loss(inputs: &DpoInputs) -> f64 {
    neg_log_sigmoid(inputs.reward_margin())
}

/// Gradient of the loss with respect to the two policy log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpoGrad {
    pub d_logp_policy_pref: f64,
    pub d_logp_policy_rej: f64,
}

pub fn dpo_grad(inputs: &DpoInputs) -> DpoGrad {
    let s = sigmoid(-inputs.reward_margin());
    DpoGrad {
        d_logp_policy_pref: -inputs.beta * s,
        d_logp_policy_rej: inputs.beta * s,
    }
}

/// Mean loss over a batch.
pub fn batch_loss(batch: &[DpoInputs]) -> Result<f64, DpoError> {
    if batch.is_empty() {
        return Err(DpoError::EmptyBatch);
    }
    let total: f64 = batch.iter().map(dpo_loss).sum();
    Ok(total / batch.len() as f64)
}

/// Summary statistics over a batch, as printed by `dpo-check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoStats {
    pub count: usize,
    pub mean_loss: f64,
    pub min_loss: f64,
    pub max_loss: f64,
    pub mean_reward_margin: f64,
    /// Fraction of pairs whose reward margin is strictly positive.
    pub preference_accuracy: f64,
}

pub fn batch_stats(batch: &[DpoInputs]) -> Result<DpoStats, DpoError> {
    let mean_loss = batch_loss(batch)?;
    let losses: Vec<f64> = batch.iter().map(dpo_loss).collect();
    let n = batch.len() as f64;
    Ok(DpoStats {
        count: batch.len(),
        mean_loss,
        min_loss: losses.iter().copied().fold(f64::INFINITY, f64::min),
        max_loss: losses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_reward_margin: batch.iter().map(DpoInputs::reward_margin).sum::<f64>() / n,
        preference_accuracy: batch.iter().filter(|b| b.reward_margin() > 0.0).count() as f64 / n,
    })
}
