//! Error metrics between a learner policy and the expert.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::mu_policy_exact;
use crate::learner::{MuMode, StepObserver};
use crate::mdp::{Mdp, RewardWeights};
use crate::policy::Policy;
use crate::record::StepMetrics;
use crate::soft_vi::SoftPolicy;

/// `‖mu − reference‖₂`.
pub fn feature_mismatch(mu: &[f64], reference: &[f64]) -> Result<f64> {
    if mu.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            actual: mu.len(),
        });
    }
    Ok(mu
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Feature mismatch of `learner` against `reference_mu`, evaluating the
/// learner's `μ` with `mu_mode`.
pub fn metric_feature_mismatch(
    mdp: &Mdp,
    learner: &SoftPolicy,
    reference_mu: &[f64],
    mu_mode: MuMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if reference_mu.len() != mdp.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: mdp.feature_dim(),
            actual: reference_mu.len(),
        });
    }
    feature_mismatch(&mu_mode.evaluate(mdp, learner, rng)?, reference_mu)
}

/// `⟨w*, μ_expert⟩ − ⟨w*, μ_learner⟩` with both feature expectations exact.
pub fn metric_reward_gap(
    mdp: &Mdp,
    learner: &SoftPolicy,
    expert: &Policy,
    w_star: &RewardWeights,
    tol: f64,
) -> Result<f64> {
    mdp.check_weights(w_star)?;
    let expert_mu = mu_policy_exact(mdp, expert, tol)?.mu;
    let learner_mu = mu_policy_exact(mdp, &learner.pi, tol)?.mu;
    Ok(w_star.dot(&expert_mu) - w_star.dot(&learner_mu))
}

/// Computes both metrics from a single evaluation of the learner's `μ`.
#[derive(Debug, Clone)]
pub struct MetricsObserver<'a> {
    reference_mu: &'a [f64],
    w_star: &'a RewardWeights,
    expert_value: f64,
    mu_mode: MuMode,
    rng: ChaCha8Rng,
}

impl<'a> MetricsObserver<'a> {
    /// `expert_value` is `⟨w*, reference_mu⟩`. The generator for Monte-Carlo
    /// evaluation is seeded independently of the learner's.
    pub fn new(
        reference_mu: &'a [f64],
        w_star: &'a RewardWeights,
        mu_mode: MuMode,
        seed: u64,
    ) -> Self {
        Self {
            reference_mu,
            w_star,
            expert_value: w_star.dot(reference_mu),
            mu_mode,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f0b_5e57_e5a1),
        }
    }
}

impl StepObserver for MetricsObserver<'_> {
    fn observe(&mut self, mdp: &Mdp, policy: &SoftPolicy) -> Result<StepMetrics> {
        let mu = self.mu_mode.evaluate(mdp, policy, &mut self.rng)?;
        Ok(StepMetrics {
            feature_mismatch: feature_mismatch(&mu, self.reference_mu)?,
            reward_gap: self.expert_value - self.w_star.dot(&mu),
        })
    }
}
