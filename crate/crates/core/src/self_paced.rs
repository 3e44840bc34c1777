//! Learner-side self-paced selection (SPIRL) and the full-batch baseline.
//!
//! At every step the learner keeps the demonstrations whose discounted loss
//! `−Σ_t γ^t log π_{w_t}(a_t|s_t)` is at most `λ`, updates on their mean
//! feature expectation, and raises `λ` by `Δλ` whenever the selected set did
//! not grow. The pool is never consumed.

use crate::error::{invalid, Result};
use crate::features::mu_demo_set;
use crate::learner::{trajectory_loss_under, LearnerState, StepObserver};
use crate::mdp::{DemoPool, Mdp, RewardWeights};
use crate::record::{RunRecord, StepRecord};
use crate::soft_vi::{soft_value_iteration_with, SoftPolicy, SoftViConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda0 {
    /// Smallest demonstration loss under `w_0`, so the first selection is
    /// never empty.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthTrigger {
    /// Grow when `selected_now ≤ selected_prev`.
    NotGrowing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpirlConfig {
    pub lambda0: Lambda0,
    pub delta_lambda: f64,
    pub growth_trigger: GrowthTrigger,
    pub discounted_loss: bool,
}

impl SpirlConfig {
    pub fn new(delta_lambda: f64) -> Result<Self> {
        if !(delta_lambda >= 0.0) || !delta_lambda.is_finite() {
            return Err(invalid(format!(
                "delta_lambda must be finite and non-negative, got {delta_lambda}"
            )));
        }
        Ok(Self {
            lambda0: Lambda0::Auto,
            delta_lambda,
            growth_trigger: GrowthTrigger::NotGrowing,
            discounted_loss: true,
        })
    }

    pub fn with_lambda0(mut self, lambda0: Lambda0) -> Self {
        self.lambda0 = lambda0;
        self
    }
}

/// Losses of every pool demonstration under `policy`.
pub fn pool_losses(mdp: &Mdp, pool: &DemoPool, policy: &SoftPolicy, discounted: bool) -> Vec<f64> {
    pool.demos()
        .iter()
        .map(|xi| trajectory_loss_under(policy, xi, mdp.gamma(), discounted))
        .collect()
}

fn select_from(losses: &[f64], lambda: f64) -> Vec<usize> {
    losses
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= lambda)
        .map(|(i, _)| i)
        .collect()
}

/// Pool indices whose discounted loss under `w_t` is at most `lambda`.
pub fn select_demos(
    mdp: &Mdp,
    pool: &DemoPool,
    w_t: &RewardWeights,
    lambda: f64,
    svi: SoftViConfig,
) -> Result<Vec<usize>> {
    pool.check(mdp)?;
    let policy = soft_value_iteration_with(mdp, w_t, svi)?;
    Ok(select_from(&pool_losses(mdp, pool, &policy, true), lambda))
}

pub fn update_lambda(
    config: &SpirlConfig,
    lambda: f64,
    selected_now: usize,
    selected_prev: usize,
) -> f64 {
    match config.growth_trigger {
        GrowthTrigger::NotGrowing if selected_now <= selected_prev => lambda + config.delta_lambda,
        GrowthTrigger::NotGrowing => lambda,
    }
}

/// Self-paced training for `steps` updates. A step with an empty selection
/// leaves `w` unchanged but still advances `t` and `λ`.
pub fn spirl_train(
    mdp: &Mdp,
    pool: &DemoPool,
    state: &mut LearnerState,
    config: &SpirlConfig,
    steps: usize,
    observer: &mut dyn StepObserver,
) -> Result<RunRecord> {
    if steps == 0 {
        return Err(invalid("spirl_train needs at least one step"));
    }
    if pool.is_empty() {
        return Err(invalid("spirl_train needs a non-empty pool"));
    }
    pool.check(mdp)?;
    let mut record = state.empty_record();
    record.initial = Some(state.observe(mdp, observer)?);

    let mut lambda = match config.lambda0 {
        Lambda0::Fixed(l) => l,
        Lambda0::Auto => {
            let policy = state.policy(mdp)?;
            pool_losses(mdp, pool, policy, config.discounted_loss)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        }
    };
    let mut selected_prev = 0;
    for step in 1..=steps {
        let losses = pool_losses(mdp, pool, state.policy(mdp)?, config.discounted_loss);
        let selected = select_from(&losses, lambda);
        if selected.is_empty() {
            state.advance(mdp, None)?;
        } else {
            let mu = mu_demo_set(mdp, selected.iter().map(|&i| &pool.demos()[i]))?.mu;
            state.advance(mdp, Some(&mu))?;
        }
        let metrics = state.observe(mdp, observer)?;
        record.steps.push(StepRecord {
            step,
            metrics,
            selected_count: Some(selected.len()),
            lambda: Some(lambda),
        });
        lambda = update_lambda(config, lambda, selected.len(), selected_prev);
        selected_prev = selected.len();
    }
    state.finish_record(&mut record);
    Ok(record)
}

/// Baseline that updates on the whole pool at every step.
pub fn batch_train(
    mdp: &Mdp,
    pool: &DemoPool,
    state: &mut LearnerState,
    steps: usize,
    observer: &mut dyn StepObserver,
) -> Result<RunRecord> {
    if steps == 0 {
        return Err(invalid("batch_train needs at least one step"));
    }
    let mu = mu_demo_set(mdp, pool.demos())?.mu;
    let mut record = state.empty_record();
    record.initial = Some(state.observe(mdp, observer)?);
    for step in 1..=steps {
        state.advance(mdp, Some(&mu))?;
        let metrics = state.observe(mdp, observer)?;
        record.steps.push(StepRecord {
            step,
            metrics,
            selected_count: Some(pool.len()),
            lambda: None,
        });
    }
    state.finish_record(&mut record);
    Ok(record)
}
