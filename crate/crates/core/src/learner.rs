//! Online MaxEnt IRL learner.
//!
//! Each step solves the soft MDP at the current weights, then moves the
//! weights along `μ_Ξt − μ_{π_w}` with step size `η_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::features::{mu_demo_set, mu_policy_exact, mu_policy_mc, DEFAULT_TRUNCATION_TOL};
use crate::mdp::{Mdp, RewardWeights, Trajectory};
use crate::record::{RunRecord, StepMetrics, StepRecord};
use crate::soft_vi::{soft_value_iteration_with, SoftPolicy, SoftViConfig};

/// Step-size rule `t ↦ η_t`, with `t` starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    /// `η_t = 1/t`.
    #[default]
    InverseTime,
    /// `η_t = eta0/t`.
    ScaledInverseTime(f64),
    Constant(f64),
}

impl LrSchedule {
    pub fn rate(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            LrSchedule::InverseTime => 1.0 / t,
            LrSchedule::ScaledInverseTime(eta0) => eta0 / t,
            LrSchedule::Constant(eta) => eta,
        }
    }
}

/// How the learner evaluates its own feature expectation `μ_{π_w}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuMode {
    Exact { tol: f64 },
    MonteCarlo { n_rollouts: usize, horizon: usize },
}

impl Default for MuMode {
    fn default() -> Self {
        MuMode::Exact {
            tol: DEFAULT_TRUNCATION_TOL,
        }
    }
}

impl MuMode {
    pub fn evaluate(&self, mdp: &Mdp, policy: &SoftPolicy, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match *self {
            MuMode::Exact { tol } => Ok(mu_policy_exact(mdp, &policy.pi, tol)?.mu),
            MuMode::MonteCarlo {
                n_rollouts,
                horizon,
            } => Ok(mu_policy_mc(mdp, &policy.pi, n_rollouts, horizon, rng)?.mu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LearnerConfig {
    pub svi: SoftViConfig,
    pub mu_mode: MuMode,
    pub lr: LrSchedule,
}

/// Log-likelihood or loss value, flagged when the underlying soft value
/// iteration did not reach its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub converged: bool,
}

/// `Σ_t log π(a_t|s_t)` over the recorded steps, undiscounted.
pub fn log_likelihood_under<'a, I>(policy: &SoftPolicy, demos: I) -> f64
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    demos
        .into_iter()
        .flat_map(|xi| xi.steps().iter())
        .map(|&(s, a)| policy.log_prob(s, a))
        .sum()
}

/// `−Σ_t log π(a_t|s_t)`, or `−Σ_t γ^t log π(a_t|s_t)` when `discounted`.
pub fn trajectory_loss_under(
    policy: &SoftPolicy,
    xi: &Trajectory,
    gamma: f64,
    discounted: bool,
) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for &(s, a) in xi.steps() {
        total -= discount * policy.log_prob(s, a);
        if discounted {
            discount *= gamma;
        }
    }
    total
}

fn check_demos<'a>(mdp: &Mdp, demos: impl IntoIterator<Item = &'a Trajectory>) -> Result<()> {
    demos.into_iter().try_for_each(|d| d.check(mdp))
}

pub fn log_likelihood(
    mdp: &Mdp,
    demos: &[Trajectory],
    w: &RewardWeights,
    svi: SoftViConfig,
) -> Result<Scored> {
    check_demos(mdp, demos)?;
    let policy = soft_value_iteration_with(mdp, w, svi)?;
    Ok(Scored {
        value: log_likelihood_under(&policy, demos),
        converged: policy.converged,
    })
}

pub fn trajectory_loss(
    mdp: &Mdp,
    xi: &Trajectory,
    w: &RewardWeights,
    discounted: bool,
    svi: SoftViConfig,
) -> Result<Scored> {
    xi.check(mdp)?;
    let policy = soft_value_iteration_with(mdp, w, svi)?;
    Ok(Scored {
        value: trajectory_loss_under(&policy, xi, mdp.gamma(), discounted),
        converged: policy.converged,
    })
}

/// `μ_Ξ − μ_{π_w}` with an exact `μ_{π_w}`.
pub fn gradient(
    mdp: &Mdp,
    minibatch: &[Trajectory],
    w: &RewardWeights,
    svi: SoftViConfig,
) -> Result<Vec<f64>> {
    if minibatch.is_empty() {
        return Err(invalid("gradient of an empty minibatch"));
    }
    let demo_mu = mu_demo_set(mdp, minibatch)?.mu;
    let policy = soft_value_iteration_with(mdp, w, svi)?;
    let policy_mu = mu_policy_exact(mdp, &policy.pi, DEFAULT_TRUNCATION_TOL)?.mu;
    Ok(demo_mu.iter().zip(&policy_mu).map(|(d, p)| d - p).collect())
}

/// Receives the learner's policy after each update.
pub trait StepObserver {
    fn observe(&mut self, mdp: &Mdp, policy: &SoftPolicy) -> Result<StepMetrics>;
}

/// Observer that records nothing meaningful; useful when only the weights
/// matter.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMetrics;

impl StepObserver for NoMetrics {
    fn observe(&mut self, _mdp: &Mdp, _policy: &SoftPolicy) -> Result<StepMetrics> {
        Ok(StepMetrics {
            feature_mismatch: f64::NAN,
            reward_gap: f64::NAN,
        })
    }
}

/// Mutable state of one training run.
#[derive(Debug, Clone)]
pub struct LearnerState {
    w: RewardWeights,
    t: usize,
    cache: Option<SoftPolicy>,
    config: LearnerConfig,
    rng: ChaCha8Rng,
    seed: u64,
    nonconverged: usize,
}

impl LearnerState {
    pub fn new(w0: RewardWeights, config: LearnerConfig, seed: u64) -> Self {
        Self {
            w: w0,
            t: 1,
            cache: None,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            nonconverged: 0,
        }
    }

    /// `w_0 ~ U[−1, 1]^d` drawn from the run's own generator, which then
    /// continues to drive Monte-Carlo estimates.
    pub fn random_init(dim: usize, config: LearnerConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self {
            w: RewardWeights::new(w0).expect("finite draws"),
            t: 1,
            cache: None,
            config,
            rng,
            seed,
            nonconverged: 0,
        }
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.w
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn nonconverged_solves(&self) -> usize {
        self.nonconverged
    }

    pub fn cached_policy(&self) -> Option<&SoftPolicy> {
        self.cache.as_ref()
    }

    /// `π_{w_t}`, solved on first use after each update.
    pub fn policy(&mut self, mdp: &Mdp) -> Result<&SoftPolicy> {
        if self.cache.is_none() {
            let p = soft_value_iteration_with(mdp, &self.w, self.config.svi)?;
            if !p.converged {
                self.nonconverged += 1;
            }
            self.cache = Some(p);
        }
        Ok(self.cache.as_ref().expect("filled above"))
    }

    /// `μ_{π_{w_t}}` according to the configured mode.
    pub fn policy_mu(&mut self, mdp: &Mdp) -> Result<Vec<f64>> {
        self.policy(mdp)?;
        let policy = self.cache.as_ref().expect("filled by policy()");
        self.config.mu_mode.evaluate(mdp, policy, &mut self.rng)
    }

    /// Applies `w ← w + η_t (demo_mu − μ_{π_w})` when `demo_mu` is present,
    /// then advances `t` either way.
    pub fn advance(&mut self, mdp: &Mdp, demo_mu: Option<&[f64]>) -> Result<()> {
        if let Some(demo_mu) = demo_mu {
            if demo_mu.len() != self.w.dim() {
                return Err(crate::Error::DimensionMismatch {
                    expected: self.w.dim(),
                    actual: demo_mu.len(),
                });
            }
            let policy_mu = self.policy_mu(mdp)?;
            let g: Vec<f64> = demo_mu.iter().zip(&policy_mu).map(|(d, p)| d - p).collect();
            let eta = self.config.lr.rate(self.t);
            self.w = self.w.step(eta, &g)?;
            self.cache = None;
        }
        self.t += 1;
        Ok(())
    }

    /// One online update on `minibatch`.
    pub fn train_step(&mut self, mdp: &Mdp, minibatch: &[Trajectory]) -> Result<()> {
        if minibatch.is_empty() {
            return Err(invalid("train_step needs a non-empty minibatch"));
        }
        let demo_mu = mu_demo_set(mdp, minibatch)?.mu;
        self.advance(mdp, Some(&demo_mu))
    }

    /// Evaluates `observer` on the current policy.
    pub fn observe(&mut self, mdp: &Mdp, observer: &mut dyn StepObserver) -> Result<StepMetrics> {
        self.policy(mdp)?;
        observer.observe(mdp, self.cache.as_ref().expect("filled by policy()"))
    }

    pub(crate) fn empty_record(&self) -> RunRecord {
        RunRecord {
            seed: self.seed,
            final_weights: self.w.as_slice().to_vec(),
            ..RunRecord::default()
        }
    }

    pub(crate) fn finish_record(&self, record: &mut RunRecord) {
        record.final_weights = self.w.as_slice().to_vec();
        record.nonconverged_solves = self.nonconverged;
    }
}

/// Runs [`LearnerState::train_step`] over every minibatch of `schedule`,
/// recording the observer's metrics after each update.
pub fn train<I>(
    state: &mut LearnerState,
    mdp: &Mdp,
    schedule: I,
    observer: &mut dyn StepObserver,
) -> Result<RunRecord>
where
    I: IntoIterator<Item = Vec<Trajectory>>,
{
    let mut record = state.empty_record();
    let mut schedule = schedule.into_iter().peekable();
    if schedule.peek().is_none() {
        return Ok(record);
    }
    record.initial = Some(state.observe(mdp, observer)?);
    for (i, batch) in schedule.enumerate() {
        state.train_step(mdp, &batch)?;
        let metrics = state.observe(mdp, observer)?;
        record.steps.push(StepRecord {
            step: i + 1,
            metrics,
            selected_count: None,
            lambda: None,
        });
    }
    state.finish_record(&mut record);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::random::{random_mdp, random_trajectory};
    use crate::soft_vi::soft_value_iteration;

    /// 1 state, 2 self-loop actions, one-hot 2-d features.
    fn two_action(gamma: f64) -> Mdp {
        Mdp::checked(
            1,
            2,
            gamma,
            vec![1.0, 1.0],
            vec![1.0],
            2,
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    fn demo(steps: &[(usize, usize)]) -> Trajectory {
        Trajectory::new(steps.to_vec()).unwrap()
    }

    #[test]
    fn uniform_policy_likelihood_and_losses() {
        let mdp = two_action(0.5);
        let w = RewardWeights::zeros(2);
        let svi = SoftViConfig::default();
        let ll = log_likelihood(&mdp, &[demo(&[(0, 0), (0, 1), (0, 0)])], &w, svi).unwrap();
        assert!(ll.converged);
        assert!((ll.value - 3.0 * 0.5f64.ln()).abs() < 1e-12);

        let one = demo(&[(0, 1)]);
        for discounted in [false, true] {
            let l = trajectory_loss(&mdp, &one, &w, discounted, svi)
                .unwrap()
                .value;
            assert!((l - 2f64.ln()).abs() < 1e-12);
        }
        let two = demo(&[(0, 0), (0, 0)]);
        let l = trajectory_loss(&mdp, &two, &w, true, svi).unwrap().value;
        assert!((l - 1.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_action_likelihood_is_zero() {
        let mdp = Mdp::checked(
            2,
            1,
            0.9,
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0],
            1,
            vec![1.0, 0.5],
        )
        .unwrap();
        let w = RewardWeights::new(vec![0.3]).unwrap();
        let ll = log_likelihood(
            &mdp,
            &[demo(&[(0, 0), (1, 0)])],
            &w,
            SoftViConfig::default(),
        )
        .unwrap();
        assert!(ll.value.abs() < 1e-12);
    }

    #[test]
    fn likelihood_matches_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mdp = random_mdp(&mut rng, 3, 2, 3, 0.8);
        let w = RewardWeights::new(vec![0.4, -0.9, 0.2]).unwrap();
        let demos = vec![
            random_trajectory(&mut rng, &mdp, 3),
            random_trajectory(&mut rng, &mdp, 2),
        ];
        let policy = soft_value_iteration(&mdp, &w, 1e-12, 10_000).unwrap();
        let product: f64 = demos
            .iter()
            .flat_map(|d| d.steps())
            .map(|&(s, a)| policy.pi.prob(s, a))
            .product();
        let svi = SoftViConfig {
            tol: 1e-12,
            max_iter: 10_000,
        };
        let ll = log_likelihood(&mdp, &demos, &w, svi).unwrap().value;
        assert!((ll - product.ln()).abs() < 1e-12);
        let loss = trajectory_loss(&mdp, &demos[0], &w, false, svi)
            .unwrap()
            .value;
        let single = log_likelihood(&mdp, &demos[..1], &w, svi).unwrap().value;
        assert!((loss + single).abs() < 1e-12);
    }

    #[test]
    fn gradient_by_hand() {
        let mdp = two_action(0.0);
        let g = gradient(
            &mdp,
            &[demo(&[(0, 0)])],
            &RewardWeights::zeros(2),
            SoftViConfig::default(),
        )
        .unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
        assert!(gradient(&mdp, &[], &RewardWeights::zeros(2), SoftViConfig::default()).is_err());
    }

    #[test]
    fn stationary_minibatch_gives_zero_gradient() {
        // 1 action: the only policy replays the demo's feature stream exactly.
        let mdp = Mdp::checked(
            2,
            1,
            0.5,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0],
            2,
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let steps: Vec<(usize, usize)> = std::iter::once((0, 0))
            .chain(std::iter::repeat_n((1, 0), 60))
            .collect();
        let g = gradient(
            &mdp,
            &[demo(&steps)],
            &RewardWeights::new(vec![0.3, -0.2]).unwrap(),
            SoftViConfig::default(),
        )
        .unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-9), "{g:?}");
    }

    #[test]
    fn train_step_updates() {
        let mdp = two_action(0.0);
        let cfg = LearnerConfig {
            lr: LrSchedule::Constant(1.0),
            ..LearnerConfig::default()
        };
        let mut state = LearnerState::new(RewardWeights::zeros(2), cfg, 0);
        state.train_step(&mdp, &[demo(&[(0, 0)])]).unwrap();
        assert!((state.weights().as_slice()[0] - 0.5).abs() < 1e-12);
        assert_eq!(state.step_count(), 2);
        assert!(state.cached_policy().is_none());

        // Balanced minibatch under the uniform policy: zero gradient.
        let mut state = LearnerState::new(RewardWeights::zeros(2), cfg, 0);
        state
            .train_step(&mdp, &[demo(&[(0, 0)]), demo(&[(0, 1)])])
            .unwrap();
        assert_eq!(state.weights().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn two_step_inverse_time_trace() {
        // gamma = 0: mu_pi = softmax(w); demo always picks action 0.
        let mdp = two_action(0.0);
        let mut state = LearnerState::new(RewardWeights::zeros(2), LearnerConfig::default(), 0);
        let batch = vec![demo(&[(0, 0)])];
        state.train_step(&mdp, &batch).unwrap();
        state.train_step(&mdp, &batch).unwrap();

        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let w1 = [0.5, -0.5];
        let p0 = sigmoid(w1[0] - w1[1]);
        let w2 = [w1[0] + 0.5 * (1.0 - p0), w1[1] + 0.5 * (0.0 - (1.0 - p0))];
        for (x, e) in state.weights().as_slice().iter().zip(w2) {
            assert!((x - e).abs() < 1e-9, "{x} vs {e}");
        }
    }

    #[test]
    fn empty_and_single_schedule() {
        let mdp = two_action(0.0);
        let mut state = LearnerState::new(RewardWeights::zeros(2), LearnerConfig::default(), 0);
        let rec = train(
            &mut state,
            &mdp,
            Vec::<Vec<Trajectory>>::new(),
            &mut NoMetrics,
        )
        .unwrap();
        assert!(rec.steps.is_empty() && rec.initial.is_none());
        assert_eq!(state.weights().as_slice(), &[0.0, 0.0]);

        let batch = vec![demo(&[(0, 1)])];
        let mut a = LearnerState::new(RewardWeights::zeros(2), LearnerConfig::default(), 0);
        let mut b = a.clone();
        let rec = train(&mut a, &mdp, vec![batch.clone()], &mut NoMetrics).unwrap();
        b.train_step(&mdp, &batch).unwrap();
        assert_eq!(rec.steps.len(), 1);
        assert_eq!(a.weights(), b.weights());
        assert_eq!(rec.final_weights, b.weights().as_slice());
    }

    #[test]
    fn cache_matches_fresh_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mdp = random_mdp(&mut rng, 4, 2, 3, 0.9);
        let mut state = LearnerState::random_init(3, LearnerConfig::default(), 5);
        let batch = vec![random_trajectory(&mut rng, &mdp, 4)];
        state.train_step(&mdp, &batch).unwrap();
        let cached = state.policy(&mdp).unwrap().clone();
        let fresh = soft_value_iteration_with(&mdp, state.weights(), state.config().svi).unwrap();
        assert_eq!(cached, fresh);
        assert_eq!(cached.weights_used, *state.weights());
    }

    #[test]
    fn lr_schedules() {
        assert_eq!(LrSchedule::InverseTime.rate(1), 1.0);
        assert_eq!(LrSchedule::InverseTime.rate(4), 0.25);
        assert_eq!(LrSchedule::ScaledInverseTime(2.0).rate(4), 0.5);
        assert_eq!(LrSchedule::Constant(0.1).rate(9), 0.1);
    }
}
