//! Seeded repeats of every strategy on a shared environment and pool.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::curriculum::{build_curriculum, schedule_minibatches, CurriculumContext, Strategy};
use crate::env::expert::{expert_policy, generate_demos, ExpertPolicy, ExpertSpec};
use crate::env::BuiltEnv;
use crate::error::{invalid, Error, Result};
use crate::features::{mu_policy_exact, DEFAULT_TRUNCATION_TOL};
use crate::learner::{train, LearnerConfig, LearnerState};
use crate::mdp::DemoPool;
use crate::policy::Policy;
use crate::record::RunRecord;
use crate::self_paced::{batch_train, spirl_train, SpirlConfig};
use crate::soft_vi::{soft_value_iteration_with, SoftPolicy};

use super::metrics::MetricsObserver;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    Random,
    RCirl,
    PCirl,
    AntiR,
    AntiP,
    Batch,
    Spirl { delta_lambda: f64 },
}

impl StrategySpec {
    /// Accepts `random`, `r_cirl`, `p_cirl`, `anti_r`, `anti_p`, `batch` and
    /// `spirl:<Δλ>`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        Ok(match text {
            "random" => StrategySpec::Random,
            "r_cirl" => StrategySpec::RCirl,
            "p_cirl" => StrategySpec::PCirl,
            "anti_r" => StrategySpec::AntiR,
            "anti_p" => StrategySpec::AntiP,
            "batch" => StrategySpec::Batch,
            _ => {
                let delta = text
                    .strip_prefix("spirl:")
                    .ok_or_else(|| Error::Config(format!("unknown strategy `{text}`")))?;
                let delta_lambda: f64 = delta
                    .parse()
                    .map_err(|_| Error::Config(format!("bad delta_lambda in `{text}`")))?;
                if !(delta_lambda > 0.0) || !delta_lambda.is_finite() {
                    return Err(Error::Config(format!(
                        "delta_lambda must be positive in `{text}`"
                    )));
                }
                StrategySpec::Spirl { delta_lambda }
            }
        })
    }

    /// Curriculum ordering for the teacher strategies, `None` for batch and SPIRL.
    pub fn curriculum(&self, seed: u64) -> Option<Strategy> {
        match self {
            StrategySpec::Random => Some(Strategy::Random { seed }),
            StrategySpec::RCirl => Some(Strategy::RCirl),
            StrategySpec::PCirl => Some(Strategy::PCirl),
            StrategySpec::AntiR => Some(Strategy::anti(Strategy::RCirl)),
            StrategySpec::AntiP => Some(Strategy::anti(Strategy::PCirl)),
            StrategySpec::Batch | StrategySpec::Spirl { .. } => None,
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Random => write!(f, "random"),
            StrategySpec::RCirl => write!(f, "r_cirl"),
            StrategySpec::PCirl => write!(f, "p_cirl"),
            StrategySpec::AntiR => write!(f, "anti_r"),
            StrategySpec::AntiP => write!(f, "anti_p"),
            StrategySpec::Batch => write!(f, "batch"),
            StrategySpec::Spirl { delta_lambda } => write!(f, "spirl:{delta_lambda}"),
        }
    }
}

/// Everything shared by the runs of one experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    /// Environment with `p0` set to the pool's start distribution.
    pub env: BuiltEnv,
    pub pool: DemoPool,
    pub expert: ExpertPolicy,
    /// Soft policy under `w*`, used by P-CIRL.
    pub expert_soft: SoftPolicy,
    /// Exact `μ` of the expert policy.
    pub reference_mu: Vec<f64>,
}

impl Setup {
    pub fn new(
        env: BuiltEnv,
        spec: &ExpertSpec,
        starts: &[usize],
        pool_seed: u64,
        learner: &LearnerConfig,
    ) -> Result<Self> {
        if starts.is_empty() {
            return Err(invalid("no demonstration start states"));
        }
        let expert = expert_policy(&env.mdp, &env.w_star)?;
        let mut rng = ChaCha8Rng::seed_from_u64(pool_seed);
        let pool = generate_demos(&env.mdp, &expert, spec, starts, &mut rng)?;
        Self::with_pool(env, expert, pool, learner)
    }

    pub fn with_pool(
        mut env: BuiltEnv,
        expert: ExpertPolicy,
        pool: DemoPool,
        learner: &LearnerConfig,
    ) -> Result<Self> {
        pool.check(&env.mdp)?;
        env.mdp = env
            .mdp
            .with_p0(pool.start_distribution(env.mdp.n_states())?)?;
        let expert_soft = soft_value_iteration_with(&env.mdp, &env.w_star, learner.svi)?;
        let hard = Policy::deterministic(&expert.actions, env.mdp.n_actions())?;
        let reference_mu = mu_policy_exact(&env.mdp, &hard, DEFAULT_TRUNCATION_TOL)?.mu;
        Ok(Self {
            env,
            pool,
            expert,
            expert_soft,
            reference_mu,
        })
    }

    pub fn expert_value(&self) -> f64 {
        self.env.w_star.dot(&self.reference_mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub learner: LearnerConfig,
    pub batch_size: usize,
    /// Training steps for SPIRL and batch; curricula always make one pass.
    pub steps: Option<usize>,
}

impl RunSettings {
    pub fn curriculum_steps(&self, pool_len: usize) -> usize {
        pool_len.div_ceil(self.batch_size.max(1))
    }
}

/// One seeded training run. `w_0`, the random teacher's order and the
/// Monte-Carlo generators all derive from `seed`.
pub fn run_one(
    setup: &Setup,
    strategy: StrategySpec,
    settings: &RunSettings,
    seed: u64,
) -> Result<RunRecord> {
    let mdp = &setup.env.mdp;
    let mut state = LearnerState::random_init(mdp.feature_dim(), settings.learner, seed);
    let mut observer = MetricsObserver::new(
        &setup.reference_mu,
        &setup.env.w_star,
        settings.learner.mu_mode,
        seed,
    );
    let steps = settings
        .steps
        .unwrap_or_else(|| settings.curriculum_steps(setup.pool.len()));
    match strategy {
        StrategySpec::Batch => batch_train(mdp, &setup.pool, &mut state, steps, &mut observer),
        StrategySpec::Spirl { delta_lambda } => {
            let cfg = SpirlConfig::new(delta_lambda)?;
            spirl_train(mdp, &setup.pool, &mut state, &cfg, steps, &mut observer)
        }
        other => {
            let strategy = other.curriculum(seed).expect("curriculum strategy");
            let ctx = CurriculumContext {
                mdp,
                w_star: Some(&setup.env.w_star),
                expert_policy: Some(&setup.expert_soft),
            };
            let curriculum = build_curriculum(&setup.pool, &strategy, &ctx)?;
            let mut pool = setup.pool.clone();
            let schedule = schedule_minibatches(&curriculum, &mut pool, settings.batch_size)?;
            train(&mut state, mdp, schedule, &mut observer)
        }
    }
}

/// Scores and ranks of the pool under a teacher strategy, as
/// `demo_index,start_state,score,rank` rows.
pub fn curriculum_csv(setup: &Setup, strategy: StrategySpec, seed: u64) -> Result<String> {
    let strategy = strategy
        .curriculum(seed)
        .ok_or_else(|| Error::Config(format!("`{strategy}` does not order demonstrations")))?;
    let ctx = CurriculumContext {
        mdp: &setup.env.mdp,
        w_star: Some(&setup.env.w_star),
        expert_policy: Some(&setup.expert_soft),
    };
    Ok(build_curriculum(&setup.pool, &strategy, &ctx)?.to_csv(&setup.pool))
}

/// Repeats `r = 0..repeats` with seed `base + r`, run in parallel and
/// returned in repeat order.
pub fn run_repeats(
    setup: &Setup,
    strategy: StrategySpec,
    settings: &RunSettings,
    base_seed: u64,
    repeats: usize,
) -> Result<Vec<RunRecord>> {
    (0..repeats as u64)
        .into_par_iter()
        .map(|r| run_one(setup, strategy, settings, base_seed.wrapping_add(r)))
        .collect()
}

/// Per-step mean and sample standard deviation across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: usize,
    pub mean_mismatch: f64,
    pub std_mismatch: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub n: usize,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn aggregate(runs: &[RunRecord]) -> Vec<AggregateRow> {
    let steps = runs.iter().map(|r| r.steps.len()).max().unwrap_or(0);
    (0..steps)
        .map(|i| {
            let at: Vec<_> = runs.iter().filter_map(|r| r.steps.get(i)).collect();
            let mism: Vec<f64> = at.iter().map(|s| s.metrics.feature_mismatch).collect();
            let gap: Vec<f64> = at.iter().map(|s| s.metrics.reward_gap).collect();
            let (mean_mismatch, std_mismatch) = mean_std(&mism);
            let (mean_gap, std_gap) = mean_std(&gap);
            AggregateRow {
                step: i + 1,
                mean_mismatch,
                std_mismatch,
                mean_gap,
                std_gap,
                n: at.len(),
            }
        })
        .collect()
}

/// Mean of the last-step metrics: `(mismatch, gap)`.
pub fn final_means(runs: &[RunRecord]) -> (f64, f64) {
    let finals: Vec<_> = runs.iter().filter_map(RunRecord::final_metrics).collect();
    let m: Vec<f64> = finals.iter().map(|f| f.feature_mismatch).collect();
    let g: Vec<f64> = finals.iter().map(|f| f.reward_gap).collect();
    (mean_std(&m).0, mean_std(&g).0)
}
