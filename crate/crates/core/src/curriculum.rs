//! Teacher-side orderings of a fixed demonstration pool.
//!
//! R-CIRL ranks demonstrations by their true discounted reward
//! `⟨w*, μ_ξ⟩`; P-CIRL by their log-probability under the expert's soft
//! policy. Both give the highest-scoring demonstration first. Ties keep the
//! original pool order.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::features::mu_trajectory;
use crate::learner::log_likelihood_under;
use crate::mdp::{DemoPool, Mdp, RewardWeights, Trajectory};
use crate::soft_vi::SoftPolicy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    RCirl,
    PCirl,
    Random { seed: u64 },
    Anti(Box<Strategy>),
}

impl Strategy {
    pub fn anti(inner: Strategy) -> Self {
        Strategy::Anti(Box::new(inner))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::RCirl => write!(f, "r_cirl"),
            Strategy::PCirl => write!(f, "p_cirl"),
            Strategy::Random { seed } => write!(f, "random({seed})"),
            Strategy::Anti(inner) => write!(f, "anti({inner})"),
        }
    }
}

/// Inputs a strategy may need besides the pool.
#[derive(Debug, Clone, Copy)]
pub struct CurriculumContext<'a> {
    pub mdp: &'a Mdp,
    pub w_star: Option<&'a RewardWeights>,
    pub expert_policy: Option<&'a SoftPolicy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    /// Pool indices in presentation order.
    pub order: Vec<usize>,
    /// Score per pool index (zero for random orderings).
    pub scores: Vec<f64>,
    pub strategy: Strategy,
}

impl Curriculum {
    /// 0-based position of each pool index in `order`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            rank[i] = pos;
        }
        rank
    }

    /// Writes `demo_index,start_state,score,rank` rows, pool order.
    pub fn to_csv(&self, pool: &DemoPool) -> String {
        let mut out = String::from("demo_index,start_state,score,rank\n");
        for (i, rank) in self.ranks().into_iter().enumerate() {
            let start = pool.get(i).map(Trajectory::start_state).unwrap_or(0);
            out.push_str(&format!("{i},{start},{},{rank}\n", self.scores[i]));
        }
        out
    }
}

/// `⟨w*, μ_ξ⟩`.
pub fn score_r_cirl(mdp: &Mdp, xi: &Trajectory, w_star: &RewardWeights) -> Result<f64> {
    mdp.check_weights(w_star)?;
    Ok(w_star.dot(&mu_trajectory(mdp, xi)?.mu))
}

/// `Σ_t log π_{w*}(a_t|s_t)`: log of the trajectory probability.
pub fn score_p_cirl(mdp: &Mdp, xi: &Trajectory, expert_policy: &SoftPolicy) -> Result<f64> {
    xi.check(mdp)?;
    let score = log_likelihood_under(expert_policy, [xi]);
    if !score.is_finite() {
        return Err(Error::Numerical(format!("P-CIRL score is {score}")));
    }
    Ok(score)
}

/// Indices sorted by descending score, ties by ascending index.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order
}

pub fn build_curriculum(
    pool: &DemoPool,
    strategy: &Strategy,
    ctx: &CurriculumContext<'_>,
) -> Result<Curriculum> {
    if pool.is_empty() {
        return Err(invalid("cannot order an empty demonstration pool"));
    }
    let (order, scores) = match strategy {
        Strategy::RCirl => {
            let w = ctx.w_star.ok_or_else(|| invalid("R-CIRL needs w*"))?;
            let scores = pool
                .demos()
                .iter()
                .map(|xi| score_r_cirl(ctx.mdp, xi, w))
                .collect::<Result<Vec<_>>>()?;
            (descending(&scores), scores)
        }
        Strategy::PCirl => {
            let policy = ctx
                .expert_policy
                .ok_or_else(|| invalid("P-CIRL needs the expert soft policy"))?;
            let scores = pool
                .demos()
                .iter()
                .map(|xi| score_p_cirl(ctx.mdp, xi, policy))
                .collect::<Result<Vec<_>>>()?;
            (descending(&scores), scores)
        }
        Strategy::Random { seed } => {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            (order, vec![0.0; pool.len()])
        }
        Strategy::Anti(inner) => {
            let mut c = build_curriculum(pool, inner, ctx)?;
            c.order.reverse();
            (c.order, c.scores)
        }
    };
    Ok(Curriculum {
        order,
        scores,
        strategy: strategy.clone(),
    })
}

/// Yields consecutive chunks of the ordered pool, marking each demonstration
/// consumed as its chunk is handed out.
pub struct MinibatchSchedule<'p> {
    order: Vec<usize>,
    pool: &'p mut DemoPool,
    batch_size: usize,
    next: usize,
}

impl Iterator for MinibatchSchedule<'_> {
    type Item = Vec<Trajectory>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let mut batch = Vec::with_capacity(end - self.next);
        for &i in &self.order[self.next..end] {
            self.pool.mark_consumed(i);
            batch.push(self.pool.demos()[i].clone());
        }
        self.next = end;
        Some(batch)
    }
}

pub fn schedule_minibatches<'p>(
    curriculum: &Curriculum,
    pool: &'p mut DemoPool,
    batch_size: usize,
) -> Result<MinibatchSchedule<'p>> {
    if batch_size == 0 {
        return Err(invalid("batch_size must be at least 1"));
    }
    if curriculum.order.len() != pool.len() {
        return Err(invalid(format!(
            "curriculum covers {} demonstrations but the pool has {}",
            curriculum.order.len(),
            pool.len()
        )));
    }
    Ok(MinibatchSchedule {
        order: curriculum.order.clone(),
        pool,
        batch_size,
        next: 0,
    })
}
