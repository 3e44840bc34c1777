//! Optimal expert and demonstration generation.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::features::rollout;
use crate::mdp::{DemoPool, Mdp, RewardWeights};

pub const EXPERT_TOL: f64 = 1e-10;
const EXPERT_MAX_ITER: usize = 100_000;

/// Hard Bellman optimal values and the greedy policy. Ties between actions
/// go to the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPolicy {
    pub values: Vec<f64>,
    pub actions: Vec<usize>,
}

pub fn expert_policy(mdp: &Mdp, w_star: &RewardWeights) -> Result<ExpertPolicy> {
    mdp.check_weights(w_star)?;
    let (n, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let q_of = |v: &[f64], s: usize, a: usize| {
        let future: f64 = mdp.successors(s, a).iter().map(|&(t, p)| p * v[t]).sum();
        mdp.reward_unchecked(w_star, s, a) + gamma * future
    };
    let mut v = vec![0.0; n];
    let mut converged = false;
    for _ in 0..EXPERT_MAX_ITER {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..na)
                    .map(|a| q_of(&v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if !delta.is_finite() {
            return Err(Error::Numerical("expert value iteration diverged".into()));
        }
        if delta < EXPERT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "expert value iteration did not converge".into(),
        ));
    }
    let actions = (0..n)
        .map(|s| {
            let q: Vec<f64> = (0..na).map(|a| q_of(&v, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-12 * (1.0 + best.abs());
            q.iter().position(|&x| x >= best - slack).unwrap_or(0)
        })
        .collect();
    Ok(ExpertPolicy { values: v, actions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSpec {
    /// Probability of replacing the expert action by a uniform one.
    pub noise_prob: f64,
    pub horizon: usize,
}

/// One demonstration per entry of `starts`, in that order.
pub fn generate_demos<R: Rng + ?Sized>(
    mdp: &Mdp,
    expert: &ExpertPolicy,
    spec: &ExpertSpec,
    starts: &[usize],
    rng: &mut R,
) -> Result<DemoPool> {
    if !(0.0..=1.0).contains(&spec.noise_prob) {
        return Err(invalid(format!(
            "noise_prob {} outside [0, 1]",
            spec.noise_prob
        )));
    }
    if spec.horizon == 0 {
        return Err(invalid("demo horizon must be positive"));
    }
    if expert.actions.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_states(),
            actual: expert.actions.len(),
        });
    }
    let na = mdp.n_actions();
    let mut demos = Vec::with_capacity(starts.len());
    for &s0 in starts {
        mdp.check_state(s0)?;
        demos.push(rollout(mdp, s0, spec.horizon, rng, |s, r| {
            if spec.noise_prob > 0.0 && r.gen::<f64>() < spec.noise_prob {
                r.gen_range(0..na)
            } else {
                expert.actions[s]
            }
        }));
    }
    Ok(DemoPool::new(demos))
}

/// `n` distinct start states drawn from `candidates`, returned ascending.
/// Asking for at least as many as there are candidates returns them all.
pub fn sample_starts<R: Rng + ?Sized>(candidates: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    if n >= candidates.len() {
        return candidates.to_vec();
    }
    let mut picked: Vec<usize> = sample(rng, candidates.len(), n)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::gridworld::{build_gridworld, GridMap, GridworldSpec};
    use crate::env::random::random_mdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corridor_expert_moves_east() {
        let env = build_gridworld(&GridworldSpec::new(3, 1, vec![0.0, 0.0, 1.0])).unwrap();
        let expert = expert_policy(&env.mdp, &env.w_star).unwrap();
        assert_eq!(expert.actions[0], 2);
        assert_eq!(expert.actions[1], 2);
        // At the goal N, S, E and stay all keep the agent in place; N wins the tie.
        assert_eq!(expert.actions[2], 0);
        assert!((expert.values[2] - 10.0).abs() < 1e-8);
    }

    fn brute_force(mdp: &Mdp, w: &RewardWeights, s: usize, depth: usize) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        (0..mdp.n_actions())
            .map(|a| {
                let future: f64 = mdp
                    .successors(s, a)
                    .iter()
                    .map(|&(t, p)| p * brute_force(mdp, w, t, depth - 1))
                    .sum();
                crate::mdp::reward(mdp, w, s, a).unwrap() + mdp.gamma() * future
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn values_match_finite_horizon_search() {
        let mut spec = GridworldSpec::preset(GridMap::TwoGoals, 4, 4);
        spec.gamma = 0.5;
        let env = build_gridworld(&spec).unwrap();
        let expert = expert_policy(&env.mdp, &env.w_star).unwrap();
        let tail = 0.5f64.powi(10) / 0.5;
        for s in [0, 5, 15] {
            let bf = brute_force(&env.mdp, &env.w_star, s, 10);
            assert!((expert.values[s] - bf).abs() <= tail + 1e-9, "state {s}");
        }
    }

    #[test]
    fn random_mdp_expert_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mdp = random_mdp(&mut rng, 6, 3, 4, 0.8);
        let w = RewardWeights::l1_normalized(&[0.3, -0.2, 0.4, 0.1]).unwrap();
        let expert = expert_policy(&mdp, &w).unwrap();
        for s in 0..6 {
            for a in 0..3 {
                let q = crate::mdp::reward(&mdp, &w, s, a).unwrap()
                    + 0.8
                        * mdp
                            .successors(s, a)
                            .iter()
                            .map(|&(t, p)| p * expert.values[t])
                            .sum::<f64>();
                assert!(q <= expert.values[s] + 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_demos_follow_expert() {
        let env = build_gridworld(&GridworldSpec::preset(GridMap::SingleGoal, 4, 4)).unwrap();
        let expert = expert_policy(&env.mdp, &env.w_star).unwrap();
        let spec = ExpertSpec {
            noise_prob: 0.0,
            horizon: 7,
        };
        let starts: Vec<usize> = (0..16).collect();
        let a = generate_demos(
            &env.mdp,
            &expert,
            &spec,
            &starts,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let b = generate_demos(
            &env.mdp,
            &expert,
            &spec,
            &starts,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        assert_eq!(a, b);
        for xi in a.demos() {
            assert_eq!(xi.horizon(), 7);
            assert!(xi.steps().iter().all(|&(s, act)| expert.actions[s] == act));
        }
        // Six moves reach the far corner; the seventh step is recorded there.
        assert_eq!(a.demos()[0].steps().last().unwrap().0, 15);
    }

    #[test]
    fn full_noise_is_uniform() {
        let env = build_gridworld(&GridworldSpec::preset(GridMap::SingleGoal, 3, 3)).unwrap();
        let expert = expert_policy(&env.mdp, &env.w_star).unwrap();
        let spec = ExpertSpec {
            noise_prob: 1.0,
            horizon: 10,
        };
        let starts = vec![4; 500];
        let pool = generate_demos(
            &env.mdp,
            &expert,
            &spec,
            &starts,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let mut counts = [0usize; 5];
        for xi in pool.demos() {
            for &(_, a) in xi.steps() {
                counts[a] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let expected = total as f64 / 5.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99.9% quantile of chi-square with 4 degrees of freedom.
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn start_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(sample_starts(&all, 20, &mut rng), all);
        let some = sample_starts(&all, 4, &mut rng);
        assert_eq!(some.len(), 4);
        assert!(some.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bad_noise_rejected() {
        let env = build_gridworld(&GridworldSpec::new(2, 1, vec![0.0, 1.0])).unwrap();
        let expert = expert_policy(&env.mdp, &env.w_star).unwrap();
        let spec = ExpertSpec {
            noise_prob: 1.5,
            horizon: 3,
        };
        assert!(generate_demos(
            &env.mdp,
            &expert,
            &spec,
            &[0],
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }
}
