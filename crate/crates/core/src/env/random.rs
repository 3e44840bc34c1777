//! Random tabular instances for property checks and benchmarks.

use rand::Rng;

use crate::mdp::{Mdp, Trajectory};

fn normalized<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < sparsity {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum > 1e-3 {
            return raw.into_iter().map(|x| x / sum).collect();
        }
    }
}

/// Dense random MDP: transition rows and `p0` drawn uniformly then
/// normalized (roughly a third of entries zeroed), features in `[-1, 1]`.
pub fn random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    feature_dim: usize,
    gamma: f64,
) -> Mdp {
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(normalized(rng, n_states, 0.3));
    }
    let p0 = normalized(rng, n_states, 0.0);
    let features = (0..n_states * n_actions * feature_dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Mdp::checked(
        n_states,
        n_actions,
        gamma,
        transition,
        p0,
        feature_dim,
        features,
    )
    .expect("random MDP is valid by construction")
}

/// Uniformly random state-action pairs, not necessarily dynamically feasible.
pub fn random_trajectory<R: Rng + ?Sized>(rng: &mut R, mdp: &Mdp, len: usize) -> Trajectory {
    let steps = (0..len.max(1))
        .map(|_| {
            (
                rng.gen_range(0..mdp.n_states()),
                rng.gen_range(0..mdp.n_actions()),
            )
        })
        .collect();
    Trajectory::new(steps).expect("non-empty")
}

/// Uniform weights in `[-scale, scale]^d`.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect()
}
