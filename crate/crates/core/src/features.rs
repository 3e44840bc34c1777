//! Discounted feature expectations of trajectories, demonstration sets and
//! policies.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::mdp::{Mdp, Trajectory};
use crate::policy::{sample_index, sample_sparse, Policy};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo { n_rollouts: usize, horizon: usize },
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExpectation {
    pub mu: Vec<f64>,
    pub method: Method,
}

impl FeatureExpectation {
    pub fn zeros(dim: usize, method: Method) -> Self {
        Self {
            mu: vec![0.0; dim],
            method,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

fn accumulate(mdp: &Mdp, xi: &Trajectory, out: &mut [f64]) {
    let gamma = mdp.gamma();
    let mut discount = 1.0;
    for &(s, a) in xi.steps() {
        for (o, f) in out.iter_mut().zip(mdp.features(s, a)) {
            *o += discount * f;
        }
        discount *= gamma;
    }
}

/// `μ_ξ = Σ_t γ^t φ(s_t, a_t)` over the recorded steps.
pub fn mu_trajectory(mdp: &Mdp, xi: &Trajectory) -> Result<FeatureExpectation> {
    xi.check(mdp)?;
    let mut mu = vec![0.0; mdp.feature_dim()];
    accumulate(mdp, xi, &mut mu);
    Ok(FeatureExpectation {
        mu,
        method: Method::Empirical,
    })
}

/// Mean of `μ_ξ` over a non-empty set of demonstrations.
pub fn mu_demo_set<'a, I>(mdp: &Mdp, demos: I) -> Result<FeatureExpectation>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut mu = vec![0.0; mdp.feature_dim()];
    let mut n = 0usize;
    for xi in demos {
        xi.check(mdp)?;
        let mut one = vec![0.0; mdp.feature_dim()];
        accumulate(mdp, xi, &mut one);
        mu.iter_mut().zip(&one).for_each(|(m, x)| *m += x);
        n += 1;
    }
    if n == 0 {
        return Err(invalid("feature expectation of an empty demonstration set"));
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    Ok(FeatureExpectation {
        mu,
        method: Method::Empirical,
    })
}

fn check_policy(mdp: &Mdp, pi: &Policy) -> Result<()> {
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(invalid(format!(
            "policy shape {}x{} does not match MDP {}x{}",
            pi.n_states(),
            pi.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    pi.check_stochastic(1e-9)
}

/// Discounted state occupancy `ρ = Σ_k γ^k (P_πᵀ)^k p0`, truncated once the
/// remaining geometric mass `γ^k/(1−γ)·max‖φ‖∞` falls below `tol`.
pub fn discounted_occupancy(mdp: &Mdp, pi: &Policy, tol: f64) -> Result<Vec<f64>> {
    check_policy(mdp, pi)?;
    if !(tol > 0.0) {
        return Err(invalid(format!(
            "truncation tolerance must be positive, got {tol}"
        )));
    }
    let (ns, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let scale = mdp.max_feature_abs().max(1.0) / (1.0 - gamma);
    let mut rho = mdp.p0().to_vec();
    let mut current = mdp.p0().to_vec();
    let mut next = vec![0.0; ns];
    let mut tail = gamma * scale;
    while tail >= tol {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            let mass = current[s];
            if mass == 0.0 {
                continue;
            }
            for a in 0..na {
                let pa = pi.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for &(n, p) in mdp.successors(s, a) {
                    next[n] += gamma * mass * pa * p;
                }
            }
        }
        std::mem::swap(&mut current, &mut next);
        rho.iter_mut().zip(&current).for_each(|(r, c)| *r += c);
        tail *= gamma;
    }
    Ok(rho)
}

/// `μ_π = E[Σ_t γ^t φ(s_t, a_t) | s_0 ~ p0, π]` via the discounted occupancy.
pub fn mu_policy_exact(mdp: &Mdp, pi: &Policy, tol: f64) -> Result<FeatureExpectation> {
    let rho = discounted_occupancy(mdp, pi, tol)?;
    let mut mu = vec![0.0; mdp.feature_dim()];
    for (s, &mass) in rho.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for a in 0..mdp.n_actions() {
            let weight = mass * pi.prob(s, a);
            if weight == 0.0 {
                continue;
            }
            for (m, f) in mu.iter_mut().zip(mdp.features(s, a)) {
                *m += weight * f;
            }
        }
    }
    Ok(FeatureExpectation {
        mu,
        method: Method::Exact,
    })
}

/// Rollout length at which the discounted tail `γ^H/(1−γ)` drops below `tol`.
pub fn default_mc_horizon(gamma: f64, tol: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let h = ((tol * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    (h as usize).max(1)
}

/// Samples one trajectory of at most `horizon` steps. The rollout stops
/// right after recording a step in a terminal state.
pub fn rollout<R, F>(
    mdp: &Mdp,
    start: usize,
    horizon: usize,
    rng: &mut R,
    mut choose: F,
) -> Trajectory
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> usize,
{
    let mut steps = Vec::with_capacity(horizon);
    let mut s = start;
    for _ in 0..horizon.max(1) {
        let a = choose(s, rng);
        steps.push((s, a));
        if mdp.is_terminal(s) {
            break;
        }
        s = sample_sparse(mdp.successors(s, a), rng);
    }
    Trajectory::new(steps).expect("rollout records at least one step")
}

/// Per-rollout `μ_ξ` vectors for `n_rollouts` samples with `s_0 ~ p0`,
/// `a ~ π`, `s' ~ T`.
pub fn mc_samples<R: Rng + ?Sized>(
    mdp: &Mdp,
    pi: &Policy,
    n_rollouts: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_policy(mdp, pi)?;
    if n_rollouts == 0 || horizon == 0 {
        return Err(invalid("n_rollouts and horizon must be at least 1"));
    }
    let mut out = Vec::with_capacity(n_rollouts);
    for _ in 0..n_rollouts {
        let s0 = sample_index(mdp.p0(), rng);
        let xi = rollout(mdp, s0, horizon, rng, |s, r| pi.sample_action(s, r));
        let mut mu = vec![0.0; mdp.feature_dim()];
        accumulate(mdp, &xi, &mut mu);
        out.push(mu);
    }
    Ok(out)
}

/// Monte-Carlo estimate of the horizon-truncated `μ_π`.
pub fn mu_policy_mc<R: Rng + ?Sized>(
    mdp: &Mdp,
    pi: &Policy,
    n_rollouts: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<FeatureExpectation> {
    let samples = mc_samples(mdp, pi, n_rollouts, horizon, rng)?;
    let mut mu = vec![0.0; mdp.feature_dim()];
    for sample in &samples {
        mu.iter_mut().zip(sample).for_each(|(m, x)| *m += x);
    }
    mu.iter_mut().for_each(|m| *m /= n_rollouts as f64);
    Ok(FeatureExpectation {
        mu,
        method: Method::MonteCarlo {
            n_rollouts,
            horizon,
        },
    })
}
