//! Soft Bellman backups and Soft Value Iteration.
//!
//! `B_w(V)(s) = log Σ_a exp(⟨w, φ(s,a)⟩ + γ Σ_{s'} T(s'|s,a) V(s'))`. The
//! operator is a γ-contraction in the sup norm, so synchronous iteration
//! from `V = 0` converges to the unique fixed point `V_w`, and the MaxEnt
//! policy is `π_w(a|s) = exp(Q_w(s,a) − V_w(s))`.

use crate::error::{invalid, Result};
use crate::mdp::{Mdp, RewardWeights};
use crate::policy::Policy;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftViConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SoftViConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Output of Soft Value Iteration for one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPolicy {
    /// `[s, a]` row-major.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Policy,
    pub weights_used: RewardWeights,
    pub iterations: usize,
    /// Sup-norm change of the last backup.
    pub residual: f64,
    pub converged: bool,
}

impl SoftPolicy {
    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        let na = self.pi.n_actions();
        self.q[s * na + a] - self.v[s]
    }
}

/// Numerically stable `log Σ exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn q_values(mdp: &Mdp, w: &RewardWeights, v: &[f64], q: &mut [f64]) {
    let (ns, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    for s in 0..ns {
        for a in 0..na {
            let future: f64 = mdp.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum();
            q[s * na + a] = mdp.reward_unchecked(w, s, a) + gamma * future;
        }
    }
}

fn lse_rows(q: &[f64], na: usize, out: &mut [f64]) {
    for (s, row) in q.chunks_exact(na).enumerate() {
        out[s] = log_sum_exp(row);
    }
}

fn check_inputs(mdp: &Mdp, w: &RewardWeights) -> Result<()> {
    mdp.check_weights(w)
}

/// One synchronous application of the soft Bellman operator.
pub fn soft_backup(mdp: &Mdp, w: &RewardWeights, v: &[f64]) -> Result<Vec<f64>> {
    check_inputs(mdp, w)?;
    if v.len() != mdp.n_states() {
        return Err(invalid(format!(
            "value vector has length {}, expected {}",
            v.len(),
            mdp.n_states()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("value vector has non-finite entries"));
    }
    let na = mdp.n_actions();
    let mut q = vec![0.0; mdp.n_states() * na];
    q_values(mdp, w, v, &mut q);
    let mut out = vec![0.0; mdp.n_states()];
    lse_rows(&q, na, &mut out);
    Ok(out)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Iterates `V ← B_w(V)` from zero until the sup-norm change drops below
/// `tol` or `max_iter` backups have run. Non-convergence is reported through
/// `converged`, not as an error.
pub fn soft_value_iteration(
    mdp: &Mdp,
    w: &RewardWeights,
    tol: f64,
    max_iter: usize,
) -> Result<SoftPolicy> {
    check_inputs(mdp, w)?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid(format!(
            "need tol > 0 and max_iter >= 1 (got {tol}, {max_iter})"
        )));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        q_values(mdp, w, &v, &mut q);
        lse_rows(&q, na, &mut next);
        residual = sup_diff(&next, &v);
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
        if !residual.is_finite() || residual < tol {
            break;
        }
    }
    if !residual.is_finite() {
        return Err(crate::Error::Numerical(format!(
            "soft value iteration diverged after {iterations} backups"
        )));
    }

    // Q from the final iterate, V as its exact log-sum-exp, so that
    // π = exp(Q − V) is normalized to machine precision.
    q_values(mdp, w, &v, &mut q);
    lse_rows(&q, na, &mut v);
    let probs: Vec<f64> = q
        .iter()
        .enumerate()
        .map(|(i, qa)| (qa - v[i / na]).exp())
        .collect();

    Ok(SoftPolicy {
        pi: Policy::new(ns, na, probs)?,
        q,
        v,
        weights_used: w.clone(),
        iterations,
        residual,
        converged: residual < tol,
    })
}

pub fn soft_value_iteration_with(
    mdp: &Mdp,
    w: &RewardWeights,
    cfg: SoftViConfig,
) -> Result<SoftPolicy> {
    soft_value_iteration(mdp, w, cfg.tol, cfg.max_iter)
}

/// Sup-norm residuals of the first `n` backups from `V = 0`.
pub fn soft_residuals(mdp: &Mdp, w: &RewardWeights, n: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; mdp.n_states()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let next = soft_backup(mdp, w, &v)?;
        out.push(sup_diff(&next, &v));
        v = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::random::random_mdp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_state(n_actions: usize, reward: f64, gamma: f64) -> (Mdp, RewardWeights) {
        let mdp = Mdp::checked(
            1,
            n_actions,
            gamma,
            vec![1.0; n_actions],
            vec![1.0],
            1,
            vec![1.0; n_actions],
        )
        .unwrap();
        (mdp, RewardWeights::new(vec![reward]).unwrap())
    }

    /// Dense double loop straight from the operator's definition.
    fn naive_backup(mdp: &Mdp, w: &RewardWeights, v: &[f64]) -> Vec<f64> {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        (0..ns)
            .map(|s| {
                let mut total = 0.0;
                for a in 0..na {
                    let mut r = 0.0;
                    for k in 0..mdp.feature_dim() {
                        r += w.as_slice()[k] * mdp.features(s, a)[k];
                    }
                    let mut ev = 0.0;
                    for n in 0..ns {
                        ev += mdp.transition(s, a, n) * v[n];
                    }
                    total += (r + mdp.gamma() * ev).exp();
                }
                total.ln()
            })
            .collect()
    }

    #[test]
    fn degenerate_backups() {
        let (mdp, w) = single_state(1, 0.7, 0.5);
        let out = soft_backup(&mdp, &w, &[2.0]).unwrap();
        assert!((out[0] - (0.7 + 0.5 * 2.0)).abs() < 1e-15);

        let (mdp, w) = single_state(2, 0.7, 0.5);
        let out = soft_backup(&mdp, &w, &[2.0]).unwrap();
        assert!((out[0] - (0.7 + 1.0 + 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn backup_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mdp = random_mdp(&mut rng, 3, 2, 3, 0.9);
            let w = RewardWeights::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let fast = soft_backup(&mdp, &w, &v).unwrap();
            let slow = naive_backup(&mdp, &w, &v);
            for (x, y) in fast.iter().zip(&slow) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn backup_rejects_bad_input() {
        let (mdp, w) = single_state(1, 0.0, 0.5);
        assert!(soft_backup(&mdp, &w, &[f64::NAN]).is_err());
        assert!(soft_backup(&mdp, &w, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn closed_form_fixed_points() {
        let (mdp, w) = single_state(1, 0.3, 0.8);
        let p = soft_value_iteration(&mdp, &w, 1e-12, 10_000).unwrap();
        assert!(p.converged);
        assert!((p.v[0] - 0.3 / 0.2).abs() < 1e-9);
        assert!((p.pi.prob(0, 0) - 1.0).abs() < 1e-12);

        let (mdp, w) = single_state(2, 0.3, 0.8);
        let p = soft_value_iteration(&mdp, &w, 1e-12, 10_000).unwrap();
        assert!((p.v[0] - (0.3 + 2f64.ln()) / 0.2).abs() < 1e-9);
        assert!((p.pi.prob(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_long_run_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mdp = random_mdp(&mut rng, 4, 3, 4, 0.9);
        let w = RewardWeights::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut v = vec![0.0; 4];
        for _ in 0..10_000 {
            v = naive_backup(&mdp, &w, &v);
        }
        let p = soft_value_iteration(&mdp, &w, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(p.converged);
        for (x, y) in p.v.iter().zip(&v) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn policy_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mdp = random_mdp(&mut rng, 5, 3, 2, 0.95);
        let w = RewardWeights::new(vec![4.0, -7.0]).unwrap();
        let p = soft_value_iteration(&mdp, &w, 1e-10, 10_000).unwrap();
        p.pi.check_stochastic(1e-9).unwrap();
        for s in 0..5 {
            let row = &p.q[s * 3..s * 3 + 3];
            assert!((p.v[s] - log_sum_exp(row)).abs() < 1e-9);
            for a in 0..3 {
                assert!((p.pi.prob(s, a) - (row[a] - p.v[s]).exp()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (mdp, w) = single_state(2, 1.0, 0.99);
        let p = soft_value_iteration(&mdp, &w, 1e-12, 3).unwrap();
        assert!(!p.converged);
        assert_eq!(p.iterations, 3);
        assert!(soft_value_iteration(&mdp, &w, 0.0, 3).is_err());
        assert!(soft_value_iteration(&mdp, &w, 1e-3, 0).is_err());
    }

    #[test]
    fn large_weights_do_not_overflow() {
        let (mdp, w) = single_state(3, 800.0, 0.5);
        let p = soft_value_iteration(&mdp, &w, 1e-8, 10_000).unwrap();
        assert!(p.v[0].is_finite());
        assert!((p.pi.prob(0, 1) - 1.0 / 3.0).abs() < 1e-12);
    }
}
