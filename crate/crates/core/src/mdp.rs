//! Tabular MDP model with a linear reward over a dense feature map.
//!
//! States and actions are dense indices `0..n`. Transitions and features are
//! stored row-major; a sparse successor list is built once at construction
//! so backups only touch reachable states.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `[s, a, s']` row-major.
    transition: Vec<f64>,
    p0: Vec<f64>,
    feature_dim: usize,
    /// `[s, a, k]` row-major.
    features: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl Mdp {
    /// Builds an MDP after checking only that every buffer has the right
    /// shape. Probability and discount constraints are reported by
    /// [`validate`]; use [`Mdp::checked`] to reject violations up front.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transition: Vec<f64>,
        p0: Vec<f64>,
        feature_dim: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || feature_dim == 0 {
            return Err(invalid(format!(
                "n_states, n_actions and feature_dim must be positive (got {n_states}, {n_actions}, {feature_dim})"
            )));
        }
        expect_len(
            "transition",
            transition.len(),
            n_states * n_actions * n_states,
        )?;
        expect_len("p0", p0.len(), n_states)?;
        expect_len(
            "features",
            features.len(),
            n_states * n_actions * feature_dim,
        )?;

        let successors = transition
            .chunks_exact(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(next, &p)| (next, p))
                    .collect()
            })
            .collect();

        Ok(Self {
            n_states,
            n_actions,
            gamma,
            transition,
            p0,
            feature_dim,
            features,
            successors,
        })
    }

    /// Like [`Mdp::new`] but fails if [`validate`] reports any violation.
    pub fn checked(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transition: Vec<f64>,
        p0: Vec<f64>,
        feature_dim: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self::new(
            n_states,
            n_actions,
            gamma,
            transition,
            p0,
            feature_dim,
            features,
        )?;
        let violations = validate(&mdp);
        if violations.is_empty() {
            Ok(mdp)
        } else {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(invalid(format!("invalid MDP: {}", listed.join("; "))))
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn transition_tensor(&self) -> &[f64] {
        &self.transition
    }

    pub fn feature_tensor(&self) -> &[f64] {
        &self.features
    }

    /// `T(s' | s, a)`.
    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Non-zero entries of the row `T(· | s, a)` in ascending state order.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.n_actions + a]
    }

    pub fn features(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.feature_dim;
        &self.features[start..start + self.feature_dim]
    }

    /// Largest absolute feature entry over all `(s, a)`.
    pub fn max_feature_abs(&self) -> f64 {
        self.features.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Every action maps `s` back to itself with probability one.
    pub fn is_absorbing(&self, s: usize) -> bool {
        (0..self.n_actions).all(|a| self.transition(s, a, s) == 1.0)
    }

    /// Absorbing with all-zero features: once entered, nothing further
    /// accrues to any feature expectation, so rollouts may stop there.
    pub fn is_terminal(&self, s: usize) -> bool {
        self.is_absorbing(s)
            && (0..self.n_actions).all(|a| self.features(s, a).iter().all(|&x| x == 0.0))
    }

    /// Copy of this MDP with a different initial distribution.
    pub fn with_p0(&self, p0: Vec<f64>) -> Result<Self> {
        expect_len("p0", p0.len(), self.n_states)?;
        let mut out = self.clone();
        out.p0 = p0;
        Ok(out)
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                bound: self.n_states,
            })
        }
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        if a < self.n_actions {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                bound: self.n_actions,
            })
        }
    }

    pub fn check_weights(&self, w: &RewardWeights) -> Result<()> {
        if w.dim() == self.feature_dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: w.dim(),
            })
        }
    }

    /// `⟨w, φ(s, a)⟩` without bounds checks beyond slice indexing.
    pub(crate) fn reward_unchecked(&self, w: &RewardWeights, s: usize, a: usize) -> f64 {
        dot(w.as_slice(), self.features(s, a))
    }
}

fn expect_len(name: &str, actual: usize, expected: usize) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} has length {actual}, expected {expected}"
        )))
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// A single broken MDP invariant, with the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Gamma(f64),
    TransitionNegative {
        s: usize,
        a: usize,
        next: usize,
        value: f64,
    },
    TransitionNonFinite {
        s: usize,
        a: usize,
        next: usize,
    },
    TransitionRowSum {
        s: usize,
        a: usize,
        sum: f64,
    },
    P0Negative {
        state: usize,
        value: f64,
    },
    P0NonFinite {
        state: usize,
    },
    P0Sum(f64),
    FeatureNonFinite {
        s: usize,
        a: usize,
        k: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Gamma(g) => write!(f, "gamma {g} outside [0, 1)"),
            Violation::TransitionNegative { s, a, next, value } => {
                write!(f, "T({next} | {s}, {a}) = {value} is negative")
            }
            Violation::TransitionNonFinite { s, a, next } => {
                write!(f, "T({next} | {s}, {a}) is not finite")
            }
            Violation::TransitionRowSum { s, a, sum } => {
                write!(f, "transition row (s={s}, a={a}) sums to {sum}")
            }
            Violation::P0Negative { state, value } => {
                write!(f, "p0[{state}] = {value} is negative")
            }
            Violation::P0NonFinite { state } => write!(f, "p0[{state}] is not finite"),
            Violation::P0Sum(sum) => write!(f, "p0 sums to {sum}"),
            Violation::FeatureNonFinite { s, a, k } => {
                write!(f, "phi({s}, {a})[{k}] is not finite")
            }
        }
    }
}

/// Checks every value-level invariant and returns all violations found.
pub fn validate(mdp: &Mdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(0.0..1.0).contains(&mdp.gamma) {
        out.push(Violation::Gamma(mdp.gamma));
    }
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    for s in 0..ns {
        for a in 0..na {
            let mut sum = 0.0;
            for next in 0..ns {
                let value = mdp.transition(s, a, next);
                if !value.is_finite() {
                    out.push(Violation::TransitionNonFinite { s, a, next });
                } else if value < 0.0 {
                    out.push(Violation::TransitionNegative { s, a, next, value });
                }
                sum += value;
            }
            if sum.is_finite() && (sum - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::TransitionRowSum { s, a, sum });
            }
            for (k, x) in mdp.features(s, a).iter().enumerate() {
                if !x.is_finite() {
                    out.push(Violation::FeatureNonFinite { s, a, k });
                }
            }
        }
    }
    let mut sum = 0.0;
    for (state, &value) in mdp.p0.iter().enumerate() {
        if !value.is_finite() {
            out.push(Violation::P0NonFinite { state });
        } else if value < 0.0 {
            out.push(Violation::P0Negative { state, value });
        }
        sum += value;
    }
    if sum.is_finite() && (sum - 1.0).abs() > STOCHASTIC_TOL {
        out.push(Violation::P0Sum(sum));
    }
    out
}

/// Reward weight vector `w` of a linear reward `R_w(s, a) = ⟨w, φ(s, a)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights(Vec<f64>);

impl RewardWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("reward weight {i} is not finite")));
        }
        Ok(Self(w))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Expert weights must satisfy `‖w‖₁ ≤ 1`.
    pub fn expert(w: Vec<f64>) -> Result<Self> {
        let w = Self::new(w)?;
        let l1 = w.l1_norm();
        if l1 > 1.0 + 1e-12 {
            return Err(invalid(format!("expert weights have L1 norm {l1} > 1")));
        }
        Ok(w)
    }

    /// Rescales to unit L1 norm; the zero vector is returned unchanged.
    pub fn l1_normalized(raw: &[f64]) -> Result<Self> {
        let l1: f64 = raw.iter().map(|x| x.abs()).sum();
        if l1 == 0.0 {
            return Self::new(raw.to_vec());
        }
        Self::new(raw.iter().map(|x| x / l1).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| x * c).collect())
    }

    /// `self + eta * direction`; fails if the result is not finite.
    pub fn step(&self, eta: f64, direction: &[f64]) -> Result<Self> {
        if direction.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                actual: direction.len(),
            });
        }
        let next: Vec<f64> = self
            .0
            .iter()
            .zip(direction)
            .map(|(w, g)| w + eta * g)
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "weight update with eta {eta} left finite range"
            )));
        }
        Ok(Self(next))
    }
}

/// `R_w(s, a) = ⟨w, φ(s, a)⟩`.
pub fn reward(mdp: &Mdp, w: &RewardWeights, s: usize, a: usize) -> Result<f64> {
    mdp.check_state(s)?;
    mdp.check_action(a)?;
    mdp.check_weights(w)?;
    Ok(mdp.reward_unchecked(w, s, a))
}

/// Recorded state-action sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("trajectory must contain at least one step"));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn start_state(&self) -> usize {
        self.steps[0].0
    }

    pub fn check(&self, mdp: &Mdp) -> Result<()> {
        for &(s, a) in &self.steps {
            mdp.check_state(s)?;
            mdp.check_action(a)?;
        }
        Ok(())
    }
}

/// Fixed batch of demonstrations. Consumption only flips a flag; the pool
/// never shrinks.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoPool {
    demos: Vec<Trajectory>,
    consumed: Vec<bool>,
}

impl DemoPool {
    pub fn new(demos: Vec<Trajectory>) -> Self {
        let consumed = vec![false; demos.len()];
        Self { demos, consumed }
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn demos(&self) -> &[Trajectory] {
        &self.demos
    }

    pub fn get(&self, i: usize) -> Option<&Trajectory> {
        self.demos.get(i)
    }

    pub fn mark_consumed(&mut self, i: usize) {
        self.consumed[i] = true;
    }

    pub fn is_consumed(&self, i: usize) -> bool {
        self.consumed[i]
    }

    pub fn consumed_count(&self) -> usize {
        self.consumed.iter().filter(|&&c| c).count()
    }

    pub fn reset(&mut self) {
        self.consumed.iter_mut().for_each(|c| *c = false);
    }

    pub fn check(&self, mdp: &Mdp) -> Result<()> {
        self.demos.iter().try_for_each(|d| d.check(mdp))
    }

    /// Empirical distribution of the demonstrations' start states.
    pub fn start_distribution(&self, n_states: usize) -> Result<Vec<f64>> {
        if self.demos.is_empty() {
            return Err(invalid("empty demonstration pool"));
        }
        let mut p = vec![0.0; n_states];
        for d in &self.demos {
            let s = d.start_state();
            if s >= n_states {
                return Err(Error::IndexOutOfRange {
                    what: "state",
                    index: s,
                    bound: n_states,
                });
            }
            p[s] += 1.0;
        }
        let n = self.demos.len() as f64;
        p.iter_mut().for_each(|x| *x /= n);
        Ok(p)
    }
}

/// Text-document form of an MDP and, optionally, its demonstrations and
/// expert weights. Flat arrays are row-major: `transition[s][a][s']`,
/// `features[s][a][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub p0: Vec<f64>,
    pub transition: Vec<f64>,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demos: Option<Vec<Vec<(usize, usize)>>>,
}

impl MdpDocument {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        Self {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            gamma: mdp.gamma,
            p0: mdp.p0.clone(),
            transition: mdp.transition.clone(),
            feature_dim: mdp.feature_dim,
            features: mdp.features.clone(),
            w_star: None,
            demos: None,
        }
    }

    pub fn with_pool(mut self, pool: &DemoPool) -> Self {
        self.demos = Some(pool.demos().iter().map(|d| d.steps().to_vec()).collect());
        self
    }

    pub fn with_w_star(mut self, w: &RewardWeights) -> Self {
        self.w_star = Some(w.as_slice().to_vec());
        self
    }

    pub fn to_mdp(&self) -> Result<Mdp> {
        Mdp::checked(
            self.n_states,
            self.n_actions,
            self.gamma,
            self.transition.clone(),
            self.p0.clone(),
            self.feature_dim,
            self.features.clone(),
        )
    }

    pub fn to_pool(&self) -> Result<Option<DemoPool>> {
        let Some(demos) = &self.demos else {
            return Ok(None);
        };
        let demos = demos
            .iter()
            .map(|steps| Trajectory::new(steps.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(DemoPool::new(demos)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
