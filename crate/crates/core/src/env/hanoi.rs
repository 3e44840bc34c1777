//! Towers of Hanoi as a deterministic sparse-reward MDP.
//!
//! A state assigns every disk to a rod (`rod_of_disk_i` is base-`n_rods`
//! digit `i`, disk 0 being the smallest). Actions are ordered `(source,
//! target)` rod pairs. Illegal moves leave the state unchanged. Features are
//! a one-hot of the state reached by the move, so reward is collected on
//! arrival; the goal state is absorbing with a zero feature vector.

use crate::error::{invalid, Result};
use crate::mdp::{Mdp, RewardWeights};

use super::BuiltEnv;

pub const DEFAULT_HORIZON: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct HanoiSpec {
    pub n_disks: usize,
    pub n_rods: usize,
    /// Every disk ends on this rod.
    pub target_rod: usize,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for HanoiSpec {
    fn default() -> Self {
        Self {
            n_disks: 4,
            n_rods: 3,
            target_rod: 2,
            gamma: 0.9,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl HanoiSpec {
    pub fn n_states(&self) -> usize {
        self.n_rods.pow(self.n_disks as u32)
    }

    pub fn goal_state(&self) -> usize {
        (0..self.n_disks)
            .map(|i| self.target_rod * self.n_rods.pow(i as u32))
            .sum()
    }

    pub fn moves(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for src in 0..self.n_rods {
            for dst in 0..self.n_rods {
                if src != dst {
                    out.push((src, dst));
                }
            }
        }
        out
    }

    pub fn decode(&self, state: usize) -> Vec<usize> {
        let mut rods = Vec::with_capacity(self.n_disks);
        let mut rest = state;
        for _ in 0..self.n_disks {
            rods.push(rest % self.n_rods);
            rest /= self.n_rods;
        }
        rods
    }

    pub fn encode(&self, rods: &[usize]) -> usize {
        rods.iter().rev().fold(0, |acc, &r| acc * self.n_rods + r)
    }

    fn top_disk(rods: &[usize], rod: usize) -> Option<usize> {
        rods.iter().position(|&r| r == rod)
    }

    /// State after moving the top disk of `src` onto `dst`, or `None` when
    /// the move is illegal.
    pub fn apply(&self, state: usize, (src, dst): (usize, usize)) -> Option<usize> {
        let mut rods = self.decode(state);
        let disk = Self::top_disk(&rods, src)?;
        if let Some(top) = Self::top_disk(&rods, dst) {
            if top < disk {
                return None;
            }
        }
        rods[disk] = dst;
        Some(self.encode(&rods))
    }

    /// Rods of disks from largest to smallest, as letters (`A`, `B`, ...).
    pub fn label(&self, state: usize) -> String {
        self.decode(state)
            .iter()
            .rev()
            .map(|&r| char::from(b'A' + r as u8))
            .collect()
    }
}

pub fn build_hanoi(spec: &HanoiSpec) -> Result<BuiltEnv> {
    if spec.n_disks == 0 || spec.n_rods < 2 || spec.n_rods > 26 || spec.target_rod >= spec.n_rods {
        return Err(invalid(
            "Hanoi needs at least one disk, 2 to 26 rods and a valid target rod",
        ));
    }
    let n = spec.n_states();
    let moves = spec.moves();
    let na = moves.len();
    let goal = spec.goal_state();
    let mut transition = vec![0.0; n * na * n];
    let mut features = vec![0.0; n * na * n];
    for s in 0..n {
        for (a, &mv) in moves.iter().enumerate() {
            let next = if s == goal {
                s
            } else {
                spec.apply(s, mv).unwrap_or(s)
            };
            transition[(s * na + a) * n + next] = 1.0;
            if s != goal {
                features[(s * na + a) * n + next] = 1.0;
            }
        }
    }
    let mut w_star = vec![0.0; n];
    w_star[goal] = 1.0;
    let mdp = Mdp::checked(
        n,
        na,
        spec.gamma,
        transition,
        vec![1.0 / n as f64; n],
        n,
        features,
    )?;
    Ok(BuiltEnv {
        mdp,
        w_star: RewardWeights::expert(w_star)?,
        state_labels: (0..n).map(|s| spec.label(s)).collect(),
        action_labels: moves
            .iter()
            .map(|&(a, b)| {
                format!(
                    "{}->{}",
                    char::from(b'A' + a as u8),
                    char::from(b'A' + b as u8)
                )
            })
            .collect(),
        default_horizon: spec.horizon,
    })
}
