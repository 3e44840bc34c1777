//! Rectangular gridworlds with one-hot cell features.
//!
//! Actions are N, S, E, W and stay. A commanded move succeeds with
//! probability `1 − slip_prob`; otherwise the effect of a uniformly random
//! action is applied (which may coincide with the commanded one). Moves off
//! the grid leave the agent in place. Absorbing cells self-loop and carry a
//! zero feature vector.

use crate::error::{invalid, Result};
use crate::mdp::{Mdp, RewardWeights};

use super::BuiltEnv;

pub const ACTIONS: [&str; 5] = ["N", "S", "E", "W", "stay"];
pub const DEFAULT_GAMMA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMap {
    /// +1 in the bottom-right corner.
    SingleGoal,
    /// +1 in the bottom-right corner behind a row of −1 cells with a gap in
    /// the last column.
    Wall,
    /// +1 top-right, +0.5 bottom-left and a central −1 block.
    TwoGoals,
}

impl GridMap {
    pub fn name(&self) -> &'static str {
        match self {
            GridMap::SingleGoal => "grid1",
            GridMap::Wall => "grid2",
            GridMap::TwoGoals => "grid3",
        }
    }

    pub fn reward_map(&self, width: usize, height: usize) -> Vec<f64> {
        let mut map = vec![0.0; width * height];
        let cell = |x: usize, y: usize| y * width + x;
        match self {
            GridMap::SingleGoal => map[cell(width - 1, height - 1)] = 1.0,
            GridMap::Wall => {
                let y = height / 2;
                for x in 0..width.saturating_sub(1) {
                    map[cell(x, y)] = -1.0;
                }
                map[cell(width - 1, height - 1)] = 1.0;
            }
            GridMap::TwoGoals => {
                let rx = (width / 5).max(1);
                let ry = (height / 5).max(1);
                let (x0, y0) = ((width - rx) / 2, (height - ry) / 2);
                for y in y0..y0 + ry {
                    for x in x0..x0 + rx {
                        map[cell(x, y)] = -1.0;
                    }
                }
                map[cell(width - 1, 0)] = 1.0;
                map[cell(0, height - 1)] = 0.5;
            }
        }
        map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, `y * width + x`.
    pub reward_map: Vec<f64>,
    pub slip_prob: f64,
    pub absorbing_cells: Vec<usize>,
    pub horizon_cap: usize,
    pub gamma: f64,
}

impl GridworldSpec {
    pub fn new(width: usize, height: usize, reward_map: Vec<f64>) -> Self {
        Self {
            width,
            height,
            reward_map,
            slip_prob: 0.0,
            absorbing_cells: Vec::new(),
            horizon_cap: 2 * (width + height),
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn preset(map: GridMap, width: usize, height: usize) -> Self {
        Self::new(width, height, map.reward_map(width, height))
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    fn check(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("gridworld width and height must be positive"));
        }
        if self.reward_map.len() != self.n_cells() {
            return Err(invalid(format!(
                "reward_map has {} entries, expected {}x{} = {}",
                self.reward_map.len(),
                self.width,
                self.height,
                self.n_cells()
            )));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(invalid(format!(
                "slip_prob {} outside [0, 1)",
                self.slip_prob
            )));
        }
        if let Some(&c) = self.absorbing_cells.iter().find(|&&c| c >= self.n_cells()) {
            return Err(invalid(format!("absorbing cell {c} outside the grid")));
        }
        if self.absorbing_cells.len() >= self.n_cells() {
            return Err(invalid("every cell is absorbing"));
        }
        if self.horizon_cap == 0 {
            return Err(invalid("horizon_cap must be positive"));
        }
        if self.reward_map.iter().any(|r| !r.is_finite()) {
            return Err(invalid("reward_map has non-finite entries"));
        }
        Ok(())
    }

    /// Cell reached from `cell` by action `a` when the move is not slipped.
    pub fn move_target(&self, cell: usize, a: usize) -> usize {
        let (x, y) = (cell % self.width, cell / self.width);
        let (nx, ny) = match a {
            0 if y > 0 => (x, y - 1),
            1 if y + 1 < self.height => (x, y + 1),
            2 if x + 1 < self.width => (x + 1, y),
            3 if x > 0 => (x - 1, y),
            _ => (x, y),
        };
        ny * self.width + nx
    }

    pub fn is_absorbing(&self, cell: usize) -> bool {
        self.absorbing_cells.contains(&cell)
    }
}

/// Builds the MDP with `p0` uniform over non-absorbing cells and
/// `w* = reward_map / ‖reward_map‖₁`.
pub fn build_gridworld(spec: &GridworldSpec) -> Result<BuiltEnv> {
    spec.check()?;
    let n = spec.n_cells();
    let na = ACTIONS.len();
    let mut transition = vec![0.0; n * na * n];
    let mut features = vec![0.0; n * na * n];
    for s in 0..n {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * n..(s * na + a + 1) * n];
            if spec.is_absorbing(s) {
                row[s] = 1.0;
                continue;
            }
            row[spec.move_target(s, a)] += 1.0 - spec.slip_prob;
            if spec.slip_prob > 0.0 {
                for b in 0..na {
                    row[spec.move_target(s, b)] += spec.slip_prob / na as f64;
                }
            }
            features[(s * na + a) * n + s] = 1.0;
        }
    }
    let live = n - spec
        .absorbing_cells
        .iter()
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let p0 = (0..n)
        .map(|s| {
            if spec.is_absorbing(s) {
                0.0
            } else {
                1.0 / live as f64
            }
        })
        .collect();
    let mdp = Mdp::checked(n, na, spec.gamma, transition, p0, n, features)?;
    let w_star = RewardWeights::l1_normalized(&spec.reward_map)?;
    let state_labels = (0..n)
        .map(|c| format!("({},{})", c % spec.width, c / spec.width))
        .collect();
    Ok(BuiltEnv {
        mdp,
        w_star,
        state_labels,
        action_labels: ACTIONS.iter().map(|s| s.to_string()).collect(),
        default_horizon: spec.horizon_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate;

    #[test]
    fn deterministic_move_east() {
        let env = build_gridworld(&GridworldSpec::new(2, 1, vec![0.0, 1.0])).unwrap();
        assert_eq!(env.mdp.transition(0, 2, 1), 1.0);
        assert_eq!(env.mdp.transition(0, 3, 0), 1.0);
        assert_eq!(env.w_star.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn slip_mixture_mass() {
        let mut spec = GridworldSpec::preset(GridMap::SingleGoal, 5, 5);
        spec.slip_prob = 0.2;
        let env = build_gridworld(&spec).unwrap();
        // Centre cell (2,2) = 12; every action has a distinct target there.
        let target = spec.move_target(12, 2);
        assert!((env.mdp.transition(12, 2, target) - 0.84).abs() < 1e-12);
        assert!((env.mdp.transition(12, 2, spec.move_target(12, 0)) - 0.04).abs() < 1e-12);
        assert!(validate(&env.mdp).is_empty());
    }

    #[test]
    fn presets_validate_and_normalize() {
        for map in [GridMap::SingleGoal, GridMap::Wall, GridMap::TwoGoals] {
            for (w, h) in [(5, 5), (20, 20), (3, 4)] {
                let env = build_gridworld(&GridworldSpec::preset(map, w, h)).unwrap();
                assert!(validate(&env.mdp).is_empty());
                assert!((env.w_star.l1_norm() - 1.0).abs() < 1e-12);
                assert_eq!(env.mdp.feature_dim(), w * h);
            }
        }
        let wall = GridMap::Wall.reward_map(5, 5);
        assert_eq!(wall.iter().filter(|&&r| r < 0.0).count(), 4);
        let two = GridMap::TwoGoals.reward_map(20, 20);
        assert_eq!(two.iter().filter(|&&r| r < 0.0).count(), 16);
    }

    #[test]
    fn absorbing_cells_self_loop_with_zero_features() {
        let mut spec = GridworldSpec::preset(GridMap::SingleGoal, 3, 3);
        spec.absorbing_cells = vec![8];
        spec.slip_prob = 0.1;
        let env = build_gridworld(&spec).unwrap();
        assert!(env.mdp.is_terminal(8));
        assert_eq!(env.mdp.p0()[8], 0.0);
        assert!(validate(&env.mdp).is_empty());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_gridworld(&GridworldSpec::new(2, 2, vec![0.0; 3])).is_err());
        let mut spec = GridworldSpec::new(2, 2, vec![0.0; 4]);
        spec.slip_prob = 1.0;
        assert!(build_gridworld(&spec).is_err());
        let mut spec = GridworldSpec::new(2, 2, vec![0.0; 4]);
        spec.absorbing_cells = vec![7];
        assert!(build_gridworld(&spec).is_err());
    }
}
