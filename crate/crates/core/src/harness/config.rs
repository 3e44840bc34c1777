//! TOML experiment configuration.
//!
//! ```toml
//! [environment]
//! kind = "gridworld"          # gridworld | hanoi | file
//! map = "grid3"               # grid1 | grid2 | grid3 | custom
//! width = 5
//! height = 5
//! gamma = 0.6
//!
//! [expert]
//! noise_prob = 0.0
//!
//! [learner]
//! repeats = 20
//!
//! [strategy]
//! strategies = ["random", "r_cirl", "p_cirl", "batch", "spirl:0.01"]
//!
//! [output]
//! dir = "out/grid3"
//! ```
//!
//! Every key other than `environment.kind` (and `environment.map` for
//! gridworlds) has a default; see the field docs. Unknown keys are errors.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::expert::{expert_policy, sample_starts, ExpertSpec};
use crate::env::gridworld::{build_gridworld, GridMap, GridworldSpec};
use crate::env::hanoi::{build_hanoi, HanoiSpec};
use crate::env::BuiltEnv;
use crate::error::{Error, Result};
use crate::features::{default_mc_horizon, DEFAULT_TRUNCATION_TOL};
use crate::learner::{LearnerConfig, LrSchedule, MuMode};
use crate::mdp::{MdpDocument, RewardWeights};
use crate::soft_vi::{SoftViConfig, DEFAULT_MAX_ITER, DEFAULT_TOL};

use super::experiment::{RunSettings, Setup, StrategySpec};

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_STRATEGIES: [&str; 9] = [
    "random",
    "r_cirl",
    "p_cirl",
    "anti_r",
    "anti_p",
    "batch",
    "spirl:0.01",
    "spirl:0.1",
    "spirl:1",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Gridworld,
    Hanoi,
    /// An MDP document (JSON) with `w_star`, optionally carrying its own
    /// demonstrations.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvKind,
    /// Gridworld reward map: `grid1`, `grid2`, `grid3` or `custom`.
    pub map: Option<String>,
    /// Gridworld size, default 5 x 5.
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Row-major rewards for `map = "custom"`.
    pub reward_map: Option<Vec<f64>>,
    #[serde(default)]
    pub slip_prob: f64,
    #[serde(default)]
    pub absorbing_cells: Vec<usize>,
    /// Default 0.9. Ignored for `kind = "file"`.
    pub gamma: Option<f64>,
    /// Demonstration length cap: `2 (width + height)` for gridworlds, 40 for
    /// Hanoi, the state count for files.
    pub horizon: Option<usize>,
    /// Hanoi size, default 4 disks on 3 rods.
    pub n_disks: Option<usize>,
    pub n_rods: Option<usize>,
    /// MDP document for `kind = "file"`, relative to the config file.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    /// Probability of a uniform random action at each demonstration step.
    pub noise_prob: f64,
    /// Number of distinct start states; default all candidates (every
    /// non-absorbing gridworld cell, every Hanoi state).
    pub n_demos: Option<usize>,
    /// Seeds start sampling and demonstration rollouts. The pool is shared
    /// by all strategies and repeats.
    pub seed: u64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            noise_prob: 0.0,
            n_demos: None,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuModeName {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub mu_mode: MuModeName,
    /// Rollouts per Monte-Carlo estimate.
    pub n_rollouts: usize,
    /// Rollout length; default the horizon at which `γ^H / (1 − γ)` drops
    /// below `mu_tol`.
    pub mc_horizon: Option<usize>,
    pub mu_tol: f64,
    pub svi_tol: f64,
    pub svi_max_iter: usize,
    pub repeats: usize,
    /// Repeat `r` uses seed `seed + r`.
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            mu_mode: MuModeName::Exact,
            n_rollouts: 50,
            mc_horizon: None,
            mu_tol: DEFAULT_TRUNCATION_TOL,
            svi_tol: DEFAULT_TOL,
            svi_max_iter: DEFAULT_MAX_ITER,
            repeats: 20,
            seed: 1000,
            batch_size: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    pub strategies: Vec<String>,
    /// Steps for `batch` and `spirl:*`; default one per curriculum minibatch.
    pub steps: Option<usize>,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            strategies: DEFAULT_STRATEGIES.iter().map(|s| s.to_string()).collect(),
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Relative to the working directory.
    pub dir: PathBuf,
    /// Metrics plotted, from `feature_mismatch` and `reward_gap`. Both are
    /// always written to the CSV files.
    pub metrics: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            metrics: vec!["feature_mismatch".into(), "reward_gap".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub expert: ExpertConfig,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative paths in the document resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a document. Parse errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        match env.kind {
            EnvKind::Gridworld => {
                let map = env
                    .map
                    .as_deref()
                    .ok_or_else(|| config_err("missing key `environment.map` for a gridworld"))?;
                if !matches!(map, "grid1" | "grid2" | "grid3" | "custom") {
                    return Err(config_err(format!(
                        "environment.map must be grid1, grid2, grid3 or custom, got `{map}`"
                    )));
                }
                if map == "custom" && env.reward_map.is_none() {
                    return Err(config_err(
                        "missing key `environment.reward_map` for map = \"custom\"",
                    ));
                }
                if map != "custom" && env.reward_map.is_some() {
                    return Err(config_err(
                        "environment.reward_map is only used with map = \"custom\"",
                    ));
                }
            }
            EnvKind::Hanoi => {}
            EnvKind::File => {
                if env.path.is_none() {
                    return Err(config_err(
                        "missing key `environment.path` for kind = \"file\"",
                    ));
                }
            }
        }
        if let Some(g) = env.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(config_err(format!(
                    "environment.gamma must be in [0, 1), got {g}"
                )));
            }
        }
        if env.horizon == Some(0) {
            return Err(config_err("environment.horizon must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.expert.noise_prob) {
            return Err(config_err(format!(
                "expert.noise_prob must be in [0, 1], got {}",
                self.expert.noise_prob
            )));
        }
        if self.expert.n_demos == Some(0) {
            return Err(config_err("expert.n_demos must be at least 1"));
        }
        let l = &self.learner;
        if l.repeats == 0 {
            return Err(config_err("learner.repeats must be at least 1"));
        }
        if l.batch_size == 0 {
            return Err(config_err("learner.batch_size must be at least 1"));
        }
        if l.n_rollouts == 0 || l.mc_horizon == Some(0) {
            return Err(config_err(
                "learner.n_rollouts and learner.mc_horizon must be at least 1",
            ));
        }
        if !(l.mu_tol > 0.0) || !(l.svi_tol > 0.0) || l.svi_max_iter == 0 {
            return Err(config_err(
                "learner tolerances and svi_max_iter must be positive",
            ));
        }
        if self.strategy.strategies.is_empty() {
            return Err(config_err("strategy.strategies is empty"));
        }
        self.strategies()?;
        if self.strategy.steps == Some(0) {
            return Err(config_err("strategy.steps must be at least 1"));
        }
        for m in &self.output.metrics {
            if m != "feature_mismatch" && m != "reward_gap" {
                return Err(config_err(format!("unknown metric `{m}`")));
            }
        }
        Ok(())
    }

    pub fn strategies(&self) -> Result<Vec<StrategySpec>> {
        let specs = self
            .strategy
            .strategies
            .iter()
            .map(|s| StrategySpec::parse(s))
            .collect::<Result<Vec<_>>>()?;
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].contains(s) {
                return Err(config_err(format!("strategy `{s}` listed twice")));
            }
        }
        Ok(specs)
    }

    fn gamma(&self) -> f64 {
        self.environment.gamma.unwrap_or(DEFAULT_GAMMA)
    }

    /// Builds the environment and the candidate start states.
    pub fn build_environment(&self) -> Result<(BuiltEnv, Vec<usize>)> {
        let env = &self.environment;
        match env.kind {
            EnvKind::Gridworld => {
                let width = env.width.unwrap_or(5);
                let height = env.height.unwrap_or(5);
                let reward_map = match env.map.as_deref() {
                    Some("grid1") => GridMap::SingleGoal.reward_map(width, height),
                    Some("grid2") => GridMap::Wall.reward_map(width, height),
                    Some("grid3") => GridMap::TwoGoals.reward_map(width, height),
                    _ => env.reward_map.clone().unwrap_or_default(),
                };
                let mut spec = GridworldSpec::new(width, height, reward_map);
                spec.slip_prob = env.slip_prob;
                spec.absorbing_cells = env.absorbing_cells.clone();
                spec.gamma = self.gamma();
                if let Some(h) = env.horizon {
                    spec.horizon_cap = h;
                }
                let built = build_gridworld(&spec).map_err(|e| config_err(e.to_string()))?;
                let starts = (0..spec.n_cells())
                    .filter(|&c| !spec.is_absorbing(c))
                    .collect();
                Ok((built, starts))
            }
            EnvKind::Hanoi => {
                let mut spec = HanoiSpec {
                    gamma: self.gamma(),
                    ..HanoiSpec::default()
                };
                if let Some(n) = env.n_disks {
                    spec.n_disks = n;
                }
                if let Some(n) = env.n_rods {
                    spec.n_rods = n;
                    spec.target_rod = n.saturating_sub(1);
                }
                if let Some(h) = env.horizon {
                    spec.horizon = h;
                }
                let n = (spec.n_rods as u64).checked_pow(spec.n_disks as u32);
                if n.is_none_or(|n| n > 6561) {
                    return Err(config_err(
                        "Hanoi instance too large for dense tabular storage",
                    ));
                }
                let built = build_hanoi(&spec).map_err(|e| config_err(e.to_string()))?;
                let starts = (0..spec.n_states()).collect();
                Ok((built, starts))
            }
            EnvKind::File => {
                let doc = self.load_document()?;
                let mdp = doc.to_mdp().map_err(|e| config_err(e.to_string()))?;
                let w = doc
                    .w_star
                    .clone()
                    .ok_or_else(|| config_err("MDP document has no `w_star`"))?;
                let w_star = RewardWeights::new(w).map_err(|e| config_err(e.to_string()))?;
                mdp.check_weights(&w_star)
                    .map_err(|e| config_err(e.to_string()))?;
                let starts = (0..mdp.n_states()).filter(|&s| mdp.p0()[s] > 0.0).collect();
                let n = mdp.n_states();
                let built = BuiltEnv {
                    state_labels: (0..n).map(|s| s.to_string()).collect(),
                    action_labels: (0..mdp.n_actions()).map(|a| a.to_string()).collect(),
                    default_horizon: env.horizon.unwrap_or(n),
                    mdp,
                    w_star,
                };
                Ok((built, starts))
            }
        }
    }

    fn load_document(&self) -> Result<MdpDocument> {
        let rel = self.environment.path.as_ref().expect("checked in validate");
        let path = self.base_dir.join(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        MdpDocument::from_json(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn learner_config(&self, env: &BuiltEnv) -> LearnerConfig {
        let l = &self.learner;
        let mu_mode = match l.mu_mode {
            MuModeName::Exact => MuMode::Exact { tol: l.mu_tol },
            MuModeName::Mc => MuMode::MonteCarlo {
                n_rollouts: l.n_rollouts,
                horizon: l
                    .mc_horizon
                    .unwrap_or_else(|| default_mc_horizon(env.mdp.gamma(), l.mu_tol)),
            },
        };
        LearnerConfig {
            svi: SoftViConfig {
                tol: l.svi_tol,
                max_iter: l.svi_max_iter,
            },
            mu_mode,
            lr: LrSchedule::InverseTime,
        }
    }

    pub fn run_settings(&self, env: &BuiltEnv) -> RunSettings {
        RunSettings {
            learner: self.learner_config(env),
            batch_size: self.learner.batch_size,
            steps: self.strategy.steps,
        }
    }

    /// Environment, expert and demonstration pool shared by every run.
    pub fn prepare(&self) -> Result<Setup> {
        let (env, candidates) = self.build_environment()?;
        let learner = self.learner_config(&env);
        if let EnvKind::File = self.environment.kind {
            if let Some(pool) = self.load_document()?.to_pool()? {
                let expert = expert_policy(&env.mdp, &env.w_star)?;
                return Setup::with_pool(env, expert, pool, &learner);
            }
        }
        if candidates.is_empty() {
            return Err(config_err("no candidate start states"));
        }
        let starts = match self.expert.n_demos {
            Some(n) if n < candidates.len() => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.expert.seed ^ 0x57a7_75ee_d000_0001);
                sample_starts(&candidates, n, &mut rng)
            }
            _ => candidates,
        };
        let spec = ExpertSpec {
            noise_prob: self.expert.noise_prob,
            horizon: self.environment.horizon.unwrap_or(env.default_horizon),
        };
        Setup::new(env, &spec, &starts, self.expert.seed, &learner)
    }

    /// Applies command-line overrides.
    pub fn override_with(
        &mut self,
        seed: Option<u64>,
        repeats: Option<usize>,
        out: Option<PathBuf>,
        mu_mode: Option<MuModeName>,
    ) -> Result<()> {
        if let Some(s) = seed {
            self.learner.seed = s;
        }
        if let Some(r) = repeats {
            self.learner.repeats = r;
        }
        if let Some(o) = out {
            self.output.dir = o;
        }
        if let Some(m) = mu_mode {
            self.learner.mu_mode = m;
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[environment]\nkind = \"gridworld\"\nmap = \"grid1\"\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.learner.repeats, 20);
        assert_eq!(cfg.learner.batch_size, 1);
        assert_eq!(cfg.strategies().unwrap().len(), 9);
        let (env, starts) = cfg.build_environment().unwrap();
        assert_eq!(env.mdp.n_states(), 25);
        assert_eq!(starts.len(), 25);
        assert_eq!(env.mdp.gamma(), DEFAULT_GAMMA);
    }

    #[test]
    fn missing_environment_key_is_named() {
        let err = ExperimentConfig::from_toml("[environment]\nmap = \"grid1\"\n").unwrap_err();
        assert!(err.to_string().contains("kind"), "{err}");
        let err = ExperimentConfig::from_toml("[learner]\nrepeats = 2\n").unwrap_err();
        assert!(err.to_string().contains("environment"), "{err}");
        let err = ExperimentConfig::from_toml("[environment]\nkind = \"gridworld\"\n").unwrap_err();
        assert!(err.to_string().contains("environment.map"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected_with_line() {
        let text = format!("{MINIMAL}\n[learner]\nrepeets = 3\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("repeets"), "{err}");
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for extra in [
            "[learner]\nrepeats = 0\n",
            "[strategy]\nstrategies = [\"greedy\"]\n",
            "[strategy]\nstrategies = [\"spirl:0\"]\n",
            "[strategy]\nstrategies = [\"batch\", \"batch\"]\n",
            "[expert]\nnoise_prob = 1.5\n",
            "[output]\nmetrics = [\"accuracy\"]\n",
        ] {
            assert!(
                ExperimentConfig::from_toml(&format!("{MINIMAL}{extra}")).is_err(),
                "{extra}"
            );
        }
        assert!(ExperimentConfig::from_toml(
            "[environment]\nkind = \"gridworld\"\nmap = \"grid1\"\ngamma = 1.0\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml(
            "[environment]\nkind = \"gridworld\"\nmap = \"custom\"\n"
        )
        .is_err());
    }

    #[test]
    fn custom_map_and_sampled_starts() {
        let text = "[environment]\nkind = \"gridworld\"\nmap = \"custom\"\nwidth = 3\nheight = 2\n\
                    reward_map = [0, 0, 1, 0, 0, -1]\ngamma = 0.5\n[expert]\nn_demos = 4\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let setup = cfg.prepare().unwrap();
        assert_eq!(setup.pool.len(), 4);
        assert_eq!(setup.env.mdp.gamma(), 0.5);
        assert!((setup.env.w_star.l1_norm() - 1.0).abs() < 1e-12);
        let again = cfg.prepare().unwrap();
        assert_eq!(setup.pool, again.pool);
    }

    #[test]
    fn hanoi_pool_covers_every_state() {
        let cfg = ExperimentConfig::from_toml("[environment]\nkind = \"hanoi\"\n").unwrap();
        let setup = cfg.prepare().unwrap();
        assert_eq!(setup.pool.len(), 81);
        let goal = HanoiSpec::default().goal_state();
        for xi in setup.pool.demos() {
            assert_eq!(xi.steps().last().unwrap().0, goal);
        }
    }

    #[test]
    fn file_environment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = ExperimentConfig::from_toml(MINIMAL)
            .unwrap()
            .prepare()
            .unwrap();
        let doc = MdpDocument::from_mdp(&grid.env.mdp)
            .with_w_star(&grid.env.w_star)
            .with_pool(&grid.pool);
        std::fs::write(dir.path().join("env.json"), doc.to_json().unwrap()).unwrap();
        let cfg_path = dir.path().join("exp.toml");
        std::fs::write(
            &cfg_path,
            "[environment]\nkind = \"file\"\npath = \"env.json\"\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&cfg_path).unwrap();
        let setup = cfg.prepare().unwrap();
        assert_eq!(setup.pool, grid.pool);
        assert_eq!(setup.reference_mu, grid.reference_mu);
    }

    #[test]
    fn mc_horizon_default_follows_tolerance() {
        let text = format!("{MINIMAL}gamma = 0.5\n[learner]\nmu_mode = \"mc\"\nmu_tol = 0.001\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let (env, _) = cfg.build_environment().unwrap();
        match cfg.learner_config(&env).mu_mode {
            MuMode::MonteCarlo {
                n_rollouts,
                horizon,
            } => {
                assert_eq!(n_rollouts, 50);
                assert_eq!(horizon, default_mc_horizon(0.5, 0.001));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.override_with(
            Some(5),
            Some(2),
            Some("elsewhere".into()),
            Some(MuModeName::Mc),
        )
        .unwrap();
        assert_eq!((cfg.learner.seed, cfg.learner.repeats), (5, 2));
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.learner.mu_mode, MuModeName::Mc);
        assert!(cfg.override_with(None, Some(0), None, None).is_err());
    }
}
