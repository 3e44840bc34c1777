//! Experiment harness: configuration, seeded repeats, metrics and output files.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;

use crate::error::Result;

use config::ExperimentConfig;
use experiment::{run_repeats, Setup};
use output::{Metric, StrategyResult};

/// Runs every configured strategy on the shared setup. `progress` receives
/// one line per finished strategy.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    setup: &Setup,
    progress: &mut dyn FnMut(&StrategyResult),
) -> Result<Vec<StrategyResult>> {
    let settings = cfg.run_settings(&setup.env);
    let mut results = Vec::new();
    for strategy in cfg.strategies()? {
        let runs = run_repeats(
            setup,
            strategy,
            &settings,
            cfg.learner.seed,
            cfg.learner.repeats,
        )?;
        let result = StrategyResult { strategy, runs };
        progress(&result);
        results.push(result);
    }
    Ok(results)
}

/// Metrics to plot, in configured order.
pub fn plot_metrics(cfg: &ExperimentConfig) -> Vec<Metric> {
    cfg.output
        .metrics
        .iter()
        .filter_map(|m| Metric::parse(m))
        .collect()
}
