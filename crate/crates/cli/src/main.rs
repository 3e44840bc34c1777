use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cirl_core::harness::config::{ExperimentConfig, MuModeName};
use cirl_core::harness::experiment::{curriculum_csv, StrategySpec};
use cirl_core::harness::output::{report, slug, write_outputs};
use cirl_core::harness::{plot_metrics, run_experiment};
use cirl_core::mdp::MdpDocument;
use cirl_core::Error;

#[derive(Parser)]
#[command(
    name = "cirl",
    version,
    about = "Curriculum and self-paced MaxEnt IRL experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write CSV, SVG and report files.
    Run(Common),
    /// Parse the config and build the environment and demonstration pool.
    Validate(Common),
    /// Write demonstration scores and ranks under a teacher strategy.
    ExportCurriculum {
        #[command(flatten)]
        common: Common,
        /// random, r_cirl, p_cirl, anti_r or anti_p.
        #[arg(long, default_value = "r_cirl")]
        strategy: String,
    },
    /// Write the MDP, w* and generated demonstrations as a JSON document.
    DemoPool(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Base seed; repeat r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mu_mode: Option<MuArg>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MuArg {
    Exact,
    Mc,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        let mu = self.mu_mode.map(|m| match m {
            MuArg::Exact => MuModeName::Exact,
            MuArg::Mc => MuModeName::Mc,
        });
        cfg.override_with(self.seed, self.repeats, self.out.clone(), mu)?;
        Ok(cfg)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn write(path: &Path, body: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let setup = cfg.prepare()?;
            common.say(format!(
                "{} states, {} demonstrations, {} repeats",
                setup.env.mdp.n_states(),
                setup.pool.len(),
                cfg.learner.repeats
            ));
            let results = run_experiment(&cfg, &setup, &mut |r| {
                common.say(format!("finished {}", r.strategy));
            })?;
            write_outputs(&cfg.output.dir, &results, &plot_metrics(&cfg))?;
            if !common.quiet {
                print!("{}", report(&results));
            }
            common.say(format!("wrote {}", cfg.output.dir.display()));
        }
        Command::Validate(common) => {
            let cfg = common.load()?;
            let setup = cfg.prepare()?;
            let strategies: Vec<String> =
                cfg.strategies()?.iter().map(ToString::to_string).collect();
            if !common.quiet {
                println!(
                    "ok: {} states, {} actions, {} demonstrations, strategies {}",
                    setup.env.mdp.n_states(),
                    setup.env.mdp.n_actions(),
                    setup.pool.len(),
                    strategies.join(", ")
                );
            }
        }
        Command::ExportCurriculum { common, strategy } => {
            let cfg = common.load()?;
            let strategy = StrategySpec::parse(&strategy)?;
            let setup = cfg.prepare()?;
            let csv = curriculum_csv(&setup, strategy, cfg.learner.seed)?;
            let path = cfg
                .output
                .dir
                .join(format!("curriculum_{}.csv", slug(&strategy)));
            write(&path, &csv)?;
            common.say(format!("wrote {}", path.display()));
        }
        Command::DemoPool(common) => {
            let cfg = common.load()?;
            let setup = cfg.prepare()?;
            let doc = MdpDocument::from_mdp(&setup.env.mdp)
                .with_w_star(&setup.env.w_star)
                .with_pool(&setup.pool);
            let path = cfg.output.dir.join("demo_pool.json");
            write(&path, &doc.to_json()?)?;
            common.say(format!("wrote {}", path.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
