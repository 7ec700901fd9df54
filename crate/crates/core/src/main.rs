use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use intersect_core::harness::acceptance::paper_check;
use intersect_core::harness::config::OUTPUT_ROOT_ENV;
use intersect_core::harness::{run, ExperimentKind, RunConfig};
use intersect_core::Error;

/// Learn intersections of halfspaces with a margin.
#[derive(Parser)]
#[command(name = "intersect", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labeled dataset and write it with its target.
    Gen(Common),
    /// Train with reweighting boosting.
    LearnBoost(Common),
    /// Train with the covering booster.
    LearnCover(Common),
    /// Emit a hit-and-run trace over one consistency body.
    SampleDiag(Common),
    /// Run the acceptance suite.
    PaperCheck(Common),
    /// Evaluate a stored hypothesis record.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Record written by gen (target.txt) or learn-cover (hypothesis.txt).
        #[arg(long)]
        hypothesis: Option<PathBuf>,
        /// Labeled CSV; fresh draws from the source when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; every key has a default.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set learner.epsilon=0.1`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, short, env = OUTPUT_ROOT_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

impl Common {
    fn resolve(&self, kind: ExperimentKind) -> Result<RunConfig, Error> {
        let mut overrides = self.overrides.clone();
        let mut push = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push(format!("{key}={v}"));
            }
        };
        push("run.seed", self.seed.map(|v| v.to_string()));
        push("learner.epsilon", self.epsilon.map(|v| format!("{v:?}")));
        push("learner.gamma", self.gamma.map(|v| format!("{v:?}")));
        push("gen.samples", self.samples.map(|v| v.to_string()));
        let mut cfg = RunConfig::load(self.config.as_deref(), &overrides)?;
        cfg.run.kind = kind;
        if let Some(dir) = &self.output_dir {
            cfg.run.output_dir = dir.clone();
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    let (common, kind) = match &cli.command {
        Command::Gen(c) => (c, ExperimentKind::Gen),
        Command::LearnBoost(c) => (c, ExperimentKind::LearnBoost),
        Command::LearnCover(c) => (c, ExperimentKind::LearnCover),
        Command::SampleDiag(c) => (c, ExperimentKind::SampleDiag),
        Command::PaperCheck(c) => (c, ExperimentKind::PaperCheck),
        Command::Eval { common, .. } => (common, ExperimentKind::Eval),
    };
    let mut cfg = common.resolve(kind)?;
    let dir = cfg.run.output_dir.clone();
    match cli.command {
        Command::PaperCheck(_) => {
            let report = paper_check(&dir, |c| println!("{}", c.line()))?;
            println!("metrics: {}", report.metrics_path.display());
            return Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(5) });
        }
        Command::Eval { hypothesis, data, .. } => {
            if hypothesis.is_some() {
                cfg.eval.hypothesis = hypothesis;
            }
            if data.is_some() {
                cfg.eval.data = data;
            }
            let m = run::run_eval(&cfg)?;
            println!("total {:.6} false_pos {:.6} false_neg {:.6} on {}", m.total_error, m.false_pos, m.false_neg, m.evaluation_samples);
        }
        Command::LearnCover(_) => {
            let m = run::run_learn_cover(&cfg)?;
            println!(
                "tag {} regions {} total {:.6} false_neg {:.6} eta_hat {:.4}",
                m.termination_tag.map_or("-".to_string(), |t| t.to_string()),
                m.region_count,
                m.total_error,
                m.false_neg,
                m.eta_hat.unwrap_or(f64::NAN)
            );
        }
        Command::LearnBoost(_) => {
            let m = run::run_learn_boost(&cfg)?;
            println!("rounds {} converged {} total {:.6}", m.rounds, m.converged.unwrap_or(false), m.total_error);
        }
        Command::Gen(_) => println!("{}", run::run_gen(&cfg)?.display()),
        Command::SampleDiag(_) => println!("{}", run::run_sample_diag(&cfg)?.display()),
    }
    println!("output: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
