use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use schedlab::config::{Pipeline, Preset, RunConfig};
use schedlab::env::Objective;
use schedlab::eval::{self, AgentSpec, SweepSpec};
use schedlab::pipeline::{self, TrainOptions};
use schedlab::seeds::{derive_seed, SeedSpace};
use schedlab::selftest::{self, SelfTestOptions};
use schedlab::workload::{generate_jobset, Mode};

#[derive(Parser)]
#[command(name = "schedlab", version, about = "Cluster scheduling RL laboratory")]
struct Cli {
    /// Worker threads for rollouts and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic jobsets as JSON files.
    Gen {
        #[command(flatten)]
        run: RunArgs,
        /// Number of jobsets to write.
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Behavior cloning and/or policy-gradient training.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// bc, pg or bc-then-pg.
        #[arg(long)]
        pipeline: Option<Pipeline>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from the run directory's saved state.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate agents over a load sweep on held-out jobsets.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated: sjf, packer, random, policy:<checkpoint>.
        #[arg(long)]
        agents: Option<String>,
        /// Comma-separated loads, e.g. 0.5,0.9,1.3.
        #[arg(long)]
        loads: Option<String>,
        #[arg(long)]
        seeds_per_cell: Option<usize>,
    },
    /// Summarize a training metrics log into tidy curve CSVs.
    Curves {
        /// metrics.csv written by `train`.
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient checks, environment fuzz, returns oracle and bandit sanity.
    Selftest {
        /// Corrupt this layer's gradient; the gradient check must then fail.
        #[arg(long)]
        inject_fault: Option<usize>,
        #[arg(long, default_value_t = 100)]
        fuzz_episodes: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON; keys override the preset named inside it.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// paper or desk.
    #[arg(long, alias = "scale")]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// online or offline.
    #[arg(long)]
    mode: Option<Mode>,
    /// slowdown or completion-time.
    #[arg(long)]
    objective: Option<Objective>,
    /// Target cluster load for online jobsets.
    #[arg(long)]
    load: Option<f64>,
}

impl RunArgs {
    fn load_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::preset(self.preset.unwrap_or(Preset::Paper)),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(mode) = self.mode {
            config.env.mode = mode;
        }
        if let Some(objective) = self.objective {
            config.env.objective = objective;
        }
        if let Some(load) = self.load {
            config.load = Some(load);
        }
        if let Some(out) = &self.out {
            config.out_dir = out.display().to_string();
        }
        Ok(config)
    }
}

fn write_config(out: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(pipeline::CONFIG_FILE), config.to_json()?)?;
    Ok(())
}

fn cmd_gen(run: &RunArgs, count: usize) -> Result<()> {
    let config = run.load_config()?.resolved()?;
    let out = PathBuf::from(&config.out_dir);
    write_config(&out, &config)?;
    for i in 0..count {
        let seed = derive_seed(config.seed, SeedSpace::TrainJobsets, &[i as u64]);
        let jobset = generate_jobset(&config.workload, config.mode(), seed)?;
        fs::write(out.join(format!("jobset_{i:04}.json")), jobset.to_json()?)?;
    }
    println!("wrote {count} jobsets to {}", out.display());
    Ok(())
}

fn cmd_train(run: &RunArgs, pipeline: Option<Pipeline>, epochs: Option<usize>, resume: bool) -> Result<()> {
    let mut config = run.load_config()?;
    if let Some(p) = pipeline {
        config.train.pipeline = p;
    }
    if let Some(e) = epochs {
        config.train.epochs = e;
    }
    let out = PathBuf::from(&config.out_dir);
    let summary = pipeline::train(&config, &out, TrainOptions { resume, epoch_limit: None })?;
    if let Some(bc) = &summary.bc {
        let best = &bc.history[bc.best_epoch];
        println!(
            "bc: {} demonstrations, best epoch {} (validation accuracy {:.3})",
            bc.train_examples + bc.validation_examples,
            bc.best_epoch,
            best.validation_accuracy
        );
    }
    if let (Some(first), Some(last)) = (summary.metrics.first(), summary.metrics.last()) {
        println!(
            "pg: {} epochs, mean discounted reward {:.3} -> {:.3}, mean slowdown {:.3} -> {:.3}",
            summary.metrics.len(),
            first.mean_discounted_reward,
            last.mean_discounted_reward,
            first.mean_slowdown,
            last.mean_slowdown
        );
    }
    println!("policy {} written under {}", summary.policy_hash, out.display());
    Ok(())
}

fn parse_loads(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad load '{s}'")))
        .collect()
}

fn cmd_eval(run: &RunArgs, agents: Option<&str>, loads: Option<&str>, seeds_per_cell: Option<usize>) -> Result<()> {
    let mut config = run.load_config()?;
    if let Some(list) = agents {
        config.eval.agents = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(list) = loads {
        config.eval.loads = parse_loads(list)?;
    }
    if let Some(n) = seeds_per_cell {
        config.eval.seeds_per_cell = n;
    }
    let config = config.resolved()?;
    let specs: Vec<AgentSpec> = config.eval.agents.iter().map(|s| s.parse()).collect::<schedlab::Result<_>>()?;
    let (agents, mut training_seeds) = eval::resolve_agents(&specs, &config.env)?;
    training_seeds.extend(config.train_jobset_seeds());
    training_seeds.extend(config.demo_jobset_seeds());
    let spec = SweepSpec {
        env: config.env.clone(),
        workload: config.workload.clone(),
        loads: config.eval.loads.clone(),
        agents,
        seeds_per_cell: config.eval.seeds_per_cell,
        base_seed: config.seed,
        gamma: config.train.gamma,
        training_seeds,
    };
    let report = eval::run_sweep(&spec)?;
    let out = PathBuf::from(&config.out_dir);
    write_config(&out, &config)?;
    eval::write_sweep(&out, &report, &serde_json::to_value(&config)?)?;
    println!("{:>6}  {:<24} {:>10} {:>8} {:>10}", "load", "agent", "slowdown", "std", "makespan");
    for c in &report.cells {
        println!(
            "{:>6.2}  {:<24} {:>10.3} {:>8.3} {:>10.2}",
            c.load, c.agent, c.mean_slowdown, c.std_slowdown, c.mean_makespan
        );
    }
    println!("results written under {}", out.display());
    Ok(())
}

fn cmd_curves(metrics: &Path, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let summary = eval::training_curves(metrics, &out.join("curves.csv"))?;
    println!(
        "{} epochs; first-quarter reward {:.3}, last-quarter reward {:.3}; slowdown {:.3} -> {:.3}",
        summary.epochs,
        summary.first_quartile.mean_discounted_reward,
        summary.last_quartile.mean_discounted_reward,
        summary.first_quartile.mean_slowdown,
        summary.last_quartile.mean_slowdown
    );
    Ok(())
}

fn cmd_selftest(inject_fault: Option<usize>, fuzz_episodes: usize) -> Result<bool> {
    let report = selftest::run_selftest(SelfTestOptions {
        inject_fault,
        fuzz_episodes,
    });
    for c in &report.checks {
        println!(
            "{} {:<24} {:>7.2}s  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Gen { run, count } => cmd_gen(run, *count)?,
        Command::Train {
            run,
            pipeline,
            epochs,
            resume,
        } => cmd_train(run, *pipeline, *epochs, *resume)?,
        Command::Eval {
            run,
            agents,
            loads,
            seeds_per_cell,
        } => cmd_eval(run, agents.as_deref(), loads.as_deref(), *seeds_per_cell)?,
        Command::Curves { metrics, out } => cmd_curves(metrics, out)?,
        Command::Selftest {
            inject_fault,
            fuzz_episodes,
        } => return cmd_selftest(*inject_fault, *fuzz_episodes),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
