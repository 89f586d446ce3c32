use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

// stdout may be a closed pipe (`drrl ... | head`); that is not an error
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use drrl::delay::DelayKind;
use drrl::harness::{aggregate_dir, curves_dir, run_experiment, sweep_table, Aggregated, ExperimentConfig};
use drrl::oracle::{average_reward, build_augmented_mdp, value_iteration, AugmentedLayout, ExplicitMdp};
use drrl::{Error, Result};

#[derive(Parser)]
#[command(name = "drrl", version, about = "Delay-resolved reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Obs,
    Act,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an explicit MDP (optionally augmented for a constant delay).
    Oracle {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long, requires = "channel")]
        delay: Option<usize>,
        #[arg(long, value_enum, requires = "delay")]
        channel: Option<Channel>,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Aggregate run CSVs of an experiment or a sweep directory.
    Aggregate {
        #[arg(long = "in")]
        dir: PathBuf,
    },
    /// Draw learning curves (SVG plus the plotted points as CSV).
    Curves {
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

fn train(config: PathBuf, runs: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(r) = runs {
        if r == 0 {
            return Err(Error::parse("runs", "must be at least 1"));
        }
        cfg.runs = r;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    let result = run_experiment(&cfg)?;
    out!("{}", result.summary.to_table());
    let mut ok = true;
    for r in &result.runs {
        if let Err(msg) = &r.result {
            eprintln!("run {} (seed {}) failed: {msg}", r.run, r.seed);
            ok = false;
        }
    }
    outln!("results in {}", cfg.out.display());
    Ok(ok)
}

fn oracle(mdp: PathBuf, gamma: f64, delay: Option<usize>, channel: Option<Channel>, tolerance: f64) -> Result<()> {
    let text = std::fs::read_to_string(&mdp).map_err(|e| Error::io(&mdp, e))?;
    let base = ExplicitMdp::<f64>::parse(&text)?;
    base.validate(&1e-12)?;
    let (model, layout) = match (delay, channel) {
        (Some(d), Some(c)) => {
            let kind = match c {
                Channel::Obs => DelayKind::Observation,
                Channel::Act => DelayKind::Action,
            };
            build_augmented_mdp(&base, d, kind)?
        }
        _ => (base.clone(), AugmentedLayout::new(base.states(), base.actions(), 0)?),
    };
    let sol = value_iteration(&model, gamma, tolerance)?;
    outln!("# states {} actions {} residual {:e} sweeps {}", model.states(), model.actions(), sol.residual, sol.sweep_deltas.len());
    outln!("state\tbuffer\tvalue\taction");
    for (i, (v, a)) in sol.values.iter().zip(&sol.policy).enumerate() {
        let (s, buf) = layout.decode(i);
        let buf: Vec<String> = buf.iter().map(|a| a.to_string()).collect();
        outln!("{s}\t[{}]\t{v:.12}\t{a}", buf.join(","));
    }
    outln!("# average reward of the greedy policy {:.12}", average_reward(&model, &sol.policy)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { config, runs, seed, out } => train(config, runs, seed, out),
        Command::Oracle { mdp, gamma, delay, channel, tolerance } => oracle(mdp, gamma, delay, channel, tolerance).map(|_| true),
        Command::Aggregate { dir } => aggregate_dir(&dir).map(|a| {
            match a {
                Aggregated::Experiment(s) => out!("{}", s.to_table()),
                Aggregated::Sweep(rows) => out!("{}", sweep_table(&rows)),
            }
            true
        }),
        Command::Curves { dir } => curves_dir(&dir).map(|(svg, csv)| {
            outln!("{}\n{}", svg.display(), csv.display());
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("drrl: error: {e}");
            ExitCode::FAILURE
        }
    }
}
