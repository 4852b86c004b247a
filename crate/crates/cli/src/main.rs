use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use decay_entropy::dynamics::RateParams;
use decay_entropy::modes::{overlap_fk, TimeWindow};
use decay_entropy::scenario::{
    check_oracle, check_relations, emit_outputs, format_significant, parse_config,
    render_oracle_table, run_entropy_sweep, run_oracle_comparison, ScenarioConfig,
    DEFAULT_ORACLE_DT, ORACLE_HORIZON, ORACLE_K_MAX,
};

/// Entropy of radiation emitted by a decaying or amplified bosonic mode.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the collection time, check the entropy relations, write tables and plots.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also compare against the collision model.
        #[arg(long)]
        oracle: bool,
    },
    /// Compare analytic covariances and entropies with the collision model.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Print the mode overlaps f_k of a window and their running Parseval sum.
    Fk {
        #[arg(long, default_value_t = 0.0)]
        t1: f64,
        #[arg(long)]
        t2: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        kmax: usize,
    },
    /// Parse a scenario file and print the resolved settings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file of `key=value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the mode cutoff per window.
    #[arg(long)]
    kmax: Option<usize>,
    /// Output file prefix; defaults to the scenario file name.
    #[arg(long)]
    prefix: Option<String>,
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn load_scenario(args: &ScenarioArgs) -> Result<(ScenarioConfig, String)> {
    let mut config = load(&args.config)?;
    if let Some(k) = args.kmax {
        anyhow::ensure!(k >= 1, "--kmax must be at least 1");
        config.k_max = k;
    }
    let prefix = match &args.prefix {
        Some(p) => p.clone(),
        None => args
            .config
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string(),
    };
    Ok((config, prefix))
}

/// Runs the oracle comparison, writes its table and returns whether it passed.
fn oracle(config: &ScenarioConfig, out: &Path, prefix: &str) -> Result<bool> {
    let dt = config.oracle_dt.unwrap_or(DEFAULT_ORACLE_DT);
    let k_max = config.k_max.min(ORACLE_K_MAX);
    let rows = run_oracle_comparison(config, dt, k_max, ORACLE_HORIZON)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(format!("{prefix}_oracle.csv"));
    fs::write(&path, render_oracle_table(&rows))
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    let summary = check_oracle(&rows);
    print!("{summary}");
    Ok(summary.passed())
}

fn run(args: &ScenarioArgs, with_oracle: bool) -> Result<bool> {
    let (config, prefix) = load_scenario(args)?;
    let report = run_entropy_sweep(&config)?;
    for path in emit_outputs(&report, &args.out, &prefix)? {
        println!("wrote {}", path.display());
    }
    let summary = check_relations(&report, &config);
    print!("{summary}");
    let mut passed = summary.passed();
    if with_oracle {
        passed &= oracle(&config, &args.out, &prefix)?;
    }
    Ok(passed)
}

fn fk(t1: f64, t2: f64, gamma: f64, kmax: usize) -> Result<()> {
    let window = TimeWindow::new(t1, t2)?;
    let params = RateParams::new(gamma)?;
    println!("k,f_k,parseval_sum");
    let mut sum = 0.0;
    for k in 0..=kmax {
        let f = overlap_fk(&window, k, &params);
        sum += f * f;
        println!(
            "{k},{},{}",
            format_significant(f, 12),
            format_significant(sum, 12)
        );
    }
    let limit = (-gamma * t1).exp() - (-gamma * t2).exp();
    println!("# limit {}", format_significant(limit, 12));
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let c = load(path)?;
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| format_significant(*x, 12))
            .collect::<Vec<_>>()
            .join(",")
    };
    println!("model={}", c.model);
    println!("gamma={}", format_significant(c.gamma, 12));
    println!("r={}", format_significant(c.r, 12));
    println!("n_th={}", format_significant(c.n_th, 12));
    println!("t0_list={}", list(&c.t0_list));
    println!("t_grid={}", list(&c.t_grid));
    println!("k_max={}", c.k_max);
    if let Some(dt) = c.oracle_dt {
        println!("oracle_dt={}", format_significant(dt, 12));
    }
    println!("relation_tol={}", format_significant(c.relation_tol, 12));
    println!("validity_tol={}", format_significant(c.validity_tol, 12));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, oracle: with_oracle } => run(&scenario, with_oracle),
        Command::Oracle { scenario } => {
            let (config, prefix) = load_scenario(&scenario)?;
            oracle(&config, &scenario.out, &prefix)
        }
        Command::Fk { t1, t2, gamma, kmax } => fk(t1, t2, gamma, kmax).map(|_| true),
        Command::Validate { config } => validate(&config).map(|_| true),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
