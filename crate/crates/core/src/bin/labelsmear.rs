use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use labelsmear::experiment::{self, ExperimentConfig};
use labelsmear::Error;

#[derive(Parser)]
#[command(name = "labelsmear", version, about = "Label smoothing and loss correction under label noise")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Train every (method, seed) cell; write runs.csv and summary.csv.
    Run(Common),
    /// Write loss curves, gap densities, separator offsets and the alpha sweep.
    Figures(Common),
    /// Teacher/student comparison and teacher smoothing sweep.
    Distill(Common),
    /// Estimate the noise transition matrix from a standard-loss model.
    EstimateT(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply to missing fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for grid points (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run only this seed.
    #[arg(long, value_name = "SEED")]
    seed_override: Option<u64>,
}

fn load(c: &Common) -> labelsmear::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed_override {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn execute(verb: &Verb) -> labelsmear::Result<()> {
    let (Verb::Run(c) | Verb::Figures(c) | Verb::Distill(c) | Verb::EstimateT(c)) = verb;
    let cfg = load(c)?;
    if let Some(n) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let out = cfg.out_dir.clone();
    match verb {
        Verb::Run(_) => {
            let res = experiment::run_experiment(&cfg, &out)?;
            for row in &res.summary {
                println!(
                    "{:<10} alpha={:<5} test_acc={:.4} diverged={}/{}",
                    row.method,
                    row.alpha,
                    row.mean("test_acc").unwrap_or(f64::NAN),
                    row.diverged,
                    row.runs
                );
            }
        }
        Verb::Figures(_) => {
            let files = experiment::emit_figures(&cfg, &out)?;
            println!("wrote {} files to {}", files.files.len(), out.display());
        }
        Verb::Distill(_) => {
            let res = experiment::run_distill(&cfg, &out)?;
            for m in &res.comparison {
                println!("{:<11} {:.4} +- {:.4}", m.method, m.mean(), m.std_dev());
            }
        }
        Verb::EstimateT(_) => {
            let res = experiment::estimate_t(&cfg, &out)?;
            println!("seed {}: max |T_hat - T_emp| = {:.4}", res.seed, res.max_abs_error);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
