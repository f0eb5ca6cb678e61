//! Teacher/student distillation on the noisy benchmark, smoothing or
//! forward correction applied on either side.

use labelsmear::experiment::{run_distill, ExperimentConfig};

fn main() -> labelsmear::Result<()> {
    let dir = std::env::temp_dir().join("labelsmear-distillation");
    let res = run_distill(&ExperimentConfig::default(), &dir)?;
    for m in &res.comparison {
        println!("{:<11} {:.4} +- {:.4}", m.method, m.mean(), m.std_dev());
    }
    println!("teacher smoothing sweep at temperature 1:");
    for p in &res.sweep {
        println!("  alpha {:<4} {:.4}", p.alpha, p.mean());
    }
    println!("tables in {}", dir.display());
    Ok(())
}
