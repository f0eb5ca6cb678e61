//! Expected calibration error of an MLP that memorises noisy labels, as
//! smoothing strength grows. Mild smoothing tempers its overconfidence;
//! heavy smoothing overshoots into underconfidence.

use labelsmear::experiment::{build_trials, run_grid, summarize, DataSource, ExperimentConfig, MethodConfig};
use labelsmear::{Architecture, LossKind};

fn main() -> labelsmear::Result<()> {
    let mut cfg = ExperimentConfig {
        methods: [0.0, 0.05, 0.1, 0.2, 0.3]
            .iter()
            .map(|&a| MethodConfig::new(if a == 0.0 { LossKind::Standard } else { LossKind::Smoothing }, a))
            .collect(),
        model: Architecture::Mlp { hidden: 64 },
        ..ExperimentConfig::default()
    };
    cfg.train.weight_decay = 1e-4;
    if let DataSource::Blobs(b) = &mut cfg.data {
        b.train_per_class = 200;
    }
    let runs = run_grid(&cfg, &build_trials(&cfg)?)?;
    for row in summarize(&cfg, &runs) {
        println!("{:<10} alpha={:<4} ece={:.4}", row.method, row.alpha, row.mean("ece").unwrap_or(f64::NAN));
    }
    Ok(())
}
