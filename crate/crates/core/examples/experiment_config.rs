//! Prints the default experiment config, the starting point for
//! `labelsmear run --config`.

use labelsmear::experiment::ExperimentConfig;

fn main() {
    println!("{}", ExperimentConfig::default().to_json());
}
