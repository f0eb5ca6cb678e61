//! Prints the smearing matrices for smoothing, backward and forward
//! correction at the same strength, and what each does to a label.

use labelsmear::smear::{make_backward_matrix, make_smoothing_matrix, smear_distribution};
use labelsmear::TransitionMatrix;

fn show(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name}:");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>8.4}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> labelsmear::Result<()> {
    let (l, alpha) = (3, 0.3);
    let smoothing = make_smoothing_matrix(l, alpha)?;
    let t = TransitionMatrix::symmetric_from_alpha(l, alpha)?;
    let backward = make_backward_matrix(&t)?;

    show("smoothing", smoothing.entries());
    show("transition", t.entries());
    show("backward", backward.entries());

    let label = [1.0, 0.0, 0.0];
    println!("smoothed one-hot: {:?}", smear_distribution(&smoothing, &label)?);
    println!("backward one-hot: {:?}", smear_distribution(&backward, &label)?);
    println!("noisy label dist: {:?}", t.corrupt_distribution(&label)?);
    Ok(())
}
