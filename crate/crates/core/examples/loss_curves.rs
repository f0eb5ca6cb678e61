//! Binary losses as a function of the margin, written as CSV to stdout.
//!
//! Smoothing has a finite minimiser, backward correction keeps rewarding
//! larger margins without bound, forward correction saturates.

use labelsmear::experiment::write_loss_curves_csv;
use labelsmear::losses::MarginGrid;

fn main() -> labelsmear::Result<()> {
    let grid = MarginGrid {
        points: 41,
        ..MarginGrid::default()
    };
    write_loss_curves_csv(std::io::stdout().lock(), &grid, 0.2)
}
