//! Neumann against Dirichlet at fine resolution: light-cone spreading and recurrence.

use landauer_lab::field::FieldParameters;
use landauer_lab::landauer::boundary_comparison;
use landauer_lab::quench::uniform_grid;

fn main() -> landauer_lab::Result<()> {
    let ct_over_l = uniform_grid(1.0, 11);
    let cmp = boundary_comparison(&FieldParameters::default(), 64, &ct_over_l, &[0.25])?;
    for run in [&cmp.neumann, &cmp.dirichlet] {
        println!(
            "{:?}: recurrence deviation at t = L/c {:.2e}",
            run.bc, run.recurrence_deviation
        );
        for e in run.report.for_split(16) {
            println!(
                "  ct/L = {:.2}  ΔI = {:.4}  ΔS = {:.4}",
                e.time / run.crossing_time,
                e.di,
                e.ds
            );
        }
    }
    Ok(())
}
