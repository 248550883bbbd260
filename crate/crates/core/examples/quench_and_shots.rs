//! Ground-truth quench dynamics and synthetic phase snapshots.

use landauer_lab::field::{FieldParameters, KgField};
use landauer_lab::gaussian::von_neumann_entropy;
use landauer_lab::quench::{referenced_phase_correlations, sample_ensemble, GroundTruth, QuenchProtocol};

fn main() -> landauer_lab::Result<()> {
    let field = KgField::new(FieldParameters::default())?;
    let protocol = QuenchProtocol {
        shots_per_time: 1000,
        seed: 7,
        ..Default::default()
    };
    let truth = GroundTruth::simulate(&field, &protocol.time_grid)?;
    // Unitary flow keeps the global entropy fixed.
    for (t, g) in truth.times.iter().zip(&truth.real).step_by(4) {
        println!("t = {t:5.1} ms  S = {:.12}", von_neumann_entropy(g)?);
    }

    let shots = sample_ensemble(&truth.measured(&field)?, &protocol)?;
    let phi2 = referenced_phase_correlations(&shots.shots[0], 0)?;
    println!(
        "{} shots × {} pixels per hold time",
        shots.shots_per_time(),
        shots.n_pixels()
    );
    println!("Φ²(t = 0) diagonal {:.4?}", phi2.diagonal().as_slice());
    Ok(())
}
