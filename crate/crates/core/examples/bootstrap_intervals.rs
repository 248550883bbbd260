//! Percentile bootstrap over shots, resampled independently per hold time.

use landauer_lab::field::{FieldParameters, KgField};
use landauer_lab::landauer::{bootstrap, BootstrapSettings};
use landauer_lab::quench::{referenced_phase_correlations, sample_ensemble, GroundTruth, QuenchProtocol};

fn main() -> landauer_lab::Result<()> {
    let field = KgField::new(FieldParameters::default())?;
    let protocol = QuenchProtocol {
        time_grid: vec![0.0, 20.0],
        seed: 1,
        ..Default::default()
    };
    let truth = GroundTruth::simulate(&field, &protocol.time_grid)?;
    let shots = sample_ensemble(&truth.measured(&field)?, &protocol)?;

    // Statistic: the far-end phase variance Φ²_{66} at each hold time.
    let settings = BootstrapSettings {
        n_resamples: 499,
        ..Default::default()
    };
    let ci = bootstrap(&shots.shots, &settings, |s| {
        s.iter()
            .map(|m| referenced_phase_correlations(m, 0).map(|c| c[(6, 6)]))
            .collect()
    })?;
    let exact = truth.measured(&field)?;
    for ((t, r), g) in protocol.time_grid.iter().zip(&ci).zip(&exact) {
        let v = g.matrix();
        let truth_value = v[(6, 6)] + v[(0, 0)] - 2.0 * v[(0, 6)];
        println!(
            "t = {t:4.1} ms  Φ² = {:.4} [{:.4}, {:.4}]  exact {:.4}  covered {}",
            r.point,
            r.low,
            r.high,
            truth_value,
            r.contains(truth_value)
        );
    }
    Ok(())
}
