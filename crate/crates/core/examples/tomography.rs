//! Sliding-window mode tomography from phase snapshots.

use landauer_lab::field::{FieldParameters, KgField};
use landauer_lab::quench::{exact_referenced_correlations, sample_ensemble, GroundTruth, QuenchProtocol};
use landauer_lab::tomography::{scan_reconstruction, TheoryFill, TomographySettings};

fn main() -> landauer_lab::Result<()> {
    let field = KgField::new(FieldParameters::default())?;
    let protocol = QuenchProtocol {
        seed: 3,
        ..Default::default()
    };
    let truth = GroundTruth::simulate(&field, &protocol.time_grid)?;
    let shots = sample_ensemble(&truth.measured(&field)?, &protocol)?;

    let settings = TomographySettings::default();
    let fill = TheoryFill::new(&field, settings.zero_mode.clone())?;
    let scan = scan_reconstruction(
        &shots.correlations(settings.z0)?,
        &shots.times,
        &settings,
        &field,
        &fill,
    )?;
    for w in &scan.windows {
        let j = truth
            .times
            .iter()
            .position(|&t| t == w.time)
            .expect("window starts on the grid");
        let err = w.gamma_real.max_abs_diff(&truth.real[j]) / truth.real[j].matrix().amax();
        println!(
            "t = {:4.1} ms  holds {:2}  cond {:8.1}  rel. error {:.3}  projected {}",
            w.time,
            w.fit.hold_offsets.len(),
            w.fit.condition_number,
            err,
            w.projected
        );
    }
    println!("{} windows failed", scan.failures.len());

    // Infinite shots: the fit is exact.
    let exact = truth
        .measured(&field)?
        .iter()
        .map(|g| exact_referenced_correlations(&g.phiphi(), settings.z0))
        .collect::<landauer_lab::Result<Vec<_>>>()?;
    let clean = scan_reconstruction(&exact, &truth.times, &settings, &field, &fill)?;
    let worst = clean
        .windows
        .iter()
        .zip(&truth.real)
        .map(|(w, g)| w.gamma_real.max_abs_diff(g) / g.matrix().amax())
        .fold(0.0, f64::max);
    println!("noiseless: worst relative error {worst:.1e}");
    Ok(())
}
