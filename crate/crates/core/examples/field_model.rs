//! Derived scales, mode bases and the environment Hamiltonian of a subregion.

use landauer_lab::field::{BoundaryCondition, Edges, FieldParameters, KgField, ModeBasis};
use landauer_lab::gaussian::Partition;

fn main() -> landauer_lab::Result<()> {
    let field = KgField::new(FieldParameters::default())?;
    let s = field.scales();
    println!(
        "c = {:.4} μm/ms, l_C = {:.3} μm, λ_T = {:.2} μm, L/c = {:.2} ms",
        s.sound_speed,
        s.healing_length,
        s.coherence_length,
        s.crossing_time()
    );
    println!("mode frequencies (rad/ms) {:.4?}", field.basis().frequencies());

    for edges in [Edges::FreeFree, Edges::PinnedPinned, Edges::FreePinned] {
        let b = ModeBasis::new(edges, s.length, 7, s);
        println!("{edges:?}: lowest frequencies {:.4?}", &b.frequencies()[..3]);
    }

    // An environment of 4 pixels at the right edge, with its own Gibbs spectrum.
    let env = field.environment(&Partition::new(3, 7)?)?;
    println!(
        "environment pixels {:?}, zero-point energy {:.4}",
        env.pixels(),
        env.spectrum().zero_point()
    );

    let dirichlet = KgField::new(FieldParameters {
        bc: BoundaryCondition::Dirichlet,
        ..Default::default()
    })?;
    println!("Dirichlet zero mode: {:?}", dirichlet.basis().zero_mode_rate());
    Ok(())
}
