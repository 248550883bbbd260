//! Covariance matrices, symplectic spectra and entropies of Gaussian states.

use landauer_lab::gaussian::{
    mutual_information, symplectic_eigenvalues, thermal_covariance, von_neumann_entropy, CovarianceMatrix, Partition,
    QuadraticHamiltonian,
};

fn main() -> landauer_lab::Result<()> {
    // Two oscillators at ω = 1 and 2, β = 0.5.
    let h = QuadraticHamiltonian::diagonal(&[0.5, 1.0], &[0.5, 1.0], 0.0)?;
    let thermal = thermal_covariance(&h, 0.5)?;
    println!("thermal symplectic spectrum {:?}", symplectic_eigenvalues(&thermal)?);
    println!("thermal entropy {:.6} nats", von_neumann_entropy(&thermal)?);

    // A two-mode squeezed vacuum is pure, but each half is mixed.
    let r: f64 = 0.6;
    let (c, s) = (r.cosh() / 2.0, r.sinh() / 2.0);
    let pp = nalgebra::DMatrix::from_row_slice(2, 2, &[c, s, s, c]);
    let rr = nalgebra::DMatrix::from_row_slice(2, 2, &[c, -s, -s, c]);
    let tmsv = CovarianceMatrix::from_blocks(&pp, &rr, &nalgebra::DMatrix::zeros(2, 2))?;
    let split = Partition::new(1, 2)?;
    println!(
        "squeezed vacuum: S = {:.2e}, I(A:B) = {:.6}",
        von_neumann_entropy(&tmsv)?,
        mutual_information(&tmsv, &split)?
    );

    // Merging pixels keeps the pairs canonical.
    let merged = CovarianceMatrix::vacuum(6).coarse_grain(3)?;
    println!("coarse-grained vacuum spectrum {:?}", symplectic_eigenvalues(&merged)?);
    Ok(())
}
