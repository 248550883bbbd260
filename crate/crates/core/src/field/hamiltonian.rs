use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;

use super::{DerivedScales, Edges, GibbsSpectrum, KgField, ModeBasis};
use crate::error::{Error, Result};
use crate::gaussian::QuadraticHamiltonian;

/// Mode-space Klein-Gordon Hamiltonian with mass gap `mass_gap` (0 after the quench).
///
/// Oscillators: φ_k² coefficient (ω_k² + ω_m²)/(2ω_k), δρ_k² coefficient ω_k/2.
/// Neumann zero mode: φ₀² coefficient ω_m²/(2u), δρ₀² coefficient u/2.
pub fn kg_hamiltonian(basis: &ModeBasis, mass_gap: f64) -> QuadraticHamiltonian {
    let m2 = mass_gap * mass_gap;
    let (phi, rho): (Vec<f64>, Vec<f64>) = basis
        .frequencies()
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            if j == 0 && basis.has_zero_mode() {
                let u = basis.zero_mode_rate().unwrap_or_default();
                (m2 / (2.0 * u), u / 2.0)
            } else {
                ((w * w + m2) / (2.0 * w), w / 2.0)
            }
        })
        .unzip();
    QuadraticHamiltonian::diagonal(&phi, &rho, 0.0).expect("diagonal form is symmetric")
}

/// κ_ij = Σ_k w_k k² g(kπ(i+½)/N_E) g(kπ(j+½)/N_E) over the oscillating modes of `edges`.
pub fn kappa_kernel(edges: impl Into<Edges>, n_env: usize) -> DMatrix<f64> {
    let edges = edges.into();
    let ne = n_env as f64;
    let ks: Vec<(f64, f64)> = (0..n_env)
        .map(|j| edges.mode(j, n_env))
        .filter(|&(k, _)| k > 0.0)
        .collect();
    let mut kappa = DMatrix::zeros(n_env, n_env);
    for i in 0..n_env {
        for j in i..n_env {
            let (xi, xj) = (i as f64 + 0.5, j as f64 + 0.5);
            let v: f64 = ks
                .iter()
                .map(|&(k, w)| w * k * k * edges.shape(k * PI * xi / ne) * edges.shape(k * PI * xj / ne))
                .sum();
            kappa[(i, j)] = v;
            kappa[(j, i)] = v;
        }
    }
    kappa
}

/// Real-space massless Hamiltonian of an `n_env`-pixel box of pixel size `dz`.
///
/// δρ block (g₁D/ħΔz)·1 in the canonical variables Δz δρ(z_n); φ block
/// (ħn₁D/4mΔz)(2π²/N_E³)κ.
pub fn environment_hamiltonian(
    scales: &DerivedScales,
    edges: impl Into<Edges>,
    n_env: usize,
    dz: f64,
) -> Result<QuadraticHamiltonian> {
    if n_env == 0 {
        return Err(Error::EmptyRegion);
    }
    let ne = n_env as f64;
    let pref = scales.hbar_over_m * scales.density / (4.0 * dz) * 2.0 * PI * PI / ne.powi(3);
    let mut h = DMatrix::zeros(2 * n_env, 2 * n_env);
    h.view_mut((0, 0), (n_env, n_env))
        .copy_from(&(kappa_kernel(edges, n_env) * pref));
    for i in 0..n_env {
        h[(n_env + i, n_env + i)] = scales.g_over_hbar / dz;
    }
    QuadraticHamiltonian::new(h, 0.0)
}

impl KgField {
    /// Mode-space Hamiltonian at tunnelling rate `j_hz`.
    pub fn mode_hamiltonian(&self, j_hz: f64) -> QuadraticHamiltonian {
        kg_hamiltonian(self.basis(), self.scales().mass_gap_for(j_hz))
    }

    pub fn prequench_hamiltonian(&self) -> QuadraticHamiltonian {
        self.mode_hamiltonian(self.params().j_hz)
    }

    pub fn postquench_hamiltonian(&self) -> QuadraticHamiltonian {
        self.mode_hamiltonian(0.0)
    }

    /// Pixel-space Hamiltonian at tunnelling rate `j_hz`.
    pub fn real_hamiltonian(&self, j_hz: f64) -> Result<QuadraticHamiltonian> {
        self.mode_hamiltonian(j_hz)
            .congruence(&self.basis().real_to_mode().transpose())
    }
}

/// A contiguous block of pixels ending at the right edge, treated as a box of
/// its own: the whole field keeps its boundary condition, a proper
/// environment is free at the cut and keeps the field's condition at the wall.
#[derive(Debug, Clone)]
pub struct RegionModel {
    offset: usize,
    basis: ModeBasis,
    hamiltonian: QuadraticHamiltonian,
    spectrum: GibbsSpectrum,
}

impl RegionModel {
    pub fn new(field: &KgField, n_region: usize) -> Result<Self> {
        let n = field.n_pixels();
        if n_region == 0 {
            return Err(Error::EmptyRegion);
        }
        if n_region > n {
            return Err(Error::InvalidPartition {
                n_system: n - n_region.min(n),
                n_total: n,
            });
        }
        let dz = field.basis().pixel_size();
        let bc = field.params().bc;
        let edges = if n_region == n {
            bc.into()
        } else {
            Edges::environment(bc)
        };
        let basis = ModeBasis::new(edges, dz * n_region as f64, n_region, field.scales());
        let hamiltonian = environment_hamiltonian(field.scales(), edges, n_region, dz)?;
        let spectrum = GibbsSpectrum::from_basis(&basis);
        Ok(Self {
            offset: n - n_region,
            basis,
            hamiltonian,
            spectrum,
        })
    }

    pub fn pixels(&self) -> Range<usize> {
        self.offset..self.offset + self.basis.n_modes()
    }

    pub fn n_pixels(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    /// Real-space Hamiltonian on the region's pixels.
    pub fn hamiltonian(&self) -> &QuadraticHamiltonian {
        &self.hamiltonian
    }

    pub fn spectrum(&self) -> &GibbsSpectrum {
        &self.spectrum
    }

    /// The same Hamiltonian built by transforming the region's diagonal mode form.
    pub fn hamiltonian_from_modes(&self) -> Result<QuadraticHamiltonian> {
        kg_hamiltonian(&self.basis, 0.0).congruence(&self.basis.real_to_mode().transpose())
    }
}
