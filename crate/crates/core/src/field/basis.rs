use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use super::{DerivedScales, Edges};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Eigenfunctions of the massless field on a cell-centred pixel grid.
///
/// Column `j` of the tables is mode `k = j` for free ends (k = 0 is the
/// zero mode), `k = j + 1` for pinned ends and `k = j + ½` for a free left
/// and pinned right end. The phase-space transform
/// `T = diag(F^φ, Δz F^ρ)` maps mode quadratures to pixel quadratures
/// `(φ(z_m), Δz δρ(z_m))` and is symplectic.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    edges: Edges,
    length: f64,
    dz: f64,
    z: Vec<f64>,
    wavenumbers: Vec<f64>,
    frequencies: Vec<f64>,
    phi_amp: Vec<f64>,
    rho_amp: Vec<f64>,
    phi_table: DMatrix<f64>,
    rho_table: DMatrix<f64>,
    sound_speed: f64,
    zero_mode_rate: Option<f64>,
}

impl ModeBasis {
    /// Basis for a box of `length` split into `n` pixels, with the medium of `scales`.
    pub fn new(edges: impl Into<Edges>, length: f64, n: usize, scales: &DerivedScales) -> Self {
        let edges = edges.into();
        let dz = length / n as f64;
        let z: Vec<f64> = (0..n).map(|m| (m as f64 + 0.5) * dz).collect();
        let eta = scales.amplitude_ratio();
        let c = scales.sound_speed;
        let mut wavenumbers = Vec::with_capacity(n);
        let mut phi_amp = Vec::with_capacity(n);
        let mut rho_amp = Vec::with_capacity(n);
        for j in 0..n {
            let (k, weight) = edges.mode(j, n);
            if k == 0.0 {
                phi_amp.push(1.0);
                rho_amp.push(1.0 / length);
            } else {
                let kp = k * PI;
                // A_k B_k = 2/L; the pinned Nyquist sine carries half weight
                let w = weight.sqrt();
                phi_amp.push(w * 2.0 * (eta / kp).sqrt());
                rho_amp.push(w * (kp / eta).sqrt() / length);
            }
            wavenumbers.push(k * PI / length);
        }
        let frequencies = wavenumbers.iter().map(|q| c * q).collect();
        let phi_table = DMatrix::from_fn(n, n, |m, j| phi_amp[j] * edges.shape(wavenumbers[j] * z[m]));
        let rho_table = DMatrix::from_fn(n, n, |m, j| rho_amp[j] * edges.shape(wavenumbers[j] * z[m]));
        let zero_mode_rate = edges.has_zero_mode().then(|| 2.0 * scales.g_over_hbar / length);
        Self {
            edges,
            length,
            dz,
            z,
            wavenumbers,
            frequencies,
            phi_amp,
            rho_amp,
            phi_table,
            rho_table,
            sound_speed: c,
            zero_mode_rate,
        }
    }

    pub fn edges(&self) -> Edges {
        self.edges
    }

    pub fn n_modes(&self) -> usize {
        self.z.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn pixel_size(&self) -> f64 {
        self.dz
    }

    pub fn grid(&self) -> &[f64] {
        &self.z
    }

    /// k·π/L per column.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Massless frequencies ω_k = c q_k per column (0 for the zero mode).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    /// u = 2g₁D/(ħL), present only with a zero mode.
    pub fn zero_mode_rate(&self) -> Option<f64> {
        self.zero_mode_rate
    }

    pub fn has_zero_mode(&self) -> bool {
        self.zero_mode_rate.is_some()
    }

    /// First column holding an oscillating mode.
    pub fn first_oscillator(&self) -> usize {
        usize::from(self.has_zero_mode())
    }

    /// F^φ with rows = pixels, columns = modes.
    pub fn phi_table(&self) -> &DMatrix<f64> {
        &self.phi_table
    }

    pub fn rho_table(&self) -> &DMatrix<f64> {
        &self.rho_table
    }

    /// f^φ of column `j` at an arbitrary position.
    pub fn phi_at(&self, j: usize, z: f64) -> f64 {
        self.phi_amp[j] * self.shape(j, z)
    }

    pub fn rho_at(&self, j: usize, z: f64) -> f64 {
        self.rho_amp[j] * self.shape(j, z)
    }

    fn shape(&self, j: usize, z: f64) -> f64 {
        self.edges.shape(self.wavenumbers[j] * z)
    }

    /// T = diag(F^φ, Δz F^ρ).
    pub fn mode_to_real(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, 0), (n, n)).copy_from(&self.phi_table);
        t.view_mut((n, n), (n, n)).copy_from(&(&self.rho_table * self.dz));
        t
    }

    /// T⁻¹ = diag((Δz F^ρ)ᵀ, (F^φ)ᵀ).
    pub fn real_to_mode(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, 0), (n, n))
            .copy_from(&(self.rho_table.transpose() * self.dz));
        t.view_mut((n, n), (n, n)).copy_from(&self.phi_table.transpose());
        t
    }

    /// Row-normalised cell-integrated Gaussian blur on the pixel grid.
    pub fn psf_kernel(&self, sigma: f64) -> DMatrix<f64> {
        let n = self.n_modes();
        if sigma <= 0.0 {
            return DMatrix::identity(n, n);
        }
        let s = sigma * SQRT_2;
        let mut b = DMatrix::from_fn(n, n, |m, j| {
            let hi = (self.z[j] + 0.5 * self.dz - self.z[m]) / s;
            let lo = (self.z[j] - 0.5 * self.dz - self.z[m]) / s;
            0.5 * (libm::erf(hi) - libm::erf(lo))
        });
        for mut row in b.row_iter_mut() {
            let total = row.sum();
            row /= total;
        }
        b
    }

    /// F^φ after imaging blur, B F^φ.
    pub fn blurred_phi_table(&self, sigma: f64) -> DMatrix<f64> {
        self.psf_kernel(sigma) * &self.phi_table
    }
}

/// Mode-space Γ to pixel-space Γ.
pub fn momentum_to_real(gamma_modes: &CovarianceMatrix, basis: &ModeBasis) -> Result<CovarianceMatrix> {
    check_size(gamma_modes, basis)?;
    gamma_modes.congruence(&basis.mode_to_real())
}

/// Pixel-space Γ to mode-space Γ.
pub fn real_to_momentum(gamma_real: &CovarianceMatrix, basis: &ModeBasis) -> Result<CovarianceMatrix> {
    check_size(gamma_real, basis)?;
    gamma_real.congruence(&basis.real_to_mode())
}

/// Blur the φ quadratures of a pixel-space Γ: Γ_φφ → BΓ_φφBᵀ, Γ_φρ → BΓ_φρ.
pub fn psf_blur(gamma_real: &CovarianceMatrix, sigma: f64, basis: &ModeBasis) -> Result<CovarianceMatrix> {
    check_size(gamma_real, basis)?;
    if sigma <= 0.0 {
        return Ok(gamma_real.clone());
    }
    let n = basis.n_modes();
    let mut t = DMatrix::identity(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&basis.psf_kernel(sigma));
    gamma_real.congruence(&t)
}

fn check_size(gamma: &CovarianceMatrix, basis: &ModeBasis) -> Result<()> {
    if gamma.n_modes() != basis.n_modes() {
        return Err(Error::LayoutMismatch {
            expected: basis.n_modes(),
            found: gamma.n_modes(),
        });
    }
    Ok(())
}
