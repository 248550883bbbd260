//! Klein-Gordon model of the relative phase field: parameters, mode bases,
//! quadratic Hamiltonians and Gibbs thermodynamics of subregions.

mod basis;
mod hamiltonian;
mod thermo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub use basis::{momentum_to_real, psf_blur, real_to_momentum, ModeBasis};
pub use hamiltonian::{environment_hamiltonian, kappa_kernel, kg_hamiltonian, RegionModel};
pub use thermo::{
    effective_beta, gibbs_energy, gibbs_log_partition, relative_entropy_to_gibbs, EnvThermo, GibbsSpectrum,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// ∂φ = 0 at both edges; carries a zero mode.
    #[default]
    Neumann,
    /// φ = 0 at both edges.
    Dirichlet,
}

/// Conditions at the two ends of a box, which fix its eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edges {
    /// ∂φ = 0 at both ends: cos(kπz/L), k = 0..N−1.
    FreeFree,
    /// φ = 0 at both ends: sin(kπz/L), k = 1..N.
    PinnedPinned,
    /// ∂φ = 0 at z = 0 and φ = 0 at z = L: cos((k+½)πz/L), k = 0..N−1.
    FreePinned,
}

impl From<BoundaryCondition> for Edges {
    fn from(bc: BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Neumann => Edges::FreeFree,
            BoundaryCondition::Dirichlet => Edges::PinnedPinned,
        }
    }
}

impl Edges {
    /// Environment at the right of a cut: free at the cut, the field's own condition at the wall.
    pub fn environment(bc: BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Neumann => Edges::FreeFree,
            BoundaryCondition::Dirichlet => Edges::FreePinned,
        }
    }

    /// Mode number and sum weight of column `j` of an `n`-pixel box, wavenumber = mode·π/L.
    pub(crate) fn mode(self, j: usize, n: usize) -> (f64, f64) {
        match self {
            Edges::FreeFree => (j as f64, 1.0),
            Edges::PinnedPinned => ((j + 1) as f64, if j + 1 == n { 0.5 } else { 1.0 }),
            Edges::FreePinned => (j as f64 + 0.5, 1.0),
        }
    }

    pub(crate) fn shape(self, x: f64) -> f64 {
        match self {
            Edges::PinnedPinned => x.sin(),
            Edges::FreeFree | Edges::FreePinned => x.cos(),
        }
    }

    pub fn has_zero_mode(self) -> bool {
        self == Edges::FreeFree
    }
}

/// Physical parameters in laboratory units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldParameters {
    /// Box length, μm.
    pub length_um: f64,
    /// Mean linear density, μm⁻¹.
    pub n1d_per_um: f64,
    /// Atomic mass, kg.
    pub mass_kg: f64,
    /// Interaction strength g₁D in kg·m³·s⁻²; derived from scattering when absent.
    pub g1d: Option<f64>,
    /// Transverse trap frequency ω⊥/2π, Hz.
    pub omega_perp_hz: f64,
    /// 3D scattering length, nm.
    pub a_s_nm: f64,
    /// Pre-quench tunnelling rate J/2π, Hz.
    pub j_hz: f64,
    /// Pre-quench temperature, nK.
    pub t_nk: f64,
    pub n_pixels: usize,
    pub bc: BoundaryCondition,
    /// Imaging point-spread width, μm.
    pub psf_sigma_um: f64,
}

impl Default for FieldParameters {
    fn default() -> Self {
        Self {
            length_um: 49.0,
            n1d_per_um: 70.0,
            mass_kg: 1.433e-25,
            g1d: Some(8.594e-39),
            omega_perp_hz: 1.4e3,
            a_s_nm: 5.2,
            j_hz: 0.76,
            t_nk: 49.0,
            n_pixels: 7,
            bc: BoundaryCondition::Neumann,
            psf_sigma_um: 3.0,
        }
    }
}

/// g₁D = ħω⊥a_s(2 + 3a_s n₁D)/(1 + 2a_s n₁D), SI in and out.
pub fn g1d_from_scattering(omega_perp: f64, a_s: f64, n1d: f64) -> f64 {
    let an = a_s * n1d;
    units::HBAR * omega_perp * a_s * (2.0 + 3.0 * an) / (1.0 + 2.0 * an)
}

impl FieldParameters {
    /// g₁D in SI.
    pub fn g1d_si(&self) -> f64 {
        self.g1d.unwrap_or_else(|| {
            g1d_from_scattering(
                2.0 * std::f64::consts::PI * self.omega_perp_hz,
                self.a_s_nm * 1e-9,
                self.n1d_per_um * 1e6,
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_um", self.length_um),
            ("n1d_per_um", self.n1d_per_um),
            ("mass_kg", self.mass_kg),
            ("omega_perp_hz", self.omega_perp_hz),
            ("a_s_nm", self.a_s_nm),
            ("t_nk", self.t_nk),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(g) = self.g1d {
            if !(g > 0.0) {
                return Err(Error::Validation(format!("g1d must be positive, got {g}")));
            }
        }
        if !(self.j_hz >= 0.0) {
            return Err(Error::Validation(format!(
                "j_hz must be non-negative, got {}",
                self.j_hz
            )));
        }
        if self.psf_sigma_um < 0.0 {
            return Err(Error::Validation("psf_sigma_um must be non-negative".into()));
        }
        if self.n_pixels < 2 {
            return Err(Error::Validation("n_pixels must be at least 2".into()));
        }
        Ok(())
    }

    /// λ_T > l_C: the quadratic expansion of the tunnelling term is valid.
    pub fn check_regime(&self) -> Result<()> {
        let s = DerivedScales::new(self);
        if !(s.coherence_length > s.healing_length) {
            return Err(Error::Validation(format!(
                "outside the Klein-Gordon regime: λ_T = {:.3} μm does not exceed l_C = {:.3} μm",
                s.coherence_length, s.healing_length
            )));
        }
        Ok(())
    }
}

/// Derived scales in internal units (μm, ms, ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// g₁D/ħ, μm/ms.
    pub g_over_hbar: f64,
    /// ħ/m, μm²/ms.
    pub hbar_over_m: f64,
    pub density: f64,
    pub length: f64,
    /// Speed of sound c, μm/ms.
    pub sound_speed: f64,
    /// l_C, μm (infinite for J = 0).
    pub healing_length: f64,
    /// λ_T, μm.
    pub coherence_length: f64,
    /// Zero-mode rate u = 2g₁D/(ħL), rad/ms.
    pub zero_mode_rate: f64,
    /// Tunnelling rate J, rad/ms.
    pub tunnelling: f64,
    /// Mass gap ω_m = √(4g₁D n₁D J/ħ), rad/ms.
    pub mass_gap: f64,
    /// Pre-quench inverse temperature, (ħ·rad/ms)⁻¹.
    pub beta: f64,
}

impl DerivedScales {
    pub fn new(p: &FieldParameters) -> Self {
        let g_over_hbar = units::velocity_to_internal(p.g1d_si() / units::HBAR);
        let hbar_over_m = units::area_rate_to_internal(units::HBAR / p.mass_kg);
        let density = p.n1d_per_um;
        let tunnelling = units::per_second_to_internal(2.0 * std::f64::consts::PI * p.j_hz);
        let beta = units::beta_from_nanokelvin(p.t_nk);
        Self {
            g_over_hbar,
            hbar_over_m,
            density,
            length: p.length_um,
            sound_speed: (g_over_hbar * density * hbar_over_m).sqrt(),
            healing_length: (hbar_over_m / (4.0 * tunnelling)).sqrt(),
            coherence_length: 2.0 * hbar_over_m * density * beta,
            zero_mode_rate: 2.0 * g_over_hbar / p.length_um,
            tunnelling,
            mass_gap: (4.0 * g_over_hbar * density * tunnelling).sqrt(),
            beta,
        }
    }

    /// Time for sound to cross the box, ms.
    pub fn crossing_time(&self) -> f64 {
        self.length / self.sound_speed
    }

    /// √(g₁D m/n₁D)/ħ, the dimensionless ratio fixing the eigenfunction amplitudes.
    pub fn amplitude_ratio(&self) -> f64 {
        (self.g_over_hbar / (self.density * self.hbar_over_m)).sqrt()
    }

    /// Mass gap for an arbitrary tunnelling rate J/2π in Hz.
    pub fn mass_gap_for(&self, j_hz: f64) -> f64 {
        let j = units::per_second_to_internal(2.0 * std::f64::consts::PI * j_hz);
        (4.0 * self.g_over_hbar * self.density * j).sqrt()
    }
}

/// Parameters together with their derived scales and the global mode basis.
#[derive(Debug, Clone)]
pub struct KgField {
    params: FieldParameters,
    scales: DerivedScales,
    basis: ModeBasis,
}

impl KgField {
    pub fn new(params: FieldParameters) -> Result<Self> {
        params.validate()?;
        let scales = DerivedScales::new(&params);
        let basis = ModeBasis::new(params.bc, params.length_um, params.n_pixels, &scales);
        Ok(Self { params, scales, basis })
    }

    pub fn params(&self) -> &FieldParameters {
        &self.params
    }

    pub fn scales(&self) -> &DerivedScales {
        &self.scales
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn n_pixels(&self) -> usize {
        self.params.n_pixels
    }

    /// Same field at a different temperature.
    pub fn with_temperature(&self, t_nk: f64) -> Result<Self> {
        let mut p = self.params.clone();
        p.t_nk = t_nk;
        Self::new(p)
    }

    /// Model of the `n_region` right-most pixels with their own Hamiltonian.
    pub fn region(&self, n_region: usize) -> Result<RegionModel> {
        RegionModel::new(self, n_region)
    }

    pub fn environment(&self, split: &crate::gaussian::Partition) -> Result<RegionModel> {
        if split.n_total != self.n_pixels() {
            return Err(Error::InvalidPartition {
                n_system: split.n_system,
                n_total: split.n_total,
            });
        }
        self.region(split.n_env())
    }
}
