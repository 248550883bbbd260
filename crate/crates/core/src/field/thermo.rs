use serde::{Deserialize, Serialize};

use super::ModeBasis;
use crate::error::{Error, Result};
use crate::gaussian::{mean_energy, von_neumann_entropy, CovarianceMatrix, QuadraticHamiltonian};

/// Normal-mode content of a massless box: harmonic frequencies and an
/// optional compact zero mode with H = (u/2) n², n ∈ ℤ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSpectrum {
    pub frequencies: Vec<f64>,
    pub zero_mode_rate: Option<f64>,
}

/// Gibbs-state thermodynamics at one inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvThermo {
    pub beta: f64,
    pub log_partition: f64,
    pub energy: f64,
    pub zero_mode_log_partition: f64,
    pub zero_mode_energy: f64,
    pub harmonic_log_partition: f64,
    pub harmonic_energy: f64,
}

const THETA_CUTOFF: f64 = 1e-16;
const MAX_THETA_TERMS: f64 = 1e6;

impl GibbsSpectrum {
    pub fn from_basis(basis: &ModeBasis) -> Self {
        let start = basis.first_oscillator();
        Self {
            frequencies: basis.frequencies()[start..].to_vec(),
            zero_mode_rate: basis.zero_mode_rate(),
        }
    }

    /// Σ ω_k/2.
    pub fn zero_point(&self) -> f64 {
        self.frequencies.iter().sum::<f64>() / 2.0
    }

    pub fn thermo(&self, beta: f64) -> EnvThermo {
        let (zl, ze) = self
            .zero_mode_rate
            .map_or((0.0, 0.0), |u| theta_sums(beta * u / 2.0, u));
        let mut hl = 0.0;
        let mut he = 0.0;
        for &w in &self.frequencies {
            let x = beta * w / 2.0;
            hl -= x + (-(-2.0 * x).exp_m1()).ln();
            he += w / 2.0 / x.tanh();
        }
        EnvThermo {
            beta,
            log_partition: zl + hl,
            energy: ze + he,
            zero_mode_log_partition: zl,
            zero_mode_energy: ze,
            harmonic_log_partition: hl,
            harmonic_energy: he,
        }
    }

    /// E(β) − Σω/2, evaluated without cancellation.
    pub fn excess_energy(&self, beta: f64) -> f64 {
        let ze = self.zero_mode_rate.map_or(0.0, |u| theta_sums(beta * u / 2.0, u).1);
        ze + self.frequencies.iter().map(|&w| w / (beta * w).exp_m1()).sum::<f64>()
    }
}

/// (log Σ_n e^{−a n²}, u/2 · ⟨n²⟩) for the compact zero mode.
fn theta_sums(a: f64, u: f64) -> (f64, f64) {
    let n_needed = (-THETA_CUTOFF.ln() / a).sqrt();
    if n_needed <= MAX_THETA_TERMS {
        let mut z = 1.0;
        let mut n2 = 0.0;
        let mut n = 1.0f64;
        loop {
            let t = (-a * n * n).exp();
            if t < THETA_CUTOFF {
                break;
            }
            z += 2.0 * t;
            n2 += 2.0 * n * n * t;
            n += 1.0;
        }
        (z.ln(), u / 2.0 * n2 / z)
    } else {
        // Poisson dual: Σ e^{−an²} = √(π/a) Σ e^{−π²m²/a}
        let mut s = 1.0;
        let mut ds = 0.0;
        let mut m = 1.0f64;
        loop {
            let e = std::f64::consts::PI.powi(2) * m * m / a;
            let t = (-e).exp();
            if t < THETA_CUTOFF {
                break;
            }
            s += 2.0 * t;
            ds += 2.0 * e / a * t;
            m += 1.0;
        }
        let log_z = 0.5 * (std::f64::consts::PI / a).ln() + s.ln();
        (log_z, u / 2.0 * (0.5 / a - ds / s))
    }
}

pub fn gibbs_log_partition(beta: f64, spectrum: &GibbsSpectrum) -> f64 {
    spectrum.thermo(beta).log_partition
}

pub fn gibbs_energy(beta: f64, spectrum: &GibbsSpectrum) -> f64 {
    spectrum.thermo(beta).energy
}

/// The unique β with gibbs_energy(β) = `e_target`.
pub fn effective_beta(e_target: f64, spectrum: &GibbsSpectrum) -> Result<f64> {
    let zp = spectrum.zero_point();
    let excess = e_target - zp;
    if !(excess > 0.0) || !excess.is_finite() {
        return Err(Error::BelowZeroPoint {
            target: e_target,
            zero_point: zp,
        });
    }
    let f = |b: f64| spectrum.excess_energy(b) - excess;
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NonConvergence("effective β bracket below 1e-300".into()));
        }
    }
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonConvergence("effective β bracket above 1e300".into()));
        }
    }
    for _ in 0..400 {
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// D(ϱ‖γ^β) = −S(ϱ) + β Tr[Γ H̃] + log Z(β).
pub fn relative_entropy_to_gibbs(
    gamma: &CovarianceMatrix,
    ham: &QuadraticHamiltonian,
    spectrum: &GibbsSpectrum,
    beta: f64,
) -> Result<f64> {
    let s = von_neumann_entropy(gamma)?;
    let e = mean_energy(gamma, ham)?;
    Ok(-s + beta * e + gibbs_log_partition(beta, spectrum))
}
