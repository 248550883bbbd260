//! Gaussian-state linear algebra on the phase space (φ₁..φ_N, p₁..p_N).
//!
//! Every covariance matrix here is real, symmetric and uses the convention in
//! which the vacuum variance of a canonical quadrature is 1/2, so a pure normal
//! mode has symplectic eigenvalue 1/2. First moments are always zero.

mod flow;
mod williamson;

use std::ops::Range;

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};

pub use flow::{flow_matrix, propagate};
pub use williamson::{thermal_covariance, williamson, WilliamsonDecomposition};

/// Tolerance for symmetry checks, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Default slack below 1/2 that is still accepted as physical.
pub const PHYSICALITY_TOL: f64 = 1e-8;

/// Canonical ordering: all φ coordinates first, then all conjugate momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSpaceLayout {
    n_modes: usize,
}

impl PhaseSpaceLayout {
    pub fn new(n_modes: usize) -> Self {
        assert!(n_modes > 0, "phase space needs at least one mode");
        Self { n_modes }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    /// Ω = [[0, 1], [−1, 0]] with N×N identity blocks.
    pub fn omega(&self) -> DMatrix<f64> {
        symplectic_form(self.n_modes)
    }
}

pub(crate) fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        om[(i, n + i)] = 1.0;
        om[(n + i, i)] = -1.0;
    }
    om
}

fn check_square_even(m: &DMatrix<f64>) -> Result<PhaseSpaceLayout> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || !m.nrows().is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "phase-space matrix must be 2N×2N, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(PhaseSpaceLayout::new(m.nrows() / 2))
}

fn symmetrized(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let scale = m.amax().max(1.0);
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Validation(format!(
            "{what} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Second-moment matrix Γ of a zero-mean Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    layout: PhaseSpaceLayout,
    gamma: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        let layout = check_square_even(&gamma)?;
        let gamma = symmetrized(gamma, "covariance matrix")?;
        Ok(Self { layout, gamma })
    }

    /// Product vacuum, Γ = I/2.
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            layout: PhaseSpaceLayout::new(n_modes),
            gamma: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5,
        }
    }

    /// Assemble from the φφ, pp and φp blocks.
    pub fn from_blocks(phiphi: &DMatrix<f64>, rhorho: &DMatrix<f64>, phirho: &DMatrix<f64>) -> Result<Self> {
        let n = phiphi.nrows();
        if rhorho.shape() != (n, n) || phirho.shape() != (n, n) || phiphi.ncols() != n {
            return Err(Error::LayoutMismatch {
                expected: n,
                found: rhorho.nrows(),
            });
        }
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(phiphi);
        g.view_mut((n, n), (n, n)).copy_from(rhorho);
        g.view_mut((0, n), (n, n)).copy_from(phirho);
        g.view_mut((n, 0), (n, n)).copy_from(&phirho.transpose());
        Self::new(g)
    }

    /// Γ_A ⊕ Γ_B with A's pixels first.
    pub fn direct_sum(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.n_modes(), b.n_modes());
        let n = na + nb;
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        for (src, off, len) in [(a, 0, na), (b, na, nb)] {
            let m = src.n_modes();
            for i in 0..2 * len {
                for j in 0..2 * len {
                    let gi = if i < m { off + i } else { n + off + i - m };
                    let gj = if j < m { off + j } else { n + off + j - m };
                    g[(gi, gj)] = src.gamma[(i, j)];
                }
            }
        }
        Self {
            layout: PhaseSpaceLayout::new(n),
            gamma: g,
        }
    }

    pub fn layout(&self) -> PhaseSpaceLayout {
        self.layout
    }

    pub fn n_modes(&self) -> usize {
        self.layout.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.gamma
    }

    pub fn phiphi(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        self.gamma.view((0, 0), (n, n)).into_owned()
    }

    pub fn rhorho(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        self.gamma.view((n, n), (n, n)).into_owned()
    }

    pub fn phirho(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        self.gamma.view((0, n), (n, n)).into_owned()
    }

    /// Congruence T Γ Tᵀ.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.ncols() != self.gamma.nrows() {
            return Err(Error::LayoutMismatch {
                expected: self.gamma.nrows(),
                found: t.ncols(),
            });
        }
        let g = t * &self.gamma * t.transpose();
        Self::new((&g + g.transpose()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.gamma - &other.gamma).amax()
    }

    /// Merge runs of `n / blocks` adjacent pixels: φ is averaged and the
    /// conjugate momentum summed, so the coarse pairs stay canonical.
    pub fn coarse_grain(&self, blocks: usize) -> Result<Self> {
        let n = self.n_modes();
        if blocks == 0 || !n.is_multiple_of(blocks) {
            return Err(Error::Validation(format!(
                "cannot merge {n} pixels into {blocks} blocks"
            )));
        }
        let b = n / blocks;
        let mut s = DMatrix::zeros(2 * blocks, 2 * n);
        for i in 0..n {
            s[(i / b, i)] = 1.0 / b as f64;
            s[(blocks + i / b, n + i)] = 1.0;
        }
        self.congruence(&s)
    }
}

/// Coefficient matrix of H = XᵀH̃X + offset.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    layout: PhaseSpaceLayout,
    hmat: DMatrix<f64>,
    offset: f64,
}

impl QuadraticHamiltonian {
    pub fn new(hmat: DMatrix<f64>, offset: f64) -> Result<Self> {
        let layout = check_square_even(&hmat)?;
        let hmat = symmetrized(hmat, "Hamiltonian matrix")?;
        Ok(Self { layout, hmat, offset })
    }

    /// Diagonal Hamiltonian Σ a_k φ_k² + b_k p_k².
    pub fn diagonal(phi_coeffs: &[f64], rho_coeffs: &[f64], offset: f64) -> Result<Self> {
        if phi_coeffs.len() != rho_coeffs.len() {
            return Err(Error::LayoutMismatch {
                expected: phi_coeffs.len(),
                found: rho_coeffs.len(),
            });
        }
        let diag: Vec<f64> = phi_coeffs.iter().chain(rho_coeffs).copied().collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)), offset)
    }

    pub fn layout(&self) -> PhaseSpaceLayout {
        self.layout
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.hmat
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// T⁻ᵀ H̃ T⁻¹ expressed through the supplied matrix `t_inv_t` = T⁻ᵀ.
    pub fn congruence(&self, t_inv_t: &DMatrix<f64>) -> Result<Self> {
        let h = t_inv_t * &self.hmat * t_inv_t.transpose();
        Self::new((&h + h.transpose()) * 0.5, self.offset)
    }

    pub(crate) fn is_diagonal(&self) -> bool {
        let n = self.hmat.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.hmat[(i, j)] == 0.0))
    }
}

/// Bipartition of N pixels into a system on the left edge and the
/// environment on the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Partition {
    pub n_system: usize,
    pub n_total: usize,
}

impl Partition {
    pub fn new(n_system: usize, n_total: usize) -> Result<Self> {
        if n_system == 0 || n_system >= n_total {
            return Err(Error::InvalidPartition { n_system, n_total });
        }
        Ok(Self { n_system, n_total })
    }

    pub fn n_env(&self) -> usize {
        self.n_total - self.n_system
    }

    pub fn system(&self) -> Range<usize> {
        0..self.n_system
    }

    pub fn environment(&self) -> Range<usize> {
        self.n_system..self.n_total
    }

    /// Ratio L_S / L.
    pub fn system_fraction(&self) -> f64 {
        self.n_system as f64 / self.n_total as f64
    }

    /// Every non-trivial split of `n` pixels.
    pub fn all(n: usize) -> Vec<Self> {
        (1..n)
            .map(|s| Self {
                n_system: s,
                n_total: n,
            })
            .collect()
    }
}

/// Positive eigenvalues of iΩΓ sorted descending.
pub fn symplectic_eigenvalues(gamma: &CovarianceMatrix) -> Result<Vec<f64>> {
    let n = gamma.n_modes();
    let m = gamma.layout.omega() * &gamma.gamma;
    let scale = gamma.gamma.amax().max(1.0);
    let schur = Schur::try_new(m, 1e-15 * scale, 10_000 + 200 * n).ok_or_else(|| {
        Error::NonConvergence(format!(
            "Schur iteration on ΩΓ ({}×{}, max |Γ| = {:.3e}, trace = {:.3e})",
            2 * n,
            2 * n,
            gamma.gamma.amax(),
            gamma.gamma.trace()
        ))
    })?;
    let mut mags: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.im.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    // Eigenvalues come in ±iλ pairs; take one of each.
    let lambdas: Vec<f64> = mags.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    Ok(lambdas)
}

/// Entropy contribution of one normal mode with symplectic eigenvalue λ.
pub fn mode_entropy(lambda: f64) -> f64 {
    let plus = lambda + 0.5;
    let minus = lambda - 0.5;
    let minus_term = if minus < 1e-12 { 0.0 } else { minus * minus.ln() };
    plus * plus.ln() - minus_term
}

/// von Neumann entropy in nats.
pub fn von_neumann_entropy(gamma: &CovarianceMatrix) -> Result<f64> {
    let lambdas = symplectic_eigenvalues(gamma)?;
    entropy_from_spectrum(&lambdas)
}

pub fn entropy_from_spectrum(lambdas: &[f64]) -> Result<f64> {
    let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.5 - PHYSICALITY_TOL {
        return Err(Error::UnphysicalState { min_lambda: min });
    }
    Ok(lambdas.iter().map(|&l| mode_entropy(l)).sum())
}

/// Principal submatrix over arbitrary pixel indices.
pub fn restrict_indices(gamma: &CovarianceMatrix, pixels: &[usize]) -> Result<CovarianceMatrix> {
    if pixels.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = gamma.n_modes();
    if let Some(&bad) = pixels.iter().find(|&&p| p >= n) {
        return Err(Error::Validation(format!("pixel {bad} outside a field of {n} pixels")));
    }
    let idx: Vec<usize> = pixels.iter().copied().chain(pixels.iter().map(|p| p + n)).collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| gamma.gamma[(idx[i], idx[j])]);
    Ok(CovarianceMatrix {
        layout: PhaseSpaceLayout::new(pixels.len()),
        gamma: sub,
    })
}

/// Gaussian partial trace onto a contiguous pixel range.
pub fn restrict(gamma: &CovarianceMatrix, pixels: Range<usize>) -> Result<CovarianceMatrix> {
    let idx: Vec<usize> = pixels.collect();
    restrict_indices(gamma, &idx)
}

/// I(S:E) = S(Γ_S) + S(Γ_E) − S(Γ_SE).
pub fn mutual_information(gamma: &CovarianceMatrix, split: &Partition) -> Result<f64> {
    if split.n_total != gamma.n_modes() {
        return Err(Error::LayoutMismatch {
            expected: gamma.n_modes(),
            found: split.n_total,
        });
    }
    let s_sys = von_neumann_entropy(&restrict(gamma, split.system())?)?;
    let s_env = von_neumann_entropy(&restrict(gamma, split.environment())?)?;
    let s_tot = von_neumann_entropy(gamma)?;
    Ok(clamp_small_negative(s_sys + s_env - s_tot))
}

pub(crate) fn clamp_small_negative(x: f64) -> f64 {
    if x < 0.0 && x > -PHYSICALITY_TOL {
        0.0
    } else {
        x
    }
}

/// Tr[ϱH] = Σ Γ_ij H̃_ij + offset.
pub fn mean_energy(gamma: &CovarianceMatrix, ham: &QuadraticHamiltonian) -> Result<f64> {
    if gamma.layout != ham.layout {
        return Err(Error::LayoutMismatch {
            expected: ham.layout.n_modes(),
            found: gamma.n_modes(),
        });
    }
    Ok(gamma.gamma.component_mul(&ham.hmat).sum() + ham.offset)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalityReport {
    pub min_lambda: f64,
    pub pass: bool,
}

pub fn check_physicality(gamma: &CovarianceMatrix, tol: f64) -> PhysicalityReport {
    match symplectic_eigenvalues(gamma) {
        Ok(l) => {
            let min_lambda = l.iter().copied().fold(f64::INFINITY, f64::min);
            PhysicalityReport {
                min_lambda,
                pass: min_lambda >= 0.5 - tol,
            }
        }
        Err(_) => PhysicalityReport {
            min_lambda: f64::NAN,
            pass: false,
        },
    }
}
