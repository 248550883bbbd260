//! Forward simulation of the mass quench: pre-quench thermal state, massless
//! evolution, imaging blur and synthetic phase-profile shots.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{momentum_to_real, psf_blur, KgField};
use crate::gaussian::{propagate, thermal_covariance, CovarianceMatrix};

/// Hold times and shot synthesis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuenchProtocol {
    /// Hold times after the quench, ms; ascending from 0.
    pub time_grid: Vec<f64>,
    pub shots_per_time: usize,
    pub seed: u64,
    /// Extra white phase noise per pixel, rad.
    pub detection_noise_sigma: f64,
}

impl Default for QuenchProtocol {
    fn default() -> Self {
        Self {
            time_grid: uniform_grid(65.0, 14),
            shots_per_time: 500,
            seed: 0,
            detection_noise_sigma: 0.0,
        }
    }
}

/// `n` equally spaced points on [0, t_max].
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

impl QuenchProtocol {
    pub fn validate(&self) -> Result<()> {
        let g = &self.time_grid;
        if g.is_empty() {
            return Err(Error::Validation("time_grid is empty".into()));
        }
        if g[0] != 0.0 {
            return Err(Error::Validation(format!(
                "time_grid must start at 0, starts at {}",
                g[0]
            )));
        }
        if g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|t| !t.is_finite()) {
            return Err(Error::Validation("time_grid must be strictly ascending".into()));
        }
        if self.shots_per_time == 0 {
            return Err(Error::Validation("shots_per_time must be positive".into()));
        }
        if !(self.detection_noise_sigma >= 0.0) {
            return Err(Error::Validation("detection_noise_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mode-space thermal state of the massive Hamiltonian at the configured temperature.
pub fn prepare_prequench(field: &KgField) -> Result<CovarianceMatrix> {
    thermal_covariance(&field.prequench_hamiltonian(), field.scales().beta)
}

/// Mode-space Γ(t) under the massless Hamiltonian.
pub fn evolve_postquench(gamma0: &CovarianceMatrix, field: &KgField, t: f64) -> Result<CovarianceMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Validation(format!("hold time must be non-negative, got {t}")));
    }
    propagate(gamma0, &field.postquench_hamiltonian(), t)
}

/// Noiseless state track on a time grid.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub times: Vec<f64>,
    /// Mode-space Γ(t).
    pub modes: Vec<CovarianceMatrix>,
    /// Pixel-space Γ(t), no imaging blur.
    pub real: Vec<CovarianceMatrix>,
}

impl GroundTruth {
    pub fn simulate(field: &KgField, times: &[f64]) -> Result<Self> {
        let g0 = prepare_prequench(field)?;
        Self::from_initial(field, &g0, times)
    }

    pub fn from_initial(field: &KgField, gamma0: &CovarianceMatrix, times: &[f64]) -> Result<Self> {
        let modes = times
            .par_iter()
            .map(|&t| evolve_postquench(gamma0, field, t))
            .collect::<Result<Vec<_>>>()?;
        let real = modes
            .par_iter()
            .map(|g| momentum_to_real(g, field.basis()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: times.to_vec(),
            modes,
            real,
        })
    }

    /// Pixel-space Γ(t) as seen through the imaging blur.
    pub fn measured(&self, field: &KgField) -> Result<Vec<CovarianceMatrix>> {
        self.real
            .iter()
            .map(|g| psf_blur(g, field.params().psf_sigma_um, field.basis()))
            .collect()
    }
}

/// Sampled relative-phase profiles, one matrix (shots × pixels) per hold time.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotEnsemble {
    pub times: Vec<f64>,
    pub shots: Vec<DMatrix<f64>>,
    pub seed: u64,
    pub psf_applied: bool,
}

impl ShotEnsemble {
    pub fn n_pixels(&self) -> usize {
        self.shots.first().map_or(0, |s| s.ncols())
    }

    pub fn shots_per_time(&self) -> usize {
        self.shots.first().map_or(0, |s| s.nrows())
    }

    /// Φ² at every hold time.
    pub fn correlations(&self, z0: usize) -> Result<Vec<DMatrix<f64>>> {
        self.shots
            .iter()
            .map(|s| referenced_phase_correlations(s, z0))
            .collect()
    }
}

/// Symmetric square root of a positive-semidefinite covariance; eigenvalues
/// down to −1e−10·scale are clipped to 0.
pub fn covariance_root(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-15, 0)
        .ok_or_else(|| Error::NonConvergence("eigensolve of the phase covariance".into()))?;
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::FactorizationFailure(min));
    }
    if min < 0.0 {
        log::debug!("clipping phase-covariance eigenvalue {min:.3e} to 0");
    }
    let roots: DVector<f64> = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Phase covariance of one shot: blurred Γ_φφ plus detection noise.
pub fn shot_covariance(gamma_measured: &CovarianceMatrix, noise_sigma: f64) -> DMatrix<f64> {
    let mut c = gamma_measured.phiphi();
    for i in 0..c.nrows() {
        c[(i, i)] += noise_sigma * noise_sigma;
    }
    c
}

/// Draw the shots of hold time `time_index`; stream `time_index` of the seeded generator.
pub fn sample_phase_shots(
    gamma_measured: &CovarianceMatrix,
    protocol: &QuenchProtocol,
    time_index: usize,
) -> Result<DMatrix<f64>> {
    let root = covariance_root(&shot_covariance(gamma_measured, protocol.detection_noise_sigma))?;
    let n = root.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    rng.set_stream(time_index as u64);
    let mut shots = DMatrix::zeros(protocol.shots_per_time, n);
    let mut xi = DVector::zeros(n);
    for s in 0..protocol.shots_per_time {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = &root * &xi;
        shots.row_mut(s).copy_from(&x.transpose());
    }
    Ok(shots)
}

/// Shots for every hold time of the protocol from the blurred ground truth.
pub fn sample_ensemble(measured: &[CovarianceMatrix], protocol: &QuenchProtocol) -> Result<ShotEnsemble> {
    protocol.validate()?;
    if measured.len() != protocol.time_grid.len() {
        return Err(Error::Validation(format!(
            "{} states for {} hold times",
            measured.len(),
            protocol.time_grid.len()
        )));
    }
    let shots = measured
        .par_iter()
        .enumerate()
        .map(|(i, g)| sample_phase_shots(g, protocol, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShotEnsemble {
        times: protocol.time_grid.clone(),
        shots,
        seed: protocol.seed,
        psf_applied: true,
    })
}

/// Φ²_{mn} = ⟨(φ_m − φ_{z0})(φ_n − φ_{z0})⟩ over shots (rows).
pub fn referenced_phase_correlations(shots: &DMatrix<f64>, z0: usize) -> Result<DMatrix<f64>> {
    let (ns, n) = shots.shape();
    if ns < 2 {
        return Err(Error::Validation(format!("need at least 2 shots, got {ns}")));
    }
    check_reference(z0, n)?;
    let mut d = shots.clone();
    for mut row in d.row_iter_mut() {
        let r = row[z0];
        row.add_scalar_mut(-r);
    }
    Ok(d.transpose() * d / ns as f64)
}

/// Infinite-shot Φ² from a phase covariance C.
pub fn exact_referenced_correlations(phase_cov: &DMatrix<f64>, z0: usize) -> Result<DMatrix<f64>> {
    let n = phase_cov.nrows();
    check_reference(z0, n)?;
    Ok(DMatrix::from_fn(n, n, |m, k| {
        phase_cov[(m, k)] - phase_cov[(m, z0)] - phase_cov[(z0, k)] + phase_cov[(z0, z0)]
    }))
}

fn check_reference(z0: usize, n: usize) -> Result<()> {
    if z0 >= n {
        return Err(Error::Validation(format!("reference pixel {z0} outside 0..{n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BoundaryCondition, FieldParameters};
    use crate::gaussian::{mean_energy, von_neumann_entropy};
    use approx::assert_relative_eq;

    fn field(bc: BoundaryCondition) -> KgField {
        KgField::new(FieldParameters {
            bc,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn default_grid() {
        let p = QuenchProtocol::default();
        assert_eq!(p.time_grid.len(), 14);
        assert_eq!(p.time_grid[13], 65.0);
        assert_relative_eq!(p.time_grid[1], 5.0);
        assert!(p.validate().is_ok());
        let bad = QuenchProtocol {
            shots_per_time: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_temperature_prequench_is_pure() {
        let f = field(BoundaryCondition::Neumann).with_temperature(1e-6).unwrap();
        let g = prepare_prequench(&f).unwrap();
        assert!(von_neumann_entropy(&g).unwrap() < 1e-9);
    }

    #[test]
    fn weak_tunnelling_zero_mode_diverges() {
        let base = field(BoundaryCondition::Neumann);
        let mut prev = 0.0;
        for j in [0.76, 0.076, 0.0076] {
            let mut p = base.params().clone();
            p.j_hz = j;
            let f = KgField::new(p).unwrap();
            let g = prepare_prequench(&f).unwrap();
            let wm = f.scales().mass_gap;
            let u = f.scales().zero_mode_rate;
            let expect = u / wm * 0.5 / (f.scales().beta * wm / 2.0).tanh();
            assert_relative_eq!(g.matrix()[(0, 0)], expect, max_relative = 1e-9);
            // high-temperature limit: T·u/ω_m²
            assert!((g.matrix()[(0, 0)] * f.scales().beta * wm * wm / u - 1.0).abs() < 1e-2);
            assert!(g.matrix()[(0, 0)] > prev);
            prev = g.matrix()[(0, 0)];
        }
    }

    #[test]
    fn dirichlet_recurrence() {
        let f = field(BoundaryCondition::Dirichlet);
        let g0 = prepare_prequench(&f).unwrap();
        let tc = f.scales().crossing_time();
        for t in [tc, 2.0 * tc] {
            let g = evolve_postquench(&g0, &f, t).unwrap();
            assert!(g.max_abs_diff(&g0) < 1e-9 * g0.matrix().amax());
        }
    }

    #[test]
    fn neumann_zero_mode_shear() {
        let f = field(BoundaryCondition::Neumann);
        let g0 = prepare_prequench(&f).unwrap();
        let u = f.scales().zero_mode_rate;
        let (a, b, c) = (g0.matrix()[(0, 0)], g0.matrix()[(7, 7)], g0.matrix()[(0, 7)]);
        for t in [5.0, 30.0, 65.0] {
            let g = evolve_postquench(&g0, &f, t).unwrap();
            let lhs = g.matrix()[(0, 0)] - a - 2.0 * u * t * c - u * u * t * t * b;
            assert!(lhs.abs() < 1e-10, "{lhs}");
        }
    }

    #[test]
    fn ground_truth_conserves_entropy_and_energy() {
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            let f = field(bc);
            let gt = GroundTruth::simulate(&f, &QuenchProtocol::default().time_grid).unwrap();
            let h = f.real_hamiltonian(0.0).unwrap();
            let s0 = von_neumann_entropy(&gt.real[0]).unwrap();
            let e0 = mean_energy(&gt.real[0], &h).unwrap();
            for g in &gt.real {
                assert!((von_neumann_entropy(g).unwrap() - s0).abs() <= 1e-9 * s0.max(1.0));
                assert!((mean_energy(g, &h).unwrap() - e0).abs() <= 1e-9 * e0);
            }
        }
    }

    #[test]
    fn zero_covariance_gives_zero_shots() {
        let g = CovarianceMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(&[0.0, 0.0, 1.0, 1.0]))).unwrap();
        let p = QuenchProtocol {
            shots_per_time: 10,
            ..Default::default()
        };
        let s = sample_phase_shots(&g, &p, 0).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sample_covariance_within_standard_errors() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let mut g = DMatrix::identity(4, 4);
        g.view_mut((0, 0), (2, 2)).copy_from(&c);
        let g = CovarianceMatrix::new(g).unwrap();
        let p = QuenchProtocol {
            shots_per_time: 100_000,
            seed: 7,
            ..Default::default()
        };
        let s = sample_phase_shots(&g, &p, 3).unwrap();
        let est = s.transpose() * &s / s.nrows() as f64;
        let nsh = s.nrows() as f64;
        for i in 0..2 {
            for j in 0..2 {
                let se = ((c[(i, j)].powi(2) + c[(i, i)] * c[(j, j)]) / nsh).sqrt();
                assert!((est[(i, j)] - c[(i, j)]).abs() < 3.0 * se, "({i},{j})");
            }
        }
    }

    #[test]
    fn shots_are_deterministic_and_stream_separated() {
        let f = field(BoundaryCondition::Neumann);
        let gt = GroundTruth::simulate(&f, &[0.0, 5.0]).unwrap();
        let m = gt.measured(&f).unwrap();
        let p = QuenchProtocol {
            time_grid: vec![0.0, 5.0],
            shots_per_time: 20,
            seed: 11,
            ..Default::default()
        };
        let a = sample_ensemble(&m, &p).unwrap();
        let b = sample_ensemble(&m, &p).unwrap();
        assert_eq!(a, b);
        let serial = sample_phase_shots(&m[1], &p, 1).unwrap();
        assert_eq!(serial, a.shots[1]);
        assert_ne!(sample_phase_shots(&m[1], &p, 0).unwrap(), a.shots[1]);
    }

    #[test]
    fn referenced_correlations_properties() {
        let shots = DMatrix::from_row_slice(3, 3, &[0.1, 0.5, -0.2, 0.3, -0.4, 0.9, -1.0, 0.2, 0.0]);
        let phi = referenced_phase_correlations(&shots, 1).unwrap();
        assert!(phi.row(1).iter().all(|v| *v == 0.0));
        assert!(phi.column(1).iter().all(|v| *v == 0.0));
        let shifted = shots.map(|v| v + 3.7);
        let phi2 = referenced_phase_correlations(&shifted, 1).unwrap();
        assert!((phi - phi2).amax() < 1e-14);
        assert!(referenced_phase_correlations(&shots.rows(0, 1).into_owned(), 0).is_err());
    }

    #[test]
    fn exact_correlations_expand_the_product() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.3, 0.1, 0.3, 1.0]);
        let phi = exact_referenced_correlations(&c, 0).unwrap();
        assert_relative_eq!(phi[(1, 2)], 0.3 - 0.5 - 0.1 + 2.0);
        assert_relative_eq!(phi[(2, 2)], 1.0 - 0.2 + 2.0);
    }

    #[test]
    fn detection_noise_pattern() {
        let f = field(BoundaryCondition::Neumann);
        let gt = GroundTruth::simulate(&f, &[10.0]).unwrap();
        let m = &gt.measured(&f).unwrap()[0];
        let sd = 0.3;
        let z0 = 2;
        let clean = exact_referenced_correlations(&shot_covariance(m, 0.0), z0).unwrap();
        let noisy = exact_referenced_correlations(&shot_covariance(m, sd), z0).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let pattern = if i == z0 || j == z0 {
                    0.0
                } else if i == j {
                    2.0
                } else {
                    1.0
                };
                assert_relative_eq!(noisy[(i, j)] - clean[(i, j)], sd * sd * pattern, epsilon = 1e-12);
            }
        }
    }
}
