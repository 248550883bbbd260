use nalgebra::DMatrix;

use super::{symplectic_form, CovarianceMatrix, QuadraticHamiltonian};
use crate::error::{Error, Result};

/// S(t) = exp(2tΩH̃), the Heisenberg flow X(t) = S(t)X(0) of H = XᵀH̃X.
///
/// Diagonal Hamiltonians are integrated in closed form mode by mode
/// (rotation, shear or squeeze); anything else goes through `expm`.
pub fn flow_matrix(ham: &QuadraticHamiltonian, t: f64) -> DMatrix<f64> {
    let n = ham.layout().n_modes();
    let h = ham.matrix();
    if ham.is_diagonal() {
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            let (a, b) = (h[(k, k)], h[(n + k, n + k)]);
            let blk = pair_flow(a, b, t);
            s[(k, k)] = blk[0];
            s[(k, n + k)] = blk[1];
            s[(n + k, k)] = blk[2];
            s[(n + k, n + k)] = blk[3];
        }
        return s;
    }
    let gen = symplectic_form(n) * h * (2.0 * t);
    gen.exp()
}

/// Flow of a φ² + b p² over time t, row-major 2×2.
fn pair_flow(a: f64, b: f64, t: f64) -> [f64; 4] {
    let ab = a * b;
    if ab > 0.0 {
        let w = 2.0 * ab.sqrt();
        let (s, c) = (w * t).sin_cos();
        [c, 2.0 * b / w * s, -2.0 * a / w * s, c]
    } else if ab < 0.0 {
        let k = 2.0 * (-ab).sqrt();
        let (s, c) = ((k * t).sinh(), (k * t).cosh());
        [c, 2.0 * b / k * s, -2.0 * a / k * s, c]
    } else {
        // free particle or free field: pure shear
        [1.0, 2.0 * b * t, -2.0 * a * t, 1.0]
    }
}

/// Γ(t) = S(t) Γ(0) S(t)ᵀ.
pub fn propagate(gamma0: &CovarianceMatrix, ham: &QuadraticHamiltonian, t: f64) -> Result<CovarianceMatrix> {
    if gamma0.layout() != ham.layout() {
        return Err(Error::LayoutMismatch {
            expected: ham.layout().n_modes(),
            found: gamma0.n_modes(),
        });
    }
    let s = flow_matrix(ham, t);
    let om = symplectic_form(ham.layout().n_modes());
    let err = (&s * &om * s.transpose() - &om).amax();
    if err > 1e-9 * s.amax().powi(2).max(1.0) {
        return Err(Error::NonConvergence(format!(
            "flow at t = {t} is not symplectic (deviation {err:.3e})"
        )));
    }
    gamma0.congruence(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{mean_energy, von_neumann_entropy};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn identity_at_zero_time() {
        let h = QuadraticHamiltonian::diagonal(&[0.3, 0.0], &[0.3, 0.2], 0.0).unwrap();
        let g = CovarianceMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[
            1.0, 2.0, 0.7, 3.0,
        ])))
        .unwrap();
        assert_eq!(propagate(&g, &h, 0.0).unwrap(), g);
    }

    #[test]
    fn full_period_returns() {
        let w = 0.37;
        let h = QuadraticHamiltonian::diagonal(&[w / 2.0], &[w / 2.0], 0.0).unwrap();
        let g = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.6])).unwrap();
        let gt = propagate(&g, &h, 2.0 * PI / w).unwrap();
        assert!(gt.max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn rotation_matches_mode_equations() {
        // φ(t) = φ cos ωt + p sin ωt
        let w = 0.5;
        let h = QuadraticHamiltonian::diagonal(&[w / 2.0], &[w / 2.0], 0.0).unwrap();
        let s = flow_matrix(&h, 1.3);
        assert_relative_eq!(s[(0, 0)], (w * 1.3).cos(), epsilon = 1e-15);
        assert_relative_eq!(s[(0, 1)], (w * 1.3).sin(), epsilon = 1e-15);
        assert_relative_eq!(s[(1, 0)], -(w * 1.3).sin(), epsilon = 1e-15);
    }

    #[test]
    fn zero_mode_shear_by_hand() {
        let (u, t) = (3.3e-3, 17.0);
        let (a, b, c) = (0.2, 1900.0, 0.4);
        let h = QuadraticHamiltonian::diagonal(&[0.0], &[u / 2.0], 0.0).unwrap();
        let g = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[a, c, c, b])).unwrap();
        let gt = propagate(&g, &h, t).unwrap();
        assert_relative_eq!(
            gt.matrix()[(0, 0)],
            a + 2.0 * u * t * c + u * u * t * t * b,
            epsilon = 1e-12
        );
        assert_relative_eq!(gt.matrix()[(1, 1)], b, epsilon = 1e-12);
    }

    #[test]
    fn dense_flow_matches_closed_form() {
        let h = QuadraticHamiltonian::diagonal(&[0.4, 0.0, 1.1], &[0.25, 0.3, 0.9], 0.0).unwrap();
        let closed = flow_matrix(&h, 7.0);
        let dense = (symplectic_form(3) * h.matrix() * 14.0).exp();
        assert!((closed - dense).amax() < 1e-11);
    }

    #[test]
    fn energy_and_entropy_conserved_under_coupled_flow() {
        let mut hm = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.5, 0.7, 0.4, 0.6]));
        hm[(0, 1)] = 0.1;
        hm[(1, 0)] = 0.1;
        let h = QuadraticHamiltonian::new(hm, 0.0).unwrap();
        let g = CovarianceMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                1.2, 0.1, 0.0, 0.2, 0.1, 0.9, 0.0, 0.0, 0.0, 0.0, 0.8, 0.1, 0.2, 0.0, 0.1, 1.5,
            ],
        ))
        .unwrap();
        let e0 = mean_energy(&g, &h).unwrap();
        let s0 = von_neumann_entropy(&g).unwrap();
        for t in [0.5, 3.0, 25.0] {
            let gt = propagate(&g, &h, t).unwrap();
            assert!((mean_energy(&gt, &h).unwrap() - e0).abs() <= 1e-9 * e0);
            assert!((von_neumann_entropy(&gt).unwrap() - s0).abs() <= 1e-9);
        }
    }
}
