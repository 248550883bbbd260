use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{symplectic_form, CovarianceMatrix, QuadraticHamiltonian};
use crate::error::{Error, Result};

/// M = S·diag(d, d)·Sᵀ with S symplectic.
#[derive(Debug, Clone)]
pub struct WilliamsonDecomposition {
    pub symplectic: DMatrix<f64>,
    pub diag: DVector<f64>,
}

impl WilliamsonDecomposition {
    pub fn n_modes(&self) -> usize {
        self.diag.len()
    }

    /// S·diag(values, values)·Sᵀ for replacement normal-mode values.
    pub fn recompose_with(&self, values: &[f64]) -> DMatrix<f64> {
        let n = self.n_modes();
        let mut d = DVector::zeros(2 * n);
        for (k, &v) in values.iter().enumerate() {
            d[k] = v;
            d[n + k] = v;
        }
        let sd = &self.symplectic * DMatrix::from_diagonal(&d);
        let m = sd * self.symplectic.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        self.recompose_with(self.diag.as_slice())
    }

    /// S⁻¹ = −Ω Sᵀ Ω.
    pub fn symplectic_inverse(&self) -> DMatrix<f64> {
        let om = symplectic_form(self.n_modes());
        -(&om * self.symplectic.transpose() * &om)
    }
}

/// Williamson normal form of a symmetric positive-definite 2N×2N matrix.
///
/// With R = M^{1/2}, the antisymmetric G = RΩR has eigenvalues ±i d_k. Its
/// invariant planes are collected from the eigenvectors of −G² = GᵀG and
/// give S = R·[w | v]·D^{-1/2}.
pub fn williamson(m: &DMatrix<f64>) -> Result<WilliamsonDecomposition> {
    let dim = m.nrows();
    if dim != m.ncols() || dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "Williamson decomposition needs a 2N×2N matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = dim / 2;
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 0)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolve of M".into()))?;
    let min_eig = eig.eigenvalues.min();
    if min_eig <= 1e-14 * eig.eigenvalues.amax() {
        return Err(Error::NonConvergence(format!(
            "Williamson decomposition needs a positive-definite matrix (smallest eigenvalue {min_eig:.3e})"
        )));
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let root = (&root + root.transpose()) * 0.5;

    let om = symplectic_form(n);
    let g = &root * &om * &root;
    let g = (&g - g.transpose()) * 0.5;
    let q = g.transpose() * &g;
    let q = (&q + q.transpose()) * 0.5;
    let qe = SymmetricEigen::try_new(q, 1e-15, 0)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolve of −G²".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| qe.eigenvalues[a].total_cmp(&qe.eigenvalues[b]));

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ws: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ds: Vec<f64> = Vec::with_capacity(n);
    for &idx in &order {
        if vs.len() == n {
            break;
        }
        let mut r = qe.eigenvectors.column(idx).into_owned();
        orthogonalize(&mut r, &basis);
        let norm = r.norm();
        if norm < 1e-3 {
            continue;
        }
        let v = r / norm;
        let mut w = &g * &v;
        orthogonalize(&mut w, &basis);
        w -= &v * v.dot(&w);
        let wn = w.norm();
        if wn <= 0.0 {
            return Err(Error::NonConvergence("degenerate invariant plane".into()));
        }
        let w = w / wn;
        let d = w.dot(&(&g * &v));
        basis.push(v.clone());
        basis.push(w.clone());
        vs.push(v);
        ws.push(w);
        ds.push(d);
    }
    if vs.len() != n {
        return Err(Error::NonConvergence(format!(
            "found {} of {n} symplectic planes",
            vs.len()
        )));
    }

    let mut o = DMatrix::zeros(dim, dim);
    for k in 0..n {
        o.set_column(k, &ws[k]);
        o.set_column(n + k, &vs[k]);
    }
    let mut scale = DVector::zeros(dim);
    for k in 0..n {
        let s = 1.0 / ds[k].sqrt();
        scale[k] = s;
        scale[n + k] = s;
    }
    let symplectic = root * o * DMatrix::from_diagonal(&scale);
    Ok(WilliamsonDecomposition {
        symplectic,
        diag: DVector::from_vec(ds),
    })
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(v);
            v.axpy(-c, b, 1.0);
        }
    }
}

/// Covariance matrix of exp(−βH)/Z for a positive-definite quadratic form.
///
/// Each normal mode of frequency ν receives variance coth(βν/2)/2.
pub fn thermal_covariance(ham: &QuadraticHamiltonian, beta: f64) -> Result<CovarianceMatrix> {
    if !(beta > 0.0) {
        return Err(Error::Validation(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let h = ham.matrix();
    let eig = SymmetricEigen::try_new(h.clone(), 1e-15, 0)
        .ok_or_else(|| Error::NonConvergence("symmetric eigensolve of H̃".into()))?;
    let min = eig.eigenvalues.min();
    if min <= 1e-12 * eig.eigenvalues.amax() {
        return Err(Error::ZeroModeAtFiniteMass(min));
    }
    let w = williamson(h)?;
    let n = w.n_modes();
    // H = Σ d_k (y_k² + y_{N+k}²) with Y = SᵀX, so ν_k = 2 d_k.
    let mut var = DVector::zeros(2 * n);
    for k in 0..n {
        let x = beta * w.diag[k];
        let v = 0.5 / x.tanh();
        var[k] = v;
        var[n + k] = v;
    }
    let s_inv = w.symplectic_inverse();
    let g = s_inv.transpose() * DMatrix::from_diagonal(&var) * s_inv;
    CovarianceMatrix::new((&g + g.transpose()) * 0.5)
}
