//! Dynamical tomography: recover mode-space covariance blocks at a window
//! start time from referenced phase correlations at later hold times.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{momentum_to_real, psf_blur, KgField, ModeBasis};
use crate::gaussian::{symplectic_eigenvalues, williamson, CovarianceMatrix};
use crate::quench::{evolve_postquench, exact_referenced_correlations, prepare_prequench};
use crate::units;

const RANK_TOL: f64 = 1e-10;
const ILL_CONDITIONED: f64 = 1e8;
const PROJECTION_TRIGGER: f64 = 0.5 - 1e-12;
const PROJECTION_FLOOR: f64 = 0.5 + 1e-10;
const BALANCED_FLOOR: f64 = 0.25;

/// How the unobservable zero-mode block is filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ZeroModeSource {
    /// Pre-quench thermal block evolved by the exact shear.
    #[default]
    Theory,
    Fixed {
        phiphi: f64,
        rhorho: f64,
        phirho: f64,
    },
    /// Vacuum variances, i.e. the zero mode contributes no excess fluctuations.
    Omit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySettings {
    /// ms.
    pub window_length: f64,
    /// Oscillating modes fitted; `None` means N − 1.
    pub n_modes_fit: Option<usize>,
    pub ridge: f64,
    /// Reference pixel.
    pub z0: usize,
    pub zero_mode: ZeroModeSource,
}

impl Default for TomographySettings {
    fn default() -> Self {
        Self {
            window_length: 32.5,
            n_modes_fit: None,
            ridge: 0.0,
            z0: 0,
            zero_mode: ZeroModeSource::Theory,
        }
    }
}

impl TomographySettings {
    pub fn validate(&self, n_pixels: usize) -> Result<()> {
        if !(self.window_length > 0.0) {
            return Err(Error::Validation("window_length must be positive".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Validation("ridge must be non-negative".into()));
        }
        if self.z0 >= n_pixels {
            return Err(Error::Validation(format!("z0 = {} outside 0..{n_pixels}", self.z0)));
        }
        let m = self.modes_fit(n_pixels);
        if m == 0 || m > n_pixels {
            return Err(Error::Validation(format!("n_modes_fit = {m} outside 1..={n_pixels}")));
        }
        Ok(())
    }

    pub fn modes_fit(&self, n_pixels: usize) -> usize {
        self.n_modes_fit.unwrap_or(n_pixels - 1)
    }
}

/// Index map of the unknown vector: φφ upper triangle, ρρ upper triangle, full φρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLayout {
    pub n_modes: usize,
}

impl UnknownLayout {
    pub fn n_triangle(&self) -> usize {
        self.n_modes * (self.n_modes + 1) / 2
    }

    pub fn len(&self) -> usize {
        2 * self.n_triangle() + self.n_modes * self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.n_modes == 0
    }

    fn tri(&self, k: usize, l: usize) -> usize {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        k * self.n_modes - k * (k + 1) / 2 + l
    }

    pub fn phiphi(&self, k: usize, l: usize) -> usize {
        self.tri(k, l)
    }

    pub fn rhorho(&self, k: usize, l: usize) -> usize {
        self.n_triangle() + self.tri(k, l)
    }

    pub fn phirho(&self, k: usize, l: usize) -> usize {
        2 * self.n_triangle() + k * self.n_modes + l
    }

    /// Pack mode-space blocks of the fitted modes into the unknown vector.
    pub fn pack(&self, pp: &DMatrix<f64>, rr: &DMatrix<f64>, pr: &DMatrix<f64>) -> DVector<f64> {
        let m = self.n_modes;
        let mut x = DVector::zeros(self.len());
        for k in 0..m {
            for l in k..m {
                x[self.phiphi(k, l)] = pp[(k, l)];
                x[self.rhorho(k, l)] = rr[(k, l)];
            }
            for l in 0..m {
                x[self.phirho(k, l)] = pr[(k, l)];
            }
        }
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let m = self.n_modes;
        let pp = DMatrix::from_fn(m, m, |k, l| x[self.phiphi(k, l)]);
        let rr = DMatrix::from_fn(m, m, |k, l| x[self.rhorho(k, l)]);
        let pr = DMatrix::from_fn(m, m, |k, l| x[self.phirho(k, l)]);
        (pp, rr, pr)
    }
}

/// Forward model of Φ² in terms of the mode blocks at the window start.
#[derive(Debug, Clone)]
pub struct DesignModel {
    /// (B f^φ) at the pixels, fitted columns only.
    table: DMatrix<f64>,
    freqs: Vec<f64>,
    columns: Vec<usize>,
    layout: UnknownLayout,
}

impl DesignModel {
    /// Fit the `n_fit` lowest oscillating modes; eigenfunctions blurred by the PSF of width `sigma`.
    pub fn new(basis: &ModeBasis, n_fit: usize, sigma: f64) -> Result<Self> {
        let first = basis.first_oscillator();
        if n_fit == 0 || first + n_fit > basis.n_modes() {
            return Err(Error::Validation(format!(
                "cannot fit {n_fit} oscillating modes of {}",
                basis.n_modes() - first
            )));
        }
        let columns: Vec<usize> = (first..first + n_fit).collect();
        let full = basis.blurred_phi_table(sigma);
        let table = DMatrix::from_fn(full.nrows(), n_fit, |m, j| full[(m, columns[j])]);
        let freqs = columns.iter().map(|&c| basis.frequencies()[c]).collect();
        Ok(Self {
            table,
            freqs,
            columns,
            layout: UnknownLayout { n_modes: n_fit },
        })
    }

    pub fn layout(&self) -> UnknownLayout {
        self.layout
    }

    /// Mode-space columns of the fitted modes.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn lowest_frequency(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Coefficients of Φ²_{mn}(t + Δt) over the unknowns at t.
    pub fn design_row(&self, m: usize, n: usize, z0: usize, dt: f64) -> DVector<f64> {
        let lay = self.layout;
        let nm = lay.n_modes;
        let a = |p: usize, k: usize| self.table[(p, k)] - self.table[(z0, k)];
        let (s, c): (Vec<f64>, Vec<f64>) = self.freqs.iter().map(|w| (w * dt).sin_cos()).unzip();
        let mut row = DVector::zeros(lay.len());
        for k in 0..nm {
            for l in 0..nm {
                let fkl = a(m, k) * a(n, l);
                let flk = a(m, l) * a(n, k);
                row[lay.phirho(k, l)] = (fkl + flk) * c[k] * s[l];
                if l < k {
                    continue;
                }
                if k == l {
                    row[lay.phiphi(k, k)] = fkl * c[k] * c[k];
                    row[lay.rhorho(k, k)] = fkl * s[k] * s[k];
                } else {
                    row[lay.phiphi(k, l)] = (fkl + flk) * c[k] * c[l];
                    row[lay.rhorho(k, l)] = (fkl + flk) * s[k] * s[l];
                }
            }
        }
        row
    }
}

/// Fitted blocks of one window with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub start_time: f64,
    pub hold_offsets: Vec<f64>,
    pub mode_columns: Vec<usize>,
    #[serde(with = "crate::io::matrix")]
    pub phiphi: DMatrix<f64>,
    #[serde(with = "crate::io::matrix")]
    pub rhorho: DMatrix<f64>,
    #[serde(with = "crate::io::matrix")]
    pub phirho: DMatrix<f64>,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub rank: usize,
    pub n_equations: usize,
    pub n_unknowns: usize,
    pub warnings: Vec<String>,
}

/// Least-squares fit of the mode blocks at `start_time` from `(Δt, Φ²)` pairs.
pub fn fit_window(
    start_time: f64,
    correlations: &[(f64, &DMatrix<f64>)],
    model: &DesignModel,
    z0: usize,
    ridge: f64,
) -> Result<FitResult> {
    let lay = model.layout();
    let np = model.table.nrows();
    let pairs: Vec<(usize, usize)> = (0..np)
        .filter(|&m| m != z0)
        .flat_map(|m| (m..np).filter(move |&n| n != z0).map(move |n| (m, n)))
        .collect();
    let n_eq = pairs.len() * correlations.len();
    let n_unk = lay.len();
    let n_rows = n_eq + if ridge > 0.0 { n_unk } else { 0 };
    let mut a = DMatrix::zeros(n_rows, n_unk);
    let mut b = DVector::zeros(n_rows);
    let mut r = 0;
    for &(dt, phi2) in correlations {
        for &(m, n) in &pairs {
            a.row_mut(r).copy_from(&model.design_row(m, n, z0, dt).transpose());
            b[r] = phi2[(m, n)];
            r += 1;
        }
    }
    if ridge > 0.0 {
        let sr = ridge.sqrt();
        for j in 0..n_unk {
            a[(n_eq + j, j)] = sr;
        }
    }
    let svd = SVD::new(a.clone(), true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < n_unk {
        return Err(Error::UnderdeterminedFit {
            equations: n_eq,
            unknowns: n_unk,
            rank,
        });
    }
    let cond = smax / sv.min();
    let x = svd
        .solve(&b, RANK_TOL * smax)
        .map_err(|e| Error::NonConvergence(format!("least-squares solve: {e}")))?;
    let residual_norm = (&a * &x - &b).norm();
    let mut warnings = Vec::new();
    if cond > ILL_CONDITIONED {
        warnings.push(format!("ill-conditioned design matrix (condition number {cond:.3e})"));
    }
    let span = correlations.iter().map(|c| c.0).fold(0.0, f64::max);
    if model.lowest_frequency() * span < FRAC_PI_2 {
        warnings.push(format!(
            "window too short: slowest fitted mode acquires {:.3} rad < π/2",
            model.lowest_frequency() * span
        ));
    }
    for w in &warnings {
        log::warn!("window at t = {start_time}: {w}");
    }
    let (pp, rr, pr) = lay.unpack(&x);
    Ok(FitResult {
        start_time,
        hold_offsets: correlations.iter().map(|c| c.0).collect(),
        mode_columns: model.columns().to_vec(),
        phiphi: pp,
        rhorho: rr,
        phirho: pr,
        residual_norm,
        condition_number: cond,
        rank,
        n_equations: n_eq,
        n_unknowns: n_unk,
        warnings,
    })
}

/// Mode-space Γ of all modes from a fit, with unfitted modes taken from `fill`.
pub fn assemble(fit: &FitResult, fill: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let n = fill.n_modes();
    let cols = &fit.mode_columns;
    if cols.iter().any(|&c| c >= n) {
        return Err(Error::LayoutMismatch {
            expected: n,
            found: cols.iter().max().map_or(0, |c| c + 1),
        });
    }
    let fitted: Vec<bool> = (0..n).map(|j| cols.contains(&j)).collect();
    let f = fill.matrix();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in (0..n).filter(|&i| !fitted[i]) {
        for j in (0..n).filter(|&j| !fitted[j]) {
            g[(i, j)] = f[(i, j)];
            g[(n + i, n + j)] = f[(n + i, n + j)];
            g[(i, n + j)] = f[(i, n + j)];
            g[(n + j, i)] = f[(n + j, i)];
        }
    }
    for (a, &i) in cols.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            g[(i, j)] = fit.phiphi[(a, b)];
            g[(n + i, n + j)] = fit.rhorho[(a, b)];
            g[(i, n + j)] = fit.phirho[(a, b)];
            g[(n + j, i)] = fit.phirho[(a, b)];
        }
    }
    CovarianceMatrix::new(g)
}

/// Outcome of the physicality projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub gamma: CovarianceMatrix,
    pub projected: bool,
    pub min_lambda_before: f64,
}

/// Raise normal-mode values below 1/2 to 1/2 + 1e−10 in the Williamson frame.
///
/// The work is done in a frame where each mode's φφ and ρρ variances are
/// equal, reached by a diagonal symplectic rescaling; there, eigenvalues
/// below `BALANCED_FLOOR` are lifted before the Williamson step so that the
/// decomposition stays well conditioned. `min_lambda_before` is 0 for a
/// matrix that is not positive definite.
pub fn project_physical(gamma: &CovarianceMatrix) -> Result<Projection> {
    let eig = SymmetricEigen::try_new(gamma.matrix().clone(), 1e-15, 0)
        .ok_or_else(|| Error::NonConvergence("eigensolve of the fitted Γ".into()))?;
    let indefinite = eig.eigenvalues.min() <= 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let min_before = if indefinite {
        0.0
    } else {
        symplectic_eigenvalues(gamma)?.last().copied().unwrap_or(0.5)
    };
    if !indefinite && min_before >= PROJECTION_TRIGGER {
        return Ok(Projection {
            gamma: gamma.clone(),
            projected: false,
            min_lambda_before: min_before,
        });
    }
    let n = gamma.n_modes();
    let g = gamma.matrix();
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let (pp, rr) = (g[(k, k)], g[(n + k, n + k)]);
            if pp > 0.0 && rr > 0.0 {
                (rr / pp).powf(0.25)
            } else {
                1.0
            }
        })
        .collect();
    let d = DVector::from_fn(2 * n, |i, _| if i < n { scale[i] } else { 1.0 / scale[i - n] });
    let balance = |m: &DMatrix<f64>, d: &DVector<f64>| DMatrix::from_fn(2 * n, 2 * n, |i, j| d[i] * m[(i, j)] * d[j]);
    let inv_d = d.map(|x| 1.0 / x);
    let mut m = balance(g, &d);
    for _ in 0..3 {
        let e = SymmetricEigen::try_new(m.clone(), 1e-15, 0)
            .ok_or_else(|| Error::NonConvergence("eigensolve of the balanced Γ".into()))?;
        let vals = e.eigenvalues.map(|v| v.max(BALANCED_FLOOR));
        let lifted = &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose();
        let w = williamson(&((&lifted + lifted.transpose()) * 0.5))?;
        let raised: Vec<f64> = w.diag.iter().map(|&x| x.max(PROJECTION_FLOOR)).collect();
        m = w.recompose_with(&raised);
        let check = CovarianceMatrix::new(m.clone())?;
        if symplectic_eigenvalues(&check)?.last().copied().unwrap_or(0.5) >= PROJECTION_TRIGGER {
            break;
        }
    }
    Ok(Projection {
        gamma: CovarianceMatrix::new(balance(&m, &inv_d))?,
        projected: true,
        min_lambda_before: min_before,
    })
}

/// Theory states used to fill unobservable modes.
#[derive(Debug, Clone)]
pub struct TheoryFill {
    field: KgField,
    gamma0: CovarianceMatrix,
    source: ZeroModeSource,
}

impl TheoryFill {
    pub fn new(field: &KgField, source: ZeroModeSource) -> Result<Self> {
        Ok(Self {
            field: field.clone(),
            gamma0: prepare_prequench(field)?,
            source,
        })
    }

    /// Mode-space fill state at time t.
    pub fn at(&self, t: f64) -> Result<CovarianceMatrix> {
        let g = evolve_postquench(&self.gamma0, &self.field, t)?;
        if !self.field.basis().has_zero_mode() {
            return Ok(g);
        }
        let (pp, rr, pr) = match self.source {
            ZeroModeSource::Theory => return Ok(g),
            ZeroModeSource::Fixed { phiphi, rhorho, phirho } => (phiphi, rhorho, phirho),
            ZeroModeSource::Omit => (0.5, 0.5, 0.0),
        };
        let n = g.n_modes();
        let mut m = g.into_matrix();
        m[(0, 0)] = pp;
        m[(n, n)] = rr;
        m[(0, n)] = pr;
        m[(n, 0)] = pr;
        CovarianceMatrix::new(m)
    }
}

/// One reconstructed time point.
#[derive(Debug, Clone)]
pub struct WindowReconstruction {
    pub time: f64,
    pub start_index: usize,
    pub fit: FitResult,
    pub gamma_modes: CovarianceMatrix,
    pub gamma_real: CovarianceMatrix,
    pub projected: bool,
    pub min_lambda_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScanResult {
    pub windows: Vec<WindowReconstruction>,
    pub failures: Vec<WindowFailure>,
}

impl ScanResult {
    pub fn times(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.time).collect()
    }

    pub fn real_series(&self) -> Vec<CovarianceMatrix> {
        self.windows.iter().map(|w| w.gamma_real.clone()).collect()
    }
}

/// Grid indices of the hold times in each window, keyed by start index.
pub fn window_plan(times: &[f64], window_length: f64) -> Vec<(usize, Vec<usize>)> {
    let t_end = times.last().copied().unwrap_or(0.0);
    let eps = 1e-9 * window_length.max(1.0);
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t + window_length <= t_end + eps)
        .map(|(i, &t)| {
            let holds = (i..times.len())
                .filter(|&j| times[j] <= t + window_length + eps)
                .collect();
            (i, holds)
        })
        .collect()
}

/// Sliding-window reconstruction over a correlation series `correlations[i]` at `times[i]`.
pub fn scan_reconstruction(
    correlations: &[DMatrix<f64>],
    times: &[f64],
    settings: &TomographySettings,
    field: &KgField,
    fill: &TheoryFill,
) -> Result<ScanResult> {
    let n = field.n_pixels();
    settings.validate(n)?;
    if correlations.len() != times.len() {
        return Err(Error::Validation(format!(
            "{} correlation matrices for {} hold times",
            correlations.len(),
            times.len()
        )));
    }
    let model = DesignModel::new(field.basis(), settings.modes_fit(n), field.params().psf_sigma_um)?;
    let plan = window_plan(times, settings.window_length);
    let outcomes: Vec<std::result::Result<WindowReconstruction, WindowFailure>> = plan
        .par_iter()
        .map(|(i, holds)| {
            let t = times[*i];
            reconstruct_one(correlations, times, *i, holds, settings, field, &model, fill).map_err(|e| WindowFailure {
                time: t,
                reason: e.to_string(),
            })
        })
        .collect();
    let mut out = ScanResult::default();
    for o in outcomes {
        match o {
            Ok(w) => out.windows.push(w),
            Err(f) => {
                log::warn!("window at t = {} skipped: {}", f.time, f.reason);
                out.failures.push(f)
            }
        }
    }
    Ok(out)
}

/// Φ² carried by oscillating modes outside the fit, from the fill state at
/// the window start, at each hold offset; `None` when every one is fitted.
fn unfitted_correlations(
    fill: &CovarianceMatrix,
    fitted: &[usize],
    field: &KgField,
    offsets: &[f64],
    z0: usize,
) -> Result<Option<Vec<DMatrix<f64>>>> {
    let n = fill.n_modes();
    let omitted: Vec<usize> = (0..n)
        .filter(|j| !fitted.contains(j) && field.basis().frequencies()[*j] > 0.0)
        .collect();
    if omitted.is_empty() {
        return Ok(None);
    }
    let g = fill.matrix();
    let mut part = DMatrix::zeros(2 * n, 2 * n);
    for &a in &omitted {
        for &b in &omitted {
            for (i, j) in [(a, b), (n + a, b), (a, n + b), (n + a, n + b)] {
                part[(i, j)] = g[(i, j)];
            }
        }
    }
    let part = CovarianceMatrix::new(part)?;
    let sigma = field.params().psf_sigma_um;
    offsets
        .iter()
        .map(|&dt| {
            let real = momentum_to_real(&evolve_postquench(&part, field, dt)?, field.basis())?;
            exact_referenced_correlations(&psf_blur(&real, sigma, field.basis())?.phiphi(), z0)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

#[allow(clippy::too_many_arguments)]
fn reconstruct_one(
    correlations: &[DMatrix<f64>],
    times: &[f64],
    i: usize,
    holds: &[usize],
    settings: &TomographySettings,
    field: &KgField,
    model: &DesignModel,
    fill: &TheoryFill,
) -> Result<WindowReconstruction> {
    let t = times[i];
    let fill_t = fill.at(t)?;
    let offsets: Vec<f64> = holds.iter().map(|&j| times[j] - t).collect();
    let residual = unfitted_correlations(&fill_t, model.columns(), field, &offsets, settings.z0)?;
    let cleaned: Vec<DMatrix<f64>> = match residual {
        Some(r) => holds.iter().zip(r).map(|(&j, r)| &correlations[j] - r).collect(),
        None => holds.iter().map(|&j| correlations[j].clone()).collect(),
    };
    let data: Vec<(f64, &DMatrix<f64>)> = offsets.iter().copied().zip(cleaned.iter()).collect();
    let fit = fit_window(t, &data, model, settings.z0, settings.ridge)?;
    let raw = assemble(&fit, &fill_t)?;
    let proj = project_physical(&raw)?;
    let gamma_real = momentum_to_real(&proj.gamma, field.basis())?;
    Ok(WindowReconstruction {
        time: t,
        start_index: i,
        fit,
        gamma_modes: proj.gamma,
        gamma_real,
        projected: proj.projected,
        min_lambda_before: proj.min_lambda_before,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub t_nk: f64,
    /// Root-mean-square log-variance residual.
    pub residual: f64,
    pub n_modes: usize,
}

/// Fit T to the massive thermal model of the oscillating-mode variances in `columns`.
///
/// Minimises Σ_k [ln⟨φ_k²⟩ − ln v_φ(T)]² + [ln⟨δρ_k²⟩ − ln v_ρ(T)]² with
/// v_φ = (ω_k/ω̃_k)·½coth(βω̃_k/2), v_ρ = (ω̃_k/ω_k)·½coth(βω̃_k/2).
pub fn temperature_fit(gamma_modes: &CovarianceMatrix, field: &KgField, columns: &[usize]) -> Result<TemperatureFit> {
    let n = gamma_modes.n_modes();
    let wm = field.scales().mass_gap;
    let mut obs = Vec::with_capacity(columns.len());
    for &j in columns {
        let w = field.basis().frequencies()[j];
        if j >= n || w <= 0.0 {
            return Err(Error::DegenerateFit(format!("column {j} is not an oscillating mode")));
        }
        let (vp, vr) = (gamma_modes.matrix()[(j, j)], gamma_modes.matrix()[(n + j, n + j)]);
        if !(vp > 0.0 && vr > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "non-positive variance in mode column {j}"
            )));
        }
        let wt = (w * w + wm * wm).sqrt();
        obs.push((w, wt, vp.ln(), vr.ln()));
    }
    if obs.is_empty() {
        return Err(Error::DegenerateFit("no modes to fit".into()));
    }
    let cost = |log_t: f64| -> f64 {
        let beta = units::beta_from_nanokelvin(log_t.exp());
        obs.iter()
            .map(|&(w, wt, lp, lr)| {
                let occ = (0.5 / (beta * wt / 2.0).tanh()).ln();
                let r = (w / wt).ln();
                (lp - (r + occ)).powi(2) + (lr - (-r + occ)).powi(2)
            })
            .sum()
    };
    let (lo, hi) = (1e-2f64.ln(), 1e5f64.ln());
    let steps = 400;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let best = (0..=steps)
        .min_by(|&a, &b| cost(grid[a]).total_cmp(&cost(grid[b])))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let log_t = 0.5 * (a + b);
    Ok(TemperatureFit {
        t_nk: log_t.exp(),
        residual: (cost(log_t) / (2 * obs.len()) as f64).sqrt(),
        n_modes: obs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BoundaryCondition, FieldParameters};
    use crate::gaussian::check_physicality;
    use crate::quench::{exact_referenced_correlations, shot_covariance, GroundTruth};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn field() -> KgField {
        KgField::new(FieldParameters::default()).unwrap()
    }

    fn blocks(g: &CovarianceMatrix, cols: &[usize]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = g.n_modes();
        let m = g.matrix();
        let k = cols.len();
        (
            DMatrix::from_fn(k, k, |a, b| m[(cols[a], cols[b])]),
            DMatrix::from_fn(k, k, |a, b| m[(n + cols[a], n + cols[b])]),
            DMatrix::from_fn(k, k, |a, b| m[(cols[a], n + cols[b])]),
        )
    }

    #[test]
    fn unknown_count() {
        let lay = UnknownLayout { n_modes: 6 };
        assert_eq!(lay.len(), 78);
        let pp = DMatrix::from_fn(6, 6, |a, b| (a + b) as f64);
        let pr = DMatrix::from_fn(6, 6, |a, b| (3 * a + b) as f64);
        let x = lay.pack(&pp, &pp, &pr);
        let (a, _, c) = lay.unpack(&x);
        assert_eq!(a, pp);
        assert_eq!(c, pr);
    }

    #[test]
    fn design_row_limits() {
        let f = field();
        let model = DesignModel::new(f.basis(), 6, 3.0).unwrap();
        let lay = model.layout();
        let r0 = model.design_row(2, 4, 0, 0.0);
        let a = |p: usize, k: usize| model.table[(p, k)] - model.table[(0, k)];
        assert_relative_eq!(r0[lay.phiphi(1, 1)], a(2, 1) * a(4, 1), epsilon = 1e-15);
        assert_relative_eq!(
            r0[lay.phiphi(1, 3)],
            a(2, 1) * a(4, 3) + a(2, 3) * a(4, 1),
            epsilon = 1e-15
        );
        for k in 0..6 {
            for l in 0..6 {
                assert_eq!(r0[lay.rhorho(k, l)], 0.0);
                assert_eq!(r0[lay.phirho(k, l)], 0.0);
            }
        }
        assert!(model.design_row(0, 3, 0, 7.0).iter().all(|v| *v == 0.0));
        let k = 2;
        let quarter = FRAC_PI_2 / model.freqs[k];
        let rq = model.design_row(3, 3, 0, quarter);
        assert!(rq[lay.phiphi(k, k)].abs() < 1e-15);
        assert_relative_eq!(rq[lay.rhorho(k, k)], a(3, k) * a(3, k), max_relative = 1e-12);
    }

    #[test]
    fn forward_model_is_exact_for_random_states() {
        let f = field();
        let model = DesignModel::new(f.basis(), 6, 3.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: DMatrix<f64> = DMatrix::from_fn(14, 14, |_, _| rng.random::<f64>() - 0.5);
        let g = CovarianceMatrix::new(&x * x.transpose() + DMatrix::identity(14, 14)).unwrap();
        let (pp, rr, pr) = blocks(&g, model.columns());
        let xv = model.layout().pack(&pp, &rr, &pr);
        for dt in [0.0, 3.3, 17.0] {
            let gt = evolve_postquench(&g, &f, dt).unwrap();
            let meas = crate::field::psf_blur(&momentum_to_real(&gt, f.basis()).unwrap(), 3.0, f.basis()).unwrap();
            let phi2 = exact_referenced_correlations(&meas.phiphi(), 0).unwrap();
            for (m, n) in [(1, 1), (2, 5), (6, 3)] {
                let pred = model.design_row(m, n, 0, dt).dot(&xv);
                assert!((pred - phi2[(m, n)]).abs() < 1e-10 * phi2.amax());
            }
        }
    }

    fn exact_series(f: &KgField, times: &[f64], z0: usize) -> (GroundTruth, Vec<DMatrix<f64>>) {
        let gt = GroundTruth::simulate(f, times).unwrap();
        let corr = gt
            .measured(f)
            .unwrap()
            .iter()
            .map(|g| exact_referenced_correlations(&shot_covariance(g, 0.0), z0).unwrap())
            .collect();
        (gt, corr)
    }

    #[test]
    fn noiseless_scan_recovers_ground_truth() {
        let f = field();
        let times = crate::quench::uniform_grid(65.0, 14);
        let (gt, corr) = exact_series(&f, &times, 0);
        let fill = TheoryFill::new(&f, ZeroModeSource::Theory).unwrap();
        let scan = scan_reconstruction(&corr, &times, &TomographySettings::default(), &f, &fill).unwrap();
        assert_eq!(scan.windows.len(), 7);
        assert!(scan.failures.is_empty());
        for w in &scan.windows {
            assert_eq!(times[w.start_index], w.time);
            let truth = &gt.modes[w.start_index];
            let scale = truth.matrix().amax();
            assert!(w.gamma_modes.max_abs_diff(truth) < 1e-6 * scale);
            assert!(!w.projected);
            assert_eq!(w.fit.hold_offsets.len(), 7);
        }
    }

    #[test]
    fn reference_pixel_equivariance() {
        let f = field();
        let times = crate::quench::uniform_grid(65.0, 14);
        let fill = TheoryFill::new(&f, ZeroModeSource::Theory).unwrap();
        let mut results = Vec::new();
        for z0 in [0, 3] {
            let (_, corr) = exact_series(&f, &times, z0);
            let s = TomographySettings {
                z0,
                ..Default::default()
            };
            results.push(scan_reconstruction(&corr, &times, &s, &f, &fill).unwrap());
        }
        for (a, b) in results[0].windows.iter().zip(&results[1].windows) {
            assert!(a.gamma_modes.max_abs_diff(&b.gamma_modes) < 1e-6 * a.gamma_modes.matrix().amax());
        }
    }

    #[test]
    fn vacuum_correlations_give_vacuum() {
        let f = field();
        let model = DesignModel::new(f.basis(), 6, 3.0).unwrap();
        let vac = CovarianceMatrix::vacuum(7);
        let times: Vec<f64> = (0..8).map(|i| 5.0 * i as f64).collect();
        let corr: Vec<DMatrix<f64>> = times
            .iter()
            .map(|&t| {
                let g = evolve_postquench(&vac, &f, t).unwrap();
                let meas = crate::field::psf_blur(&momentum_to_real(&g, f.basis()).unwrap(), 3.0, f.basis()).unwrap();
                exact_referenced_correlations(&meas.phiphi(), 0).unwrap()
            })
            .collect();
        let data: Vec<(f64, &DMatrix<f64>)> = times.iter().zip(&corr).map(|(t, c)| (*t, c)).collect();
        let fit = fit_window(0.0, &data, &model, 0, 0.0).unwrap();
        assert!((fit.phiphi.clone() - DMatrix::identity(6, 6) * 0.5).amax() < 1e-8);
        assert!((fit.rhorho.clone() - DMatrix::identity(6, 6) * 0.5).amax() < 1e-8);
        assert!(fit.phirho.amax() < 1e-8);
    }

    #[test]
    fn single_hold_time_is_underdetermined() {
        let f = field();
        let model = DesignModel::new(f.basis(), 6, 3.0).unwrap();
        let c = DMatrix::identity(7, 7);
        let err = fit_window(0.0, &[(0.0, &c)], &model, 0, 0.0).unwrap_err();
        assert!(matches!(err, Error::UnderdeterminedFit { .. }));
    }

    #[test]
    fn short_window_warns() {
        let f = field();
        let times = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let (_, corr) = exact_series(&f, &times, 0);
        let model = DesignModel::new(f.basis(), 6, 3.0).unwrap();
        let data: Vec<(f64, &DMatrix<f64>)> = times.iter().zip(&corr).map(|(t, c)| (*t, c)).collect();
        let fit = fit_window(0.0, &data, &model, 0, 0.0).unwrap();
        assert!(fit.warnings.iter().any(|w| w.contains("too short")));
    }

    #[test]
    fn projection_cases() {
        let g = CovarianceMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(&[
            0.8, 0.45, 0.8, 0.45,
        ])))
        .unwrap();
        let p = project_physical(&g).unwrap();
        assert!(p.projected);
        let lam = symplectic_eigenvalues(&p.gamma).unwrap();
        assert_relative_eq!(lam[0], 0.8, max_relative = 1e-12);
        assert_relative_eq!(lam[1], PROJECTION_FLOOR, epsilon = 1e-12);
        assert!(check_physicality(&p.gamma, 1e-8).pass);
        let again = project_physical(&p.gamma).unwrap();
        assert!(!again.projected);
        assert_eq!(again.gamma, p.gamma);
        let fine = CovarianceMatrix::vacuum(3);
        assert!(!project_physical(&fine).unwrap().projected);
    }

    #[test]
    fn projection_handles_indefinite_input() {
        let mut m = DMatrix::identity(4, 4) * 0.6;
        m[(0, 1)] = 0.9;
        m[(1, 0)] = 0.9;
        let g = CovarianceMatrix::new(m).unwrap();
        let p = project_physical(&g).unwrap();
        assert!(p.projected);
        assert!(check_physicality(&p.gamma, 1e-8).pass);
    }

    #[test]
    fn window_plan_bookkeeping() {
        let times = crate::quench::uniform_grid(65.0, 14);
        let plan = window_plan(&times, 32.5);
        assert_eq!(plan.len(), 7);
        assert_eq!(plan[0].1, (0..7).collect::<Vec<_>>());
        assert_eq!(plan[1].1, (1..8).collect::<Vec<_>>());
        let fine = crate::quench::uniform_grid(65.0, 27);
        let plan = window_plan(&fine, 32.5);
        assert_eq!(plan.len(), 14);
        assert!(plan.iter().all(|(_, h)| h.len() == 14));
    }

    #[test]
    fn temperature_fit_self_consistent() {
        for t in [49.0, 98.0] {
            let f = field().with_temperature(t).unwrap();
            let g = prepare_prequench(&f).unwrap();
            let fit = temperature_fit(&g, &field(), &[1, 2, 3, 4, 5, 6]).unwrap();
            assert_relative_eq!(fit.t_nk, t, max_relative = 1e-6);
            assert!(fit.residual < 1e-6);
        }
        let bad = CovarianceMatrix::new(DMatrix::zeros(14, 14)).unwrap();
        assert!(matches!(
            temperature_fit(&bad, &field(), &[1, 2]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn dirichlet_fit_with_all_modes_but_nyquist() {
        let f = KgField::new(FieldParameters {
            bc: BoundaryCondition::Dirichlet,
            psf_sigma_um: 0.0,
            ..Default::default()
        })
        .unwrap();
        let model = DesignModel::new(f.basis(), 6, 0.0).unwrap();
        assert_eq!(model.columns(), &[0, 1, 2, 3, 4, 5]);
    }
}
