use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::config::RunConfig;
use super::files::{
    BootstrapRecord, CompareBcDoc, Dataset, Diagnostics, Metadata, Physicality, ReconstructedPoint, Reconstruction,
    ResultsBundle, COMPARE_BC_KIND, DATASET_KIND, RECONSTRUCTION_KIND, RESULTS_KIND,
};
use crate::error::{Error, Result};
use crate::field::{FieldParameters, KgField};
use crate::gaussian::{symplectic_eigenvalues, CovarianceMatrix};
use crate::io::{read_json, OutputFormat};
use crate::landauer::{
    bootstrap, boundary_comparison, extremality_report, subregion_scan, unitarity_report, LandauerReport,
};
use crate::quench::{
    exact_referenced_correlations, referenced_phase_correlations, sample_ensemble, shot_covariance, GroundTruth,
};
use crate::tomography::{scan_reconstruction, temperature_fit, ScanResult, TheoryFill};
use crate::units;

pub const DATASET_FILE: &str = "dataset.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const RESULTS_FILE: &str = "results.json";
pub const COMPARE_BC_FILE: &str = "compare_bc.json";

/// Command-line settings shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub noiseless: bool,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunOptions {
    /// Apply overrides to `config` and validate the result.
    pub fn resolve(&self, mut config: RunConfig) -> Result<RunConfig> {
        if let Some(seed) = self.seed {
            config.protocol.seed = seed;
            config.analysis.bootstrap.seed = seed;
        }
        if let Some(dir) = &self.output {
            config.output.dir = dir.clone();
        }
        if let Some(f) = self.format {
            config.output.format = f;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Ground truth and synthetic data for the configured protocol.
pub fn simulate(config: &RunConfig, noiseless: bool) -> Result<Dataset> {
    let field = KgField::new(config.field.clone())?;
    let times = &config.protocol.time_grid;
    let gt = GroundTruth::simulate(&field, times)?;
    let measured = gt.measured(&field)?;
    let phase_covariance = measured
        .iter()
        .map(|g| shot_covariance(g, config.protocol.detection_noise_sigma))
        .collect();
    let shots = if noiseless {
        Vec::new()
    } else {
        sample_ensemble(&measured, &config.protocol)?.shots
    };
    Ok(Dataset {
        metadata: Metadata::new(DATASET_KIND, config, &field),
        config: config.clone(),
        times: times.clone(),
        noiseless,
        truth_modes: gt.modes,
        truth_real: gt.real,
        shots,
        phase_covariance,
    })
}

/// Φ² per hold time, exact when `exact` or when the dataset carries no shots.
pub fn correlation_series(dataset: &Dataset, z0: usize, exact: bool) -> Result<Vec<DMatrix<f64>>> {
    if exact || dataset.noiseless {
        dataset
            .phase_covariance
            .iter()
            .map(|c| exact_referenced_correlations(c, z0))
            .collect()
    } else {
        dataset
            .shots
            .iter()
            .map(|s| referenced_phase_correlations(s, z0))
            .collect()
    }
}

fn scan(
    correlations: &[DMatrix<f64>],
    times: &[f64],
    config: &RunConfig,
    field: &KgField,
    fill: &TheoryFill,
) -> Result<ScanResult> {
    let result = scan_reconstruction(correlations, times, &config.tomography, field, fill)?;
    if result.windows.is_empty() {
        return Err(match result.failures.first() {
            None => Error::Validation(format!(
                "no window of {} ms fits in the time grid",
                config.tomography.window_length
            )),
            Some(f) => Error::DegenerateFit(format!(
                "all {} windows failed; first: {}",
                result.failures.len(),
                f.reason
            )),
        });
    }
    Ok(result)
}

fn min_lambda(g: &CovarianceMatrix) -> Result<f64> {
    Ok(symplectic_eigenvalues(g)?.into_iter().fold(f64::INFINITY, f64::min))
}

fn fit_temperature(
    g_modes: &CovarianceMatrix,
    field: &KgField,
    columns: &[usize],
) -> Option<crate::tomography::TemperatureFit> {
    let oscillating: Vec<usize> = columns
        .iter()
        .copied()
        .filter(|&j| field.basis().frequencies()[j] > 0.0)
        .collect();
    temperature_fit(g_modes, field, &oscillating)
        .map_err(|e| log::warn!("temperature fit skipped: {e}"))
        .ok()
}

/// Sliding-window tomography of a dataset; `exact` uses infinite-shot correlations.
pub fn reconstruct(dataset: &Dataset, dataset_ref: &str, config: &RunConfig, exact: bool) -> Result<Reconstruction> {
    let field = KgField::new(config.field.clone())?;
    let fill = TheoryFill::new(&field, config.tomography.zero_mode.clone())?;
    let corr = correlation_series(dataset, config.tomography.z0, exact)?;
    let result = scan(&corr, &dataset.times, config, &field, &fill)?;
    let points = result
        .windows
        .iter()
        .map(|w| {
            Ok(ReconstructedPoint {
                time: w.time,
                fit: (&w.fit).into(),
                min_lambda_after: min_lambda(&w.gamma_modes)?,
                gamma_modes: w.gamma_modes.clone(),
                gamma_real: w.gamma_real.clone(),
                projected: w.projected,
                min_lambda_before: w.min_lambda_before,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let temperature_fit = result
        .windows
        .first()
        .filter(|w| w.time == 0.0)
        .and_then(|w| fit_temperature(&w.gamma_modes, &field, &w.fit.mode_columns));
    Ok(Reconstruction {
        metadata: Metadata::new(RECONSTRUCTION_KIND, config, &field),
        config: config.clone(),
        dataset: dataset_ref.to_string(),
        noiseless: exact || dataset.noiseless,
        points,
        failures: result.failures,
        temperature_fit,
    })
}

/// What the Landauer analysis runs on.
pub enum AnalysisInput<'a> {
    GroundTruth(&'a Dataset),
    /// A reconstruction and, when resampling is wanted, its dataset.
    Reconstruction(&'a Reconstruction, Option<&'a Dataset>),
}

const TEMPERATURE_QUANTITY: &str = "T_nK";

/// Flattened pipeline output used as the bootstrap statistic.
fn pipeline_scalars(
    shots: &[DMatrix<f64>],
    times: &[f64],
    expected_times: &[f64],
    config: &RunConfig,
    field: &KgField,
    fill: &TheoryFill,
) -> Result<Vec<f64>> {
    let corr = shots
        .iter()
        .map(|s| referenced_phase_correlations(s, config.tomography.z0))
        .collect::<Result<Vec<_>>>()?;
    let result = scan(&corr, times, config, field, fill)?;
    if result.times() != expected_times {
        return Err(Error::DegenerateFit(
            "window set differs from the reconstruction".into(),
        ));
    }
    let report = subregion_scan(
        &result.real_series(),
        expected_times,
        &config.partitions()?,
        field,
        config.analysis.beta_source,
    )?;
    if !report.failures.is_empty() {
        return Err(Error::DegenerateFit(report.failures[0].reason.clone()));
    }
    let mut out: Vec<f64> = report
        .entries
        .iter()
        .flat_map(|e| e.scalars().map(|(_, v)| v))
        .collect();
    let w0 = &result.windows[0];
    if w0.time == 0.0 {
        let t = temperature_fit(
            &w0.gamma_modes,
            field,
            &oscillating_columns(field, &w0.fit.mode_columns),
        )?;
        out.push(t.t_nk);
    }
    Ok(out)
}

fn oscillating_columns(field: &KgField, columns: &[usize]) -> Vec<usize> {
    columns
        .iter()
        .copied()
        .filter(|&j| field.basis().frequencies()[j] > 0.0)
        .collect()
}

fn bootstrap_records(
    dataset: &Dataset,
    times: &[f64],
    report: &LandauerReport,
    config: &RunConfig,
    field: &KgField,
) -> Result<Vec<BootstrapRecord>> {
    let fill = TheoryFill::new(field, config.tomography.zero_mode.clone())?;
    let settings = &config.analysis.bootstrap;
    let results = bootstrap(&dataset.shots, settings, |s| {
        pipeline_scalars(s, &dataset.times, times, config, field, &fill)
    })?;
    let mut labels: Vec<(f64, Option<usize>, &str)> = report
        .entries
        .iter()
        .flat_map(|e| e.scalars().map(|(q, _)| (e.time, Some(e.n_system), q)))
        .collect();
    if results.len() == labels.len() + 1 {
        labels.push((times[0], None, TEMPERATURE_QUANTITY));
    }
    if results.len() != labels.len() {
        return Err(Error::DegenerateFit(format!(
            "bootstrap produced {} values for {} labels",
            results.len(),
            labels.len()
        )));
    }
    Ok(labels
        .into_iter()
        .zip(results)
        .map(|((time, n_system, quantity), r)| BootstrapRecord {
            time,
            n_system,
            quantity: quantity.to_string(),
            point: r.point,
            low: r.low,
            high: r.high,
            n_resamples: r.n_resamples,
            n_failed: r.n_failed,
            seed: r.seed,
        })
        .collect())
}

fn record_to_bits(mut r: BootstrapRecord) -> BootstrapRecord {
    if r.quantity != "beta_E" && r.quantity != TEMPERATURE_QUANTITY {
        r.point = units::nats_to_bits(r.point);
        r.low = units::nats_to_bits(r.low);
        r.high = units::nats_to_bits(r.high);
    }
    r
}

/// Landauer terms, conservation and extremality tables, and optional bootstrap intervals.
pub fn analyze(input: AnalysisInput<'_>, config: &RunConfig) -> Result<ResultsBundle> {
    let field = KgField::new(config.field.clone())?;
    let splits = config.partitions()?;
    let (source, noiseless, times, series, modes, temperature, dataset) = match input {
        AnalysisInput::GroundTruth(d) => {
            let columns: Vec<usize> = (0..field.n_pixels()).collect();
            let t = fit_temperature(&d.truth_modes[0], &field, &oscillating_columns(&field, &columns));
            (
                "ground_truth",
                true,
                d.times.clone(),
                d.truth_real.clone(),
                d.truth_modes.clone(),
                t,
                None,
            )
        }
        AnalysisInput::Reconstruction(r, d) => (
            "reconstruction",
            r.noiseless,
            r.times(),
            r.real_series(),
            r.points.iter().map(|p| p.gamma_modes.clone()).collect(),
            r.temperature_fit,
            d.filter(|_| !r.noiseless),
        ),
    };
    let landauer = subregion_scan(&series, &times, &splits, &field, config.analysis.beta_source)?;
    for f in &landauer.failures {
        log::warn!(
            "Landauer entry t = {}, N_S = {} failed: {}",
            f.time,
            f.n_system,
            f.reason
        );
    }
    let theory = if source == "reconstruction" {
        let gt = GroundTruth::simulate(&field, &times)?;
        Some(subregion_scan(
            &gt.real,
            &times,
            &splits,
            &field,
            config.analysis.beta_source,
        )?)
    } else {
        None
    };
    let unitarity = unitarity_report(&series, &times, &field)
        .map_err(|e| log::warn!("unitarity report skipped: {e}"))
        .ok();
    let extremality = extremality_report(&series, &times, &splits, &field)
        .map_err(|e| log::warn!("extremality report skipped: {e}"))
        .ok();
    let mut lambda = f64::INFINITY;
    for g in series.iter().chain(&modes) {
        lambda = lambda.min(min_lambda(g)?);
    }
    let n_projected = match input {
        AnalysisInput::Reconstruction(r, _) => r.points.iter().filter(|p| p.projected).count(),
        AnalysisInput::GroundTruth(_) => 0,
    };
    let bootstrap = match dataset {
        Some(d) if config.analysis.bootstrap.n_resamples > 0 => {
            log::info!("bootstrap with {} resamples", config.analysis.bootstrap.n_resamples);
            bootstrap_records(d, &times, &landauer, config, &field)?
        }
        _ => Vec::new(),
    };
    let bits = config.analysis.bits;
    let convert = |r: LandauerReport| if bits { r.to_bits() } else { r };
    Ok(ResultsBundle {
        metadata: Metadata::new(RESULTS_KIND, config, &field),
        config: config.clone(),
        source: source.to_string(),
        noiseless,
        diagnostics: Diagnostics {
            max_decomposition_gap: landauer.max_decomposition_gap(),
            unitarity,
            extremality,
            temperature_fit: temperature,
            physicality: Physicality {
                min_lambda: lambda,
                n_windows: series.len(),
                n_projected,
            },
        },
        times,
        series,
        landauer: convert(landauer),
        theory: theory.map(convert),
        bootstrap: if bits {
            bootstrap.into_iter().map(record_to_bits).collect()
        } else {
            bootstrap
        },
    })
}

/// Noiseless Neumann and Dirichlet runs at the sweep resolution.
pub fn compare_bc(config: &RunConfig) -> Result<CompareBcDoc> {
    let c = &config.compare_bc;
    let params = FieldParameters {
        n_pixels: c.n_pixels,
        ..config.field.clone()
    };
    let field = KgField::new(params.clone())?;
    let runs = boundary_comparison(&params, c.n_pixels, &c.ct_over_l, &c.system_fractions)?;
    Ok(CompareBcDoc {
        metadata: Metadata::new(COMPARE_BC_KIND, config, &field),
        config: config.clone(),
        ct_over_l: c.ct_over_l.clone(),
        runs,
    })
}

fn document_kind(path: &Path) -> Result<String> {
    #[derive(serde::Deserialize)]
    struct Head {
        metadata: Head2,
    }
    #[derive(serde::Deserialize)]
    struct Head2 {
        kind: String,
    }
    let h: Head = read_json(path)?;
    Ok(h.metadata.kind)
}

/// Reference to `dataset` as stored in a document written to `out_dir`.
fn relative_ref(dataset: &Path, out_dir: &Path) -> String {
    let canon = |p: &Path| std::fs::canonicalize(p).ok();
    match (canon(dataset), canon(out_dir)) {
        (Some(d), Some(o)) if d.parent() == Some(o.as_path()) => d
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        (Some(d), _) => d.display().to_string(),
        _ => dataset.display().to_string(),
    }
}

fn resolve_ref(reference: &str, document: &Path) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        document.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

/// Take analysis-side settings from an explicit configuration, physics from the input document.
fn merge(embedded: &RunConfig, explicit: Option<&RunConfig>) -> RunConfig {
    match explicit {
        None => embedded.clone(),
        Some(c) => RunConfig {
            field: embedded.field.clone(),
            protocol: embedded.protocol.clone(),
            ..c.clone()
        },
    }
}

pub fn cmd_simulate(config: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    let config = opts.resolve(config.clone())?;
    let dataset = simulate(&config, opts.noiseless)?;
    let path = config.output.dir.join(DATASET_FILE);
    dataset.write(&path, config.output.format)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn cmd_tomo(dataset_path: &Path, explicit: Option<&RunConfig>, opts: &RunOptions) -> Result<PathBuf> {
    let dataset = Dataset::read(dataset_path)?;
    let mut config = merge(&dataset.config, explicit);
    if explicit.is_none() && opts.output.is_none() {
        config.output.dir = dataset_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    }
    let config = opts.resolve(config)?;
    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let r = reconstruct(&dataset, &relative_ref(dataset_path, out_dir), &config, opts.noiseless)?;
    let n_proj = r.points.iter().filter(|p| p.projected).count();
    log::info!(
        "{} windows reconstructed, {} projected, {} failed",
        r.points.len(),
        n_proj,
        r.failures.len()
    );
    let path = out_dir.join(RECONSTRUCTION_FILE);
    r.write(&path, config.output.format)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn cmd_landauer(input: &Path, explicit: Option<&RunConfig>, opts: &RunOptions) -> Result<PathBuf> {
    let kind = document_kind(input)?;
    let (bundle, format, dir) = if kind == DATASET_KIND {
        let d = Dataset::read(input)?;
        let config = opts.resolve(merge(&d.config, explicit))?;
        (
            analyze(AnalysisInput::GroundTruth(&d), &config)?,
            config.output.format,
            config.output.dir,
        )
    } else if kind == RECONSTRUCTION_KIND {
        let r = Reconstruction::read(input)?;
        let config = opts.resolve(merge(&r.config, explicit))?;
        let wants_bootstrap = !(r.noiseless || opts.noiseless) && config.analysis.bootstrap.n_resamples > 0;
        let d = if wants_bootstrap {
            Some(Dataset::read(&resolve_ref(&r.dataset, input))?)
        } else {
            None
        };
        (
            analyze(AnalysisInput::Reconstruction(&r, d.as_ref()), &config)?,
            config.output.format,
            config.output.dir,
        )
    } else {
        return Err(Error::Format {
            path: input.display().to_string(),
            reason: format!("cannot analyse a {kind} document"),
        });
    };
    log::info!("max decomposition gap {:.3e}", bundle.diagnostics.max_decomposition_gap);
    let path = dir.join(RESULTS_FILE);
    bundle.write(&path, format)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

pub fn cmd_compare_bc(config: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    let config = opts.resolve(config.clone())?;
    let doc = compare_bc(&config)?;
    let path = config.output.dir.join(COMPARE_BC_FILE);
    doc.write(&path)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// simulate → tomo → landauer → compare-bc, all in the output directory.
pub fn cmd_all(config: &RunConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let config = opts.resolve(config.clone())?;
    let fixed = RunOptions {
        seed: None,
        output: None,
        format: None,
        noiseless: opts.noiseless,
    };
    let dataset = cmd_simulate(&config, &fixed)?;
    let recon = cmd_tomo(&dataset, Some(&config), &fixed)?;
    let results = cmd_landauer(&recon, Some(&config), &fixed)?;
    let bc = cmd_compare_bc(&config, &fixed)?;
    Ok(vec![dataset, recon, results, bc])
}
