//! On-disk documents exchanged between commands.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{BoundaryCondition, KgField};
use crate::gaussian::CovarianceMatrix;
use crate::io::{read_json, write_json, ArrayReader, ArrayRef, ArrayWriter, OutputFormat};
use crate::landauer::{BcComparison, ExtremalityReport, LandauerReport, UnitarityReport};
use crate::tomography::{FitResult, TemperatureFit, WindowFailure};

pub const DATASET_KIND: &str = "landauer-lab/dataset";
pub const RECONSTRUCTION_KIND: &str = "landauer-lab/reconstruction";
pub const RESULTS_KIND: &str = "landauer-lab/results";
pub const COMPARE_BC_KIND: &str = "landauer-lab/compare-bc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub bc: BoundaryCondition,
    pub n_pixels: usize,
    /// μm.
    pub length: f64,
    /// μm/ms.
    pub sound_speed: f64,
    /// L/c, ms.
    pub crossing_time: f64,
    pub units: String,
}

impl Metadata {
    pub fn new(kind: &str, config: &RunConfig, field: &KgField) -> Self {
        let s = field.scales();
        Self {
            kind: kind.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.protocol.seed,
            bc: field.params().bc,
            n_pixels: field.n_pixels(),
            length: s.length,
            sound_speed: s.sound_speed,
            crossing_time: s.crossing_time(),
            units: if config.analysis.bits { "bits" } else { "nats" }.to_string(),
        }
    }

    fn expect(&self, kind: &str, path: &Path) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("expected a {kind} document, found {}", self.kind),
            });
        }
        Ok(())
    }
}

fn put_all(w: &mut ArrayWriter, ms: &[CovarianceMatrix]) -> Vec<ArrayRef> {
    ms.iter().map(|g| w.put(g.matrix())).collect()
}

fn get_all(r: &mut ArrayReader, refs: &[ArrayRef]) -> Result<Vec<CovarianceMatrix>> {
    refs.iter().map(|a| CovarianceMatrix::new(r.get(a)?)).collect()
}

fn companion(path: &Path) -> String {
    path.with_extension("bin")
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "arrays.bin".into())
}

/// Forward-simulation output: ground truth plus either shots or exact phase covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub metadata: Metadata,
    pub config: RunConfig,
    pub times: Vec<f64>,
    pub noiseless: bool,
    pub truth_modes: Vec<CovarianceMatrix>,
    pub truth_real: Vec<CovarianceMatrix>,
    /// Shots × pixels per hold time; empty when noiseless.
    pub shots: Vec<DMatrix<f64>>,
    /// Blurred phase covariance per hold time, the infinite-shot limit of `shots`.
    pub phase_covariance: Vec<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    metadata: Metadata,
    config: RunConfig,
    times: Vec<f64>,
    noiseless: bool,
    truth_modes: Vec<ArrayRef>,
    truth_real: Vec<ArrayRef>,
    shots: Vec<ArrayRef>,
    phase_covariance: Vec<ArrayRef>,
}

impl Dataset {
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let mut w = ArrayWriter::new(format, companion(path));
        let doc = DatasetDoc {
            metadata: self.metadata.clone(),
            config: self.config.clone(),
            times: self.times.clone(),
            noiseless: self.noiseless,
            truth_modes: put_all(&mut w, &self.truth_modes),
            truth_real: put_all(&mut w, &self.truth_real),
            shots: self.shots.iter().map(|s| w.put(s)).collect(),
            phase_covariance: self.phase_covariance.iter().map(|s| w.put(s)).collect(),
        };
        write_json(path, &doc)?;
        w.finish(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: DatasetDoc = read_json(path)?;
        doc.metadata.expect(DATASET_KIND, path)?;
        let mut r = ArrayReader::new(path);
        let dataset = Self {
            truth_modes: get_all(&mut r, &doc.truth_modes)?,
            truth_real: get_all(&mut r, &doc.truth_real)?,
            shots: doc.shots.iter().map(|a| r.get(a)).collect::<Result<_>>()?,
            phase_covariance: doc.phase_covariance.iter().map(|a| r.get(a)).collect::<Result<_>>()?,
            metadata: doc.metadata,
            config: doc.config,
            times: doc.times,
            noiseless: doc.noiseless,
        };
        if dataset.truth_real.len() != dataset.times.len()
            || dataset.phase_covariance.len() != dataset.times.len()
            || !(dataset.noiseless || dataset.shots.len() == dataset.times.len())
        {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: "array counts do not match the time grid".into(),
            });
        }
        Ok(dataset)
    }
}

/// One reconstructed time point as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedPoint {
    pub time: f64,
    pub fit: FitResultSummary,
    pub gamma_modes: CovarianceMatrix,
    pub gamma_real: CovarianceMatrix,
    pub projected: bool,
    pub min_lambda_before: f64,
    pub min_lambda_after: f64,
}

/// Fit diagnostics kept alongside each reconstructed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultSummary {
    pub hold_offsets: Vec<f64>,
    pub mode_columns: Vec<usize>,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub rank: usize,
    pub n_equations: usize,
    pub n_unknowns: usize,
    pub warnings: Vec<String>,
}

impl From<&FitResult> for FitResultSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            hold_offsets: f.hold_offsets.clone(),
            mode_columns: f.mode_columns.clone(),
            residual_norm: f.residual_norm,
            condition_number: f.condition_number,
            rank: f.rank,
            n_equations: f.n_equations,
            n_unknowns: f.n_unknowns,
            warnings: f.warnings.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    time: f64,
    fit: FitResultSummary,
    gamma_modes: ArrayRef,
    gamma_real: ArrayRef,
    projected: bool,
    min_lambda_before: f64,
    min_lambda_after: f64,
}

fn put_points(w: &mut ArrayWriter, points: &[ReconstructedPoint]) -> Vec<PointDoc> {
    points
        .iter()
        .map(|p| PointDoc {
            time: p.time,
            fit: p.fit.clone(),
            gamma_modes: w.put(p.gamma_modes.matrix()),
            gamma_real: w.put(p.gamma_real.matrix()),
            projected: p.projected,
            min_lambda_before: p.min_lambda_before,
            min_lambda_after: p.min_lambda_after,
        })
        .collect()
}

fn get_points(r: &mut ArrayReader, docs: Vec<PointDoc>) -> Result<Vec<ReconstructedPoint>> {
    docs.into_iter()
        .map(|d| {
            Ok(ReconstructedPoint {
                time: d.time,
                fit: d.fit,
                gamma_modes: CovarianceMatrix::new(r.get(&d.gamma_modes)?)?,
                gamma_real: CovarianceMatrix::new(r.get(&d.gamma_real)?)?,
                projected: d.projected,
                min_lambda_before: d.min_lambda_before,
                min_lambda_after: d.min_lambda_after,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub metadata: Metadata,
    pub config: RunConfig,
    /// Dataset this was computed from, as given on the command line.
    pub dataset: String,
    pub noiseless: bool,
    pub points: Vec<ReconstructedPoint>,
    pub failures: Vec<WindowFailure>,
    pub temperature_fit: Option<TemperatureFit>,
}

#[derive(Serialize, Deserialize)]
struct ReconstructionDoc {
    metadata: Metadata,
    config: RunConfig,
    dataset: String,
    noiseless: bool,
    points: Vec<PointDoc>,
    failures: Vec<WindowFailure>,
    temperature_fit: Option<TemperatureFit>,
}

impl Reconstruction {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn real_series(&self) -> Vec<CovarianceMatrix> {
        self.points.iter().map(|p| p.gamma_real.clone()).collect()
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let mut w = ArrayWriter::new(format, companion(path));
        let doc = ReconstructionDoc {
            metadata: self.metadata.clone(),
            config: self.config.clone(),
            dataset: self.dataset.clone(),
            noiseless: self.noiseless,
            points: put_points(&mut w, &self.points),
            failures: self.failures.clone(),
            temperature_fit: self.temperature_fit,
        };
        write_json(path, &doc)?;
        w.finish(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: ReconstructionDoc = read_json(path)?;
        doc.metadata.expect(RECONSTRUCTION_KIND, path)?;
        let mut r = ArrayReader::new(path);
        Ok(Self {
            points: get_points(&mut r, doc.points)?,
            metadata: doc.metadata,
            config: doc.config,
            dataset: doc.dataset,
            noiseless: doc.noiseless,
            failures: doc.failures,
            temperature_fit: doc.temperature_fit,
        })
    }
}

/// Interval estimate of one reported scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub time: f64,
    /// Absent for global quantities such as the fitted temperature.
    pub n_system: Option<usize>,
    pub quantity: String,
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub n_resamples: usize,
    pub n_failed: usize,
    pub seed: u64,
}

impl BootstrapRecord {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    /// Smallest symplectic eigenvalue over every emitted covariance matrix.
    pub min_lambda: f64,
    pub n_windows: usize,
    pub n_projected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_decomposition_gap: f64,
    pub unitarity: Option<UnitarityReport>,
    pub extremality: Option<ExtremalityReport>,
    pub temperature_fit: Option<TemperatureFit>,
    pub physicality: Physicality,
}

/// Analysis output; self-describing through the embedded configuration.
#[derive(Debug, Clone)]
pub struct ResultsBundle {
    pub metadata: Metadata,
    pub config: RunConfig,
    /// "reconstruction" or "ground_truth".
    pub source: String,
    pub noiseless: bool,
    pub times: Vec<f64>,
    pub series: Vec<CovarianceMatrix>,
    pub landauer: LandauerReport,
    /// Ground-truth terms at the same times, when the dataset is available.
    pub theory: Option<LandauerReport>,
    pub bootstrap: Vec<BootstrapRecord>,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize, Deserialize)]
struct ResultsDoc {
    metadata: Metadata,
    config: RunConfig,
    source: String,
    noiseless: bool,
    times: Vec<f64>,
    series: Vec<ArrayRef>,
    landauer: LandauerReport,
    theory: Option<LandauerReport>,
    bootstrap: Vec<BootstrapRecord>,
    diagnostics: Diagnostics,
}

impl ResultsBundle {
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let mut w = ArrayWriter::new(format, companion(path));
        let doc = ResultsDoc {
            metadata: self.metadata.clone(),
            config: self.config.clone(),
            source: self.source.clone(),
            noiseless: self.noiseless,
            times: self.times.clone(),
            series: put_all(&mut w, &self.series),
            landauer: self.landauer.clone(),
            theory: self.theory.clone(),
            bootstrap: self.bootstrap.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        write_json(path, &doc)?;
        w.finish(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: ResultsDoc = read_json(path)?;
        doc.metadata.expect(RESULTS_KIND, path)?;
        let mut r = ArrayReader::new(path);
        Ok(Self {
            series: get_all(&mut r, &doc.series)?,
            metadata: doc.metadata,
            config: doc.config,
            source: doc.source,
            noiseless: doc.noiseless,
            times: doc.times,
            landauer: doc.landauer,
            theory: doc.theory,
            bootstrap: doc.bootstrap,
            diagnostics: doc.diagnostics,
        })
    }

    pub fn interval(&self, time: f64, n_system: Option<usize>, quantity: &str) -> Option<&BootstrapRecord> {
        self.bootstrap.iter().find(|b| {
            b.n_system == n_system && b.quantity == quantity && (b.time - time).abs() <= 1e-9 * time.abs().max(1.0)
        })
    }
}

/// Paired boundary-condition runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareBcDoc {
    pub metadata: Metadata,
    pub config: RunConfig,
    pub ct_over_l: Vec<f64>,
    #[serde(flatten)]
    pub runs: BcComparison,
}

impl CompareBcDoc {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: Self = read_json(path)?;
        doc.metadata.expect(COMPARE_BC_KIND, path)?;
        Ok(doc)
    }
}
