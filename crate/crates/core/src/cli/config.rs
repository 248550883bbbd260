use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::FieldParameters;
use crate::gaussian::Partition;
use crate::io::OutputFormat;
use crate::landauer::{BetaSource, BootstrapSettings};
use crate::quench::QuenchProtocol;
use crate::tomography::TomographySettings;

/// Partition and bootstrap settings of the Landauer analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// System sizes N_S in pixels; the system is the left edge.
    pub splits: Vec<usize>,
    pub beta_source: BetaSource,
    /// `n_resamples = 0` disables the bootstrap.
    pub bootstrap: BootstrapSettings,
    /// Report entropic quantities in bits instead of nats.
    pub bits: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            splits: (1..=6).collect(),
            beta_source: BetaSource::Theory,
            bootstrap: BootstrapSettings::default(),
            bits: false,
        }
    }
}

/// Noiseless boundary-condition sweep at a finer discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareBcSettings {
    pub n_pixels: usize,
    /// Times in units of L/c.
    pub ct_over_l: Vec<f64>,
    /// L_S/L, rounded to whole pixels.
    pub system_fractions: Vec<f64>,
}

impl Default for CompareBcSettings {
    fn default() -> Self {
        let mut ct: Vec<f64> = (0..=24).map(|i| i as f64 / 20.0).collect();
        ct.extend([0.19, 0.38, 0.57]);
        ct.sort_by(f64::total_cmp);
        Self {
            n_pixels: 128,
            ct_over_l: ct,
            system_fractions: vec![1.0 / 7.0, 0.25, 3.0 / 7.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Json,
        }
    }
}

/// Complete run configuration; every key is optional and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub field: FieldParameters,
    pub protocol: QuenchProtocol,
    pub tomography: TomographySettings,
    pub analysis: AnalysisSettings,
    pub compare_bc: CompareBcSettings,
    pub output: OutputSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.field.check_regime()?;
        self.protocol.validate()?;
        self.tomography.validate(self.field.n_pixels)?;
        self.analysis.bootstrap.validate()?;
        if self.analysis.splits.is_empty() {
            return Err(Error::Validation("analysis.splits is empty".into()));
        }
        self.partitions()?;
        let c = &self.compare_bc;
        if c.n_pixels < 2 {
            return Err(Error::Validation("compare_bc.n_pixels must be at least 2".into()));
        }
        if c.ct_over_l.is_empty() || c.ct_over_l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Validation(
                "compare_bc.ct_over_l must be non-empty and non-negative".into(),
            ));
        }
        if c.system_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Validation(
                "compare_bc.system_fractions must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn partitions(&self) -> Result<Vec<Partition>> {
        self.analysis
            .splits
            .iter()
            .map(|&n| Partition::new(n, self.field.n_pixels))
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(json))
    }
}
