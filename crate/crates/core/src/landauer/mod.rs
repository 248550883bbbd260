//! Terms of the Landauer equality ΔΣ = β_EΔE_E + ΔS = ΔI + ΔD for a
//! system at the left edge and its complement as environment.

mod bootstrap;
mod checks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{effective_beta, momentum_to_real, relative_entropy_to_gibbs, KgField, RegionModel};
use crate::gaussian::{clamp_small_negative, mean_energy, restrict, von_neumann_entropy, CovarianceMatrix, Partition};
use crate::quench::prepare_prequench;
use crate::units;

pub use bootstrap::{bootstrap, percentile, BootstrapResult, BootstrapSettings};
pub use checks::{
    boundary_comparison, extremality_report, unitarity_report, BcComparison, BcRun, ExtremalityReport, ExtremalityRow,
    UnitarityReport, UnitarityRow, EXTREMALITY_NOTES,
};

/// Where the environment's effective inverse temperature comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    /// Environment energy of the theoretical pre-quench state at the configured temperature.
    #[default]
    Theory,
    /// Environment energy of the first state of the analysed series.
    Reconstructed,
    Fixed(f64),
}

/// Environment model of one partition with its β_E.
#[derive(Debug, Clone)]
pub struct PartitionModel {
    pub split: Partition,
    pub env: RegionModel,
    pub beta_e: f64,
}

impl PartitionModel {
    pub fn new(field: &KgField, split: Partition, beta_e: f64) -> Result<Self> {
        if !(beta_e > 0.0) {
            return Err(Error::Validation(format!("β_E must be positive, got {beta_e}")));
        }
        Ok(Self {
            env: field.environment(&split)?,
            split,
            beta_e,
        })
    }

    /// β_E matched to the environment energy of `gamma_real`.
    pub fn matched(field: &KgField, split: Partition, gamma_real: &CovarianceMatrix) -> Result<Self> {
        let env = field.environment(&split)?;
        let e = mean_energy(&restrict(gamma_real, env.pixels())?, env.hamiltonian())?;
        let beta_e = effective_beta(e, env.spectrum())?;
        Ok(Self { split, env, beta_e })
    }
}

/// Absolute quantities of one state at one partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub s_system: f64,
    pub s_env: f64,
    pub s_total: f64,
    pub e_env: f64,
    pub mutual_information: f64,
    pub relative_entropy: f64,
}

pub fn snapshot(gamma: &CovarianceMatrix, model: &PartitionModel) -> Result<Snapshot> {
    let gs = restrict(gamma, model.split.system())?;
    let ge = restrict(gamma, model.env.pixels())?;
    let s_system = von_neumann_entropy(&gs)?;
    let s_env = von_neumann_entropy(&ge)?;
    let s_total = von_neumann_entropy(gamma)?;
    let e_env = mean_energy(&ge, model.env.hamiltonian())?;
    let relative_entropy = relative_entropy_to_gibbs(&ge, model.env.hamiltonian(), model.env.spectrum(), model.beta_e)?;
    Ok(Snapshot {
        s_system,
        s_env,
        s_total,
        e_env,
        mutual_information: clamp_small_negative(s_system + s_env - s_total),
        relative_entropy,
    })
}

/// One (t, partition) record; entropic quantities in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauerEntry {
    pub time: f64,
    pub n_system: usize,
    pub n_total: usize,
    pub beta_e: f64,
    pub ds: f64,
    pub beta_de: f64,
    pub di: f64,
    pub dd: f64,
    pub dsigma_left: f64,
    pub dsigma_right: f64,
    pub initial: Snapshot,
    pub current: Snapshot,
}

impl LandauerEntry {
    pub fn decomposition_gap(&self) -> f64 {
        (self.dsigma_left - self.dsigma_right).abs()
    }

    /// Entropic quantities in bits; energies unchanged.
    pub fn to_bits(&self) -> Self {
        let b = units::nats_to_bits;
        let snap = |s: &Snapshot| Snapshot {
            s_system: b(s.s_system),
            s_env: b(s.s_env),
            s_total: b(s.s_total),
            e_env: s.e_env,
            mutual_information: b(s.mutual_information),
            relative_entropy: b(s.relative_entropy),
        };
        Self {
            ds: b(self.ds),
            beta_de: b(self.beta_de),
            di: b(self.di),
            dd: b(self.dd),
            dsigma_left: b(self.dsigma_left),
            dsigma_right: b(self.dsigma_right),
            initial: snap(&self.initial),
            current: snap(&self.current),
            ..*self
        }
    }

    /// Named scalar values, in a fixed order.
    pub fn scalars(&self) -> [(&'static str, f64); 7] {
        [
            ("dS", self.ds),
            ("beta_dE", self.beta_de),
            ("dI", self.di),
            ("dD", self.dd),
            ("dSigma_left", self.dsigma_left),
            ("dSigma_right", self.dsigma_right),
            ("beta_E", self.beta_e),
        ]
    }
}

fn entry(time: f64, model: &PartitionModel, s0: &Snapshot, st: &Snapshot) -> LandauerEntry {
    let ds = st.s_system - s0.s_system;
    let beta_de = model.beta_e * (st.e_env - s0.e_env);
    let di = st.mutual_information - s0.mutual_information;
    let dd = st.relative_entropy - s0.relative_entropy;
    LandauerEntry {
        time,
        n_system: model.split.n_system,
        n_total: model.split.n_total,
        beta_e: model.beta_e,
        ds,
        beta_de,
        di,
        dd,
        dsigma_left: beta_de + ds,
        dsigma_right: di + dd,
        initial: *s0,
        current: *st,
    }
}

/// Landauer terms between `gamma0` and `gamma_t` (pixel space).
pub fn landauer_quantities(
    gamma0: &CovarianceMatrix,
    gamma_t: &CovarianceMatrix,
    time: f64,
    model: &PartitionModel,
) -> Result<LandauerEntry> {
    if gamma0.layout() != gamma_t.layout() {
        return Err(Error::LayoutMismatch {
            expected: gamma0.n_modes(),
            found: gamma_t.n_modes(),
        });
    }
    let s0 = snapshot(gamma0, model)?;
    let st = snapshot(gamma_t, model)?;
    Ok(entry(time, model, &s0, &st))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryFailure {
    pub time: f64,
    pub n_system: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LandauerReport {
    pub entries: Vec<LandauerEntry>,
    pub failures: Vec<EntryFailure>,
}

impl LandauerReport {
    pub fn get(&self, time: f64, n_system: usize) -> Option<&LandauerEntry> {
        self.entries
            .iter()
            .find(|e| e.n_system == n_system && (e.time - time).abs() <= 1e-9 * time.abs().max(1.0))
    }

    pub fn for_split(&self, n_system: usize) -> Vec<&LandauerEntry> {
        self.entries.iter().filter(|e| e.n_system == n_system).collect()
    }

    pub fn max_decomposition_gap(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.decomposition_gap() / e.dsigma_left.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn to_bits(&self) -> Self {
        Self {
            entries: self.entries.iter().map(LandauerEntry::to_bits).collect(),
            failures: self.failures.clone(),
        }
    }
}

/// β_E for each split, following `source`; `reference` is the series' first state.
pub fn partition_models(
    field: &KgField,
    splits: &[Partition],
    source: BetaSource,
    reference: &CovarianceMatrix,
) -> Result<Vec<std::result::Result<PartitionModel, String>>> {
    let theory = match source {
        BetaSource::Theory => Some(momentum_to_real(&prepare_prequench(field)?, field.basis())?),
        _ => None,
    };
    Ok(splits
        .par_iter()
        .map(|&split| {
            match source {
                BetaSource::Theory => PartitionModel::matched(field, split, theory.as_ref().unwrap_or(reference)),
                BetaSource::Reconstructed => PartitionModel::matched(field, split, reference),
                BetaSource::Fixed(b) => PartitionModel::new(field, split, b),
            }
            .map_err(|e| e.to_string())
        })
        .collect())
}

/// Landauer terms for every (time, split); `series[0]` is the reference state.
pub fn subregion_scan(
    series: &[CovarianceMatrix],
    times: &[f64],
    splits: &[Partition],
    field: &KgField,
    source: BetaSource,
) -> Result<LandauerReport> {
    if series.is_empty() || series.len() != times.len() {
        return Err(Error::Validation(format!(
            "{} states for {} times",
            series.len(),
            times.len()
        )));
    }
    if splits.is_empty() {
        return Err(Error::Validation("no partitions requested".into()));
    }
    let models = partition_models(field, splits, source, &series[0])?;
    let per_split: Vec<(Vec<LandauerEntry>, Vec<EntryFailure>)> = models
        .into_par_iter()
        .zip(splits.par_iter())
        .map(|(model, split)| {
            let fail = |t: f64, reason: String| EntryFailure {
                time: t,
                n_system: split.n_system,
                reason,
            };
            let model = match model {
                Ok(m) => m,
                Err(reason) => return (Vec::new(), times.iter().map(|&t| fail(t, reason.clone())).collect()),
            };
            let s0 = match snapshot(&series[0], &model) {
                Ok(s) => s,
                Err(e) => return (Vec::new(), times.iter().map(|&t| fail(t, e.to_string())).collect()),
            };
            let mut ok = Vec::new();
            let mut bad = Vec::new();
            for (g, &t) in series.iter().zip(times) {
                match snapshot(g, &model) {
                    Ok(st) => ok.push(entry(t, &model, &s0, &st)),
                    Err(e) => bad.push(fail(t, e.to_string())),
                }
            }
            (ok, bad)
        })
        .collect();
    let mut report = LandauerReport::default();
    for (ok, bad) in per_split {
        report.entries.extend(ok);
        report.failures.extend(bad);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BoundaryCondition, FieldParameters};
    use crate::quench::{uniform_grid, GroundTruth};

    fn run(bc: BoundaryCondition, times: &[f64]) -> (KgField, GroundTruth) {
        let f = KgField::new(FieldParameters {
            bc,
            ..Default::default()
        })
        .unwrap();
        let gt = GroundTruth::simulate(&f, times).unwrap();
        (f, gt)
    }

    #[test]
    fn no_evolution_no_change() {
        let (f, gt) = run(BoundaryCondition::Neumann, &[0.0]);
        let m = PartitionModel::matched(&f, Partition::new(3, 7).unwrap(), &gt.real[0]).unwrap();
        let e = landauer_quantities(&gt.real[0], &gt.real[0], 0.0, &m).unwrap();
        for (_, v) in &e.scalars()[..6] {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn decomposition_identity_noiseless() {
        let times = uniform_grid(65.0, 14);
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            let (f, gt) = run(bc, &times);
            let r = subregion_scan(&gt.real, &times, &Partition::all(7), &f, BetaSource::Theory).unwrap();
            assert!(r.failures.is_empty(), "{:?}", r.failures);
            assert_eq!(r.entries.len(), 14 * 6);
            assert!(r.max_decomposition_gap() <= 1e-9);
            for e in &r.entries {
                assert!(e.current.mutual_information >= 0.0);
            }
        }
    }

    #[test]
    fn mutual_information_symmetric_under_swap() {
        let times = uniform_grid(65.0, 5);
        let (f, gt) = run(BoundaryCondition::Neumann, &times);
        let r = subregion_scan(&gt.real, &times, &Partition::all(7), &f, BetaSource::Theory).unwrap();
        // N_S = k and N_S = 7 − k are mirror images; for a reflection-symmetric
        // state the absolute mutual information coincides
        for &t in &times {
            for k in 1..7 {
                let a = r.get(t, k).unwrap();
                let b = r.get(t, 7 - k).unwrap();
                assert!((a.current.mutual_information - b.current.mutual_information).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn dirichlet_recurrence_of_deltas() {
        let f = KgField::new(FieldParameters {
            bc: BoundaryCondition::Dirichlet,
            ..Default::default()
        })
        .unwrap();
        let tc = f.scales().crossing_time();
        let gt = GroundTruth::simulate(&f, &[0.0, 0.3 * tc, tc]).unwrap();
        let r = subregion_scan(&gt.real, &gt.times, &Partition::all(7), &f, BetaSource::Theory).unwrap();
        for e in r.entries.iter().filter(|e| (e.time - tc).abs() < 1e-12) {
            for (_, v) in &e.scalars()[..6] {
                assert!(v.abs() <= 1e-8, "{e:?}");
            }
        }
        assert!(r
            .entries
            .iter()
            .any(|e| e.time > 0.0 && e.time < tc && e.di.abs() > 1e-3));
    }

    #[test]
    fn fixed_beta_and_bits() {
        let (f, gt) = run(BoundaryCondition::Neumann, &[0.0, 10.0]);
        let r = subregion_scan(
            &gt.real,
            &gt.times,
            &[Partition::new(2, 7).unwrap()],
            &f,
            BetaSource::Fixed(0.2),
        )
        .unwrap();
        let e = r.entries[1];
        assert_eq!(e.beta_e, 0.2);
        let b = e.to_bits();
        assert!((b.di * std::f64::consts::LN_2 - e.di).abs() < 1e-14);
        assert_eq!(b.current.e_env, e.current.e_env);
        assert!(subregion_scan(&gt.real, &gt.times, &[], &f, BetaSource::Theory).is_err());
    }
}
