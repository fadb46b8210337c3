//! TOML scenario configuration. Every key is optional and falls back to the
//! built-in default scenario; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoy::ProtocolParams;
use crate::engine::{Mode, Scenario};
use crate::error::{Error, Result};
use crate::fiber::{
    derive_intercore_spectrum, loss_budget, worst_case_raman_coefficient, ChannelPlan, ClassicalChannel, CoreId,
    Direction, FiberSpec, QuantumChannel, DEFAULT_RAMAN_COEFFICIENT, DEFAULT_RAYLEIGH_OFFSET_DB,
};
use crate::io::spectrum::ingest_spectrum_csv;
use crate::noise::{DetectorSpec, FilterSpec};
use crate::units::{OpticalPower, Wavelength};

/// A scalar applied to every core, or one value per core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerCore {
    Uniform(f64),
    PerCore(Vec<f64>),
}

impl PerCore {
    fn from_values(values: &[f64]) -> Self {
        match values.first() {
            Some(&v) if values.iter().all(|&x| x == v) => PerCore::Uniform(v),
            _ => PerCore::PerCore(values.to_vec()),
        }
    }

    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            PerCore::Uniform(v) => Ok(vec![*v; n]),
            PerCore::PerCore(v) if v.len() == n => Ok(v.clone()),
            PerCore::PerCore(v) => Err(Error::invariant(key, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

/// A scalar for every off-diagonal entry, or a full `[source][dest]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeakageMatrix {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

impl LeakageMatrix {
    fn from_matrix(m: &[Vec<f64>]) -> Self {
        let off: Vec<f64> = m
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, &v)| v))
            .collect();
        let diag_zero = m.iter().enumerate().all(|(i, row)| row.get(i) == Some(&0.0));
        match off.first() {
            Some(&v) if diag_zero && off.iter().all(|&x| x == v) => LeakageMatrix::Uniform(v),
            _ => LeakageMatrix::Matrix(m.to_vec()),
        }
    }

    fn expand(&self, n: usize, key: &str) -> Result<Vec<Vec<f64>>> {
        match self {
            LeakageMatrix::Uniform(v) => Ok((0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.0 } else { *v }).collect())
                .collect()),
            LeakageMatrix::Matrix(m) if m.len() == n && m.iter().all(|r| r.len() == n) => Ok(m.clone()),
            LeakageMatrix::Matrix(_) => Err(Error::invariant(key, format!("expected a {n}x{n} matrix"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberSection {
    pub length_km: f64,
    pub core_count: usize,
    pub attenuation_db_per_km: PerCore,
    pub excess_loss_db: PerCore,
    pub fanout_tx_loss_db: PerCore,
    pub fanout_rx_loss_db: PerCore,
    pub leakage_forward_db: LeakageMatrix,
    pub leakage_backward_db: LeakageMatrix,
    /// Omitted: 0 dB in `mcf` mode, matched to the default plant's loss in
    /// `dual_ssmf_control` mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attenuator_db: Option<f64>,
}

impl FiberSection {
    fn from_spec(f: &FiberSpec, attenuator_db: Option<f64>) -> Self {
        Self {
            length_km: f.length_km,
            core_count: f.core_count,
            attenuation_db_per_km: PerCore::from_values(&f.attenuation_db_per_km),
            excess_loss_db: PerCore::from_values(&f.excess_loss_db),
            fanout_tx_loss_db: PerCore::from_values(&f.fanout_tx_loss_db),
            fanout_rx_loss_db: PerCore::from_values(&f.fanout_rx_loss_db),
            leakage_forward_db: LeakageMatrix::from_matrix(&f.leakage_forward_db),
            leakage_backward_db: LeakageMatrix::from_matrix(&f.leakage_backward_db),
            attenuator_db,
        }
    }
}

impl Default for FiberSection {
    fn default() -> Self {
        Self::from_spec(&FiberSpec::default(), None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub core: usize,
    pub wavelength_nm: f64,
    pub direction: Direction,
    pub launch_mw: f64,
}

impl From<&ClassicalChannel> for ChannelEntry {
    fn from(c: &ClassicalChannel) -> Self {
        Self {
            core: c.core.0,
            wavelength_nm: c.wavelength.nanometers(),
            direction: c.direction,
            launch_mw: c.launch.milliwatts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanSection {
    pub quantum_core: usize,
    pub quantum_wavelength_nm: f64,
    pub classical: Vec<ChannelEntry>,
    pub auxiliary: Vec<ChannelEntry>,
}

impl PlanSection {
    fn from_plan(p: &ChannelPlan) -> Self {
        Self {
            quantum_core: p.quantum.core.0,
            quantum_wavelength_nm: p.quantum.wavelength.nanometers(),
            classical: p.classical.iter().map(ChannelEntry::from).collect(),
            auxiliary: p.auxiliary.iter().map(ChannelEntry::from).collect(),
        }
    }
}

impl Default for PlanSection {
    fn default() -> Self {
        Self::from_plan(&ChannelPlan::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSection {
    /// Omitted: centred on the quantum wavelength.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_nm: Option<f64>,
    pub passband_nm: f64,
    pub insertion_loss_db: f64,
    pub isolation_db: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterSpec::default();
        Self {
            center_nm: None,
            passband_nm: f.passband_nm,
            insertion_loss_db: f.insertion_loss_db,
            isolation_db: f.isolation_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_count_prob: f64,
    pub gate_width_s: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorSpec::default();
        Self {
            efficiency: d.efficiency,
            dark_count_prob: d.dark_count_prob,
            gate_width_s: d.gate_width_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolSection {
    pub clock_hz: f64,
    pub mu: f64,
    pub nu: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_vacuum: f64,
    pub basis_prob_z: f64,
    pub e_opt: f64,
    pub f_ec: f64,
    pub block_size_sifted: u64,
}

impl From<&ProtocolParams> for ProtocolSection {
    fn from(p: &ProtocolParams) -> Self {
        Self {
            clock_hz: p.clock_hz,
            mu: p.signal_mu,
            nu: p.decoy_nu,
            p_mu: p.p_signal,
            p_nu: p.p_decoy,
            p_vacuum: p.p_vacuum,
            basis_prob_z: p.basis_prob_z,
            e_opt: p.e_opt,
            f_ec: p.f_ec,
            block_size_sifted: p.block_size_sifted,
        }
    }
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self::from(&ProtocolParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RamanSection {
    /// Worst-case coefficient, W/nm per mW launched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient_w_per_nm_per_mw: Option<f64>,
    /// Intracore spectrum to derive the coefficient from, relative to the
    /// config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_csv: Option<PathBuf>,
    pub rayleigh_offset_db: f64,
}

impl Default for RamanSection {
    fn default() -> Self {
        Self {
            coefficient_w_per_nm_per_mw: None,
            spectrum_csv: None,
            rayleigh_offset_db: DEFAULT_RAYLEIGH_OFFSET_DB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigDocument {
    pub mode: Mode,
    pub fiber: FiberSection,
    pub plan: PlanSection,
    pub filter: FilterSection,
    pub detector: DetectorSection,
    pub protocol: ProtocolSection,
    pub raman: RamanSection,
}

fn wavelength(nm: f64, key: &str) -> Result<Wavelength> {
    Wavelength::from_nm(nm).map_err(|e| Error::invariant(key, e.to_string()))
}

fn channels(entries: &[ChannelEntry], key: &str) -> Result<Vec<ClassicalChannel>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(ClassicalChannel {
                core: CoreId(c.core),
                wavelength: wavelength(c.wavelength_nm, &format!("{key}[{i}].wavelength_nm"))?,
                direction: c.direction,
                launch: OpticalPower::from_milliwatts(c.launch_mw)
                    .map_err(|e| Error::invariant(format!("{key}[{i}].launch_mw"), e.to_string()))?,
            })
        })
        .collect()
}

impl ConfigDocument {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            mode: s.mode,
            fiber: FiberSection::from_spec(&s.fiber, Some(s.fiber.attenuator_db)),
            plan: PlanSection::from_plan(&s.plan),
            filter: FilterSection {
                center_nm: Some(s.filter.center.nanometers()),
                passband_nm: s.filter.passband_nm,
                insertion_loss_db: s.filter.insertion_loss_db,
                isolation_db: s.filter.isolation_db,
            },
            detector: DetectorSection {
                efficiency: s.detector.efficiency,
                dark_count_prob: s.detector.dark_count_prob,
                gate_width_s: s.detector.gate_width_s,
            },
            protocol: ProtocolSection::from(&s.protocol),
            raman: RamanSection {
                coefficient_w_per_nm_per_mw: Some(s.raman_coefficient),
                spectrum_csv: None,
                rayleigh_offset_db: DEFAULT_RAYLEIGH_OFFSET_DB,
            },
        }
    }

    /// Resolve defaults and validate. Relative spectrum paths are taken
    /// from `base_dir`.
    pub fn into_scenario(self, base_dir: &Path) -> Result<Scenario> {
        let f = &self.fiber;
        let n = f.core_count;
        if n == 0 {
            return Err(Error::invariant("fiber.core_count", "must be >= 1"));
        }
        let mut fiber = FiberSpec {
            length_km: f.length_km,
            core_count: n,
            attenuation_db_per_km: f.attenuation_db_per_km.expand(n, "fiber.attenuation_db_per_km")?,
            excess_loss_db: f.excess_loss_db.expand(n, "fiber.excess_loss_db")?,
            fanout_tx_loss_db: f.fanout_tx_loss_db.expand(n, "fiber.fanout_tx_loss_db")?,
            fanout_rx_loss_db: f.fanout_rx_loss_db.expand(n, "fiber.fanout_rx_loss_db")?,
            leakage_forward_db: f.leakage_forward_db.expand(n, "fiber.leakage_forward_db")?,
            leakage_backward_db: f.leakage_backward_db.expand(n, "fiber.leakage_backward_db")?,
            attenuator_db: 0.0,
        };

        let plan = ChannelPlan {
            quantum: QuantumChannel {
                core: CoreId(self.plan.quantum_core),
                wavelength: wavelength(self.plan.quantum_wavelength_nm, "plan.quantum_wavelength_nm")?,
            },
            classical: channels(&self.plan.classical, "plan.classical")?,
            auxiliary: channels(&self.plan.auxiliary, "plan.auxiliary")?,
        };

        let filter = FilterSpec {
            center: match self.filter.center_nm {
                Some(nm) => wavelength(nm, "filter.center_nm")?,
                None => plan.quantum.wavelength,
            },
            passband_nm: self.filter.passband_nm,
            insertion_loss_db: self.filter.insertion_loss_db,
            isolation_db: self.filter.isolation_db,
        };

        fiber.attenuator_db = match (f.attenuator_db, self.mode) {
            (Some(a), _) => a,
            (None, Mode::Mcf) => 0.0,
            (None, Mode::DualSsmfControl) => {
                let reference = loss_budget(&FiberSpec::default(), &plan, filter.insertion_loss_db)?
                    .total()
                    .value();
                let bare = loss_budget(&fiber, &plan, filter.insertion_loss_db)?.total().value();
                if bare > reference {
                    return Err(Error::invariant(
                        "fiber.attenuator_db",
                        format!("control path loss {bare:.2} dB already exceeds the {reference:.2} dB reference"),
                    ));
                }
                reference - bare
            }
        };

        let p = &self.protocol;
        let protocol = ProtocolParams {
            clock_hz: p.clock_hz,
            signal_mu: p.mu,
            decoy_nu: p.nu,
            p_signal: p.p_mu,
            p_decoy: p.p_nu,
            p_vacuum: p.p_vacuum,
            basis_prob_z: p.basis_prob_z,
            e_opt: p.e_opt,
            f_ec: p.f_ec,
            block_size_sifted: p.block_size_sifted,
        };
        let detector = DetectorSpec {
            efficiency: self.detector.efficiency,
            dark_count_prob: self.detector.dark_count_prob,
            gate_width_s: self.detector.gate_width_s,
            clock_hz: p.clock_hz,
        };

        let r = &self.raman;
        let raman_coefficient = match (r.coefficient_w_per_nm_per_mw, &r.spectrum_csv) {
            (Some(_), Some(_)) => {
                return Err(Error::invariant(
                    "raman.spectrum_csv",
                    "give either raman.coefficient_w_per_nm_per_mw or raman.spectrum_csv, not both",
                ))
            }
            (Some(k), None) => k,
            (None, None) => DEFAULT_RAMAN_COEFFICIENT,
            (None, Some(path)) => {
                let intra = ingest_spectrum_csv(base_dir.join(path))?;
                if !intra.covers(plan.quantum.wavelength) {
                    return Err(Error::invariant(
                        "raman.spectrum_csv",
                        "spectrum does not cover the quantum wavelength",
                    ));
                }
                let inter = derive_intercore_spectrum(&intra, r.rayleigh_offset_db)
                    .map_err(|e| Error::invariant("raman.rayleigh_offset_db", e.to_string()))?;
                worst_case_raman_coefficient(&inter)?
            }
        };

        let scenario = Scenario {
            fiber,
            plan,
            filter,
            detector,
            protocol,
            raman_coefficient,
            mode: self.mode,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parse config text into a validated scenario.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Scenario> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut unknown = Vec::new();
    let doc: ConfigDocument = serde_ignored::deserialize(toml::Value::Table(value), |path| {
        unknown.push(path.to_string());
    })
    .map_err(|e| Error::Parse {
        line: None,
        message: e.to_string(),
    })?;
    if let Some(key) = unknown.into_iter().next() {
        return Err(Error::UnknownKey(key));
    }
    doc.into_scenario(base_dir)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Serialize a scenario with every value explicit.
pub fn write_config(s: &Scenario) -> Result<String> {
    toml::to_string(&ConfigDocument::from_scenario(s)).map_err(|e| Error::Parse {
        line: None,
        message: e.to_string(),
    })
}
