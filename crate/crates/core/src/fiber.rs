//! Multicore fiber plant: per-core loss, intercore leakage and the Raman
//! crosstalk that reaches the quantum receiver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, Decibels, LinearRatio, OpticalPower, Wavelength};

/// Worst-case intercore Raman coefficient, W per nm of passband per mW of
/// classical launch power, referred to the quantum receiver.
pub const DEFAULT_RAMAN_COEFFICIENT: f64 = 5.0e-16;
/// Inter- vs intracore Rayleigh peak difference used to scale the measured
/// intracore Raman spectrum down to the central core.
pub const DEFAULT_RAYLEIGH_OFFSET_DB: f64 = 40.0;
/// Minimum separation between the quantum and any classical wavelength.
pub const DWDM_GRID_SPACING_NM: f64 = 0.8;
/// Leakage above this level is treated as a configuration error.
pub const MAX_LEAKAGE_DB: f64 = -20.0;

pub const QUANTUM_WAVELENGTH_NM: f64 = 1547.72;
pub const DATA_WAVELENGTH_NM: f64 = 1552.72;

/// Core index; 0 is the central core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoreId(pub usize);

impl CoreId {
    pub const CENTRAL: CoreId = CoreId(0);
}

impl std::fmt::Display for CoreId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "core{}", self.0)
    }
}

/// Propagation direction of a classical channel relative to the quantum signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Co,
    Counter,
}

/// Which end of the fiber a scattering measurement was taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpec {
    pub length_km: f64,
    pub core_count: usize,
    pub attenuation_db_per_km: Vec<f64>,
    /// Splice/connector loss per core, on top of distributed attenuation.
    pub excess_loss_db: Vec<f64>,
    pub fanout_tx_loss_db: Vec<f64>,
    pub fanout_rx_loss_db: Vec<f64>,
    /// `[source][destination]` power ratio measured at the far end.
    pub leakage_forward_db: Vec<Vec<f64>>,
    /// `[source][destination]` power ratio measured back at the launch end.
    pub leakage_backward_db: Vec<Vec<f64>>,
    /// Lumped attenuator inserted in the quantum path only.
    pub attenuator_db: f64,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self::seven_core_53km()
    }
}

impl FiberSpec {
    /// The 53 km, 7-core plant: 0.23 dB/km, 0.21 dB excess so the fiber
    /// accounts for 12.4 dB, 1.1 dB of fanout split evenly over both ends,
    /// and uniform -60/-80 dB forward/backward leakage.
    pub fn seven_core_53km() -> Self {
        Self::uniform(53.0, 7, 0.23, 0.21, 0.55, -60.0, -80.0)
    }

    pub fn uniform(
        length_km: f64,
        core_count: usize,
        attenuation_db_per_km: f64,
        excess_loss_db: f64,
        fanout_loss_db_per_end: f64,
        leakage_forward_db: f64,
        leakage_backward_db: f64,
    ) -> Self {
        Self {
            length_km,
            core_count,
            attenuation_db_per_km: vec![attenuation_db_per_km; core_count],
            excess_loss_db: vec![excess_loss_db; core_count],
            fanout_tx_loss_db: vec![fanout_loss_db_per_end; core_count],
            fanout_rx_loss_db: vec![fanout_loss_db_per_end; core_count],
            leakage_forward_db: uniform_matrix(core_count, leakage_forward_db),
            leakage_backward_db: uniform_matrix(core_count, leakage_backward_db),
            attenuator_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.length_km.is_finite() || self.length_km < 0.0 {
            return Err(Error::invariant("fiber.length_km", "must be finite and >= 0"));
        }
        if self.core_count == 0 {
            return Err(Error::invariant("fiber.core_count", "must be >= 1"));
        }
        let n = self.core_count;
        let per_core = [
            ("fiber.attenuation_db_per_km", &self.attenuation_db_per_km, false),
            ("fiber.excess_loss_db", &self.excess_loss_db, true),
            ("fiber.fanout_tx_loss_db", &self.fanout_tx_loss_db, true),
            ("fiber.fanout_rx_loss_db", &self.fanout_rx_loss_db, true),
        ];
        for (key, values, zero_ok) in per_core {
            if values.len() != n {
                return Err(Error::invariant(
                    key,
                    format!("expected {n} per-core values, got {}", values.len()),
                ));
            }
            for &v in values {
                let ok = v.is_finite() && if zero_ok { v >= 0.0 } else { v > 0.0 };
                if !ok {
                    let bound = if zero_ok { ">= 0" } else { "> 0" };
                    return Err(Error::invariant(
                        key,
                        format!("every value must be finite and {bound}, got {v}"),
                    ));
                }
            }
        }
        for (key, m) in [
            ("fiber.leakage_forward_db", &self.leakage_forward_db),
            ("fiber.leakage_backward_db", &self.leakage_backward_db),
        ] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::invariant(key, format!("expected a {n}x{n} matrix")));
            }
            for (src, row) in m.iter().enumerate() {
                for (dst, &v) in row.iter().enumerate() {
                    if src != dst && !(v <= MAX_LEAKAGE_DB) {
                        return Err(Error::invariant(
                            key,
                            format!("[{src}][{dst}] = {v} dB; leakage must be <= {MAX_LEAKAGE_DB} dB"),
                        ));
                    }
                }
            }
        }
        if !self.attenuator_db.is_finite() || self.attenuator_db < 0.0 {
            return Err(Error::invariant("fiber.attenuator_db", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn check_core(&self, core: CoreId) -> Result<()> {
        if core.0 >= self.core_count {
            return Err(Error::InvalidArgument(format!(
                "{core} out of range for a {}-core fiber",
                self.core_count
            )));
        }
        Ok(())
    }

    pub fn leakage_db(&self, direction: Direction, source: CoreId, dest: CoreId) -> f64 {
        match direction {
            Direction::Co => self.leakage_forward_db[source.0][dest.0],
            Direction::Counter => self.leakage_backward_db[source.0][dest.0],
        }
    }

    /// Two spans back to back. The inner fanouts disappear: the transmit
    /// fanout comes from `self`, the receive fanout from `next`.
    pub fn concat(&self, next: &FiberSpec) -> Result<FiberSpec> {
        if self.core_count != next.core_count {
            return Err(Error::InvalidArgument(
                "cannot join fibers with different core counts".into(),
            ));
        }
        let length_km = self.length_km + next.length_km;
        let attenuation_db_per_km = self
            .attenuation_db_per_km
            .iter()
            .zip(&next.attenuation_db_per_km)
            .map(|(a, b)| {
                if length_km > 0.0 {
                    (a * self.length_km + b * next.length_km) / length_km
                } else {
                    *a
                }
            })
            .collect();
        let excess_loss_db = self
            .excess_loss_db
            .iter()
            .zip(&next.excess_loss_db)
            .map(|(a, b)| a + b)
            .collect();
        Ok(FiberSpec {
            length_km,
            core_count: self.core_count,
            attenuation_db_per_km,
            excess_loss_db,
            fanout_tx_loss_db: self.fanout_tx_loss_db.clone(),
            fanout_rx_loss_db: next.fanout_rx_loss_db.clone(),
            leakage_forward_db: self.leakage_forward_db.clone(),
            leakage_backward_db: self.leakage_backward_db.clone(),
            attenuator_db: self.attenuator_db + next.attenuator_db,
        })
    }
}

fn uniform_matrix(n: usize, off_diagonal: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { off_diagonal }).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumChannel {
    pub core: CoreId,
    pub wavelength: Wavelength,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalChannel {
    pub core: CoreId,
    pub wavelength: Wavelength,
    pub direction: Direction,
    pub launch: OpticalPower,
}

/// Core and wavelength assignment for the quantum channel, the classical
/// data channels and the QKD auxiliary (sync/reconciliation) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub quantum: QuantumChannel,
    pub classical: Vec<ClassicalChannel>,
    pub auxiliary: Vec<ClassicalChannel>,
}

impl Default for ChannelPlan {
    /// Quantum signal in the central core, one 0 dBm data channel in each
    /// direction in two different outer cores.
    fn default() -> Self {
        let data = Wavelength::from_nm(DATA_WAVELENGTH_NM).unwrap();
        let one_mw = OpticalPower::from_milliwatts(1.0).unwrap();
        Self {
            quantum: QuantumChannel {
                core: CoreId::CENTRAL,
                wavelength: Wavelength::from_nm(QUANTUM_WAVELENGTH_NM).unwrap(),
            },
            classical: vec![
                ClassicalChannel {
                    core: CoreId(1),
                    wavelength: data,
                    direction: Direction::Co,
                    launch: one_mw,
                },
                ClassicalChannel {
                    core: CoreId(2),
                    wavelength: data,
                    direction: Direction::Counter,
                    launch: one_mw,
                },
            ],
            auxiliary: Vec::new(),
        }
    }
}

impl ChannelPlan {
    pub fn validate(&self, fiber: &FiberSpec) -> Result<()> {
        if self.quantum.core.0 >= fiber.core_count {
            return Err(Error::invariant(
                "plan.quantum_core",
                format!(
                    "{} out of range for a {}-core fiber",
                    self.quantum.core, fiber.core_count
                ),
            ));
        }
        let q_nm = self.quantum.wavelength.nanometers();
        for (key, list) in [("plan.classical", &self.classical), ("plan.auxiliary", &self.auxiliary)] {
            for (i, ch) in list.iter().enumerate() {
                if ch.core.0 >= fiber.core_count {
                    return Err(Error::invariant(
                        format!("{key}[{i}].core"),
                        format!("{} out of range for a {}-core fiber", ch.core, fiber.core_count),
                    ));
                }
                if ch.core == self.quantum.core {
                    return Err(Error::invariant(
                        format!("{key}[{i}].core"),
                        "the quantum core cannot carry classical light",
                    ));
                }
                if (ch.wavelength.nanometers() - q_nm).abs() < DWDM_GRID_SPACING_NM - 1e-9 {
                    return Err(Error::invariant(
                        format!("{key}[{i}].wavelength_nm"),
                        format!("must be at least {DWDM_GRID_SPACING_NM} nm from the quantum wavelength"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Every classical launch, data and auxiliary, both directions.
    pub fn all_classical(&self) -> impl Iterator<Item = &ClassicalChannel> {
        self.classical.iter().chain(&self.auxiliary)
    }

    pub fn total_classical_mw(&self) -> f64 {
        self.all_classical().map(|c| c.launch.milliwatts()).sum()
    }

    pub fn data_power_mw(&self) -> f64 {
        self.classical.iter().map(|c| c.launch.milliwatts()).sum()
    }

    /// Copy of the plan with the data channels set to an equal share of
    /// `combined_mw`. Auxiliary channels keep their launch power.
    pub fn with_combined_data_power(&self, combined_mw: f64) -> Result<ChannelPlan> {
        let mut plan = self.clone();
        if plan.classical.is_empty() {
            return Ok(plan);
        }
        let each = OpticalPower::from_milliwatts(combined_mw / plan.classical.len() as f64)?;
        for ch in &mut plan.classical {
            ch.launch = each;
        }
        Ok(plan)
    }
}

/// Quantum-path loss broken into the terms of the link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// Distributed attenuation plus excess loss.
    pub fiber_db: f64,
    pub fanout_db: f64,
    pub filter_db: f64,
    pub attenuator_db: f64,
}

impl LossBudget {
    pub fn total(&self) -> Decibels {
        Decibels(self.fiber_db + self.fanout_db + self.filter_db + self.attenuator_db)
    }
}

pub fn loss_budget(fiber: &FiberSpec, plan: &ChannelPlan, filter_insertion_db: f64) -> Result<LossBudget> {
    let core = plan.quantum.core;
    fiber.check_core(core)?;
    let c = core.0;
    Ok(LossBudget {
        fiber_db: fiber.length_km * fiber.attenuation_db_per_km[c] + fiber.excess_loss_db[c],
        fanout_db: fiber.fanout_tx_loss_db[c] + fiber.fanout_rx_loss_db[c],
        filter_db: filter_insertion_db,
        attenuator_db: fiber.attenuator_db,
    })
}

pub fn quantum_path_loss_db(fiber: &FiberSpec, plan: &ChannelPlan, filter_insertion_db: f64) -> Result<Decibels> {
    Ok(loss_budget(fiber, plan, filter_insertion_db)?.total())
}

/// Leaked power from one classical channel at the quantum-core output,
/// before the receiver filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageContribution {
    pub source: CoreId,
    pub wavelength: Wavelength,
    pub direction: Direction,
    pub power: OpticalPower,
}

pub fn leakage_power_at_receiver(fiber: &FiberSpec, plan: &ChannelPlan) -> Result<Vec<LeakageContribution>> {
    plan.validate(fiber)?;
    plan.all_classical()
        .map(|ch| {
            let db = fiber.leakage_db(ch.direction, ch.core, plan.quantum.core);
            let ratio = if db == f64::NEG_INFINITY {
                LinearRatio::new(0.0)?
            } else {
                db_to_linear(Decibels(db))?
            };
            Ok(LeakageContribution {
                source: ch.core,
                wavelength: ch.wavelength,
                direction: ch.direction,
                power: ch.launch.scaled(ratio),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    pub wavelength: Wavelength,
    pub density_dbm_per_nm: f64,
}

/// Wavelength-resolved scattered power density recorded for a given launch.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanSpectrum {
    samples: Vec<SpectrumSample>,
    pub launch_power_dbm: f64,
    pub fiber_length_km: f64,
    pub direction: ScatterDirection,
}

impl RamanSpectrum {
    pub fn new(
        samples: Vec<SpectrumSample>,
        launch_power_dbm: f64,
        fiber_length_km: f64,
        direction: ScatterDirection,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::SpectrumTooShort(samples.len()));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].wavelength <= pair[0].wavelength {
                return Err(Error::SpectrumNonMonotone {
                    line: i + 2,
                    wavelength_nm: pair[1].wavelength.nanometers(),
                });
            }
        }
        if let Some(s) = samples.iter().find(|s| !s.density_dbm_per_nm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite density at {} nm",
                s.wavelength.nanometers()
            )));
        }
        Ok(Self {
            samples,
            launch_power_dbm,
            fiber_length_km,
            direction,
        })
    }

    pub fn samples(&self) -> &[SpectrumSample] {
        &self.samples
    }

    pub fn covers(&self, lambda: Wavelength) -> bool {
        let first = self.samples[0].wavelength;
        let last = self.samples[self.samples.len() - 1].wavelength;
        (first..=last).contains(&lambda)
    }

    /// Synthetic intracore backscatter envelope over 1450-1650 nm for a
    /// 0 dBm launch. Only its maximum is physically meaningful: after the
    /// default Rayleigh offset it yields [`DEFAULT_RAMAN_COEFFICIENT`].
    pub fn builtin_intracore() -> Self {
        // dB below the Stokes-side peak
        const SHAPE: [(f64, f64); 11] = [
            (1450.0, -14.0),
            (1470.0, -12.0),
            (1490.0, -10.0),
            (1510.0, -8.0),
            (1530.0, -6.5),
            (1550.0, -5.5),
            (1570.0, -4.5),
            (1590.0, -3.0),
            (1610.0, -1.8),
            (1630.0, -0.8),
            (1650.0, 0.0),
        ];
        let peak = 10.0 * (DEFAULT_RAMAN_COEFFICIENT * 1e3).log10() + DEFAULT_RAYLEIGH_OFFSET_DB;
        let samples = SHAPE
            .iter()
            .map(|&(nm, rel)| SpectrumSample {
                wavelength: Wavelength::from_nm(nm).unwrap(),
                density_dbm_per_nm: peak + rel,
            })
            .collect();
        Self::new(samples, 0.0, 53.0, ScatterDirection::Backward).unwrap()
    }
}

/// Scale an intracore spectrum down by the inter/intracore Rayleigh peak
/// difference, keeping its shape.
pub fn derive_intercore_spectrum(intra: &RamanSpectrum, rayleigh_offset_db: f64) -> Result<RamanSpectrum> {
    if !rayleigh_offset_db.is_finite() || rayleigh_offset_db < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rayleigh offset must be finite and >= 0 dB, got {rayleigh_offset_db}"
        )));
    }
    if intra.samples.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let mut inter = intra.clone();
    for s in &mut inter.samples {
        s.density_dbm_per_nm -= rayleigh_offset_db;
    }
    Ok(inter)
}

/// Peak spectral density normalised to the recorded launch power, in W/nm
/// per mW launched. Applied to both directions (worst case).
pub fn worst_case_raman_coefficient(inter: &RamanSpectrum) -> Result<f64> {
    if !inter.launch_power_dbm.is_finite() {
        return Err(Error::InvalidArgument("spectrum launch power must be > 0 W".into()));
    }
    let launch_mw = 10f64.powf(inter.launch_power_dbm / 10.0);
    let peak_dbm = inter
        .samples
        .iter()
        .map(|s| s.density_dbm_per_nm)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(1e-3 * 10f64.powf(peak_dbm / 10.0) / launch_mw)
}

/// Raman power falling inside the receiver passband, assuming every
/// classical launch scatters at the worst-case coefficient.
pub fn raman_inband_power(kappa: f64, plan: &ChannelPlan, passband_nm: f64) -> Result<OpticalPower> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "raman coefficient must be >= 0, got {kappa}"
        )));
    }
    if !(passband_nm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "passband must be > 0 nm, got {passband_nm}"
        )));
    }
    OpticalPower::from_watts(kappa * passband_nm * plan.total_classical_mw())
}
