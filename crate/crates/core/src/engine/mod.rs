//! Scenario evaluation: single operating points, launch-power sweeps,
//! calibration against measured targets, Raman-coefficient feasibility and
//! the long-run session emulator.

mod calibrate;
mod session;

pub use calibrate::{
    calibrate_baseline, fit_raman_coefficient, relative_rate_drop, CalibrationReport, CalibrationTargets, RamanFit,
    Residual, EFFICIENCY_REL_TOLERANCE, F_EC_RANGE, MAX_BISECTION_ITERATIONS,
};
pub use session::{emulate_session, Histogram, Session, SessionBlock, SessionSpec, SessionSummary};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoy::{self, GainErrorTable, LinkOperatingPoint, ProtocolParams, RateResult};
use crate::error::{Error, Result};
use crate::fiber::{loss_budget, ChannelPlan, FiberSpec, LossBudget, DEFAULT_RAMAN_COEFFICIENT};
use crate::noise::{assemble_noise_budget, transmittance, DetectorSpec, FilterSpec, NoiseBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Quantum and classical channels share the multicore fiber.
    #[default]
    Mcf,
    /// Quantum and classical light on physically separate fibers: no
    /// leakage, no Raman crosstalk.
    DualSsmfControl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub fiber: FiberSpec,
    pub plan: ChannelPlan,
    pub filter: FilterSpec,
    pub detector: DetectorSpec,
    pub protocol: ProtocolParams,
    /// Worst-case Raman coefficient, W/nm per mW launched.
    pub raman_coefficient: f64,
    pub mode: Mode,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            fiber: FiberSpec::default(),
            plan: ChannelPlan::default(),
            filter: FilterSpec::default(),
            detector: DetectorSpec::default(),
            protocol: ProtocolParams::default(),
            raman_coefficient: DEFAULT_RAMAN_COEFFICIENT,
            mode: Mode::Mcf,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        self.plan.validate(&self.fiber)?;
        self.filter.validate()?;
        self.protocol.validate()?;
        self.detector.validate()?;
        if self.detector.clock_hz != self.protocol.clock_hz {
            return Err(Error::invariant(
                "protocol.clock_hz",
                "detector and protocol clocks differ",
            ));
        }
        if !self.filter.in_band(self.plan.quantum.wavelength) {
            return Err(Error::invariant(
                "filter.center_nm",
                "quantum wavelength falls outside the filter passband",
            ));
        }
        if !(self.raman_coefficient >= 0.0 && self.raman_coefficient.is_finite()) {
            return Err(Error::invariant(
                "raman.coefficient_w_per_nm_per_mw",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn loss_budget(&self) -> Result<LossBudget> {
        loss_budget(&self.fiber, &self.plan, self.filter.insertion_loss_db)
    }

    pub fn with_combined_data_power(&self, combined_mw: f64) -> Result<Scenario> {
        Ok(Scenario {
            plan: self.plan.with_combined_data_power(combined_mw)?,
            ..self.clone()
        })
    }

    /// The two-spool control setup: quantum light over 50 km of 0.20 dB/km
    /// SSMF padded with a lumped attenuator to this scenario's quantum-path
    /// loss; classical light on a separate spool.
    pub fn dual_ssmf_control(&self) -> Result<Scenario> {
        let target = self.loss_budget()?.total().value();
        let n = self.fiber.core_count;
        let mut fiber = FiberSpec::uniform(50.0, n, 0.20, 0.0, 0.0, -60.0, -80.0);
        fiber.leakage_forward_db = self.fiber.leakage_forward_db.clone();
        fiber.leakage_backward_db = self.fiber.leakage_backward_db.clone();
        let bare = loss_budget(&fiber, &self.plan, self.filter.insertion_loss_db)?
            .total()
            .value();
        if bare > target {
            return Err(Error::InvalidArgument(format!(
                "SSMF control path ({bare:.2} dB) already exceeds the reference loss ({target:.2} dB)"
            )));
        }
        fiber.attenuator_db = target - bare;
        Ok(Scenario {
            fiber,
            mode: Mode::DualSsmfControl,
            ..self.clone()
        })
    }
}

/// Everything computed for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub mode: Mode,
    pub combined_data_power_mw: f64,
    pub loss: LossBudget,
    pub transmittance: f64,
    /// Channel transmittance times detector efficiency.
    pub total_transmittance: f64,
    pub noise: NoiseBudget,
    pub table: GainErrorTable,
    pub rates: RateResult,
}

impl SimResult {
    pub fn qber(&self) -> f64 {
        self.rates.qber
    }

    pub fn secure_finite_bps(&self) -> f64 {
        self.rates.secure_rate_finite_bps
    }
}

pub fn simulate_point(s: &Scenario) -> Result<SimResult> {
    s.validate()?;
    let loss = s.loss_budget()?;
    let t = transmittance(loss.total())?;
    let noise = match s.mode {
        Mode::Mcf => assemble_noise_budget(&s.fiber, &s.plan, &s.filter, &s.detector, s.raman_coefficient)?,
        Mode::DualSsmfControl => NoiseBudget::dark_only(&s.detector),
    };
    let link = LinkOperatingPoint {
        channel_transmittance: t,
        detector: s.detector,
        noise,
    };
    let (table, rates) = decoy::evaluate(&s.protocol, &link)?;
    Ok(SimResult {
        mode: s.mode,
        combined_data_power_mw: s.plan.data_power_mw(),
        loss,
        transmittance: t.value(),
        total_transmittance: link.total_transmittance(),
        noise: link.noise,
        table,
        rates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub power_min_mw: f64,
    pub power_max_mw: f64,
    pub points: usize,
    pub scale: Scale,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_min_mw > 0.0 && self.power_max_mw.is_finite()) {
            return Err(Error::InvalidArgument("sweep powers must be finite and > 0 mW".into()));
        }
        if !(self.power_min_mw < self.power_max_mw) {
            return Err(Error::InvalidArgument(format!(
                "sweep minimum {} mW must be below maximum {} mW",
                self.power_min_mw, self.power_max_mw
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidArgument("a sweep needs at least 2 points".into()));
        }
        Ok(())
    }

    /// Combined launch powers, ascending, endpoints included exactly.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.power_min_mw;
                }
                if i == self.points - 1 {
                    return self.power_max_mw;
                }
                let frac = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.power_min_mw + frac * (self.power_max_mw - self.power_min_mw),
                    Scale::Log => {
                        let (a, b) = (self.power_min_mw.ln(), self.power_max_mw.ln());
                        (a + frac * (b - a)).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub combined_mw: f64,
    pub result: SimResult,
}

/// Evaluate the scenario with the data channels sharing each grid power
/// equally. Points are evaluated in parallel; output follows grid order.
pub fn sweep_power(s: &Scenario, sweep: &SweepSpec) -> Result<Vec<SweepPoint>> {
    sweep.validate()?;
    s.validate()?;
    sweep
        .grid()
        .into_par_iter()
        .map(|mw| {
            let result = simulate_point(&s.with_combined_data_power(mw)?)?;
            Ok(SweepPoint {
                combined_mw: mw,
                result,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthPlan {
    pub power_per_direction_mw: f64,
    pub aggregate_bidirectional_tbps: f64,
}

impl BandwidthPlan {
    pub fn combined_power_mw(&self) -> f64 {
        2.0 * self.power_per_direction_mw
    }
}

/// Launch power and capacity of fully populated DWDM data cores, with the
/// same channel count in each direction of every core.
pub fn plan_bandwidth(
    cores: u32,
    channels_per_core_per_direction: u32,
    power_per_channel_mw: f64,
    rate_per_channel_gbps: f64,
) -> Result<BandwidthPlan> {
    if cores == 0 || channels_per_core_per_direction == 0 {
        return Err(Error::InvalidArgument("cores and channels must be >= 1".into()));
    }
    if !(power_per_channel_mw > 0.0 && rate_per_channel_gbps > 0.0) {
        return Err(Error::InvalidArgument("power and line rate must be > 0".into()));
    }
    let cores = f64::from(cores);
    let channels = f64::from(channels_per_core_per_direction);
    Ok(BandwidthPlan {
        power_per_direction_mw: cores * channels * power_per_channel_mw,
        aggregate_bidirectional_tbps: cores * (2.0 * channels) * rate_per_channel_gbps / 1000.0,
    })
}
