//! Decoy-state BB84 rate layer: weak-coherent gains and error rates,
//! vacuum + weak decoy bounds on the single-photon contribution, and the
//! GLLP-style secure key rate with a finite-block penalty.

use crate::error::{Error, Result};
use crate::noise::{DetectorSpec, NoiseBudget};
use crate::units::{h2, LinearRatio};

/// N at which the finite-size factor reaches zero is `FINITE_SIZE_SCALE²`.
pub const FINITE_SIZE_SCALE: f64 = 1500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub clock_hz: f64,
    /// Mean photon number of signal pulses.
    pub signal_mu: f64,
    /// Mean photon number of weak decoy pulses.
    pub decoy_nu: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub p_vacuum: f64,
    /// Probability that each party picks the Z basis.
    pub basis_prob_z: f64,
    /// Intrinsic error probability of a signal-photon click.
    pub e_opt: f64,
    /// Error-correction inefficiency relative to the Shannon limit.
    pub f_ec: f64,
    pub block_size_sifted: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            clock_hz: 1e9,
            signal_mu: 0.4,
            decoy_nu: 0.1,
            p_signal: 0.9,
            p_decoy: 0.05,
            p_vacuum: 0.05,
            basis_prob_z: 0.9,
            e_opt: 0.03,
            f_ec: 1.16,
            block_size_sifted: 100_000_000,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::invariant("protocol.clock_hz", "must be finite and > 0"));
        }
        if !(self.decoy_nu >= 0.0) {
            return Err(Error::invariant("protocol.nu", "must be >= 0"));
        }
        if !(self.signal_mu > self.decoy_nu && self.signal_mu.is_finite()) {
            return Err(Error::invariant("protocol.mu", "must be finite and > protocol.nu"));
        }
        for (key, p) in [
            ("protocol.p_mu", self.p_signal),
            ("protocol.p_nu", self.p_decoy),
            ("protocol.p_vacuum", self.p_vacuum),
            ("protocol.basis_prob_z", self.basis_prob_z),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invariant(key, format!("must be a probability, got {p}")));
            }
        }
        let sum = self.p_signal + self.p_decoy + self.p_vacuum;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invariant(
                "protocol.p_mu",
                format!("intensity probabilities sum to {sum}, not 1"),
            ));
        }
        if !(0.0..=0.1).contains(&self.e_opt) {
            return Err(Error::invariant(
                "protocol.e_opt",
                format!("must be in [0, 0.1], got {}", self.e_opt),
            ));
        }
        if !(1.0..=1.5).contains(&self.f_ec) {
            return Err(Error::invariant(
                "protocol.f_ec",
                format!("must be in [1, 1.5], got {}", self.f_ec),
            ));
        }
        if self.block_size_sifted == 0 {
            return Err(Error::invariant("protocol.block_size_sifted", "must be >= 1"));
        }
        Ok(())
    }

    /// Fraction of signal detections kept after basis reconciliation.
    pub fn sifting_factor(&self) -> f64 {
        let z = self.basis_prob_z;
        z * z + (1.0 - z) * (1.0 - z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOperatingPoint {
    pub channel_transmittance: LinearRatio,
    pub detector: DetectorSpec,
    pub noise: NoiseBudget,
}

impl LinkOperatingPoint {
    /// Channel transmittance times detector efficiency.
    pub fn total_transmittance(&self) -> f64 {
        self.channel_transmittance.value() * self.detector.efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainError {
    /// Click probability per pulse of this intensity.
    pub gain: f64,
    /// Error rate among those clicks.
    pub qber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainErrorTable {
    pub signal: GainError,
    pub decoy: GainError,
    pub vacuum: GainError,
}

/// Gain and error rate for one intensity over a channel with total
/// transmittance `eta` and background yield `y0`.
fn gain_error_at(intensity: f64, eta: f64, y0: f64, e_opt: f64) -> GainError {
    // 1 - exp(-eta * intensity) without cancellation
    let signal = -(-eta * intensity).exp_m1();
    let gain = (y0 + signal).min(1.0);
    let qber = if gain > 0.0 {
        ((0.5 * y0 + e_opt * signal) / gain).clamp(0.0, 0.5)
    } else {
        0.5
    };
    GainError { gain, qber }
}

pub fn gain_and_error(params: &ProtocolParams, link: &LinkOperatingPoint) -> Result<GainErrorTable> {
    let t = link.channel_transmittance.value();
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "channel transmittance must be in (0, 1], got {t}"
        )));
    }
    let eta = link.total_transmittance();
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total transmittance must be > 0, got {eta}"
        )));
    }
    Ok(table_for(params, eta, link.noise.background_yield()))
}

pub(crate) fn table_for(params: &ProtocolParams, eta: f64, y0: f64) -> GainErrorTable {
    GainErrorTable {
        signal: gain_error_at(params.signal_mu, eta, y0, params.e_opt),
        decoy: gain_error_at(params.decoy_nu, eta, y0, params.e_opt),
        vacuum: gain_error_at(0.0, eta, y0, params.e_opt),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoyEstimate {
    /// Lower bound on the single-photon yield.
    pub y1_lower: f64,
    /// Upper bound on the single-photon error rate.
    pub e1_upper: f64,
    /// Lower bound on the single-photon gain of signal pulses.
    pub q1_lower: f64,
    /// Set when the bounds admit no key.
    pub zero_key_reason: Option<String>,
}

impl DecoyEstimate {
    fn zero_key(reason: impl Into<String>) -> Self {
        Self {
            y1_lower: 0.0,
            e1_upper: 0.5,
            q1_lower: 0.0,
            zero_key_reason: Some(reason.into()),
        }
    }
}

/// Vacuum + weak decoy analytic bounds on Y1 and e1.
pub fn decoy_bounds(params: &ProtocolParams, table: &GainErrorTable) -> DecoyEstimate {
    let mu = params.signal_mu;
    let nu = params.decoy_nu;
    if !(nu > 0.0 && mu > nu) {
        return DecoyEstimate::zero_key("decoy bounds need mu > nu > 0");
    }
    let q_mu = table.signal.gain;
    let q_nu = table.decoy.gain;
    let q_0 = table.vacuum.gain;

    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp() - q_mu * mu.exp() * (nu * nu) / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * q_0);
    if !(y1 > 0.0) {
        return DecoyEstimate::zero_key(format!("single-photon yield bound {y1:e} is not positive"));
    }
    let y1 = y1.min(1.0);
    let e1 = ((table.decoy.qber * q_nu * nu.exp() - table.vacuum.qber * q_0) / (y1 * nu)).clamp(0.0, 0.5);
    DecoyEstimate {
        y1_lower: y1,
        e1_upper: e1,
        q1_lower: y1 * mu * (-mu).exp(),
        zero_key_reason: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub sifted_rate_bps: f64,
    pub secure_rate_asymptotic_bps: f64,
    pub secure_rate_finite_bps: f64,
    /// Error rate of the signal (key-generating) pulses.
    pub qber: f64,
    /// Secret bits per sifted bit in the asymptotic limit.
    pub secret_fraction: f64,
    pub finite_size_factor: f64,
    pub estimate: DecoyEstimate,
    pub saturated: bool,
    pub diagnostic: Option<String>,
}

pub fn sifted_rate(params: &ProtocolParams, table: &GainErrorTable) -> f64 {
    params.clock_hz * params.p_signal * table.signal.gain * params.sifting_factor()
}

pub fn secure_key_rate(
    params: &ProtocolParams,
    table: &GainErrorTable,
    estimate: &DecoyEstimate,
    saturated: bool,
) -> RateResult {
    let sifted = sifted_rate(params, table);
    let q_mu = table.signal.gain;
    let qber = table.signal.qber;
    let raw = if q_mu > 0.0 {
        estimate.q1_lower / q_mu * (1.0 - h2(estimate.e1_upper)) - params.f_ec * h2(qber)
    } else {
        0.0
    };
    let fraction = raw.clamp(0.0, 1.0);
    let phi = finite_size_factor(params.block_size_sifted);
    let asymptotic = sifted * fraction;

    let diagnostic = estimate
        .zero_key_reason
        .clone()
        .or_else(|| (fraction == 0.0).then(|| format!("error-correction leakage exceeds privacy (QBER {qber:.4})")));
    RateResult {
        sifted_rate_bps: sifted,
        secure_rate_asymptotic_bps: asymptotic,
        secure_rate_finite_bps: asymptotic * phi,
        qber,
        secret_fraction: fraction,
        finite_size_factor: phi,
        estimate: estimate.clone(),
        saturated,
        diagnostic,
    }
}

/// Finite-block penalty `clamp(1 - 1500/sqrt(N), 0, 1)`.
pub fn finite_size_factor(block_size_sifted: u64) -> f64 {
    if block_size_sifted == 0 {
        return 0.0;
    }
    (1.0 - FINITE_SIZE_SCALE / (block_size_sifted as f64).sqrt()).clamp(0.0, 1.0)
}

/// Gains, decoy bounds and rates for one link in one go.
pub fn evaluate(params: &ProtocolParams, link: &LinkOperatingPoint) -> Result<(GainErrorTable, RateResult)> {
    let table = gain_and_error(params, link)?;
    let estimate = decoy_bounds(params, &table);
    let rates = secure_key_rate(params, &table, &estimate, link.noise.saturated);
    Ok((table, rates))
}
