//! Fitting device parameters to a target operating point, and bracketing
//! the Raman coefficient between a low-power and a high-power constraint.

use crate::error::{Error, Result};

use super::{simulate_point, Scenario};

pub const EFFICIENCY_REL_TOLERANCE: f64 = 1e-6;
pub const MAX_BISECTION_ITERATIONS: usize = 200;
/// Admissible error-correction inefficiency during calibration.
pub const F_EC_RANGE: (f64, f64) = (1.05, 1.25);
const EFFICIENCY_FLOOR: f64 = 1e-6;
const E_OPT_MAX: f64 = 0.1;

/// Combined data power at which key must survive, mW.
const HIGH_POWER_MW: f64 = 2000.0;
/// Combined data power that must cost less than `MAX_LOW_POWER_DROP`, mW.
const LOW_POWER_MW: f64 = 100.0;
const MAX_LOW_POWER_DROP: f64 = 0.01;
const LOG10_KAPPA_RANGE: (f64, f64) = (-22.0, -10.0);
const LOG10_KAPPA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub sifted_rate_bps: f64,
    pub qber: f64,
    pub secure_finite_bps: Option<f64>,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            sifted_rate_bps: 2.7e6,
            qber: 0.0336,
            secure_finite_bps: Some(627e3),
        }
    }
}

impl CalibrationTargets {
    fn validate(&self) -> Result<()> {
        if !(self.sifted_rate_bps > 0.0 && self.sifted_rate_bps.is_finite()) {
            return Err(Error::InvalidArgument(
                "sifted-rate target must be finite and > 0".into(),
            ));
        }
        if !(self.qber > 0.0 && self.qber < 0.5) {
            return Err(Error::InvalidArgument("QBER target must be in (0, 0.5)".into()));
        }
        if let Some(s) = self.secure_finite_bps {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(
                    "secure-rate target must be finite and > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub target: &'static str,
    pub target_value: f64,
    pub achieved: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub efficiency: f64,
    pub e_opt: f64,
    pub f_ec: f64,
    pub efficiency_iterations: usize,
    /// Zero when no secure-rate target was given.
    pub f_ec_iterations: usize,
    pub residuals: Vec<Residual>,
}

impl CalibrationReport {
    pub fn max_relative_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.relative_error.abs())
            .fold(0.0, f64::max)
    }
}

/// Bisection on `[lo, hi]` for a residual that changes sign across the
/// bracket. Stops once `|residual| <= tolerance`.
fn bisect<F>(mut lo: f64, mut hi: f64, tolerance: f64, mut residual: F) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo_negative = residual(lo)? < 0.0;
    for i in 1..=MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid)?;
        if r.abs() <= tolerance {
            return Ok((mid, i));
        }
        if (r < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), MAX_BISECTION_ITERATIONS))
}

/// Three separable stages at zero data power: detector efficiency from the
/// sifted rate, `e_opt` in closed form from the QBER, then `f_ec` from the
/// secure rate. Returns a new scenario; the input is untouched.
pub fn calibrate_baseline(s: &Scenario, targets: &CalibrationTargets) -> Result<(Scenario, CalibrationReport)> {
    s.validate()?;
    targets.validate()?;
    let mut work = s.with_combined_data_power(0.0)?;

    // stage 1: efficiency
    let sifted_at = |work: &mut Scenario, eff: f64| -> Result<f64> {
        work.detector.efficiency = eff;
        Ok(simulate_point(work)?.rates.sifted_rate_bps)
    };
    let lo_rate = sifted_at(&mut work, EFFICIENCY_FLOOR)?;
    let hi_rate = sifted_at(&mut work, 1.0)?;
    if !(lo_rate..=hi_rate).contains(&targets.sifted_rate_bps) {
        return Err(Error::CalibrationInfeasible {
            target: "sifted_rate_bps",
            value: targets.sifted_rate_bps,
            lo: lo_rate,
            hi: hi_rate,
        });
    }
    let tol = EFFICIENCY_REL_TOLERANCE * targets.sifted_rate_bps;
    let (efficiency, efficiency_iterations) = bisect(EFFICIENCY_FLOOR, 1.0, tol, |eff| {
        Ok(sifted_at(&mut work, eff)? - targets.sifted_rate_bps)
    })?;
    work.detector.efficiency = efficiency;

    // stage 2: e_opt from E_mu Q_mu = Y0/2 + e_opt (Q_mu - Y0)
    let table = simulate_point(&work)?.table;
    let q_mu = table.signal.gain;
    let y0 = table.vacuum.gain;
    let signal_clicks = q_mu - y0;
    let qber_lo = 0.5 * y0 / q_mu;
    let qber_hi = (0.5 * y0 + E_OPT_MAX * signal_clicks) / q_mu;
    if !(qber_lo..=qber_hi).contains(&targets.qber) {
        return Err(Error::CalibrationInfeasible {
            target: "qber",
            value: targets.qber,
            lo: qber_lo,
            hi: qber_hi,
        });
    }
    let e_opt = ((targets.qber * q_mu - 0.5 * y0) / signal_clicks).clamp(0.0, E_OPT_MAX);
    work.protocol.e_opt = e_opt;

    // stage 3: f_ec
    let mut f_ec_iterations = 0;
    if let Some(secure_target) = targets.secure_finite_bps {
        let secure_at = |work: &mut Scenario, f: f64| -> Result<f64> {
            work.protocol.f_ec = f;
            Ok(simulate_point(work)?.rates.secure_rate_finite_bps)
        };
        let best = secure_at(&mut work, F_EC_RANGE.0)?;
        let worst = secure_at(&mut work, F_EC_RANGE.1)?;
        if !(worst..=best).contains(&secure_target) {
            return Err(Error::CalibrationInfeasible {
                target: "secure_finite_bps",
                value: secure_target,
                lo: worst,
                hi: best,
            });
        }
        let tol = EFFICIENCY_REL_TOLERANCE * secure_target;
        let (f, iters) = bisect(F_EC_RANGE.0, F_EC_RANGE.1, tol, |f| {
            Ok(secure_at(&mut work, f)? - secure_target)
        })?;
        work.protocol.f_ec = f;
        f_ec_iterations = iters;
    }

    let fit = simulate_point(&work)?;
    let residual = |target: &'static str, target_value: f64, achieved: f64| Residual {
        target,
        target_value,
        achieved,
        relative_error: (achieved - target_value) / target_value,
    };
    let mut residuals = vec![
        residual("sifted_rate_bps", targets.sifted_rate_bps, fit.rates.sifted_rate_bps),
        residual("qber", targets.qber, fit.rates.qber),
    ];
    if let Some(t) = targets.secure_finite_bps {
        residuals.push(residual("secure_finite_bps", t, fit.rates.secure_rate_finite_bps));
    }

    let mut calibrated = s.clone();
    calibrated.detector.efficiency = efficiency;
    calibrated.protocol.e_opt = work.protocol.e_opt;
    calibrated.protocol.f_ec = work.protocol.f_ec;
    Ok((
        calibrated,
        CalibrationReport {
            efficiency,
            e_opt: work.protocol.e_opt,
            f_ec: work.protocol.f_ec,
            efficiency_iterations,
            f_ec_iterations,
            residuals,
        },
    ))
}

/// Fractional loss of finite-size secure rate at `combined_mw` relative to
/// the same scenario with the data channels dark.
pub fn relative_rate_drop(s: &Scenario, combined_mw: f64) -> Result<f64> {
    let base = simulate_point(&s.with_combined_data_power(0.0)?)?.secure_finite_bps();
    if base <= 0.0 {
        return Err(Error::ModelInconsistency("baseline produces no secure key".into()));
    }
    let loaded = simulate_point(&s.with_combined_data_power(combined_mw)?)?.secure_finite_bps();
    Ok(1.0 - loaded / base)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamanFit {
    /// Largest coefficient costing under 1 % of key rate at 100 mW combined.
    pub kappa_lo: f64,
    /// Largest coefficient still giving key at 2000 mW combined.
    pub kappa_hi: f64,
    pub recommended: f64,
    /// `kappa_hi` hit the top of the search range rather than a constraint.
    pub hi_unbounded: bool,
}

impl RamanFit {
    pub fn contains(&self, kappa: f64) -> bool {
        (self.kappa_lo..=self.kappa_hi).contains(&kappa)
    }
}

/// Largest `log10 κ` in the search range for which `ok` holds, assuming `ok`
/// is true below some threshold and false above it.
fn largest_admissible<F>(mut ok: F) -> Result<Option<(f64, bool)>>
where
    F: FnMut(f64) -> Result<bool>,
{
    let (mut lo, mut hi) = LOG10_KAPPA_RANGE;
    if !ok(lo)? {
        return Ok(None);
    }
    if ok(hi)? {
        return Ok(Some((hi, true)));
    }
    while hi - lo > LOG10_KAPPA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some((lo, false)))
}

pub fn fit_raman_coefficient(s: &Scenario) -> Result<RamanFit> {
    s.validate()?;
    let with_kappa = |log_kappa: f64| Scenario {
        raman_coefficient: 10f64.powf(log_kappa),
        ..s.clone()
    };
    let hi = largest_admissible(|lk| {
        let point = simulate_point(&with_kappa(lk).with_combined_data_power(HIGH_POWER_MW)?)?;
        Ok(point.secure_finite_bps() > 0.0)
    })?
    .ok_or_else(|| {
        Error::ModelInconsistency(format!(
            "no key at {HIGH_POWER_MW} mW combined even without Raman scattering"
        ))
    })?;
    let lo = largest_admissible(|lk| Ok(relative_rate_drop(&with_kappa(lk), LOW_POWER_MW)? < MAX_LOW_POWER_DROP))?
        .ok_or_else(|| {
            Error::ModelInconsistency(format!(
                "rate already drops by {:.0}% at {LOW_POWER_MW} mW without Raman scattering",
                100.0 * MAX_LOW_POWER_DROP
            ))
        })?;
    let (kappa_lo, kappa_hi) = (10f64.powf(lo.0), 10f64.powf(hi.0));
    if kappa_lo > kappa_hi {
        return Err(Error::ModelInconsistency(format!(
            "Raman constraints are incompatible: need kappa <= {kappa_hi:e} for key at {HIGH_POWER_MW} mW \
             but the {LOW_POWER_MW} mW bound is {kappa_lo:e}"
        )));
    }
    Ok(RamanFit {
        kappa_lo,
        kappa_hi,
        recommended: (kappa_lo * kappa_hi).sqrt(),
        hi_unbounded: hi.1,
    })
}
