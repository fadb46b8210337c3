//! Physical quantities and the handful of elementary functions shared by the
//! fiber, receiver and protocol layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A power ratio expressed in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decibels(pub f64);

impl Decibels {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// A dimensionless, non-negative power ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearRatio(f64);

impl LinearRatio {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "linear ratio must be finite and >= 0, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Optical power, held in milliwatts.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpticalPower(f64);

impl OpticalPower {
    pub const ZERO: OpticalPower = OpticalPower(0.0);

    pub fn from_milliwatts(mw: f64) -> Result<Self> {
        if !mw.is_finite() || mw < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "optical power must be finite and >= 0 mW, got {mw}"
            )));
        }
        Ok(Self(mw))
    }

    pub fn from_watts(watts: f64) -> Result<Self> {
        Self::from_milliwatts(watts * 1e3)
    }

    pub fn from_dbm(dbm: f64) -> Result<Self> {
        if !dbm.is_finite() {
            return Err(Error::InvalidArgument(format!("dBm value must be finite, got {dbm}")));
        }
        Ok(Self(10f64.powf(dbm / 10.0)))
    }

    pub fn watts(self) -> f64 {
        self.0 * 1e-3
    }

    pub fn milliwatts(self) -> f64 {
        self.0
    }

    /// Power in dBm; `None` for zero power.
    pub fn dbm(self) -> Option<f64> {
        (self.0 > 0.0).then(|| 10.0 * self.0.log10())
    }

    pub fn scaled(self, factor: LinearRatio) -> Self {
        Self(self.0 * factor.value())
    }
}

impl std::ops::Add for OpticalPower {
    type Output = OpticalPower;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl std::iter::Sum for OpticalPower {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

/// Vacuum wavelength in nanometres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wavelength(f64);

impl Wavelength {
    /// Lower and upper edge of the telecom band guard applied to built-in defaults.
    pub const TELECOM_BAND_NM: (f64, f64) = (1000.0, 1700.0);

    pub fn from_nm(nm: f64) -> Result<Self> {
        if !nm.is_finite() || nm <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be finite and > 0 nm, got {nm}"
            )));
        }
        Ok(Self(nm))
    }

    pub fn nanometers(self) -> f64 {
        self.0
    }

    pub fn in_telecom_band(self) -> bool {
        (Self::TELECOM_BAND_NM.0..=Self::TELECOM_BAND_NM.1).contains(&self.0)
    }

    /// Energy of one photon at this wavelength, in joules.
    pub fn photon_energy(self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / (self.0 * 1e-9)
    }
}

pub fn db_to_linear(x: Decibels) -> Result<LinearRatio> {
    if !x.0.is_finite() {
        return Err(Error::InvalidArgument(format!("dB value must be finite, got {}", x.0)));
    }
    LinearRatio::new(10f64.powf(x.0 / 10.0))
}

/// Inverse of [`db_to_linear`]; the ratio must be strictly positive.
pub fn linear_to_db(x: LinearRatio) -> Result<Decibels> {
    if x.0 <= 0.0 {
        return Err(Error::InvalidArgument("cannot express a zero ratio in dB".into()));
    }
    Ok(Decibels(10.0 * x.0.log10()))
}

/// Photons per second carried by `power` at wavelength `lambda`.
pub fn photon_rate_from_power(power: OpticalPower, lambda: Wavelength) -> f64 {
    power.watts() / lambda.photon_energy()
}

/// Shannon entropy of a Bernoulli(p) source in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// [`binary_entropy`] with the argument clamped into [0, 1]. For callers that
/// have already bounded `p` and only need protection from rounding.
pub(crate) fn h2(p: f64) -> f64 {
    binary_entropy(p.clamp(0.0, 1.0)).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn db_conversion_examples() {
        assert_eq!(db_to_linear(Decibels(0.0)).unwrap().value(), 1.0);
        assert_relative_eq!(
            db_to_linear(Decibels(-60.0)).unwrap().value(),
            1.0e-6,
            max_relative = 1e-14
        );
        // 10^-1.41
        assert_relative_eq!(
            db_to_linear(Decibels(-14.1)).unwrap().value(),
            0.038_904_514_499_428_07,
            max_relative = 1e-12
        );
        assert!(db_to_linear(Decibels(f64::NAN)).is_err());
        assert!(db_to_linear(Decibels(f64::INFINITY)).is_err());
        assert!(linear_to_db(LinearRatio::new(0.0).unwrap()).is_err());
        assert!(LinearRatio::new(-1.0).is_err());
    }

    #[test]
    fn photon_energy_at_1550() {
        let l = Wavelength::from_nm(1550.0).unwrap();
        assert_relative_eq!(l.photon_energy(), 1.2816e-19, max_relative = 1e-3);
    }

    #[test]
    fn photon_rate_examples() {
        let l = Wavelength::from_nm(1550.0).unwrap();
        assert_eq!(photon_rate_from_power(OpticalPower::ZERO, l), 0.0);
        let nw = photon_rate_from_power(OpticalPower::from_watts(1e-9).unwrap(), l);
        assert_relative_eq!(nw, 7.80e9, max_relative = 2e-3);
        // 1 fW over ~100 nm restricted to a 0.4 nm passband
        let fw = photon_rate_from_power(OpticalPower::from_watts(1e-15 * 0.4 / 100.0).unwrap(), l);
        assert_relative_eq!(fw, 31.2, max_relative = 2e-3);
        assert!(Wavelength::from_nm(0.0).is_err());
        assert!(Wavelength::from_nm(-1550.0).is_err());
    }

    #[test]
    fn power_accessors() {
        let p = OpticalPower::from_dbm(0.0).unwrap();
        assert_relative_eq!(p.watts(), 1e-3);
        assert_relative_eq!(p.dbm().unwrap(), 0.0, epsilon = 1e-12);
        assert!(OpticalPower::ZERO.dbm().is_none());
        assert!(OpticalPower::from_watts(-1.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.0336).unwrap() - 0.212_136).abs() < 1e-6);
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn db_round_trip(exp in -20.0f64..3.0, mant in 1.0f64..10.0) {
            let x = mant * 10f64.powf(exp);
            let back = db_to_linear(linear_to_db(LinearRatio::new(x).unwrap()).unwrap()).unwrap();
            prop_assert!((back.value() - x).abs() <= 1e-12 * x);
        }

        #[test]
        fn photon_rate_is_linear(w in 0.0f64..1.0, nm in 1000.0f64..1700.0) {
            let l = Wavelength::from_nm(nm).unwrap();
            let a = photon_rate_from_power(OpticalPower::from_watts(w).unwrap(), l);
            let b = photon_rate_from_power(OpticalPower::from_watts(2.0 * w).unwrap(), l);
            prop_assert_eq!(b, 2.0 * a);
        }

        #[test]
        fn entropy_symmetric(p in 0.0f64..=1.0) {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn entropy_concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let mid = binary_entropy(0.5 * (a + b)).unwrap();
            let avg = 0.5 * (binary_entropy(a).unwrap() + binary_entropy(b).unwrap());
            prop_assert!(mid >= avg - 1e-12);
        }
    }
}
