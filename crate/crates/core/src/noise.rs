//! Converts leakage, Raman and dark counts into click probabilities per
//! detection gate at the quantum receiver.

use crate::error::{Error, Result};
use crate::fiber::{
    leakage_power_at_receiver, raman_inband_power, ChannelPlan, CoreId, FiberSpec, QUANTUM_WAVELENGTH_NM,
};
use crate::units::{db_to_linear, photon_rate_from_power, Decibels, LinearRatio, OpticalPower, Wavelength};

/// Above this per-gate noise probability the linear photon-counting model
/// stops being meaningful and results are flagged.
pub const SATURATION_PROBABILITY: f64 = 0.5;

/// Ideal rectangular DWDM bandpass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub center: Wavelength,
    pub passband_nm: f64,
    pub insertion_loss_db: f64,
    /// Extra rejection outside the passband; may be infinite.
    pub isolation_db: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            center: Wavelength::from_nm(QUANTUM_WAVELENGTH_NM).unwrap(),
            passband_nm: 0.4,
            insertion_loss_db: 0.6,
            isolation_db: 80.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.passband_nm > 0.0 && self.passband_nm < 10.0) {
            return Err(Error::invariant("filter.passband_nm", "must be in (0, 10) nm"));
        }
        if !(self.insertion_loss_db.is_finite() && self.insertion_loss_db >= 0.0) {
            return Err(Error::invariant("filter.insertion_loss_db", "must be finite and >= 0"));
        }
        if !(self.isolation_db >= 40.0) {
            return Err(Error::invariant("filter.isolation_db", "must be >= 40 dB"));
        }
        Ok(())
    }

    /// Band edges count as in band, to within 1 fm.
    pub fn in_band(&self, lambda: Wavelength) -> bool {
        (lambda.nanometers() - self.center.nanometers()).abs() <= 0.5 * self.passband_nm + 1e-6
    }

    pub fn insertion_transmission(&self) -> LinearRatio {
        LinearRatio::new(10f64.powf(-self.insertion_loss_db / 10.0)).unwrap_or(LinearRatio::new(0.0).unwrap())
    }
}

pub fn filter_transmission(filter: &FilterSpec, lambda: Wavelength) -> LinearRatio {
    if filter.in_band(lambda) {
        filter.insertion_transmission()
    } else {
        // powf(-inf) is 0, which covers the infinite-isolation limit
        let t = 10f64.powf(-(filter.insertion_loss_db + filter.isolation_db) / 10.0);
        LinearRatio::new(t).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Intrinsic dark-count click probability per gate.
    pub dark_count_prob: f64,
    pub gate_width_s: f64,
    pub clock_hz: f64,
}

impl Default for DetectorSpec {
    /// Pre-calibration seeds for a gated, self-differencing InGaAs APD.
    fn default() -> Self {
        Self {
            efficiency: 0.20,
            dark_count_prob: 2.0e-5,
            gate_width_s: 150e-12,
            clock_hz: 1e9,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invariant(
                "detector.efficiency",
                format!("must be in (0, 1], got {}", self.efficiency),
            ));
        }
        if !(self.dark_count_prob >= 0.0 && self.dark_count_prob < 1e-2) {
            return Err(Error::invariant(
                "detector.dark_count_prob",
                format!("must be in [0, 0.01), got {}", self.dark_count_prob),
            ));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::invariant("protocol.clock_hz", "must be finite and > 0"));
        }
        if !(self.gate_width_s > 0.0 && self.gate_width_s <= 1.0 / self.clock_hz) {
            return Err(Error::invariant("detector.gate_width_s", "must be in (0, 1/clock_hz]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NoiseKind {
    /// Same-wavelength leakage from a classical core; filtered per wavelength.
    Leakage(CoreId),
    /// Broadband Raman light already restricted to the passband.
    Raman,
    Dark,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseKind::Leakage(core) => write!(f, "leakage_{core}"),
            NoiseKind::Raman => f.write_str("raman"),
            NoiseKind::Dark => f.write_str("dark"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSource {
    pub kind: NoiseKind,
    pub power: OpticalPower,
    pub wavelength: Wavelength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateNoise {
    /// Click probability per gate from all optical sources together.
    pub probability: f64,
    pub per_source: Vec<f64>,
    pub saturated: bool,
}

/// Optical power reaching the photodiode from one noise source.
fn power_after_filter(source: &NoiseSource, filter: &FilterSpec) -> OpticalPower {
    let t = match source.kind {
        NoiseKind::Raman => filter.insertion_transmission(),
        _ => filter_transmission(filter, source.wavelength),
    };
    source.power.scaled(t)
}

pub fn noise_count_prob_per_gate(sources: &[NoiseSource], filter: &FilterSpec, det: &DetectorSpec) -> GateNoise {
    let per_source: Vec<f64> = sources
        .iter()
        .map(|s| {
            // Raman photons are counted at the quantum wavelength
            let lambda = match s.kind {
                NoiseKind::Raman => filter.center,
                _ => s.wavelength,
            };
            let rate = photon_rate_from_power(power_after_filter(s, filter), lambda);
            (rate * det.gate_width_s * det.efficiency).min(1.0)
        })
        .collect();
    let log_none: f64 = per_source.iter().map(|p| (-p).ln_1p()).sum();
    let probability = -log_none.exp_m1();
    GateNoise {
        probability,
        saturated: probability > SATURATION_PROBABILITY,
        per_source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTerm {
    pub kind: NoiseKind,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    /// Leaked power that survives the receiver filter.
    pub leakage_in_band: OpticalPower,
    /// Raman power inside the passband, before insertion loss.
    pub raman_in_band: OpticalPower,
    pub noise_count_prob: f64,
    pub dark_count_prob: f64,
    /// Every source including dark counts, largest first.
    pub breakdown: Vec<NoiseTerm>,
    pub saturated: bool,
}

impl NoiseBudget {
    /// Click probability per gate with no signal photon.
    pub fn background_yield(&self) -> f64 {
        self.dark_count_prob + self.noise_count_prob
    }

    pub fn dark_only(det: &DetectorSpec) -> Self {
        Self {
            leakage_in_band: OpticalPower::ZERO,
            raman_in_band: OpticalPower::ZERO,
            noise_count_prob: 0.0,
            dark_count_prob: det.dark_count_prob,
            breakdown: vec![NoiseTerm {
                kind: NoiseKind::Dark,
                probability: det.dark_count_prob,
            }],
            saturated: false,
        }
    }
}

pub fn assemble_noise_budget(
    fiber: &FiberSpec,
    plan: &ChannelPlan,
    filter: &FilterSpec,
    det: &DetectorSpec,
    raman_coefficient: f64,
) -> Result<NoiseBudget> {
    let mut sources: Vec<NoiseSource> = leakage_power_at_receiver(fiber, plan)?
        .into_iter()
        .map(|c| NoiseSource {
            kind: NoiseKind::Leakage(c.source),
            power: c.power,
            wavelength: c.wavelength,
        })
        .collect();
    let raman = raman_inband_power(raman_coefficient, plan, filter.passband_nm)?;
    if plan.all_classical().next().is_some() {
        sources.push(NoiseSource {
            kind: NoiseKind::Raman,
            power: raman,
            wavelength: filter.center,
        });
    }
    let gate = noise_count_prob_per_gate(&sources, filter, det);

    let leakage_in_band = sources
        .iter()
        .filter(|s| matches!(s.kind, NoiseKind::Leakage(_)))
        .map(|s| power_after_filter(s, filter))
        .sum();

    let mut breakdown: Vec<NoiseTerm> = sources
        .iter()
        .zip(&gate.per_source)
        .map(|(s, &p)| NoiseTerm {
            kind: s.kind,
            probability: p,
        })
        .collect();
    breakdown.push(NoiseTerm {
        kind: NoiseKind::Dark,
        probability: det.dark_count_prob,
    });
    breakdown.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.kind.cmp(&b.kind)));

    Ok(NoiseBudget {
        leakage_in_band,
        raman_in_band: raman,
        noise_count_prob: gate.probability,
        dark_count_prob: det.dark_count_prob,
        breakdown,
        saturated: gate.saturated,
    })
}

/// Channel transmittance of a path with the given loss.
pub fn transmittance(loss: Decibels) -> Result<LinearRatio> {
    db_to_linear(Decibels(-loss.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{DATA_WAVELENGTH_NM, DEFAULT_RAMAN_COEFFICIENT};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nm(x: f64) -> Wavelength {
        Wavelength::from_nm(x).unwrap()
    }

    #[test]
    fn filter_examples() {
        let f = FilterSpec::default();
        assert_relative_eq!(filter_transmission(&f, nm(1547.72)).value(), 0.871, max_relative = 1e-3);
        assert_relative_eq!(
            filter_transmission(&f, nm(1552.72)).value(),
            8.71e-9,
            max_relative = 1e-3
        );
        let ideal = FilterSpec {
            isolation_db: f64::INFINITY,
            ..f
        };
        assert_eq!(filter_transmission(&ideal, nm(1552.72)).value(), 0.0);
        ideal.validate().unwrap();
        // band edges are inside
        assert!(f.in_band(nm(1547.92)));
        assert!(!f.in_band(nm(1548.0)));
    }

    #[test]
    fn filter_and_detector_validation() {
        let f = FilterSpec {
            isolation_db: 30.0,
            ..FilterSpec::default()
        };
        assert!(f.validate().is_err());
        let f = FilterSpec {
            passband_nm: 12.0,
            ..FilterSpec::default()
        };
        assert!(f.validate().is_err());
        let d = DetectorSpec {
            efficiency: 1.5,
            ..DetectorSpec::default()
        };
        assert!(matches!(d.validate(), Err(Error::Invariant { key, .. }) if key == "detector.efficiency"));
        let d = DetectorSpec {
            gate_width_s: 2e-9,
            ..DetectorSpec::default()
        };
        assert!(d.validate().is_err());
        let d = DetectorSpec {
            dark_count_prob: 0.02,
            ..DetectorSpec::default()
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn gate_probability_examples() {
        let det = DetectorSpec::default();
        let f = FilterSpec::default();
        assert_eq!(noise_count_prob_per_gate(&[], &f, &det).probability, 0.0);

        let leak = NoiseSource {
            kind: NoiseKind::Leakage(CoreId(1)),
            power: OpticalPower::from_watts(1e-9).unwrap(),
            wavelength: nm(DATA_WAVELENGTH_NM),
        };
        // 8.71e-9 transmission x 7.82e9 photons/s = 68 /s, times 150 ps and 0.2
        let p = noise_count_prob_per_gate(&[leak], &f, &det).probability;
        assert_relative_eq!(p, 2.04e-9, max_relative = 1e-2);

        let raman = NoiseSource {
            kind: NoiseKind::Raman,
            power: OpticalPower::from_watts(4.0e-13).unwrap(),
            wavelength: nm(QUANTUM_WAVELENGTH_NM),
        };
        let p = noise_count_prob_per_gate(&[raman], &f, &det).probability;
        // 4e-13 W x 0.871 / 1.2834e-19 J = 2.715e6 /s -> 8.15e-5 per gate
        assert_relative_eq!(p, 8.15e-5, max_relative = 2e-3);
    }

    #[test]
    fn saturation_flag() {
        let det = DetectorSpec::default();
        let big = NoiseSource {
            kind: NoiseKind::Raman,
            power: OpticalPower::from_watts(1e-6).unwrap(),
            wavelength: nm(QUANTUM_WAVELENGTH_NM),
        };
        let g = noise_count_prob_per_gate(&[big], &FilterSpec::default(), &det);
        assert!(g.saturated);
        assert!(g.probability <= 1.0);
    }

    #[test]
    fn default_plan_noise_is_negligible() {
        let det = DetectorSpec::default();
        let b = assemble_noise_budget(
            &FiberSpec::default(),
            &ChannelPlan::default(),
            &FilterSpec::default(),
            &det,
            DEFAULT_RAMAN_COEFFICIENT,
        )
        .unwrap();
        assert!(b.noise_count_prob < 1e-2 * b.dark_count_prob);
        let leak: f64 = b
            .breakdown
            .iter()
            .filter(|t| matches!(t.kind, NoiseKind::Leakage(_)))
            .map(|t| t.probability)
            .sum();
        assert!(leak < 0.01 * b.dark_count_prob);
        assert_eq!(b.breakdown[0].kind, NoiseKind::Dark);
        assert!(b.breakdown.windows(2).all(|w| w[0].probability >= w[1].probability));
    }

    #[test]
    fn no_classical_channels_leaves_only_dark_counts() {
        let det = DetectorSpec::default();
        let mut plan = ChannelPlan::default();
        plan.classical.clear();
        let b = assemble_noise_budget(
            &FiberSpec::default(),
            &plan,
            &FilterSpec::default(),
            &det,
            DEFAULT_RAMAN_COEFFICIENT,
        )
        .unwrap();
        assert_eq!(b, NoiseBudget::dark_only(&det));
    }

    #[test]
    fn raman_dominates_at_two_watts() {
        let det = DetectorSpec::default();
        let plan = ChannelPlan::default().with_combined_data_power(2000.0).unwrap();
        let b = assemble_noise_budget(
            &FiberSpec::default(),
            &plan,
            &FilterSpec::default(),
            &det,
            DEFAULT_RAMAN_COEFFICIENT,
        )
        .unwrap();
        assert_eq!(b.breakdown[0].kind, NoiseKind::Raman);
        assert!(b.breakdown[0].probability > det.dark_count_prob);
    }

    fn arb_sources() -> impl Strategy<Value = Vec<NoiseSource>> {
        prop::collection::vec((0.0f64..1e-12, any::<bool>(), 1540.0f64..1560.0), 0..6).prop_map(|v| {
            v.into_iter()
                .map(|(w, raman, l)| NoiseSource {
                    kind: if raman {
                        NoiseKind::Raman
                    } else {
                        NoiseKind::Leakage(CoreId(1))
                    },
                    power: OpticalPower::from_watts(w).unwrap(),
                    wavelength: Wavelength::from_nm(l).unwrap(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn monotone_in_power_gate_and_efficiency(sources in arb_sources(), idx in 0usize..6, k in 1.0f64..10.0,
                                                  gate in 50e-12f64..500e-12, eff in 0.05f64..1.0) {
            let f = FilterSpec::default();
            let det = DetectorSpec { gate_width_s: gate, efficiency: eff, ..DetectorSpec::default() };
            let base = noise_count_prob_per_gate(&sources, &f, &det).probability;
            if !sources.is_empty() {
                let mut more = sources.clone();
                let i = idx % more.len();
                more[i].power = OpticalPower::from_watts(more[i].power.watts() * k).unwrap();
                prop_assert!(noise_count_prob_per_gate(&more, &f, &det).probability >= base);
            }
            let wider = DetectorSpec { gate_width_s: (gate * k).min(1e-9), ..det };
            prop_assert!(noise_count_prob_per_gate(&sources, &f, &wider).probability >= base);
            let better = DetectorSpec { efficiency: (eff * k).min(1.0), ..det };
            prop_assert!(noise_count_prob_per_gate(&sources, &f, &better).probability >= base);
        }

        #[test]
        fn small_probabilities_add(sources in arb_sources()) {
            let g = noise_count_prob_per_gate(&sources, &FilterSpec::default(), &DetectorSpec::default());
            let sum: f64 = g.per_source.iter().sum();
            prop_assume!(sum < 1e-3 && sum > 0.0);
            // the product form differs from the sum by the pairwise overlaps only
            let rel = (g.probability - sum).abs() / sum;
            prop_assert!(rel <= sum);
            if sum < 1e-6 {
                prop_assert!(rel < 1e-6);
            }
        }

        #[test]
        fn doubling_powers_doubles_to_first_order(sources in arb_sources()) {
            let f = FilterSpec::default();
            let det = DetectorSpec::default();
            let a = noise_count_prob_per_gate(&sources, &f, &det);
            let doubled: Vec<_> = sources.iter().map(|s| NoiseSource { power: OpticalPower::from_watts(2.0 * s.power.watts()).unwrap(), ..*s }).collect();
            let b = noise_count_prob_per_gate(&doubled, &f, &det);
            for (x, y) in a.per_source.iter().zip(&b.per_source) {
                prop_assert!((y - 2.0 * x).abs() <= 1e-12 * x);
            }
            let sum: f64 = a.per_source.iter().sum();
            if a.probability > 0.0 {
                prop_assert!(((b.probability - 2.0 * a.probability) / (2.0 * a.probability)).abs() <= sum);
            }
        }
    }
}
