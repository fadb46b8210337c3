//! Long-run session emulation: QBER drifts block by block and the secure
//! rate follows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::decoy::{decoy_bounds, secure_key_rate, table_for};
use crate::error::{Error, Result};

use super::{simulate_point, Scenario};

const HISTOGRAM_BIN: f64 = 0.001;
const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionSpec {
    pub duration_hours: f64,
    pub qber_mean: f64,
    pub qber_std: f64,
    pub seed: u64,
}

impl SessionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_hours > 0.0 && self.duration_hours.is_finite()) {
            return Err(Error::InvalidArgument(
                "session duration must be finite and > 0 h".into(),
            ));
        }
        if !(self.qber_mean > 0.0 && self.qber_mean < 0.5) {
            return Err(Error::InvalidArgument("session QBER mean must be in (0, 0.5)".into()));
        }
        if !(self.qber_std >= 0.0 && self.qber_std < self.qber_mean) {
            return Err(Error::InvalidArgument("session QBER std must be in [0, mean)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionBlock {
    pub index: usize,
    /// Start of the block relative to session start.
    pub timestamp_s: f64,
    pub qber: f64,
    pub e_opt: f64,
    pub secure_finite_bps: f64,
}

/// Fixed-width histogram starting at zero; the last bin absorbs overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut counts = vec![0u64; HISTOGRAM_BINS];
        for v in values {
            let bin = ((v / HISTOGRAM_BIN).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        Self {
            bin_width: HISTOGRAM_BIN,
            counts,
        }
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub blocks: usize,
    pub block_duration_s: f64,
    pub qber_mean: f64,
    pub qber_std: f64,
    pub secure_mean_bps: f64,
    pub secure_std_bps: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub blocks: Vec<SessionBlock>,
    pub summary: SessionSummary,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Each block lasts as long as it takes to sift one block of key at the
/// scenario's rate. Its QBER is drawn from a normal distribution truncated to
/// [0, 0.5]; `e_opt` is re-derived to reproduce that QBER and the secure
/// rate recomputed. The same seed always gives the same series.
pub fn emulate_session(s: &Scenario, spec: &SessionSpec) -> Result<Session> {
    spec.validate()?;
    let base = simulate_point(s)?;
    let sifted = base.rates.sifted_rate_bps;
    if !(sifted > 0.0) {
        return Err(Error::ModelInconsistency("scenario has no sifted key".into()));
    }
    let block_duration_s = s.protocol.block_size_sifted as f64 / sifted;
    let n_blocks = (spec.duration_hours * 3600.0 / block_duration_s).floor() as usize;

    let normal = Normal::new(spec.qber_mean, spec.qber_std)
        .map_err(|e| Error::InvalidArgument(format!("QBER distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draws: Vec<f64> = (0..n_blocks)
        .map(|_| loop {
            let q = normal.sample(&mut rng);
            if (0.0..=0.5).contains(&q) {
                break q;
            }
        })
        .collect();

    let q_mu = base.table.signal.gain;
    let y0 = base.table.vacuum.gain;
    let eta = base.total_transmittance;
    let saturated = base.noise.saturated;
    let blocks: Vec<SessionBlock> = draws
        .par_iter()
        .enumerate()
        .map(|(index, &q)| {
            let e_opt = ((q * q_mu - 0.5 * y0) / (q_mu - y0)).clamp(0.0, 0.5);
            let params = crate::decoy::ProtocolParams { e_opt, ..s.protocol };
            let table = table_for(&params, eta, y0);
            let estimate = decoy_bounds(&params, &table);
            let rates = secure_key_rate(&params, &table, &estimate, saturated);
            SessionBlock {
                index,
                timestamp_s: index as f64 * block_duration_s,
                qber: rates.qber,
                e_opt,
                secure_finite_bps: rates.secure_rate_finite_bps,
            }
        })
        .collect();

    let qbers: Vec<f64> = blocks.iter().map(|b| b.qber).collect();
    let secure: Vec<f64> = blocks.iter().map(|b| b.secure_finite_bps).collect();
    let (qber_mean, qber_std) = mean_std(&qbers);
    let (secure_mean_bps, secure_std_bps) = mean_std(&secure);
    Ok(Session {
        summary: SessionSummary {
            blocks: blocks.len(),
            block_duration_s,
            qber_mean,
            qber_std,
            secure_mean_bps,
            secure_std_bps,
            histogram: Histogram::of(qbers.iter().copied()),
        },
        blocks,
    })
}
