//! CSV results tables with a `#`-comment preamble.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::engine::{Session, SimResult, SweepPoint};
use crate::error::{Error, Result};

pub const SWEEP_COLUMNS: [&str; 7] = [
    "combined_mw",
    "qber",
    "sifted_bps",
    "secure_asym_bps",
    "secure_finite_bps",
    "raman_w",
    "leakage_w",
];

const SESSION_COLUMNS: [&str; 4] = ["block", "timestamp_s", "qber", "secure_finite_bps"];

/// Hex SHA-256 of the raw config bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    /// `key=value` pairs written as `# key=value` lines.
    pub preamble: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultsTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            preamble: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.preamble.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.preamble.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.preamble {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Read back a table written by [`ResultsTable::to_csv`].
pub fn parse_table(text: &str) -> Result<ResultsTable> {
    let mut table = ResultsTable::default();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut header = None;
    for (i, line) in lines.by_ref() {
        match line.strip_prefix('#') {
            Some(meta) => {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    table.preamble.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            None => {
                header = Some((i, line));
                break;
            }
        }
    }
    let (_, header) = header.ok_or(Error::Parse {
        line: None,
        message: "table has no header row".into(),
    })?;
    table.columns = header.split(',').map(|c| c.trim().to_string()).collect();
    for (i, line) in lines {
        let row = line
            .split(',')
            .map(|c| {
                c.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: Some(i + 1),
                    message: format!("`{}`: {e}", c.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != table.columns.len() {
            return Err(Error::Parse {
                line: Some(i + 1),
                message: format!("expected {} fields, found {}", table.columns.len(), row.len()),
            });
        }
        table.rows.push(row);
    }
    Ok(table)
}

pub fn sweep_table(points: &[SweepPoint]) -> ResultsTable {
    let mut t = ResultsTable::new(&SWEEP_COLUMNS);
    t.rows = points
        .iter()
        .map(|p| {
            let r = &p.result;
            vec![
                p.combined_mw,
                r.qber(),
                r.rates.sifted_rate_bps,
                r.rates.secure_rate_asymptotic_bps,
                r.rates.secure_rate_finite_bps,
                r.noise.raman_in_band.watts(),
                r.noise.leakage_in_band.watts(),
            ]
        })
        .collect();
    t
}

pub fn session_table(session: &Session) -> ResultsTable {
    let s = &session.summary;
    let histogram: Vec<String> = s.histogram.counts.iter().map(u64::to_string).collect();
    let mut t = ResultsTable::new(&SESSION_COLUMNS)
        .with_meta("blocks", s.blocks)
        .with_meta("block_duration_s", format!("{:.6e}", s.block_duration_s))
        .with_meta("qber_mean", format!("{:.6e}", s.qber_mean))
        .with_meta("qber_std", format!("{:.6e}", s.qber_std))
        .with_meta("secure_mean_bps", format!("{:.6e}", s.secure_mean_bps))
        .with_meta("secure_std_bps", format!("{:.6e}", s.secure_std_bps))
        .with_meta("qber_histogram_bin", s.histogram.bin_width)
        .with_meta("qber_histogram", histogram.join(" "));
    t.rows = session
        .blocks
        .iter()
        .map(|b| vec![b.index as f64, b.timestamp_s, b.qber, b.secure_finite_bps])
        .collect();
    t
}

/// Named quantities for a single operating point, in display order.
pub fn simulation_rows(r: &SimResult) -> Vec<(&'static str, f64)> {
    vec![
        ("combined_data_power_mw", r.combined_data_power_mw),
        ("total_loss_db", r.loss.total().value()),
        ("fiber_loss_db", r.loss.fiber_db),
        ("fanout_loss_db", r.loss.fanout_db),
        ("filter_loss_db", r.loss.filter_db),
        ("attenuator_db", r.loss.attenuator_db),
        ("transmittance", r.transmittance),
        ("raman_in_band_w", r.noise.raman_in_band.watts()),
        ("leakage_in_band_w", r.noise.leakage_in_band.watts()),
        ("noise_count_prob", r.noise.noise_count_prob),
        ("background_yield", r.noise.background_yield()),
        ("gain_signal", r.table.signal.gain),
        ("gain_decoy", r.table.decoy.gain),
        ("gain_vacuum", r.table.vacuum.gain),
        ("qber", r.qber()),
        ("y1_lower", r.rates.estimate.y1_lower),
        ("e1_upper", r.rates.estimate.e1_upper),
        ("sifted_bps", r.rates.sifted_rate_bps),
        ("secure_asym_bps", r.rates.secure_rate_asymptotic_bps),
        ("finite_size_factor", r.rates.finite_size_factor),
        ("secure_finite_bps", r.rates.secure_rate_finite_bps),
    ]
}
