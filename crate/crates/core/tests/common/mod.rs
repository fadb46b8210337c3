#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mcf_qkd::decoy::{GainError, GainErrorTable, ProtocolParams};
use mcf_qkd::engine::Scenario;
use mcf_qkd::io::load_config;

pub fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn default_config() -> PathBuf {
    manifest_dir().join("configs/default.toml")
}

pub fn baseline_config() -> PathBuf {
    manifest_dir().join("configs/baseline.toml")
}

pub fn baseline() -> Scenario {
    load_config(baseline_config()).expect("shipped baseline config loads")
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcf-qkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of a `name,value` line in CLI output.
pub fn field(text: &str, name: &str) -> Option<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix(name)?.strip_prefix(','))
        .and_then(|v| v.split_whitespace().next()?.parse().ok())
}

/// Photon-number-resolved toy channel: an n-photon pulse clicks unless every
/// photon is lost and no background count occurs. Signal clicks err with
/// probability `e_opt`, background-only clicks with probability 1/2.
pub struct PoissonChannel {
    pub eta: f64,
    pub y0: f64,
    pub e_opt: f64,
}

impl PoissonChannel {
    pub fn yield_n(&self, n: u32) -> f64 {
        1.0 - (1.0 - self.y0) * (1.0 - self.eta).powi(n as i32)
    }

    pub fn error_n(&self, n: u32) -> f64 {
        let lost = (1.0 - self.eta).powi(n as i32);
        (0.5 * self.y0 * lost + self.e_opt * (1.0 - lost)) / self.yield_n(n)
    }

    /// Gain and error rate of a coherent state, by summing the photon-number
    /// distribution term by term.
    pub fn mixture(&self, intensity: f64) -> GainError {
        let mut weight = (-intensity).exp();
        let (mut gain, mut errors) = (0.0, 0.0);
        for n in 0..=80u32 {
            if n > 0 {
                weight *= intensity / f64::from(n);
            }
            let y = self.yield_n(n);
            gain += weight * y;
            errors += weight * y * self.error_n(n);
        }
        GainError {
            gain,
            qber: errors / gain,
        }
    }

    pub fn table(&self, p: &ProtocolParams) -> GainErrorTable {
        GainErrorTable {
            signal: self.mixture(p.signal_mu),
            decoy: self.mixture(p.decoy_nu),
            vacuum: self.mixture(0.0),
        }
    }
}
