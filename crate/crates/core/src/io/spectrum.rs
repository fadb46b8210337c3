use std::path::Path;

use crate::error::{Error, Result};
use crate::fiber::{RamanSpectrum, ScatterDirection, SpectrumSample};
use crate::units::Wavelength;

const HEADER: [&str; 2] = ["wavelength_nm", "density_dbm_per_nm"];

pub fn ingest_spectrum_csv(path: impl AsRef<Path>) -> Result<RamanSpectrum> {
    parse_spectrum_csv(&std::fs::read_to_string(path)?)
}

fn metadata<'a>(text: &'a str, key: &'static str) -> Result<Option<(usize, &'a str)>> {
    for (i, line) in text.lines().enumerate() {
        let Some(body) = line.trim().strip_prefix('#') else {
            continue;
        };
        if let Some((k, v)) = body.split_once('=') {
            if k.trim() == key {
                return Ok(Some((i + 1, v.trim())));
            }
        }
    }
    Ok(None)
}

fn numeric_metadata(text: &str, key: &'static str) -> Result<f64> {
    let (line, raw) = metadata(text, key)?.ok_or(Error::SpectrumMissingMetadata(key))?;
    raw.parse().map_err(|_| Error::Parse {
        line: Some(line),
        message: format!("`{key}` is not a number: {raw:?}"),
    })
}

/// Parse the spectrum CSV: `# launch_dbm=`, `# length_km=` and
/// `# direction=` metadata comments, a `wavelength_nm,density_dbm_per_nm`
/// header, then one sample per row with strictly increasing wavelength.
pub fn parse_spectrum_csv(text: &str) -> Result<RamanSpectrum> {
    let launch_dbm = numeric_metadata(text, "launch_dbm")?;
    let length_km = numeric_metadata(text, "length_km")?;
    let (dir_line, dir) = metadata(text, "direction")?.ok_or(Error::SpectrumMissingMetadata("direction"))?;
    let direction = match dir {
        "forward" => ScatterDirection::Forward,
        "backward" => ScatterDirection::Backward,
        other => {
            return Err(Error::Parse {
                line: Some(dir_line),
                message: format!("direction must be forward or backward, got {other:?}"),
            })
        }
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: headers.position().map(|p| p.line() as usize),
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut samples: Vec<SpectrumSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<f64> {
            record.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                line: Some(line),
                message: format!("column `{}` is not a number", HEADER[i]),
            })
        };
        let nm = field(0)?;
        let wavelength = Wavelength::from_nm(nm).map_err(|e| Error::Parse {
            line: Some(line),
            message: e.to_string(),
        })?;
        if let Some(prev) = samples.last() {
            if wavelength <= prev.wavelength {
                return Err(Error::SpectrumNonMonotone {
                    line,
                    wavelength_nm: nm,
                });
            }
        }
        samples.push(SpectrumSample {
            wavelength,
            density_dbm_per_nm: field(1)?,
        });
    }
    RamanSpectrum::new(samples, launch_dbm, length_km, direction)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
    }
}

pub fn write_spectrum_csv(spectrum: &RamanSpectrum) -> String {
    let direction = match spectrum.direction {
        ScatterDirection::Forward => "forward",
        ScatterDirection::Backward => "backward",
    };
    let mut out = format!(
        "# launch_dbm={}\n# length_km={}\n# direction={direction}\n{}\n",
        spectrum.launch_power_dbm,
        spectrum.fiber_length_km,
        HEADER.join(",")
    );
    for s in spectrum.samples() {
        out.push_str(&format!("{},{}\n", s.wavelength.nanometers(), s.density_dbm_per_nm));
    }
    out
}
