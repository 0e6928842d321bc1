//! Ingestion of externally captured bitstreams (oscilloscope exports,
//! logic-analyzer dumps) into [`Bitstream`].
//!
//! Supported layouts, auto-detected:
//! - the native `#sdadc-bitstream v1` text format (round-trips bit-exact);
//! - two-column CSV `time_or_index,value` (an optional non-numeric header
//!   row is skipped);
//! - raw one-value-per-line dumps.
//!
//! Analog values are thresholded to {-1, +1} at mid-scale, the midpoint of
//! the observed min and max. The sample rate must come from a
//! `#f_s_hz=...` header line or from the `f_s` argument.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::modulator::Bitstream;

/// Read a capture file. `f_s` overrides / supplies the sample rate; it is
/// required when the file carries no `#f_s_hz=` header.
pub fn ingest_capture(path: &Path, f_s: Option<f64>) -> Result<Bitstream> {
    let reader = BufReader::new(File::open(path)?);
    let mut header_rate: Option<f64> = None;
    let mut values: Vec<f64> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(h) = t.strip_prefix('#') {
            if let Some(v) = h.trim().strip_prefix("f_s_hz=") {
                header_rate = Some(v.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad f_s_hz value '{}'", v.trim()),
                })?);
            }
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        let value_field = match fields.len() {
            1 => fields[0],
            2 => fields[1],
            n => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 1 or 2 columns, found {n}"),
                })
            }
        };
        match value_field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite sample {v}"),
                })
            }
            Err(_) => {
                // Tolerate a single leading header row of column names.
                if values.is_empty() && lineno <= 2 {
                    continue;
                }
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("bad sample '{value_field}'"),
                });
            }
        }
    }

    if values.is_empty() {
        return Err(Error::Input("capture contains no samples".into()));
    }
    let rate = f_s.or(header_rate).ok_or_else(|| {
        Error::Config("sample rate missing: no #f_s_hz= header and no f_s flag".into())
    })?;
    if !(rate > 0.0) {
        return Err(Error::Config(format!("sample rate must be > 0, got {rate}")));
    }

    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Input(
            "capture is constant; cannot derive a mid-scale threshold".into(),
        ));
    }
    let mid = 0.5 * (lo + hi);
    let bits = values
        .iter()
        .map(|&v| if v >= mid { 1i8 } else { -1i8 })
        .collect();
    Ok(Bitstream { bits, f_s: rate })
}
