//! Plain-text tap table: one tap per line, `delay_ns power_db doppler_hz`,
//! `#` comment lines and blank lines ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::Tap;
use crate::{Error, Result};

pub fn parse_tap_file(text: &str) -> Result<Vec<Tap>> {
    parse_with_path(text, Path::new("<tap file>"))
}

fn parse_with_path(text: &str, path: &Path) -> Result<Vec<Tap>> {
    let mut taps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            reason: format!("line {}: {reason}", lineno + 1),
        };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
        }
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| parse_err(format!("not a number: {f:?}")))?;
        }
        taps.push(Tap::new(vals[0], vals[1], vals[2]).map_err(|e| parse_err(e.to_string()))?);
    }
    if taps.is_empty() {
        return Err(Error::Empty("tap file"));
    }
    Ok(taps)
}

/// Values are written in shortest round-trip form so re-reading is exact.
pub fn format_tap_file(taps: &[Tap]) -> String {
    let mut out = String::from("# delay_ns power_db doppler_hz\n");
    for t in taps {
        let _ = writeln!(out, "{} {} {}", t.delay_ns, t.power_db, t.doppler_hz);
    }
    out
}

pub fn read_tap_file(path: impl AsRef<Path>) -> Result<Vec<Tap>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_with_path(&text, path)
}

pub fn write_tap_file(path: impl AsRef<Path>, taps: &[Tap]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_tap_file(taps)).map_err(|e| Error::io(path, e))
}
