//! File formats: tap CSVs, mask JSON and phase traces.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{FilterTaps, MaskDefinition};

/// One coefficient per line with 17 significant digits.
pub fn format_taps_csv(taps: &FilterTaps) -> String {
    let mut out = String::with_capacity(taps.len() * 25);
    for c in taps.coeffs() {
        out.push_str(&format!("{c:.16e}\n"));
    }
    out
}

/// Parses one coefficient per line; blank lines and `#` comments are skipped.
pub fn parse_taps_csv(text: &str, samples_per_symbol: u32) -> Result<FilterTaps> {
    let mut coeffs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        let v: f64 = field.parse().map_err(|_| Error::Parse(format!("line {}: '{field}' is not a number", no + 1)))?;
        coeffs.push(v);
    }
    FilterTaps::new(coeffs, samples_per_symbol)
}

pub fn write_taps_csv(path: &Path, taps: &FilterTaps) -> Result<()> {
    Ok(fs::write(path, format_taps_csv(taps))?)
}

pub fn read_taps_csv(path: &Path, samples_per_symbol: u32) -> Result<FilterTaps> {
    parse_taps_csv(&fs::read_to_string(path)?, samples_per_symbol)
}

pub fn read_mask_json(path: &Path) -> Result<MaskDefinition> {
    MaskDefinition::from_json(&fs::read_to_string(path)?)
}

pub fn write_mask_json(path: &Path, mask: &MaskDefinition) -> Result<()> {
    Ok(fs::write(path, mask.to_json()?)?)
}

/// Writes `symbol,true_phase,estimated_phase` rows.
pub fn write_phase_trace(path: &Path, truth: &[f64], estimate: &[f64]) -> Result<()> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: estimate.len() });
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "symbol,true_phase,estimated_phase")?;
    for (k, (t, e)) in truth.iter().zip(estimate).enumerate() {
        writeln!(f, "{k},{t:.17e},{e:.17e}")?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rrc_taps;

    #[test]
    fn taps_round_trip_exactly() {
        let taps = rrc_taps(0.15, 8, 4).unwrap();
        let back = parse_taps_csv(&format_taps_csv(&taps), 4).unwrap();
        assert_eq!(back, taps);
    }

    #[test]
    fn seventeen_significant_digits() {
        let taps = FilterTaps::new(vec![0.1, -1.0 / 3.0], 2).unwrap();
        let text = format_taps_csv(&taps);
        let first = text.lines().next().unwrap();
        let mantissa = first.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_taps_csv("0.1\nabc\n", 2), Err(Error::Parse(_))));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_mask_json(&p, &MaskDefinition::reference()).unwrap();
        assert_eq!(read_mask_json(&p).unwrap(), MaskDefinition::reference());
        let t = dir.path().join("trace.csv");
        write_phase_trace(&t, &[0.0, 0.1], &[0.0, 0.09]).unwrap();
        assert_eq!(fs::read_to_string(&t).unwrap().lines().count(), 3);
    }
}
