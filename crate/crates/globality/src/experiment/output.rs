//! CSV output with provenance stamps.
//!
//! Every file starts with `#`-prefixed stamp lines (config hash, seed,
//! effective settings), then a header row, then data rows. Floats are
//! written with Rust's shortest-roundtrip formatting, which is exact and
//! platform-independent, so identical computations produce identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    stamp: &[String],
    header: &str,
    rows: &[String],
) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut out = String::new();
    for line in stamp {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    let mut file = std::fs::File::create(&path)?;
    file.write_all(out.as_bytes())?;
    Ok(path)
}

/// Read a `(index, value)` CSV back into a vector, ignoring stamp lines and
/// the header. Rows must appear in index order starting at zero.
pub fn read_direction_csv(path: &Path) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("{}: expected index,value rows", path.display())))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad index {idx:?}", path.display())))?;
        if idx != values.len() {
            return Err(Error::Config(format!(
                "{}: indices must be consecutive from 0, saw {idx} at row {}",
                path.display(),
                values.len()
            )));
        }
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad value {val:?}", path.display())))?;
        values.push(val);
    }
    if values.is_empty() {
        return Err(Error::EmptyCollection);
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_carry_stamp_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let stamp = vec!["# config_hash=00".to_string(), "# seed=1".to_string()];
        let rows = vec![format!("0,{}", fmt_f64(0.1)), format!("1,{}", fmt_f64(-2.5))];
        let path = write_csv(dir.path(), "direction.csv", &stamp, "index,value", &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "# config_hash=00\n# seed=1\nindex,value\n0,0.1\n1,-2.5\n");

        let v = read_direction_csv(&path).unwrap();
        assert_eq!(v.as_slice(), &[0.1, -2.5]);
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -4041.25] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn direction_reader_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "index,value\n0,1.0\n2,2.0\n").unwrap();
        assert!(read_direction_csv(&path).is_err());
        std::fs::write(&path, "index,value\n").unwrap();
        assert!(matches!(read_direction_csv(&path), Err(Error::EmptyCollection)));
    }
}
