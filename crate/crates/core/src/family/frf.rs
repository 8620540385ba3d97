//! Frequency-response data and its CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::FrequencyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrfFormat {
    ReIm,
    DbDeg,
}

impl FrfFormat {
    fn header(self) -> [&'static str; 3] {
        match self {
            FrfFormat::ReIm => ["freq_hz", "re", "im"],
            FrfFormat::DbDeg => ["freq_hz", "mag_db", "phase_deg"],
        }
    }
}

impl FromStr for FrfFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re_im" => Ok(FrfFormat::ReIm),
            "db_deg" => Ok(FrfFormat::DbDeg),
            other => Err(Error::InvalidParameter(format!("unknown FRF format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrfMetadata {
    /// Grams, when the response belongs to a payload sample.
    pub payload: Option<f64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfData {
    pub grid: FrequencyGrid,
    pub response: Vec<Complex64>,
    pub metadata: FrfMetadata,
}

impl FrfData {
    pub fn new(grid: FrequencyGrid, response: Vec<Complex64>, metadata: FrfMetadata) -> Result<Self> {
        if grid.len() != response.len() {
            return Err(Error::LengthMismatch(format!(
                "{} frequencies vs {} response values",
                grid.len(),
                response.len()
            )));
        }
        Ok(Self {
            grid,
            response,
            metadata,
        })
    }
}

/// Write `frf` as CSV. Lines in `comments` are emitted first, each prefixed
/// with `# `.
pub fn write_frf(path: &Path, frf: &FrfData, format: FrfFormat, comments: &[String]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(format.header()).map_err(wrap)?;
    for (&hz, g) in frf.grid.hz().iter().zip(&frf.response) {
        let (a, b) = match format {
            FrfFormat::ReIm => (g.re, g.im),
            FrfFormat::DbDeg => (20.0 * g.norm().log10(), g.arg().to_degrees()),
        };
        w.write_record([hz.to_string(), a.to_string(), b.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parse an FRF CSV with header `freq_hz,<a>,<b>`; `#` lines are skipped.
pub fn ingest_frf(path: &Path, format: FrfFormat) -> Result<FrfData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let name = path.display().to_string();
    let malformed = |line: u64, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if headers.len() != 3 || &headers[0] != "freq_hz" {
        return Err(malformed(1, format!("expected header freq_hz,<col2>,<col3>, got {headers:?}")));
    }
    let mut hz = Vec::new();
    let mut response = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        let mut vals = [0.0; 3];
        for (v, field) in vals.iter_mut().zip(record.iter()) {
            *v = field
                .parse::<f64>()
                .map_err(|_| malformed(line, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(malformed(line, format!("'{field}' is not finite")));
            }
        }
        hz.push(vals[0]);
        response.push(match format {
            FrfFormat::ReIm => Complex64::new(vals[1], vals[2]),
            FrfFormat::DbDeg => Complex64::from_polar(10f64.powf(vals[1] / 20.0), vals[2].to_radians()),
        });
    }
    if hz.is_empty() {
        return Err(Error::EmptyInput(format!("{name} has no data rows")));
    }
    let grid = FrequencyGrid::from_hz(hz)?;
    FrfData::new(
        grid,
        response,
        FrfMetadata {
            payload: None,
            source: name,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_text(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn single_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "a.csv", "freq_hz,re,im\n100,1,0\n");
        let f = ingest_frf(&p, FrfFormat::ReIm).unwrap();
        assert_eq!(f.response, vec![Complex64::new(1.0, 0.0)]);
        assert!((f.grid.omega()[0] - 2.0 * std::f64::consts::PI * 100.0).abs() < 1e-12);
        let p = write_text(&dir, "b.csv", "# note\nfreq_hz,mag_db,phase_deg\n100,0,-90\n");
        let f = ingest_frf(&p, FrfFormat::DbDeg).unwrap();
        assert!((f.response[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir, "dec.csv", "freq_hz,re,im\n200,1,0\n100,1,0\n");
        assert!(matches!(ingest_frf(&p, FrfFormat::ReIm), Err(Error::InvalidGrid(_))));
        let p = write_text(&dir, "bad.csv", "freq_hz,re,im\n100,1,0\n200,x,0\n");
        match ingest_frf(&p, FrfFormat::ReIm) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write_text(&dir, "empty.csv", "freq_hz,re,im\n");
        assert!(matches!(ingest_frf(&p, FrfFormat::ReIm), Err(Error::EmptyInput(_))));
        assert!(ingest_frf(&dir.path().join("missing.csv"), FrfFormat::ReIm).is_err());
    }

    #[test]
    fn re_im_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = FrequencyGrid::log_hz(1.0, 5000.0, 97).unwrap();
        let response: Vec<Complex64> = grid
            .omega()
            .iter()
            .map(|w| Complex64::new(1.0, 0.0) / Complex64::new(1.0 - w * w / 1e6, w * 3e-5))
            .collect();
        let frf = FrfData::new(grid, response, FrfMetadata::default()).unwrap();
        let p = dir.path().join("rt.csv");
        write_frf(&p, &frf, FrfFormat::ReIm, &["config_hash=abc".into()]).unwrap();
        let back = ingest_frf(&p, FrfFormat::ReIm).unwrap();
        assert_eq!(back.response, frf.response);
        assert_eq!(back.grid.hz(), frf.grid.hz());
        assert_eq!(back.grid.omega(), frf.grid.omega());
    }
}
