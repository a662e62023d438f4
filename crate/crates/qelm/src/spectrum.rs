//! Transmission spectra and the labeled-dataset container with its on-disk
//! CSV format.
//!
//! File layout: a `# seed=<u64> nbins=<n>` header line, one line holding the
//! shared wavelength grid, then one row per spectrum with the seven parameter
//! columns (log10 mixing ratios, mass, radius, temperature) followed by the
//! transit depths. Values are written in shortest round-trip form, so a
//! write/read cycle is bitwise lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{AtmosphericParams, PARAM_COUNT};

/// A transmission spectrum: strictly increasing wavelengths in micrometers
/// and one dimensionless transit depth per bin, optionally labeled with the
/// parameters that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub wavelengths: Vec<f64>,
    pub depths: Vec<f64>,
    pub params: Option<AtmosphericParams>,
}

impl Spectrum {
    pub fn new(
        wavelengths: Vec<f64>,
        depths: Vec<f64>,
        params: Option<AtmosphericParams>,
    ) -> Result<Self> {
        if wavelengths.len() != depths.len() {
            return Err(Error::Shape(format!(
                "wavelengths ({}) and depths ({}) differ in length",
                wavelengths.len(),
                depths.len()
            )));
        }
        if wavelengths.is_empty() {
            return Err(Error::Shape("empty spectrum".into()));
        }
        if wavelengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Numeric("wavelengths not strictly increasing".into()));
        }
        if depths.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::Numeric("depths must be finite and positive".into()));
        }
        Ok(Spectrum {
            wavelengths,
            depths,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

/// Labeled spectra sharing one wavelength grid, plus the seed that generated
/// them.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDataset {
    pub wavelengths: Vec<f64>,
    pub spectra: Vec<Spectrum>,
    pub seed: u64,
}

impl SpectralDataset {
    pub fn new(wavelengths: Vec<f64>, spectra: Vec<Spectrum>, seed: u64) -> Result<Self> {
        for (i, s) in spectra.iter().enumerate() {
            if s.wavelengths != wavelengths {
                return Err(Error::Shape(format!("spectrum {i} is not on the shared grid")));
            }
            if s.params.is_none() {
                return Err(Error::Shape(format!("spectrum {i} is unlabeled")));
            }
        }
        Ok(SpectralDataset {
            wavelengths,
            spectra,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    /// Labels of all member spectra, in order.
    pub fn labels(&self) -> Vec<AtmosphericParams> {
        self.spectra.iter().map(|s| s.params.expect("labeled")).collect()
    }
}

fn push_csv(line: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
}

/// Writes the dataset in the documented CSV layout.
pub fn write_dataset(ds: &SpectralDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# seed={} nbins={}", ds.seed, ds.wavelengths.len());
    let mut line = String::new();
    push_csv(&mut line, &ds.wavelengths);
    out.push_str(&line);
    out.push('\n');
    for s in &ds.spectra {
        line.clear();
        let p = s.params.expect("dataset spectra are labeled");
        push_csv(&mut line, &p.to_array());
        line.push(',');
        let mut depths = String::new();
        push_csv(&mut depths, &s.depths);
        line.push_str(&depths);
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("bad float {tok:?}")))
        })
        .collect()
}

/// Reads a dataset written by [`write_dataset`]. Errors name the offending
/// line for malformed headers, grid mismatches, and truncated rows.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<SpectralDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let rest = header
        .strip_prefix("# seed=")
        .ok_or_else(|| Error::parse(path, 1, "expected `# seed=<u64> nbins=<n>` header"))?;
    let mut parts = rest.split_whitespace();
    let seed: u64 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "bad seed in header"))?;
    let nbins: usize = parts
        .next()
        .and_then(|t| t.strip_prefix("nbins="))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "bad nbins in header"))?;

    let (_, grid_line) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing wavelength grid line"))?;
    let wavelengths = parse_row(path, 2, grid_line)?;
    if wavelengths.len() != nbins {
        return Err(Error::parse(
            path,
            2,
            format!("grid has {} bins, header says {nbins}", wavelengths.len()),
        ));
    }

    let mut spectra = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(path, line_no, line)?;
        if row.len() != PARAM_COUNT + nbins {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "row has {} columns, expected {} (7 parameters + {nbins} depths)",
                    row.len(),
                    PARAM_COUNT + nbins
                ),
            ));
        }
        let mut label = [0.0; PARAM_COUNT];
        label.copy_from_slice(&row[..PARAM_COUNT]);
        let spectrum = Spectrum::new(
            wavelengths.clone(),
            row[PARAM_COUNT..].to_vec(),
            Some(AtmosphericParams::from_array(label)),
        )
        .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        spectra.push(spectrum);
    }
    if spectra.is_empty() {
        return Err(Error::parse(path, 2, "dataset holds no spectra"));
    }
    SpectralDataset::new(wavelengths, spectra, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> SpectralDataset {
        let grid = vec![1.0, 2.0, 3.0];
        let p = AtmosphericParams {
            ch4: -3.0,
            co2: -4.0,
            co: -5.0,
            h2o: -2.0,
            mass: 1.1,
            radius: 1.2,
            temp: 1400.0,
        };
        let spectra = vec![
            Spectrum::new(grid.clone(), vec![0.01, 0.011, 0.0105], Some(p)).unwrap(),
            Spectrum::new(grid.clone(), vec![0.02, 0.021, 0.0205], Some(p)).unwrap(),
        ];
        SpectralDataset::new(grid, spectra, 42).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = tiny_dataset();
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn mismatched_column_count_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "# seed=1 nbins=2\n1.0,2.0\n-3,-4,-5,-2,1.1,1.2,1400,0.01,0.02\n-3,-4,-5,-2,1.1,1.2,1400,0.01\n",
        )
        .unwrap();
        let err = read_dataset(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).is_err());
    }

    #[test]
    fn malformed_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "seed=1 nbins=2\n1.0,2.0\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.1], None).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0], vec![0.1, 0.2], None).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.1, -0.2], None).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![0.1, f64::NAN], None).is_err());
    }
}
