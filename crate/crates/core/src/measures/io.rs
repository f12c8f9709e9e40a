use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Measure;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// JSON layout of a measure file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureFile<T> {
    pub dim: usize,
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

fn parse<T: Real>(field: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|e| Error::Malformed {
            line,
            message: format!("cannot parse {field:?}: {e}"),
        })
}

fn raw_sum_check<T: Real>(weights: &[T]) -> Result<()> {
    let sum: f64 = weights.iter().map(|w| w.as_f64()).sum();
    if (sum - 1.0).abs() > super::WEIGHT_SUM_TOL {
        return Err(Error::WeightSum { sum });
    }
    Ok(())
}

/// Reads a measure. CSV files carry the header `w,x1,...,xd`.
pub fn read_measure<T: Real>(path: impl AsRef<Path>, format: Format) -> Result<Measure<T>> {
    let path = path.as_ref();
    match format {
        Format::Json => {
            let file: MeasureFile<f64> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
            if let Some((i, p)) = file.points.iter().enumerate().find(|(_, p)| p.len() != file.dim) {
                return Err(Error::DimensionMismatch(format!(
                    "atom {i} has {} coordinates, header says {}",
                    p.len(),
                    file.dim
                )));
            }
            if file.points.len() != file.weights.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} points but {} weights",
                    file.points.len(),
                    file.weights.len()
                )));
            }
            let weights: Vec<T> = file.weights.into_iter().map(T::lit).collect();
            raw_sum_check(&weights)?;
            let points = file
                .points
                .into_iter()
                .map(|p| p.into_iter().map(T::lit).collect())
                .collect();
            Measure::new(file.dim, points, weights)
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .trim(csv::Trim::All)
                .from_path(path)?;
            let header = reader.headers()?.clone();
            let dim = header.len().saturating_sub(1);
            let expected: Vec<String> = std::iter::once("w".to_string())
                .chain((1..=dim).map(|k| format!("x{k}")))
                .collect();
            if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
                return Err(Error::Malformed {
                    line: 1,
                    message: format!("expected header {:?}", expected.join(",")),
                });
            }
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            for (k, record) in reader.records().enumerate() {
                let record = record?;
                let line = k + 2;
                if record.len() != header.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "line {line} has {} fields, header has {}",
                        record.len(),
                        header.len()
                    )));
                }
                weights.push(parse::<T>(&record[0], line)?);
                for field in record.iter().skip(1) {
                    coords.push(parse::<T>(field, line)?);
                }
            }
            raw_sum_check(&weights)?;
            Measure::from_flat(dim, coords, weights)
        }
    }
}

pub fn write_measure<T: Real>(m: &Measure<T>, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Json => {
            let file = MeasureFile {
                dim: m.dim(),
                points: m.points().map(<[T]>::to_vec).collect(),
                weights: m.weights().to_vec(),
            };
            serde_json::to_writer_pretty(&mut out, &file)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let header: Vec<String> = std::iter::once("w".to_string())
                .chain((1..=m.dim()).map(|k| format!("x{k}")))
                .collect();
            writeln!(out, "{}", header.join(","))?;
            for (p, w) in m.points().zip(m.weights()) {
                write!(out, "{w}")?;
                for c in p {
                    write!(out, ",{c}")?;
                }
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads bare evaluation points (header `x1,...,xd`; a leading `w`
/// column is accepted and ignored). Returns the dimension and a flat buffer.
pub fn read_points<T: Real>(path: impl AsRef<Path>) -> Result<(usize, Vec<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let skip = usize::from(header.get(0) == Some("w"));
    let dim = header.len() - skip;
    if dim == 0 {
        return Err(Error::Malformed {
            line: 1,
            message: "no coordinate columns".into(),
        });
    }
    let mut coords = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch(format!(
                "line {} has {} fields, header has {}",
                k + 2,
                record.len(),
                header.len()
            )));
        }
        for field in record.iter().skip(skip) {
            coords.push(parse::<T>(field, k + 2)?);
        }
    }
    Ok((dim, coords))
}

pub fn write_points<T: Real>(dim: usize, coords: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in coords.chunks_exact(dim) {
        let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
