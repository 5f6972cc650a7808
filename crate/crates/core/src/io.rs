//! CSV and JSON files. Every CSV has a header row; numbers are written in the
//! shortest form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, PairSample, PointSet};
use crate::regression::DecayPoint;

/// Shortest round-trip decimal; exponent notation outside `[1e-5, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for row in rows {
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn parse_f64(s: &str, path: &Path, row: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("{}: row {}: `{s}` is not a number", path.display(), row + 1)))
}

fn parse_index(s: &str, path: &Path, row: usize) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Parse(format!("{}: row {}: `{s}` is not an index", path.display(), row + 1)))
}

fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        rows.push(rec.iter().map(|s| parse_f64(s, path, k)).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("{}: missing column `{name}`", path.display())))
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    let (_, rows) = read_numeric(path)?;
    PointSet::new(rows)
}

pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    let header = (0..points.dim()).map(|k| format!("x{k}")).collect::<Vec<_>>();
    write_rows(path, &header, points.iter().map(|p| p.iter().map(|&x| fmt_f64(x)).collect()))
}

/// Pairs CSV with columns `i,j` and an optional label column `y`.
pub fn read_pairs(path: &Path) -> Result<PairSample> {
    let mut r = reader(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let (ci, cj) = (column(&header, "i", path)?, column(&header, "j", path)?);
    let cy = header.iter().position(|h| h == "y");
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::Parse(format!("{}: short row {}", path.display(), k + 1)));
        pairs.push((parse_index(field(ci)?, path, k)?, parse_index(field(cj)?, path, k)?));
        if let Some(c) = cy {
            labels.push(parse_f64(field(c)?, path, k)?);
        }
    }
    PairSample::new(pairs, cy.map(|_| labels))
}

pub fn write_pairs(path: &Path, sample: &PairSample) -> Result<()> {
    let mut header = vec!["i".to_string(), "j".to_string()];
    if sample.labels().is_some() {
        header.push("y".into());
    }
    let rows = sample.pairs().iter().enumerate().map(|(a, &(i, j))| {
        let mut row = vec![i.to_string(), j.to_string()];
        if let Some(y) = sample.labels() {
            row.push(fmt_f64(y[a]));
        }
        row
    });
    write_rows(path, &header, rows)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let (header, rows) = read_numeric(path)?;
    let cols = header.len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{}: ragged matrix", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let header = (0..m.ncols()).map(|k| format!("c{k}")).collect::<Vec<_>>();
    write_rows(path, &header, (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect()))
}

/// Gram matrix CSV; the matrix must be square and exactly symmetric.
pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    let label = path.display().to_string();
    GramMatrix::from_matrix(read_matrix(path)?, label.clone(), label)
}

pub fn write_gram(path: &Path, g: &GramMatrix) -> Result<()> {
    write_matrix(path, &g.values)
}

pub fn write_spectrum(path: &Path, values: &[f64]) -> Result<()> {
    let header = ["index".to_string(), "eigenvalue".to_string()];
    write_rows(path, &header, values.iter().enumerate().map(|(i, &v)| vec![i.to_string(), fmt_f64(v)]))
}

/// Eigenvalues from a spectrum CSV (`eigenvalue` column).
pub fn read_spectrum(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_numeric(path)?;
    let c = column(&header, "eigenvalue", path)?;
    Ok(rows.iter().map(|r| r[c]).collect())
}

pub fn write_curve(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let header = ["lambda".to_string(), "effdim".to_string()];
    write_rows(path, &header, curve.iter().map(|&(l, n)| vec![fmt_f64(l), fmt_f64(n)]))
}

pub fn write_decay(path: &Path, curve: &[DecayPoint]) -> Result<()> {
    let header = ["n".to_string(), "sup_error".to_string()];
    write_rows(path, &header, curve.iter().map(|p| vec![p.n.to_string(), fmt_f64(p.sup_error)]))
}

pub fn write_coefficients(path: &Path, alpha: &[f64]) -> Result<()> {
    write_rows(path, &["alpha".to_string()], alpha.iter().map(|&a| vec![fmt_f64(a)]))
}

pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_numeric(path)?;
    let c = column(&header, "alpha", path)?;
    Ok(rows.iter().map(|r| r[c]).collect())
}

pub fn write_predictions(path: &Path, sample: &PairSample, values: &[f64]) -> Result<()> {
    let header = ["i".to_string(), "j".to_string(), "prediction".to_string()];
    let rows = sample
        .pairs()
        .iter()
        .zip(values)
        .map(|(&(i, j), &v)| vec![i.to_string(), j.to_string(), fmt_f64(v)]);
    write_rows(path, &header, rows)
}

/// Single-column target CSV (`y`), aligned with a pairs file.
pub fn write_targets(path: &Path, values: &[f64]) -> Result<()> {
    write_rows(path, &["y".to_string()], values.iter().map(|&y| vec![fmt_f64(y)]))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}
