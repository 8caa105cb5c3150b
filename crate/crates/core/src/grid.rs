//! Row-major 2-D `f64` grid and its on-disk formats.
//!
//! Binary layout: one ASCII header line
//! `NCNNGRID rows=<r> cols=<c> dtype=f64le [key=value ...]\n` followed by
//! `rows·cols` little-endian `f64` values in row-major order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &str = "NCNNGRID";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid {rows}x{cols} needs {expected} values, got {actual}")]
    Length {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("grid dimensions differ: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("malformed grid header: {0}")]
    Header(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GridError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(GridError::Length {
                rows,
                cols,
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        if self.dims() != other.dims() {
            return Err(GridError::DimMismatch(self.dims(), other.dims()));
        }
        Ok(Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Extra `key=value` header fields; keys and values must not contain whitespace or `=`.
pub type HeaderFields = BTreeMap<String, String>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridError + '_ {
    move |source| GridError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_grid(path: &Path, grid: &Grid, fields: &HeaderFields) -> Result<()> {
    let mut header = format!("{MAGIC} rows={} cols={} dtype=f64le", grid.rows, grid.cols);
    for (k, v) in fields {
        if k.is_empty() || v.is_empty() || k.contains(['=', ' ', '\n', '\t']) || v.contains([' ', '\n', '\t']) {
            return Err(GridError::Header(format!("unusable field {k:?}={v:?}")));
        }
        header.push_str(&format!(" {k}={v}"));
    }
    header.push('\n');
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    out.write_all(header.as_bytes()).map_err(io_err(path))?;
    for v in &grid.data {
        out.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_grid(path: &Path) -> Result<(Grid, HeaderFields)> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(io_err(path))?;
    let mut parts = line.trim_end_matches('\n').split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(GridError::Header(format!("{} does not start with {MAGIC}", path.display())));
    }
    let mut fields = HeaderFields::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| GridError::Header(format!("field without '=': {p:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let dim = |key: &str, fields: &mut HeaderFields| -> Result<usize> {
        fields
            .remove(key)
            .ok_or_else(|| GridError::Header(format!("missing {key}")))?
            .parse()
            .map_err(|_| GridError::Header(format!("bad {key}")))
    };
    let rows = dim("rows", &mut fields)?;
    let cols = dim("cols", &mut fields)?;
    match fields.remove("dtype").as_deref() {
        Some("f64le") => {}
        other => return Err(GridError::Header(format!("unsupported dtype {other:?}"))),
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != rows * cols * 8 {
        return Err(GridError::Header(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            rows * cols * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Grid::new(rows, cols, data)?, fields))
}

/// One CSV line per row; values use Rust's shortest round-trip formatting.
pub fn write_grid_csv(path: &Path, grid: &Grid) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in 0..grid.rows {
        let line: Vec<String> = grid.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// 8-bit greyscale rendering with rows on the x axis and column 0 at the bottom.
///
/// Values are min-max scaled for display; a flat grid (or `blank`) renders black.
pub fn write_grid_png(path: &Path, grid: &Grid, blank: bool) -> Result<()> {
    let (lo, hi) = (grid.min(), grid.max());
    let span = hi - lo;
    let flat = blank || !span.is_finite() || span <= 0.0;
    let (w, h) = (grid.rows as u32, grid.cols as u32);
    let img = image::GrayImage::from_fn(w, h, |x, y| {
        if flat {
            return image::Luma([0]);
        }
        let v = grid.get(x as usize, (h - 1 - y) as usize);
        image::Luma([(((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| GridError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grid");
        let g = Grid::from_fn(3, 5, |r, c| (r as f64 * 0.1 - c as f64).exp() - 1.0 / 3.0);
        let mut fields = HeaderFields::new();
        fields.insert("name".into(), "I".into());
        fields.insert("degenerate".into(), "0".into());
        write_grid(&path, &g, &fields).unwrap();
        let (back, meta) = read_grid(&path).unwrap();
        assert_eq!(back.dims(), (3, 5));
        for (a, b) in g.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(meta, fields);
    }

    #[test]
    fn header_is_one_text_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grid");
        write_grid(&path, &Grid::filled(2, 2, 1.0), &HeaderFields::new()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|b| *b == b'\n').unwrap();
        assert_eq!(&bytes[..nl], b"NCNNGRID rows=2 cols=2 dtype=f64le");
        assert_eq!(bytes.len(), nl + 1 + 32);
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grid");
        std::fs::write(&path, b"NCNNGRID rows=2 cols=2 dtype=f64le\n\0\0\0").unwrap();
        assert!(matches!(read_grid(&path), Err(GridError::Header(_))));
    }

    #[test]
    fn png_orientation_and_blank() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let g = Grid::new(2, 3, vec![0.0, 1.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        write_grid_png(&path, &g, false).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (2, 3));
        assert_eq!(img.get_pixel(0, 0).0, [255]);
        assert_eq!(img.get_pixel(0, 2).0, [0]);
        write_grid_png(&path, &g, true).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        assert!(img.pixels().all(|p| p.0 == [0]));
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        write_grid_csv(&path, &Grid::new(2, 2, vec![0.5, -1.0, 2.0, 0.1]).unwrap()).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "0.5,-1\n2,0.1\n");
    }
}
