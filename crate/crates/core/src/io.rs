//! File formats: two-column profile text, flat little-endian `f64` fields
//! with a text header, CSV slices and JSON reports.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::ground_state::KirchhoffGroundState;
use crate::perturbed::grid::{Box3D, Field3D};
use crate::perturbed::EpsilonFrame;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed header: {message}")]
    Header { path: PathBuf, message: String },
    #[error("{path}: expected {expected} bytes, found {found}")]
    Size { path: PathBuf, expected: usize, found: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(fs_err(dir))?;
    }
    fs::write(path, text).map_err(fs_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// `r U(r)` per line after a `#` header with the parameters and constants.
pub fn profile_text(gs: &KirchhoffGroundState) -> String {
    let p = gs.params;
    let mut out = format!(
        "# a = {} b = {} p = {}\n# c = {:.15e} K = {:.15e} M = {:.15e} P = {:.15e}\n# r U(r)\n",
        p.a, p.b, p.p, gs.c, gs.k_u, gs.m_u, gs.p_u
    );
    for (r, u) in gs.grid().nodes().iter().zip(gs.u.values()) {
        out.push_str(&format!("{r:.10e} {u:.17e}\n"));
    }
    out
}

/// Parses the output of [`profile_text`] back into `(r, U)` columns.
pub fn read_profile(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let file = fs::File::open(path).map_err(fs_err(path))?;
    let (mut r, mut u) = (Vec::new(), Vec::new());
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(fs_err(path))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace().map(str::parse::<f64>);
        match (cols.next(), cols.next()) {
            (Some(Ok(a)), Some(Ok(b))) => {
                r.push(a);
                u.push(b);
            }
            _ => {
                return Err(IoError::Header {
                    path: path.to_path_buf(),
                    message: format!("line {}: expected two numbers", lineno + 1),
                })
            }
        }
    }
    Ok((r, u))
}

/// Header stored next to a binary field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub grid: Box3D,
    pub eps: Option<f64>,
    pub y: Option<[f64; 3]>,
}

impl FieldHeader {
    fn render(&self) -> String {
        let mut s = format!(
            "format = f64-le\nlayout = row-major (x, y, z), z fastest\nn = {}\nhalf_width = {}\nh = {}\n",
            self.grid.n,
            self.grid.half_width,
            self.grid.h()
        );
        if let Some(eps) = self.eps {
            s.push_str(&format!("eps = {eps}\n"));
        }
        if let Some(y) = self.y {
            s.push_str(&format!("y = {} {} {}\n", y[0], y[1], y[2]));
        }
        s
    }
}

fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

/// Writes `<path>` (raw values) and `<path>.hdr`.
pub fn write_field(path: &Path, field: &Field3D, frame: Option<&EpsilonFrame>) -> Result<(), IoError> {
    let header = FieldHeader { grid: field.grid, eps: frame.map(|f| f.eps), y: frame.map(|f| f.y) };
    write_text(&header_path(path), &header.render())?;
    let mut bytes = Vec::with_capacity(8 * field.values.len());
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(fs_err(path))?;
    f.write_all(&bytes).map_err(fs_err(path))
}

pub fn read_field(path: &Path) -> Result<(Field3D, FieldHeader), IoError> {
    let hpath = header_path(path);
    let text = fs::read_to_string(&hpath).map_err(fs_err(&hpath))?;
    let bad = |message: String| IoError::Header { path: hpath.clone(), message };
    let (mut n, mut half_width, mut eps, mut y) = (None, None, None, None);
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let value = value.trim();
        match key.trim() {
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(format!("n: {e}")))?),
            "half_width" => half_width = Some(value.parse::<f64>().map_err(|e| bad(format!("half_width: {e}")))?),
            "eps" => eps = Some(value.parse::<f64>().map_err(|e| bad(format!("eps: {e}")))?),
            "y" => {
                let v: Result<Vec<f64>, _> = value.split_whitespace().map(str::parse).collect();
                let v = v.map_err(|e| bad(format!("y: {e}")))?;
                if v.len() != 3 {
                    return Err(bad("y needs three components".into()));
                }
                y = Some([v[0], v[1], v[2]]);
            }
            _ => {}
        }
    }
    let n = n.ok_or_else(|| bad("missing n".into()))?;
    let half_width = half_width.ok_or_else(|| bad("missing half_width".into()))?;
    let grid = Box3D::new(half_width, n).map_err(|e| bad(e.to_string()))?;
    let bytes = fs::read(path).map_err(fs_err(path))?;
    if bytes.len() != 8 * grid.len() {
        return Err(IoError::Size { path: path.to_path_buf(), expected: 8 * grid.len(), found: bytes.len() });
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((Field3D::from_values(grid, values), FieldHeader { grid, eps, y }))
}

/// The plane `z₃ = 0` as CSV rows `z1,z2,value`.
pub fn slice_csv(field: &Field3D) -> String {
    let g = field.grid;
    let k = g.n / 2;
    let mut out = String::from("z1,z2,value\n");
    for i in 0..g.n {
        for j in 0..g.n {
            out.push_str(&format!("{},{},{:.12e}\n", g.coord(i), g.coord(j), field.values[g.index(i, j, k)]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Box3D::new(3.0, 7).unwrap();
        let f = Field3D::from_fn(g, |x| x[0] - 2.0 * x[1] + x[2] * x[2]);
        let path = dir.path().join("u.bin");
        write_field(&path, &f, None).unwrap();
        let (back, header) = read_field(&path).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(header.grid, g);
        assert_eq!(header.eps, None);
    }

    #[test]
    fn truncated_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = Box3D::new(3.0, 7).unwrap();
        let path = dir.path().join("u.bin");
        write_field(&path, &Field3D::zeros(g), None).unwrap();
        fs::write(&path, [0u8; 16]).unwrap();
        assert!(matches!(read_field(&path), Err(IoError::Size { .. })));
    }

    #[test]
    fn slice_has_one_row_per_node_pair() {
        let g = Box3D::new(3.0, 7).unwrap();
        assert_eq!(slice_csv(&Field3D::zeros(g)).lines().count(), 1 + 49);
    }
}
