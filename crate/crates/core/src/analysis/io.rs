//! `.wts` binary fields, CSV series and atomic file writes.
//!
//! `.wts` layout (little endian): `b"WTSF"`, `u32` version, `u32` Nx, Ny, n,
//! `f64` t, then Nx·Ny·n `f64` values, ζ-major, components innermost.

use std::io::Write;
use std::path::Path;

use crate::field::{Field2D, Grid2D};
use crate::sim2d::WeightedNormSeries;
use crate::{Error, Result};

pub const WTS_MAGIC: &[u8; 4] = b"WTSF";
pub const WTS_VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|s| s.to_str()).unwrap_or(""),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn encode_wts(field: &Field2D) -> Vec<u8> {
    let g = field.grid;
    let mut out = Vec::with_capacity(28 + 8 * field.data.len());
    out.extend_from_slice(WTS_MAGIC);
    out.extend_from_slice(&WTS_VERSION.to_le_bytes());
    for v in [g.nx as u32, g.ny as u32, field.n as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&field.t.to_le_bytes());
    for x in &field.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn write_wts(path: &Path, field: &Field2D) -> Result<()> {
    write_atomic(path, &encode_wts(field))
}

/// Raw contents of a `.wts` file (the box lengths are not stored).
#[derive(Debug, Clone, PartialEq)]
pub struct WtsData {
    pub nx: usize,
    pub ny: usize,
    pub n: usize,
    pub t: f64,
    pub data: Vec<f64>,
}

impl WtsData {
    pub fn into_field(self, lx: f64, ly: f64) -> Result<Field2D> {
        let grid = Grid2D::new(lx, ly, self.nx, self.ny)?;
        let mut f = Field2D::zeros(grid, self.n);
        f.t = self.t;
        f.data = self.data;
        Ok(f)
    }
}

pub fn decode_wts(bytes: &[u8]) -> Result<WtsData> {
    let bad = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 28 || &bytes[..4] != WTS_MAGIC {
        return Err(bad("missing WTSF header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != WTS_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (nx, ny, n) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let t = f64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
    let len = nx * ny * n;
    if bytes.len() != 28 + 8 * len {
        return Err(bad(&format!("expected {} bytes, found {}", 28 + 8 * len, bytes.len())));
    }
    let data = bytes[28..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(WtsData { nx, ny, n, t, data })
}

pub fn read_wts(path: &Path) -> Result<WtsData> {
    decode_wts(&std::fs::read(path).map_err(|e| io_err(path, e))?)
}

/// Rows `t,value,derivative_order,weight_kind,boundary_flag` for each series.
pub fn series_csv(series: &[&WeightedNormSeries]) -> String {
    let mut s = String::from("t,value,derivative_order,weight_kind,M,boundary_flag\n");
    for ser in series {
        for i in 0..ser.times.len() {
            s.push_str(&format!(
                "{:.10e},{:.10e},{},{},{},{}\n",
                ser.times[i],
                ser.values[i],
                ser.quantity,
                ser.weight_kind.name(),
                ser.m,
                ser.boundary[i] as u8
            ));
        }
    }
    s
}

/// Plain two-column-or-more CSV from a header and rows.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:.10e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
