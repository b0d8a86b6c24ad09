use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::simkit::grid::GridSpec;

pub const DUMP_MAGIC: &[u8; 4] = b"GEXT";
pub const DUMP_VERSION: u16 = 1;

/// Values of a process or field on every point of a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    /// Write the binary dump: `GEXT`, version (u16), `d` (u16), per-axis counts
    /// (u32, at least two slots so the header is 16 bytes for `d <= 2`), then the
    /// values as little-endian f64.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.grid.dim();
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(d as u16).to_le_bytes())?;
        let shape = self.grid.shape();
        for i in 0..d.max(2) {
            let n = shape.get(i).copied().unwrap_or(0) as u32;
            w.write_all(&n.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Read a dump written by [`SamplePath::write_dump`], returning the shape and values.
pub fn read_dump<R: Read>(mut r: R) -> io::Result<(Vec<usize>, Vec<f64>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    if &head[..4] != DUMP_MAGIC {
        return Err(bad("missing GEXT magic"));
    }
    if u16::from_le_bytes([head[4], head[5]]) != DUMP_VERSION {
        return Err(bad("unsupported dump version"));
    }
    let d = u16::from_le_bytes([head[6], head[7]]) as usize;
    let mut shape = Vec::with_capacity(d);
    let mut buf = [0u8; 4];
    for i in 0..d.max(2) {
        r.read_exact(&mut buf)?;
        if i < d {
            shape.push(u32::from_le_bytes(buf) as usize);
        }
    }
    let n: usize = shape.iter().product();
    let mut values = Vec::with_capacity(n);
    let mut b8 = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok((shape, values))
}
