use std::io::{BufRead, Read, Write};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Values on a space-time grid, indexed `(component, t_index, z_index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub n_comp: usize,
    pub data: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"WKGF";
const VERSION: u32 = 1;

impl GridField {
    pub fn zeros(grid: Grid, n_comp: usize) -> Self {
        Self {
            grid,
            n_comp,
            data: vec![0.0; n_comp * grid.n_t * grid.n_z],
        }
    }

    pub fn from_fn(grid: Grid, n_comp: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(grid, n_comp);
        for i in 0..n_comp {
            for k in 0..grid.n_t {
                for j in 0..grid.n_z {
                    let idx = out.idx(i, k, j);
                    out.data[idx] = f(i, k, j);
                }
            }
        }
        out
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize, j: usize) -> usize {
        (i * self.grid.n_t + k) * self.grid.n_z + j
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.data[self.idx(i, k, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, j: usize, v: f64) {
        let idx = self.idx(i, k, j);
        self.data[idx] = v;
    }

    /// Spatial slice at time index `k`, component-major (`i * n_z + j`).
    pub fn slice_t(&self, k: usize) -> Vec<f64> {
        let nz = self.grid.n_z;
        let mut out = Vec::with_capacity(self.n_comp * nz);
        for i in 0..self.n_comp {
            let s = self.idx(i, k, 0);
            out.extend_from_slice(&self.data[s..s + nz]);
        }
        out
    }

    pub fn set_slice_t(&mut self, k: usize, v: &[f64]) {
        let nz = self.grid.n_z;
        for i in 0..self.n_comp {
            let s = self.idx(i, k, 0);
            self.data[s..s + nz].copy_from_slice(&v[i * nz..(i + 1) * nz]);
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            n_comp: self.n_comp,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            n_comp: self.n_comp,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Rows `component,t_index,z,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "component,t_index,z,value")?;
        for i in 0..self.n_comp {
            for k in 0..self.grid.n_t {
                for j in 0..self.grid.n_z {
                    writeln!(w, "{},{},{:e},{:e}", i, k, self.grid.z(j), self.get(i, k, j))?;
                }
            }
        }
        Ok(())
    }

    /// Reads values back into a field on a known grid.
    pub fn read_csv<R: BufRead>(grid: Grid, n_comp: usize, r: R) -> Result<Self> {
        let mut out = Self::zeros(grid, n_comp);
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "component,t_index,z,value" => {}
            _ => return Err(Error::invalid("missing GridField CSV header")),
        }
        let mut seen = 0usize;
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || Error::invalid(format!("bad CSV row {}: `{line}`", ln + 2));
            if parts.len() != 4 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let k: usize = parts[1].parse().map_err(|_| bad())?;
            let z: f64 = parts[2].parse().map_err(|_| bad())?;
            let v: f64 = parts[3].parse().map_err(|_| bad())?;
            if i >= n_comp || k >= grid.n_t {
                return Err(bad());
            }
            let j = nearest_node(&grid, z).ok_or_else(bad)?;
            out.set(i, k, j, v);
            seen += 1;
        }
        if seen != out.data.len() {
            return Err(Error::invalid(format!("expected {} rows, read {seen}", out.data.len())));
        }
        Ok(out)
    }

    /// Little-endian binary: magic, version, shape, grid, then values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let grid = serde_json::to_vec(&self.grid)?;
        w.write_all(&(grid.len() as u32).to_le_bytes())?;
        w.write_all(&grid)?;
        w.write_all(&(self.n_comp as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::invalid("not a GridField binary"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::invalid(format!("unsupported GridField version {version}")));
        }
        let glen = read_u32(&mut r)? as usize;
        let mut gbuf = vec![0u8; glen];
        r.read_exact(&mut gbuf)?;
        let grid: Grid = serde_json::from_slice(&gbuf)?;
        let n_comp = read_u32(&mut r)? as usize;
        let mut out = Self::zeros(grid, n_comp);
        let mut b = [0u8; 8];
        for v in out.data.iter_mut() {
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        Ok(out)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn nearest_node(grid: &Grid, z: f64) -> Option<usize> {
    if grid.n_z == 1 {
        return Some(0);
    }
    let j = ((z - grid.z(0)) / grid.dz()).round();
    (j >= 0.0 && (j as usize) < grid.n_z).then_some(j as usize)
}
