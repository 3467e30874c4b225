use crate::frame::FrameSystem;
use crate::pde::{Grid, GridField};

/// Samples of a `z`-periodic function on the lattice `z = m dz`, `[i][k][p]`
/// with `p = m mod n_cell`.
#[derive(Clone, Debug)]
pub struct CellFunction {
    pub n_comp: usize,
    pub n_t: usize,
    pub n_cell: usize,
    data: Vec<f64>,
}

impl CellFunction {
    /// From an eigenfunction on a periodic cell or a single homogeneous node.
    pub fn from_field(u: &GridField) -> Self {
        Self {
            n_comp: u.n_comp,
            n_t: u.grid.n_t,
            n_cell: u.grid.n_z,
            data: u.data.clone(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize, m: i64) -> f64 {
        let p = m.rem_euclid(self.n_cell as i64) as usize;
        self.data[(i * self.n_t + k) * self.n_cell + p]
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

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `(a − b) / h`, elementwise.
    pub fn difference(a: &Self, b: &Self, h: f64) -> Self {
        Self {
            data: a.data.iter().zip(&b.data).map(|(x, y)| (x - y) / h).collect(),
            ..a.clone()
        }
    }
}

/// Lattice index of node `j` of an interval grid.
#[inline]
pub fn lattice_index(grid: &Grid, j: usize) -> i64 {
    j as i64 - (grid.n_z as i64 - 1) / 2
}

/// Field on an interval grid from a function of `(i, k, m)`.
pub fn materialize(grid: &Grid, n_comp: usize, f: impl Fn(usize, usize, i64) -> f64) -> GridField {
    GridField::from_fn(*grid, n_comp, |i, k, j| f(i, k, lattice_index(grid, j)))
}

/// `B'` at every node of a grid, `[k][j][i][s]`.
#[derive(Clone, Debug)]
pub struct Competition {
    pub n_comp: usize,
    pub n_t: usize,
    pub n_z: usize,
    data: Vec<f64>,
}

impl Competition {
    pub fn new(fsys: &FrameSystem, grid: &Grid) -> Self {
        let (nc, nt, nz) = (fsys.n_comp, grid.n_t, grid.n_z);
        let n = fsys.dim();
        let mut x = vec![0.0; n];
        let mut data = Vec::with_capacity(nt * nz * nc * nc);
        for k in 0..nt {
            for j in 0..nz {
                x[n - 1] = grid.z(j);
                for i in 0..nc {
                    for s in 0..nc {
                        data.push(fsys.b.get(i, s).value(grid.t(k), &x));
                    }
                }
            }
        }
        Self {
            n_comp: nc,
            n_t: nt,
            n_z: nz,
            data,
        }
    }

    #[inline]
    pub fn block(&self, k: usize, j: usize) -> &[f64] {
        let nc2 = self.n_comp * self.n_comp;
        let at = (k * self.n_z + j) * nc2;
        &self.data[at..at + nc2]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(B' v)_i` at `(k, j)`.
    pub fn apply(&self, k: usize, j: usize, v: &GridField, i: usize) -> f64 {
        let b = self.block(k, j);
        (0..self.n_comp).map(|s| b[i * self.n_comp + s] * v.get(s, k, j)).sum()
    }
}
