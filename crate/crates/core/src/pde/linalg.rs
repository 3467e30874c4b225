//! Dense LU for the small per-node blocks, and a block-tridiagonal solver
//! whose off-diagonal blocks are diagonal (one entry per component).

use crate::error::{Error, Result};

/// LU factors with partial pivoting of a row-major `n × n` matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        let mut piv: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let (p, pv) = (c..n)
                .map(|r| (r, a[r * n + c].abs()))
                .fold((c, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            if !(pv > 0.0) || !pv.is_finite() {
                return Err(Error::Numerical("singular block in implicit step".into()));
            }
            if p != c {
                for k in 0..n {
                    a.swap(c * n + k, p * n + k);
                }
                piv.swap(c, p);
            }
            let d = a[c * n + c];
            for r in (c + 1)..n {
                let f = a[r * n + c] / d;
                a[r * n + c] = f;
                for k in (c + 1)..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
        Ok(Self { n, a, piv })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        if n == 1 {
            b[0] /= self.a[0];
            return;
        }
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s: f64 = (0..r).map(|k| self.a[r * n + k] * x[k]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|k| self.a[r * n + k] * x[k]).sum();
            x[r] = (x[r] - s) / self.a[r * n + r];
        }
        b.copy_from_slice(&x);
    }
}

/// Block-tridiagonal matrix with `m` block rows of size `nc`. Row `j` reads
/// `lower[j] ∘ x[j-1] + diag[j] x[j] + upper[j] ∘ x[j+1]`; with `periodic`
/// the indices wrap.
#[derive(Clone, Debug)]
pub struct BlockTri {
    pub m: usize,
    pub nc: usize,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: bool,
}

impl BlockTri {
    pub fn new(m: usize, nc: usize, periodic: bool) -> Self {
        Self {
            m,
            nc,
            lower: vec![0.0; m * nc],
            diag: vec![0.0; m * nc * nc],
            upper: vec![0.0; m * nc],
            periodic,
        }
    }

    /// `y = A x` with `x`, `y` node-major (`j * nc + i`).
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        let (m, nc) = (self.m, self.nc);
        for j in 0..m {
            for i in 0..nc {
                let mut s = 0.0;
                for c in 0..nc {
                    s += self.diag[(j * nc + i) * nc + c] * x[j * nc + c];
                }
                let left = if j > 0 {
                    Some(j - 1)
                } else if self.periodic {
                    Some(m - 1)
                } else {
                    None
                };
                let right = if j + 1 < m {
                    Some(j + 1)
                } else if self.periodic {
                    Some(0)
                } else {
                    None
                };
                if let Some(l) = left {
                    s += self.lower[j * nc + i] * x[l * nc + i];
                }
                if let Some(r) = right {
                    s += self.upper[j * nc + i] * x[r * nc + i];
                }
                y[j * nc + i] = s;
            }
        }
    }

    pub fn factor(&self) -> Result<BlockTriLu> {
        let (m, nc) = (self.m, self.nc);
        if self.periodic && m <= 2 {
            let n = m * nc;
            let mut dense = vec![0.0; n * n];
            let mut e = vec![0.0; n];
            let mut col = vec![0.0; n];
            for c in 0..n {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[c] = 1.0;
                self.mul(&e, &mut col);
                for r in 0..n {
                    dense[r * n + c] = col[r];
                }
            }
            return Ok(BlockTriLu {
                inner: Inner::Dense(Lu::new(n, dense)?),
                m,
                nc,
            });
        }
        let chain = Chain::factor(self)?;
        if !self.periodic {
            return Ok(BlockTriLu {
                inner: Inner::Chain(chain),
                m,
                nc,
            });
        }
        // Woodbury for the two corner blocks: A = T + U Vᵀ with U selecting
        // block rows 0 and m-1.
        let k = 2 * nc;
        let mut z = vec![vec![0.0; m * nc]; k];
        for (col, zc) in z.iter_mut().enumerate() {
            let row = if col < nc { col } else { (m - 1) * nc + (col - nc) };
            zc[row] = 1.0;
            chain.solve(zc);
        }
        let vt = |x: &[f64], out: &mut [f64]| {
            for i in 0..nc {
                out[i] = self.lower[i] * x[(m - 1) * nc + i];
                out[nc + i] = self.upper[(m - 1) * nc + i] * x[i];
            }
        };
        let mut cap = vec![0.0; k * k];
        let mut tmp = vec![0.0; k];
        for (c, zc) in z.iter().enumerate() {
            vt(zc, &mut tmp);
            for r in 0..k {
                cap[r * k + c] = tmp[r] + if r == c { 1.0 } else { 0.0 };
            }
        }
        let corners: Vec<f64> = (0..nc)
            .map(|i| self.lower[i])
            .chain((0..nc).map(|i| self.upper[(m - 1) * nc + i]))
            .collect();
        Ok(BlockTriLu {
            inner: Inner::Cyclic {
                chain,
                z,
                cap: Lu::new(k, cap)?,
                corners,
            },
            m,
            nc,
        })
    }
}

#[derive(Clone, Debug)]
struct Chain {
    m: usize,
    nc: usize,
    lower: Vec<f64>,
    s: Vec<Lu>,
    g: Vec<f64>,
}

impl Chain {
    fn factor(a: &BlockTri) -> Result<Self> {
        let (m, nc) = (a.m, a.nc);
        let mut s = Vec::with_capacity(m);
        let mut g = vec![0.0; m * nc * nc];
        let mut col = vec![0.0; nc];
        for j in 0..m {
            let mut blk = a.diag[j * nc * nc..(j + 1) * nc * nc].to_vec();
            if j > 0 {
                for r in 0..nc {
                    let l = a.lower[j * nc + r];
                    for c in 0..nc {
                        blk[r * nc + c] -= l * g[((j - 1) * nc + r) * nc + c];
                    }
                }
            }
            let lu = Lu::new(nc, blk)?;
            if j + 1 < m {
                for c in 0..nc {
                    col.iter_mut().for_each(|v| *v = 0.0);
                    col[c] = a.upper[j * nc + c];
                    lu.solve_in_place(&mut col);
                    for r in 0..nc {
                        g[(j * nc + r) * nc + c] = col[r];
                    }
                }
            }
            s.push(lu);
        }
        Ok(Self {
            m,
            nc,
            lower: a.lower.clone(),
            s,
            g,
        })
    }

    fn solve(&self, x: &mut [f64]) {
        let (m, nc) = (self.m, self.nc);
        for j in 0..m {
            if j > 0 {
                for i in 0..nc {
                    x[j * nc + i] -= self.lower[j * nc + i] * x[(j - 1) * nc + i];
                }
            }
            self.s[j].solve_in_place(&mut x[j * nc..(j + 1) * nc]);
        }
        for j in (0..m.saturating_sub(1)).rev() {
            for r in 0..nc {
                let mut acc = 0.0;
                for c in 0..nc {
                    acc += self.g[(j * nc + r) * nc + c] * x[(j + 1) * nc + c];
                }
                x[j * nc + r] -= acc;
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Dense(Lu),
    Chain(Chain),
    Cyclic {
        chain: Chain,
        z: Vec<Vec<f64>>,
        cap: Lu,
        corners: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct BlockTriLu {
    inner: Inner,
    m: usize,
    nc: usize,
}

impl BlockTriLu {
    /// Solves in place; `x` is node-major.
    pub fn solve(&self, x: &mut [f64]) {
        match &self.inner {
            Inner::Dense(lu) => lu.solve_in_place(x),
            Inner::Chain(c) => c.solve(x),
            Inner::Cyclic { chain, z, cap, corners } => {
                let (m, nc) = (self.m, self.nc);
                chain.solve(x);
                let mut w: Vec<f64> = (0..nc)
                    .map(|i| corners[i] * x[(m - 1) * nc + i])
                    .chain((0..nc).map(|i| corners[nc + i] * x[i]))
                    .collect();
                cap.solve_in_place(&mut w);
                for (zc, wc) in z.iter().zip(&w) {
                    if *wc != 0.0 {
                        for (xv, zv) in x.iter_mut().zip(zc) {
                            *xv -= wc * zv;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_system(m: usize, nc: usize, periodic: bool, seed: u64) -> BlockTri {
        let mut s = seed;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = BlockTri::new(m, nc, periodic);
        for v in a.lower.iter_mut().chain(a.upper.iter_mut()) {
            *v = rnd();
        }
        for j in 0..m {
            for r in 0..nc {
                for c in 0..nc {
                    a.diag[(j * nc + r) * nc + c] = rnd() + if r == c { 4.0 } else { 0.0 };
                }
            }
        }
        a
    }

    #[test]
    fn solves_match_multiplication() {
        for (m, nc, periodic) in [
            (1, 2, true),
            (2, 3, true),
            (7, 1, false),
            (9, 2, true),
            (12, 3, false),
            (30, 1, true),
        ] {
            let a = random_system(m, nc, periodic, (m * 31 + nc) as u64);
            let x: Vec<f64> = (0..m * nc).map(|k| (k as f64 * 0.7).cos()).collect();
            let mut b = vec![0.0; m * nc];
            a.mul(&x, &mut b);
            a.factor().unwrap().solve(&mut b);
            let err = x.iter().zip(&b).fold(0.0f64, |e, (p, q)| e.max((p - q).abs()));
            assert!(err < 1e-12, "m={m} nc={nc} periodic={periodic}: {err}");
        }
    }
}
