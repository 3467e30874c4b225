use nalgebra::DMatrix;
use petgraph::graph::DiGraph;
use petgraph::visit::Dfs;
use serde::Serialize;

use super::field::FieldMatrix;
use super::system::KppSystem;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub passed: bool,
    pub witness: Option<String>,
}

impl Check {
    fn pass() -> Self {
        Self {
            passed: true,
            witness: None,
        }
    }

    fn fail(w: impl Into<String>) -> Self {
        Self {
            passed: false,
            witness: Some(w.into()),
        }
    }
}

/// Extrema of the coefficients and the status of A1–A5.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// Smallest eigenvalue of any `A_i`.
    pub ellipticity: f64,
    pub l_lower: Vec<Vec<f64>>,
    pub l_upper: Vec<Vec<f64>>,
    pub b_lower: Vec<Vec<f64>>,
    /// Smallest positive entry of `l_upper`.
    pub sigma: Option<f64>,
    pub samples: usize,
    pub a1_ellipticity: Check,
    pub a2_cooperative: Check,
    pub a3_irreducible: Check,
    pub a4_competition: Check,
    pub a5_regularity: Check,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }

    pub fn checks(&self) -> [(&'static str, &Check); 5] {
        [
            ("A1", &self.a1_ellipticity),
            ("A2", &self.a2_cooperative),
            ("A3", &self.a3_irreducible),
            ("A4", &self.a4_competition),
            ("A5", &self.a5_regularity),
        ]
    }

    /// First failed assumption as an error.
    pub fn require(&self) -> Result<()> {
        for (which, c) in self.checks() {
            if !c.passed {
                return Err(Error::Assumption {
                    which,
                    witness: c.witness.clone().unwrap_or_default(),
                });
            }
        }
        Ok(())
    }
}

/// Samples every coefficient on a uniform grid of `factor × (kmax + 1)` points
/// per axis, refines the extrema locally and checks the standing assumptions.
pub fn validate_assumptions(sys: &KppSystem, sampling_factor: usize) -> Result<AssumptionReport> {
    if sampling_factor < 4 {
        return Err(Error::invalid(format!("sampling factor must be at least 4, got {sampling_factor}")));
    }
    let (nc, n) = (sys.n_comp(), sys.dim());
    let mut kt = 0u64;
    let mut kx = vec![0u64; n];
    for f in sys.fields() {
        let (ft, fx) = f.max_frequencies();
        kt = kt.max(ft);
        kx.iter_mut().zip(fx).for_each(|(a, b)| *a = (*a).max(b));
    }
    let counts: Vec<usize> = std::iter::once(kt).chain(kx).map(|k| sampling_factor * (k as usize + 1)).collect();
    let spans: Vec<f64> = std::iter::once(sys.temporal_period())
        .chain(sys.spatial_periods().iter().copied())
        .collect();
    let total: usize = counts.iter().product();

    let mut ell = f64::INFINITY;
    let mut ell_at = (0usize, vec![0.0; n + 1]);
    let mut l_lo = vec![vec![(f64::INFINITY, Vec::new()); nc]; nc];
    let mut l_hi = vec![vec![(f64::INFINITY, Vec::new()); nc]; nc];
    let mut b_lo = vec![vec![(f64::INFINITY, Vec::new()); nc]; nc];
    let keep = |slot: &mut (f64, Vec<f64>), v: f64, p: &[f64]| {
        if v < slot.0 {
            *slot = (v, p.to_vec());
        }
    };
    let mut idx = vec![0usize; n + 1];
    let mut p = vec![0.0; n + 1];
    for _ in 0..total {
        for a in 0..=n {
            p[a] = idx[a] as f64 * spans[a] / counts[a] as f64;
        }
        for i in 0..nc {
            let v = min_eig(sys, i, &p);
            if v < ell {
                ell = v;
                ell_at = (i, p.clone());
            }
            for j in 0..nc {
                keep(&mut l_lo[i][j], sys.coupling().get(i, j).value(p[0], &p[1..]), &p);
                keep(&mut l_hi[i][j], -sys.coupling().get(i, j).value(p[0], &p[1..]), &p);
                keep(&mut b_lo[i][j], sys.competition().get(i, j).value(p[0], &p[1..]), &p);
            }
        }
        for (d, c) in idx.iter_mut().zip(&counts) {
            *d += 1;
            if *d < *c {
                break;
            }
            *d = 0;
        }
    }

    // Grid extrema are only O(h²) accurate; polish each one locally.
    let h: Vec<f64> = spans.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
    let (ell, ell_p) = polish(|q| min_eig(sys, ell_at.0, q), &ell_at.1, &h);
    let ell_at = (ell_at.0, ell_p[0], ell_p[1..].to_vec());
    let l_lo = polish_all(l_lo, 1.0, sys.coupling(), &h);
    let l_hi = polish_all(l_hi, -1.0, sys.coupling(), &h);
    let b_lo = polish_all(b_lo, 1.0, sys.competition(), &h);

    let a1 = if ell > 0.0 {
        Check::pass()
    } else {
        Check::fail(format!(
            "A[{}] has eigenvalue {ell:.6e} at t={}, x={:?}",
            ell_at.0, ell_at.1, ell_at.2
        ))
    };

    let mut a2 = Check::pass();
    'outer: for (i, row) in l_lo.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j && *v < 0.0 {
                a2 = Check::fail(format!("min L[{i}][{j}] = {v:.6e} < 0"));
                break 'outer;
            }
        }
    }

    let a3 = irreducibility(&l_hi);

    let mut a4 = Check::pass();
    'outer4: for (i, row) in b_lo.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v <= 0.0 {
                a4 = Check::fail(format!("min B[{i}][{j}] = {v:.6e} is not positive"));
                break 'outer4;
            }
        }
    }

    let sigma = l_hi.iter().flatten().copied().filter(|v| *v > 0.0).reduce(f64::min);

    Ok(AssumptionReport {
        ellipticity: ell,
        l_lower: l_lo,
        l_upper: l_hi,
        b_lower: b_lo,
        sigma,
        samples: total,
        a1_ellipticity: a1,
        a2_cooperative: a2,
        a3_irreducible: a3,
        // Trigonometric coefficients are smooth, and A is checked symmetric on construction.
        a5_regularity: Check::pass(),
        a4_competition: a4,
    })
}

fn min_eig(sys: &KppSystem, i: usize, p: &[f64]) -> f64 {
    let ai = sys.diffusion(i);
    let n = p.len() - 1;
    let m = DMatrix::from_fn(n, n, |r, c| ai.get(r, c).value(p[0], &p[1..]));
    if n == 1 {
        m[(0, 0)]
    } else {
        m.symmetric_eigenvalues().min()
    }
}

/// Polishes the grid minima of `sign · m[i][j]` and returns the extrema of `m`.
fn polish_all(grid: Vec<Vec<(f64, Vec<f64>)>>, sign: f64, m: &FieldMatrix, h: &[f64]) -> Vec<Vec<f64>> {
    grid.into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, (_, at))| sign * polish(|q| sign * m.get(i, j).value(q[0], &q[1..]), &at, h).0)
                .collect()
        })
        .collect()
}

/// Compass search for a local minimum of `f` from `start`, with initial steps
/// `h` per axis. Returns the minimum and where it sits.
fn polish(f: impl Fn(&[f64]) -> f64, start: &[f64], h: &[f64]) -> (f64, Vec<f64>) {
    let mut p = start.to_vec();
    let mut best = f(&p);
    let mut step: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    for _ in 0..200 {
        let mut moved = false;
        for a in 0..p.len() {
            for s in [1.0, -1.0] {
                let mut q = p.clone();
                q[a] += s * step[a];
                let v = f(&q);
                if v < best {
                    best = v;
                    p = q;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|v| *v *= 0.5);
            if step.iter().zip(h).all(|(s, h0)| *s < 1e-9 * h0) {
                break;
            }
        }
    }
    (best, p)
}

/// Strong connectivity of the graph with an edge j → i whenever `l[i][j] > 0`.
/// On failure the witness is an index set whose span the matrix leaves invariant.
fn irreducibility(l: &[Vec<f64>]) -> Check {
    let nc = l.len();
    if nc == 1 {
        return Check::pass();
    }
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..nc).map(|_| g.add_node(())).collect();
    for (i, row) in l.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j && *v > 0.0 {
                g.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    for &start in &nodes {
        let mut dfs = Dfs::new(&g, start);
        let mut reach = Vec::new();
        while let Some(v) = dfs.next(&g) {
            reach.push(v.index());
        }
        if reach.len() < nc {
            reach.sort_unstable();
            let span: Vec<String> = reach.iter().map(|k| format!("e{}", k + 1)).collect();
            return Check::fail(format!("span({}) is invariant under L", span.join(", ")));
        }
    }
    Check::pass()
}
