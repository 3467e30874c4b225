use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::stepper::{steady_solve, Boundary, PeriodMap};
use crate::error::{Error, Result};
use crate::frame::OperatorSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BvpStrategy {
    /// Steady solve when nothing depends on time, relaxation otherwise.
    #[default]
    Auto,
    /// Implicit Euler over successive periods until the period map is stationary.
    Relaxation,
    /// Direct solve of the time-independent problem.
    Steady,
}

#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub u: GridField,
    pub periods: usize,
    pub history: Vec<f64>,
}

/// Time-periodic solution of `R_μ u = 0` with Dirichlet data `bnd` on an
/// interval grid (no data on periodic grids).
pub fn solve_periodic_bvp(
    op: &OperatorSpec,
    bnd: Option<&Boundary>,
    init: Option<&GridField>,
    tol: f64,
    strategy: BvpStrategy,
    max_periods: usize,
) -> Result<BvpSolution> {
    let g = op.grid;
    let (nc, nt) = (op.n_comp, g.n_t);
    if g.is_interval() && bnd.is_none() {
        return Err(Error::invalid("interval problems need boundary data"));
    }
    let steady_ok = op.time_independent() && bnd.is_none_or(|b| b.is_time_independent(nc, nt));
    let steady = match strategy {
        BvpStrategy::Auto => steady_ok,
        BvpStrategy::Steady if !steady_ok => {
            return Err(Error::invalid("steady solve requested for a time-dependent problem"));
        }
        BvpStrategy::Steady => true,
        BvpStrategy::Relaxation => false,
    };
    if steady {
        let s = steady_solve(op, 0, bnd, None)?;
        let mut u = GridField::zeros(g, nc);
        for k in 0..nt {
            u.set_slice_t(k, &s);
        }
        return Ok(BvpSolution {
            u,
            periods: 0,
            history: Vec::new(),
        });
    }
    let map = PeriodMap::new(op, 0.0)?;
    let mut v = match init {
        Some(f) => f.slice_t(0),
        None => vec![0.0; nc * g.n_z],
    };
    let mut snaps = GridField::zeros(g, nc);
    let mut history = Vec::new();
    for p in 1..=max_periods {
        let next = map.apply(&v, bnd, Some(&mut snaps));
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        history.push(change);
        v = next;
        if change < tol {
            return Ok(BvpSolution {
                u: snaps,
                periods: p,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "periodic boundary value relaxation",
        iterations: max_periods,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::KppSystem;
    use crate::frame::{build_operator_mu, transform_coefficients, MovingFrame};
    use crate::pde::Grid;

    fn reaction_diffusion(l: f64, grid: Grid) -> OperatorSpec {
        let sys = KppSystem::scalar(1.0, 0.0, l, 1.0);
        let fs = transform_coefficients(&sys, &MovingFrame::space_homogeneous(&[1.0], 0.0).unwrap()).unwrap();
        build_operator_mu(&fs, 0.0, &grid).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Grid::interval(8, 33, 1.0, 2.0).unwrap();
        let op = reaction_diffusion(-1.0, g);
        for s in [BvpStrategy::Steady, BvpStrategy::Relaxation] {
            let sol = solve_periodic_bvp(&op, Some(&Boundary::zero(1, 8)), None, 1e-12, s, 1000).unwrap();
            assert_eq!(sol.u.sup_norm(), 0.0);
        }
    }

    #[test]
    fn cosh_profile() {
        let a = 2.0;
        let g = Grid::interval(4, 401, 1.0, a).unwrap();
        let op = reaction_diffusion(-1.0, g);
        let bnd = Boundary::constant(&[1.0], &[1.0], 4);
        let steady = solve_periodic_bvp(&op, Some(&bnd), None, 1e-12, BvpStrategy::Auto, 10).unwrap();
        let relaxed = solve_periodic_bvp(&op, Some(&bnd), None, 1e-12, BvpStrategy::Relaxation, 10_000).unwrap();
        for j in 0..g.n_z {
            let exact = g.z(j).cosh() / a.cosh();
            assert!((steady.u.get(0, 2, j) - exact).abs() < 1e-4);
            assert!((relaxed.u.get(0, 2, j) - steady.u.get(0, 2, j)).abs() < 1e-9);
        }
    }

    #[test]
    fn ordered_data_stay_ordered() {
        let g = Grid::interval(8, 65, 1.0, 3.0).unwrap();
        let op = reaction_diffusion(0.5, g);
        let lo = solve_periodic_bvp(
            &op,
            Some(&Boundary::constant(&[0.2], &[0.0], 8)),
            None,
            1e-12,
            BvpStrategy::Relaxation,
            10_000,
        )
        .unwrap();
        let hi = solve_periodic_bvp(
            &op,
            Some(&Boundary::constant(&[0.5], &[0.1], 8)),
            None,
            1e-12,
            BvpStrategy::Relaxation,
            10_000,
        )
        .unwrap();
        assert!(lo.u.data.iter().zip(&hi.u.data).all(|(a, b)| a <= b));
    }

    #[test]
    fn divergent_relaxation_reports_history() {
        let g = Grid::interval(8, 65, 1.0, 30.0).unwrap();
        let op = reaction_diffusion(1.0, g);
        let err = solve_periodic_bvp(
            &op,
            Some(&Boundary::constant(&[1.0], &[0.0], 8)),
            None,
            1e-14,
            BvpStrategy::Relaxation,
            5,
        )
        .unwrap_err();
        match err {
            Error::NonConvergence { history, .. } => assert_eq!(history.len(), 5),
            other => panic!("unexpected {other}"),
        }
    }
}
