mod common;

use common::*;
use nalgebra::DMatrix;
use num_traits::Signed;
use proptest::prelude::*;
use wavekit::cauchy::{compact_bump, logistic_envelope, simulate, SimulationSettings};
use wavekit::coeffs::{validate_assumptions, FieldMatrix, KppSystem, Mode, PeriodicField};
use wavekit::dispersion::{frame_system, minimal_speed, speed_roots, SearchSettings};
use wavekit::eigen::{solve, EigenSettings, Engine, FrameSpectrum, Spectrum};
use wavekit::frame::{
    build_operator_mu, compute_periods, rational_basis, transform_coefficients, MovingFrame, RationalDirection, Speed, Q,
};
use wavekit::pde::{apply_operator, evolve_period, Grid};
use wavekit::waves::{construct_wave, NonlinearSolver, WaveSettings};

fn modes_strategy(dim: usize) -> impl Strategy<Value = Vec<Mode>> {
    prop::collection::vec(
        (0i64..4, prop::collection::vec(-3i64..4, dim), -2.0f64..2.0, -2.0f64..2.0).prop_map(|(kt, kx, cos, sin)| Mode {
            kt,
            kx,
            cos,
            sin,
        }),
        1..5,
    )
}

fn field_strategy() -> impl Strategy<Value = PeriodicField> {
    (1usize..=3)
        .prop_flat_map(|dim| {
            (
                Just(dim),
                0.25f64..4.0,
                prop::collection::vec(0.25f64..4.0, dim),
                modes_strategy(dim),
            )
        })
        .prop_map(|(_, t, l, modes)| PeriodicField::new(t, l, modes).unwrap())
}

fn det(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|c| {
            let minor: Vec<Vec<Q>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| *v).collect())
                .collect();
            let s = if c % 2 == 0 { Q::from_integer(1) } else { Q::from_integer(-1) };
            s * m[0][c] * det(&minor)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn fields_are_periodic(f in field_strategy(), t in -5.0f64..5.0, x in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = &x[..f.dim()];
        let base = f.value(t, x);
        let scale = f.amplitude_bound().max(1.0);
        prop_assert!((f.value(t + f.temporal_period, x) - base).abs() <= 1e-12 * scale);
        for a in 0..f.dim() {
            let mut y = x.to_vec();
            y[a] += f.spatial_periods[a];
            prop_assert!((f.value(t, &y) - base).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn nondimensionalize_is_idempotent(t in 0.25f64..4.0, l in 0.25f64..4.0, a in 0.5f64..2.0, amp in 0.0f64..0.4) {
        let p = |modes: Vec<Mode>| PeriodicField::new(t, vec![l], modes).unwrap();
        let one = |v: f64| p(vec![Mode { kt: 0, kx: vec![0], cos: v, sin: 0.0 }]);
        let osc = p(vec![Mode { kt: 0, kx: vec![0], cos: a, sin: 0.0 }, Mode { kt: 1, kx: vec![1], cos: amp, sin: 0.0 }]);
        let sys = KppSystem::new(
            vec![FieldMatrix::new(1, 1, vec![osc]).unwrap()],
            FieldMatrix::new(1, 1, vec![one(0.3)]).unwrap(),
            FieldMatrix::new(1, 1, vec![one(1.0)]).unwrap(),
            FieldMatrix::new(1, 1, vec![one(1.0)]).unwrap(),
        ).unwrap();
        let once = sys.nondimensionalize();
        prop_assert_eq!(once.nondimensionalize(), once);
    }

    #[test]
    fn rational_basis_is_unimodular(k in 0usize..1000) {
        let dirs = rational_unit_directions(12);
        let e = RationalDirection::new(&dirs[k % dirs.len()]).unwrap();
        prop_assert_eq!(det(&rational_basis(&e)).abs(), Q::from_integer(1));
    }

    #[test]
    fn periods_match_lattice_scan(k in 0usize..1000, num in -36i64..=36, den in 1i64..=12) {
        let dirs = rational_unit_directions(12);
        let e = &dirs[k % dirs.len()];
        let c = Q::new(num, den);
        prop_assert_eq!(compute_periods(&RationalDirection::new(e).unwrap(), c).unwrap(), brute_force_periods(e, c));
    }

    #[test]
    fn logistic_envelope_dominates(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sys = random_valid_system(&mut rng);
        let env = logistic_envelope(&sys);
        for _ in 0..200 {
            prop_assert!(logistic_gap(&sys, env.r, env.k, &mut rng) <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn sampling_refinement_converges(a in 0.5f64..2.0, amp in 0.0f64..0.45, l01 in 0.2f64..2.0, kt in 0i64..3, kx in 0i64..3) {
        let f = |mean: f64| PeriodicField::new(1.0, vec![1.0], vec![
            Mode { kt: 0, kx: vec![0], cos: mean, sin: 0.0 },
            Mode { kt, kx: vec![kx], cos: amp * mean, sin: 0.3 * amp * mean },
        ]).unwrap();
        let sys = KppSystem::new(
            vec![FieldMatrix::new(1, 1, vec![f(a)]).unwrap(), FieldMatrix::new(1, 1, vec![f(1.0)]).unwrap()],
            FieldMatrix::new(2, 1, vec![f(0.1), f(0.1)]).unwrap(),
            FieldMatrix::new(2, 2, vec![f(0.5), f(l01), f(1.0), f(-0.5)]).unwrap(),
            FieldMatrix::new(2, 2, vec![f(1.0), f(1.0), f(1.0), f(1.0)]).unwrap(),
        ).unwrap();
        let coarse = validate_assumptions(&sys, 8).unwrap();
        let fine = validate_assumptions(&sys, 16).unwrap();
        prop_assert!((coarse.ellipticity - fine.ellipticity).abs() < 1e-6);
        for (m1, m2) in [(&coarse.l_lower, &fine.l_lower), (&coarse.l_upper, &fine.l_upper), (&coarse.b_lower, &fine.b_lower)] {
            for (r1, r2) in m1.iter().zip(m2) {
                for (x, y) in r1.iter().zip(r2) {
                    prop_assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
                }
            }
        }
    }

    #[test]
    fn frame_coefficients_are_periodic(k in 0usize..1000, num in -12i64..=12, den in 1i64..=6, t in 0.0f64..3.0, z in 0.0f64..3.0) {
        let dirs: Vec<Vec<i64>> = rational_unit_directions(5).into_iter().filter(|d| d.len() == 2).collect();
        let e = RationalDirection::new(&dirs[k % dirs.len()]).unwrap();
        let cfg = serde_json::json!({
            "N": 1, "n": 2,
            "fields": {
                "A": [[[1.0, 0.0], [0.0, 1.0]]],
                "q": [[0.0, 0.0]],
                "L": [[[{"kt": 0, "kx": [0, 0], "cos": 1.0}, {"kt": 1, "kx": [1, 2], "cos": 0.3, "sin": 0.2}]]],
                "B": [[1.0]]
            }
        });
        let sys = KppSystem::from_json(&cfg.to_string()).unwrap();
        let frame = MovingFrame::rational(&e, Speed::Exact(Q::new(num, den))).unwrap();
        let fs = transform_coefficients(&sys, &frame).unwrap();
        let l = fs.l.get(0, 0);
        let x = [0.37, z];
        let base = l.value(t, &x);
        prop_assert!((l.value(t + fs.period(), &x) - base).abs() < 1e-12);
        for a in 0..2 {
            let mut y = x;
            y[a] += fs.frame.l_frame[a];
            prop_assert!((l.value(t, &y) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn period_map_is_positive_and_linear(
        v1 in prop::collection::vec(0.0f64..1.0, 32),
        v2 in prop::collection::vec(0.0f64..1.0, 32),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        mu in 0.0f64..2.0,
    ) {
        let fs = frame_system(&scalar_space_periodic(), &[1.0], 0.0).unwrap();
        let grid = Grid::periodic(128, 32, 1.0, 1.0).unwrap();
        let op = build_operator_mu(&fs, mu, &grid).unwrap();
        let p1 = evolve_period(&op, &v1, None).unwrap();
        let p2 = evolve_period(&op, &v2, None).unwrap();
        prop_assert!(p1.iter().all(|v| *v >= 0.0));
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| alpha * a + beta * b).collect();
        let pm = evolve_period(&op, &mix, None).unwrap();
        for j in 0..32 {
            prop_assert!((pm[j] - (alpha * p1[j] + beta * p2[j])).abs() < 1e-10);
        }
    }

    #[test]
    fn eigen_identity_and_normalization(mu in 0.0f64..2.5, pick in 0usize..5) {
        let (_, sys) = test_systems().swap_remove(pick);
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let s = EigenSettings::default();
        let e = solve(&fs, mu, &s).unwrap();
        let op = build_operator_mu(&fs, mu, &e.u.grid).unwrap();
        let r = apply_operator(&op, &e.u).unwrap();
        let res = r.zip_map(&e.u, |a, b| a - e.lambda * b).sup_norm() / e.u.sup_norm();
        prop_assert!(res < 10.0 * s.tol.max(1e-7), "residual {}", res);
        // Mean-one and max-one eigenfunctions are proportional.
        let m = e.mean_normalized();
        let ratio = m.data[0] / e.u.data[0];
        prop_assert!(m.data.iter().zip(&e.u.data).all(|(a, b)| (a - ratio * b).abs() < 1e-12 * ratio.abs().max(1.0)));
        prop_assert!(e.kappa > 0.0);
    }

    #[test]
    fn concave_in_mu(mu in 0.2f64..3.0, h in 0.01f64..0.2, pick in 0usize..5) {
        let (_, sys) = test_systems().swap_remove(pick);
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        let d2 = spec.lambda(mu - h).unwrap() - 2.0 * spec.lambda(mu).unwrap() + spec.lambda(mu + h).unwrap();
        prop_assert!(d2 <= 1e-8, "second difference {}", d2);
    }

    #[test]
    fn diagonal_shift_moves_lambda(delta in -2.0f64..2.0, mu in 0.0f64..2.0) {
        let base = pair_time_periodic();
        let mut json = base.to_json();
        for i in 0..2 {
            let entry = &mut json["fields"]["L"][i][i];
            entry.as_array_mut().unwrap().push(serde_json::json!({"kt": 0, "kx": [0], "cos": delta, "sin": 0.0}));
        }
        let shifted = KppSystem::from_json(&json.to_string()).unwrap();
        for engine in [Engine::Monodromy, Engine::Cell] {
            let s = EigenSettings { engine, n_t: 32, ..Default::default() };
            let l0 = solve(&frame_system(&base, &[1.0], 0.0).unwrap(), mu, &s).unwrap().lambda;
            let l1 = solve(&frame_system(&shifted, &[1.0], 0.0).unwrap(), mu, &s).unwrap().lambda;
            prop_assert!((l1 - (l0 - delta)).abs() < 1e-8, "{:?}: {} vs {}", engine, l1, l0 - delta);
        }
    }

    #[test]
    fn dispersion_minimum_and_roots(q in -0.8f64..0.8, dc in 0.05f64..2.0, pick in 0usize..5) {
        let (_, base) = test_systems().swap_remove(pick);
        let mut json = base.to_json();
        for i in 0..base.n_comp() {
            json["fields"]["q"][i][0].as_array_mut().unwrap().push(serde_json::json!({"kt": 0, "kx": [0], "cos": q, "sin": 0.0}));
        }
        let sys = KppSystem::from_json(&json.to_string()).unwrap();
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        let curve = minimal_speed(&spec, &[1.0], &SearchSettings::default()).unwrap();
        let g_star = -curve.lambda_star / curve.mu_star;
        for smp in &curve.samples {
            prop_assert!(g_star <= -smp.lambda / smp.mu + 1e-9);
        }
        // Adding a uniform drift q e shifts the speed along e by −q. With
        // x-dependent coefficients the drift also acts on the eigenfunction.
        if base.is_space_homogeneous() {
        let fs0 = frame_system(&base, &[1.0], 0.0).unwrap();
        let c0 = minimal_speed(&FrameSpectrum::new(&fs0, EigenSettings::default()), &[1.0], &SearchSettings::default()).unwrap().c_star;
        prop_assert!((curve.c_star - (c0 - q)).abs() < 1e-6, "{} vs {}", curve.c_star, c0 - q);
        }
        let c = curve.c_star + dc;
        let roots = speed_roots(&spec, &curve, c, &SearchSettings::default()).unwrap();
        for k in 1..20 {
            let m = roots.mu_wedge + (roots.mu_vee - roots.mu_wedge) * k as f64 / 20.0;
            prop_assert!(spec.lambda(m).unwrap() + c * m > 0.0);
        }
    }

    #[test]
    fn simulation_stays_nonnegative(width in 0.5f64..5.0, height in 0.01f64..3.0, q in -0.5f64..0.5) {
        let sys = KppSystem::scalar(1.0, q, 1.0, 1.0);
        let s = SimulationSettings { half_width: 20.0, n_z: 256, t_final: 3.0, snapshot_times: vec![1.0, 2.0, 3.0], ..Default::default() };
        let run = simulate(&sys, &[1.0], &compact_bump(1, &s, width, height).unwrap(), &s).unwrap();
        for (_, snap) in &run.snapshots {
            prop_assert!(snap.min() >= 0.0);
            prop_assert!(snap.max() <= run.bound + 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn supercritical_waves_are_trapped(c in 2.2f64..4.0) {
        let settings = WaveSettings { solver: NonlinearSolver::Newton, ..Default::default() };
        let w = construct_wave(&scalar_kpp(), &[1.0], c, &settings).unwrap();
        let oracle = quadratic_roots(-1.0, c, -1.0).0;
        prop_assert!(w.profile.diagnostics.trapping_violation < 1e-6);
        prop_assert!((w.profile.diagnostics.downstream_decay_rate - oracle).abs() < 0.1 * oracle);
    }
}

#[test]
fn dense_oracle_agrees_with_closed_form() {
    // Sanity check of the test oracle itself.
    let l = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
    assert!((dense_perron_lambda(&[1.0, 1.0], &[0.0, 0.0], &l, 1.0) + 3.0).abs() < 1e-12);
    let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!((m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max) - 1.0).abs() < 1e-14);
    let _ = PeriodicField::zero(1);
}
