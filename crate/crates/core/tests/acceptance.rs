//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.
//! Lines go straight to the stdout handle so they show without `--nocapture`.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavekit::cauchy::{
    compact_bump, logistic_envelope, measure_spreading_speed, nonexistence_probe, simulate, ProbeStatus, SimulationSettings,
};
use wavekit::coeffs::KppSystem;
use wavekit::dispersion::{frame_system, minimal_speed, SearchSettings};
use wavekit::eigen::{dlambda_dmu, solve, EigenSettings, FrameSpectrum, Spectrum};
use wavekit::frame::{build_operator_mu, compute_periods, RationalDirection, Q};
use wavekit::pde::apply_operator;
use wavekit::waves::{construct_wave, downstream_shape_slope, WaveSettings};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_scalar_minimal_speed() -> Check {
    let start = Instant::now();
    let curve = curve_of(&scalar_kpp(), 1.0);
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("c* = {:.6}, mu* = {:.6}, {secs:.2}s", curve.c_star, curve.mu_star);
    ensure(
        (curve.c_star - 2.0).abs() < 1e-3 && (curve.mu_star - 1.0).abs() < 1e-3 && secs < 10.0,
        detail,
    )
}

fn c2_advection_shift() -> Check {
    let sys = KppSystem::scalar(1.0, 0.7, 1.0, 1.0);
    // Transport to the right slows leftward invasion.
    let left = curve_of(&sys, 1.0).c_star;
    let right = curve_of(&sys, -1.0).c_star;
    let detail = format!("leftward {left:.6} (2 - q), rightward {right:.6} (2 + q)");
    ensure((left - 1.3).abs() < 1e-3 && (right - 2.7).abs() < 1e-3, detail)
}

fn c3_critical_slope() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, sys) in [
        ("scalar", scalar_kpp()),
        ("scalar periodic", scalar_time_periodic()),
        ("2x2", pair_constant()),
    ] {
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        let curve = minimal_speed(&spec, &[1.0], &SearchSettings::default()).unwrap();
        let d = dlambda_dmu(&spec, curve.mu_star).unwrap();
        ok &= (d + curve.c_star).abs() < 1e-2;
        parts.push(format!("{name}: dl/dmu + c* = {:.1e}", d + curve.c_star));
    }
    ensure(ok, parts.join("; "))
}

fn c4_concavity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for (_, sys) in test_systems() {
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        for _ in 0..20 {
            let h = rng.gen_range(0.05..0.5);
            let mu = rng.gen_range(h..3.0);
            let d2 = spec.lambda(mu - h).unwrap() - 2.0 * spec.lambda(mu).unwrap() + spec.lambda(mu + h).unwrap();
            worst = worst.max(d2);
        }
    }
    ensure(
        worst <= 1e-6,
        format!("max second difference {worst:.3e} over {} systems", test_systems().len()),
    )
}

fn c5_eigen_residual() -> Check {
    let mut worst: f64 = 0.0;
    for (_, sys) in test_systems() {
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        for mu in [0.0, 0.5, 1.0, 2.0] {
            let e = solve(&fs, mu, &EigenSettings::default()).unwrap();
            let op = build_operator_mu(&fs, mu, &e.u.grid).unwrap();
            let r = apply_operator(&op, &e.u).unwrap();
            worst = worst.max(r.zip_map(&e.u, |a, b| a - e.lambda * b).sup_norm() / e.u.sup_norm());
        }
    }
    ensure(worst < 1e-5, format!("max relative residual {worst:.3e}"))
}

fn c6_oracle_equivalence() -> Check {
    let mut worst_const: f64 = 0.0;
    let mut worst_ode: f64 = 0.0;
    let constant = [
        (vec![1.0], vec![0.3], vec![vec![1.0]]),
        (vec![1.0, 0.5], vec![0.0, 0.2], vec![vec![0.0, 2.0], vec![1.0, -0.5]]),
        (
            vec![2.0, 1.0, 0.5],
            vec![0.1, -0.3, 0.0],
            vec![vec![0.5, 1.0, 0.0], vec![0.0, -1.0, 2.0], vec![3.0, 0.0, 0.0]],
        ),
    ];
    for (a, q, l) in constant {
        let n = a.len();
        let b = vec![vec![1.0; n]; n];
        let sys = KppSystem::constant(1, &a, &q.iter().map(|v| vec![*v]).collect::<Vec<_>>(), &l, &b).unwrap();
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        for mu in [0.0, 0.4, 1.3, 2.5] {
            let got = solve(&fs, mu, &EigenSettings::default()).unwrap().lambda;
            worst_const = worst_const.max((got - dense_perron_lambda(&a, &q, &l, mu)).abs());
        }
    }
    for sys in [scalar_time_periodic(), pair_time_periodic()] {
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        for mu in [0.0, 0.7, 1.5] {
            let got = solve(&fs, mu, &EigenSettings::default()).unwrap().lambda;
            worst_ode = worst_ode.max((got - rk4_monodromy_lambda(&sys, mu, 4000)).abs());
        }
    }
    ensure(
        worst_const < 1e-6 && worst_ode < 1e-6,
        format!("dense Perron max error {worst_const:.2e}; monodromy max error {worst_ode:.2e}"),
    )
}

fn c7_wave_trapping() -> Check {
    let w = construct_wave(&scalar_kpp(), &[1.0], 2.5, &WaveSettings::default()).map_err(|e| e.to_string())?;
    let d = w.profile.diagnostics;
    let rel = (d.downstream_decay_rate - 0.5).abs() / 0.5;
    let detail = format!(
        "trapping {:.1e}, residual {:.1e}, decay {:.4} (mu_wedge 0.5), floor {:.4}, solver {}",
        d.trapping_violation, d.pde_residual, d.downstream_decay_rate, d.upstream_floor, w.profile.solver
    );
    ensure(
        d.trapping_violation < 1e-6 && d.pde_residual < 1e-5 && rel < 0.1 && d.upstream_floor >= 0.9,
        detail,
    )
}

fn c8_critical_wave() -> Check {
    let w = construct_wave(&scalar_kpp(), &[1.0], 2.0, &WaveSettings::default()).map_err(|e| e.to_string())?;
    let d = w.profile.diagnostics;
    let slope = downstream_shape_slope(&w.profile.u, w.curve.mu_star);
    let detail = format!(
        "trapping {:.1e}, |z| exponent {slope:.4}, residual {:.1e}",
        d.trapping_violation, d.pde_residual
    );
    ensure(d.trapping_violation < 1e-5 && (slope - 1.0).abs() <= 0.2, detail)
}

fn c9_system_wave() -> Check {
    let w = construct_wave(&pair_constant(), &[1.0], 3.0, &WaveSettings::default()).map_err(|e| e.to_string())?;
    let d = w.profile.diagnostics;
    // λ(μ) = −μ² − 2, so λ + 3μ = 0 at μ = 1 and μ = 2.
    let (oracle, _) = quadratic_roots(-1.0, 3.0, -2.0);
    let rel = (d.downstream_decay_rate - oracle).abs() / oracle;
    let detail = format!(
        "trapping {:.1e}, decay {:.4} vs oracle {oracle:.4}",
        d.trapping_violation, d.downstream_decay_rate
    );
    ensure(d.trapping_violation < 1e-6 && rel < 0.05 && w.verification.passed(), detail)
}

fn c10_simulation_speeds() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let cases: [(&str, KppSystem, f64); 3] = [
        ("scalar", scalar_kpp(), 0.5),
        ("advection", KppSystem::scalar(1.0, 0.7, 1.0, 1.0), 0.5),
        // The invaded state of the pair oscillates near 1/2.
        ("periodic 2x2", pair_time_periodic(), 0.1),
    ];
    for (name, sys, theta) in cases {
        let start = Instant::now();
        let s = SimulationSettings {
            n_z: 4096,
            ..Default::default()
        };
        let u0 = compact_bump(sys.n_comp(), &s, 2.0, if sys.n_comp() == 1 { 1.0 } else { 0.5 }).unwrap();
        let run = simulate(&sys, &[1.0], &u0, &s);
        let secs = start.elapsed().as_secs_f64();
        let v = run
            .map_err(|e| e.to_string())
            .and_then(|r| measure_spreading_speed(&r, theta).map_err(|e| e.to_string()));
        match v {
            Ok(v) => {
                let (cl, cr) = (curve_of(&sys, 1.0).c_star, curve_of(&sys, -1.0).c_star);
                let (el, er) = ((v.left.speed - cl).abs() / cl, (v.right.speed - cr).abs() / cr);
                ok &= el < 0.05 && er < 0.05 && secs < 120.0;
                parts.push(format!(
                    "{name}: {:.3}/{:.3} vs {cl:.3}/{cr:.3} ({secs:.1}s)",
                    v.left.speed, v.right.speed
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    ensure(ok, parts.join("; "))
}

fn c11_nonexistence_probe() -> Check {
    let sys = pair_constant();
    let c_star = curve_of(&sys, 1.0).c_star;
    let s = SimulationSettings {
        t_final: 80.0,
        ..Default::default()
    };
    let r = nonexistence_probe(&sys, &[1.0], 0.5 * c_star, c_star, 1e-6, &s).map_err(|e| e.to_string())?;
    let refused = [1.01, 1.5]
        .iter()
        .all(|f| nonexistence_probe(&sys, &[1.0], f * c_star, c_star, 1e-6, &s).is_err());
    let detail = format!(
        "c = {:.4}: floor {:.4}, upstream {:.4}, ratio {:.4}, {:?}; c > c* refused: {refused}",
        r.c, r.floor, r.upstream_min, r.ratio, r.status
    );
    ensure(r.status == ProbeStatus::NoWaveAtSpeed && r.ratio >= 0.5 && refused, detail)
}

fn c12_logistic_envelope() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let sys = random_valid_system(&mut rng);
        let env = logistic_envelope(&sys);
        for _ in 0..10_000 {
            worst = worst.max(logistic_gap(&sys, env.r, env.k, &mut rng));
        }
    }
    ensure(
        worst <= 1e-9,
        format!("max (lhs - rhs)/scale {worst:.3e} over 5 systems x 1e4 samples"),
    )
}

fn c13_periods() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dirs = rational_unit_directions(12);
    let mut mismatches = Vec::new();
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let pool: Vec<&Vec<i64>> = dirs.iter().filter(|d| d.len() == n).collect();
        let e = pool[rng.gen_range(0..pool.len())].clone();
        let c = Q::new(rng.gen_range(-36..=36), rng.gen_range(1..=12));
        let dir = RationalDirection::new(&e).unwrap();
        let got = compute_periods(&dir, c).unwrap();
        let want = brute_force_periods(&e, c);
        if got != want {
            mismatches.push(format!("e = {e:?}, c = {c}: {got:?} vs {want:?}"));
        }
    }
    ensure(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "50/50 agree".into()
        } else {
            mismatches.join("; ")
        },
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 13] = [
        ("1 scalar minimal speed", c1_scalar_minimal_speed),
        ("2 advection shift", c2_advection_shift),
        ("3 critical slope identity", c3_critical_slope),
        ("4 concavity", c4_concavity),
        ("5 eigen residual", c5_eigen_residual),
        ("6 oracle equivalence", c6_oracle_equivalence),
        ("7 wave trapping", c7_wave_trapping),
        ("8 critical wave", c8_critical_wave),
        ("9 system wave", c9_system_wave),
        ("10 simulation cross-check", c10_simulation_speeds),
        ("11 nonexistence probe", c11_nonexistence_probe),
        ("12 logistic envelope", c12_logistic_envelope),
        ("13 period computation", c13_periods),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    let _ = writeln!(out);
    for (name, f) in criteria {
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match &r {
            Ok(d) => {
                let _ = writeln!(out, "PASS  criterion {name}: {d} [{secs:.1}s]");
            }
            Err(d) => {
                let _ = writeln!(out, "FAIL  criterion {name}: {d} [{secs:.1}s]");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
