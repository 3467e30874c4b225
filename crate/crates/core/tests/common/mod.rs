#![allow(dead_code)]

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::Rng;
use serde_json::json;
use wavekit::coeffs::{validate_assumptions, KppSystem};
use wavekit::dispersion::{frame_system, minimal_speed, DispersionCurve, SearchSettings};
use wavekit::eigen::{EigenSettings, FrameSpectrum};
use wavekit::frame::Q;

pub fn scalar_kpp() -> KppSystem {
    KppSystem::scalar(1.0, 0.0, 1.0, 1.0)
}

fn mode(kt: i64, kx: i64, cos: f64, sin: f64) -> serde_json::Value {
    json!({ "kt": kt, "kx": [kx], "cos": cos, "sin": sin })
}

/// `a = 1 + cos(2πt)/2`, `q = 0.3 sin 2πt`, `l = 1 + sin 2πt`.
pub fn scalar_time_periodic() -> KppSystem {
    let cfg = json!({
        "N": 1, "n": 1,
        "fields": {
            "A": [[[[mode(0, 0, 1.0, 0.0), mode(1, 0, 0.5, 0.0)]]]],
            "q": [[[mode(1, 0, 0.0, 0.3)]]],
            "L": [[[mode(0, 0, 1.0, 0.0), mode(1, 0, 0.0, 1.0)]]],
            "B": [[1.0]],
        }
    });
    KppSystem::from_json(&cfg.to_string()).unwrap()
}

/// `A = 1 + cos(2πx)/2`, `l = 1 + sin(2πx)/2`.
pub fn scalar_space_periodic() -> KppSystem {
    let cfg = json!({
        "N": 1, "n": 1,
        "fields": {
            "A": [[[[mode(0, 0, 1.0, 0.0), mode(0, 1, 0.5, 0.0)]]]],
            "q": [[0.0]],
            "L": [[[mode(0, 0, 1.0, 0.0), mode(0, 1, 0.0, 0.5)]]],
            "B": [[1.0]],
        }
    });
    KppSystem::from_json(&cfg.to_string()).unwrap()
}

/// `L = [[0, 2], [2, 0]]`, unit diffusion, `B` all ones.
pub fn pair_constant() -> KppSystem {
    KppSystem::constant(
        1,
        &[1.0, 1.0],
        &[vec![0.0], vec![0.0]],
        &[vec![0.0, 2.0], vec![2.0, 0.0]],
        &[vec![1.0, 1.0], vec![1.0, 1.0]],
    )
    .unwrap()
}

/// `L(t) = [[0, 1 + sin 2πt], [1, 0]]`, unit diffusion, `B` all ones.
pub fn pair_time_periodic() -> KppSystem {
    let cfg = json!({
        "N": 2, "n": 1,
        "fields": {
            "A": [[[1.0]], [[1.0]]],
            "q": [[0.0], [0.0]],
            "L": [[0.0, [mode(0, 0, 1.0, 0.0), mode(1, 0, 0.0, 1.0)]], [1.0, 0.0]],
            "B": [[1.0, 1.0], [1.0, 1.0]],
        }
    });
    KppSystem::from_json(&cfg.to_string()).unwrap()
}

pub fn test_systems() -> Vec<(&'static str, KppSystem)> {
    vec![
        ("scalar", scalar_kpp()),
        ("scalar time-periodic", scalar_time_periodic()),
        ("scalar space-periodic", scalar_space_periodic()),
        ("pair", pair_constant()),
        ("pair time-periodic", pair_time_periodic()),
    ]
}

pub fn curve_of(sys: &KppSystem, e: f64) -> DispersionCurve {
    let fs = frame_system(sys, &[e], 0.0).unwrap();
    minimal_speed(&FrameSpectrum::new(&fs, EigenSettings::default()), &[e], &SearchSettings::default()).unwrap()
}

/// Roots of `a x² + b x + c`, smaller first.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let d = (b * b - 4.0 * a * c).sqrt();
    let (r1, r2) = ((-b - d) / (2.0 * a), (-b + d) / (2.0 * a));
    (r1.min(r2), r1.max(r2))
}

/// `−max Re σ(L + diag(a μ² − q μ))` from a dense eigen-decomposition.
pub fn dense_perron_lambda(a: &[f64], q: &[f64], l: &[Vec<f64>], mu: f64) -> f64 {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| l[i][j] + if i == j { a[i] * mu * mu - q[i] * mu } else { 0.0 });
    -m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `−ln ρ(Φ(T)) / T` for `Φ' = M(t) Φ`, `M = L(t) + diag(a_i(t) μ² − q_i(t) μ)`,
/// integrated with classical RK4. Space-homogeneous systems only.
pub fn rk4_monodromy_lambda(sys: &KppSystem, mu: f64, steps: usize) -> f64 {
    let n = sys.n_comp();
    let period = sys.temporal_period();
    let x = [0.0];
    let gen = |t: f64| {
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = sys.coupling().get(i, j).value(t, &x);
            if i == j {
                v += sys.diffusion(i).get(0, 0).value(t, &x) * mu * mu - sys.advection(i, 0).value(t, &x) * mu;
            }
            v
        })
    };
    let h = period / steps as f64;
    let mut phi = DMatrix::<f64>::identity(n, n);
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = gen(t) * &phi;
        let k2 = gen(t + 0.5 * h) * (&phi + &k1 * (0.5 * h));
        let k3 = gen(t + 0.5 * h) * (&phi + &k2 * (0.5 * h));
        let k4 = gen(t + h) * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let rho = phi.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    -rho.ln() / period
}

/// A random system satisfying A1–A5 with time and space modes.
pub fn random_valid_system(rng: &mut impl Rng) -> KppSystem {
    let n = rng.gen_range(1..=3usize);
    let mut field = |mean: f64, rel: f64| {
        let kt = rng.gen_range(0..=2);
        let kx = rng.gen_range(0..=1);
        let amp = rel * mean.abs() * rng.gen_range(0.0..1.0);
        json!([mode(0, 0, mean, 0.0), mode(kt, kx, amp * 0.6, amp * 0.8)])
    };
    let a: Vec<_> = (0..n).map(|_| json!([[field(1.0, 0.5)]])).collect();
    let q: Vec<_> = (0..n).map(|_| json!([field(0.3, 1.0)])).collect();
    let mut l = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut lr = Vec::new();
        let mut br = Vec::new();
        for j in 0..n {
            if i == j {
                let d = field(1.0, 1.0);
                lr.push(d);
            } else {
                let m = field(1.5, 0.9);
                lr.push(m);
            }
            br.push(field(1.0, 0.5));
        }
        l.push(lr);
        b.push(br);
    }
    let cfg = json!({ "N": n, "n": 1, "fields": { "A": a, "q": q, "L": l, "B": b } });
    let sys = KppSystem::from_json(&cfg.to_string()).unwrap();
    let report = validate_assumptions(&sys, 8).unwrap();
    assert!(report.all_passed(), "{report:?}");
    sys
}

/// Largest normalized excess of `Lu − (Bu)∘u` over `r(1ᵀu)(K1 − u)` at one
/// random `(t, x, u)`.
pub fn logistic_gap(sys: &KppSystem, r: f64, k: f64, rng: &mut impl Rng) -> f64 {
    let n = sys.n_comp();
    let t: f64 = rng.gen_range(0.0..1.0);
    let x = [rng.gen_range(0.0..1.0)];
    let scale = k * 10f64.powf(rng.gen_range(-3.0..1.0));
    let u: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(0.0..1.0)).collect();
    let total: f64 = u.iter().sum();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let lu: f64 = (0..n).map(|j| sys.coupling().get(i, j).value(t, &x) * u[j]).sum();
        let bu: f64 = (0..n).map(|j| sys.competition().get(i, j).value(t, &x) * u[j]).sum();
        let lhs = lu - bu * u[i];
        let rhs = r * total * (k - u[i]);
        worst = worst.max((lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0));
    }
    worst
}

/// Primitive integer vectors of dimension 1–3 with integer norm at most `max_den`.
pub fn rational_unit_directions(max_den: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let r = max_den;
    for n in 1..=3usize {
        let mut v = vec![-r; n];
        loop {
            let sq: i64 = v.iter().map(|x| x * x).sum();
            let norm = (sq as f64).sqrt().round() as i64;
            let g = v.iter().fold(0i64, |g, x| num_integer::gcd(g, *x));
            if sq > 0 && norm * norm == sq && norm <= max_den && g == 1 {
                out.push(v.clone());
            }
            let mut k = 0;
            while k < n {
                v[k] += 1;
                if v[k] <= r {
                    break;
                }
                v[k] = -r;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    out
}

/// Least positive integer `s ≤ limit` with `s · v ∈ Zⁿ`.
fn scan(v: &[Q], limit: i64) -> i64 {
    (1..=limit)
        .find(|s| v.iter().all(|x| (*x * Q::from_integer(*s)).is_integer()))
        .expect("no period below limit")
}

/// Periods by scanning integers: `T` for `c e`, `L_α` for each column of the
/// reflection `I − 2wwᵀ/(wᵀw)`, `w = e − e_n` (identity when `e = e_n`).
pub fn brute_force_periods(p: &[i64], c: Q) -> (i64, Vec<i64>) {
    let n = p.len();
    let norm = (p.iter().map(|x| x * x).sum::<i64>() as f64).sqrt().round() as i64;
    let e: Vec<Q> = p.iter().map(|x| Q::new(*x, norm)).collect();
    let ce: Vec<Q> = e.iter().map(|x| *x * c).collect();
    let mut w = e.clone();
    w[n - 1] -= Q::one();
    let ww: Q = w.iter().map(|x| *x * *x).sum();
    let col = |a: usize| -> Vec<Q> {
        (0..n)
            .map(|r| {
                let id = if r == a { Q::one() } else { Q::zero() };
                if ww.is_zero() {
                    id
                } else {
                    id - Q::from_integer(2) * w[r] * w[a] / ww
                }
            })
            .collect()
    };
    (scan(&ce, 100_000), (0..n).map(|a| scan(&col(a), 100_000)).collect())
}
