//! Minimal wave speeds from the dispersion relation `μ ↦ λ₁,μ`.

use serde::{Deserialize, Serialize};

use crate::coeffs::KppSystem;
use crate::eigen::{self, EigenSettings, Spectrum};
use crate::error::{Error, Result};
use crate::frame::{transform_coefficients, FrameSystem, MovingFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Persistence {
    Persistent,
    Extinct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    /// `λ₁,p`; negative means persistence.
    pub lambda_p: f64,
    pub class: Persistence,
}

impl PersistenceReport {
    pub fn require_persistent(&self) -> Result<()> {
        match self.class {
            Persistence::Persistent => Ok(()),
            Persistence::Extinct => Err(Error::Extinct { lambda: self.lambda_p }),
        }
    }
}

/// The system in the frame moving at speed `c` along `e`.
pub fn frame_system(sys: &KppSystem, e: &[f64], c: f64) -> Result<FrameSystem> {
    transform_coefficients(sys, &MovingFrame::for_system(sys, e, c)?)
}

/// Sign of the periodic principal eigenvalue `λ₁,p` (static frame, `μ = 0`).
pub fn persistence_check(sys: &KppSystem, settings: &EigenSettings) -> Result<PersistenceReport> {
    let mut e = vec![0.0; sys.dim()];
    e[0] = 1.0;
    let fs = frame_system(sys, &e, 0.0)?;
    let lambda_p = eigen::solve(&fs, 0.0, settings)?.lambda;
    let class = if lambda_p < 0.0 {
        Persistence::Persistent
    } else {
        Persistence::Extinct
    };
    Ok(PersistenceReport { lambda_p, class })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub e: Vec<f64>,
    pub samples: Vec<Sample>,
    pub mu_star: f64,
    pub c_star: f64,
    /// Scan neighbours enclosing `μ*`.
    pub bracket: (f64, f64),
    pub lambda_star: f64,
    pub tol: f64,
}

impl DispersionCurve {
    /// `|c − c*|` below this routes to the critical pipeline.
    pub fn critical_band(&self) -> f64 {
        10.0 * self.tol
    }

    pub fn is_critical(&self, c: f64) -> bool {
        (c - self.c_star).abs() < self.critical_band()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub c: f64,
    pub mu_wedge: f64,
    pub mu_vee: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    /// Tolerance on `μ` for the golden section and root bisection.
    pub tol: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            mu_min: 1e-3,
            mu_max: 1e3,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `c* = min_{μ>0} −λ₁,μ/μ`: doubling scan from `mu_min`, then golden
/// section between the neighbours of the best sample.
pub fn minimal_speed(spec: &dyn Spectrum, e: &[f64], s: &SearchSettings) -> Result<DispersionCurve> {
    if !(s.mu_min > 0.0 && s.mu_max > s.mu_min) {
        return Err(Error::invalid("need 0 < mu_min < mu_max"));
    }
    // −λ − cμ is convex, so g = −λ/μ has interval sublevel sets and the scan
    // can stop at the first increase.
    let g = |smp: &Sample| -smp.lambda / smp.mu;
    let mut samples: Vec<Sample> = Vec::new();
    let mut mu = s.mu_min;
    loop {
        samples.push(Sample {
            mu,
            lambda: spec.lambda(mu)?,
        });
        let k = samples.len();
        if mu >= s.mu_max || (k >= 3 && g(&samples[k - 1]) > g(&samples[k - 2])) {
            break;
        }
        mu = (2.0 * mu).min(s.mu_max);
    }
    let best = (0..samples.len())
        .min_by(|&a, &b| g(&samples[a]).total_cmp(&g(&samples[b])))
        .unwrap_or(0);
    if best == 0 || best == samples.len() - 1 {
        return Err(Error::Numerical(format!(
            "no interior minimizer of -lambda/mu in [{}, {}] (best at mu = {})",
            s.mu_min, s.mu_max, samples[best].mu
        )));
    }
    let bracket = (samples[best - 1].mu, samples[best + 1].mu);

    let gf = |m: f64| -> Result<f64> { Ok(-spec.lambda(m)? / m) };
    let (mut lo, mut hi) = bracket;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (gf(x1)?, gf(x2)?);
    while hi - lo > s.tol * hi.max(1.0) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = gf(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = gf(x2)?;
        }
    }
    let mu_star = 0.5 * (lo + hi);
    let lambda_star = spec.lambda(mu_star)?;
    samples.push(Sample {
        mu: mu_star,
        lambda: lambda_star,
    });
    samples.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(DispersionCurve {
        e: e.to_vec(),
        samples,
        mu_star,
        c_star: -lambda_star / mu_star,
        bracket,
        lambda_star,
        tol: s.tol,
    })
}

/// The roots `μ∧ < μ* < μ∨` of `λ₁,μ + cμ = 0` for a supercritical speed.
pub fn speed_roots(spec: &dyn Spectrum, curve: &DispersionCurve, c: f64, s: &SearchSettings) -> Result<RootPair> {
    if curve.is_critical(c) {
        return Err(Error::CriticalSpeed { c, c_star: curve.c_star });
    }
    if c < curve.c_star {
        return Err(Error::Subcritical { c, c_star: curve.c_star });
    }
    let h = |m: f64| -> Result<f64> { Ok(spec.lambda(m)? + c * m) };
    let mid = curve.mu_star;
    if h(mid)? <= 0.0 {
        return Err(Error::CriticalSpeed { c, c_star: curve.c_star });
    }
    let (lo, hi) = rayon::join(|| outward_root(&h, mid, true, s.tol), || outward_root(&h, mid, false, s.tol));
    let (lo, hi) = (lo?, hi?);
    for (r, side) in [(lo, "lower"), (hi, "upper")] {
        if r.0 < 0.5 * s.mu_min || r.0 > 2.0 * s.mu_max {
            return Err(Error::Numerical(format!("no root of lambda + c mu found on the {side} side")));
        }
    }
    Ok(RootPair {
        c,
        mu_wedge: 0.5 * (lo.0 + lo.1),
        mu_vee: 0.5 * (hi.0 + hi.1),
    })
}

/// Sign change of `h` walking from `mid` (where `h > 0`) towards zero or
/// infinity by factors of two, refined by bisection to relative width `tol`.
/// Returns `(positive side, nonpositive side)`.
pub fn outward_root(h: &(dyn Fn(f64) -> Result<f64> + Sync), mid: f64, toward_zero: bool, tol: f64) -> Result<(f64, f64)> {
    let mut inner = mid;
    let mut outer = mid;
    let mut found = false;
    for _ in 0..80 {
        outer = if toward_zero { outer * 0.5 } else { outer * 2.0 };
        if h(outer)? <= 0.0 {
            found = true;
            break;
        }
        inner = outer;
    }
    if !found {
        return Err(Error::Numerical(format!(
            "no sign change of lambda + c mu {} mu = {mid}",
            if toward_zero { "below" } else { "above" }
        )));
    }
    let (mut pos, mut neg) = (inner, outer);
    for _ in 0..200 {
        if (pos - neg).abs() <= tol * pos.max(1.0) {
            break;
        }
        let m = 0.5 * (pos + neg);
        if m == pos || m == neg {
            break;
        }
        if h(m)? > 0.0 {
            pos = m;
        } else {
            neg = m;
        }
    }
    Ok((pos, neg))
}

/// Output record for the dispersion task.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionReport {
    pub c_star: f64,
    pub mu_star: f64,
    pub curve: Vec<Sample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots: Option<RootPair>,
}

impl DispersionReport {
    pub fn new(curve: &DispersionCurve, roots: Option<RootPair>) -> Self {
        Self {
            c_star: curve.c_star,
            mu_star: curve.mu_star,
            curve: curve.samples.clone(),
            roots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{FnSpectrum, FrameSpectrum};

    fn quadratic(a: f64, q: f64, l: f64) -> FnSpectrum<impl Fn(f64) -> f64 + Sync> {
        FnSpectrum {
            f: move |m: f64| -a * m * m + q * m - l,
            tol: 1e-12,
        }
    }

    #[test]
    fn scalar_kpp_speed() {
        let sys = KppSystem::scalar(1.0, 0.0, 1.0, 1.0);
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        let curve = minimal_speed(&spec, &[1.0], &SearchSettings::default()).unwrap();
        assert!((curve.c_star - 2.0).abs() < 1e-9);
        assert!((curve.mu_star - 1.0).abs() < 1e-5);
        assert!(curve.bracket.0 < 1.0 && curve.bracket.1 > 1.0);
    }

    #[test]
    fn advection_shifts_speed() {
        for (e, expect) in [(1.0, 1.3), (-1.0, 2.7)] {
            let spec = quadratic(1.0, 0.7 * e, 1.0);
            let curve = minimal_speed(&spec, &[e], &SearchSettings::default()).unwrap();
            assert!((curve.c_star - expect).abs() < 1e-9, "{e}: {}", curve.c_star);
        }
    }

    #[test]
    fn coupled_pair_closed_form() {
        let sys = KppSystem::constant(
            1,
            &[1.0, 1.0],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0, 2.0], vec![2.0, 0.0]],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let fs = frame_system(&sys, &[1.0], 0.0).unwrap();
        let spec = FrameSpectrum::new(&fs, EigenSettings::default());
        let curve = minimal_speed(&spec, &[1.0], &SearchSettings::default()).unwrap();
        assert!((curve.c_star - 8f64.sqrt()).abs() < 1e-9);
        assert!((curve.mu_star - 2f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn roots_of_supercritical_speed() {
        let spec = quadratic(1.0, 0.0, 1.0);
        let curve = minimal_speed(&spec, &[1.0], &SearchSettings::default()).unwrap();
        let r = speed_roots(&spec, &curve, 2.5, &SearchSettings::default()).unwrap();
        assert!((r.mu_wedge - 0.5).abs() < 1e-6 && (r.mu_vee - 2.0).abs() < 1e-6);
        assert!(matches!(
            speed_roots(&spec, &curve, 2.0, &SearchSettings::default()),
            Err(Error::CriticalSpeed { .. })
        ));
        assert!(matches!(
            speed_roots(&spec, &curve, 1.5, &SearchSettings::default()),
            Err(Error::Subcritical { .. })
        ));
    }

    #[test]
    fn persistence_classes() {
        let s = EigenSettings::default();
        let p = persistence_check(&KppSystem::scalar(1.0, 0.0, 1.0, 1.0), &s).unwrap();
        assert_eq!(p.class, Persistence::Persistent);
        assert!((p.lambda_p + 1.0).abs() < 1e-10);
        let x = persistence_check(&KppSystem::scalar(1.0, 0.0, -1.0, 1.0), &s).unwrap();
        assert_eq!(x.class, Persistence::Extinct);
        assert!(matches!(x.require_persistent(), Err(Error::Extinct { .. })));
        let pair = KppSystem::constant(
            1,
            &[1.0, 1.0],
            &[vec![0.0], vec![0.0]],
            &[vec![-1.0, 2.0], vec![2.0, -1.0]],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert!((persistence_check(&pair, &s).unwrap().lambda_p + 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_interior_minimum_is_an_error() {
        let spec = FnSpectrum { f: |m: f64| m, tol: 1e-12 };
        assert!(minimal_speed(&spec, &[1.0], &SearchSettings::default()).is_err());
    }
}
