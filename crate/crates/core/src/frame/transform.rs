use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::basis::{compute_periods, rational_basis, real_basis};
use super::rational::{RationalDirection, Speed, SpeedJson, Q};
use crate::coeffs::{FieldMatrix, KppSystem, Mode, PeriodicField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameMode {
    Rational,
    SpaceHomogeneous,
}

/// Coordinates moving with speed `c` in direction `e`; `x = P x'`, last
/// column of `P` equal to `e`.
#[derive(Clone, Debug)]
pub struct MovingFrame {
    pub mode: FrameMode,
    pub e: Vec<f64>,
    pub c: f64,
    /// Row-major orthogonal basis.
    pub p: Vec<Vec<f64>>,
    pub t_frame: f64,
    pub l_frame: Vec<f64>,
    exact: Option<ExactFrame>,
}

#[derive(Clone, Debug)]
struct ExactFrame {
    e: RationalDirection,
    c: Q,
    p: Vec<Vec<Q>>,
}

/// Frame request as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRequest {
    pub e: Vec<serde_json::Number>,
    pub c: SpeedJson,
    #[serde(default = "default_mode")]
    pub mode: FrameMode,
}

fn default_mode() -> FrameMode {
    FrameMode::Rational
}

impl FrameRequest {
    pub fn build(&self) -> Result<MovingFrame> {
        let speed = self.c.to_speed()?;
        match self.mode {
            FrameMode::Rational => {
                let ints = self
                    .e
                    .iter()
                    .map(|x| x.as_i64().ok_or_else(|| Error::invalid("rational frame needs integer `e`")))
                    .collect::<Result<Vec<_>>>()?;
                MovingFrame::rational(&RationalDirection::new(&ints)?, speed)
            }
            FrameMode::SpaceHomogeneous => {
                let e: Vec<f64> = self.e.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect();
                MovingFrame::space_homogeneous(&e, speed.value())
            }
        }
    }
}

impl MovingFrame {
    pub fn rational(e: &RationalDirection, c: Speed) -> Result<Self> {
        let cq = c
            .exact()
            .ok_or_else(|| Error::invalid(format!("speed {} is not rational; use the space-homogeneous mode", c.value())))?;
        let p = rational_basis(e);
        let (t, l) = compute_periods(e, cq)?;
        Ok(Self {
            mode: FrameMode::Rational,
            e: e.to_f64(),
            c: cq.to_f64().unwrap_or(f64::NAN),
            p: p.iter()
                .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
                .collect(),
            t_frame: t as f64,
            l_frame: l.iter().map(|x| *x as f64).collect(),
            exact: Some(ExactFrame { e: e.clone(), c: cq, p }),
        })
    }

    /// Any real unit direction and speed; only valid for coefficients that
    /// do not depend on space.
    pub fn space_homogeneous(e: &[f64], c: f64) -> Result<Self> {
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if e.is_empty() || !(norm > 0.0) || !c.is_finite() {
            return Err(Error::invalid("direction must be nonzero and speed finite"));
        }
        let e: Vec<f64> = e.iter().map(|x| x / norm).collect();
        Ok(Self {
            mode: FrameMode::SpaceHomogeneous,
            p: real_basis(&e),
            l_frame: vec![1.0; e.len()],
            e,
            c,
            t_frame: 1.0,
            exact: None,
        })
    }

    /// Picks the rational frame when `e` is a rational unit vector and the
    /// speed is rational, otherwise requires space homogeneity.
    pub fn for_system(sys: &KppSystem, e: &[f64], c: f64) -> Result<Self> {
        if sys.is_space_homogeneous() {
            return Self::space_homogeneous(e, c);
        }
        let ints: Option<Vec<i64>> = e.iter().map(|x| (x.fract() == 0.0).then_some(*x as i64)).collect();
        let dir = match ints {
            Some(v) => RationalDirection::new(&v)?,
            None => {
                let den = e
                    .iter()
                    .filter_map(|x| super::rational::float_to_rational(*x))
                    .fold(1i64, |l, q| num_integer::Integer::lcm(&l, q.denom()));
                let v: Vec<i64> = e.iter().map(|x| (x * den as f64).round() as i64).collect();
                RationalDirection::new(&v)?
            }
        };
        Self::rational(&dir, Speed::Real(c))
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Composition `f(t, P x' − c t e)` as a field in frame coordinates.
    fn compose(&self, f: &PeriodicField) -> Result<PeriodicField> {
        let n = self.dim();
        let mut modes = Vec::with_capacity(f.modes.len());
        match &self.exact {
            Some(ex) => {
                let ev = ex.e.coords();
                for m in &f.modes {
                    let kx: Vec<Q> = m.kx.iter().map(|k| Q::from_integer(*k)).collect();
                    let ke: Q = kx.iter().zip(&ev).map(|(a, b)| a * b).sum();
                    let kt = (Q::from_integer(m.kt) - ex.c * ke) * Q::from_integer(self.t_frame as i64);
                    let mut kxp = Vec::with_capacity(n);
                    for a in 0..n {
                        let pk: Q = (0..n).map(|g| ex.p[g][a] * kx[g]).sum();
                        kxp.push(pk * Q::from_integer(self.l_frame[a] as i64));
                    }
                    if !kt.is_integer() || kxp.iter().any(|k| !k.is_integer()) {
                        return Err(Error::Numerical("frame frequencies are not integral".into()));
                    }
                    modes.push(Mode {
                        kt: kt.to_integer(),
                        kx: kxp.iter().map(|k| k.to_integer()).collect(),
                        cos: m.cos,
                        sin: m.sin,
                    });
                }
            }
            None => {
                if !f.is_space_homogeneous() {
                    return Err(Error::invalid(
                        "space-homogeneous frame requested for coefficients that depend on space",
                    ));
                }
                modes.extend(f.modes.iter().map(|m| Mode {
                    kt: m.kt,
                    kx: vec![0; n],
                    cos: m.cos,
                    sin: m.sin,
                }));
            }
        }
        PeriodicField::new(self.t_frame, self.l_frame.clone(), modes)
    }

    fn frame_constant(&self, v: f64) -> PeriodicField {
        PeriodicField::constant(v, self.dim()).with_periods(self.t_frame, self.l_frame.clone())
    }
}

/// The system written in moving-frame coordinates.
#[derive(Clone, Debug)]
pub struct FrameSystem {
    pub frame: MovingFrame,
    pub n_comp: usize,
    /// `Pᵀ A_i P` per component.
    pub a: Vec<FieldMatrix>,
    /// `Pᵀ (q_i + c e)`, `n_comp × n`.
    pub q: FieldMatrix,
    pub l: FieldMatrix,
    pub b: FieldMatrix,
}

impl FrameSystem {
    pub fn mode(&self) -> FrameMode {
        self.frame.mode
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn c(&self) -> f64 {
        self.frame.c
    }

    pub fn period(&self) -> f64 {
        self.frame.t_frame
    }

    /// Period along the direction of propagation.
    pub fn z_period(&self) -> f64 {
        self.frame.l_frame[self.dim() - 1]
    }

    fn all_fields(&self) -> impl Iterator<Item = &PeriodicField> {
        self.a
            .iter()
            .flat_map(|m| m.iter())
            .chain(self.q.iter())
            .chain(self.l.iter())
            .chain(self.b.iter())
    }

    /// Coefficients independent of every frame coordinate but time.
    pub fn is_z_homogeneous(&self) -> bool {
        self.all_fields().all(PeriodicField::is_space_homogeneous)
    }

    /// Coefficients independent of the transverse coordinates `y`.
    pub fn is_transverse_homogeneous(&self) -> bool {
        let n = self.dim();
        self.all_fields()
            .all(|f| f.modes.iter().all(|m| m.kx[..n - 1].iter().all(|k| *k == 0)))
    }

    pub fn is_time_independent(&self) -> bool {
        self.all_fields().all(PeriodicField::is_time_independent)
    }

    /// The same direction at another speed.
    pub fn with_speed(&self, sys: &KppSystem, c: f64) -> Result<FrameSystem> {
        let frame = match self.frame.mode {
            FrameMode::SpaceHomogeneous => MovingFrame::space_homogeneous(&self.frame.e, c)?,
            FrameMode::Rational => MovingFrame::for_system(sys, &self.frame.e, c)?,
        };
        transform_coefficients(sys, &frame)
    }
}

/// Writes the system in the frame `x = P x' − c t e`.
#[allow(clippy::needless_range_loop)]
pub fn transform_coefficients(sys: &KppSystem, frame: &MovingFrame) -> Result<FrameSystem> {
    if !sys.has_unit_periods() {
        return Err(Error::invalid("nondimensionalize the system before changing frame"));
    }
    let n = sys.dim();
    if frame.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: frame.dim(),
        });
    }
    let nc = sys.n_comp();
    let p = &frame.p;
    let mut a = Vec::with_capacity(nc);
    for i in 0..nc {
        let ai = sys.diffusion(i);
        let composed = ai.iter().map(|f| frame.compose(f)).collect::<Result<Vec<_>>>()?;
        let mut m = FieldMatrix::from_fn(n, n, |_, _| frame.frame_constant(0.0));
        for al in 0..n {
            for be in 0..n {
                let mut acc = frame.frame_constant(0.0);
                for g in 0..n {
                    for d in 0..n {
                        let w = p[g][al] * p[d][be];
                        if w != 0.0 {
                            acc = acc.add(&composed[g * n + d].scaled(w))?;
                        }
                    }
                }
                *m.get_mut(al, be) = acc;
            }
        }
        // Restore exact symmetry lost to rounding.
        for al in 0..n {
            for be in (al + 1)..n {
                *m.get_mut(be, al) = m.get(al, be).clone();
            }
        }
        a.push(m);
    }
    let mut q = FieldMatrix::from_fn(nc, n, |_, _| frame.frame_constant(0.0));
    for i in 0..nc {
        let composed = (0..n).map(|g| frame.compose(sys.advection(i, g))).collect::<Result<Vec<_>>>()?;
        for al in 0..n {
            let mut acc = frame.frame_constant(if al == n - 1 { frame.c } else { 0.0 });
            for (g, f) in composed.iter().enumerate() {
                if p[g][al] != 0.0 {
                    acc = acc.add(&f.scaled(p[g][al]))?;
                }
            }
            *q.get_mut(i, al) = acc;
        }
    }
    let map = |m: &FieldMatrix| -> Result<FieldMatrix> {
        Ok(FieldMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.iter().map(|f| frame.compose(f)).collect::<Result<_>>()?,
        })
    };
    Ok(FrameSystem {
        frame: frame.clone(),
        n_comp: nc,
        a,
        q,
        l: map(sys.coupling())?,
        b: map(sys.competition())?,
    })
}
