use serde::{Deserialize, Serialize};

use super::field::{FieldMatrix, Mode, PeriodicField};
use crate::error::{Error, Result};

/// A periodic KPP system `∂_t u − ∇·(A_i ∇u_i) + q_i·∇u_i = (L u)_i − (B u)_i u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct KppSystem {
    n_comp: usize,
    dim: usize,
    temporal_period: f64,
    spatial_periods: Vec<f64>,
    /// One symmetric `dim × dim` matrix per component.
    a: Vec<FieldMatrix>,
    /// One `dim` vector per component, stored as `n_comp × dim`.
    q: FieldMatrix,
    l: FieldMatrix,
    b: FieldMatrix,
}

impl KppSystem {
    pub fn new(a: Vec<FieldMatrix>, q: FieldMatrix, l: FieldMatrix, b: FieldMatrix) -> Result<Self> {
        let n_comp = a.len();
        if n_comp == 0 {
            return Err(Error::invalid("system needs at least one component"));
        }
        let dim = a[0].rows;
        if dim == 0 {
            return Err(Error::invalid("spatial dimension must be at least 1"));
        }
        let first = &a[0].data[0];
        let (tp, sp) = (first.temporal_period, first.spatial_periods.clone());
        for (i, ai) in a.iter().enumerate() {
            if ai.rows != dim || ai.cols != dim {
                return Err(Error::invalid(format!("A[{i}] must be {dim}x{dim}")));
            }
            for r in 0..dim {
                for c in (r + 1)..dim {
                    if !ai.get(r, c).approx_eq(ai.get(c, r), 1e-14) {
                        return Err(Error::invalid(format!("A[{i}] is not symmetric at ({r},{c})")));
                    }
                }
            }
        }
        if q.rows != n_comp || q.cols != dim {
            return Err(Error::invalid(format!("q must be {n_comp}x{dim}")));
        }
        for (name, m) in [("L", &l), ("B", &b)] {
            if m.rows != n_comp || m.cols != n_comp {
                return Err(Error::invalid(format!("{name} must be {n_comp}x{n_comp}")));
            }
        }
        let all = a.iter().flat_map(|m| m.iter()).chain(q.iter()).chain(l.iter()).chain(b.iter());
        for f in all {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
            if f.temporal_period != tp || f.spatial_periods != sp {
                return Err(Error::invalid("all fields must share the same periods"));
            }
        }
        Ok(Self {
            n_comp,
            dim,
            temporal_period: tp,
            spatial_periods: sp,
            a,
            q,
            l,
            b,
        })
    }

    /// Constant coefficients with isotropic diffusion.
    pub fn constant(dim: usize, diffusion: &[f64], advection: &[Vec<f64>], l: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let a = diffusion
            .iter()
            .map(|&d| FieldMatrix::from_fn(dim, dim, |r, c| PeriodicField::constant(if r == c { d } else { 0.0 }, dim)))
            .collect();
        Self::new(
            a,
            FieldMatrix::constant(advection, dim),
            FieldMatrix::constant(l, dim),
            FieldMatrix::constant(b, dim),
        )
    }

    /// Scalar equation `u_t = a u_xx − q u_x + l u − b u²` in one dimension.
    pub fn scalar(a: f64, q: f64, l: f64, b: f64) -> Self {
        Self::constant(1, &[a], &[vec![q]], &[vec![l]], &[vec![b]]).expect("scalar system is well formed")
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn temporal_period(&self) -> f64 {
        self.temporal_period
    }

    pub fn spatial_periods(&self) -> &[f64] {
        &self.spatial_periods
    }

    pub fn diffusion(&self, i: usize) -> &FieldMatrix {
        &self.a[i]
    }

    pub fn advection(&self, i: usize, axis: usize) -> &PeriodicField {
        self.q.get(i, axis)
    }

    pub fn advection_matrix(&self) -> &FieldMatrix {
        &self.q
    }

    pub fn coupling(&self) -> &FieldMatrix {
        &self.l
    }

    pub fn competition(&self) -> &FieldMatrix {
        &self.b
    }

    pub fn fields(&self) -> impl Iterator<Item = &PeriodicField> {
        self.a
            .iter()
            .flat_map(|m| m.iter())
            .chain(self.q.iter())
            .chain(self.l.iter())
            .chain(self.b.iter())
    }

    pub fn is_space_homogeneous(&self) -> bool {
        self.fields().all(PeriodicField::is_space_homogeneous)
    }

    pub fn is_time_independent(&self) -> bool {
        self.fields().all(PeriodicField::is_time_independent)
    }

    pub fn is_constant(&self) -> bool {
        self.fields().all(PeriodicField::is_constant)
    }

    pub fn has_unit_periods(&self) -> bool {
        self.temporal_period == 1.0 && self.spatial_periods.iter().all(|p| *p == 1.0)
    }

    /// Rescales to unit periods in time and space.
    ///
    /// With `t = T s`, `x_α = L_α y_α`, diffusion scales by `T/(L_α L_β)`,
    /// advection by `T/L_α`, and the reaction terms by `T`.
    pub fn nondimensionalize(&self) -> Self {
        let t = self.temporal_period;
        let lp = &self.spatial_periods;
        let unit = |f: &PeriodicField, s: f64| f.with_periods(1.0, vec![1.0; self.dim]).scaled(s);
        let a = self
            .a
            .iter()
            .map(|m| FieldMatrix::from_fn(self.dim, self.dim, |r, c| unit(m.get(r, c), t / (lp[r] * lp[c]))))
            .collect();
        let q = FieldMatrix::from_fn(self.n_comp, self.dim, |i, al| unit(self.q.get(i, al), t / lp[al]));
        let l = FieldMatrix::from_fn(self.n_comp, self.n_comp, |i, j| unit(self.l.get(i, j), t));
        let b = FieldMatrix::from_fn(self.n_comp, self.n_comp, |i, j| unit(self.b.get(i, j), t));
        Self {
            n_comp: self.n_comp,
            dim: self.dim,
            temporal_period: 1.0,
            spatial_periods: vec![1.0; self.dim],
            a,
            q,
            l,
            b,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: SystemJson =
            serde_path_to_error::deserialize(de).map_err(|e| Error::invalid(format!("at `{}`: {}", e.path(), e.inner())))?;
        raw.build()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fj = |f: &PeriodicField| FieldJson::Modes(f.modes.clone());
        let mat =
            |m: &FieldMatrix| -> Vec<Vec<FieldJson>> { (0..m.rows).map(|r| (0..m.cols).map(|c| fj(m.get(r, c))).collect()).collect() };
        let raw = SystemJson {
            n_comp: self.n_comp,
            n: self.dim,
            temporal_period: Some(self.temporal_period),
            spatial_periods: Some(self.spatial_periods.clone()),
            fields: FieldsJson {
                a: self.a.iter().map(mat).collect(),
                q: mat(&self.q),
                l: mat(&self.l),
                b: mat(&self.b),
            },
        };
        serde_json::to_value(raw).expect("system serializes")
    }
}

/// A field in JSON: either a bare constant or a list of modes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldJson {
    Constant(f64),
    Modes(Vec<Mode>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<FieldJson>>>,
    pub q: Vec<Vec<FieldJson>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<FieldJson>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<FieldJson>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    #[serde(rename = "N")]
    pub n_comp: usize,
    pub n: usize,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub temporal_period: Option<f64>,
    #[serde(rename = "periods", default, skip_serializing_if = "Option::is_none")]
    pub spatial_periods: Option<Vec<f64>>,
    pub fields: FieldsJson,
}

impl SystemJson {
    pub fn build(self) -> Result<KppSystem> {
        let (nc, n) = (self.n_comp, self.n);
        let tp = self.temporal_period.unwrap_or(1.0);
        let sp = self.spatial_periods.unwrap_or_else(|| vec![1.0; n]);
        if sp.len() != n {
            return Err(Error::invalid(format!("`periods` must have {n} entries, got {}", sp.len())));
        }
        let field = |f: &FieldJson, path: &str| -> Result<PeriodicField> {
            let modes = match f {
                FieldJson::Constant(c) => vec![Mode {
                    kt: 0,
                    kx: vec![0; n],
                    cos: *c,
                    sin: 0.0,
                }],
                FieldJson::Modes(m) => m.clone(),
            };
            PeriodicField::new(tp, sp.clone(), modes).map_err(|e| Error::invalid(format!("at `{path}`: {e}")))
        };
        let matrix = |m: &[Vec<FieldJson>], rows: usize, cols: usize, name: &str| -> Result<FieldMatrix> {
            if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                return Err(Error::invalid(format!("`fields.{name}` must be {rows}x{cols}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for (r, row) in m.iter().enumerate() {
                for (c, f) in row.iter().enumerate() {
                    data.push(field(f, &format!("fields.{name}[{r}][{c}]"))?);
                }
            }
            FieldMatrix::new(rows, cols, data)
        };
        if self.fields.a.len() != nc {
            return Err(Error::invalid(format!("`fields.A` must have {nc} entries")));
        }
        let a = self
            .fields
            .a
            .iter()
            .enumerate()
            .map(|(i, m)| matrix(m, n, n, &format!("A[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        KppSystem::new(
            a,
            matrix(&self.fields.q, nc, n, "q")?,
            matrix(&self.fields.l, nc, nc, "L")?,
            matrix(&self.fields.b, nc, nc, "B")?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_rescaling() {
        let mut s = KppSystem::scalar(1.0, 0.0, 0.0, 1.0);
        s.temporal_period = 4.0;
        s.spatial_periods = vec![2.0];
        for f in s.a.iter_mut().flat_map(|m| m.data.iter_mut()) {
            *f = f.with_periods(4.0, vec![2.0]);
        }
        let u = s.nondimensionalize();
        assert!((u.diffusion(0).get(0, 0).value(0.0, &[0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reaction_scales_with_time_period() {
        let json = r#"{"N":1,"n":1,"T":2.0,"periods":[1.0],
            "fields":{"A":[[[1.0]]],"q":[[0.0]],"L":[[1.0]],"B":[[1.0]]}}"#;
        let s = KppSystem::from_json(json).unwrap().nondimensionalize();
        assert_eq!(s.coupling().get(0, 0).value(0.0, &[0.0]), 2.0);
    }

    #[test]
    fn nondimensionalize_is_idempotent() {
        let json = r#"{"N":1,"n":2,"T":3.0,"periods":[2.0,5.0],
            "fields":{"A":[[[1.0,0.5],[0.5,2.0]]],"q":[[0.3,[{"kt":1,"kx":[0,1],"cos":0.2,"sin":0.1}]]],
            "L":[[1.0]],"B":[[1.0]]}}"#;
        let once = KppSystem::from_json(json).unwrap().nondimensionalize();
        assert_eq!(once.nondimensionalize(), once);
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"N":2,"n":1,
            "fields":{"A":[[[1.0]],[[[{"kt":0,"kx":[0],"cos":2.0,"sin":0.0},{"kt":0,"kx":[1],"cos":0.5,"sin":0.0}]]]],
            "q":[[0.0],[0.1]],"L":[[0.0,1.0],[[{"kt":1,"kx":[0],"cos":0.0,"sin":1.0}],0.0]],"B":[[1.0,1.0],[1.0,1.0]]}}"#;
        let s = KppSystem::from_json(json).unwrap();
        let back = KppSystem::from_json(&s.to_json().to_string()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let json = r#"{"N":1,"n":1,"fields":{"A":[[[1.0]]],"q":[[0.0]],"L":[[1.0]],"B":[["x"]]}}"#;
        let err = KppSystem::from_json(json).unwrap_err().to_string();
        assert!(err.contains("fields.B"), "{err}");
    }

    #[test]
    fn asymmetric_diffusion_is_rejected() {
        let json = r#"{"N":1,"n":2,"fields":{"A":[[[1.0,0.5],[0.4,1.0]]],"q":[[0.0,0.0]],"L":[[1.0]],"B":[[1.0]]}}"#;
        assert!(KppSystem::from_json(json).is_err());
    }
}
