use serde::{Deserialize, Serialize};

use crate::coeffs::{KppSystem, PeriodicField};

/// Constants with `Lu − (Bu)∘u ≤ r (1ᵀu)(K1 − u)` for every `u ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticEnvelope {
    pub r: f64,
    pub k: f64,
}

/// Guaranteed `(lower, upper)` bounds of a field from its mean and mode amplitudes.
pub fn field_bounds(f: &PeriodicField) -> (f64, f64) {
    let mut mean = 0.0;
    let mut osc = 0.0;
    for m in &f.modes {
        if m.kt == 0 && m.kx.iter().all(|k| *k == 0) {
            mean += m.cos;
        } else {
            osc += m.cos.hypot(m.sin);
        }
    }
    (mean - osc, mean + osc)
}

/// `r = min B̲`, `K = max_i Σ_j max(L̄_ij, 0) / r`.
pub fn logistic_envelope(sys: &KppSystem) -> LogisticEnvelope {
    let n = sys.n_comp();
    let r = sys.competition().iter().map(|f| field_bounds(f).0).fold(f64::INFINITY, f64::min);
    let row_max = (0..n)
        .map(|i| (0..n).map(|j| field_bounds(sys.coupling().get(i, j)).1.max(0.0)).sum::<f64>())
        .fold(0.0, f64::max);
    LogisticEnvelope { r, k: row_max / r }
}

impl LogisticEnvelope {
    /// `min_i [r S (K − u_i) − (Lu − (Bu)∘u)_i]` at one point, `S = 1ᵀu`.
    pub fn margin(&self, l: &[Vec<f64>], b: &[Vec<f64>], u: &[f64]) -> f64 {
        let s: f64 = u.iter().sum();
        (0..u.len())
            .map(|i| {
                let lu: f64 = l[i].iter().zip(u).map(|(a, v)| a * v).sum();
                let bu: f64 = b[i].iter().zip(u).map(|(a, v)| a * v).sum();
                self.r * s * (self.k - u[i]) - (lu - bu * u[i])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_logistic() {
        let e = logistic_envelope(&KppSystem::scalar(1.0, 0.0, 1.0, 1.0));
        assert_eq!((e.r, e.k), (1.0, 1.0));
        // u − u² = u(1 − u) holds with equality.
        assert!(e.margin(&[vec![1.0]], &[vec![1.0]], &[0.3]).abs() < 1e-15);
    }

    #[test]
    fn coupled_pair() {
        let sys = KppSystem::constant(
            1,
            &[1.0, 1.0],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0, 2.0], vec![2.0, 0.0]],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(logistic_envelope(&sys), LogisticEnvelope { r: 1.0, k: 2.0 });
    }
}
