//! Product quadrature over SU(2) and axis-structured angle node sets.

use super::EulerAngles;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One coordinate axis of an angle node set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleAxis {
    pub values: Vec<f64>,
    /// Period of the coordinate when the axis wraps, `None` for an open axis.
    pub period: Option<f64>,
}

impl AngleAxis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Three-point first-derivative stencil at node `k` as (index, coefficient) pairs.
    ///
    /// Periodic axes use the uniform centred difference; open axes use the
    /// non-uniform centred formula inside and one-sided formulas at the ends.
    pub fn derivative_stencil(&self, k: usize) -> Vec<(usize, f64)> {
        let n = self.values.len();
        if n < 2 {
            return Vec::new();
        }
        if let Some(p) = self.period {
            let h = p / n as f64;
            if n == 2 {
                // spacing p/2 wraps onto itself; the centred difference vanishes
                return vec![((k + 1) % n, 0.0)];
            }
            return vec![((k + 1) % n, 0.5 / h), ((k + n - 1) % n, -0.5 / h)];
        }
        let x = &self.values;
        if n == 2 {
            let inv = 1.0 / (x[1] - x[0]);
            return vec![(1, inv), (0, -inv)];
        }
        let (i0, i1, i2) = if k == 0 {
            (0, 1, 2)
        } else if k == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        lagrange_derivative_weights(x[k], [x[i0], x[i1], x[i2]])
            .into_iter()
            .zip([i0, i1, i2])
            .map(|(w, i)| (i, w))
            .collect()
    }
}

/// Weights of the derivative at `t` of the quadratic through three abscissae.
fn lagrange_derivative_weights(t: f64, x: [f64; 3]) -> [f64; 3] {
    let mut w = [0.0; 3];
    for j in 0..3 {
        let mut denom = 1.0;
        let mut numer = 0.0;
        for m in 0..3 {
            if m == j {
                continue;
            }
            denom *= x[j] - x[m];
            let mut prod = 1.0;
            for l in 0..3 {
                if l != j && l != m {
                    prod *= t - x[l];
                }
            }
            numer += prod;
        }
        w[j] = numer / denom;
    }
    w
}

/// Tensor-product set of angle nodes with optional quadrature weights.
///
/// Node `(ia, ib, ig)` sits at flat index `(ia·n_β + ib)·n_γ + ig`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub alpha: AngleAxis,
    pub beta: AngleAxis,
    pub gamma: AngleAxis,
    /// Quadrature weight per node, including the sin α measure.
    pub weights: Vec<f64>,
    /// True when the γ axis covers [0, 2π) only and weights are doubled.
    pub gamma_reduced: bool,
}

impl AngleGrid {
    /// Product rule: Gauss–Legendre in cos α, trapezoid in β over [0, 2π) and γ over [0, 4π).
    ///
    /// β nodes are displaced by half a spacing so that none falls on the
    /// planes β = 0 or β = π where simple states have angular nodes.
    pub fn quadrature(n_alpha: usize, n_beta: usize, n_gamma: usize) -> Self {
        assert!(
            n_alpha >= 1 && n_beta >= 1 && n_gamma >= 1,
            "empty quadrature axis"
        );
        let (x, wx) = gauss_legendre(n_alpha);
        // ascending α means descending cos α
        let mut pairs: Vec<(f64, f64)> = x
            .iter()
            .zip(&wx)
            .map(|(&c, &w)| (c.clamp(-1.0, 1.0).acos(), w))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let hb = 2.0 * PI / n_beta as f64;
        let hg = 4.0 * PI / n_gamma as f64;
        let alpha = AngleAxis {
            values: pairs.iter().map(|p| p.0).collect(),
            period: None,
        };
        let beta = AngleAxis {
            values: (0..n_beta).map(|k| (k as f64 + 0.5) * hb).collect(),
            period: Some(2.0 * PI),
        };
        let gamma = AngleAxis {
            values: (0..n_gamma).map(|k| k as f64 * hg).collect(),
            period: Some(4.0 * PI),
        };
        let mut weights = Vec::with_capacity(n_alpha * n_beta * n_gamma);
        for p in &pairs {
            for _ in 0..n_beta {
                for _ in 0..n_gamma {
                    weights.push(p.1 * hb * hg);
                }
            }
        }
        Self {
            alpha,
            beta,
            gamma,
            weights,
            gamma_reduced: false,
        }
    }

    /// The default 8 × 8 × 16 rule.
    pub fn default_quadrature() -> Self {
        Self::quadrature(8, 8, 16)
    }

    /// Keeps the γ ∈ [0, 2π) half of an even γ axis and doubles the weights.
    ///
    /// Exact for integrands invariant under γ → γ + 2π, such as any product
    /// of two spin-½ functions.
    pub fn reduce_gamma(&self) -> Self {
        if self.gamma_reduced {
            return self.clone();
        }
        let ng = self.gamma.len();
        assert!(ng % 2 == 0, "γ reduction needs an even node count");
        let half = ng / 2;
        let gamma = AngleAxis {
            values: self.gamma.values[..half].to_vec(),
            period: Some(2.0 * PI),
        };
        let mut weights = Vec::with_capacity(self.weights.len() / 2);
        for ia in 0..self.alpha.len() {
            for ib in 0..self.beta.len() {
                for ig in 0..half {
                    weights.push(2.0 * self.weights[self.flat(ia, ib, ig)]);
                }
            }
        }
        Self {
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            gamma,
            weights,
            gamma_reduced: true,
        }
    }

    /// Open 3 × 3 × 3 stencil of spacing `delta` centred on `center`, with zero weights.
    pub fn cluster(center: EulerAngles, delta: f64) -> Self {
        let axis = |c: f64| AngleAxis {
            values: vec![c - delta, c, c + delta],
            period: None,
        };
        Self {
            alpha: axis(center.alpha),
            beta: axis(center.beta),
            gamma: axis(center.gamma),
            weights: vec![0.0; 27],
            gamma_reduced: false,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len() * self.beta.len() * self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.alpha.len(), self.beta.len(), self.gamma.len()]
    }

    #[inline]
    pub fn flat(&self, ia: usize, ib: usize, ig: usize) -> usize {
        (ia * self.beta.len() + ib) * self.gamma.len() + ig
    }

    #[inline]
    pub fn unflat(&self, k: usize) -> [usize; 3] {
        let ng = self.gamma.len();
        let nb = self.beta.len();
        [k / (nb * ng), (k / ng) % nb, k % ng]
    }

    pub fn node(&self, k: usize) -> EulerAngles {
        let [ia, ib, ig] = self.unflat(k);
        EulerAngles::raw(
            self.alpha.values[ia],
            self.beta.values[ib],
            self.gamma.values[ig],
        )
    }

    pub fn nodes(&self) -> Vec<EulerAngles> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    pub fn axis(&self, r: usize) -> &AngleAxis {
        match r {
            0 => &self.alpha,
            1 => &self.beta,
            _ => &self.gamma,
        }
    }

    /// Stencil for ∂/∂α^r at node `k` in flat indices.
    pub fn derivative_stencil(&self, k: usize, r: usize) -> Vec<(usize, f64)> {
        let idx = self.unflat(k);
        self.axis(r)
            .derivative_stencil(idx[r])
            .into_iter()
            .map(|(j, w)| {
                let mut m = idx;
                m[r] = j;
                (self.flat(m[0], m[1], m[2]), w)
            })
            .collect()
    }

    /// Sum of `f` times the node weights.
    pub fn integrate<F: FnMut(&EulerAngles) -> C64>(&self, mut f: F) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.len() {
            acc += f(&self.node(k)) * self.weights[k];
        }
        acc
    }

    pub fn integrate_real<F: FnMut(&EulerAngles) -> f64>(&self, mut f: F) -> f64 {
        (0..self.len())
            .map(|k| f(&self.node(k)) * self.weights[k])
            .sum()
    }

    /// Smallest distance of any α node from the poles.
    pub fn pole_clearance(&self) -> f64 {
        self.alpha
            .values
            .iter()
            .map(|&a| a.min(PI - a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let rule = GaussLegendre::new(n).expect("degree ≥ 2");
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::basis_u;

    #[test]
    fn total_measure() {
        let g = AngleGrid::default_quadrature();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 16.0 * PI * PI).abs() < 1e-10);
        let r = g.reduce_gamma();
        assert!((r.weights.iter().sum::<f64>() - total).abs() < 1e-10);
    }

    #[test]
    fn orthonormal_basis() {
        let g = AngleGrid::default_quadrature();
        for a in 0..4 {
            for b in 0..4 {
                let v = g.integrate(|x| {
                    let u = basis_u(x);
                    u[a].conj() * u[b]
                });
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((v - C64::from(expect)).norm() < 1e-12, "{a}{b}: {v}");
            }
        }
    }

    #[test]
    fn stencil_differentiates_quadratic() {
        let axis = AngleAxis {
            values: vec![0.1, 0.3, 0.7, 1.2],
            period: None,
        };
        for k in 0..4 {
            let d: f64 = axis
                .derivative_stencil(k)
                .iter()
                .map(|&(i, w)| w * axis.values[i].powi(2))
                .sum();
            assert!((d - 2.0 * axis.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_roundtrip() {
        let g = AngleGrid::quadrature(3, 4, 6);
        for k in 0..g.len() {
            let [a, b, c] = g.unflat(k);
            assert_eq!(g.flat(a, b, c), k);
        }
        assert!(g.pole_clearance() > 0.1);
    }
}
