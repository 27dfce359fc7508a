//! Dirac-representation gamma matrices, the Majorana split and bilinear currents.

use crate::angular_algebra::{SpinCoefficients, SpinMatrix};
use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the charge-conjugation eigenspinor test.
pub const MAJORANA_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinorError {
    #[error("spinor violates the Majorana constraint: |iγ²Φ* ∓ Φ| = {deviation:e}")]
    MajoranaConstraintViolation { deviation: f64 },
}

/// γ⁰..γ³ in the Dirac representation with the Pauli blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSet {
    pub gamma: [SpinMatrix; 4],
    pub pauli: [Matrix2<C64>; 3],
}

fn z() -> C64 {
    C64::new(0.0, 0.0)
}

impl GammaSet {
    pub fn dirac() -> Self {
        let o = C64::from(1.0);
        let i = C64::new(0.0, 1.0);
        let pauli = [
            Matrix2::new(z(), o, o, z()),
            Matrix2::new(z(), -i, i, z()),
            Matrix2::new(o, z(), z(), -o),
        ];
        let mut gamma = [SpinMatrix::zeros(); 4];
        for a in 0..4 {
            gamma[0][(a, a)] = if a < 2 { o } else { -o };
        }
        for (k, s) in pauli.iter().enumerate() {
            let g = &mut gamma[k + 1];
            for r in 0..2 {
                for c in 0..2 {
                    g[(r, c + 2)] = s[(r, c)];
                    g[(r + 2, c)] = -s[(r, c)];
                }
            }
        }
        Self { gamma, pauli }
    }

    /// γ⁰γ^i for i = 1..3.
    pub fn alpha(&self, i: usize) -> SpinMatrix {
        self.gamma[0] * self.gamma[i]
    }
}

/// Density and flux of a bilinear current.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    pub density: f64,
    pub flux: [f64; 3],
}

impl CurrentSample {
    /// j⁰j⁰ − j·j in units where the common factor c is dropped.
    pub fn interval(&self) -> f64 {
        self.density * self.density - self.flux.iter().map(|f| f * f).sum::<f64>()
    }
}

/// iγ²Ψ*, which realises complex conjugation of ψ = Ψ^a u_a.
pub fn conjugation_map(psi: &SpinCoefficients) -> SpinCoefficients {
    SpinCoefficients::new(psi[3].conj(), -psi[2].conj(), -psi[1].conj(), psi[0].conj())
}

/// Φ_R = ½(Ψ + iγ²Ψ*), Φ_I = (1/2i)(Ψ − iγ²Ψ*).
pub fn majorana_split(psi: &SpinCoefficients) -> (SpinCoefficients, SpinCoefficients) {
    let cc = conjugation_map(psi);
    let r = (psi + cc) * C64::from(0.5);
    let im = (psi - cc) * C64::new(0.0, -0.5);
    (r, im)
}

/// Ψ = Φ_R + iΦ_I.
pub fn majorana_join_unchecked(
    phi_r: &SpinCoefficients,
    phi_i: &SpinCoefficients,
) -> SpinCoefficients {
    phi_r + phi_i * C64::new(0.0, 1.0)
}

/// Ψ = Φ_R + iΦ_I after confirming both inputs are +1 eigenspinors of iγ²(·)*.
pub fn majorana_join(
    phi_r: &SpinCoefficients,
    phi_i: &SpinCoefficients,
) -> Result<SpinCoefficients, SpinorError> {
    let dev = majorana_deviation(phi_r).max(majorana_deviation(phi_i));
    if dev > MAJORANA_TOL {
        return Err(SpinorError::MajoranaConstraintViolation { deviation: dev });
    }
    Ok(majorana_join_unchecked(phi_r, phi_i))
}

/// |iγ²Φ* − Φ|, zero for the real-function branch.
pub fn majorana_deviation(phi: &SpinCoefficients) -> f64 {
    (conjugation_map(phi) - phi).norm()
}

fn bilinear(left: &SpinCoefficients, m: &SpinMatrix, right: &SpinCoefficients) -> C64 {
    (left.adjoint() * m * right)[(0, 0)]
}

/// j⁰/c = Ψ†Ψ, j^i/c = Ψ†γ⁰γ^iΨ.
pub fn dirac_current(psi: &SpinCoefficients) -> CurrentSample {
    let g = GammaSet::dirac();
    let mut flux = [0.0; 3];
    for (i, f) in flux.iter_mut().enumerate() {
        *f = bilinear(psi, &g.alpha(i + 1), psi).re;
    }
    CurrentSample {
        density: psi.norm_squared(),
        flux,
    }
}

/// Density Φ†Φ and flux Φ†γ⁰γ^iΦ of a Majorana spinor.
pub fn majorana_current(phi: &SpinCoefficients) -> CurrentSample {
    dirac_current(phi)
}

/// The gauge-dependent complex current (Ψᵀγ²Ψ, Ψᵀγ²γ⁰γ^iΨ).
pub fn complex_current(psi: &SpinCoefficients) -> (C64, [C64; 3]) {
    let g = GammaSet::dirac();
    let t = |m: &SpinMatrix| (psi.transpose() * m * psi)[(0, 0)];
    let density = t(&g.gamma[2]);
    let mut flux = [z(); 3];
    for (i, f) in flux.iter_mut().enumerate() {
        *f = t(&(g.gamma[2] * g.alpha(i + 1)));
    }
    (density, flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::{basis_u, eval_spin, EulerAngles};

    fn e(k: usize) -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[k] = C64::from(1.0);
        v
    }

    #[test]
    fn clifford_relations() {
        let g = GammaSet::dirac();
        for mu in 0..4 {
            for nu in 0..4 {
                let ac = g.gamma[mu] * g.gamma[nu] + g.gamma[nu] * g.gamma[mu];
                let eta = if mu != nu {
                    0.0
                } else if mu == 0 {
                    2.0
                } else {
                    -2.0
                };
                assert!((ac - SpinMatrix::identity() * C64::from(eta)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn split_of_e1() {
        let (r, i) = majorana_split(&e(0));
        assert!((r - (e(0) + e(3)) * C64::from(0.5)).norm() < 1e-15);
        assert!((i - (e(0) - e(3)) * C64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(majorana_deviation(&r) < 1e-15 && majorana_deviation(&i) < 1e-15);
        let back = majorana_join(&r, &i).unwrap();
        assert!((back - e(0)).norm() < 1e-15);
    }

    #[test]
    fn conjugation_is_pointwise_conjugate() {
        let psi = SpinCoefficients::new(
            C64::new(0.3, 1.0),
            C64::new(-0.2, 0.4),
            C64::new(0.7, -0.1),
            C64::new(0.0, 0.5),
        );
        let x = EulerAngles::raw(1.1, 2.3, 5.0);
        let lhs = eval_spin(&psi, &x).conj();
        let rhs = eval_spin(&conjugation_map(&psi), &x);
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((conjugation_map(&conjugation_map(&psi)) - psi).norm() < 1e-15);
        let u = basis_u(&x);
        assert!((u[0].conj() - u[3]).norm() < 1e-15 && (u[1].conj() + u[2]).norm() < 1e-15);
    }

    #[test]
    fn currents_of_e1() {
        let j = dirac_current(&e(0));
        assert_eq!(j.density, 1.0);
        assert!(j.flux.iter().all(|f| f.abs() < 1e-15));
        let (r, _) = majorana_split(&e(0));
        assert!((majorana_current(&r).density - 0.5).abs() < 1e-15);
    }

    #[test]
    fn join_rejects_non_majorana() {
        assert!(majorana_join(&e(0), &SpinCoefficients::zeros()).is_err());
    }
}
