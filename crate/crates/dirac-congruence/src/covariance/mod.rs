//! First-order Lorentz covariance checks in the field and trajectory pictures.
//!
//! The spatial checks compare the infinitesimal transformation laws against
//! exact boosts of plane-wave solutions; the material checks build the label
//! transformation functions from a trajectory bundle and measure how far the
//! transformed quantities sit from an exactly boosted reference.

mod material;

pub use material::{
    check_material_covariance, label_shift_functions, plane_wave_covariance, CovarianceReport,
    LabelShift, MaterialCheck, ScalingEntry, ROUNDOFF_FLOOR,
};

use crate::angular_algebra::{
    basis_u, operator_matrix, EulerAngles, OperatorId, SpinCoefficients, SpinMatrix,
};
use crate::spinor_core::majorana_split;
use crate::trajectory_engine::{velocity, Branch, TrajectoryError};
use crate::PhysicalParams;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible |ε|.
pub const MAX_EPS: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CovarianceError {
    #[error("|ε| = {norm} exceeds the first-order limit {max}")]
    EpsTooLarge { norm: f64, max: f64 },
    #[error("|ψ| = {psi:e} too small for a velocity ratio")]
    NodeSingularity { psi: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Boost velocity as a fraction of c.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub eps: [f64; 3],
}

impl BoostParams {
    pub fn new(eps: [f64; 3]) -> Result<Self, CovarianceError> {
        let b = Self { eps };
        if !eps.iter().all(|e| e.is_finite()) || b.norm() > MAX_EPS {
            return Err(CovarianceError::EpsTooLarge {
                norm: b.norm(),
                max: MAX_EPS,
            });
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        self.eps.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        (0..3).map(|i| self.eps[i] * v[i]).sum()
    }
}

/// Coefficient matrix of n̂₁m̂_i (i in 1..=3).
pub fn n1m_hat(i: usize) -> SpinMatrix {
    operator_matrix(OperatorId::N1MHat(i), 1.0).expect("index in range")
}

/// Σ ε^i n̂₁m̂_i.
pub fn boost_generator(b: &BoostParams) -> SpinMatrix {
    (0..3).fold(SpinMatrix::zeros(), |acc, i| {
        acc + n1m_hat(i + 1) * C64::from(b.eps[i])
    })
}

/// I + ½ Σ ε^i n̂₁m̂_i, the infinitesimal spinor map.
pub fn first_order_spinor(b: &BoostParams) -> SpinMatrix {
    SpinMatrix::identity() + boost_generator(b) * C64::from(0.5)
}

/// Finite boost with velocity εc whose linearisation is [`first_order_spinor`].
pub fn exact_spinor(b: &BoostParams) -> SpinMatrix {
    let n = b.norm();
    if n == 0.0 {
        return SpinMatrix::identity();
    }
    let eta = n.atanh();
    let g = boost_generator(b) * C64::from(1.0 / n);
    SpinMatrix::identity() * C64::from((0.5 * eta).cosh()) + g * C64::from((0.5 * eta).sinh())
}

/// x′ = x − εct, t′ = t − ε·x/c.
pub fn boost_event_first_order(x: [f64; 3], t: f64, b: &BoostParams, c: f64) -> ([f64; 3], f64) {
    (
        [
            x[0] - b.eps[0] * c * t,
            x[1] - b.eps[1] * c * t,
            x[2] - b.eps[2] * c * t,
        ],
        t - b.dot(&x) / c,
    )
}

/// Exact inverse of the linear map [`boost_event_first_order`].
pub fn unboost_event_first_order(
    xp: [f64; 3],
    tp: f64,
    b: &BoostParams,
    c: f64,
) -> ([f64; 3], f64) {
    let t = (tp + b.dot(&xp) / c) / (1.0 - b.norm().powi(2));
    (
        [
            xp[0] + b.eps[0] * c * t,
            xp[1] + b.eps[1] * c * t,
            xp[2] + b.eps[2] * c * t,
        ],
        t,
    )
}

/// Pulls a field back through the infinitesimal transformation:
/// Ψ′(x′, t′) = (I + ½ε^i n̂₁m̂_i) Ψ(x, t).
pub fn boost_spatial<F>(
    field: F,
    b: BoostParams,
    c: f64,
) -> impl Fn([f64; 3], f64) -> SpinCoefficients
where
    F: Fn([f64; 3], f64) -> SpinCoefficients,
{
    let s = first_order_spinor(&b);
    move |xp, tp| {
        let (x, t) = unboost_event_first_order(xp, tp, &b, c);
        s * field(x, t)
    }
}

/// Ψ(x, t) = a·exp(i(k·x − νt)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub k: [f64; 3],
    pub amp: SpinCoefficients,
    /// Angular frequency ν (energy over ħ).
    pub nu: f64,
}

impl PlaneWave {
    /// Zero-momentum positive-energy wave; `pol` must have vanishing lower components.
    pub fn rest(pol: SpinCoefficients, p: &PhysicalParams) -> Result<Self, CovarianceError> {
        if pol[2].norm() + pol[3].norm() > 1e-14 {
            return Err(CovarianceError::Invalid(
                "rest-frame polarisation must be an upper spinor".into(),
            ));
        }
        Ok(Self {
            k: [0.0; 3],
            amp: pol,
            nu: p.rest_energy() / p.hbar,
        })
    }

    pub fn dirac_at(&self, x: [f64; 3], t: f64) -> SpinCoefficients {
        let ph = self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2] - self.nu * t;
        self.amp * C64::from_polar(1.0, ph)
    }

    /// Majorana coefficients of one branch and their spatial gradient.
    pub fn majorana_at(
        &self,
        x: [f64; 3],
        t: f64,
        branch: Branch,
    ) -> (SpinCoefficients, [SpinCoefficients; 3]) {
        let psi = self.dirac_at(x, t);
        let pick = |v: &SpinCoefficients| {
            let (r, i) = majorana_split(v);
            match branch {
                Branch::R => r,
                Branch::I => i,
            }
        };
        let g = |j: usize| pick(&(psi * C64::new(0.0, self.k[j])));
        (pick(&psi), [g(0), g(1), g(2)])
    }

    /// Coefficient residual of ∂_tψ − ∂_i(c n̂₁m̂_iψ) − n̂₃(mc²ψ/ħ) = 0, relative to ν|a|.
    pub fn dirac_residual(&self, p: &PhysicalParams) -> f64 {
        let n3 = operator_matrix(OperatorId::NHat(3), 1.0).expect("index in range");
        let mut r = self.amp * C64::new(0.0, -self.nu)
            - n3 * self.amp * C64::from(p.rest_energy() / p.hbar);
        for i in 0..3 {
            r -= n1m_hat(i + 1) * self.amp * C64::new(0.0, p.c * self.k[i]);
        }
        r.norm() / (self.nu.abs() * self.amp.norm())
    }

    /// Image under the infinitesimal transformation, still a plane wave.
    pub fn boosted_first_order(&self, b: &BoostParams, p: &PhysicalParams) -> Self {
        // phase k·x − νt with x = x′ + εct, t = (t′ + ε·x′/c)/(1 − ε²)
        let d = 1.0 - b.norm().powi(2);
        let kdote = b.dot(&self.k);
        let nu = self.nu / d - p.c * kdote / d;
        let k = [0, 1, 2].map(|i| self.k[i] - (self.nu - p.c * kdote) * b.eps[i] / (p.c * d));
        Self {
            k,
            amp: first_order_spinor(b) * self.amp,
            nu,
        }
    }

    /// Image under the finite boost with velocity εc.
    pub fn boosted_exact(&self, b: &BoostParams, p: &PhysicalParams) -> Self {
        let n = b.norm();
        if n == 0.0 {
            return *self;
        }
        let gam = 1.0 / (1.0 - n * n).sqrt();
        let e = b.eps.map(|v| v / n);
        let kpar = e[0] * self.k[0] + e[1] * self.k[1] + e[2] * self.k[2];
        let nu = gam * (self.nu - p.c * n * kpar);
        let kpar_new = gam * (kpar - n * self.nu / p.c);
        let k = [0, 1, 2].map(|i| self.k[i] + (kpar_new - kpar) * e[i]);
        Self {
            k,
            amp: exact_spinor(b) * self.amp,
            nu,
        }
    }
}

/// ψ = u(α)·Φ, which is real for Majorana coefficients.
fn eval_real(phi: &SpinCoefficients, angles: &EulerAngles) -> f64 {
    let u = basis_u(angles);
    (0..4).map(|a| u[a] * phi[a]).sum::<C64>().re
}

/// Outcome of comparing an exact boost with the first-order transformation laws.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VelocityTransformCheck {
    /// |ψ′ − ψ(1 − ε·v/2c)| / |ψ|.
    pub density_residual: f64,
    /// |v′ − (v + (ε·v)v/2c − (c/2)ε^j n̂₁m̂_in̂₁m̂_jψ/ψ)| / c.
    pub velocity_residual: f64,
    /// |v′|/c of the boosted state.
    pub boosted_speed_ratio: f64,
}

/// Boosts Majorana coefficients `phi` exactly and compares density and
/// velocity at `angles` with the first-order laws.
pub fn check_velocity_transform(
    phi: &SpinCoefficients,
    angles: &EulerAngles,
    b: &BoostParams,
    p: &PhysicalParams,
) -> Result<VelocityTransformCheck, CovarianceError> {
    let psi = eval_real(phi, angles);
    if psi.abs() <= 1e-12 * phi.norm() {
        return Err(CovarianceError::NodeSingularity { psi: psi.abs() });
    }
    let v = velocity(phi, angles, p, 0.0)?;
    let boosted = exact_spinor(b) * phi;
    let psi_b = eval_real(&boosted, angles);
    let vb = velocity(&boosted, angles, p, 0.0)?;
    let ev = b.dot(&v);
    let mut pred = [0.0; 3];
    for (i, pi) in pred.iter_mut().enumerate() {
        let mut corr = 0.0;
        for j in 0..3 {
            if b.eps[j] != 0.0 {
                let w = n1m_hat(i + 1) * n1m_hat(j + 1) * phi;
                corr += b.eps[j] * eval_real(&w, angles) / psi;
            }
        }
        *pi = v[i] + ev * v[i] / (2.0 * p.c) - 0.5 * p.c * corr;
    }
    let dv = (0..3)
        .map(|i| (vb[i] - pred[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(VelocityTransformCheck {
        density_residual: (psi_b - psi * (1.0 - ev / (2.0 * p.c))).abs() / psi.abs(),
        velocity_residual: dv / p.c,
        boosted_speed_ratio: vb.iter().map(|x| x * x).sum::<f64>().sqrt() / p.c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor_core::GammaSet;

    fn e1() -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from(1.0);
        v
    }

    #[test]
    fn generator_is_minus_alpha() {
        let g = GammaSet::dirac();
        for i in 1..=3 {
            assert!((n1m_hat(i) + g.alpha(i)).norm() < 1e-15);
        }
    }

    #[test]
    fn eps_limit() {
        assert!(BoostParams::new([0.02, 0.0, 0.0]).is_err());
        assert!(BoostParams::new([0.005, 0.005, 0.0]).is_ok());
    }

    #[test]
    fn exact_boost_preserves_the_equation() {
        let p = PhysicalParams::default();
        let w = PlaneWave::rest(e1(), &p).unwrap();
        assert!(w.dirac_residual(&p) < 1e-15);
        let b = BoostParams::new([0.006, -0.003, 0.004]).unwrap();
        let x = w.boosted_exact(&b, &p);
        assert!(x.dirac_residual(&p) < 1e-14, "{}", x.dirac_residual(&p));
        // and it is the pointwise image of the original field
        let (xp, tp) = ([0.3, -1.2, 0.8], 0.7);
        let n = b.norm();
        let gam = 1.0 / (1.0 - n * n).sqrt();
        let e = b.eps.map(|v| v / n);
        let par = e[0] * xp[0] + e[1] * xp[1] + e[2] * xp[2];
        let t = gam * (tp + n * par / p.c);
        let xpar = gam * (par + n * p.c * tp);
        let xs = [0, 1, 2].map(|i| xp[i] + (xpar - par) * e[i]);
        let lhs = x.dirac_at(xp, tp);
        let rhs = exact_spinor(&b) * w.dirac_at(xs, t);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn first_order_residual_is_quadratic() {
        let p = PhysicalParams::default();
        let w = PlaneWave::rest(e1(), &p).unwrap();
        let r = |e: f64| {
            w.boosted_first_order(&BoostParams::new([e, 0.0, 0.0]).unwrap(), &p)
                .dirac_residual(&p)
        };
        assert_eq!(r(0.0), 0.0);
        let ratio = r(1e-3) / r(5e-4);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn spatial_boost_matches_plane_wave_image() {
        let p = PhysicalParams::default();
        let w = PlaneWave::rest(e1(), &p).unwrap();
        let b = BoostParams::new([1e-3, 2e-3, -5e-4]).unwrap();
        let f = boost_spatial(|x, t| w.dirac_at(x, t), b, p.c);
        let img = w.boosted_first_order(&b, &p);
        for &(x, t) in &[([0.1, 0.2, 0.3], 0.0), ([-2.0, 1.0, 4.0], 1.7)] {
            assert!((f(x, t) - img.dirac_at(x, t)).norm() < 1e-13);
        }
        let id = boost_spatial(
            |x, t| w.dirac_at(x, t),
            BoostParams::new([0.0; 3]).unwrap(),
            p.c,
        );
        assert_eq!(id([1.0, 2.0, 3.0], 0.5), w.dirac_at([1.0, 2.0, 3.0], 0.5));
    }

    #[test]
    fn velocity_law_is_second_order() {
        let p = PhysicalParams::default();
        let w = PlaneWave::rest(e1(), &p).unwrap();
        let (phi, _) = w.majorana_at([0.0; 3], 0.3, Branch::R);
        let ang = EulerAngles::raw(1.0, 0.4, 2.1);
        let dir = [2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0];
        let chk = |e: f64| {
            check_velocity_transform(
                &phi,
                &ang,
                &BoostParams::new(dir.map(|d| d * e)).unwrap(),
                &p,
            )
            .unwrap()
        };
        let z = chk(0.0);
        assert_eq!(z.density_residual, 0.0);
        assert_eq!(z.velocity_residual, 0.0);
        let (a, b) = (chk(1e-3), chk(5e-4));
        let rd = a.density_residual / b.density_residual;
        let rv = a.velocity_residual / b.velocity_residual;
        assert!((3.5..=4.5).contains(&rd), "{rd}");
        assert!((3.5..=4.5).contains(&rv), "{rv}");
        assert!(a.boosted_speed_ratio >= 1.0 - 1e-9);
    }
}
