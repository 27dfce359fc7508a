//! Material-picture integration of the two Majorana congruences, deformation
//! tracking, and reconstruction of the spinor field from trajectories.

mod deformation;
mod integrate;
pub mod interp;
mod io;
mod labels;
mod oracle;
mod planewave;
mod reconstruct;

pub use deformation::{cofactor6, deformation_identities_check, leibniz_det6, DeformationReport};
pub use integrate::{integrate_bundle, IntegrationOptions};
pub use io::{read_bundle, read_bundle_bytes, write_bundle, write_bundle_bytes, write_bundle_csv};
pub use labels::{InitialState, LabelGrid};
pub use oracle::OracleSampler;
pub use planewave::{plane_wave_displacement, plane_wave_paths};
pub use reconstruct::{reconstruct_dirac, reconstruct_majorana, Reconstruction};

use crate::angular_algebra::{
    basis_u, euler_matrices, operator_matrix, rotation_closed_form, AlgebraError, EulerAngles,
    OperatorId, SpinCoefficients, SpinMatrix,
};
use crate::spinor_core::GammaSet;
use crate::PhysicalParams;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Largest allowed ω·dt.
pub const MAX_OMEGA_DT: f64 = 0.05;
/// Jacobians below this flag the label.
pub const J_MIN: f64 = 1e-6;
/// Relative node threshold: |ψ| ≤ NODE_REL·max|ψ₀| freezes a label.
pub const NODE_REL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("|ψ| = {psi:e} is at or below the node threshold {eps:e}")]
    NodeSingularity { psi: f64, eps: f64 },
    #[error("sec φ₊ diverges: cos φ₊ = {cos_phi:e}")]
    SecantSingularity { cos_phi: f64 },
    #[error("ω·dt = {omega_dt} exceeds {max}")]
    StepTooLarge { omega_dt: f64, max: f64 },
    #[error("Jacobian {j:e} below {min:e} at label {label}")]
    JacobianCollapse { label: usize, j: f64, min: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Which Majorana congruence a bundle carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    R,
    I,
}

impl Branch {
    pub fn tag(&self) -> u8 {
        match self {
            Branch::R => 0,
            Branch::I => 1,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Ok(Branch::R),
            "I" => Ok(Branch::I),
            _ => Err(format!("unknown branch '{s}', expected R or I")),
        }
    }
}

/// Source of the velocity field during integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Velocities from the interpolated spectral oracle.
    Validation,
    /// Velocities from trajectory data alone, ψ = J⁻¹ψ₀.
    SelfContained,
}

impl Mode {
    pub fn tag(&self) -> u8 {
        match self {
            Mode::Validation => 0,
            Mode::SelfContained => 1,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "validation" => Ok(Mode::Validation),
            "self_contained" => Ok(Mode::SelfContained),
            _ => Err(format!(
                "unknown mode '{s}', expected validation or self_contained"
            )),
        }
    }
}

/// Per-label status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelFlag {
    Ok,
    /// Frozen after |ψ| fell to the node threshold.
    Node,
    /// Frozen after J left (J_MIN, ∞).
    Collapse,
}

impl LabelFlag {
    pub fn code(&self) -> u8 {
        match self {
            LabelFlag::Ok => 0,
            LabelFlag::Node => 1,
            LabelFlag::Collapse => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(LabelFlag::Ok),
            1 => Some(LabelFlag::Node),
            2 => Some(LabelFlag::Collapse),
            _ => None,
        }
    }
}

/// State of every label at one recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub q: Vec<[f64; 3]>,
    /// ψ along each path: J⁻¹ψ₀ (self-contained) or the oracle value (validation).
    pub psi: Vec<f64>,
    pub jac: Vec<f64>,
    pub flags: Vec<LabelFlag>,
    pub d_qq: Option<Vec<Matrix3<f64>>>,
    pub d_qtheta: Option<Vec<Matrix3<f64>>>,
    pub velocity: Option<Vec<[f64; 3]>>,
}

/// Integrated congruence for one branch.
#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    pub params: PhysicalParams,
    pub labels: LabelGrid,
    pub mode: Mode,
    pub branch: Branch,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    /// min |v|/c over every velocity evaluated during integration.
    pub min_speed_ratio: f64,
    pub velocity_evaluations: u64,
}

impl TrajectoryBundle {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("bundle has at least the initial snapshot")
    }

    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_at(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap())
            .expect("non-empty")
    }

    /// Current angles of label `l` at time t.
    pub fn angles(&self, l: usize, t: f64) -> EulerAngles {
        angle_flow(&self.labels.angle_of(l), t, &self.params)
    }

    pub fn kept_fraction(&self, snap: &Snapshot) -> f64 {
        snap.flags.iter().filter(|f| **f == LabelFlag::Ok).count() as f64 / snap.flags.len() as f64
    }
}

/// θ(t) = (θ₀¹, θ₀², θ₀³ − ωt) with the third angle reduced into [0, 4π).
pub fn angle_flow(theta0: &EulerAngles, t: f64, params: &PhysicalParams) -> EulerAngles {
    EulerAngles::raw(
        theta0.alpha,
        theta0.beta,
        (theta0.gamma - params.omega() * t).rem_euclid(4.0 * PI),
    )
}

/// U(t) = cos(ωt/2)I − iγ⁰ sin(ωt/2).
pub fn evolution_operator(t: f64, params: &PhysicalParams) -> SpinMatrix {
    let (s, c) = (0.5 * params.omega() * t).sin_cos();
    SpinMatrix::identity() * C64::from(c) - GammaSet::dirac().gamma[0] * C64::new(0.0, s)
}

/// v^i = c·u(γ⁰γ^iφ)/(u·φ); the real part is returned.
pub fn velocity(
    phi: &SpinCoefficients,
    angles: &EulerAngles,
    params: &PhysicalParams,
    eps_node: f64,
) -> Result<[f64; 3], TrajectoryError> {
    let u = basis_u(angles);
    let psi: C64 = (0..4).map(|a| u[a] * phi[a]).sum();
    if psi.norm() <= eps_node {
        return Err(TrajectoryError::NodeSingularity {
            psi: psi.norm(),
            eps: eps_node,
        });
    }
    let g = GammaSet::dirac();
    let mut v = [0.0; 3];
    for (i, vi) in v.iter_mut().enumerate() {
        let w = g.alpha(i + 1) * phi;
        let num: C64 = (0..4).map(|a| u[a] * w[a]).sum();
        *vi = (num / psi).re * params.c;
    }
    Ok(v)
}

/// c·√(1 + |R₁ × m̂ψ/ψ|²).
pub fn speed_via_bound_formula(
    phi: &SpinCoefficients,
    angles: &EulerAngles,
    params: &PhysicalParams,
    eps_node: f64,
) -> Result<f64, TrajectoryError> {
    let u = basis_u(angles);
    let psi: C64 = (0..4).map(|a| u[a] * phi[a]).sum();
    if psi.norm() <= eps_node {
        return Err(TrajectoryError::NodeSingularity {
            psi: psi.norm(),
            eps: eps_node,
        });
    }
    let r1 = first_rotation_row(angles);
    let mut w = Vector3::zeros();
    for k in 0..3 {
        let mk = operator_matrix(OperatorId::MHat(k + 1), 1.0)? * phi;
        let val: C64 = (0..4).map(|a| u[a] * mk[a]).sum();
        w[k] = (val / psi).re;
    }
    Ok(params.c * (1.0 + r1.cross(&w).norm_squared()).sqrt())
}

/// R_1i, valid at the poles as well.
pub fn first_rotation_row(angles: &EulerAngles) -> Vector3<f64> {
    let r = rotation_closed_form(angles);
    Vector3::new(r[(0, 0)], r[(0, 1)], r[(0, 2)])
}

/// Velocity from the angular log-gradient g_r = ∂_r ln ψ at fixed x:
/// v = c(R₁ + R₁ × w) with w_k = −2A_k^r g_r.
#[inline]
pub fn velocity_from_log_gradient(
    a: &Matrix3<f64>,
    r1: &Vector3<f64>,
    g: &Vector3<f64>,
    c: f64,
) -> Vector3<f64> {
    let w = a * g * -2.0;
    (r1 + r1.cross(&w)) * c
}

/// A matrix at the angles, rejecting poles.
pub fn a_matrix_at(angles: &EulerAngles) -> Result<Matrix3<f64>, TrajectoryError> {
    Ok(euler_matrices(angles)?.a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::eval_spin_gradient;

    fn pw_phi(t: f64, w: f64) -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from_polar(0.5, -0.5 * w * t);
        v[3] = C64::from_polar(0.5, 0.5 * w * t);
        v
    }

    #[test]
    fn angle_flow_examples() {
        let p = PhysicalParams::default();
        let th = EulerAngles::raw(PI / 2.0, 0.0, 0.0);
        assert_eq!(angle_flow(&th, 0.0, &p), th);
        let a = angle_flow(&th, PI / p.omega(), &p);
        assert!((a.gamma - 3.0 * PI).abs() < 1e-12);
        let b = angle_flow(&th, 4.0 * PI / p.omega(), &p);
        assert!(b.gamma.min(4.0 * PI - b.gamma) < 1e-12);
    }

    #[test]
    fn evolution_operator_examples() {
        let p = PhysicalParams::default();
        let w = p.omega();
        assert!((evolution_operator(0.0, &p) - SpinMatrix::identity()).norm() < 1e-15);
        let g0 = GammaSet::dirac().gamma[0];
        assert!((evolution_operator(PI / w, &p) + g0 * C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((evolution_operator(2.0 * PI / w, &p) + SpinMatrix::identity()).norm() < 1e-15);
        let u = evolution_operator(0.3, &p) * evolution_operator(0.4, &p);
        assert!((u - evolution_operator(0.7, &p)).norm() < 1e-15);
    }

    #[test]
    fn plane_wave_velocity() {
        let p = PhysicalParams::default();
        let w = p.omega();
        for &t in &[0.0, 0.3, 1.1] {
            let ang = EulerAngles::raw(PI / 2.0, 0.0, -w * t);
            let v = velocity(&pw_phi(t, w), &ang, &p, 0.0).unwrap();
            let e = [(w * t).cos(), (w * t).sin(), -(w * t).sin()];
            for i in 0..3 {
                assert!((v[i] - e[i]).abs() < 1e-12, "{v:?} {e:?}");
            }
            let s = speed_via_bound_formula(&pw_phi(t, w), &ang, &p, 0.0).unwrap();
            assert!((s - (1.0 + (w * t).sin().powi(2)).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gradient_route_matches() {
        let p = PhysicalParams::default();
        let phi = SpinCoefficients::new(
            C64::new(0.3, 0.2),
            C64::new(-0.1, 0.5),
            C64::new(0.1, 0.5),
            C64::new(0.3, -0.2),
        );
        let ang = EulerAngles::raw(1.0, 0.7, 2.0);
        let u = basis_u(&ang);
        let psi: C64 = (0..4).map(|a| u[a] * phi[a]).sum();
        let gr = eval_spin_gradient(&phi, &ang);
        let g = Vector3::new((gr[0] / psi).re, (gr[1] / psi).re, (gr[2] / psi).re);
        let a = a_matrix_at(&ang).unwrap();
        let v = velocity_from_log_gradient(&a, &first_rotation_row(&ang), &g, p.c);
        let v2 = velocity(&phi, &ang, &p, 0.0).unwrap();
        for i in 0..3 {
            assert!((v[i] - v2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn node_rejected() {
        let p = PhysicalParams::default();
        assert!(matches!(
            velocity(
                &SpinCoefficients::zeros(),
                &EulerAngles::raw(1.0, 1.0, 1.0),
                &p,
                1e-12
            ),
            Err(TrajectoryError::NodeSingularity { .. })
        ));
    }
}
