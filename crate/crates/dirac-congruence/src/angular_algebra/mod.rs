//! Euler-angle angular momentum operators restricted to the spin-½ subspace.
//!
//! Functions on SU(2) are written ψ(α) = c^a u_a(α) with the four basis
//! functions of [`basis_u`]. Every operator is available in two forms: a
//! differential form evaluated with analytic derivatives of the basis, and a
//! 4×4 matrix acting on coefficients with the convention
//! `(Ô ψ)(α) = u_b(α) m^b_a c^a`.

mod identities;
mod quadrature;

pub use identities::{verify_identities, IdentityCheck, IdentityReport};
pub use quadrature::{AngleAxis, AngleGrid};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Angles closer than this to α = 0 or α = π are rejected where cot α or cosec α appear.
pub const EPS_POLE: f64 = 1e-9;

/// Normalisation (2√2 π)⁻¹ of the basis functions.
pub const BASIS_NORM: f64 = 1.0 / (2.0 * SQRT_2 * PI);

/// Four complex amplitudes multiplying the basis functions.
pub type SpinCoefficients = Vector4<C64>;

/// Matrix of an operator on the spin-½ coefficient space.
pub type SpinMatrix = Matrix4<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("alpha = {alpha} is within {eps} of a pole where cot/cosec diverge")]
    PoleSingularity { alpha: f64, eps: f64 },
    #[error("alpha = {0} lies outside [0, pi]")]
    InvalidAlpha(f64),
    #[error("operator index {0} is not in 1..=3")]
    InvalidIndex(usize),
}

/// A point on SU(2) in the (α, β, γ) parametrisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    /// Builds a point with β reduced modulo 2π and γ modulo 4π.
    ///
    /// Shifting β by 2π flips the sign of every basis function, so callers that
    /// need continuity of ψ across the β seam should use [`EulerAngles::raw`].
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, AlgebraError> {
        if !(alpha >= -1e-14 && alpha <= PI + 1e-14) {
            return Err(AlgebraError::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha: alpha.clamp(0.0, PI),
            beta: beta.rem_euclid(2.0 * PI),
            gamma: gamma.rem_euclid(4.0 * PI),
        })
    }

    /// Builds a point without any reduction.
    pub const fn raw(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::raw(a[0], a[1], a[2])
    }

    /// Returns the same point with component `r` displaced by `h`.
    pub fn shifted(&self, r: usize, h: f64) -> Self {
        let mut a = self.as_array();
        a[r] += h;
        Self::from_array(a)
    }

    pub fn check_interior(&self) -> Result<(), AlgebraError> {
        if self.alpha.sin().abs() < EPS_POLE || self.alpha <= 0.0 || self.alpha >= PI {
            Err(AlgebraError::PoleSingularity {
                alpha: self.alpha,
                eps: EPS_POLE,
            })
        } else {
            Ok(())
        }
    }
}

/// The matrices A_i^r, B_i^r and the rotation R_ij = B_i^r (A⁻¹)_r^j.
///
/// Rows carry the Cartesian index i, columns the angle index r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularMatrices {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub r: Matrix3<f64>,
}

impl AngularMatrices {
    /// First row of the rotation, R_1i.
    pub fn r1(&self) -> Vector3<f64> {
        Vector3::new(self.r[(0, 0)], self.r[(0, 1)], self.r[(0, 2)])
    }
}

fn a_matrix(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sb, cb) = beta.sin_cos();
    let cot = alpha.cos() / alpha.sin();
    let csc = 1.0 / alpha.sin();
    Matrix3::new(
        -cb,
        sb * cot,
        -sb * csc, //
        sb,
        cb * cot,
        -cb * csc, //
        0.0,
        -1.0,
        0.0,
    )
}

fn b_matrix(alpha: f64, gamma: f64) -> Matrix3<f64> {
    let (sg, cg) = gamma.sin_cos();
    let cot = alpha.cos() / alpha.sin();
    let csc = 1.0 / alpha.sin();
    Matrix3::new(
        -cg,
        -sg * csc,
        sg * cot, //
        -sg,
        cg * csc,
        -cg * cot, //
        0.0,
        0.0,
        -1.0,
    )
}

/// A, B and R at the given angles.
pub fn euler_matrices(angles: &EulerAngles) -> Result<AngularMatrices, AlgebraError> {
    angles.check_interior()?;
    let a = a_matrix(angles.alpha, angles.beta);
    let b = b_matrix(angles.alpha, angles.gamma);
    let a_inv = a.try_inverse().ok_or(AlgebraError::PoleSingularity {
        alpha: angles.alpha,
        eps: EPS_POLE,
    })?;
    Ok(AngularMatrices { a, b, r: b * a_inv })
}

/// Rotation matrix in closed form, Rz(γ)·Rx(α)·Rz(β); equal to B·A⁻¹ and valid at the poles.
pub fn rotation_closed_form(angles: &EulerAngles) -> Matrix3<f64> {
    rz(angles.gamma) * rx(angles.alpha) * rz(angles.beta)
}

fn rz(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rx(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Analytic derivatives ∂A/∂α^s and ∂B/∂α^s for s = α, β, γ.
pub fn euler_matrix_derivatives(
    angles: &EulerAngles,
) -> Result<([Matrix3<f64>; 3], [Matrix3<f64>; 3]), AlgebraError> {
    angles.check_interior()?;
    let (sa, ca) = angles.alpha.sin_cos();
    let (sb, cb) = angles.beta.sin_cos();
    let (sg, cg) = angles.gamma.sin_cos();
    let cot = ca / sa;
    let csc = 1.0 / sa;
    // d cot/dα = -csc², d csc/dα = -csc·cot
    let dcot = -csc * csc;
    let dcsc = -csc * cot;
    let da_alpha = Matrix3::new(
        0.0,
        sb * dcot,
        -sb * dcsc, //
        0.0,
        cb * dcot,
        -cb * dcsc, //
        0.0,
        0.0,
        0.0,
    );
    let da_beta = Matrix3::new(
        sb,
        cb * cot,
        -cb * csc, //
        cb,
        -sb * cot,
        sb * csc, //
        0.0,
        0.0,
        0.0,
    );
    let db_alpha = Matrix3::new(
        0.0,
        -sg * dcsc,
        sg * dcot, //
        0.0,
        cg * dcsc,
        -cg * dcot, //
        0.0,
        0.0,
        0.0,
    );
    let db_gamma = Matrix3::new(
        sg,
        -cg * csc,
        cg * cot, //
        -cg,
        -sg * csc,
        sg * cot, //
        0.0,
        0.0,
        0.0,
    );
    let z = Matrix3::zeros();
    Ok(([da_alpha, da_beta, z], [db_alpha, z, db_gamma]))
}

/// Half-angle exponents (p_a, q_a) with u_a ∝ e^{i(p_a β + q_a γ)}.
const PHASES: [(f64, f64); 4] = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)];

/// Amplitude prefactor f_a(α) of each basis function, and its α-derivatives.
#[inline]
fn radial(alpha: f64) -> ([C64; 4], [C64; 4], [C64; 4]) {
    let (s, c) = (0.5 * alpha).sin_cos();
    let k = BASIS_NORM;
    let mi = C64::new(0.0, -k);
    let f = [C64::from(k * c), mi * s, mi * s, C64::from(k * c)];
    let df = [
        C64::from(-0.5 * k * s),
        mi * (0.5 * c),
        mi * (0.5 * c),
        C64::from(-0.5 * k * s),
    ];
    let ddf = [
        C64::from(-0.25 * k * c),
        mi * (-0.25 * s),
        mi * (-0.25 * s),
        C64::from(-0.25 * k * c),
    ];
    (f, df, ddf)
}

#[inline]
fn phase(beta: f64, gamma: f64) -> [C64; 4] {
    let mut out = [C64::new(0.0, 0.0); 4];
    for (o, &(p, q)) in out.iter_mut().zip(PHASES.iter()) {
        *o = C64::from_polar(1.0, p * beta + q * gamma);
    }
    out
}

/// The four spin-½ basis functions u_1..u_4.
pub fn basis_u(angles: &EulerAngles) -> [C64; 4] {
    let (f, _, _) = radial(angles.alpha);
    let e = phase(angles.beta, angles.gamma);
    [f[0] * e[0], f[1] * e[1], f[2] * e[2], f[3] * e[3]]
}

/// First derivatives ∂_r u_a, indexed `[r][a]`.
pub fn basis_du(angles: &EulerAngles) -> [[C64; 4]; 3] {
    let (f, df, _) = radial(angles.alpha);
    let e = phase(angles.beta, angles.gamma);
    let mut out = [[C64::new(0.0, 0.0); 4]; 3];
    for a in 0..4 {
        let (p, q) = PHASES[a];
        let u = f[a] * e[a];
        out[0][a] = df[a] * e[a];
        out[1][a] = C64::new(0.0, p) * u;
        out[2][a] = C64::new(0.0, q) * u;
    }
    out
}

/// Second derivatives ∂_r ∂_s u_a, indexed `[r][s][a]`.
pub fn basis_d2u(angles: &EulerAngles) -> [[[C64; 4]; 3]; 3] {
    let (f, df, ddf) = radial(angles.alpha);
    let e = phase(angles.beta, angles.gamma);
    let mut out = [[[C64::new(0.0, 0.0); 4]; 3]; 3];
    for a in 0..4 {
        let (p, q) = PHASES[a];
        let k = [0.0, p, q];
        let i = C64::new(0.0, 1.0);
        for r in 0..3 {
            for s in 0..3 {
                let radial_part = match (r, s) {
                    (0, 0) => ddf[a],
                    (0, _) => df[a] * i * k[s],
                    (_, 0) => df[a] * i * k[r],
                    _ => f[a] * (-k[r] * k[s]),
                };
                out[r][s][a] = radial_part * e[a];
            }
        }
    }
    out
}

/// ψ(α) = c^a u_a(α).
pub fn eval_spin(c: &SpinCoefficients, angles: &EulerAngles) -> C64 {
    let u = basis_u(angles);
    (0..4).map(|a| c[a] * u[a]).sum()
}

/// ∂_r ψ at the given angles.
pub fn eval_spin_gradient(c: &SpinCoefficients, angles: &EulerAngles) -> [C64; 3] {
    let du = basis_du(angles);
    let mut g = [C64::new(0.0, 0.0); 3];
    for r in 0..3 {
        g[r] = (0..4).map(|a| c[a] * du[r][a]).sum();
    }
    g
}

/// Identifies an angular operator. Cartesian indices run over 1..=3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorId {
    /// M̂_i = -iħ A_i^r ∂_r
    M(usize),
    /// N̂_i = -iħ B_i^r ∂_r
    N(usize),
    /// m̂_i = -2 A_i^r ∂_r
    MHat(usize),
    /// n̂_i = -2 B_i^r ∂_r
    NHat(usize),
    /// N̂_1 M̂_i
    N1M(usize),
    /// n̂_1 m̂_i
    N1MHat(usize),
}

impl OperatorId {
    pub fn index(&self) -> usize {
        match *self {
            OperatorId::M(i)
            | OperatorId::N(i)
            | OperatorId::MHat(i)
            | OperatorId::NHat(i)
            | OperatorId::N1M(i)
            | OperatorId::N1MHat(i) => i,
        }
    }

    pub fn all() -> Vec<OperatorId> {
        let mut v = Vec::new();
        for i in 1..=3 {
            v.extend([
                OperatorId::M(i),
                OperatorId::N(i),
                OperatorId::MHat(i),
                OperatorId::NHat(i),
                OperatorId::N1M(i),
                OperatorId::N1MHat(i),
            ]);
        }
        v
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// m̂_i on coefficients: -i·diag(σ_i, σ_i).
pub fn m_hat_matrix(i: usize) -> SpinMatrix {
    let z = c(0.0, 0.0);
    let mi = c(0.0, -1.0);
    let pi = c(0.0, 1.0);
    let one = c(1.0, 0.0);
    match i {
        1 => Matrix4::new(z, mi, z, z, mi, z, z, z, z, z, z, mi, z, z, mi, z),
        2 => Matrix4::new(z, -one, z, z, one, z, z, z, z, z, z, -one, z, z, one, z),
        3 => Matrix4::new(mi, z, z, z, z, pi, z, z, z, z, mi, z, z, z, z, pi),
        _ => panic!("operator index {i} not in 1..=3"),
    }
}

/// n̂_i on coefficients; acts on the upper/lower 2-blocks.
pub fn n_hat_matrix(i: usize) -> SpinMatrix {
    let z = c(0.0, 0.0);
    let mi = c(0.0, -1.0);
    let pi = c(0.0, 1.0);
    let one = c(1.0, 0.0);
    match i {
        1 => Matrix4::new(z, z, mi, z, z, z, z, mi, mi, z, z, z, z, mi, z, z),
        2 => Matrix4::new(z, z, one, z, z, z, z, one, -one, z, z, z, z, -one, z, z),
        3 => Matrix4::new(mi, z, z, z, z, mi, z, z, z, z, pi, z, z, z, z, pi),
        _ => panic!("operator index {i} not in 1..=3"),
    }
}

/// Matrix m with (Ôψ) = u_b m^b_a c^a.
pub fn operator_matrix(op: OperatorId, hbar: f64) -> Result<SpinMatrix, AlgebraError> {
    let i = op.index();
    if !(1..=3).contains(&i) {
        return Err(AlgebraError::InvalidIndex(i));
    }
    let half = c(0.0, 0.5 * hbar);
    Ok(match op {
        OperatorId::MHat(_) => m_hat_matrix(i),
        OperatorId::NHat(_) => n_hat_matrix(i),
        OperatorId::M(_) => m_hat_matrix(i) * half,
        OperatorId::N(_) => n_hat_matrix(i) * half,
        OperatorId::N1M(_) => (n_hat_matrix(1) * half) * (m_hat_matrix(i) * half),
        OperatorId::N1MHat(_) => n_hat_matrix(1) * m_hat_matrix(i),
    })
}

/// Applies an operator to ψ = c^a u_a by differentiating the basis functions.
pub fn apply_operator_analytic(
    op: OperatorId,
    coeffs: &SpinCoefficients,
    angles: &EulerAngles,
    hbar: f64,
) -> Result<C64, AlgebraError> {
    let i = op.index();
    if !(1..=3).contains(&i) {
        return Err(AlgebraError::InvalidIndex(i));
    }
    let i = i - 1;
    let mats = euler_matrices(angles)?;
    let grad = eval_spin_gradient(coeffs, angles);
    let first = |row: Vector3<f64>| -> C64 { (0..3).map(|r| grad[r] * row[r]).sum() };
    let a_row = |k: usize| mats.a.row(k).transpose();
    let b_row = |k: usize| mats.b.row(k).transpose();
    let ih = c(0.0, -hbar);
    Ok(match op {
        OperatorId::M(_) => ih * first(a_row(i)),
        OperatorId::N(_) => ih * first(b_row(i)),
        OperatorId::MHat(_) => -2.0 * first(a_row(i)),
        OperatorId::NHat(_) => -2.0 * first(b_row(i)),
        OperatorId::N1M(_) | OperatorId::N1MHat(_) => {
            // n̂_1 m̂_i ψ = 4 B_1^s ∂_s (A_i^r ∂_r ψ)
            let (da, _) = euler_matrix_derivatives(angles)?;
            let d2u = basis_d2u(angles);
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..3 {
                let bs = mats.b[(0, s)];
                if bs == 0.0 {
                    continue;
                }
                let mut inner = C64::new(0.0, 0.0);
                for r in 0..3 {
                    let d2: C64 = (0..4).map(|a| coeffs[a] * d2u[s][r][a]).sum();
                    inner += grad[r] * da[s][(i, r)] + d2 * mats.a[(i, r)];
                }
                acc += inner * bs;
            }
            let n1m_hat = 4.0 * acc;
            if matches!(op, OperatorId::N1MHat(_)) {
                n1m_hat
            } else {
                n1m_hat * (-0.25 * hbar * hbar)
            }
        }
    })
}

/// Evaluates the function whose coefficient vector is `m·c` at the given angles.
pub fn apply_operator_matrix(
    m: &SpinMatrix,
    coeffs: &SpinCoefficients,
    angles: &EulerAngles,
) -> C64 {
    eval_spin(&(m * coeffs), angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_at_origin() {
        let u = basis_u(&EulerAngles::raw(0.0, 0.0, 0.0));
        assert!((u[0].re - 0.112_539_5).abs() < 1e-7);
        assert!(u[1].norm() < 1e-15 && u[2].norm() < 1e-15);
        assert!((u[3] - u[0]).norm() < 1e-15);
    }

    #[test]
    fn basis_at_alpha_pi() {
        let u = basis_u(&EulerAngles::raw(PI, 0.0, 0.0));
        assert!(u[0].norm() < 1e-15 && u[3].norm() < 1e-15);
        assert!((u[1].norm() - BASIS_NORM).abs() < 1e-15);
        assert!((u[2].norm() - BASIS_NORM).abs() < 1e-15);
    }

    #[test]
    fn matrices_at_reference_point() {
        let m = euler_matrices(&EulerAngles::raw(PI / 2.0, 0.0, 0.0)).unwrap();
        let a = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0);
        let b = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!((m.a - a).norm() < 1e-15);
        assert!((m.b - b).norm() < 1e-15);
        assert!((m.r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_rejected() {
        assert!(matches!(
            euler_matrices(&EulerAngles::raw(0.0, 1.0, 1.0)),
            Err(AlgebraError::PoleSingularity { .. })
        ));
    }

    #[test]
    fn constructor_reduces_periods() {
        let a = EulerAngles::new(1.0, 2.0 * PI + 0.5, -PI).unwrap();
        assert!((a.beta - 0.5).abs() < 1e-14);
        assert!((a.gamma - 3.0 * PI).abs() < 1e-14);
        assert!(EulerAngles::new(4.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn n3_is_diagonal_in_basis() {
        let m = operator_matrix(OperatorId::N(3), 1.0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b {
                    if a < 2 {
                        0.5
                    } else {
                        -0.5
                    }
                } else {
                    0.0
                };
                assert!((m[(a, b)] - C64::from(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn m3_eigenvalue_on_u1() {
        let e1 = SpinCoefficients::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let ang = EulerAngles::raw(0.9, 0.4, 2.2);
        let v = apply_operator_analytic(OperatorId::M(3), &e1, &ang, 1.0).unwrap();
        assert!((v - basis_u(&ang)[0] * 0.5).norm() < 1e-14);
    }
}
