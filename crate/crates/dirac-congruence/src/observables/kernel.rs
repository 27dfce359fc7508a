//! Pointwise evaluation of partial flows and polar quantities at one (x, α) sample.

use crate::angular_algebra::{
    basis_du, basis_u, euler_matrices, euler_matrix_derivatives, operator_matrix, EulerAngles,
    OperatorId, SpinCoefficients, SpinMatrix,
};
use crate::PhysicalParams;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;

/// Basis values and Euler-matrix data at one angle.
#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub sin: f64,
    pub u: [C64; 4],
    pub du: [[C64; 4]; 3],
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub r1: Vector3<f64>,
    /// (1/sin α) ∂_r(sin α A_i^r).
    pub div_a: [f64; 3],
    /// (1/sin α) ∂_r(sin α B_1^r).
    pub div_b1: f64,
}

impl Frame {
    pub fn new(angles: &EulerAngles) -> Option<Self> {
        let m = euler_matrices(angles).ok()?;
        let (da, db) = euler_matrix_derivatives(angles).ok()?;
        let cot = angles.alpha.cos() / angles.alpha.sin();
        let mut div_a = [0.0; 3];
        for (i, d) in div_a.iter_mut().enumerate() {
            *d = cot * m.a[(i, 0)] + da[0][(i, 0)] + da[1][(i, 1)] + da[2][(i, 2)];
        }
        let div_b1 = cot * m.b[(0, 0)] + db[0][(0, 0)] + db[1][(0, 1)] + db[2][(0, 2)];
        Some(Self {
            sin: angles.alpha.sin(),
            u: basis_u(angles),
            du: basis_du(angles),
            a: m.a,
            b: m.b,
            r1: m.r1(),
            div_a,
            div_b1,
        })
    }
}

/// Coefficient matrices of n̂₁m̂_i, m̂_i and n̂₁.
pub(crate) struct Ops {
    pub nm: [SpinMatrix; 3],
    pub m: [SpinMatrix; 3],
    pub n1: SpinMatrix,
}

impl Ops {
    pub fn new() -> Self {
        let op = |o| operator_matrix(o, 1.0).expect("indices in range");
        Self {
            nm: [
                op(OperatorId::N1MHat(1)),
                op(OperatorId::N1MHat(2)),
                op(OperatorId::N1MHat(3)),
            ],
            m: [
                op(OperatorId::MHat(1)),
                op(OperatorId::MHat(2)),
                op(OperatorId::MHat(3)),
            ],
            n1: op(OperatorId::NHat(1)),
        }
    }
}

#[inline]
pub(crate) fn dot(u: &[C64; 4], c: &SpinCoefficients) -> C64 {
    u[0] * c[0] + u[1] * c[1] + u[2] * c[2] + u[3] * c[3]
}

/// Squared-density flow of one real branch, everything divided by sin α.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PartialFlow {
    pub psi: f64,
    /// ψ²
    pub dens: f64,
    /// ψ² v^i
    pub flux_x: [f64; 3],
    /// ψ² ṽ^r
    pub flux_a: [f64; 3],
    /// (1/sin α) ∂_i(sin α ψ² v^i)
    pub div_x: f64,
    /// (1/sin α) ∂_r(sin α ψ² ṽ^r)
    pub div_a: f64,
}

/// Flow of the real function ψ = u·Φ from Φ and its spatial gradient.
pub(crate) fn partial_flow(
    fr: &Frame,
    ops: &Ops,
    phi: &SpinCoefficients,
    grad: &[SpinCoefficients; 3],
    p: &PhysicalParams,
) -> PartialFlow {
    let (c, w) = (p.c, p.omega());
    let psi = dot(&fr.u, phi).re;
    let dpsi_a: [f64; 3] = std::array::from_fn(|r| dot(&fr.du[r], phi).re);
    let mut out = PartialFlow {
        psi,
        dens: psi * psi,
        ..Default::default()
    };

    let mut y = 0.0;
    let mut dy = [0.0; 3];
    let mut x_i = [0.0; 3];
    let mut dx_i = [[0.0; 3]; 3];
    for i in 0..3 {
        let gi = &grad[i];
        let di_psi = dot(&fr.u, gi).re;
        let nm_psi = dot(&fr.u, &(ops.nm[i] * phi)).re;
        let nm_g = dot(&fr.u, &(ops.nm[i] * gi)).re;
        out.flux_x[i] = -c * psi * nm_psi;
        out.div_x += -c * (di_psi * nm_psi + psi * nm_g);

        let n1g = ops.n1 * gi;
        let n1g_v = dot(&fr.u, &n1g).re;
        x_i[i] = psi * n1g_v;
        let mphi = ops.m[i] * phi;
        let mphi_v = dot(&fr.u, &mphi).re;
        y += mphi_v * di_psi;
        for r in 0..3 {
            dx_i[i][r] = dpsi_a[r] * n1g_v + psi * dot(&fr.du[r], &n1g).re;
            dy[r] += dot(&fr.du[r], &mphi).re * di_psi + mphi_v * dot(&fr.du[r], gi).re;
        }
    }
    for r in 0..3 {
        let mut f = -2.0 * c * fr.b[(0, r)] * y;
        for i in 0..3 {
            f += 2.0 * c * fr.a[(i, r)] * x_i[i];
        }
        out.flux_a[r] = f;
    }
    out.flux_a[2] -= w * psi * psi;

    let mut div = -2.0 * w * psi * dpsi_a[2] - 2.0 * c * fr.div_b1 * y;
    for r in 0..3 {
        div -= 2.0 * c * fr.b[(0, r)] * dy[r];
    }
    for i in 0..3 {
        div += 2.0 * c * fr.div_a[i] * x_i[i];
        for r in 0..3 {
            div += 2.0 * c * fr.a[(i, r)] * dx_i[i][r];
        }
    }
    out.div_a = div;
    out
}

/// Polar quantities at one sample, derived from ψ and its first derivatives.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PolarLocal {
    pub psi: C64,
    pub amp: f64,
    /// ∂_iS
    pub grad_s: [f64; 3],
    /// ∂_rS
    pub ang_s: [f64; 3],
    pub v_x: [f64; 3],
    /// Angular velocity built from R and S.
    pub v_ang: [f64; 3],
    pub q: f64,
}

/// Polar data from Dirac coefficients Ψ and ∇Ψ.
pub(crate) fn polar_local(
    fr: &Frame,
    psi_c: &SpinCoefficients,
    grad: &[SpinCoefficients; 3],
    p: &PhysicalParams,
) -> PolarLocal {
    let (c, hbar, w) = (p.c, p.hbar, p.omega());
    let psi = dot(&fr.u, psi_c);
    let dr: [C64; 3] = std::array::from_fn(|r| dot(&fr.du[r], psi_c) / psi);
    let di: [C64; 3] = std::array::from_fn(|i| dot(&fr.u, &grad[i]) / psi);
    // ∂_r∂_i ln ψ
    let dri: [[C64; 3]; 3] = std::array::from_fn(|r| {
        std::array::from_fn(|i| dot(&fr.du[r], &grad[i]) / psi - dr[r] * di[i])
    });

    let grad_s: [f64; 3] = std::array::from_fn(|i| hbar * di[i].im);
    let gr: [f64; 3] = std::array::from_fn(|i| di[i].re);
    let ang_s: [f64; 3] = std::array::from_fn(|r| hbar * dr[r].im);

    let ahat = |k: usize, f: &dyn Fn(usize) -> f64| -> f64 {
        -2.0 * (0..3).map(|r| fr.a[(k, r)] * f(r)).sum::<f64>()
    };
    let b1hat = |f: &dyn Fn(usize) -> f64| -> f64 {
        -2.0 * (0..3).map(|r| fr.b[(0, r)] * f(r)).sum::<f64>()
    };
    let m_r: [f64; 3] = std::array::from_fn(|k| ahat(k, &|r| dr[r].re));
    let m_s: [f64; 3] = std::array::from_fn(|k| ahat(k, &|r| ang_s[r]));
    let n1_s = b1hat(&|r| ang_s[r]);

    let r1 = fr.r1;
    let wv = Vector3::from(m_r);
    let vx = (r1 + r1.cross(&wv)) * c;

    let mut v_ang = [0.0; 3];
    v_ang[2] = -w;
    for i in 0..3 {
        // n̂₁∂_iR/R with ∂_r∂_iR/R = Re ∂_r∂_i ln ψ + Re ∂_r ln ψ Re ∂_i ln ψ
        let n1_dir = b1hat(&|r| dri[r][i].re + dr[r].re * gr[i]);
        let ka = n1_dir - n1_s * grad_s[i] / (hbar * hbar);
        let kb = m_r[i] * gr[i] + m_s[i] * grad_s[i] / (hbar * hbar);
        for r in 0..3 {
            v_ang[r] += 2.0 * c * (fr.a[(i, r)] * ka - fr.b[(0, r)] * kb);
        }
    }

    let mut q = 0.0;
    for i in 0..3 {
        let z: [f64; 3] =
            std::array::from_fn(|k| ahat(k, &|r| hbar * dri[r][i].im) + gr[i] * m_s[k]);
        q += r1.cross(&Vector3::from(z))[i];
    }
    q *= c;

    PolarLocal {
        psi,
        amp: psi.norm(),
        grad_s,
        ang_s,
        v_x: [vx[0], vx[1], vx[2]],
        v_ang,
        q,
    }
}

impl PolarLocal {
    /// v^i∂_iS + v^r∂_rS + Q with the supplied angular velocity.
    pub fn transport(&self, v_ang: &[f64; 3]) -> f64 {
        (0..3)
            .map(|i| self.v_x[i] * self.grad_s[i] + v_ang[i] * self.ang_s[i])
            .sum::<f64>()
            + self.q
    }
}
