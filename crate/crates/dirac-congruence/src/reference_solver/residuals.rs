//! Discrete residuals of the free and externally coupled field equations.
//!
//! Time derivatives are centred between two snapshots; spatial derivatives
//! are spectral; angular derivatives are analytic.

use super::{Fft3, PotentialField, SolverError, SpinorField};
use crate::angular_algebra::{
    basis_du, basis_u, euler_matrices, euler_matrix_derivatives, operator_matrix, AngleGrid,
    OperatorId, SpinCoefficients, SpinMatrix,
};
use crate::spinor_core::majorana_split;
use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Angle nodes at which angular residuals are sampled.
#[derive(Clone, Debug)]
pub struct ResidualOptions {
    pub angles: AngleGrid,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            angles: AngleGrid::quadrature(4, 4, 8),
        }
    }
}

/// Maxima of the real and imaginary continuity residuals, with the variant
/// that keeps A₀ψ undivided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityResidual {
    pub real_r: f64,
    pub real_i: f64,
    pub plain_a0_r: f64,
    pub plain_a0_i: f64,
}

struct Pair<'a> {
    before: &'a SpinorField,
    after: &'a SpinorField,
    mid: SpinorField,
    grad: [[Vec<C64>; 4]; 3],
    dt: f64,
}

fn pair<'a>(
    before: &'a SpinorField,
    after: &'a SpinorField,
    dt: f64,
) -> Result<Pair<'a>, SolverError> {
    before.check_same_grid(after)?;
    if dt == 0.0 {
        return Err(SolverError::GridMismatch(
            "snapshots must be separated by a non-zero dt".into(),
        ));
    }
    let mut mid = before.clone();
    for a in 0..4 {
        for (m, x) in mid.psi[a].iter_mut().zip(&after.psi[a]) {
            *m = (*m + x) * 0.5;
        }
    }
    let fft = Fft3::new(before.grid.n);
    let grad = mid.gradient(&fft);
    Ok(Pair {
        before,
        after,
        mid,
        grad,
        dt,
    })
}

fn grad_at(g: &[[Vec<C64>; 4]; 3], p: usize) -> [SpinCoefficients; 3] {
    let f = |i: usize| SpinCoefficients::new(g[i][0][p], g[i][1][p], g[i][2][p], g[i][3][p]);
    [f(0), f(1), f(2)]
}

/// Max over points of the coefficient-norm residual of the coupled equation
/// iħ∂_tψ − cA₀ψ = c n̂₁m̂_i(iħ∂_iψ − A_iψ) + imc² n̂₃ψ.
pub fn dirac_residual(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
    pot: &PotentialField,
) -> Result<f64, SolverError> {
    dirac_residual_impl(before, after, dt, Some(pot))
}

/// The same residual with the coupling terms omitted.
pub fn dirac_residual_free(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
) -> Result<f64, SolverError> {
    dirac_residual_impl(before, after, dt, None)
}

fn dirac_residual_impl(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
    pot: Option<&PotentialField>,
) -> Result<f64, SolverError> {
    let pr = pair(before, after, dt)?;
    let par = before.params;
    let (hbar, c, mc2) = (par.hbar, par.c, par.rest_energy());
    let nm: Vec<SpinMatrix> = (1..=3)
        .map(|i| operator_matrix(OperatorId::N1MHat(i), 1.0).unwrap())
        .collect();
    let n3 = operator_matrix(OperatorId::NHat(3), 1.0).unwrap();
    let ih = C64::new(0.0, hbar);
    let mut worst: f64 = 0.0;
    for p in 0..before.grid.len() {
        let psi = pr.mid.at(p);
        let g = grad_at(&pr.grad, p);
        let dpsi = (pr.after.at(p) - pr.before.at(p)) / C64::from(pr.dt);
        let mut res = dpsi * ih - n3 * psi * C64::new(0.0, mc2);
        for i in 0..3 {
            res -= nm[i] * g[i] * (ih * c);
        }
        if let Some(pot) = pot {
            let mut coupling = psi * C64::from(-c * pot.a0.at(p));
            for i in 0..3 {
                coupling += nm[i] * psi * C64::from(c * pot.a[i].at(p));
            }
            res += coupling;
        }
        worst = worst.max(res.norm());
    }
    Ok(worst)
}

struct NodeData {
    u: [C64; 4],
    du: [[C64; 4]; 3],
    a: Matrix3<f64>,
    /// (1/sin α) ∂_r(sin α A_i^r) per i.
    div_a: [f64; 3],
}

fn node_data(grid: &AngleGrid) -> Vec<NodeData> {
    grid.nodes()
        .iter()
        .map(|x| {
            let m = euler_matrices(x).expect("quadrature nodes are interior");
            let (da, _) = euler_matrix_derivatives(x).unwrap();
            let cot = x.alpha.cos() / x.alpha.sin();
            let mut div_a = [0.0; 3];
            for (i, d) in div_a.iter_mut().enumerate() {
                *d = cot * m.a[(i, 0)] + da[0][(i, 0)] + da[1][(i, 1)] + da[2][(i, 2)];
            }
            NodeData {
                u: basis_u(x),
                du: basis_du(x),
                a: m.a,
                div_a,
            }
        })
        .collect()
}

#[inline]
fn dot(u: &[C64; 4], c: &SpinCoefficients) -> C64 {
    u[0] * c[0] + u[1] * c[1] + u[2] * c[2] + u[3] * c[3]
}

/// Residuals of the real continuity equations for sin α·ψ_R and sin α·ψ_I,
/// including the external-potential coupling with A₀ψ written as m̂_im̂_iA₀ψ/3.
pub fn angular_continuity_residual(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
    pot: &PotentialField,
    opts: &ResidualOptions,
) -> Result<ContinuityResidual, SolverError> {
    continuity_impl(before, after, dt, Some(pot), opts)
}

/// Free-field form: ∂_t(sin α ψ) − ∂_i(c sin α n̂₁m̂_iψ) − ∂_γ(2mc² sin α ψ/ħ) = 0 for ψ_R and ψ_I.
pub fn angular_continuity_residual_free(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
    opts: &ResidualOptions,
) -> Result<ContinuityResidual, SolverError> {
    continuity_impl(before, after, dt, None, opts)
}

fn continuity_impl(
    before: &SpinorField,
    after: &SpinorField,
    dt: f64,
    pot: Option<&PotentialField>,
    opts: &ResidualOptions,
) -> Result<ContinuityResidual, SolverError> {
    let pr = pair(before, after, dt)?;
    let par = before.params;
    let (hbar, c, m) = (par.hbar, par.c, par.m);
    let nm: Vec<SpinMatrix> = (1..=3)
        .map(|i| operator_matrix(OperatorId::N1MHat(i), 1.0).unwrap())
        .collect();
    let mh: Vec<SpinMatrix> = (1..=3)
        .map(|i| operator_matrix(OperatorId::MHat(i), 1.0).unwrap())
        .collect();
    let n1 = operator_matrix(OperatorId::NHat(1), 1.0).unwrap();
    let nodes = node_data(&opts.angles);
    let mut out = ContinuityResidual {
        real_r: 0.0,
        real_i: 0.0,
        plain_a0_r: 0.0,
        plain_a0_i: 0.0,
    };
    for p in 0..before.grid.len() {
        let (rb, ib) = majorana_split(&pr.before.at(p));
        let (ra, ia) = majorana_split(&pr.after.at(p));
        let (rm, im) = majorana_split(&pr.mid.at(p));
        let g = grad_at(&pr.grad, p);
        let gs: Vec<(SpinCoefficients, SpinCoefficients)> = g.iter().map(majorana_split).collect();
        // flux divergence coefficients Σ_i n̂₁m̂_i ∂_iΦ
        let mut flux_r = SpinCoefficients::zeros();
        let mut flux_i = SpinCoefficients::zeros();
        for i in 0..3 {
            flux_r += nm[i] * gs[i].0;
            flux_i += nm[i] * gs[i].1;
        }
        let dt_r = (ra - rb) / C64::from(pr.dt);
        let dt_i = (ia - ib) / C64::from(pr.dt);
        // coupling sources for each branch: the R equation is driven by +Φ_I, the I equation by −Φ_R
        let coupling = pot.map(|pot| {
            let a0 = pot.a0.at(p);
            let ai = [pot.a[0].at(p), pot.a[1].at(p), pot.a[2].at(p)];
            let build = |src: &SpinCoefficients, with_a0: bool| -> [SpinCoefficients; 3] {
                let mut x = [SpinCoefficients::zeros(); 3];
                for i in 0..3 {
                    x[i] = n1 * src * C64::from(ai[i]);
                    if with_a0 {
                        x[i] += mh[i] * src * C64::from(a0 / 3.0);
                    }
                }
                x
            };
            let neg_r = -rm;
            (
                build(&im, true),
                build(&neg_r, true),
                build(&im, false),
                build(&neg_r, false),
                a0,
            )
        });
        for nd in &nodes {
            let free_r = (dot(&nd.u, &dt_r)
                - dot(&nd.u, &flux_r) * c
                - dot(&nd.du[2], &rm) * (2.0 * m * c * c / hbar))
                .re;
            let free_i = (dot(&nd.u, &dt_i)
                - dot(&nd.u, &flux_i) * c
                - dot(&nd.du[2], &im) * (2.0 * m * c * c / hbar))
                .re;
            let (mut res_r, mut res_i) = (free_r, free_i);
            let (mut alt_r, mut alt_i) = (free_r, free_i);
            if let Some((xr, xi, xr0, xi0, a0)) = &coupling {
                let div = |x: &[SpinCoefficients; 3]| -> f64 {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..3 {
                        acc += dot(&nd.u, &x[i]) * nd.div_a[i];
                        for r in 0..3 {
                            acc += dot(&nd.du[r], &x[i]) * nd.a[(i, r)];
                        }
                    }
                    acc.re
                };
                let k = 2.0 * c / hbar;
                res_r -= k * div(xr);
                res_i -= k * div(xi);
                let psi_r = dot(&nd.u, &rm).re;
                let psi_i = dot(&nd.u, &im).re;
                alt_r -= k * div(xr0) + (c / hbar) * a0 * psi_i;
                alt_i -= k * div(xi0) - (c / hbar) * a0 * psi_r;
            }
            out.real_r = out.real_r.max(res_r.abs());
            out.real_i = out.real_i.max(res_i.abs());
            out.plain_a0_r = out.plain_a0_r.max(alt_r.abs());
            out.plain_a0_i = out.plain_a0_i.max(alt_i.abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_solver::{
        constant_potential_solution, plane_wave_field, spectral_propagate, GaussianPacket, Grid3,
    };
    use crate::PhysicalParams;

    fn e1() -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from(1.0);
        v
    }

    #[test]
    fn plane_wave_second_order() {
        let p = PhysicalParams::default();
        let g = Grid3::new(4, 5.0);
        let w = p.omega();
        let r = |dt: f64| {
            let a = plane_wave_field(g, p, e1(), 0.3);
            let b = plane_wave_field(g, p, e1(), 0.3 + dt);
            dirac_residual_free(&a, &b, dt).unwrap()
        };
        let ratio = r(1e-2 / w) / r(0.5e-2 / w);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn constant_a0_and_zero_reduction() {
        let p = PhysicalParams::default();
        let g = Grid3::new(4, 5.0);
        let a0 = 0.4;
        let pot = PotentialField::constant(a0, [0.0; 3]);
        let dt = 1e-3;
        let a = constant_potential_solution(g, p, a0, 0.1);
        let b = constant_potential_solution(g, p, a0, 0.1 + dt);
        assert!(dirac_residual(&a, &b, dt, &pot).unwrap() < 1e-6);
        let o = ResidualOptions::default();
        let cr = angular_continuity_residual(&a, &b, dt, &pot, &o).unwrap();
        assert!(cr.real_r < 1e-6 && cr.real_i < 1e-6, "{cr:?}");
        assert!((cr.real_r - cr.plain_a0_r).abs() < 1e-10);
        let z = PotentialField::zero();
        assert_eq!(
            dirac_residual(&a, &b, dt, &z).unwrap(),
            dirac_residual_free(&a, &b, dt).unwrap()
        );
        assert_eq!(
            angular_continuity_residual(&a, &b, dt, &z, &o).unwrap(),
            angular_continuity_residual_free(&a, &b, dt, &o).unwrap()
        );
    }

    #[test]
    fn unevolved_pair_is_not_a_solution() {
        let p = PhysicalParams::default();
        let g = Grid3::new(16, 20.0);
        let (f, _) = GaussianPacket {
            momentum: [0.3, 0.0, 0.0],
            ..Default::default()
        }
        .field(g, p);
        let r = dirac_residual_free(&f, &f, 1e-3).unwrap();
        assert!(r > 1e-3);
        let ev = spectral_propagate(&f, 1e-3).unwrap();
        assert!(dirac_residual_free(&f, &ev, 1e-3).unwrap() < 1e-5);
        let cr =
            angular_continuity_residual_free(&f, &ev, 1e-3, &ResidualOptions::default()).unwrap();
        assert!(cr.real_r < 1e-5 && cr.real_i < 1e-5, "{cr:?}");
    }
}
