//! Label transformation functions and material-picture covariance residuals.

use super::{check_velocity_transform, BoostParams, CovarianceError, PlaneWave};
use crate::angular_algebra::{basis_u, euler_matrices, AngleGrid, EulerAngles, SpinCoefficients};
use crate::reference_solver::Grid3;
use crate::trajectory_engine::{
    angle_flow, integrate_bundle, velocity, Branch, InitialState, IntegrationOptions, LabelFlag,
    LabelGrid, Mode, Snapshot, TrajectoryBundle, TrajectoryError, J_MIN,
};
use crate::PhysicalParams;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Residuals below this are treated as exact.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Label transformation functions at selected labels.
///
/// Matrices are indexed (j, i): row j is the boost component, column i the
/// label component. `xi`, `xibar`, `y`, `x`, `div_xi` carry one entry per
/// bundle snapshot.
#[derive(Clone, Debug)]
pub struct LabelShift {
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    pub xi: Vec<Vec<Matrix3<f64>>>,
    pub xibar: Vec<Vec<Matrix3<f64>>>,
    pub y: Vec<Vec<Matrix3<f64>>>,
    pub xi0: Vec<Matrix3<f64>>,
    pub f: Vec<[f64; 3]>,
    pub p: Vec<[f64; 3]>,
    pub x: Vec<Vec<[f64; 3]>>,
    /// ∂ξ_j^k/∂q₀^k.
    pub div_xi: Vec<Vec<[f64; 3]>>,
    /// Largest violation of the integrated density identity relating
    /// ∂(ψ₀ξ_j^i)/∂q₀^i, P_j and the ω-terms, relative to max|ψ₀|.
    pub identity_residual: f64,
}

/// Finite-difference helpers on the label lattice.
struct LabelDiff<'a> {
    labels: &'a LabelGrid,
    h: f64,
}

impl<'a> LabelDiff<'a> {
    fn new(labels: &'a LabelGrid) -> Self {
        Self {
            labels,
            h: labels.space.h(),
        }
    }

    fn neighbours(&self, l: usize, d: usize) -> (usize, usize) {
        let (a, s) = self.labels.split(l);
        let g = &self.labels.space;
        let idx = g.unindex(s);
        let mut p = idx;
        let mut m = idx;
        p[d] = (idx[d] + 1) % g.n;
        m[d] = (idx[d] + g.n - 1) % g.n;
        (
            self.labels.label(a, g.index(p[0], p[1], p[2])),
            self.labels.label(a, g.index(m[0], m[1], m[2])),
        )
    }

    /// ∂f/∂q₀^d at label l.
    fn dq(&self, f: impl Fn(usize) -> f64, l: usize, d: usize) -> f64 {
        let (p, m) = self.neighbours(l, d);
        (f(p) - f(m)) / (2.0 * self.h)
    }

    /// ∂f/∂θ₀^r at label l.
    fn dtheta(&self, f: impl Fn(usize) -> f64, l: usize, r: usize) -> f64 {
        let (a, s) = self.labels.split(l);
        self.labels
            .angles
            .derivative_stencil(a, r)
            .into_iter()
            .map(|(b, w)| w * f(self.labels.label(b, s)))
            .sum()
    }

    /// Σ_k ∂v_k/∂q₀^k.
    fn div(&self, v: impl Fn(usize, usize) -> f64, l: usize) -> f64 {
        (0..3).map(|k| self.dq(|m| v(m, k), l, k)).sum()
    }
}

/// n̂₁m̂_jn̂₁m̂_kψ/ψ = δ_jk − ε_jkl m̂_lψ/ψ with m̂_lψ/ψ = −2A_l^r ∂_r ln ψ.
fn double_generator_ratio(a: &Matrix3<f64>, g: &Vector3<f64>) -> Matrix3<f64> {
    let w = a * g * -2.0;
    Matrix3::new(1.0, -w[2], w[1], w[2], 1.0, -w[0], -w[1], w[0], 1.0)
}

/// ∂ ln ψ/∂α at fixed x from label data, with ψ = ψ₀/J.
fn log_gradient(
    labels: &LabelGrid,
    diff: &LabelDiff,
    snap: &Snapshot,
    dqq: &Matrix3<f64>,
    dqt: &Matrix3<f64>,
    l: usize,
) -> Vector3<f64> {
    let lnj = |m: usize| snap.jac[m].ln();
    let psi0 = labels.psi0[l];
    let yq = Vector3::from_fn(|i, _| labels.dpsi0_q[l][i] / psi0 - diff.dq(lnj, l, i));
    let yt = Vector3::from_fn(|r, _| labels.dpsi0_theta[l][r] / psi0 - diff.dtheta(lnj, l, r));
    let z = dqq
        .transpose()
        .lu()
        .solve(&yq)
        .unwrap_or_else(Vector3::zeros);
    yt - dqt.transpose() * z
}

fn blocks(
    snap: &Snapshot,
) -> Result<(&[Matrix3<f64>], &[Matrix3<f64>], &[[f64; 3]]), CovarianceError> {
    match (&snap.d_qq, &snap.d_qtheta, &snap.velocity) {
        (Some(a), Some(b), Some(v)) => Ok((a, b, v)),
        _ => Err(CovarianceError::Invalid(
            "every snapshot needs deformation blocks and velocities".into(),
        )),
    }
}

/// Builds ξ, ξ̄, ξ₀, f, P and X from a bundle recorded at every step.
///
/// `sites` selects where the functions are stored (all labels when `None`);
/// Y is evaluated everywhere because its divergence is needed.
pub fn label_shift_functions(
    bundle: &TrajectoryBundle,
    sites: Option<&[usize]>,
) -> Result<LabelShift, CovarianceError> {
    let labels = &bundle.labels;
    let p = bundle.params;
    let (c, w) = (p.c, p.omega());
    let n = labels.len();
    let sites: Vec<usize> = sites
        .map(|s| s.to_vec())
        .unwrap_or_else(|| (0..n).collect());
    if sites.iter().any(|&s| s >= n) {
        return Err(CovarianceError::Invalid("site index out of range".into()));
    }
    if bundle.snapshots.len() != bundle.steps + 1 {
        return Err(CovarianceError::Invalid(
            "bundle must be recorded at every step".into(),
        ));
    }
    let diff = LabelDiff::new(labels);
    let s0 = &bundle.snapshots[0];
    let (_, _, v0) = blocks(s0)?;
    let psi0 = &labels.psi0;
    let psi_max = labels.psi0_max();

    let q0: Vec<[f64; 3]> = (0..n).map(|l| labels.q0_of(l)).collect();
    let f: Vec<[f64; 3]> = sites.iter().map(|&l| q0[l].map(|v| v / c)).collect();
    let xi0: Vec<Matrix3<f64>> = sites
        .iter()
        .map(|&l| Matrix3::from_fn(|j, i| q0[l][j] / c * v0[l][i]))
        .collect();
    // q₀ enters ξ₀ explicitly, so the product rule keeps the lattice differences periodic.
    let div_q0dot: Vec<f64> = sites
        .iter()
        .map(|&l| diff.div(|m, k| v0[m][k], l))
        .collect();
    let div_psi_q0dot: Vec<f64> = sites
        .iter()
        .map(|&l| diff.div(|m, k| psi0[m] * v0[m][k], l))
        .collect();
    let div_xi0: Vec<[f64; 3]> = sites
        .iter()
        .enumerate()
        .map(|(k, &l)| [0, 1, 2].map(|j| (v0[l][j] + q0[l][j] * div_q0dot[k]) / c))
        .collect();
    let div_psi_xi0: Vec<[f64; 3]> = sites
        .iter()
        .enumerate()
        .map(|(k, &l)| [0, 1, 2].map(|j| (psi0[l] * v0[l][j] + q0[l][j] * div_psi_q0dot[k]) / c))
        .collect();
    let pj: Vec<[f64; 3]> = sites
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            [0, 1, 2].map(|j| {
                w / c * q0[l][j] * labels.dpsi0_theta[l][2] - div_psi_xi0[k][j]
                    + psi0[l] * v0[l][j] / (2.0 * c)
            })
        })
        .collect();

    let ns = bundle.snapshots.len();
    let mut out = LabelShift {
        sites: sites.clone(),
        times: Vec::with_capacity(ns),
        xi: Vec::with_capacity(ns),
        xibar: Vec::with_capacity(ns),
        y: Vec::with_capacity(ns),
        xi0: xi0.clone(),
        f,
        p: pj.clone(),
        x: Vec::with_capacity(ns),
        div_xi: Vec::with_capacity(ns),
        identity_residual: 0.0,
    };
    let mut integral = vec![Matrix3::<f64>::zeros(); n];
    let mut prev_y: Option<Vec<Matrix3<f64>>> = None;
    let mut prev_t = 0.0;
    for snap in &bundle.snapshots {
        let (dqq, dqt, vel) = blocks(snap)?;
        if let Some((l, j)) = snap.jac.iter().enumerate().find(|(_, j)| !(**j > J_MIN)) {
            return Err(TrajectoryError::JacobianCollapse {
                label: l,
                j: *j,
                min: J_MIN,
            }
            .into());
        }
        let y: Vec<Matrix3<f64>> = (0..n)
            .map(|l| -> Result<Matrix3<f64>, CovarianceError> {
                let th = angle_flow(&labels.angle_of(l), snap.t, &p);
                let a = euler_matrices(&th).map_err(TrajectoryError::from)?.a;
                let g = log_gradient(labels, &diff, snap, &dqq[l], &dqt[l], l);
                let nn = double_generator_ratio(&a, &g);
                let qd = Vector3::from(vel[l]);
                let dq3 = dqt[l].column(2).into_owned();
                let inv = dqq[l]
                    .try_inverse()
                    .ok_or(TrajectoryError::JacobianCollapse {
                        label: l,
                        j: snap.jac[l],
                        min: J_MIN,
                    })?;
                let mut m = Matrix3::zeros();
                for j in 0..3 {
                    let bracket = Vector3::from_fn(|k, _| {
                        qd[j] * qd[k] / (2.0 * c) + w / c * qd[j] * dq3[k] - 0.5 * c * nn[(j, k)]
                    });
                    let row = inv * bracket;
                    for i in 0..3 {
                        m[(j, i)] = row[i];
                    }
                }
                Ok(m)
            })
            .collect::<Result<_, _>>()?;
        if let Some(py) = &prev_y {
            let h = snap.t - prev_t;
            for l in 0..n {
                integral[l] += (py[l] + y[l]) * (0.5 * h);
            }
        }
        let mut xi_t = Vec::with_capacity(sites.len());
        let mut xb_t = Vec::with_capacity(sites.len());
        let mut x_t = Vec::with_capacity(sites.len());
        let mut dv_t = Vec::with_capacity(sites.len());
        for (k, &l) in sites.iter().enumerate() {
            let xi = integral[l] + xi0[k];
            let q = snap.q[l];
            let mut xb = Matrix3::zeros();
            for j in 0..3 {
                xb[(j, 2)] = -w * q[j] / c;
            }
            let mut dv = [0.0; 3];
            let mut x = [0.0; 3];
            for j in 0..3 {
                dv[j] = diff.div(|m, i| integral[m][(j, i)], l) + div_xi0[k][j];
                let div_psi_xi =
                    diff.div(|m, i| psi0[m] * integral[m][(j, i)], l) + div_psi_xi0[k][j];
                let rhs = w / c * (labels.dpsi0_theta[l][2] * q[j] + psi0[l] * dqt[l][(j, 2)])
                    + psi0[l] * vel[l][j] / (2.0 * c);
                let res = (div_psi_xi + pj[k][j] - rhs).abs() / psi_max;
                out.identity_residual = out.identity_residual.max(res);
                x[j] = (0..3)
                    .map(|i| labels.dpsi0_q[l][i] * xi[(j, i)])
                    .sum::<f64>()
                    - w / c * labels.dpsi0_theta[l][2] * q[j]
                    + pj[k][j];
            }
            xi_t.push(xi);
            xb_t.push(xb);
            x_t.push(x);
            dv_t.push(dv);
        }
        out.times.push(snap.t);
        out.xi.push(xi_t);
        out.xibar.push(xb_t);
        out.y.push(sites.iter().map(|&l| y[l]).collect());
        out.x.push(x_t);
        out.div_xi.push(dv_t);
        prev_t = snap.t;
        prev_y = Some(y);
    }
    Ok(out)
}

/// Largest first-order material residuals for one boost.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MaterialCheck {
    /// |J′⁻¹ψ′₀ − J⁻¹ψ₀(1 − ε·q̇/2c)| / max|ψ₀|.
    pub density: f64,
    /// |J′⁻¹ψ′₀ − ψ′| against the exactly boosted field, / max|ψ₀|.
    pub density_vs_field: f64,
    /// |q̇′ − v′| / c with q̇′ from the label-aware rule and v′ from the boosted field.
    pub velocity: f64,
    /// |θ′₀³ − ωt′ − θ³(t)| in radians.
    pub angle: f64,
    /// Same with the label angle shift built from q̇ in place of q.
    pub angle_qdot_reading: f64,
    /// |q′(t′) − (q(t) − εct)| / c·T after integrating the primed path from its predicted label.
    pub label_path: f64,
    /// |q′(t′ = 0) − q′₀| / c·T.
    pub label_condition: f64,
}

/// Cubic Hermite interpolant on [t0, t1].
fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

fn majorana_eval(phi: &SpinCoefficients, th: &EulerAngles) -> f64 {
    let u = basis_u(th);
    (0..4).map(|a| u[a] * phi[a]).sum::<C64>().re
}

/// Integrates a primed path in `field` from label (q′₀, θ′₀) at t′ = 0 to `t_end`.
fn primed_path(
    field: &PlaneWave,
    branch: Branch,
    q0: [f64; 3],
    theta0: &EulerAngles,
    t_end: f64,
    p: &PhysicalParams,
) -> Result<[f64; 3], CovarianceError> {
    let n = ((t_end.abs() / (0.002 / p.omega())).ceil() as usize).max(1);
    let h = t_end / n as f64;
    let vel = |x: [f64; 3], t: f64| -> Result<Vector3<f64>, CovarianceError> {
        let (phi, _) = field.majorana_at(x, t, branch);
        Ok(Vector3::from(velocity(
            &phi,
            &angle_flow(theta0, t, p),
            p,
            0.0,
        )?))
    };
    let mut q = Vector3::from(q0);
    let mut t = 0.0;
    let arr = |v: Vector3<f64>| [v[0], v[1], v[2]];
    for _ in 0..n {
        let k1 = vel(arr(q), t)?;
        let k2 = vel(arr(q + k1 * (0.5 * h)), t + 0.5 * h)?;
        let k3 = vel(arr(q + k2 * (0.5 * h)), t + 0.5 * h)?;
        let k4 = vel(arr(q + k3 * h), t + h)?;
        q += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
    }
    Ok(arr(q))
}

/// First-order material covariance residuals at the shift's sites for one boost.
///
/// `field` is the original plane wave the bundle was built from; its exact
/// boost supplies the primed density and velocity. Without it only the
/// relations internal to the bundle are evaluated and the others are NaN.
pub fn check_material_covariance(
    bundle: &TrajectoryBundle,
    shift: &LabelShift,
    field: Option<&PlaneWave>,
    b: &BoostParams,
    path_checks: usize,
) -> Result<MaterialCheck, CovarianceError> {
    let p = bundle.params;
    let (c, w) = (p.c, p.omega());
    let labels = &bundle.labels;
    let branch = labels.branch;
    let boosted = field.map(|f| f.boosted_exact(b, &p));
    let psi_max = labels.psi0_max();
    let t_total = bundle
        .snapshots
        .last()
        .map(|s| s.t)
        .unwrap_or(0.0)
        .max(1.0 / w);
    let scale_len = c * t_total;
    let e = b.eps;
    let mut out = MaterialCheck::default();
    let picks: Vec<usize> = if path_checks == 0 {
        vec![]
    } else {
        (1..=path_checks)
            .map(|k| k * (bundle.snapshots.len() - 1) / path_checks)
            .collect()
    };
    for (n, snap) in bundle.snapshots.iter().enumerate() {
        let (dqq, dqt, vel) = blocks(snap)?;
        for (k, &l) in shift.sites.iter().enumerate() {
            if snap.flags[l] != LabelFlag::Ok {
                continue;
            }
            let q = snap.q[l];
            let qd = vel[l];
            let jac = snap.jac[l];
            let th = angle_flow(&labels.angle_of(l), snap.t, &p);
            let tp = snap.t - b.dot(&q) / c;
            let xp = [0, 1, 2].map(|i| q[i] - e[i] * c * snap.t);
            let dv = shift.div_xi[n][k];
            let kj: f64 = (0..3)
                .map(|j| e[j] * (qd[j] / c - dv[j] + w / c * dqt[l][(j, 2)]))
                .sum();
            let jp = jac * (1.0 + kj);
            let psi0 = labels.psi0[l];
            let psi0p = psi0 + (0..3).map(|j| e[j] * shift.x[n][k][j]).sum::<f64>();
            let lhs = psi0p / jp;
            out.density = out
                .density
                .max((lhs - psi0 / jac * (1.0 - b.dot(&qd) / (2.0 * c))).abs() / psi_max);
            let th0 = labels.angle_of(l);
            let shift3: f64 = (0..3).map(|j| e[j] * shift.xibar[n][k][(j, 2)]).sum();
            let ang = (th0.gamma + shift3 - w * tp) - (th0.gamma - w * snap.t);
            out.angle = out.angle.max(ang.abs());
            let shift3_dot: f64 = (0..3).map(|j| -e[j] * w * qd[j] / c).sum();
            out.angle_qdot_reading = out
                .angle_qdot_reading
                .max(((th0.gamma + shift3_dot - w * tp) - (th0.gamma - w * snap.t)).abs());

            let Some(boosted) = &boosted else { continue };
            let (phip, _) = boosted.majorana_at(xp, tp, branch);
            out.density_vs_field = out
                .density_vs_field
                .max((lhs - majorana_eval(&phip, &th)).abs() / psi_max);

            let y = &shift.y[n][k];
            let vp = velocity(&phip, &th, &p, 0.0)?;
            let mut dev = 0.0;
            for i in 0..3 {
                let mut qdp = qd[i];
                for j in 0..3 {
                    let label_term: f64 = (0..3).map(|kk| y[(j, kk)] * dqq[l][(i, kk)]).sum();
                    qdp += e[j]
                        * (qd[j] * qd[i] / c - if i == j { c } else { 0.0 } - label_term
                            + w / c * qd[j] * dqt[l][(i, 2)]);
                }
                dev += (qdp - vp[i]).powi(2);
            }
            out.velocity = out.velocity.max(dev.sqrt() / c);

            if picks.contains(&n) {
                let q0p = [0, 1, 2].map(|i| {
                    labels.q0_of(l)[i] + (0..3).map(|j| e[j] * shift.xi[n][k][(j, i)]).sum::<f64>()
                });
                let th0p = EulerAngles::raw(th0.alpha, th0.beta, th0.gamma + shift3);
                let end = primed_path(boosted, branch, q0p, &th0p, tp, &p)?;
                let d = (0..3).map(|i| (end[i] - xp[i]).powi(2)).sum::<f64>().sqrt();
                out.label_path = out.label_path.max(d / scale_len);
            }
        }
    }
    // covariant label condition near t = 0
    if bundle.snapshots.len() >= 2 {
        let (s0, s1) = (&bundle.snapshots[0], &bundle.snapshots[1]);
        let (_, _, v0) = blocks(s0)?;
        let (_, _, v1) = blocks(s1)?;
        for (k, &l) in shift.sites.iter().enumerate() {
            let qa = |t: f64| {
                [0, 1, 2]
                    .map(|i| hermite(s0.t, s1.t, s0.q[l][i], s1.q[l][i], v0[l][i], v1[l][i], t))
            };
            let mut te = 0.0;
            for _ in 0..50 {
                te = b.dot(&qa(te)) / c;
            }
            let q = qa(te);
            let mut d = 0.0;
            for i in 0..3 {
                let xi_i: f64 = (0..3)
                    .map(|j| {
                        e[j] * hermite(
                            s0.t,
                            s1.t,
                            shift.xi[0][k][(j, i)],
                            shift.xi[1][k][(j, i)],
                            shift.y[0][k][(j, i)],
                            shift.y[1][k][(j, i)],
                            te,
                        )
                    })
                    .sum();
                let primed = q[i] - e[i] * c * te;
                d += (primed - (s0.q[l][i] + xi_i)).powi(2);
            }
            out.label_condition = out.label_condition.max(d.sqrt() / scale_len);
        }
    }
    if field.is_none() {
        out.density_vs_field = f64::NAN;
        out.velocity = f64::NAN;
        out.label_path = f64::NAN;
    }
    Ok(out)
}

/// Residuals of one quantity across successive ε-halvings.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingEntry {
    pub name: String,
    pub residuals: Vec<f64>,
    /// residual(ε_k)/residual(ε_{k+1}).
    pub ratios: Vec<f64>,
    /// log₂ of the ratios.
    pub exponents: Vec<f64>,
    pub below_floor: bool,
    pub required: bool,
    pub passed: bool,
}

impl ScalingEntry {
    fn new(name: &str, residuals: Vec<f64>, required: bool) -> Self {
        let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
        let exponents = ratios.iter().map(|r| r.log2()).collect();
        let below_floor = residuals.iter().all(|r| *r <= ROUNDOFF_FLOOR);
        let passed = below_floor || ratios.iter().all(|r| (3.5..=4.5).contains(r));
        Self {
            name: name.into(),
            residuals,
            ratios,
            exponents,
            below_floor,
            required,
            passed,
        }
    }
}

/// ε-scaling study on the zero-momentum plane wave.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub eps: Vec<[f64; 3]>,
    pub entries: Vec<ScalingEntry>,
    /// Integrated density identity, independent of ε.
    pub identity_residual: f64,
    pub xibar_third_row_only: bool,
    /// f → q₀/c at the sites.
    pub f_residual: f64,
    pub min_boosted_speed_ratio: f64,
    pub passed: bool,
}

impl CovarianceReport {
    pub fn entry(&self, name: &str) -> Option<&ScalingEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Full first-order covariance study of Ψ₀ = e₁ for boosts ε₀/2^k, k = 0..=halvings.
pub fn plane_wave_covariance(
    p: PhysicalParams,
    eps0: [f64; 3],
    halvings: usize,
) -> Result<CovarianceReport, CovarianceError> {
    BoostParams::new(eps0)?;
    let mut e1 = SpinCoefficients::zeros();
    e1[0] = C64::from(1.0);
    let wave = PlaneWave::rest(e1, &p)?;
    let boosts: Vec<BoostParams> = (0..=halvings)
        .map(|k| BoostParams::new(eps0.map(|v| v / f64::powi(2.0, k as i32))))
        .collect::<Result<_, _>>()?;
    let w = p.omega();

    // field picture
    let mut r54 = Vec::new();
    let mut r55d = Vec::new();
    let mut r55v = Vec::new();
    let mut min_speed = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let samples: Vec<(EulerAngles, f64)> = (0..20)
        .map(|_| {
            let th = EulerAngles::raw(
                rng.gen_range(0.2..2.9),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..4.0 * std::f64::consts::PI),
            );
            (th, rng.gen_range(0.0..2.0 * std::f64::consts::PI / w))
        })
        .collect();
    for b in &boosts {
        r54.push(wave.boosted_first_order(b, &p).dirac_residual(&p));
        let (mut d, mut v) = (0.0f64, 0.0f64);
        for (th, t) in &samples {
            for branch in [Branch::R, Branch::I] {
                let (phi, _) = wave.majorana_at([0.0; 3], *t, branch);
                let psi = majorana_eval(&phi, th);
                if psi.abs() < 1e-3 * phi.norm() {
                    continue;
                }
                let chk = check_velocity_transform(&phi, th, b, &p)?;
                d = d.max(chk.density_residual);
                v = v.max(chk.velocity_residual);
                min_speed = min_speed.min(chk.boosted_speed_ratio);
            }
        }
        r55d.push(d);
        r55v.push(v);
    }

    // material picture on a 3 × 3 × 3 label cluster
    let center = EulerAngles::raw(1.1, 0.4, 0.7);
    let grid = Grid3::new(3, 3.0);
    let t_end = 2.0 / w;
    let mut opts = IntegrationOptions::new(Mode::SelfContained, 0.008 / w, t_end);
    opts.record_every = 1;
    opts.record_deformation = true;
    opts.record_velocity = true;
    let mut mats: Vec<Vec<MaterialCheck>> = vec![Vec::new(); boosts.len()];
    let mut identity = 0.0f64;
    let mut xibar_ok = true;
    let mut f_res = 0.0f64;
    for branch in [Branch::R, Branch::I] {
        let labels = LabelGrid::new(
            grid,
            AngleGrid::cluster(center, 1e-4),
            branch,
            InitialState::Uniform { pol: e1 },
        )?;
        let site = labels.label(labels.angles.flat(1, 1, 1), grid.index(1, 1, 1));
        let bundle = integrate_bundle(labels, p, &opts, None)?;
        let shift = label_shift_functions(&bundle, Some(&[site]))?;
        identity = identity.max(shift.identity_residual);
        xibar_ok &= shift
            .xibar
            .iter()
            .flatten()
            .all(|m| m.columns(0, 2).iter().all(|v| *v == 0.0));
        let q0 = bundle.labels.q0_of(site);
        f_res = f_res.max(
            (0..3)
                .map(|i| (shift.f[0][i] - q0[i] / p.c).abs())
                .fold(0.0, f64::max),
        );
        for (k, b) in boosts.iter().enumerate() {
            mats[k].push(check_material_covariance(
                &bundle,
                &shift,
                Some(&wave),
                b,
                4,
            )?);
        }
    }
    let worst = |f: fn(&MaterialCheck) -> f64| -> Vec<f64> {
        mats.iter()
            .map(|v| v.iter().map(f).fold(0.0, f64::max))
            .collect()
    };
    let entries = vec![
        ScalingEntry::new("form_invariance", r54, true),
        ScalingEntry::new("density_transform", r55d, true),
        ScalingEntry::new("velocity_transform", r55v, true),
        ScalingEntry::new("material_density", worst(|m| m.density), true),
        ScalingEntry::new(
            "material_density_vs_boosted_field",
            worst(|m| m.density_vs_field),
            true,
        ),
        ScalingEntry::new("material_velocity", worst(|m| m.velocity), true),
        ScalingEntry::new("material_angle", worst(|m| m.angle), true),
        ScalingEntry::new("label_condition", worst(|m| m.label_condition), true),
        ScalingEntry::new("label_path", worst(|m| m.label_path), true),
        ScalingEntry::new(
            "material_angle_qdot_reading",
            worst(|m| m.angle_qdot_reading),
            false,
        ),
    ];
    let passed = entries.iter().filter(|e| e.required).all(|e| e.passed)
        && xibar_ok
        && identity < 1e-6
        && f_res < 1e-12
        && min_speed >= 1.0 - 1e-9;
    Ok(CovarianceReport {
        eps: boosts.iter().map(|b| b.eps).collect(),
        entries,
        identity_residual: identity,
        xibar_third_row_only: xibar_ok,
        f_residual: f_res,
        min_boosted_speed_ratio: min_speed,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::{eval_spin, eval_spin_gradient};
    use crate::covariance::n1m_hat;

    #[test]
    fn double_generator_identity() {
        let phi = SpinCoefficients::new(
            C64::new(0.3, 0.2),
            C64::new(-0.1, 0.5),
            C64::new(0.1, 0.5),
            C64::new(0.3, -0.2),
        );
        let th = EulerAngles::raw(1.0, 0.7, 2.0);
        let psi = eval_spin(&phi, &th);
        let gr = eval_spin_gradient(&phi, &th);
        let g = Vector3::new((gr[0] / psi).re, (gr[1] / psi).re, (gr[2] / psi).re);
        let a = euler_matrices(&th).unwrap().a;
        let nn = double_generator_ratio(&a, &g);
        for j in 0..3 {
            for k in 0..3 {
                let direct = (eval_spin(&(n1m_hat(j + 1) * n1m_hat(k + 1) * phi), &th) / psi).re;
                assert!(
                    (direct - nn[(j, k)]).abs() < 1e-12,
                    "{j}{k}: {direct} {}",
                    nn[(j, k)]
                );
            }
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let df = |t: f64| -2.0 + 1.5 * t * t;
        let v = hermite(0.2, 0.9, f(0.2), f(0.9), df(0.2), df(0.9), 0.45);
        assert!((v - f(0.45)).abs() < 1e-14);
    }
}

#[cfg(test)]
mod study {
    use super::*;

    #[test]
    fn plane_wave_study_passes() {
        let r = plane_wave_covariance(PhysicalParams::default(), [1e-3, 0.0, 0.0], 1).unwrap();
        for e in &r.entries {
            assert!(e.passed || !e.required, "{e:?}");
        }
        assert!(r.passed, "{r:?}");
        assert!(!r.entry("material_angle_qdot_reading").unwrap().passed);
    }
}
