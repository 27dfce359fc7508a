//! Fixed-step RK4 integration of label bundles.
//!
//! The integrated state is the displacement Δ = q − q₀ of every label. Angles
//! are never integrated: θ(t) follows [`super::angle_flow`].

use super::oracle::{OracleSampler, OracleSnapshot};
use super::{
    first_rotation_row, velocity_from_log_gradient, LabelFlag, LabelGrid, Mode, Snapshot,
    TrajectoryBundle, TrajectoryError, J_MIN, MAX_OMEGA_DT, NODE_REL,
};
use crate::angular_algebra::{basis_u, euler_matrices, EulerAngles, SpinCoefficients};
use crate::spinor_core::GammaSet;
use crate::PhysicalParams;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Knobs for [`integrate_bundle`].
#[derive(Clone, Debug)]
pub struct IntegrationOptions {
    pub mode: Mode,
    /// Largest step; the actual step is T/⌈T/dt⌉.
    pub dt: f64,
    pub t_end: f64,
    /// Record a snapshot every this many steps (0: initial and final only).
    pub record_every: usize,
    pub record_deformation: bool,
    pub record_velocity: bool,
    /// Integrate one representative per angle node when Φ₀ is spatially uniform.
    pub exploit_uniform: bool,
    pub parallel: bool,
}

impl IntegrationOptions {
    pub fn new(mode: Mode, dt: f64, t_end: f64) -> Self {
        Self {
            mode,
            dt,
            t_end,
            record_every: 0,
            record_deformation: false,
            record_velocity: false,
            exploit_uniform: true,
            parallel: false,
        }
    }

    /// Number of steps and the step actually taken.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, 0.0);
        }
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Per-angle-node constants.
struct Orbit {
    a: Matrix3<f64>,
    m0: Vector3<f64>,
    m1: Vector3<f64>,
    theta0: EulerAngles,
    stencil: [Vec<(usize, f64)>; 3],
}

impl Orbit {
    #[inline]
    fn r1(&self, gamma: f64) -> Vector3<f64> {
        let (s, c) = gamma.sin_cos();
        self.m0 * c - self.m1 * s
    }
}

fn orbits(labels: &LabelGrid) -> Result<Vec<Orbit>, TrajectoryError> {
    (0..labels.n_angles())
        .map(|a| {
            let th = labels.angles.node(a);
            let a_mat = euler_matrices(&th)?.a;
            // R = Rz(γ)·M with M = Rx(α)Rz(β)
            let at_zero = EulerAngles::raw(th.alpha, th.beta, 0.0);
            let at_quarter = EulerAngles::raw(th.alpha, th.beta, -std::f64::consts::FRAC_PI_2);
            let m0 = first_rotation_row(&at_zero);
            let m1 = first_rotation_row(&at_quarter);
            let stencil = [
                labels.angles.derivative_stencil(a, 0),
                labels.angles.derivative_stencil(a, 1),
                labels.angles.derivative_stencil(a, 2),
            ];
            Ok(Orbit {
                a: a_mat,
                m0,
                m1,
                theta0: th,
                stencil,
            })
        })
        .collect()
}

/// Spatial lattice on which deformation differences are taken.
struct Lattice {
    ns: usize,
    h: f64,
    /// `nb[s][j] = (s + e_j, s − e_j)`.
    nb: Vec<[(usize, usize); 3]>,
}

impl Lattice {
    fn new(labels: &LabelGrid, collapsed: bool) -> Self {
        let g = labels.space;
        if collapsed {
            return Self {
                ns: 1,
                h: g.h(),
                nb: vec![[(0, 0); 3]],
            };
        }
        let n = g.n;
        let nb = (0..g.len())
            .map(|s| {
                let [i, j, k] = g.unindex(s);
                let up = |d: usize| (d + 1) % n;
                let dn = |d: usize| (d + n - 1) % n;
                [
                    (g.index(up(i), j, k), g.index(dn(i), j, k)),
                    (g.index(i, up(j), k), g.index(i, dn(j), k)),
                    (g.index(i, j, up(k)), g.index(i, j, dn(k))),
                ]
            })
            .collect();
        Self {
            ns: g.len(),
            h: g.h(),
            nb,
        }
    }
}

fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, parallel: bool, f: F) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[inline]
fn add3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Deformation blocks of every label from label-lattice differences.
fn deformation_fd(
    disp: &[[f64; 3]],
    lat: &Lattice,
    orbits: &[Orbit],
    parallel: bool,
) -> Vec<(Matrix3<f64>, Matrix3<f64>)> {
    let ns = lat.ns;
    par_map(disp.len(), parallel, |l| {
        let (a, s) = (l / ns, l % ns);
        let mut dqq = Matrix3::identity();
        for j in 0..3 {
            let (p, m) = lat.nb[s][j];
            let dp = disp[a * ns + p];
            let dm = disp[a * ns + m];
            for i in 0..3 {
                dqq[(i, j)] += (dp[i] - dm[i]) / (2.0 * lat.h);
            }
        }
        let mut dqt = Matrix3::zeros();
        for r in 0..3 {
            for &(b, w) in &orbits[a].stencil[r] {
                let d = disp[b * ns + s];
                for i in 0..3 {
                    dqt[(i, r)] += w * d[i];
                }
            }
        }
        (dqq, dqt)
    })
}

struct ScEval {
    vel: Vec<[f64; 3]>,
    jac: Vec<f64>,
    new_flags: Vec<(usize, LabelFlag)>,
    min_ratio: f64,
}

/// Self-contained velocity of every label at time t.
#[allow(clippy::too_many_arguments)]
fn eval_self_contained(
    disp: &[[f64; 3]],
    t: f64,
    lat: &Lattice,
    orbits: &[Orbit],
    lq: &[[f64; 3]],
    lth: &[[f64; 3]],
    flags: &[LabelFlag],
    params: &PhysicalParams,
    parallel: bool,
) -> ScEval {
    let ns = lat.ns;
    let defs = deformation_fd(disp, lat, orbits, parallel);
    let jac: Vec<f64> = defs.iter().map(|(d, _)| d.determinant()).collect();
    let omega = params.omega();
    let results = par_map(disp.len(), parallel, |l| {
        if flags[l] != LabelFlag::Ok {
            return ([0.0; 3], None, f64::INFINITY);
        }
        let j = jac[l];
        if !(j > J_MIN) || !j.is_finite() {
            return ([0.0; 3], Some(LabelFlag::Collapse), f64::INFINITY);
        }
        let (a, s) = (l / ns, l % ns);
        let (dqq, dqt) = &defs[l];
        let mut yq = Vector3::zeros();
        for k in 0..3 {
            let (p, m) = lat.nb[s][k];
            let dlnj = (jac[a * ns + p] - jac[a * ns + m]) / (2.0 * lat.h) / j;
            yq[k] = lq[l][k] - dlnj;
        }
        let mut yt = Vector3::zeros();
        for r in 0..3 {
            let mut dj = 0.0;
            for &(b, w) in &orbits[a].stencil[r] {
                dj += w * jac[b * ns + s];
            }
            yt[r] = lth[l][r] - dj / j;
        }
        let z = match dqq.transpose().lu().solve(&yq) {
            Some(z) => z,
            None => return ([0.0; 3], Some(LabelFlag::Collapse), f64::INFINITY),
        };
        let g = yt - dqt.transpose() * z;
        let o = &orbits[a];
        let r1 = o.r1(o.theta0.gamma - omega * t);
        let v = velocity_from_log_gradient(&o.a, &r1, &g, params.c);
        let ratio = v.norm() / params.c;
        ([v[0], v[1], v[2]], None, ratio)
    });
    let mut out = ScEval {
        vel: Vec::with_capacity(disp.len()),
        jac,
        new_flags: Vec::new(),
        min_ratio: f64::INFINITY,
    };
    for (l, (v, f, r)) in results.into_iter().enumerate() {
        out.vel.push(v);
        if let Some(f) = f {
            out.new_flags.push((l, f));
        }
        out.min_ratio = out.min_ratio.min(r);
    }
    out
}

struct ValEval {
    vel: Vec<[f64; 3]>,
    dd: Vec<Matrix3<f64>>,
    psi: Vec<f64>,
    new_flags: Vec<(usize, LabelFlag)>,
    min_ratio: f64,
}

/// Oracle-driven velocity and velocity gradient for every label.
#[allow(clippy::too_many_arguments)]
fn eval_validation(
    disp: &[[f64; 3]],
    dmat: &[Matrix3<f64>],
    t: f64,
    labels: &LabelGrid,
    orbits: &[Orbit],
    snap: &OracleSnapshot,
    flags: &[LabelFlag],
    eps_node: f64,
    params: &PhysicalParams,
    parallel: bool,
) -> ValEval {
    let ns = labels.n_spatial();
    let omega = params.omega();
    let g = GammaSet::dirac();
    let alphas = [g.alpha(1), g.alpha(2), g.alpha(3)];
    // rows u(θ(t)) and u(θ(t))ᵀγ⁰γ^i for every angle node
    let rows: Vec<([C64; 4], [[C64; 4]; 3])> = orbits
        .iter()
        .map(|o| {
            let th = EulerAngles::raw(o.theta0.alpha, o.theta0.beta, o.theta0.gamma - omega * t);
            let u = basis_u(&th);
            let mut ua = [[C64::new(0.0, 0.0); 4]; 3];
            for i in 0..3 {
                for b in 0..4 {
                    ua[i][b] = (0..4).map(|a| u[a] * alphas[i][(a, b)]).sum();
                }
            }
            (u, ua)
        })
        .collect();
    let c = params.c;
    let results = par_map(disp.len(), parallel, |l| {
        let (a, s) = (l / ns, l % ns);
        let q0 = labels.space.point(s);
        let x = add3(q0, disp[l], 1.0);
        let (phi, dphi) = snap.sample(x);
        let (u, ua) = &rows[a];
        let dot = |w: &[C64; 4], v: &SpinCoefficients| -> f64 {
            (w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3]).re
        };
        let psi = dot(u, &phi);
        if flags[l] != LabelFlag::Ok {
            return ([0.0; 3], Matrix3::zeros(), psi, None, f64::INFINITY);
        }
        // ψ = ψ₀/J keeps its sign while 0 < J < ∞, so a sign change means the
        // path went through |ψ| ≤ ε_node between two evaluations.
        if psi.abs() <= eps_node || psi * labels.psi0[l] <= 0.0 {
            return (
                [0.0; 3],
                Matrix3::zeros(),
                psi,
                Some(LabelFlag::Node),
                f64::INFINITY,
            );
        }
        let inv = 1.0 / psi;
        let mut v = Vector3::zeros();
        for i in 0..3 {
            v[i] = c * dot(&ua[i], &phi) * inv;
        }
        let mut grad = Matrix3::zeros();
        for j in 0..3 {
            let dpsi = dot(u, &dphi[j]);
            for i in 0..3 {
                grad[(i, j)] = (c * dot(&ua[i], &dphi[j]) - v[i] * dpsi) * inv;
            }
        }
        let dd = grad * dmat[l];
        let ratio = v.norm() / c;
        ([v[0], v[1], v[2]], dd, psi, None, ratio)
    });
    let mut out = ValEval {
        vel: Vec::with_capacity(disp.len()),
        dd: Vec::with_capacity(disp.len()),
        psi: Vec::with_capacity(disp.len()),
        new_flags: Vec::new(),
        min_ratio: f64::INFINITY,
    };
    for (l, (v, d, p, f, r)) in results.into_iter().enumerate() {
        out.vel.push(v);
        out.dd.push(d);
        out.psi.push(p);
        if let Some(f) = f {
            out.new_flags.push((l, f));
        }
        out.min_ratio = out.min_ratio.min(r);
    }
    out
}

/// Integrates every label of `labels` from t = 0 to `opts.t_end`.
///
/// Validation mode needs `oracle`; self-contained mode ignores it.
pub fn integrate_bundle(
    labels: LabelGrid,
    params: PhysicalParams,
    opts: &IntegrationOptions,
    oracle: Option<&OracleSampler>,
) -> Result<TrajectoryBundle, TrajectoryError> {
    let omega = params.omega();
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(TrajectoryError::Invalid(
            "dt must be positive and T non-negative".into(),
        ));
    }
    if omega * opts.dt > MAX_OMEGA_DT * (1.0 + 1e-12) {
        return Err(TrajectoryError::StepTooLarge {
            omega_dt: omega * opts.dt,
            max: MAX_OMEGA_DT,
        });
    }
    match opts.mode {
        Mode::SelfContained => integrate_self_contained(labels, params, opts),
        Mode::Validation => {
            let oracle = oracle.ok_or_else(|| {
                TrajectoryError::Invalid("validation mode needs an oracle".into())
            })?;
            if oracle.branch() != labels.branch {
                return Err(TrajectoryError::Invalid(
                    "oracle and label branches differ".into(),
                ));
            }
            integrate_validation(labels, params, opts, oracle)
        }
    }
}

fn integrate_self_contained(
    labels: LabelGrid,
    params: PhysicalParams,
    opts: &IntegrationOptions,
) -> Result<TrajectoryBundle, TrajectoryError> {
    let collapsed = opts.exploit_uniform && labels.uniform;
    let lat = Lattice::new(&labels, collapsed);
    let orb = orbits(&labels)?;
    let ns_full = labels.n_spatial();
    let ne = orb.len() * lat.ns;
    let eps = NODE_REL * labels.psi0_max();
    // representative label of each effective index
    let rep = |e: usize| -> usize {
        let (a, s) = (e / lat.ns, e % lat.ns);
        a * ns_full + s
    };
    let psi0: Vec<f64> = (0..ne).map(|e| labels.psi0[rep(e)]).collect();
    let mut flags: Vec<LabelFlag> = psi0
        .iter()
        .map(|p| {
            if p.abs() <= eps {
                LabelFlag::Node
            } else {
                LabelFlag::Ok
            }
        })
        .collect();
    let lq: Vec<[f64; 3]> = (0..ne)
        .map(|e| {
            let d = labels.dpsi0_q[rep(e)];
            let p = psi0[e];
            [d[0] / p, d[1] / p, d[2] / p]
        })
        .collect();
    let lth: Vec<[f64; 3]> = (0..ne)
        .map(|e| {
            let d = labels.dpsi0_theta[rep(e)];
            let p = psi0[e];
            [d[0] / p, d[1] / p, d[2] / p]
        })
        .collect();
    let mut disp = vec![[0.0; 3]; ne];
    let (steps, h) = opts.steps();
    let mut min_ratio = f64::INFINITY;
    let mut evals = 0u64;
    let mut snaps = Vec::new();
    let eval = |d: &[[f64; 3]], t: f64, fl: &[LabelFlag]| {
        eval_self_contained(d, t, &lat, &orb, &lq, &lth, fl, &params, opts.parallel)
    };
    let record = |d: &[[f64; 3]], t: f64, fl: &[LabelFlag], ev: &ScEval| -> Snapshot {
        let defs = if opts.record_deformation {
            Some(deformation_fd(d, &lat, &orb, opts.parallel))
        } else {
            None
        };
        broadcast_snapshot(
            &labels,
            &lat,
            d,
            t,
            fl,
            &ev.jac,
            &psi0,
            defs,
            opts.record_velocity.then_some(&ev.vel),
        )
    };
    let ev0 = eval(&disp, 0.0, &flags);
    evals += ne as u64;
    min_ratio = min_ratio.min(ev0.min_ratio);
    apply_flags(&mut flags, &ev0.new_flags);
    snaps.push(record(&disp, 0.0, &flags, &ev0));
    let mut k1 = ev0;
    for step in 0..steps {
        let t = step as f64 * h;
        let stage = |k: &[[f64; 3]], s: f64| -> Vec<[f64; 3]> {
            disp.iter().zip(k).map(|(d, v)| add3(*d, *v, s)).collect()
        };
        let k2 = eval(&stage(&k1.vel, 0.5 * h), t + 0.5 * h, &flags);
        let k3 = eval(&stage(&k2.vel, 0.5 * h), t + 0.5 * h, &flags);
        let k4 = eval(&stage(&k3.vel, h), t + h, &flags);
        evals += 3 * ne as u64;
        let mut newly: Vec<(usize, LabelFlag)> = Vec::new();
        for k in [&k2, &k3, &k4] {
            min_ratio = min_ratio.min(k.min_ratio);
            newly.extend_from_slice(&k.new_flags);
        }
        for l in 0..ne {
            if flags[l] != LabelFlag::Ok || newly.iter().any(|(m, _)| *m == l) {
                continue;
            }
            for i in 0..3 {
                disp[l][i] += h / 6.0
                    * (k1.vel[l][i] + 2.0 * k2.vel[l][i] + 2.0 * k3.vel[l][i] + k4.vel[l][i]);
            }
        }
        apply_flags(&mut flags, &newly);
        let t_next = (step + 1) as f64 * h;
        let ev = eval(&disp, t_next, &flags);
        evals += ne as u64;
        min_ratio = min_ratio.min(ev.min_ratio);
        apply_flags(&mut flags, &ev.new_flags);
        let last = step + 1 == steps;
        if last || (opts.record_every > 0 && (step + 1) % opts.record_every == 0) {
            snaps.push(record(&disp, t_next, &flags, &ev));
        }
        k1 = ev;
    }
    Ok(TrajectoryBundle {
        params,
        branch: labels.branch,
        labels,
        mode: Mode::SelfContained,
        dt: h,
        steps,
        snapshots: snaps,
        min_speed_ratio: min_ratio,
        velocity_evaluations: evals,
    })
}

fn apply_flags(flags: &mut [LabelFlag], newly: &[(usize, LabelFlag)]) {
    for &(l, f) in newly {
        if flags[l] == LabelFlag::Ok {
            flags[l] = f;
        }
    }
}

/// Expands effective-label data to every label.
#[allow(clippy::too_many_arguments)]
fn broadcast_snapshot(
    labels: &LabelGrid,
    lat: &Lattice,
    disp: &[[f64; 3]],
    t: f64,
    flags: &[LabelFlag],
    jac: &[f64],
    psi0: &[f64],
    defs: Option<Vec<(Matrix3<f64>, Matrix3<f64>)>>,
    vel: Option<&Vec<[f64; 3]>>,
) -> Snapshot {
    let ns = labels.n_spatial();
    let n = labels.len();
    let eff = |l: usize| -> usize {
        let (a, s) = (l / ns, l % ns);
        a * lat.ns + if lat.ns == 1 { 0 } else { s }
    };
    let q = (0..n)
        .map(|l| add3(labels.q0_of(l), disp[eff(l)], 1.0))
        .collect();
    let jv: Vec<f64> = (0..n).map(|l| jac[eff(l)]).collect();
    let psi = (0..n).map(|l| psi0[eff(l)] / jac[eff(l)]).collect();
    Snapshot {
        t,
        q,
        psi,
        jac: jv,
        flags: (0..n).map(|l| flags[eff(l)]).collect(),
        d_qq: defs.as_ref().map(|d| (0..n).map(|l| d[eff(l)].0).collect()),
        d_qtheta: defs.as_ref().map(|d| (0..n).map(|l| d[eff(l)].1).collect()),
        velocity: vel.map(|v| (0..n).map(|l| v[eff(l)]).collect()),
    }
}

fn integrate_validation(
    labels: LabelGrid,
    params: PhysicalParams,
    opts: &IntegrationOptions,
    oracle: &OracleSampler,
) -> Result<TrajectoryBundle, TrajectoryError> {
    let orb = orbits(&labels)?;
    let lat = Lattice::new(&labels, false);
    let n = labels.len();
    let eps = NODE_REL * labels.psi0_max();
    let mut flags = vec![LabelFlag::Ok; n];
    let mut disp = vec![[0.0; 3]; n];
    let mut dmat = vec![Matrix3::identity(); n];
    let (steps, h) = opts.steps();
    let snap_at = |t: f64| {
        oracle
            .at(t)
            .map_err(|e| TrajectoryError::Invalid(format!("oracle: {e}")))
    };
    let eval = |d: &[[f64; 3]],
                m: &[Matrix3<f64>],
                t: f64,
                fl: &[LabelFlag]|
     -> Result<ValEval, TrajectoryError> {
        let s = snap_at(t)?;
        Ok(eval_validation(
            d,
            m,
            t,
            &labels,
            &orb,
            &s,
            fl,
            eps,
            &params,
            opts.parallel,
        ))
    };
    let record =
        |d: &[[f64; 3]], m: &[Matrix3<f64>], t: f64, fl: &[LabelFlag], ev: &ValEval| -> Snapshot {
            let jac: Vec<f64> = m.iter().map(|x| x.determinant()).collect();
            let dqt = opts.record_deformation.then(|| {
                deformation_fd(d, &lat, &orb, opts.parallel)
                    .into_iter()
                    .map(|x| x.1)
                    .collect()
            });
            Snapshot {
                t,
                q: (0..n).map(|l| add3(labels.q0_of(l), d[l], 1.0)).collect(),
                psi: ev.psi.clone(),
                jac,
                flags: fl.to_vec(),
                d_qq: opts.record_deformation.then(|| m.to_vec()),
                d_qtheta: dqt,
                velocity: opts.record_velocity.then(|| ev.vel.clone()),
            }
        };
    let mut min_ratio = f64::INFINITY;
    let mut evals = 0u64;
    let mut snaps = Vec::new();
    let ev0 = eval(&disp, &dmat, 0.0, &flags)?;
    evals += n as u64;
    min_ratio = min_ratio.min(ev0.min_ratio);
    apply_flags(&mut flags, &ev0.new_flags);
    snaps.push(record(&disp, &dmat, 0.0, &flags, &ev0));
    let mut k1 = ev0;
    for step in 0..steps {
        let t = step as f64 * h;
        let stage = |k: &ValEval, s: f64| -> (Vec<[f64; 3]>, Vec<Matrix3<f64>>) {
            (
                disp.iter()
                    .zip(&k.vel)
                    .map(|(d, v)| add3(*d, *v, s))
                    .collect(),
                dmat.iter().zip(&k.dd).map(|(d, v)| d + v * s).collect(),
            )
        };
        let (d2, m2) = stage(&k1, 0.5 * h);
        let k2 = eval(&d2, &m2, t + 0.5 * h, &flags)?;
        let (d3, m3) = stage(&k2, 0.5 * h);
        let k3 = eval(&d3, &m3, t + 0.5 * h, &flags)?;
        let (d4, m4) = stage(&k3, h);
        let k4 = eval(&d4, &m4, t + h, &flags)?;
        evals += 3 * n as u64;
        let mut newly: Vec<(usize, LabelFlag)> = Vec::new();
        for k in [&k2, &k3, &k4] {
            min_ratio = min_ratio.min(k.min_ratio);
            newly.extend_from_slice(&k.new_flags);
        }
        let mut blocked = vec![false; n];
        for (l, _) in &newly {
            blocked[*l] = true;
        }
        for l in 0..n {
            if flags[l] != LabelFlag::Ok || blocked[l] {
                continue;
            }
            for i in 0..3 {
                disp[l][i] += h / 6.0
                    * (k1.vel[l][i] + 2.0 * k2.vel[l][i] + 2.0 * k3.vel[l][i] + k4.vel[l][i]);
            }
            dmat[l] += (k1.dd[l] + k2.dd[l] * 2.0 + k3.dd[l] * 2.0 + k4.dd[l]) * (h / 6.0);
        }
        apply_flags(&mut flags, &newly);
        for l in 0..n {
            if flags[l] == LabelFlag::Ok {
                let j = dmat[l].determinant();
                if !(j > J_MIN) || !j.is_finite() {
                    flags[l] = LabelFlag::Collapse;
                }
            }
        }
        let t_next = (step + 1) as f64 * h;
        let ev = eval(&disp, &dmat, t_next, &flags)?;
        evals += n as u64;
        min_ratio = min_ratio.min(ev.min_ratio);
        apply_flags(&mut flags, &ev.new_flags);
        let last = step + 1 == steps;
        if last || (opts.record_every > 0 && (step + 1) % opts.record_every == 0) {
            snaps.push(record(&disp, &dmat, t_next, &flags, &ev));
        }
        k1 = ev;
    }
    Ok(TrajectoryBundle {
        params,
        branch: labels.branch,
        labels,
        mode: Mode::Validation,
        dt: h,
        steps,
        snapshots: snaps,
        min_speed_ratio: min_ratio,
        velocity_evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::AngleGrid;
    use crate::reference_solver::{GaussianPacket, Grid3};
    use crate::trajectory_engine::{plane_wave_paths, Branch, InitialState};

    fn e1() -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from(1.0);
        v
    }

    fn pw_labels(n: usize, branch: Branch) -> LabelGrid {
        LabelGrid::new(
            Grid3::new(n, 20.0),
            AngleGrid::quadrature(2, 4, 4).reduce_gamma(),
            branch,
            InitialState::Uniform { pol: e1() },
        )
        .unwrap()
    }

    #[test]
    fn plane_wave_matches_closed_form() {
        let p = PhysicalParams::default();
        let w = p.omega();
        for branch in [Branch::R, Branch::I] {
            let labels = pw_labels(2, branch);
            let mut o = IntegrationOptions::new(
                Mode::SelfContained,
                0.01 / w,
                2.0 * std::f64::consts::PI / w,
            );
            o.record_every = 50;
            let b = integrate_bundle(labels, p, &o, None).unwrap();
            for snap in &b.snapshots {
                for l in 0..b.labels.len() {
                    let e = plane_wave_paths(
                        b.labels.q0_of(l),
                        &b.labels.angle_of(l),
                        snap.t,
                        &p,
                        branch,
                    )
                    .unwrap();
                    for i in 0..3 {
                        assert!(
                            (snap.q[l][i] - e[i]).abs() < 1e-9,
                            "{branch:?} t={} l={l}",
                            snap.t
                        );
                    }
                    assert_eq!(snap.jac[l], 1.0);
                }
            }
            assert!(b.min_speed_ratio >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn fast_path_is_bitwise_equal_to_full_lattice() {
        let p = PhysicalParams::default();
        let w = p.omega();
        let mut o = IntegrationOptions::new(Mode::SelfContained, 0.05 / w, 0.5 / w);
        o.record_deformation = true;
        let a = integrate_bundle(pw_labels(2, Branch::R), p, &o, None).unwrap();
        o.exploit_uniform = false;
        let b = integrate_bundle(pw_labels(2, Branch::R), p, &o, None).unwrap();
        assert_eq!(a.final_snapshot(), b.final_snapshot());
    }

    #[test]
    fn zero_time_is_identity() {
        let p = PhysicalParams::default();
        let o = IntegrationOptions::new(Mode::SelfContained, 0.01, 0.0);
        let b = integrate_bundle(pw_labels(2, Branch::R), p, &o, None).unwrap();
        assert_eq!(b.snapshots.len(), 1);
        let s = &b.snapshots[0];
        for l in 0..b.labels.len() {
            assert_eq!(s.q[l], b.labels.q0_of(l));
            assert_eq!(s.jac[l], 1.0);
            assert_eq!(s.psi[l], b.labels.psi0[l]);
        }
    }

    #[test]
    fn step_too_large() {
        let p = PhysicalParams::default();
        let o = IntegrationOptions::new(Mode::SelfContained, 0.06 / p.omega(), 1.0);
        assert!(matches!(
            integrate_bundle(pw_labels(2, Branch::R), p, &o, None),
            Err(TrajectoryError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn validation_conserves_on_small_packet() {
        let p = PhysicalParams::default();
        let grid = Grid3::new(16, 20.0);
        let (init, field) = InitialState::gaussian(GaussianPacket::default(), grid, p);
        let labels = LabelGrid::new(
            Grid3::new(4, 20.0),
            AngleGrid::quadrature(2, 2, 4).reduce_gamma(),
            Branch::R,
            init,
        )
        .unwrap();
        let oracle = OracleSampler::new(field, Branch::R, 2, 6);
        let o = IntegrationOptions::new(Mode::Validation, 0.0125 / p.omega(), 0.5);
        let b = integrate_bundle(labels, p, &o, Some(&oracle)).unwrap();
        let s = b.final_snapshot();
        let m = b.labels.psi0_max();
        let mut worst: f64 = 0.0;
        for l in 0..b.labels.len() {
            if s.flags[l] == LabelFlag::Ok {
                worst = worst.max((s.psi[l] * s.jac[l] - b.labels.psi0[l]).abs() / m);
            }
        }
        assert!(worst < 1e-4, "{worst}");
        assert!(b.min_speed_ratio >= 1.0 - 1e-9);
    }
}
