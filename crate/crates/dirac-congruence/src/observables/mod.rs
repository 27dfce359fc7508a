//! Squared-density flows, polar variables, mean velocities and the quantum potential.
//!
//! Every quantity is evaluated pointwise from Ψ and its spectral gradient;
//! angular derivatives are analytic. Residuals of the evolution laws take a
//! centred time difference between two snapshots and average the remaining
//! terms over both, so they vanish as O(dt²) for exact solutions.

mod kernel;
pub mod study;

use crate::angular_algebra::{AngleGrid, EulerAngles, SpinCoefficients};
use crate::reference_solver::{Fft3, Grid3, SolverError, SpinorField};
use crate::spinor_core::{dirac_current, majorana_split, GammaSet};
use crate::PhysicalParams;
use kernel::{dot, partial_flow, polar_local, Frame, Ops};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use study::{
    field_polar_study, gauge_study, gaussian_polar_study, plane_wave_polar_study, potential_study, ConvergenceRow,
    GaugeReport, PolarStudy, PotentialStudy,
};

/// Amplitude below which ψ counts as a node.
pub const EPS_NODE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("|ψ| = {psi:e} is at a node")]
    NodeSingularity { psi: f64 },
    #[error("phase unwrapping hit a node at sample {index}")]
    NodeCrossing { index: usize },
    #[error("angles are at a pole of the Euler chart")]
    Pole,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Invalid(String),
}

/// Amplitude and phase of ψ at one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub amplitude: f64,
    /// Phase S in action units, ψ = |ψ|e^{iS/ħ}.
    pub phase: f64,
}

/// Mean velocities and quantum potential at one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub v_trans: [f64; 3],
    /// Bare angular drift (0, 0, −ω).
    pub v_ang: [f64; 3],
    /// Mean of the modified partial angular velocities.
    pub v_ang_modified: [f64; 3],
    pub q: f64,
}

/// Differences between the partial-flow means and the polar expressions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualRoute {
    /// max_i |Δv^i| / c
    pub translational: f64,
    /// max_r |Δv^r| / max(|v^r|, ω)
    pub angular: f64,
}

/// Constant external potential (A₀, A_i).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantPotential {
    pub a0: f64,
    pub a: [f64; 3],
}

/// Gauge function f = f₀ + f_t t + f_x·x.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearGauge {
    pub f0: f64,
    pub ft: f64,
    pub fx: [f64; 3],
}

impl LinearGauge {
    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        self.f0 + self.ft * t + (0..3).map(|i| self.fx[i] * x[i]).sum::<f64>()
    }

    /// Potential seen after the transformation, A₀ − ∂_tf/c and A_i − ∂_if.
    pub fn transform_potential(&self, pot: &ConstantPotential, c: f64) -> ConstantPotential {
        ConstantPotential {
            a0: pot.a0 - self.ft / c,
            a: std::array::from_fn(|i| pot.a[i] - self.fx[i]),
        }
    }
}

/// Ψ and ∇Ψ at a set of spatial points at one time.
#[derive(Clone, Debug)]
pub struct FieldSamples {
    pub params: PhysicalParams,
    pub t: f64,
    pub points: Vec<[f64; 3]>,
    pub psi: Vec<SpinCoefficients>,
    pub grad: Vec<[SpinCoefficients; 3]>,
}

impl FieldSamples {
    /// Every `stride`-th grid point along each axis, with spectral gradients.
    pub fn from_field(field: &SpinorField, stride: usize) -> Self {
        let stride = stride.max(1);
        let fft = Fft3::new(field.grid.n);
        let g = field.gradient(&fft);
        let n = field.grid.n;
        let mut out = Self {
            params: field.params,
            t: field.time,
            points: vec![],
            psi: vec![],
            grad: vec![],
        };
        for ix in (0..n).step_by(stride) {
            for iy in (0..n).step_by(stride) {
                for iz in (0..n).step_by(stride) {
                    let p = field.grid.index(ix, iy, iz);
                    out.points.push(field.grid.point(p));
                    out.psi.push(field.at(p));
                    out.grad.push(std::array::from_fn(|i| {
                        SpinCoefficients::new(g[i][0][p], g[i][1][p], g[i][2][p], g[i][3][p])
                    }));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Ψ·e^{if/ħ} with the matching gradient.
    pub fn gauge(&self, f: &LinearGauge) -> Self {
        let hbar = self.params.hbar;
        let mut out = self.clone();
        for k in 0..self.len() {
            let ph = C64::from_polar(1.0, f.value(self.points[k], self.t) / hbar);
            let psi = self.psi[k];
            out.psi[k] = psi * ph;
            out.grad[k] = std::array::from_fn(|i| {
                (self.grad[k][i] + psi * C64::new(0.0, f.fx[i] / hbar)) * ph
            });
        }
        out
    }

    /// Absorbs a constant potential into the phase, S → S + cA₀t + A_ix^i.
    pub fn with_potential(&self, pot: &ConstantPotential) -> Self {
        let f = LinearGauge {
            f0: 0.0,
            ft: self.params.c * pot.a0,
            fx: pot.a,
        };
        self.gauge(&f)
    }

    fn check_pair(&self, other: &Self) -> Result<(), ObservablesError> {
        if self.len() != other.len() || self.points != other.points || self.params != other.params {
            return Err(
                SolverError::GridMismatch("snapshots sample different points".into()).into(),
            );
        }
        Ok(())
    }
}

/// Sampling and tolerance choices for the residual checks.
#[derive(Clone, Debug)]
pub struct ObservableOptions {
    pub angles: Vec<EulerAngles>,
    /// Samples with |ψ| below this fraction of the sampled maximum are skipped by the polar checks.
    pub node_rel: f64,
    pub potential: Option<ConstantPotential>,
}

impl Default for ObservableOptions {
    fn default() -> Self {
        Self {
            angles: AngleGrid::quadrature(3, 4, 6).nodes(),
            node_rel: 1e-3,
            potential: None,
        }
    }
}

fn frames(angles: &[EulerAngles]) -> Result<Vec<Frame>, ObservablesError> {
    angles
        .iter()
        .map(|a| Frame::new(a).ok_or(ObservablesError::Pole))
        .collect()
}

fn split_grad(g: &[SpinCoefficients; 3]) -> ([SpinCoefficients; 3], [SpinCoefficients; 3]) {
    let s: [(SpinCoefficients, SpinCoefficients); 3] =
        std::array::from_fn(|i| majorana_split(&g[i]));
    (
        std::array::from_fn(|i| s[i].0),
        std::array::from_fn(|i| s[i].1),
    )
}

/// ṽ^r of one real branch: the angular velocity that carries ψ² in a continuity law.
pub fn partial_angular_velocity(
    phi: &SpinCoefficients,
    grad_phi: &[SpinCoefficients; 3],
    angles: &EulerAngles,
    params: &PhysicalParams,
) -> Result<[f64; 3], ObservablesError> {
    let fr = Frame::new(angles).ok_or(ObservablesError::Pole)?;
    let f = partial_flow(&fr, &Ops::new(), phi, grad_phi, params);
    if f.psi.abs() <= EPS_NODE {
        return Err(ObservablesError::NodeSingularity { psi: f.psi.abs() });
    }
    Ok(std::array::from_fn(|r| f.flux_a[r] / f.dens))
}

/// Maxima of the squared-density continuity residuals for each branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquaredDensityResidual {
    pub real: f64,
    pub imag: f64,
    /// ω·max|ψ|², the natural size of each term.
    pub scale: f64,
}

impl SquaredDensityResidual {
    pub fn relative(&self) -> f64 {
        self.real.max(self.imag) / self.scale
    }
}

/// ∂_t(sin α ψ²) + ∂_i(sin α ψ² v^i) + ∂_r(sin α ψ² ṽ^r) for ψ_R and ψ_I.
pub fn squared_density_residual(
    before: &FieldSamples,
    after: &FieldSamples,
    dt: f64,
    opts: &ObservableOptions,
) -> Result<SquaredDensityResidual, ObservablesError> {
    let r = continuity_pass(before, after, dt, opts)?;
    Ok(SquaredDensityResidual {
        real: r.branch[0],
        imag: r.branch[1],
        scale: r.scale,
    })
}

struct ContinuityPass {
    branch: [f64; 2],
    total: f64,
    scale: f64,
}

fn continuity_pass(
    before: &FieldSamples,
    after: &FieldSamples,
    dt: f64,
    opts: &ObservableOptions,
) -> Result<ContinuityPass, ObservablesError> {
    before.check_pair(after)?;
    if dt == 0.0 {
        return Err(ObservablesError::Invalid("dt must be non-zero".into()));
    }
    let (b, a) = effective_pair(before, after, opts);
    let p = before.params;
    let frs = frames(&opts.angles)?;
    let ops = Ops::new();
    let mut out = ContinuityPass {
        branch: [0.0; 2],
        total: 0.0,
        scale: 0.0,
    };
    for k in 0..b.len() {
        let (rb, ib) = majorana_split(&b.psi[k]);
        let (ra, ia) = majorana_split(&a.psi[k]);
        let (grb, gib) = split_grad(&b.grad[k]);
        let (gra, gia) = split_grad(&a.grad[k]);
        for fr in &frs {
            let fb = [
                partial_flow(fr, &ops, &rb, &grb, &p),
                partial_flow(fr, &ops, &ib, &gib, &p),
            ];
            let fa = [
                partial_flow(fr, &ops, &ra, &gra, &p),
                partial_flow(fr, &ops, &ia, &gia, &p),
            ];
            let mut sum = 0.0;
            for j in 0..2 {
                let res = fr.sin
                    * ((fa[j].dens - fb[j].dens) / dt
                        + 0.5 * (fa[j].div_x + fa[j].div_a + fb[j].div_x + fb[j].div_a));
                out.branch[j] = out.branch[j].max(res.abs());
                sum += res;
                out.scale = out.scale.max(fa[j].dens + fb[j].dens);
            }
            out.total = out.total.max(sum.abs());
        }
    }
    out.scale *= 0.5 * p.omega();
    if out.scale == 0.0 {
        out.scale = 1.0;
    }
    Ok(out)
}

fn effective_pair(
    before: &FieldSamples,
    after: &FieldSamples,
    opts: &ObservableOptions,
) -> (FieldSamples, FieldSamples) {
    match &opts.potential {
        Some(pot) => (before.with_potential(pot), after.with_potential(pot)),
        None => (before.clone(), after.clone()),
    }
}

/// Quadrature-versus-bilinear mismatches of the density and flux decompositions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentDecomposition {
    pub points: usize,
    /// max |Ψ†Ψ − ∮(ψ_R² + ψ_I²)dΩ|
    pub density: f64,
    /// max |Ψ†α_iΨ − ∮(ψ_R²v_R^i + ψ_I²v_I^i)dΩ/c|
    pub flux: f64,
    /// max mismatch of the branch densities and fluxes against their closed bilinear forms
    pub branch_forms: f64,
}

impl CurrentDecomposition {
    pub fn worst(&self) -> f64 {
        self.density.max(self.flux).max(self.branch_forms)
    }
}

/// Compares Dirac density and flux with angular means of the partial flows.
pub fn current_decomposition_check(
    spinors: &[SpinCoefficients],
    angles: &AngleGrid,
    params: &PhysicalParams,
) -> Result<CurrentDecomposition, ObservablesError> {
    let frs = frames(&angles.nodes())?;
    let wts = &angles.weights;
    let ops = Ops::new();
    let g = GammaSet::dirac();
    let g2 = g.gamma[2];
    let zero = [SpinCoefficients::zeros(); 3];
    let mut out = CurrentDecomposition {
        points: spinors.len(),
        density: 0.0,
        flux: 0.0,
        branch_forms: 0.0,
    };
    let i = C64::new(0.0, 1.0);
    for psi in spinors {
        let (r, im) = majorana_split(psi);
        let mut dens = 0.0;
        let mut flux = [0.0; 3];
        let mut dens_r = 0.0;
        let mut flux_r = [0.0; 3];
        for (fr, w) in frs.iter().zip(wts) {
            let a = partial_flow(fr, &ops, &r, &zero, params);
            let b = partial_flow(fr, &ops, &im, &zero, params);
            dens += w * (a.dens + b.dens);
            dens_r += w * a.dens;
            for k in 0..3 {
                flux[k] += w * (a.flux_x[k] + b.flux_x[k]) / params.c;
                flux_r[k] += w * a.flux_x[k] / params.c;
            }
        }
        let cur = dirac_current(psi);
        out.density = out.density.max((cur.density - dens).abs());
        for k in 0..3 {
            out.flux = out.flux.max((cur.flux[k] - flux[k]).abs());
        }
        // ψ_R density and flux as bilinears of Ψ itself
        let conj = psi.map(|z| z.conj());
        let closed_d = 0.25
            * (2.0 * psi.norm_squared()
                + (i * ((psi.adjoint() * g2 * conj)[(0, 0)]
                    + (psi.transpose() * g2 * psi)[(0, 0)]))
                    .re);
        out.branch_forms = out.branch_forms.max((closed_d - dens_r).abs());
        for k in 0..3 {
            let al = g.alpha(k + 1);
            let closed = 0.25
                * (2.0 * (psi.adjoint() * al * psi)[(0, 0)].re
                    + (i * ((psi.adjoint() * al * g2 * conj)[(0, 0)]
                        + (psi.transpose() * g2 * al * psi)[(0, 0)]))
                        .re);
            out.branch_forms = out.branch_forms.max((closed - flux_r[k]).abs());
        }
    }
    Ok(out)
}

/// Amplitude and phase along an ordered sequence of samples, unwrapped so that S is continuous.
pub fn polar_decompose(samples: &[C64], hbar: f64) -> Result<Vec<PolarState>, ObservablesError> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev: Option<(C64, f64)> = None;
    for (index, z) in samples.iter().enumerate() {
        let amp = z.norm();
        if amp <= EPS_NODE {
            return Err(ObservablesError::NodeCrossing { index });
        }
        let phase = match prev {
            None => hbar * z.arg(),
            Some((zp, sp)) => sp + hbar * (z / zp).arg(),
        };
        out.push(PolarState {
            amplitude: amp,
            phase,
        });
        prev = Some((*z, phase));
    }
    Ok(out)
}

/// Phase of ψ(x, α) on the spatial grid, unwrapped along axis-aligned sweeps from the point of largest |ψ|.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    pub phase: Vec<f64>,
    /// Points where the x-y-z and z-y-x sweeps disagree by more than π, or that sit at a node.
    pub flagged: Vec<bool>,
}

pub fn unwrap_phase_on_grid(values: &[C64], grid: &Grid3, hbar: f64) -> PhaseMap {
    let n = grid.n;
    let start = (0..values.len())
        .max_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()))
        .unwrap_or(0);
    let s0 = grid.unindex(start);
    let sweep = |order: [usize; 3]| -> Vec<Option<f64>> {
        let mut ph: Vec<Option<f64>> = vec![None; values.len()];
        ph[start] = Some(hbar * values[start].arg());
        // walk each axis in turn, extending every already-resolved line
        for (stage, &ax) in order.iter().enumerate() {
            let mut seeds: Vec<usize> = Vec::new();
            for p in 0..values.len() {
                let idx = grid.unindex(p);
                let on_seed =
                    order[stage + 1..].iter().all(|&o| idx[o] == s0[o]) && idx[ax] == s0[ax];
                if on_seed && ph[p].is_some() {
                    seeds.push(p);
                }
            }
            for seed in seeds {
                let base = grid.unindex(seed);
                for dir in [1i64, -1] {
                    let mut prev = seed;
                    for step in 1..=n / 2 {
                        let mut idx = base;
                        idx[ax] =
                            ((base[ax] as i64 + dir * step as i64).rem_euclid(n as i64)) as usize;
                        let p = grid.index(idx[0], idx[1], idx[2]);
                        if ph[p].is_some() && p != prev {
                            break;
                        }
                        let (zp, sp) = (values[prev], ph[prev]);
                        let next = match sp {
                            Some(sp) if zp.norm() > EPS_NODE && values[p].norm() > EPS_NODE => {
                                Some(sp + hbar * (values[p] / zp).arg())
                            }
                            _ => None,
                        };
                        if next.is_none() {
                            break;
                        }
                        ph[p] = next;
                        prev = p;
                    }
                }
            }
        }
        ph
    };
    let a = sweep([0, 1, 2]);
    let b = sweep([2, 1, 0]);
    let mut phase = Vec::with_capacity(values.len());
    let mut flagged = Vec::with_capacity(values.len());
    for p in 0..values.len() {
        match (a[p], b[p]) {
            (Some(x), Some(y)) => {
                phase.push(x);
                flagged.push((x - y).abs() > std::f64::consts::PI * hbar);
            }
            (Some(x), None) | (None, Some(x)) => {
                phase.push(x);
                flagged.push(true);
            }
            (None, None) => {
                phase.push(f64::NAN);
                flagged.push(true);
            }
        }
    }
    PhaseMap { phase, flagged }
}

/// Mean velocities from the two partial flows, with the polar cross-check.
pub fn mean_velocities(
    phi_r: &SpinCoefficients,
    phi_i: &SpinCoefficients,
    grad_r: &[SpinCoefficients; 3],
    grad_i: &[SpinCoefficients; 3],
    angles: &EulerAngles,
    params: &PhysicalParams,
) -> Result<(FlowSample, DualRoute), ObservablesError> {
    let fr = Frame::new(angles).ok_or(ObservablesError::Pole)?;
    let ops = Ops::new();
    let a = partial_flow(&fr, &ops, phi_r, grad_r, params);
    let b = partial_flow(&fr, &ops, phi_i, grad_i, params);
    let dens = a.dens + b.dens;
    if dens.sqrt() <= EPS_NODE {
        return Err(ObservablesError::NodeSingularity { psi: dens.sqrt() });
    }
    let v_trans: [f64; 3] = std::array::from_fn(|i| (a.flux_x[i] + b.flux_x[i]) / dens);
    let v_mod: [f64; 3] = std::array::from_fn(|r| (a.flux_a[r] + b.flux_a[r]) / dens);
    let psi = phi_r + phi_i * C64::new(0.0, 1.0);
    let grad: [SpinCoefficients; 3] =
        std::array::from_fn(|i| grad_r[i] + grad_i[i] * C64::new(0.0, 1.0));
    let pl = polar_local(&fr, &psi, &grad, params);
    let w = params.omega();
    let mut route = DualRoute {
        translational: 0.0,
        angular: 0.0,
    };
    for k in 0..3 {
        route.translational = route
            .translational
            .max((v_trans[k] - pl.v_x[k]).abs() / params.c);
        route.angular = route
            .angular
            .max((v_mod[k] - pl.v_ang[k]).abs() / v_mod[k].abs().max(w));
    }
    Ok((
        FlowSample {
            v_trans,
            v_ang: [0.0, 0.0, -w],
            v_ang_modified: v_mod,
            q: pl.q,
        },
        route,
    ))
}

/// One row of a flow table: position, angles and the mean flow there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub x: [f64; 3],
    pub angles: [f64; 3],
    pub density: f64,
    pub flow: FlowSample,
}

/// Mean velocities and Q at every (sample, angle) pair away from nodes.
pub fn flow_table(samples: &FieldSamples, angles: &[EulerAngles], node_rel: f64) -> Vec<FlowRecord> {
    let p = &samples.params;
    let frames: Vec<Option<Frame>> = angles.iter().map(Frame::new).collect();
    let mut amax = 0.0f64;
    for psi in &samples.psi {
        for fr in frames.iter().flatten() {
            amax = amax.max(dot(&fr.u, psi).norm());
        }
    }
    let mut out = Vec::new();
    for k in 0..samples.len() {
        let (r, i) = majorana_split(&samples.psi[k]);
        let (gr, gi) = split_grad(&samples.grad[k]);
        for (a, fr) in angles.iter().zip(&frames) {
            let Some(fr) = fr else { continue };
            let amp = dot(&fr.u, &samples.psi[k]).norm();
            if amp <= node_rel * amax {
                continue;
            }
            if let Ok((flow, _)) = mean_velocities(&r, &i, &gr, &gi, a, p) {
                out.push(FlowRecord {
                    x: samples.points[k],
                    angles: [a.alpha, a.beta, a.gamma],
                    density: amp * amp,
                    flow,
                });
            }
        }
    }
    out
}

/// Q = c ∂_i(|ψ|(R₁ × m̂S)_i)/|ψ| from Ψ and ∇Ψ.
pub fn quantum_potential(
    psi: &SpinCoefficients,
    grad: &[SpinCoefficients; 3],
    angles: &EulerAngles,
    params: &PhysicalParams,
) -> Result<f64, ObservablesError> {
    let fr = Frame::new(angles).ok_or(ObservablesError::Pole)?;
    let pl = polar_local(&fr, psi, grad, params);
    if pl.amp <= EPS_NODE {
        return Err(ObservablesError::NodeSingularity { psi: pl.amp });
    }
    Ok(pl.q)
}

/// Maximum residuals of the polar evolution laws over a sample set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarResiduals {
    pub samples: usize,
    pub skipped: usize,
    /// Squared-density continuity of ψ_R and ψ_I separately.
    pub squared_real: f64,
    pub squared_imag: f64,
    /// Continuity of sin α|ψ|² with the mean velocities.
    pub continuity: f64,
    pub continuity_scale: f64,
    /// ∂_tS + v^i∂_iS + v^r∂_rS + Q with the modified mean angular velocity.
    pub hj_literal: f64,
    /// The same with the bare drift (0, 0, −ω) in place of v^r.
    pub hj_drift: f64,
    /// mc²
    pub hj_scale: f64,
    pub dual_route_translational: f64,
    pub dual_route_angular: f64,
    /// min |v|/c over the polar samples.
    pub min_speed_ratio: f64,
    pub max_abs_q: f64,
}

impl PolarResiduals {
    pub fn continuity_rel(&self) -> f64 {
        self.continuity / self.continuity_scale
    }

    pub fn squared_rel(&self) -> f64 {
        self.squared_real.max(self.squared_imag) / self.continuity_scale
    }

    pub fn hj_literal_rel(&self) -> f64 {
        self.hj_literal / self.hj_scale
    }

    pub fn hj_drift_rel(&self) -> f64 {
        self.hj_drift / self.hj_scale
    }
}

/// Residuals of the continuity and Hamilton–Jacobi laws between two snapshots.
pub fn hj_and_continuity_residuals(
    before: &FieldSamples,
    after: &FieldSamples,
    dt: f64,
    opts: &ObservableOptions,
) -> Result<PolarResiduals, ObservablesError> {
    let cont = continuity_pass(before, after, dt, opts)?;
    let (b, a) = effective_pair(before, after, opts);
    let p = before.params;
    let frs = frames(&opts.angles)?;
    let ops = Ops::new();
    let mut amp_max: f64 = 0.0;
    for s in [&b, &a] {
        for psi in &s.psi {
            for fr in &frs {
                amp_max = amp_max.max(kernel::dot(&fr.u, psi).norm());
            }
        }
    }
    let floor = (opts.node_rel * amp_max).max(EPS_NODE);
    let w = p.omega();
    let drift = [0.0, 0.0, -w];
    let mut out = PolarResiduals {
        samples: 0,
        skipped: 0,
        squared_real: cont.branch[0],
        squared_imag: cont.branch[1],
        continuity: cont.total,
        continuity_scale: cont.scale,
        hj_literal: 0.0,
        hj_drift: 0.0,
        hj_scale: p.rest_energy(),
        dual_route_translational: 0.0,
        dual_route_angular: 0.0,
        min_speed_ratio: f64::INFINITY,
        max_abs_q: 0.0,
    };
    for k in 0..b.len() {
        let (rb, ib) = majorana_split(&b.psi[k]);
        let (grb, gib) = split_grad(&b.grad[k]);
        for fr in &frs {
            let pb = polar_local(fr, &b.psi[k], &b.grad[k], &p);
            let pa = polar_local(fr, &a.psi[k], &a.grad[k], &p);
            if pb.amp < floor || pa.amp < floor {
                out.skipped += 1;
                continue;
            }
            out.samples += 1;
            let dsdt = p.hbar * (pa.psi / pb.psi).arg() / dt;
            let lit = dsdt + 0.5 * (pb.transport(&pb.v_ang) + pa.transport(&pa.v_ang));
            let dri = dsdt + 0.5 * (pb.transport(&drift) + pa.transport(&drift));
            out.hj_literal = out.hj_literal.max(lit.abs());
            out.hj_drift = out.hj_drift.max(dri.abs());
            out.max_abs_q = out.max_abs_q.max(pb.q.abs()).max(pa.q.abs());

            let fa = partial_flow(fr, &ops, &rb, &grb, &p);
            let fb = partial_flow(fr, &ops, &ib, &gib, &p);
            let dens = fa.dens + fb.dens;
            let speed = (0..3)
                .map(|i| ((fa.flux_x[i] + fb.flux_x[i]) / dens).powi(2))
                .sum::<f64>()
                .sqrt();
            out.min_speed_ratio = out.min_speed_ratio.min(speed / p.c);
            for r in 0..3 {
                let vt = (fa.flux_x[r] + fb.flux_x[r]) / dens;
                let va = (fa.flux_a[r] + fb.flux_a[r]) / dens;
                out.dual_route_translational = out
                    .dual_route_translational
                    .max((vt - pb.v_x[r]).abs() / p.c);
                out.dual_route_angular = out
                    .dual_route_angular
                    .max((va - pb.v_ang[r]).abs() / va.abs().max(w));
            }
        }
    }
    if out.samples == 0 {
        return Err(ObservablesError::NodeCrossing { index: 0 });
    }
    Ok(out)
}

/// Comparison of −dS/dt along a path with the quantum potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPhaseCheck {
    pub steps: usize,
    /// max |dS/dt + Q| / mc² along the path.
    pub mismatch: f64,
    pub phase: Vec<PolarState>,
}

/// Field access at arbitrary (x, t): Ψ and ∇Ψ.
pub trait FieldProbe {
    fn probe(
        &self,
        x: [f64; 3],
        t: f64,
    ) -> Result<(SpinCoefficients, [SpinCoefficients; 3]), ObservablesError>;
    fn params(&self) -> PhysicalParams;
}

/// Integrates (x, α) with the mean translational velocity and either the modified or the bare angular
/// velocity, then checks the phase bookkeeping dS/dt = −Q along the path.
pub fn path_phase_check<P: FieldProbe>(
    probe: &P,
    x0: [f64; 3],
    alpha0: EulerAngles,
    t0: f64,
    dt: f64,
    steps: usize,
    modified: bool,
) -> Result<PathPhaseCheck, ObservablesError> {
    let p = probe.params();
    let w = p.omega();
    let eval = |x: [f64; 3],
                a: [f64; 3],
                t: f64|
     -> Result<(kernel::PolarLocal, [f64; 6]), ObservablesError> {
        let fr = Frame::new(&EulerAngles::raw(a[0], a[1], a[2])).ok_or(ObservablesError::Pole)?;
        let (psi, grad) = probe.probe(x, t)?;
        let pl = polar_local(&fr, &psi, &grad, &p);
        if pl.amp <= EPS_NODE {
            return Err(ObservablesError::NodeSingularity { psi: pl.amp });
        }
        let va = if modified { pl.v_ang } else { [0.0, 0.0, -w] };
        Ok((pl, [pl.v_x[0], pl.v_x[1], pl.v_x[2], va[0], va[1], va[2]]))
    };
    let mut y = [x0[0], x0[1], x0[2], alpha0.alpha, alpha0.beta, alpha0.gamma];
    let split = |y: &[f64; 6]| ([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
    let mut psis = Vec::with_capacity(steps + 1);
    let mut qs = Vec::with_capacity(steps + 1);
    let (pl, _) = eval(split(&y).0, split(&y).1, t0)?;
    psis.push(pl.psi);
    qs.push(pl.q);
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        let add = |y: &[f64; 6], k: &[f64; 6], h: f64| -> [f64; 6] {
            std::array::from_fn(|i| y[i] + h * k[i])
        };
        let k1 = eval(split(&y).0, split(&y).1, t)?.1;
        let y2 = add(&y, &k1, 0.5 * dt);
        let k2 = eval(split(&y2).0, split(&y2).1, t + 0.5 * dt)?.1;
        let y3 = add(&y, &k2, 0.5 * dt);
        let k3 = eval(split(&y3).0, split(&y3).1, t + 0.5 * dt)?.1;
        let y4 = add(&y, &k3, dt);
        let k4 = eval(split(&y4).0, split(&y4).1, t + dt)?.1;
        y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        let (pl, _) = eval(split(&y).0, split(&y).1, t + dt)?;
        psis.push(pl.psi);
        qs.push(pl.q);
    }
    let phase = polar_decompose(&psis, p.hbar)?;
    let mut mismatch: f64 = 0.0;
    for s in 0..steps {
        let dsdt = (phase[s + 1].phase - phase[s].phase) / dt;
        mismatch = mismatch.max((dsdt + 0.5 * (qs[s] + qs[s + 1])).abs());
    }
    Ok(PathPhaseCheck {
        steps,
        mismatch: mismatch / p.rest_energy(),
        phase,
    })
}
