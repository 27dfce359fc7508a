//! Field reconstruction from trajectory data by inverting the label map.

use super::interp::{interpolate, interpolate_with_gradient};
use super::{angle_flow, LabelFlag, Snapshot, TrajectoryBundle, TrajectoryError, J_MIN};
use crate::angular_algebra::{basis_u, SpinCoefficients};
use crate::reference_solver::{Grid3, SpinorField};
use crate::spinor_core::majorana_join_unchecked;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const NEWTON_MAX: usize = 40;
const INTERP_ORDER: usize = 4;

/// Majorana coefficients on a grid plus the fraction of (point, angle) pairs
/// whose label could be found.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub grid: Grid3,
    pub t: f64,
    pub phi: Vec<SpinCoefficients>,
    pub coverage: f64,
}

/// Per-orbit interpolation tables on the label lattice.
struct OrbitTables {
    disp: Vec<[f64; 3]>,
    jac: Vec<[f64; 1]>,
    bad: Vec<bool>,
}

fn orbit_tables(bundle: &TrajectoryBundle, snap: &Snapshot, a: usize) -> OrbitTables {
    let ns = bundle.labels.n_spatial();
    let mut disp = Vec::with_capacity(ns);
    let mut jac = Vec::with_capacity(ns);
    let mut bad = Vec::with_capacity(ns);
    for s in 0..ns {
        let l = a * ns + s;
        let q0 = bundle.labels.space.point(s);
        disp.push([
            snap.q[l][0] - q0[0],
            snap.q[l][1] - q0[1],
            snap.q[l][2] - q0[2],
        ]);
        jac.push([snap.jac[l]]);
        bad.push(snap.flags[l] == LabelFlag::Collapse);
    }
    OrbitTables { disp, jac, bad }
}

/// Solves q₀ + Δ(q₀) ≡ x (mod L) for q₀.
fn invert(tab: &OrbitTables, grid: &Grid3, x: [f64; 3]) -> Option<[f64; 3]> {
    let d = interpolate(&tab.disp, grid, x, INTERP_ORDER);
    let mut q = [x[0] - d[0], x[1] - d[1], x[2] - d[2]];
    let tol = 1e-11 * (1.0 + grid.l);
    for _ in 0..NEWTON_MAX {
        let (d, g) = interpolate_with_gradient(&tab.disp, grid, q, INTERP_ORDER);
        let f = Vector3::from_fn(|i, _| grid.min_image(q[i] + d[i] - x[i]));
        if f.norm() < tol {
            return Some(q.map(|v| grid.wrap(v)));
        }
        let jm = Matrix3::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } + g[j][i]);
        let step = jm.lu().solve(&f)?;
        for i in 0..3 {
            q[i] -= step[i];
        }
    }
    None
}

/// Rebuilds Φ(x, t) for one branch from `snap` of `bundle` on `out`.
///
/// For each angle node the label reaching x is found by Newton iteration on
/// the interpolated displacement; ψ = ψ₀(q₀)/J(q₀) is then projected onto the
/// basis at the current angles.
pub fn reconstruct_majorana(
    bundle: &TrajectoryBundle,
    snap: &Snapshot,
    out: Grid3,
) -> Result<Reconstruction, TrajectoryError> {
    let labels = &bundle.labels;
    let lg = labels.space;
    if (out.l - lg.l).abs() > 1e-12 * lg.l {
        return Err(TrajectoryError::Invalid(
            "output grid and label lattice must share the box".into(),
        ));
    }
    let na = labels.n_angles();
    let tables: Vec<OrbitTables> = (0..na).map(|a| orbit_tables(bundle, snap, a)).collect();
    let w = &labels.angles.weights;
    let u0: Vec<[C64; 4]> = (0..na).map(|a| basis_u(&labels.angles.node(a))).collect();
    let ut: Vec<[C64; 4]> = (0..na)
        .map(|a| basis_u(&angle_flow(&labels.angles.node(a), snap.t, &bundle.params)))
        .collect();
    let per_point: Vec<(SpinCoefficients, usize)> = (0..out.len())
        .into_par_iter()
        .map(|p| {
            let x = out.point(p);
            let mut phi = SpinCoefficients::zeros();
            let mut hits = 0usize;
            for a in 0..na {
                let Some(q0) = invert(&tables[a], &lg, x) else {
                    continue;
                };
                let near = lg.index(
                    nearest(&lg, q0[0]),
                    nearest(&lg, q0[1]),
                    nearest(&lg, q0[2]),
                );
                if tables[a].bad[near] {
                    continue;
                }
                let j = interpolate(&tables[a].jac, &lg, q0, INTERP_ORDER)[0];
                if !(j > J_MIN) {
                    continue;
                }
                let (phi0, _) = labels.initial.majorana_at(q0, labels.branch);
                let psi0: f64 = (0..4).map(|k| u0[a][k] * phi0[k]).sum::<C64>().re;
                let psi = psi0 / j * w[a];
                for k in 0..4 {
                    phi[k] += ut[a][k].conj() * psi;
                }
                hits += 1;
            }
            (phi, hits)
        })
        .collect();
    let hits: usize = per_point.iter().map(|p| p.1).sum();
    Ok(Reconstruction {
        grid: out,
        t: snap.t,
        phi: per_point.into_iter().map(|p| p.0).collect(),
        coverage: hits as f64 / (out.len() * na) as f64,
    })
}

fn nearest(g: &Grid3, x: f64) -> usize {
    (((x + 0.5 * g.l) / g.h()).round() as i64).rem_euclid(g.n as i64) as usize
}

/// Ψ = Φ_R + iΦ_I at the common snapshot time t, with the lower of the two coverages.
pub fn reconstruct_dirac(
    r: &TrajectoryBundle,
    i: &TrajectoryBundle,
    t: f64,
    out: Grid3,
) -> Result<(SpinorField, f64), TrajectoryError> {
    let sr = r.snapshot_at(t);
    let si = i.snapshot_at(t);
    if (sr.t - si.t).abs() > 1e-12 * (1.0 + t.abs()) {
        return Err(TrajectoryError::Invalid(format!(
            "branch snapshots at different times {} and {}",
            sr.t, si.t
        )));
    }
    let a = reconstruct_majorana(r, sr, out)?;
    let b = reconstruct_majorana(i, si, out)?;
    let mut f = SpinorField::zeros(out, r.params);
    f.time = sr.t;
    for p in 0..out.len() {
        f.set(p, &majorana_join_unchecked(&a.phi[p], &b.phi[p]));
    }
    Ok((f, a.coverage.min(b.coverage)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::AngleGrid;
    use crate::reference_solver::plane_wave_field;
    use crate::trajectory_engine::{
        integrate_bundle, Branch, InitialState, IntegrationOptions, LabelGrid, Mode,
    };
    use crate::PhysicalParams;

    #[test]
    fn plane_wave_reconstruction() {
        let p = PhysicalParams::default();
        let mut e1 = SpinCoefficients::zeros();
        e1[0] = C64::from(1.0);
        let grid = Grid3::new(4, 10.0);
        let t_end = 0.8;
        let run = |branch| {
            let labels = LabelGrid::new(
                grid,
                AngleGrid::quadrature(4, 4, 8).reduce_gamma(),
                branch,
                InitialState::Uniform { pol: e1 },
            )
            .unwrap();
            integrate_bundle(
                labels,
                p,
                &IntegrationOptions::new(Mode::SelfContained, 0.01, t_end),
                None,
            )
            .unwrap()
        };
        let (br, bi) = (run(Branch::R), run(Branch::I));
        let (f, cov) = reconstruct_dirac(&br, &bi, t_end, grid).unwrap();
        assert_eq!(cov, 1.0);
        let exact = plane_wave_field(grid, p, e1, t_end);
        assert!(f.max_abs_diff(&exact) < 1e-6, "{}", f.max_abs_diff(&exact));
    }
}
