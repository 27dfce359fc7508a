//! Trajectory labels: spatial lattice × angle nodes, with initial densities.

use super::{interp, Branch, TrajectoryError};
use crate::angular_algebra::{
    basis_du, basis_u, AngleGrid, EulerAngles, SpinCoefficients, EPS_POLE,
};
use crate::reference_solver::{Fft3, GaussianPacket, Grid3, SpinorField};
use crate::spinor_core::majorana_split;
use num_complex::Complex64 as C64;

/// Initial Dirac spinor Ψ₀(x), evaluable at arbitrary points.
#[derive(Clone, Debug)]
pub enum InitialState {
    /// Spatially constant spinor.
    Uniform { pol: SpinCoefficients },
    /// Periodised Gaussian packet with an overall normalisation factor.
    Gaussian {
        packet: GaussianPacket,
        grid: Grid3,
        scale: f64,
    },
    /// Samples on a periodic grid: Ψ and spectral ∂Ψ, interpolated with 6-point stencils.
    Sampled { grid: Grid3, table: Vec<[f64; 32]> },
}

impl InitialState {
    pub fn from_field(field: &SpinorField) -> Self {
        let fft = Fft3::new(field.grid.n);
        let grad = field.gradient(&fft);
        let table = (0..field.grid.len())
            .map(|p| {
                let mut row = [0.0; 32];
                for a in 0..4 {
                    row[2 * a] = field.psi[a][p].re;
                    row[2 * a + 1] = field.psi[a][p].im;
                    for i in 0..3 {
                        row[8 + 8 * i + 2 * a] = grad[i][a][p].re;
                        row[8 + 8 * i + 2 * a + 1] = grad[i][a][p].im;
                    }
                }
                row
            })
            .collect();
        InitialState::Sampled {
            grid: field.grid,
            table,
        }
    }

    pub fn gaussian(
        packet: GaussianPacket,
        grid: Grid3,
        params: crate::PhysicalParams,
    ) -> (Self, SpinorField) {
        let (field, scale) = packet.field(grid, params);
        (
            InitialState::Gaussian {
                packet,
                grid,
                scale,
            },
            field,
        )
    }

    /// Ψ₀(x) and ∂_iΨ₀(x).
    pub fn dirac_at(&self, x: [f64; 3]) -> (SpinCoefficients, [SpinCoefficients; 3]) {
        match self {
            InitialState::Uniform { pol } => (*pol, [SpinCoefficients::zeros(); 3]),
            InitialState::Gaussian {
                packet,
                grid,
                scale,
            } => {
                let pol = packet.polarization_vector();
                let (v, g) = packet.envelope(grid, x);
                let s = C64::from(*scale);
                (
                    pol * (v * s),
                    [pol * (g[0] * s), pol * (g[1] * s), pol * (g[2] * s)],
                )
            }
            InitialState::Sampled { grid, table } => {
                let r = interp::interpolate(table, grid, x, 6);
                let spinor = |off: usize| {
                    SpinCoefficients::from_fn(|a, _| C64::new(r[off + 2 * a], r[off + 2 * a + 1]))
                };
                (spinor(0), [spinor(8), spinor(16), spinor(24)])
            }
        }
    }

    /// Majorana coefficients of the requested branch and their gradients.
    pub fn majorana_at(
        &self,
        x: [f64; 3],
        branch: Branch,
    ) -> (SpinCoefficients, [SpinCoefficients; 3]) {
        let (psi, g) = self.dirac_at(x);
        let pick = |v: &SpinCoefficients| {
            let (r, i) = majorana_split(v);
            match branch {
                Branch::R => r,
                Branch::I => i,
            }
        };
        (pick(&psi), [pick(&g[0]), pick(&g[1]), pick(&g[2])])
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, InitialState::Uniform { .. })
    }
}

/// Labels (q₀, θ₀) with ℓ = a·N_s + s for angle node a and spatial label s.
#[derive(Clone, Debug)]
pub struct LabelGrid {
    pub space: Grid3,
    pub angles: AngleGrid,
    pub branch: Branch,
    pub initial: InitialState,
    pub phi0: Vec<SpinCoefficients>,
    pub grad_phi0: Vec<[SpinCoefficients; 3]>,
    pub psi0: Vec<f64>,
    pub dpsi0_q: Vec<[f64; 3]>,
    pub dpsi0_theta: Vec<[f64; 3]>,
    /// True when Φ₀ is the same at every spatial label and has zero gradient.
    pub uniform: bool,
}

impl LabelGrid {
    pub fn new(
        space: Grid3,
        angles: AngleGrid,
        branch: Branch,
        initial: InitialState,
    ) -> Result<Self, TrajectoryError> {
        if angles.pole_clearance() < EPS_POLE {
            return Err(TrajectoryError::Invalid(
                "angle nodes must avoid the α poles".into(),
            ));
        }
        let ns = space.len();
        let mut phi0 = Vec::with_capacity(ns);
        let mut grad_phi0 = Vec::with_capacity(ns);
        for s in 0..ns {
            let (p, g) = initial.majorana_at(space.point(s), branch);
            phi0.push(p);
            grad_phi0.push(g);
        }
        let uniform = phi0.iter().all(|p| *p == phi0[0])
            && grad_phi0
                .iter()
                .all(|g| g.iter().all(|v| v.iter().all(|z| *z == C64::new(0.0, 0.0))));
        let na = angles.len();
        let mut psi0 = Vec::with_capacity(na * ns);
        let mut dq = Vec::with_capacity(na * ns);
        let mut dth = Vec::with_capacity(na * ns);
        for a in 0..na {
            let th = angles.node(a);
            let u = basis_u(&th);
            let du = basis_du(&th);
            let dot = |w: &[C64; 4], v: &SpinCoefficients| -> f64 {
                (0..4).map(|k| w[k] * v[k]).sum::<C64>().re
            };
            for s in 0..ns {
                psi0.push(dot(&u, &phi0[s]));
                let g = &grad_phi0[s];
                dq.push([dot(&u, &g[0]), dot(&u, &g[1]), dot(&u, &g[2])]);
                dth.push([
                    dot(&du[0], &phi0[s]),
                    dot(&du[1], &phi0[s]),
                    dot(&du[2], &phi0[s]),
                ]);
            }
        }
        Ok(Self {
            space,
            angles,
            branch,
            initial,
            phi0,
            grad_phi0,
            psi0,
            dpsi0_q: dq,
            dpsi0_theta: dth,
            uniform,
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.space.len()
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn len(&self) -> usize {
        self.n_spatial() * self.n_angles()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn label(&self, a: usize, s: usize) -> usize {
        a * self.n_spatial() + s
    }

    #[inline]
    pub fn split(&self, l: usize) -> (usize, usize) {
        (l / self.n_spatial(), l % self.n_spatial())
    }

    pub fn q0_of(&self, l: usize) -> [f64; 3] {
        self.space.point(l % self.n_spatial())
    }

    pub fn angle_of(&self, l: usize) -> EulerAngles {
        self.angles.node(l / self.n_spatial())
    }

    pub fn psi0_max(&self) -> f64 {
        self.psi0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ψ₀ at an arbitrary spatial point for angle node `a`.
    pub fn psi0_at(&self, x: [f64; 3], a: usize) -> f64 {
        let (phi, _) = self.initial.majorana_at(x, self.branch);
        let u = basis_u(&self.angles.node(a));
        (0..4).map(|k| u[k] * phi[k]).sum::<C64>().re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PhysicalParams;

    fn e1() -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from(1.0);
        v
    }

    #[test]
    fn plane_wave_labels() {
        let g = LabelGrid::new(
            Grid3::new(2, 4.0),
            AngleGrid::quadrature(2, 4, 4).reduce_gamma(),
            Branch::R,
            InitialState::Uniform { pol: e1() },
        )
        .unwrap();
        assert!(g.uniform);
        assert_eq!(g.len(), 8 * 16);
        for l in 0..g.len() {
            let th = g.angle_of(l);
            let u = basis_u(&th);
            let expect = (0.5 * (u[0] + u[3])).re;
            assert!((g.psi0[l] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_matches_gaussian() {
        let grid = Grid3::new(32, 20.0);
        let (gs, field) =
            InitialState::gaussian(GaussianPacket::default(), grid, PhysicalParams::default());
        let sm = InitialState::from_field(&field);
        let x = [0.37, -1.2, 2.6];
        let (a, ga) = gs.dirac_at(x);
        let (b, gb) = sm.dirac_at(x);
        assert!((a - b).norm() < 1e-6);
        assert!((ga[0] - gb[0]).norm() < 1e-5);
    }
}
