//! Spectral oracle for the free Dirac equation on a periodic box, plus
//! residual checkers for the differential and angular continuity forms.

pub mod fft;
mod io;
mod residuals;

pub use fft::Fft3;
pub use io::{read_field, read_field_bytes, write_field, write_field_bytes, write_field_csv};
pub use residuals::{
    angular_continuity_residual, angular_continuity_residual_free, dirac_residual,
    dirac_residual_free, ContinuityResidual, ResidualOptions,
};

use crate::angular_algebra::SpinCoefficients;
use crate::spinor_core::GammaSet;
use crate::PhysicalParams;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Spectral power fraction allowed in the outer band near Nyquist.
pub const TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("spectral tail fraction {tail:e} exceeds {tol:e}; refine the grid")]
    ResolutionError { tail: f64, tol: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("file format error at byte {offset}: {message}")]
    FileFormat { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform periodic cube [−L/2, L/2)³ with n points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub n: usize,
    pub l: f64,
}

impl Grid3 {
    pub fn new(n: usize, l: f64) -> Self {
        assert!(n >= 2 && l > 0.0, "grid needs n ≥ 2 and L > 0");
        Self { n, l }
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    #[inline]
    pub fn unindex(&self, p: usize) -> [usize; 3] {
        let n = self.n;
        [p / (n * n), (p / n) % n, p % n]
    }

    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.l + j as f64 * self.h()
    }

    pub fn point(&self, p: usize) -> [f64; 3] {
        let [i, j, k] = self.unindex(p);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Reduces a coordinate into [−L/2, L/2).
    pub fn wrap(&self, x: f64) -> f64 {
        (x + 0.5 * self.l).rem_euclid(self.l) - 0.5 * self.l
    }

    /// Minimum-image difference a − b.
    pub fn min_image(&self, d: f64) -> f64 {
        d - self.l * (d / self.l).round()
    }
}

/// A complex 4-spinor on a periodic grid, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    pub grid: Grid3,
    pub time: f64,
    pub params: PhysicalParams,
    pub psi: [Vec<C64>; 4],
}

impl SpinorField {
    pub fn zeros(grid: Grid3, params: PhysicalParams) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        Self {
            grid,
            time: 0.0,
            params,
            psi: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    pub fn from_fn<F: FnMut([f64; 3]) -> SpinCoefficients>(
        grid: Grid3,
        params: PhysicalParams,
        mut f: F,
    ) -> Self {
        let mut out = Self::zeros(grid, params);
        for p in 0..grid.len() {
            let v = f(grid.point(p));
            out.set(p, &v);
        }
        out
    }

    #[inline]
    pub fn at(&self, p: usize) -> SpinCoefficients {
        SpinCoefficients::new(
            self.psi[0][p],
            self.psi[1][p],
            self.psi[2][p],
            self.psi[3][p],
        )
    }

    #[inline]
    pub fn set(&mut self, p: usize, v: &SpinCoefficients) {
        for a in 0..4 {
            self.psi[a][p] = v[a];
        }
    }

    /// ∫Ψ†Ψ d³x by the rectangle rule (spectrally accurate for periodic data).
    pub fn norm_squared(&self) -> f64 {
        let s: f64 = self
            .psi
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn scale(&mut self, s: C64) {
        self.psi
            .iter_mut()
            .flat_map(|c| c.iter_mut())
            .for_each(|z| *z *= s);
    }

    /// Spectral gradient of each component: `out[i][a]` is ∂_iΨ^a.
    pub fn gradient(&self, fft: &Fft3) -> [[Vec<C64>; 4]; 3] {
        let mut out: [[Vec<C64>; 4]; 3] = Default::default();
        for a in 0..4 {
            let mut spec = self.psi[a].clone();
            fft.forward(&mut spec);
            for (i, slot) in out.iter_mut().enumerate() {
                let mut s = spec.clone();
                fft::apply_derivative_in_k(&mut s, self.grid.n, i, self.grid.l);
                fft.inverse(&mut s);
                slot[a] = s;
            }
        }
        out
    }

    /// Largest |Ψ^a − other^a| over points and components.
    pub fn max_abs_diff(&self, other: &SpinorField) -> f64 {
        self.psi
            .iter()
            .zip(&other.psi)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Relative L2 distance ‖Ψ − other‖ / ‖other‖.
    pub fn relative_l2(&self, other: &SpinorField) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..4 {
            for (x, y) in self.psi[a].iter().zip(&other.psi[a]) {
                num += (x - y).norm_sqr();
                den += y.norm_sqr();
            }
        }
        (num / den).sqrt()
    }

    pub fn check_same_grid(&self, other: &SpinorField) -> Result<(), SolverError> {
        if self.grid != other.grid {
            return Err(SolverError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Scalar or vector potential component: constant or sampled on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScalarField {
    Constant(f64),
    Grid(Vec<f64>),
}

impl ScalarField {
    #[inline]
    pub fn at(&self, p: usize) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Grid(v) => v[p],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarField::Constant(v) => *v == 0.0,
            ScalarField::Grid(v) => v.iter().all(|x| *x == 0.0),
        }
    }
}

/// External 4-potential (cA₀, A_i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub a0: ScalarField,
    pub a: [ScalarField; 3],
}

impl PotentialField {
    pub fn zero() -> Self {
        Self::constant(0.0, [0.0; 3])
    }

    pub fn constant(a0: f64, a: [f64; 3]) -> Self {
        Self {
            a0: ScalarField::Constant(a0),
            a: [
                ScalarField::Constant(a[0]),
                ScalarField::Constant(a[1]),
                ScalarField::Constant(a[2]),
            ],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a0.is_zero() && self.a.iter().all(|f| f.is_zero())
    }
}

/// Fraction of spectral power in modes with some |frequency index| ≥ 3n/8.
pub fn spectral_tail_fraction(field: &SpinorField, fft: &Fft3) -> f64 {
    let n = field.grid.n;
    let cut = (3 * n) as i64 / 8;
    let mut total = 0.0;
    let mut tail = 0.0;
    for a in 0..4 {
        let mut s = field.psi[a].clone();
        fft.forward(&mut s);
        for (p, z) in s.iter().enumerate() {
            let [i, j, k] = field.grid.unindex(p);
            let w = z.norm_sqr();
            total += w;
            let m = [i, j, k]
                .iter()
                .map(|&q| fft::freq_index(q, n).abs())
                .max()
                .unwrap();
            if m >= cut {
                tail += w;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Exact free propagation by dt_total per Fourier mode:
/// exp(−iHt/ħ) = cos(Et/ħ) − i sin(Et/ħ) H/E with H = cħγ⁰γ^i k_i + mc²γ⁰.
pub fn spectral_propagate(field: &SpinorField, dt_total: f64) -> Result<SpinorField, SolverError> {
    let fft = Fft3::new(field.grid.n);
    spectral_propagate_with(field, dt_total, &fft)
}

pub fn spectral_propagate_with(
    field: &SpinorField,
    dt_total: f64,
    fft: &Fft3,
) -> Result<SpinorField, SolverError> {
    let tail = spectral_tail_fraction(field, fft);
    if tail > TAIL_TOL {
        return Err(SolverError::ResolutionError {
            tail,
            tol: TAIL_TOL,
        });
    }
    let mut out = field.clone();
    out.time = field.time + dt_total;
    if dt_total == 0.0 {
        return Ok(out);
    }
    let Grid3 { n, l } = field.grid;
    let PhysicalParams { hbar, c, .. } = field.params;
    let mc2 = field.params.rest_energy();
    let g = GammaSet::dirac();
    let alphas = [g.alpha(1), g.alpha(2), g.alpha(3)];
    let mut spec: [Vec<C64>; 4] = out.psi.clone();
    for s in spec.iter_mut() {
        fft.forward(s);
    }
    for p in 0..field.grid.len() {
        let [i, j, k] = field.grid.unindex(p);
        let kv = [
            fft::wavenumber(i, n, l),
            fft::wavenumber(j, n, l),
            fft::wavenumber(k, n, l),
        ];
        let mut h = g.gamma[0] * C64::from(mc2);
        for d in 0..3 {
            h += alphas[d] * C64::from(c * hbar * kv[d]);
        }
        let e = (c * c * hbar * hbar * (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) + mc2 * mc2)
            .sqrt();
        let (sn, cs) = (e * dt_total / hbar).sin_cos();
        let u = crate::angular_algebra::SpinMatrix::identity() * C64::from(cs)
            - h * C64::new(0.0, sn / e);
        let v = SpinCoefficients::new(spec[0][p], spec[1][p], spec[2][p], spec[3][p]);
        let w = u * v;
        for a in 0..4 {
            spec[a][p] = w[a];
        }
    }
    for (a, s) in spec.iter_mut().enumerate() {
        fft.inverse(s);
        std::mem::swap(&mut out.psi[a], s);
    }
    Ok(out)
}

/// Ψ(x, t) = pol·e^{−imc²t/ħ}, the zero-momentum positive-energy plane wave for pol = e₁.
pub fn plane_wave_field(
    grid: Grid3,
    params: PhysicalParams,
    pol: SpinCoefficients,
    t: f64,
) -> SpinorField {
    let ph = C64::from_polar(1.0, -params.rest_energy() * t / params.hbar);
    let mut f = SpinorField::from_fn(grid, params, |_| pol * ph);
    f.time = t;
    f
}

/// e₁·e^{−i(mc² + cA₀)t/ħ}, an exact solution with constant A₀ and A_i = 0.
pub fn constant_potential_solution(
    grid: Grid3,
    params: PhysicalParams,
    a0: f64,
    t: f64,
) -> SpinorField {
    let ph = C64::from_polar(
        1.0,
        -(params.rest_energy() + params.c * a0) * t / params.hbar,
    );
    let mut e1 = SpinCoefficients::zeros();
    e1[0] = C64::from(1.0);
    let mut f = SpinorField::from_fn(grid, params, |_| e1 * ph);
    f.time = t;
    f
}

/// Gaussian wavepacket parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: [f64; 3],
    /// Standard deviation of the density |Ψ|²; the amplitude is exp(−r²/4w²).
    pub width: f64,
    pub momentum: [f64; 3],
    /// Spinor polarisation as (re, im) pairs.
    pub polarization: [[f64; 2]; 4],
}

impl Default for GaussianPacket {
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            width: 2.0,
            momentum: [0.0; 3],
            polarization: [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        }
    }
}

impl GaussianPacket {
    pub fn polarization_vector(&self) -> SpinCoefficients {
        let p = &self.polarization;
        let v = SpinCoefficients::new(
            C64::new(p[0][0], p[0][1]),
            C64::new(p[1][0], p[1][1]),
            C64::new(p[2][0], p[2][1]),
            C64::new(p[3][0], p[3][1]),
        );
        let nrm = v.norm();
        if nrm > 0.0 {
            v / C64::from(nrm)
        } else {
            v
        }
    }

    /// Periodised scalar envelope and its spatial gradient at x (unnormalised).
    pub fn envelope(&self, grid: &Grid3, x: [f64; 3]) -> (C64, [C64; 3]) {
        let w2 = 4.0 * self.width * self.width;
        let mut val = C64::new(0.0, 0.0);
        let mut grad = [C64::new(0.0, 0.0); 3];
        let images = (3.0 * 6.0 * self.width / grid.l).ceil() as i64;
        for ix in -images..=images {
            for iy in -images..=images {
                for iz in -images..=images {
                    let shift = [ix as f64 * grid.l, iy as f64 * grid.l, iz as f64 * grid.l];
                    let d: Vec<f64> = (0..3).map(|i| x[i] - self.center[i] - shift[i]).collect();
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    let g = (-r2 / w2).exp();
                    if g < 1e-300 {
                        continue;
                    }
                    let phase = C64::from_polar(
                        1.0,
                        (0..3).map(|i| self.momentum[i] * (x[i] - shift[i])).sum(),
                    );
                    let term = phase * g;
                    val += term;
                    for i in 0..3 {
                        grad[i] += term * C64::new(-2.0 * d[i] / w2, self.momentum[i]);
                    }
                }
            }
        }
        (val, grad)
    }

    /// Samples the packet on a grid, normalised to ∫Ψ†Ψ = 1 by the grid sum.
    pub fn field(&self, grid: Grid3, params: PhysicalParams) -> (SpinorField, f64) {
        let pol = self.polarization_vector();
        let mut f = SpinorField::from_fn(grid, params, |x| pol * self.envelope(&grid, x).0);
        let norm = f.norm_squared();
        let s = 1.0 / norm.sqrt();
        f.scale(C64::from(s));
        (f, s)
    }

    /// Number of grid points across the amplitude standard deviation √2·w.
    pub fn points_per_width(&self, grid: &Grid3) -> f64 {
        std::f64::consts::SQRT_2 * self.width / grid.h()
    }
}

/// Wavelength-based sanity bound: modes up to the 3n/8 band resolve |k| ≤ 3πn/4L.
pub fn resolved_wavenumber(grid: &Grid3) -> f64 {
    2.0 * PI * (3 * grid.n / 8) as f64 / grid.l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> SpinCoefficients {
        let mut v = SpinCoefficients::zeros();
        v[0] = C64::from(1.0);
        v
    }

    #[test]
    fn uniform_e1_rotates_phase() {
        let p = PhysicalParams::default();
        let g = Grid3::new(8, 4.0);
        let f = plane_wave_field(g, p, e1(), 0.0);
        let out = spectral_propagate(&f, 0.7).unwrap();
        let exact = plane_wave_field(g, p, e1(), 0.7);
        assert!(out.max_abs_diff(&exact) < 1e-13);
    }

    #[test]
    fn zero_step_is_identity() {
        let p = PhysicalParams::default();
        let (f, _) = GaussianPacket::default().field(Grid3::new(16, 20.0), p);
        let out = spectral_propagate(&f, 0.0).unwrap();
        assert_eq!(out.psi, f.psi);
    }

    #[test]
    fn forward_back_and_norm() {
        let p = PhysicalParams::default();
        let pk = GaussianPacket {
            momentum: [0.3, 0.0, -0.2],
            ..Default::default()
        };
        let (f, _) = pk.field(Grid3::new(16, 20.0), p);
        let fwd = spectral_propagate(&f, 1.3).unwrap();
        assert!((fwd.norm_squared() - 1.0).abs() < 1e-12);
        let back = spectral_propagate(&fwd, -1.3).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn under_resolved_rejected() {
        let p = PhysicalParams::default();
        let pk = GaussianPacket {
            width: 0.3,
            ..Default::default()
        };
        let (f, _) = pk.field(Grid3::new(8, 20.0), p);
        assert!(matches!(
            spectral_propagate(&f, 0.1),
            Err(SolverError::ResolutionError { .. })
        ));
    }

    #[test]
    fn wrap_and_min_image() {
        let g = Grid3::new(4, 2.0);
        assert!((g.wrap(1.25) + 0.75).abs() < 1e-15);
        assert!((g.min_image(1.9) + 0.1).abs() < 1e-15);
    }
}
