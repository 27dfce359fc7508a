//! Interpolated spectral oracle supplying Majorana coefficients at arbitrary points.

use super::{interp, Branch};
use crate::angular_algebra::SpinCoefficients;
use crate::reference_solver::fft::{freq_index, is_nyquist};
use crate::reference_solver::{spectral_propagate_with, Fft3, Grid3, SolverError, SpinorField};
use crate::spinor_core::majorana_split;
use num_complex::Complex64 as C64;
use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

/// Φ₁ and Φ₂ on a refined grid, as 4 reals per point.
pub struct OracleSnapshot {
    pub t: f64,
    pub grid: Grid3,
    table: Vec<[f64; 4]>,
    order: usize,
}

impl OracleSnapshot {
    /// Majorana Φ(x) = (Φ₁, Φ₂, −Φ₂*, Φ₁*) and the gradient of the same interpolant.
    #[inline]
    pub fn sample(&self, x: [f64; 3]) -> (SpinCoefficients, [SpinCoefficients; 3]) {
        let (v, g) = interp::interpolate_with_gradient(&self.table, &self.grid, x, self.order);
        let mk = |r: &[f64; 4]| {
            let a = C64::new(r[0], r[1]);
            let b = C64::new(r[2], r[3]);
            SpinCoefficients::new(a, b, -b.conj(), a.conj())
        };
        (mk(&v), [mk(&g[0]), mk(&g[1]), mk(&g[2])])
    }
}

/// Evolves the initial field spectrally to any requested time and serves
/// interpolated Majorana data for one branch.
pub struct OracleSampler {
    initial: SpinorField,
    fft: Fft3,
    fft_fine: Fft3,
    branch: Branch,
    factor: usize,
    order: usize,
    capacity: usize,
    cache: Mutex<VecDeque<Arc<OracleSnapshot>>>,
}

impl OracleSampler {
    /// Zero-pads by `factor` and interpolates with `order`-point stencils.
    pub fn new(initial: SpinorField, branch: Branch, factor: usize, order: usize) -> Self {
        let n = initial.grid.n;
        Self {
            fft: Fft3::new(n),
            fft_fine: Fft3::new(n * factor),
            initial,
            branch,
            factor,
            order,
            capacity: 4,
            cache: Mutex::new(VecDeque::new()),
        }
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn initial(&self) -> &SpinorField {
        &self.initial
    }

    /// Snapshot at time t (spectrally exact evolution from the initial field).
    pub fn at(&self, t: f64) -> Result<Arc<OracleSnapshot>, SolverError> {
        {
            let c = self.cache.lock().unwrap();
            if let Some(s) = c.iter().find(|s| s.t.to_bits() == t.to_bits()) {
                return Ok(s.clone());
            }
        }
        let snap = Arc::new(self.build(t)?);
        let mut c = self.cache.lock().unwrap();
        c.push_back(snap.clone());
        while c.len() > self.capacity {
            c.pop_front();
        }
        Ok(snap)
    }

    fn build(&self, t: f64) -> Result<OracleSnapshot, SolverError> {
        let field = spectral_propagate_with(&self.initial, t - self.initial.time, &self.fft)?;
        let Grid3 { n, l } = field.grid;
        let np = field.grid.len();
        let mut c1 = Vec::with_capacity(np);
        let mut c2 = Vec::with_capacity(np);
        for p in 0..np {
            let (r, i) = majorana_split(&field.at(p));
            let phi = match self.branch {
                Branch::R => r,
                Branch::I => i,
            };
            c1.push(phi[0]);
            c2.push(phi[1]);
        }
        self.fft.forward(&mut c1);
        self.fft.forward(&mut c2);
        let m = n * self.factor;
        let fine = Grid3::new(m, l);
        let mut table = vec![[0.0; 4]; fine.len()];
        let embed = |j: usize| -> usize {
            let f = freq_index(j, n);
            if f >= 0 {
                f as usize
            } else {
                (m as i64 + f) as usize
            }
        };
        let scale = (self.factor * self.factor * self.factor) as f64;
        for (slot, spec) in [(0usize, &c1), (2usize, &c2)] {
            let mut big = vec![C64::new(0.0, 0.0); fine.len()];
            for (p, v) in spec.iter().enumerate() {
                let [i, j, k] = field.grid.unindex(p);
                if is_nyquist(i, n) || is_nyquist(j, n) || is_nyquist(k, n) {
                    continue;
                }
                big[fine.index(embed(i), embed(j), embed(k))] = *v;
            }
            self.fft_fine.inverse(&mut big);
            for (row, z) in table.iter_mut().zip(&big) {
                row[slot] = z.re * scale;
                row[slot + 1] = z.im * scale;
            }
        }
        Ok(OracleSnapshot {
            t,
            grid: fine,
            table,
            order: self.order,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_solver::GaussianPacket;
    use crate::PhysicalParams;

    #[test]
    fn samples_match_field_at_nodes_and_between() {
        let p = PhysicalParams::default();
        let grid = Grid3::new(16, 20.0);
        let (f, _) = GaussianPacket::default().field(grid, p);
        let o = OracleSampler::new(f.clone(), Branch::R, 2, 6);
        let s = o.at(0.0).unwrap();
        let x = grid.point(grid.index(5, 9, 3));
        let (phi, _) = s.sample(x);
        let (r, _) = majorana_split(&f.at(grid.index(5, 9, 3)));
        assert!((phi - r).norm() < 1e-12);
        let y = [0.31, -0.77, 1.9];
        let (_, g) = s.sample(y);
        let h = 1e-5;
        let (a, _) = s.sample([y[0] + h, y[1], y[2]]);
        let (b, _) = s.sample([y[0] - h, y[1], y[2]]);
        assert!(((a - b) / C64::from(2.0 * h) - g[0]).norm() < 1e-8);
    }
}
