//! Three-dimensional FFTs on cubic periodic grids.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cached forward and inverse plans for an n³ grid stored x-major, z fastest.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            n,
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalised forward transform in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform in place, scaled by 1/n³.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let s = 1.0 / (self.n * self.n * self.n) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "FFT buffer size mismatch");
        // z lines are contiguous
        plan.process(data);
        let mut line = vec![C64::new(0.0, 0.0); n];
        for ix in 0..n {
            for iz in 0..n {
                for iy in 0..n {
                    line[iy] = data[(ix * n + iy) * n + iz];
                }
                plan.process(&mut line);
                for iy in 0..n {
                    data[(ix * n + iy) * n + iz] = line[iy];
                }
            }
        }
        for iy in 0..n {
            for iz in 0..n {
                for ix in 0..n {
                    line[ix] = data[(ix * n + iy) * n + iz];
                }
                plan.process(&mut line);
                for ix in 0..n {
                    data[(ix * n + iy) * n + iz] = line[ix];
                }
            }
        }
    }
}

/// Signed integer frequency of FFT index `j`; the Nyquist index maps to −n/2.
#[inline]
pub fn freq_index(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Angular wavenumber of FFT index `j` for box length `l`.
#[inline]
pub fn wavenumber(j: usize, n: usize, l: f64) -> f64 {
    2.0 * PI * freq_index(j, n) as f64 / l
}

/// True for indices on the Nyquist plane of an even grid.
#[inline]
pub fn is_nyquist(j: usize, n: usize) -> bool {
    n % 2 == 0 && j == n / 2
}

/// Spectral derivative along `axis` (0 = x) of a real-space array.
pub fn spectral_derivative(fft: &Fft3, data: &[C64], axis: usize, l: f64) -> Vec<C64> {
    let mut buf = data.to_vec();
    fft.forward(&mut buf);
    apply_derivative_in_k(&mut buf, fft.n(), axis, l);
    fft.inverse(&mut buf);
    buf
}

/// Multiplies a spectrum by i·k along `axis`, zeroing the Nyquist plane.
pub fn apply_derivative_in_k(spec: &mut [C64], n: usize, axis: usize, l: f64) {
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let j = [ix, iy, iz][axis];
                let idx = (ix * n + iy) * n + iz;
                spec[idx] = if is_nyquist(j, n) {
                    C64::new(0.0, 0.0)
                } else {
                    spec[idx] * C64::new(0.0, wavenumber(j, n, l))
                };
            }
        }
    }
}

/// Band-limited interpolation of an n³ array onto an (f·n)³ grid by zero-padding.
pub fn upsample(data: &[C64], n: usize, factor: usize) -> Vec<C64> {
    let m = n * factor;
    let fft = Fft3::new(n);
    let mut spec = data.to_vec();
    fft.forward(&mut spec);
    let mut big = vec![C64::new(0.0, 0.0); m * m * m];
    let map = |j: usize| -> Option<usize> {
        if is_nyquist(j, n) {
            return None;
        }
        let f = freq_index(j, n);
        Some(if f >= 0 {
            f as usize
        } else {
            (m as i64 + f) as usize
        })
    };
    for ix in 0..n {
        let Some(bx) = map(ix) else { continue };
        for iy in 0..n {
            let Some(by) = map(iy) else { continue };
            for iz in 0..n {
                let Some(bz) = map(iz) else { continue };
                big[(bx * m + by) * m + bz] = spec[(ix * n + iy) * n + iz];
            }
        }
    }
    let fft_big = Fft3::new(m);
    fft_big.inverse(&mut big);
    let s = (factor * factor * factor) as f64;
    big.iter_mut().for_each(|z| *z *= s);
    big
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(n: usize, l: f64, k: [i64; 3]) -> Vec<C64> {
        let h = l / n as f64;
        let mut v = Vec::with_capacity(n * n * n);
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let ph = 2.0 * PI / l
                        * (k[0] as f64 * ix as f64
                            + k[1] as f64 * iy as f64
                            + k[2] as f64 * iz as f64)
                        * h;
                    v.push(C64::from_polar(1.0, ph));
                }
            }
        }
        v
    }

    #[test]
    fn roundtrip() {
        let f = Fft3::new(8);
        let orig = plane(8, 3.0, [1, -2, 3]);
        let mut v = orig.clone();
        f.forward(&mut v);
        f.inverse(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_plane_wave() {
        let l = 5.0;
        let f = Fft3::new(8);
        let v = plane(8, l, [0, 2, 0]);
        let d = spectral_derivative(&f, &v, 1, l);
        let k = 2.0 * PI * 2.0 / l;
        for (a, b) in d.iter().zip(&v) {
            assert!((a - b * C64::new(0.0, k)).norm() < 1e-12);
        }
    }

    #[test]
    fn upsample_keeps_samples() {
        let v = plane(8, 2.0, [1, 0, -1]);
        let big = upsample(&v, 8, 2);
        for ix in 0..8 {
            for iy in 0..8 {
                for iz in 0..8 {
                    let a = v[(ix * 8 + iy) * 8 + iz];
                    let b = big[((2 * ix) * 16 + 2 * iy) * 16 + 2 * iz];
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }
}
