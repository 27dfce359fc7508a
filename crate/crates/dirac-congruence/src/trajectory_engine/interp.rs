//! Tensor-product Lagrange interpolation on periodic cubic grids.

use crate::reference_solver::Grid3;

/// Stencil width: 4 (cubic) or 6 (quintic).
pub const MAX_ORDER: usize = 6;

/// Lagrange weights and their derivatives for fractional offset `t` ∈ [0, 1).
///
/// Nodes sit at integer offsets −(p/2 − 1) ..= p/2 relative to the cell origin.
#[inline]
pub fn weights(order: usize, t: f64) -> ([f64; MAX_ORDER], [f64; MAX_ORDER]) {
    debug_assert!(order == 2 || order == 4 || order == 6);
    let first = -(order as i64 / 2 - 1);
    let mut nodes = [0.0; MAX_ORDER];
    for (k, n) in nodes.iter_mut().enumerate().take(order) {
        *n = (first + k as i64) as f64;
    }
    let mut w = [0.0; MAX_ORDER];
    let mut dw = [0.0; MAX_ORDER];
    for j in 0..order {
        let mut denom = 1.0;
        for m in 0..order {
            if m != j {
                denom *= nodes[j] - nodes[m];
            }
        }
        let mut prod = 1.0;
        for m in 0..order {
            if m != j {
                prod *= t - nodes[m];
            }
        }
        let mut dsum = 0.0;
        for m in 0..order {
            if m == j {
                continue;
            }
            let mut p = 1.0;
            for l in 0..order {
                if l != j && l != m {
                    p *= t - nodes[l];
                }
            }
            dsum += p;
        }
        w[j] = prod / denom;
        dw[j] = dsum / denom;
    }
    (w, dw)
}

/// Locates x on the periodic axis: base index of the stencil and the fraction.
#[inline]
fn locate(grid: &Grid3, x: f64, order: usize) -> (i64, f64) {
    let s = (x + 0.5 * grid.l) / grid.h();
    let f = s.floor();
    (f as i64 - (order as i64 / 2 - 1), s - f)
}

/// Interpolates K reals per grid point at x.
pub fn interpolate<const K: usize>(
    data: &[[f64; K]],
    grid: &Grid3,
    x: [f64; 3],
    order: usize,
) -> [f64; K] {
    let n = grid.n as i64;
    let mut idx = [[0usize; MAX_ORDER]; 3];
    let mut wts = [[0.0; MAX_ORDER]; 3];
    for d in 0..3 {
        let (b, t) = locate(grid, x[d], order);
        wts[d] = weights(order, t).0;
        for k in 0..order {
            idx[d][k] = (b + k as i64).rem_euclid(n) as usize;
        }
    }
    let nn = grid.n;
    let mut out = [0.0; K];
    for a in 0..order {
        let mut acc_y = [0.0; K];
        for b in 0..order {
            let base = (idx[0][a] * nn + idx[1][b]) * nn;
            let mut acc_z = [0.0; K];
            for c in 0..order {
                let v = &data[base + idx[2][c]];
                let w = wts[2][c];
                for k in 0..K {
                    acc_z[k] += w * v[k];
                }
            }
            let w = wts[1][b];
            for k in 0..K {
                acc_y[k] += w * acc_z[k];
            }
        }
        let w = wts[0][a];
        for k in 0..K {
            out[k] += w * acc_y[k];
        }
    }
    out
}

/// Value and gradient of the interpolant; `grad[d][k]` is ∂_d of component k.
pub fn interpolate_with_gradient<const K: usize>(
    data: &[[f64; K]],
    grid: &Grid3,
    x: [f64; 3],
    order: usize,
) -> ([f64; K], [[f64; K]; 3]) {
    let n = grid.n as i64;
    let inv_h = 1.0 / grid.h();
    let mut idx = [[0usize; MAX_ORDER]; 3];
    let mut wts = [[0.0; MAX_ORDER]; 3];
    let mut dwts = [[0.0; MAX_ORDER]; 3];
    for d in 0..3 {
        let (b, t) = locate(grid, x[d], order);
        let (w, dw) = weights(order, t);
        wts[d] = w;
        for k in 0..order {
            dwts[d][k] = dw[k] * inv_h;
            idx[d][k] = (b + k as i64).rem_euclid(n) as usize;
        }
    }
    let nn = grid.n;
    let mut val = [0.0; K];
    let mut grad = [[0.0; K]; 3];
    for a in 0..order {
        let (mut y0, mut y1, mut y2) = ([0.0; K], [0.0; K], [0.0; K]);
        for b in 0..order {
            let base = (idx[0][a] * nn + idx[1][b]) * nn;
            let (mut z0, mut z1) = ([0.0; K], [0.0; K]);
            for c in 0..order {
                let v = &data[base + idx[2][c]];
                let (w, dw) = (wts[2][c], dwts[2][c]);
                for k in 0..K {
                    z0[k] += w * v[k];
                    z1[k] += dw * v[k];
                }
            }
            let (w, dw) = (wts[1][b], dwts[1][b]);
            for k in 0..K {
                y0[k] += w * z0[k];
                y1[k] += dw * z0[k];
                y2[k] += w * z1[k];
            }
        }
        let (w, dw) = (wts[0][a], dwts[0][a]);
        for k in 0..K {
            val[k] += w * y0[k];
            grad[0][k] += dw * y0[k];
            grad[1][k] += w * y1[k];
            grad[2][k] += w * y2[k];
        }
    }
    (val, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_partition_unity_and_exactness() {
        for order in [2, 4, 6] {
            for &t in &[0.0, 0.3, 0.77] {
                let (w, dw) = weights(order, t);
                let s: f64 = w.iter().sum();
                let ds: f64 = dw.iter().sum();
                assert!((s - 1.0).abs() < 1e-13 && ds.abs() < 1e-12);
                let first = -(order as f64 / 2.0 - 1.0);
                let cubic: f64 = (0..order)
                    .map(|k| w[k] * (first + k as f64).powi(order as i32 - 1))
                    .sum();
                assert!((cubic - t.powi(order as i32 - 1)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn smooth_periodic_function() {
        let g = Grid3::new(32, 2.0 * PI);
        let f = |x: [f64; 3]| [x[0].sin() * x[1].cos() + x[2].sin()];
        let data: Vec<[f64; 1]> = (0..g.len()).map(|p| f(g.point(p))).collect();
        let x = [0.31, -2.9, 3.05];
        let (v, gr) = interpolate_with_gradient(&data, &g, x, 6);
        assert!((v[0] - f(x)[0]).abs() < 1e-6, "{}", (v[0] - f(x)[0]).abs());
        assert!((gr[0][0] - x[0].cos() * x[1].cos()).abs() < 1e-5);
        assert!((gr[2][0] - x[2].cos()).abs() < 1e-5);
        let v4 = interpolate(&data, &g, x, 4);
        assert!((v4[0] - f(x)[0]).abs() < 1e-4);
        // value routes agree
        assert!((interpolate(&data, &g, x, 6)[0] - v[0]).abs() < 1e-14);
    }
}
