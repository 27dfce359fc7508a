//! Algebraic and differential identities of the 6 × 6 deformation matrix
//! D = [[∂q/∂q₀, ∂q/∂θ₀], [0, I]].

use super::{LabelFlag, Snapshot, TrajectoryBundle, TrajectoryError};
use nalgebra::{Matrix3, Matrix5, Matrix6};
use serde::Serialize;

/// Worst residuals over all unflagged labels of a snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct DeformationReport {
    pub t: f64,
    pub labels_checked: usize,
    /// max |DᵀC − J·I| / max(1, |J|).
    pub cofactor_residual: f64,
    /// max |det_Leibniz − det_LU| / max(1, |J|).
    pub determinant_residual: f64,
    /// max |J − det ∂q/∂q₀|: the block structure makes the 6 × 6 and 3 × 3 determinants agree.
    pub block_residual: f64,
    /// max |Σ_J ∂_J C_iJ| over the three position rows.
    pub piola_spatial: f64,
    /// Same over the three angle rows.
    pub piola_angular: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn assemble(dqq: &Matrix3<f64>, dqt: &Matrix3<f64>) -> Matrix6<f64> {
    let mut d = Matrix6::identity();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = dqq[(i, j)];
            d[(i, 3 + j)] = dqt[(i, j)];
        }
    }
    d
}

/// Cofactor matrix from 5 × 5 minors.
pub fn cofactor6(d: &Matrix6<f64>) -> Matrix6<f64> {
    let mut c = Matrix6::zeros();
    for i in 0..6 {
        for j in 0..6 {
            let minor = Matrix5::from_fn(|r, s| {
                let rr = if r < i { r } else { r + 1 };
                let ss = if s < j { s } else { s + 1 };
                d[(rr, ss)]
            });
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            c[(i, j)] = sign * minor.determinant();
        }
    }
    c
}

/// Every permutation of 0..6 with its sign.
fn permutations6() -> Vec<([usize; 6], f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool; 6], out: &mut Vec<([usize; 6], f64)>) {
        if prefix.len() == 6 {
            let mut p = [0; 6];
            p.copy_from_slice(prefix);
            let mut inv = 0;
            for a in 0..6 {
                for b in a + 1..6 {
                    if p[a] > p[b] {
                        inv += 1;
                    }
                }
            }
            out.push((p, if inv % 2 == 0 { 1.0 } else { -1.0 }));
            return;
        }
        for k in 0..6 {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::with_capacity(720);
    rec(&mut Vec::new(), &mut [false; 6], &mut out);
    out
}

/// Determinant as the 720-term permutation sum.
pub fn leibniz_det6(d: &Matrix6<f64>) -> f64 {
    permutations6()
        .iter()
        .map(|(p, s)| s * (0..6).map(|i| d[(i, p[i])]).product::<f64>())
        .sum()
}

/// Checks cofactor, determinant and Piola identities on a snapshot that
/// carries deformation blocks.
pub fn deformation_identities_check(
    bundle: &TrajectoryBundle,
    snap: &Snapshot,
) -> Result<DeformationReport, TrajectoryError> {
    let (Some(dqq), Some(dqt)) = (&snap.d_qq, &snap.d_qtheta) else {
        return Err(TrajectoryError::Invalid(
            "snapshot has no deformation blocks".into(),
        ));
    };
    let labels = &bundle.labels;
    let ns = labels.n_spatial();
    let n = labels.len();
    let perms = permutations6();
    let mut cof = Vec::with_capacity(n);
    let (mut res_c, mut res_d, mut res_b) = (0.0f64, 0.0f64, 0.0f64);
    let mut checked = 0;
    for l in 0..n {
        let d = assemble(&dqq[l], &dqt[l]);
        let c = cofactor6(&d);
        if snap.flags[l] == LabelFlag::Ok {
            let lu = d.determinant();
            let lz: f64 = perms
                .iter()
                .map(|(p, s)| s * (0..6).map(|i| d[(i, p[i])]).product::<f64>())
                .sum();
            let scale = lu.abs().max(1.0);
            res_c = res_c.max((d.transpose() * c - Matrix6::identity() * lu).abs().max() / scale);
            res_d = res_d.max((lz - lu).abs() / scale);
            res_b = res_b.max((lu - dqq[l].determinant()).abs() / scale);
            checked += 1;
        }
        cof.push(c);
    }
    // divergence over label coordinates
    let g = labels.space;
    let h = g.h();
    let (mut piola_s, mut piola_a) = (0.0f64, 0.0f64);
    for l in 0..n {
        if snap.flags[l] != LabelFlag::Ok {
            continue;
        }
        let (a, s) = (l / ns, l % ns);
        let [ix, iy, iz] = g.unindex(s);
        let m = g.n;
        let nbr = |d: usize, up: bool| -> usize {
            let mut idx = [ix, iy, iz];
            idx[d] = if up {
                (idx[d] + 1) % m
            } else {
                (idx[d] + m - 1) % m
            };
            a * ns + g.index(idx[0], idx[1], idx[2])
        };
        let mut div = [0.0; 6];
        for (i, dv) in div.iter_mut().enumerate() {
            for j in 0..3 {
                *dv += (cof[nbr(j, true)][(i, j)] - cof[nbr(j, false)][(i, j)]) / (2.0 * h);
            }
            for r in 0..3 {
                for (b, w) in labels.angles.derivative_stencil(a, r) {
                    *dv += w * cof[b * ns + s][(i, 3 + r)];
                }
            }
        }
        for i in 0..3 {
            piola_s = piola_s.max(div[i].abs());
            piola_a = piola_a.max(div[3 + i].abs());
        }
    }
    let tol = 1e-10;
    Ok(DeformationReport {
        t: snap.t,
        labels_checked: checked,
        cofactor_residual: res_c,
        determinant_residual: res_d,
        block_residual: res_b,
        piola_spatial: piola_s,
        piola_angular: piola_a,
        tolerance: tol,
        passed: res_c <= tol && res_d <= tol && res_b <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactor_and_leibniz_on_random_matrix() {
        let d = Matrix6::from_fn(|i, j| {
            ((i * 7 + j * 3) as f64 * 0.37).sin() + if i == j { 2.0 } else { 0.0 }
        });
        let c = cofactor6(&d);
        let det = d.determinant();
        assert!(
            (d.transpose() * c - Matrix6::identity() * det).abs().max()
                < 1e-10 * det.abs().max(1.0)
        );
        assert!((leibniz_det6(&d) - det).abs() < 1e-10 * det.abs().max(1.0));
        assert_eq!(permutations6().len(), 720);
    }
}
