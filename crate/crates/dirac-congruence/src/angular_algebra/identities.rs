//! Numerical audit of the operator algebra on the spin-½ subspace.

use super::*;
use crate::spinor_core::GammaSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one identity family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub hbar: f64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, max_residual: f64, tolerance: f64) {
        self.checks.push(IdentityCheck {
            name: name.to_string(),
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
        });
    }
}

fn levi(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn max_abs(m: &SpinMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_interior_angle(rng: &mut ChaCha8Rng) -> EulerAngles {
    EulerAngles::raw(
        rng.gen_range(0.05..PI - 0.05),
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..4.0 * PI),
    )
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> SpinCoefficients {
    SpinCoefficients::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// ∂R/∂α^r from the closed-form rotation.
fn rotation_derivatives(a: &EulerAngles) -> [Matrix3<f64>; 3] {
    let drz = |t: f64| {
        let (s, c) = t.sin_cos();
        Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
    };
    let drx = |t: f64| {
        let (s, c) = t.sin_cos();
        Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
    };
    [
        rz(a.gamma) * drx(a.alpha) * rz(a.beta),
        rz(a.gamma) * rx(a.alpha) * drz(a.beta),
        drz(a.gamma) * rx(a.alpha) * rz(a.beta),
    ]
}

/// ∂_r(sin α X_i^r) from analytic derivatives, for X = A or B.
pub(crate) fn divergence_residual(a: &EulerAngles) -> Result<f64, AlgebraError> {
    let m = euler_matrices(a)?;
    let (da, db) = euler_matrix_derivatives(a)?;
    let (s, c) = a.alpha.sin_cos();
    let mut worst: f64 = 0.0;
    for (x, dx) in [(m.a, da), (m.b, db)] {
        for i in 0..3 {
            let div = c * x[(i, 0)] + s * (dx[0][(i, 0)] + dx[1][(i, 1)] + dx[2][(i, 2)]);
            worst = worst.max(div.abs());
        }
    }
    Ok(worst)
}

/// Same divergence by central differences of the matrix entries.
fn divergence_residual_fd(a: &EulerAngles, h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for pick_b in [false, true] {
        let field = |p: &EulerAngles, i: usize, r: usize| {
            let m = euler_matrices(p).expect("interior");
            let x = if pick_b { m.b } else { m.a };
            p.alpha.sin() * x[(i, r)]
        };
        for i in 0..3 {
            let mut div = 0.0;
            for r in 0..3 {
                div += (field(&a.shifted(r, h), i, r) - field(&a.shifted(r, -h), i, r)) / (2.0 * h);
            }
            worst = worst.max(div.abs());
        }
    }
    worst
}

/// Runs every algebraic and analytic identity check with a fixed seed.
pub fn verify_identities(hbar: f64) -> IdentityReport {
    let mut rep = IdentityReport {
        hbar,
        checks: Vec::new(),
    };
    let ih = C64::new(0.0, hbar);
    let mat = |op| operator_matrix(op, hbar).expect("valid index");
    let mm: Vec<SpinMatrix> = (1..=3).map(|i| mat(OperatorId::M(i))).collect();
    let nn: Vec<SpinMatrix> = (1..=3).map(|i| mat(OperatorId::N(i))).collect();

    // commutators, ordinary and anomalous
    let mut r_mm: f64 = 0.0;
    let mut r_nn: f64 = 0.0;
    let mut r_mn: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut rhs_m = SpinMatrix::zeros();
            let mut rhs_n = SpinMatrix::zeros();
            for k in 0..3 {
                rhs_m += mm[k] * (ih * levi(i, j, k));
                rhs_n += nn[k] * (-ih * levi(i, j, k));
            }
            r_mm = r_mm.max(max_abs(&(mm[i] * mm[j] - mm[j] * mm[i] - rhs_m)));
            r_nn = r_nn.max(max_abs(&(nn[i] * nn[j] - nn[j] * nn[i] - rhs_n)));
            r_mn = r_mn.max(max_abs(&(mm[i] * nn[j] - nn[j] * mm[i])));
        }
    }
    rep.push("commutator_MM", r_mm, 0.0);
    rep.push("commutator_NN_anomalous", r_nn, 0.0);
    rep.push("commutator_MN", r_mn, 0.0);

    // Clifford anticommutators
    let q = 2.0 * (0.5 * hbar) * (0.5 * hbar);
    let mut r_am: f64 = 0.0;
    let mut r_an: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { q } else { 0.0 };
            let eye = SpinMatrix::identity() * C64::from(d);
            r_am = r_am.max(max_abs(&(mm[i] * mm[j] + mm[j] * mm[i] - eye)));
            r_an = r_an.max(max_abs(&(nn[i] * nn[j] + nn[j] * nn[i] - eye)));
        }
    }
    rep.push("anticommutator_M", r_am, 1e-15 * hbar * hbar);
    rep.push("anticommutator_N", r_an, 1e-15 * hbar * hbar);

    // gamma recovery: (ħ/2)N3 and −iN2M_i against (ħ/2)²γ
    let g = GammaSet::dirac();
    let h2 = C64::from(0.25 * hbar * hbar);
    let mut r_g = max_abs(&(nn[2] * C64::from(0.5 * hbar) - g.gamma[0] * h2));
    for i in 0..3 {
        r_g = r_g.max(max_abs(
            &(nn[1] * mm[i] * C64::new(0.0, -1.0) - g.gamma[i + 1] * h2),
        ));
        r_g = r_g.max(max_abs(
            &(mat(OperatorId::N1MHat(i + 1)) + g.gamma[0] * g.gamma[i + 1]),
        ));
    }
    rep.push("gamma_recovery", r_g, 1e-15 * hbar * hbar);

    let grid = AngleGrid::default_quadrature();
    let nodes = grid.nodes();
    let us: Vec<[C64; 4]> = nodes.iter().map(basis_u).collect();

    // orthonormality
    let mut r_on: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let v: C64 = us
                .iter()
                .zip(&grid.weights)
                .map(|(u, w)| u[a].conj() * u[b] * *w)
                .sum();
            let d = if a == b { 1.0 } else { 0.0 };
            r_on = r_on.max((v - C64::from(d)).norm());
        }
    }
    rep.push("orthonormality", r_on, 1e-12);

    // the matrix equals the quadrature projection of the analytic operator
    let mut r_proj: f64 = 0.0;
    for op in OperatorId::all() {
        let m = mat(op);
        for b in 0..4 {
            let mut e = SpinCoefficients::zeros();
            e[b] = C64::from(1.0);
            let applied: Vec<C64> = nodes
                .iter()
                .map(|x| apply_operator_analytic(op, &e, x, hbar).unwrap())
                .collect();
            for a in 0..4 {
                let v: C64 = us
                    .iter()
                    .zip(&applied)
                    .zip(&grid.weights)
                    .map(|((u, o), w)| u[a].conj() * o * *w)
                    .sum();
                r_proj = r_proj.max((v - m[(a, b)]).norm());
            }
        }
    }
    rep.push("matrix_projection", r_proj, 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);

    // random (op, c, angle) cross-validation
    let ops = OperatorId::all();
    let mut r_ma: f64 = 0.0;
    for _ in 0..100 {
        let op = ops[rng.gen_range(0..ops.len())];
        let c = random_coeffs(&mut rng);
        let x = random_interior_angle(&mut rng);
        let lhs = apply_operator_analytic(op, &c, &x, hbar).unwrap();
        let rhs = apply_operator_matrix(&mat(op), &c, &x);
        r_ma = r_ma.max((lhs - rhs).norm());
    }
    rep.push("matrix_vs_analytic", r_ma, 1e-10);

    // divergence identity, analytic and by differences
    let mut r_div: f64 = 0.0;
    let mut r_div_fd: f64 = 0.0;
    for _ in 0..50 {
        let x = random_interior_angle(&mut rng);
        r_div = r_div.max(divergence_residual(&x).unwrap());
        r_div_fd = r_div_fd.max(divergence_residual_fd(&x, 1e-4));
    }
    rep.push("divergence_analytic", r_div, 1e-12);
    rep.push("divergence_fd", r_div_fd, 1e-8);

    // M̂_i R_lj = iħ ε_ijk R_lk
    let mut r_rot: f64 = 0.0;
    for _ in 0..50 {
        let x = random_interior_angle(&mut rng);
        let m = euler_matrices(&x).unwrap();
        let dr = rotation_derivatives(&x);
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut lhs = C64::new(0.0, 0.0);
                    for r in 0..3 {
                        lhs += C64::new(0.0, -hbar) * m.a[(i, r)] * dr[r][(l, j)];
                    }
                    let mut rhs = C64::new(0.0, 0.0);
                    for k in 0..3 {
                        rhs += ih * levi(i, j, k) * m.r[(l, k)];
                    }
                    r_rot = r_rot.max((lhs - rhs).norm());
                }
            }
        }
        let closed = rotation_closed_form(&x);
        r_rot = r_rot.max((closed - m.r).abs().max());
    }
    rep.push("rotation_derivative", r_rot, 1e-10);

    // reduction n̂₁m̂_i = −R_1i − ε_ijk R_1j m̂_k on basis functions
    let mut r_red: f64 = 0.0;
    for _ in 0..20 {
        let x = random_interior_angle(&mut rng);
        let r1 = euler_matrices(&x).unwrap().r1();
        let u = basis_u(&x);
        for a in 0..4 {
            let mut e = SpinCoefficients::zeros();
            e[a] = C64::from(1.0);
            let mh: Vec<C64> = (1..=3)
                .map(|k| apply_operator_analytic(OperatorId::MHat(k), &e, &x, hbar).unwrap())
                .collect();
            for i in 0..3 {
                let lhs = apply_operator_analytic(OperatorId::N1MHat(i + 1), &e, &x, hbar).unwrap();
                let mut rhs = -u[a] * r1[i];
                for j in 0..3 {
                    for k in 0..3 {
                        rhs -= mh[k] * (levi(i, j, k) * r1[j]);
                    }
                }
                r_red = r_red.max((lhs - rhs).norm());
            }
        }
    }
    rep.push("second_order_reduction", r_red, 1e-10);

    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_identities_pass() {
        let rep = verify_identities(1.0);
        for c in &rep.checks {
            assert!(c.passed, "{} residual {}", c.name, c.max_residual);
        }
    }

    #[test]
    fn identities_pass_with_other_hbar() {
        assert!(verify_identities(0.7).all_passed());
    }
}
