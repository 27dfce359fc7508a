//! Checks against references built without the code under test.

use dirac_congruence::angular_algebra::{basis_u, AngleGrid, EulerAngles, SpinCoefficients, SpinMatrix};
use dirac_congruence::reference_solver::{read_field_bytes, spectral_propagate, write_field_bytes, Grid3, SpinorField};
use dirac_congruence::spinor_core::{majorana_split, GammaSet};
use dirac_congruence::trajectory_engine::{angle_flow, evolution_operator, plane_wave_paths, velocity, Branch};
use dirac_congruence::PhysicalParams;
use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Positive-energy eigenvector of H = cα·p + βmc², from a dense Hermitian eigensolver.
fn positive_energy(p: &PhysicalParams, mom: [f64; 3]) -> (SpinCoefficients, f64) {
    let g = GammaSet::dirac();
    let mut h: SpinMatrix = g.gamma[0] * C64::from(p.m * p.c * p.c);
    for i in 0..3 {
        h += g.alpha(i + 1) * C64::from(p.c * mom[i]);
    }
    let eig = SymmetricEigen::new(h);
    let k = (0..4).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    (eig.eigenvectors.column(k).into_owned(), eig.eigenvalues[k])
}

#[test]
fn spectral_solver_propagates_a_moving_plane_wave_exactly() {
    for params in [PhysicalParams::default(), PhysicalParams::new(0.7, 1.3, 2.0).unwrap()] {
        let grid = Grid3::new(8, 10.0);
        let k = [2.0 * PI / grid.l, -4.0 * PI / grid.l, 2.0 * PI / grid.l];
        let mom = k.map(|v| params.hbar * v);
        let (u, e) = positive_energy(&params, mom);
        let expect_e = (params.c.powi(2) * mom.iter().map(|v| v * v).sum::<f64>() + (params.m * params.c.powi(2)).powi(2)).sqrt();
        assert!((e - expect_e).abs() < 1e-12 * expect_e);
        let wave = |t: f64| {
            let mut f = SpinorField::from_fn(grid, params, |x| {
                let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - e * t / params.hbar;
                u * C64::from_polar(1.0, ph)
            });
            f.time = t;
            f
        };
        let t = 3.7 / params.omega();
        let got = spectral_propagate(&wave(0.0), t).unwrap();
        assert!(got.max_abs_diff(&wave(t)) < 1e-12, "{}", got.max_abs_diff(&wave(t)));
    }
}

/// q(t) by fine RK4 on v(Φ(t), θ(t)) with Φ(t) = U(t)Φ₀ split into branches.
fn brute_force_path(theta0: &EulerAngles, t_end: f64, p: &PhysicalParams, branch: Branch) -> [f64; 3] {
    let mut e1 = SpinCoefficients::zeros();
    e1[0] = C64::from(1.0);
    let v = |t: f64| {
        let (r, i) = majorana_split(&(evolution_operator(t, p) * e1));
        let phi = if branch == Branch::R { r } else { i };
        velocity(&phi, &angle_flow(theta0, t, p), p, 0.0).unwrap()
    };
    let n = 4000;
    let h = t_end / n as f64;
    let mut q = [0.0; 3];
    for s in 0..n {
        let t = s as f64 * h;
        let (k1, k2, k4) = (v(t), v(t + 0.5 * h), v(t + h));
        for d in 0..3 {
            q[d] += h / 6.0 * (k1[d] + 4.0 * k2[d] + k4[d]);
        }
    }
    q
}

#[test]
fn closed_form_orbits_match_direct_quadrature() {
    let p = PhysicalParams::default();
    let t_end = 0.8 * 2.0 * PI / p.omega();
    for th in [EulerAngles::raw(0.7, 0.3, 1.1), EulerAngles::raw(2.1, 4.0, 7.5)] {
        for branch in [Branch::R, Branch::I] {
            let q = brute_force_path(&th, t_end, &p, branch);
            let want = plane_wave_paths([0.0; 3], &th, t_end, &p, branch).unwrap();
            for d in 0..3 {
                assert!((q[d] - want[d]).abs() < 1e-10, "{branch:?} {q:?} {want:?}");
            }
        }
    }
}

#[test]
fn quadrature_matches_a_midpoint_sum() {
    let mut phi = SpinCoefficients::zeros();
    phi[0] = C64::new(0.3, -0.8);
    phi[1] = C64::new(0.5, 0.1);
    phi[2] = C64::new(-0.2, 0.4);
    phi[3] = C64::new(0.9, 0.0);
    let (r, _) = majorana_split(&phi);
    let f = |a: &EulerAngles| {
        let u = basis_u(a);
        let psi: C64 = (0..4).map(|k| u[k] * r[k]).sum();
        psi.re * psi.re
    };
    let quad = AngleGrid::quadrature(2, 2, 4).integrate_real(f);
    let (na, nb, ng) = (400, 8, 16);
    let (da, db, dg) = (PI / na as f64, 2.0 * PI / nb as f64, 4.0 * PI / ng as f64);
    let mut sum = 0.0;
    for i in 0..na {
        let a = (i as f64 + 0.5) * da;
        for j in 0..nb {
            for k in 0..ng {
                sum += f(&EulerAngles::raw(a, j as f64 * db, k as f64 * dg)) * a.sin() * da * db * dg;
            }
        }
    }
    assert!((quad - sum).abs() < 1e-5 * sum.abs(), "{quad} {sum}");
}

#[test]
fn corrupted_field_files_are_rejected() {
    let grid = Grid3::new(2, 1.0);
    let f = SpinorField::zeros(grid, PhysicalParams::default());
    let mut b = write_field_bytes(&f);
    assert_eq!(read_field_bytes(&b).unwrap(), f);
    b.truncate(b.len() - 3);
    assert!(read_field_bytes(&b).is_err());
    assert!(read_field_bytes(b"not a field").is_err());
}
