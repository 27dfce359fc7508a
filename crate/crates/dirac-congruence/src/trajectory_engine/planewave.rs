//! Closed-form congruences of the zero-momentum plane wave Ψ₀ = e₁.

use super::{Branch, TrajectoryError};
use crate::angular_algebra::EulerAngles;
use crate::PhysicalParams;

/// q(t) − q₀ for the R congruence at initial angles (α, β, γ).
fn displacement_r(
    alpha: f64,
    beta: f64,
    gamma: f64,
    t: f64,
    p: &PhysicalParams,
) -> Result<[f64; 3], TrajectoryError> {
    let w = p.omega();
    let phi_p = 0.5 * (gamma + beta);
    let phi_m = 0.5 * (gamma - beta);
    let cp = phi_p.cos();
    if cp.abs() < 1e-12 {
        return Err(TrajectoryError::SecantSingularity { cos_phi: cp });
    }
    let k = p.c / (w * cp);
    let ta = (0.5 * alpha).tan();
    let wt = w * t;
    Ok([
        k * (phi_p.sin() - (phi_p - wt).sin()),
        k * (phi_p.cos() - (phi_p - wt).cos()),
        -k * ta * (phi_m.cos() - (phi_m - wt).cos()),
    ])
}

/// Displacement of the plane-wave path; the I congruence is the R one at γ + π, reversed.
pub fn plane_wave_displacement(
    theta0: &EulerAngles,
    t: f64,
    params: &PhysicalParams,
    branch: Branch,
) -> Result<[f64; 3], TrajectoryError> {
    match branch {
        Branch::R => displacement_r(theta0.alpha, theta0.beta, theta0.gamma, t, params),
        Branch::I => {
            let d = displacement_r(
                theta0.alpha,
                theta0.beta,
                theta0.gamma + std::f64::consts::PI,
                t,
                params,
            )?;
            Ok([-d[0], -d[1], -d[2]])
        }
    }
}

/// q(t) = q₀ + d − (c/ω) sec φ₊ (sin(φ₊ − ωt), cos(φ₊ − ωt), −tan(α/2) cos(φ₋ − ωt)).
pub fn plane_wave_paths(
    q0: [f64; 3],
    theta0: &EulerAngles,
    t: f64,
    params: &PhysicalParams,
    branch: Branch,
) -> Result<[f64; 3], TrajectoryError> {
    let d = plane_wave_displacement(theta0, t, params, branch)?;
    Ok([q0[0] + d[0], q0[1] + d[1], q0[2] + d[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_algebra::SpinCoefficients;
    use crate::trajectory_engine::{angle_flow, evolution_operator, velocity};
    use num_complex::Complex64 as C64;
    use std::f64::consts::PI;

    #[test]
    fn reference_orbit() {
        let p = PhysicalParams::default();
        let w = p.omega();
        let th = EulerAngles::raw(PI / 2.0, 0.0, 0.0);
        for &t in &[0.0, 0.4, 1.7] {
            let q = plane_wave_paths([1.0, 2.0, 3.0], &th, t, &p, Branch::R).unwrap();
            let e = [
                1.0 + (w * t).sin() / w,
                2.0 + (1.0 - (w * t).cos()) / w,
                3.0 + ((w * t).cos() - 1.0) / w,
            ];
            for i in 0..3 {
                assert!((q[i] - e[i]).abs() < 1e-14);
            }
        }
        let back = plane_wave_paths([0.0; 3], &th, 2.0 * PI / w, &p, Branch::R).unwrap();
        assert!(back.iter().all(|x| x.abs() < 1e-14));
    }

    /// The time derivative of the closed form equals the field velocity of U(t)Φ₀.
    #[test]
    fn derivative_matches_velocity_both_branches() {
        let p = PhysicalParams::default();
        let mut e1 = SpinCoefficients::zeros();
        e1[0] = C64::from(1.0);
        let (r, i) = crate::spinor_core::majorana_split(&e1);
        for (branch, phi0) in [(Branch::R, r), (Branch::I, i)] {
            let th = EulerAngles::raw(1.1, 0.35, 2.2);
            for &t in &[0.0, 0.3, 0.9] {
                let h = 1e-5;
                let a = plane_wave_displacement(&th, t + h, &p, branch).unwrap();
                let b = plane_wave_displacement(&th, t - h, &p, branch).unwrap();
                let phi = evolution_operator(t, &p) * phi0;
                let v = velocity(&phi, &angle_flow(&th, t, &p), &p, 0.0).unwrap();
                for k in 0..3 {
                    assert!(
                        ((a[k] - b[k]) / (2.0 * h) - v[k]).abs() < 1e-8,
                        "{branch:?} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn secant_singularity() {
        let p = PhysicalParams::default();
        let th = EulerAngles::raw(1.0, PI / 2.0, PI / 2.0);
        assert!(matches!(
            plane_wave_paths([0.0; 3], &th, 0.1, &p, Branch::R),
            Err(TrajectoryError::SecantSingularity { .. })
        ));
    }
}
