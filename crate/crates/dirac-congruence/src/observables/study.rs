//! Convergence and invariance studies built on the pointwise residuals.

use super::{
    hj_and_continuity_residuals, ConstantPotential, FieldSamples, LinearGauge, ObservableOptions,
    ObservablesError, PolarResiduals,
};
use crate::angular_algebra::{AngleGrid, SpinCoefficients};
use crate::reference_solver::{
    angular_continuity_residual, angular_continuity_residual_free, constant_potential_solution,
    dirac_residual, dirac_residual_free, plane_wave_field, spectral_propagate, ContinuityResidual,
    GaussianPacket, Grid3, PotentialField, ResidualOptions, SpinorField,
};
use crate::PhysicalParams;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Relative residuals below this are treated as converged to round-off.
pub const POLAR_FLOOR: f64 = 1e-11;
/// Lowest accepted observed order for a second-order residual.
pub const MIN_ORDER: f64 = 1.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub residuals: PolarResiduals,
}

/// Residuals at successive dt halvings with observed orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarStudy {
    pub name: String,
    pub rows: Vec<ConvergenceRow>,
    pub order_squared: Vec<f64>,
    pub order_continuity: Vec<f64>,
    pub order_hj_literal: Vec<f64>,
    pub order_hj_drift: Vec<f64>,
    pub max_abs_q: f64,
    pub min_speed_ratio: f64,
    pub max_dual_route: f64,
}

fn orders(rows: &[ConvergenceRow], f: impl Fn(&PolarResiduals) -> f64) -> Vec<f64> {
    rows.windows(2)
        .map(|w| {
            let (a, b) = (f(&w[0].residuals), f(&w[1].residuals));
            if a <= POLAR_FLOOR && b <= POLAR_FLOOR {
                f64::INFINITY
            } else {
                (a / b).log2() / (w[0].dt / w[1].dt).log2()
            }
        })
        .collect()
}

/// True when every observed order reaches `min` (or the residuals sit at round-off).
pub fn second_order(orders: &[f64]) -> bool {
    !orders.is_empty() && orders.iter().all(|&o| o >= MIN_ORDER)
}

impl PolarStudy {
    fn build(name: &str, rows: Vec<ConvergenceRow>) -> Self {
        let mut s = Self {
            name: name.to_string(),
            order_squared: orders(&rows, |r| r.squared_rel()),
            order_continuity: orders(&rows, |r| r.continuity_rel()),
            order_hj_literal: orders(&rows, |r| r.hj_literal_rel()),
            order_hj_drift: orders(&rows, |r| r.hj_drift_rel()),
            max_abs_q: 0.0,
            min_speed_ratio: f64::INFINITY,
            max_dual_route: 0.0,
            rows,
        };
        for r in &s.rows {
            s.max_abs_q = s.max_abs_q.max(r.residuals.max_abs_q);
            s.min_speed_ratio = s.min_speed_ratio.min(r.residuals.min_speed_ratio);
            s.max_dual_route = s
                .max_dual_route
                .max(r.residuals.dual_route_translational)
                .max(r.residuals.dual_route_angular);
        }
        s
    }

    /// The squared-density, mean continuity and drift-form phase laws all converge at second order.
    pub fn converges(&self) -> bool {
        second_order(&self.order_squared)
            && second_order(&self.order_continuity)
            && second_order(&self.order_hj_drift)
    }

    pub fn literal_converges(&self) -> bool {
        second_order(&self.order_hj_literal)
    }
}

fn study_rows(
    initial: &SpinorField,
    t0: f64,
    dts: &[f64],
    stride: usize,
    opts: &ObservableOptions,
    evolve: &dyn Fn(&SpinorField, f64) -> Result<SpinorField, ObservablesError>,
) -> Result<Vec<ConvergenceRow>, ObservablesError> {
    let start = evolve(initial, t0)?;
    let before = FieldSamples::from_field(&start, stride);
    dts.iter()
        .map(|&dt| {
            let after = FieldSamples::from_field(&evolve(&start, dt)?, stride);
            Ok(ConvergenceRow {
                dt,
                residuals: hj_and_continuity_residuals(&before, &after, dt, opts)?,
            })
        })
        .collect()
}

fn spectral(f: &SpinorField, dt: f64) -> Result<SpinorField, ObservablesError> {
    if dt == 0.0 {
        return Ok(f.clone());
    }
    Ok(spectral_propagate(f, dt)?)
}

fn dt_ladder(base: f64, halvings: usize) -> Vec<f64> {
    (0..=halvings).map(|k| base / 2f64.powi(k as i32)).collect()
}

/// Uniform rest-frame state with a mixed upper polarisation.
pub fn plane_wave_polar_study(
    p: PhysicalParams,
    halvings: usize,
) -> Result<PolarStudy, ObservablesError> {
    let pol = SpinCoefficients::new(
        C64::new(0.8, 0.0),
        C64::new(0.0, 0.6),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    );
    let grid = Grid3::new(4, 5.0);
    let w = p.omega();
    let init = plane_wave_field(grid, p, pol, 0.0);
    let exact = |f: &SpinorField, dt: f64| Ok(plane_wave_field(grid, p, pol, f.time + dt));
    let rows = study_rows(
        &init,
        0.3 / w,
        &dt_ladder(0.1 / w, halvings),
        1,
        &ObservableOptions::default(),
        &exact,
    )?;
    Ok(PolarStudy::build("plane_wave", rows))
}

/// A moving, mixed-polarisation Gaussian packet on the 32³ reference box.
pub fn gaussian_packet_for_polar() -> GaussianPacket {
    GaussianPacket {
        center: [0.0; 3],
        width: 2.0,
        momentum: [0.4, 0.0, 0.25],
        polarization: [[1.0, 0.0], [0.0, 0.35], [0.25, 0.0], [0.0, -0.15]],
    }
}

pub fn gaussian_polar_study(
    p: PhysicalParams,
    n: usize,
    stride: usize,
    halvings: usize,
) -> Result<PolarStudy, ObservablesError> {
    let grid = Grid3::new(n, 20.0);
    let (init, _) = gaussian_packet_for_polar().field(grid, p);
    let w = p.omega();
    field_polar_study("gaussian", &init, 0.5 / w, 0.05 / w, halvings, stride)
}

/// Spectrally evolved study of an arbitrary field: residuals at t0 for steps dt, dt/2, ….
pub fn field_polar_study(
    name: &str,
    field: &SpinorField,
    t0: f64,
    dt: f64,
    halvings: usize,
    stride: usize,
) -> Result<PolarStudy, ObservablesError> {
    let rows = study_rows(
        field,
        t0,
        &dt_ladder(dt, halvings),
        stride,
        &ObservableOptions::default(),
        &spectral,
    )?;
    Ok(PolarStudy::build(name, rows))
}

/// Largest change of the gauge-invariant residuals under phase transformations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    /// Global phase e^{iχ} on a free Gaussian pair.
    pub global: f64,
    /// Linear gauge f(x, t) with the compensating constant potential, on the constant-A₀ solution.
    pub linear: f64,
}

impl GaugeReport {
    pub fn worst(&self) -> f64 {
        self.global.max(self.linear)
    }
}

fn residual_change(a: &PolarResiduals, b: &PolarResiduals) -> f64 {
    let rel = |x: f64, y: f64, s: f64| (x - y).abs() / s;
    [
        rel(a.continuity, b.continuity, a.continuity_scale),
        rel(a.hj_literal, b.hj_literal, a.hj_scale),
        rel(a.hj_drift, b.hj_drift, a.hj_scale),
        rel(a.max_abs_q, b.max_abs_q, a.hj_scale),
        rel(a.min_speed_ratio, b.min_speed_ratio, 1.0),
        rel(a.dual_route_translational, b.dual_route_translational, 1.0),
        rel(a.dual_route_angular, b.dual_route_angular, 1.0),
        if a.samples == b.samples { 0.0 } else { 1.0 },
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn gauge_study(
    p: PhysicalParams,
    n: usize,
    stride: usize,
) -> Result<GaugeReport, ObservablesError> {
    let w = p.omega();
    let dt = 0.05 / w;
    let opts = ObservableOptions::default();

    let grid = Grid3::new(n, 20.0);
    let (init, _) = gaussian_packet_for_polar().field(grid, p);
    let f0 = spectral(&init, 0.5 / w)?;
    let f1 = spectral(&f0, dt)?;
    let (b, a) = (
        FieldSamples::from_field(&f0, stride),
        FieldSamples::from_field(&f1, stride),
    );
    let base = hj_and_continuity_residuals(&b, &a, dt, &opts)?;
    let chi = LinearGauge {
        f0: 1.234 * p.hbar,
        ..Default::default()
    };
    let shifted = hj_and_continuity_residuals(&b.gauge(&chi), &a.gauge(&chi), dt, &opts)?;
    let global = residual_change(&base, &shifted);

    let small = Grid3::new(4, 5.0);
    let a0 = 0.4;
    let pot = ConstantPotential { a0, a: [0.0; 3] };
    let s0 = FieldSamples::from_field(&constant_potential_solution(small, p, a0, 0.2 / w), 1);
    let s1 = FieldSamples::from_field(&constant_potential_solution(small, p, a0, 0.2 / w + dt), 1);
    let with_pot = ObservableOptions {
        potential: Some(pot),
        ..opts.clone()
    };
    let ref_res = hj_and_continuity_residuals(&s0, &s1, dt, &with_pot)?;
    let f = LinearGauge {
        f0: 0.3,
        ft: 0.7 * p.rest_energy(),
        fx: [0.2, -0.1, 0.05],
    };
    let moved = ObservableOptions {
        potential: Some(f.transform_potential(&pot, p.c)),
        ..opts
    };
    let gauged = hj_and_continuity_residuals(&s0.gauge(&f), &s1.gauge(&f), dt, &moved)?;
    Ok(GaugeReport {
        global,
        linear: residual_change(&ref_res, &gauged),
    })
}

/// Coupled-equation residuals on the constant-A₀ solution under dt halving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialStudy {
    pub a0: f64,
    pub dts: Vec<f64>,
    pub dirac: Vec<f64>,
    pub continuity: Vec<ContinuityResidual>,
    pub polar_hj: Vec<f64>,
    pub dirac_ratios: Vec<f64>,
    pub continuity_ratios: Vec<f64>,
    /// max |real − plain A₀| over the ladder; zero when the two forms of the A₀ term agree.
    pub a0_form_gap: f64,
    /// A = 0 reproduces the free residuals to the last bit on a Gaussian pair.
    pub zero_bit_identical: bool,
}

impl PotentialStudy {
    pub fn passed(&self) -> bool {
        let ok = |r: &[f64]| !r.is_empty() && r.iter().all(|&x| (3.5..=4.5).contains(&x));
        ok(&self.dirac_ratios) && ok(&self.continuity_ratios) && self.zero_bit_identical
    }
}

pub fn potential_study(
    p: PhysicalParams,
    a0: f64,
    halvings: usize,
) -> Result<PotentialStudy, ObservablesError> {
    let grid = Grid3::new(4, 5.0);
    let w = p.omega();
    let pot = PotentialField::constant(a0, [0.0; 3]);
    let ropts = ResidualOptions::default();
    let t0 = 0.1 / w;
    let dts = dt_ladder(0.1 / w, halvings);
    let mut out = PotentialStudy {
        a0,
        dts: dts.clone(),
        dirac: vec![],
        continuity: vec![],
        polar_hj: vec![],
        dirac_ratios: vec![],
        continuity_ratios: vec![],
        a0_form_gap: 0.0,
        zero_bit_identical: false,
    };
    let popts = ObservableOptions {
        potential: Some(ConstantPotential { a0, a: [0.0; 3] }),
        ..Default::default()
    };
    for &dt in &dts {
        let b = constant_potential_solution(grid, p, a0, t0);
        let a = constant_potential_solution(grid, p, a0, t0 + dt);
        out.dirac.push(dirac_residual(&b, &a, dt, &pot)?);
        let cr = angular_continuity_residual(&b, &a, dt, &pot, &ropts)?;
        out.a0_form_gap = out
            .a0_form_gap
            .max((cr.real_r - cr.plain_a0_r).abs())
            .max((cr.real_i - cr.plain_a0_i).abs());
        out.continuity.push(cr);
        let pr = hj_and_continuity_residuals(
            &FieldSamples::from_field(&b, 1),
            &FieldSamples::from_field(&a, 1),
            dt,
            &popts,
        )?;
        out.polar_hj.push(pr.hj_literal_rel());
    }
    out.dirac_ratios = out.dirac.windows(2).map(|w| w[0] / w[1]).collect();
    out.continuity_ratios = out
        .continuity
        .windows(2)
        .map(|w| w[0].real_r.max(w[0].real_i) / w[1].real_r.max(w[1].real_i))
        .collect();

    let g = Grid3::new(16, 20.0);
    let (f, _) = GaussianPacket {
        momentum: [0.3, 0.1, 0.0],
        ..Default::default()
    }
    .field(g, p);
    let f2 = spectral_propagate(&f, 0.01 / w)?;
    let zero = PotentialField::zero();
    let dt = 0.01 / w;
    out.zero_bit_identical = dirac_residual(&f, &f2, dt, &zero)?.to_bits()
        == dirac_residual_free(&f, &f2, dt)?.to_bits()
        && angular_continuity_residual(&f, &f2, dt, &zero, &ropts)?
            == angular_continuity_residual_free(&f, &f2, dt, &ropts)?;
    Ok(out)
}

/// Nodes used by the decomposition checks: exact for products of two spin-½ functions.
pub fn decomposition_grid() -> AngleGrid {
    AngleGrid::default_quadrature()
}
