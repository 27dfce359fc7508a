//! Trajectory construction of free Dirac evolution in the Euler-angle
//! representation, with a spectral reference solver used as an oracle.

pub mod cli_harness;
pub mod angular_algebra;
pub mod covariance;
pub mod observables;
pub mod reference_solver;
pub mod spinor_core;
pub mod trajectory_engine;

use serde::{Deserialize, Serialize};

/// Mass, reduced Planck constant and speed of light.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub hbar: f64,
    pub c: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            hbar: 1.0,
            c: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(m: f64, hbar: f64, c: f64) -> Result<Self, String> {
        if !(m > 0.0 && hbar > 0.0 && c > 0.0) || !(m * hbar * c).is_finite() {
            return Err(format!(
                "physical parameters must be positive and finite: m={m}, hbar={hbar}, c={c}"
            ));
        }
        Ok(Self { m, hbar, c })
    }

    /// ω = 2mc²/ħ.
    pub fn omega(&self) -> f64 {
        2.0 * self.m * self.c * self.c / self.hbar
    }

    /// Rest energy mc².
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }
}
