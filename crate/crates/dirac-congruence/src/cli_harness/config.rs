//! Run configuration: a versioned TOML schema with validation and command-line overrides.

use super::HarnessError;
use crate::angular_algebra::AngleGrid;
use crate::reference_solver::{GaussianPacket, Grid3};
use crate::trajectory_engine::{Branch, Mode};
use crate::PhysicalParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Version written into and required from every config file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub per_axis: usize,
    /// Gauss–Legendre nodes in cos α, β nodes, γ nodes over [0, 4π).
    pub angle_nodes: [usize; 3],
    /// Keep only the γ ∈ [0, 2π) half with doubled weights.
    pub reduce_gamma: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Zero-padding factor of the interpolation table.
    pub factor: usize,
    /// Lagrange stencil width.
    pub order: usize,
}

/// Initial Dirac spinor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    PlaneWave { polarization: [[f64; 2]; 4] },
    GaussianPacket { center: [f64; 3], width: f64, momentum: [f64; 3], polarization: [[f64; 2]; 4] },
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSpec {
    R,
    I,
    Both,
}

impl BranchSpec {
    pub fn branches(&self) -> Vec<Branch> {
        match self {
            BranchSpec::R => vec![Branch::R],
            BranchSpec::I => vec![Branch::I],
            BranchSpec::Both => vec![Branch::R, Branch::I],
        }
    }
}

impl std::str::FromStr for BranchSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "r" => Ok(BranchSpec::R),
            "i" => Ok(BranchSpec::I),
            "both" => Ok(BranchSpec::Both),
            _ => Err(format!("unknown branch '{s}', expected R, I or both")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub physics: PhysicalParams,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub mode: Mode,
    pub branch: BranchSpec,
    pub labels: LabelSpec,
    pub oracle: OracleSpec,
    pub initial: InitialSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GaussianPacket::default();
        let physics = PhysicalParams::default();
        let w = physics.omega();
        Self {
            schema_version: SCHEMA_VERSION,
            physics,
            grid: GridSpec { n: 32, l: 20.0 },
            time: TimeSpec { dt: 0.0125 / w, t_end: 1.0 / w },
            mode: Mode::Validation,
            branch: BranchSpec::Both,
            labels: LabelSpec { per_axis: 16, angle_nodes: [2, 2, 4], reduce_gamma: true },
            oracle: OracleSpec { factor: 2, order: 6 },
            initial: InitialSpec::GaussianPacket {
                center: g.center,
                width: g.width,
                momentum: g.momentum,
                polarization: g.polarization,
            },
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that replace config entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub labels_per_axis: Option<usize>,
    pub angle_nodes: Option<[usize; 3]>,
    pub branch: Option<BranchSpec>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// The uniform e₁ state, self-contained, over one period on 8³ labels × 8·8·16 angles.
    pub fn plane_wave_demo() -> Self {
        let p = PhysicalParams::default();
        let w = p.omega();
        Self {
            grid: GridSpec { n: 8, l: 20.0 },
            time: TimeSpec { dt: 0.01 / w, t_end: 2.0 * PI / w },
            mode: Mode::SelfContained,
            labels: LabelSpec { per_axis: 8, angle_nodes: [8, 8, 16], reduce_gamma: false },
            initial: InitialSpec::PlaneWave { polarization: [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]] },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let v: toml::Value = toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        match v.get("schema_version").and_then(|s| s.as_integer()) {
            Some(x) if x == SCHEMA_VERSION as i64 => {}
            Some(x) => {
                return Err(HarnessError::ConfigInvalid(format!(
                    "schema_version {x} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(HarnessError::ConfigInvalid("missing schema_version".into())),
        }
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::ConfigInvalid(format!("cannot serialise: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(dt) = o.dt {
            self.time.dt = dt;
        }
        if let Some(t) = o.t_end {
            self.time.t_end = t;
        }
        if let Some(n) = o.labels_per_axis {
            self.labels.per_axis = n;
        }
        if let Some(a) = o.angle_nodes {
            self.labels.angle_nodes = a;
        }
        if let Some(b) = o.branch {
            self.branch = b;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn grid(&self) -> Grid3 {
        Grid3::new(self.grid.n, self.grid.l)
    }

    pub fn label_space(&self) -> Grid3 {
        Grid3::new(self.labels.per_axis, self.grid.l)
    }

    pub fn angle_grid(&self) -> AngleGrid {
        let [a, b, g] = self.labels.angle_nodes;
        let grid = AngleGrid::quadrature(a, b, g);
        if self.labels.reduce_gamma {
            grid.reduce_gamma()
        } else {
            grid
        }
    }

    pub fn packet(&self) -> Option<GaussianPacket> {
        match &self.initial {
            InitialSpec::GaussianPacket { center, width, momentum, polarization } => Some(GaussianPacket {
                center: *center,
                width: *width,
                momentum: *momentum,
                polarization: *polarization,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version must be {SCHEMA_VERSION}"));
        }
        if i64::try_from(self.seed).is_err() {
            return bad(format!("seed must not exceed {}", i64::MAX));
        }
        let p = &self.physics;
        if PhysicalParams::new(p.m, p.hbar, p.c).is_err() {
            return bad("m, hbar and c must be positive and finite".into());
        }
        if self.grid.n < 2 || !(self.grid.l > 0.0 && self.grid.l.is_finite()) {
            return bad(format!("grid needs n ≥ 2 and L > 0, got n={} L={}", self.grid.n, self.grid.l));
        }
        let w = p.omega();
        if !(self.time.dt > 0.0) || !(self.time.t_end >= 0.0) || !self.time.t_end.is_finite() {
            return bad("dt must be positive and t_end non-negative".into());
        }
        if self.time.dt * w > 0.05 * 2.0 * PI {
            return bad(format!("dt·ω = {:.4} exceeds 0.05·2π", self.time.dt * w));
        }
        if self.labels.per_axis < 2 || self.labels.per_axis > 256 {
            return bad(format!("labels.per_axis = {} must lie in 2..=256", self.labels.per_axis));
        }
        let [a, b, g] = self.labels.angle_nodes;
        if a == 0 || b == 0 || g == 0 || (self.labels.reduce_gamma && g % 2 == 1) {
            return bad(format!("angle_nodes {:?} must be positive, with an even γ count when reduced", self.labels.angle_nodes));
        }
        if self.oracle.factor == 0 || self.oracle.order < 2 || self.oracle.order % 2 == 1 {
            return bad("oracle needs factor ≥ 1 and an even order ≥ 2".into());
        }
        if let Some(pk) = self.packet() {
            if !(pk.width > 0.0) {
                return bad("packet width must be positive".into());
            }
            let ppw = pk.points_per_width(&self.grid());
            if ppw < 4.0 {
                return bad(format!("grid resolves the packet width with {ppw:.2} points; at least 4 are required"));
            }
            let half = 0.5 * self.grid.l;
            if pk.center.iter().any(|c| !(-half..half).contains(c)) {
                return bad(format!("packet center {:?} lies outside the box", pk.center));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
        let d = RunConfig::plane_wave_demo();
        assert_eq!(RunConfig::from_toml(&d.to_toml().unwrap()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = RunConfig::default();
        c.time.dt = 0.4;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.grid.n = 8;
        assert!(matches!(c.validate(), Err(HarnessError::ConfigInvalid(m)) if m.contains("points")));
        let text = RunConfig::default().to_toml().unwrap().replace("schema_version = 1", "schema_version = 7");
        assert!(RunConfig::from_toml(&text).is_err());
        let text = RunConfig::default().to_toml().unwrap() + "\nbogus = 3\n";
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::default();
        c.apply(&Overrides { dt: Some(0.01), branch: Some(BranchSpec::R), angle_nodes: Some([2, 4, 8]), ..Default::default() });
        assert_eq!(c.time.dt, 0.01);
        assert_eq!(c.branch, BranchSpec::R);
        assert_eq!(c.angle_grid().len(), 2 * 4 * 4);
    }
}
