//! Trajectory bundle files.
//!
//! Binary layout, little-endian:
//!
//! | field            | type                | content                                       |
//! |------------------|---------------------|-----------------------------------------------|
//! | magic            | [u8; 8]             | `DCBUNDL1`                                    |
//! | version          | u32                 | 1                                             |
//! | header length    | u64                 | byte length H of the JSON header              |
//! | header           | [u8; H]             | parameters, grids, mode, branch, initial state |
//! | snapshot count   | u32                 |                                               |
//! | per snapshot     |                     | f64 t, u8 extras bitmask, then per label:     |
//! |                  | f64 × 3             | q                                             |
//! |                  | f64 × 3             | θ(t)                                          |
//! |                  | f64 × 2             | ψ, J                                          |
//! |                  | u8                  | flag (0 ok, 1 node, 2 collapse)               |
//! |                  | f64 × 18 (bit 0)    | ∂q/∂q₀ and ∂q/∂θ₀, row-major                  |
//! |                  | f64 × 3 (bit 1)     | velocity                                      |

use super::{
    angle_flow, Branch, InitialState, LabelFlag, LabelGrid, Mode, Snapshot, TrajectoryBundle,
};
use crate::angular_algebra::{AngleGrid, SpinCoefficients};
use crate::reference_solver::{GaussianPacket, Grid3, SolverError};
use crate::PhysicalParams;
use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"DCBUNDL1";

#[derive(Serialize, Deserialize)]
enum InitialDesc {
    Uniform {
        pol: [[f64; 2]; 4],
    },
    Gaussian {
        packet: GaussianPacket,
        grid: Grid3,
        scale: f64,
    },
    Sampled {
        grid: Grid3,
        table: Vec<Vec<f64>>,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: PhysicalParams,
    space: Grid3,
    angles: AngleGrid,
    branch: Branch,
    mode: Mode,
    dt: f64,
    steps: usize,
    min_speed_ratio: f64,
    velocity_evaluations: u64,
    initial: InitialDesc,
}

fn describe(s: &InitialState) -> InitialDesc {
    match s {
        InitialState::Uniform { pol } => InitialDesc::Uniform {
            pol: std::array::from_fn(|a| [pol[a].re, pol[a].im]),
        },
        InitialState::Gaussian {
            packet,
            grid,
            scale,
        } => InitialDesc::Gaussian {
            packet: packet.clone(),
            grid: *grid,
            scale: *scale,
        },
        InitialState::Sampled { grid, table } => InitialDesc::Sampled {
            grid: *grid,
            table: table.iter().map(|r| r.to_vec()).collect(),
        },
    }
}

fn restore(d: InitialDesc) -> Result<InitialState, String> {
    Ok(match d {
        InitialDesc::Uniform { pol } => InitialState::Uniform {
            pol: SpinCoefficients::from_fn(|a, _| C64::new(pol[a][0], pol[a][1])),
        },
        InitialDesc::Gaussian {
            packet,
            grid,
            scale,
        } => InitialState::Gaussian {
            packet,
            grid,
            scale,
        },
        InitialDesc::Sampled { grid, table } => {
            let rows = table
                .into_iter()
                .map(|r| {
                    <[f64; 32]>::try_from(r.as_slice())
                        .map_err(|_| "sampled row must hold 32 values".to_string())
                })
                .collect::<Result<Vec<_>, _>>()?;
            InitialState::Sampled { grid, table: rows }
        }
    })
}

fn put(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn write_bundle_bytes(b: &TrajectoryBundle) -> Vec<u8> {
    let header = Header {
        params: b.params,
        space: b.labels.space,
        angles: b.labels.angles.clone(),
        branch: b.branch,
        mode: b.mode,
        dt: b.dt,
        steps: b.steps,
        min_speed_ratio: b.min_speed_ratio,
        velocity_evaluations: b.velocity_evaluations,
        initial: describe(&b.labels.initial),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(b.snapshots.len() as u32).to_le_bytes());
    for s in &b.snapshots {
        put(&mut out, s.t);
        let has_def = s.d_qq.is_some() && s.d_qtheta.is_some();
        let extras = has_def as u8 | (s.velocity.is_some() as u8) << 1;
        out.push(extras);
        for l in 0..b.labels.len() {
            for v in s.q[l] {
                put(&mut out, v);
            }
            let th = angle_flow(&b.labels.angle_of(l), s.t, &b.params);
            for v in th.as_array() {
                put(&mut out, v);
            }
            put(&mut out, s.psi[l]);
            put(&mut out, s.jac[l]);
            out.push(s.flags[l].code());
            if has_def {
                for m in [
                    &s.d_qq.as_ref().unwrap()[l],
                    &s.d_qtheta.as_ref().unwrap()[l],
                ] {
                    for i in 0..3 {
                        for j in 0..3 {
                            put(&mut out, m[(i, j)]);
                        }
                    }
                }
            }
            if let Some(v) = &s.velocity {
                for x in v[l] {
                    put(&mut out, x);
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    b: &'a [u8],
    off: usize,
}

impl Cursor<'_> {
    fn bytes(&mut self, n: usize) -> Result<&[u8], SolverError> {
        let s = self
            .b
            .get(self.off..self.off + n)
            .ok_or_else(|| SolverError::FileFormat {
                offset: self.b.len().min(self.off),
                message: format!("unexpected end of data, needed {n} bytes"),
            })?;
        self.off += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, SolverError> {
        Ok(self.bytes(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SolverError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, SolverError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, SolverError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn err(&self, at: usize, m: impl Into<String>) -> SolverError {
        SolverError::FileFormat {
            offset: at,
            message: m.into(),
        }
    }
}

pub fn read_bundle_bytes(b: &[u8]) -> Result<TrajectoryBundle, SolverError> {
    let mut c = Cursor { b, off: 0 };
    if c.bytes(8)? != MAGIC {
        return Err(c.err(0, "bad magic"));
    }
    let version = c.u32()?;
    if version != 1 {
        return Err(c.err(8, format!("unsupported version {version}")));
    }
    let hlen = c.u64()? as usize;
    let hstart = c.off;
    let header: Header = serde_json::from_slice(c.bytes(hlen)?)
        .map_err(|e| c.err(hstart, format!("header: {e}")))?;
    let initial = restore(header.initial).map_err(|e| c.err(hstart, e))?;
    let labels = LabelGrid::new(header.space, header.angles, header.branch, initial)
        .map_err(|e| c.err(hstart, e.to_string()))?;
    let n = labels.len();
    let count = c.u32()? as usize;
    let mut snapshots = Vec::with_capacity(count);
    for _ in 0..count {
        let t = c.f64()?;
        let extras_at = c.off;
        let extras = c.u8()?;
        if extras > 3 {
            return Err(c.err(extras_at, format!("unknown extras mask {extras}")));
        }
        let (has_def, has_vel) = (extras & 1 == 1, extras & 2 == 2);
        let mut s = Snapshot {
            t,
            q: Vec::with_capacity(n),
            psi: Vec::with_capacity(n),
            jac: Vec::with_capacity(n),
            flags: Vec::with_capacity(n),
            d_qq: has_def.then(Vec::new),
            d_qtheta: has_def.then(Vec::new),
            velocity: has_vel.then(Vec::new),
        };
        for _ in 0..n {
            s.q.push([c.f64()?, c.f64()?, c.f64()?]);
            c.bytes(24)?;
            s.psi.push(c.f64()?);
            s.jac.push(c.f64()?);
            let at = c.off;
            let code = c.u8()?;
            s.flags.push(
                LabelFlag::from_code(code)
                    .ok_or_else(|| c.err(at, format!("bad label flag {code}")))?,
            );
            if has_def {
                let mut read_m = || -> Result<Matrix3<f64>, SolverError> {
                    let mut m = Matrix3::zeros();
                    for i in 0..3 {
                        for j in 0..3 {
                            m[(i, j)] = c.f64()?;
                        }
                    }
                    Ok(m)
                };
                let a = read_m()?;
                let bm = read_m()?;
                s.d_qq.as_mut().unwrap().push(a);
                s.d_qtheta.as_mut().unwrap().push(bm);
            }
            if has_vel {
                let v = [c.f64()?, c.f64()?, c.f64()?];
                s.velocity.as_mut().unwrap().push(v);
            }
        }
        snapshots.push(s);
    }
    if c.off != b.len() {
        return Err(c.err(c.off, "trailing bytes after the last snapshot"));
    }
    Ok(TrajectoryBundle {
        params: header.params,
        labels,
        mode: header.mode,
        branch: header.branch,
        dt: header.dt,
        steps: header.steps,
        snapshots,
        min_speed_ratio: header.min_speed_ratio,
        velocity_evaluations: header.velocity_evaluations,
    })
}

pub fn write_bundle(path: &Path, b: &TrajectoryBundle) -> Result<(), SolverError> {
    std::fs::write(path, write_bundle_bytes(b))?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<TrajectoryBundle, SolverError> {
    read_bundle_bytes(&std::fs::read(path)?)
}

/// One row per label and snapshot.
pub fn write_bundle_csv(path: &Path, b: &TrajectoryBundle) -> Result<(), SolverError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "t,label,q0x,q0y,q0z,alpha,beta,gamma,qx,qy,qz,psi,jac,flag"
    )?;
    for s in &b.snapshots {
        for l in 0..b.labels.len() {
            let q0 = b.labels.q0_of(l);
            let th = angle_flow(&b.labels.angle_of(l), s.t, &b.params);
            writeln!(
                w,
                "{:e},{l},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                s.t,
                q0[0],
                q0[1],
                q0[2],
                th.alpha,
                th.beta,
                th.gamma,
                s.q[l][0],
                s.q[l][1],
                s.q[l][2],
                s.psi[l],
                s.jac[l],
                s.flags[l].code()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory_engine::{integrate_bundle, IntegrationOptions};

    #[test]
    fn roundtrip_is_lossless() {
        let mut e1 = SpinCoefficients::zeros();
        e1[0] = C64::from(1.0);
        let labels = LabelGrid::new(
            Grid3::new(2, 6.0),
            AngleGrid::quadrature(2, 2, 4).reduce_gamma(),
            Branch::I,
            InitialState::Uniform { pol: e1 },
        )
        .unwrap();
        let mut o = IntegrationOptions::new(Mode::SelfContained, 0.02, 0.1);
        o.record_deformation = true;
        o.record_velocity = true;
        o.record_every = 2;
        let b = integrate_bundle(labels, PhysicalParams::default(), &o, None).unwrap();
        let bytes = write_bundle_bytes(&b);
        let r = read_bundle_bytes(&bytes).unwrap();
        assert_eq!(r.snapshots, b.snapshots);
        assert_eq!(r.labels.psi0, b.labels.psi0);
        assert_eq!(
            (r.dt, r.steps, r.mode, r.branch),
            (b.dt, b.steps, b.mode, b.branch)
        );
        assert_eq!(write_bundle_bytes(&r), bytes);
        assert!(matches!(
            read_bundle_bytes(&bytes[..bytes.len() - 3]),
            Err(SolverError::FileFormat { .. })
        ));
    }
}
