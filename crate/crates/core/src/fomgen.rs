//! Desk-scale reference trajectories: an explicit finite-volume solver for 2D
//! linear advection-diffusion and the closed-form translating Gaussian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Grid, MeasureError, Trajectory};

pub const MAX_CFL: f64 = 0.5;
pub const MAX_DIFFUSION_NUMBER: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FomError {
    #[error("CFL number {cfl:.4} exceeds {limit}")]
    CflViolation { cfl: f64, limit: f64 },
    #[error("diffusion number {number:.4} exceeds {limit}")]
    DiffusionLimit { number: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported specification: {0}")]
    UnsupportedSpec(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Velocity {
    Constant {
        vx: f64,
        vz: f64,
    },
    /// Counter-clockwise rigid rotation with angular speed `omega` (rad/time).
    Rotation {
        center: [f64; 2],
        omega: f64,
    },
}

impl Velocity {
    pub fn at(&self, x: f64, z: f64) -> [f64; 2] {
        match *self {
            Velocity::Constant { vx, vz } => [vx, vz],
            Velocity::Rotation { center, omega } => {
                [-omega * (z - center[1]), omega * (x - center[0])]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub center: [f64; 2],
    pub sigma: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Zero-gradient ghost cells: mass leaves freely through outflow faces.
    Outflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FomConfig {
    pub nx: usize,
    pub nz: usize,
    pub hx: f64,
    pub hz: f64,
    /// Lower-left corner of the domain.
    #[serde(default)]
    pub origin: [f64; 2],
    pub velocity: Velocity,
    #[serde(default)]
    pub diffusivity: f64,
    pub blobs: Vec<Blob>,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub save_stride: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

fn default_stride() -> usize {
    1
}

impl FomConfig {
    pub fn grid(&self) -> Result<Grid, FomError> {
        Ok(Grid::new(
            self.nx,
            self.nz,
            self.hx,
            self.hz,
            (
                self.origin[0] + 0.5 * self.hx,
                self.origin[1] + 0.5 * self.hz,
            ),
        )?)
    }

    /// Largest speed over the domain; affine fields peak at a corner.
    fn max_speed(&self, grid: &Grid) -> f64 {
        let speed = |x: f64, z: f64| {
            let v = self.velocity.at(x, z);
            v[0].hypot(v[1])
        };
        let [x0, z0] = self.origin;
        let (x1, z1) = (
            x0 + grid.nx() as f64 * grid.hx(),
            z0 + grid.nz() as f64 * grid.hz(),
        );
        let corners = [speed(x0, z0), speed(x1, z0), speed(x0, z1), speed(x1, z1)];
        corners.into_iter().fold(0.0, f64::max)
    }

    pub fn cfl(&self) -> Result<f64, FomError> {
        let grid = self.grid()?;
        Ok(self.max_speed(&grid) * self.dt / self.hx.min(self.hz))
    }

    pub fn diffusion_number(&self) -> f64 {
        self.diffusivity * self.dt / self.hx.min(self.hz).powi(2)
    }

    /// Number of solver steps, requiring `t_final` to be a whole number of
    /// save intervals.
    pub fn n_steps(&self) -> Result<usize, FomError> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_final > 0.0 && self.t_final.is_finite())
        {
            return Err(FomError::InvalidConfig(
                "dt and t_final must be positive".into(),
            ));
        }
        if self.save_stride == 0 {
            return Err(FomError::InvalidConfig(
                "save_stride must be at least 1".into(),
            ));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final || n < 1.0 {
            return Err(FomError::InvalidConfig(format!(
                "t_final {} is not a multiple of dt {}",
                self.t_final, self.dt
            )));
        }
        let n = n as usize;
        if !n.is_multiple_of(self.save_stride) {
            return Err(FomError::InvalidConfig(format!(
                "{n} steps are not divisible by save_stride {}",
                self.save_stride
            )));
        }
        Ok(n)
    }

    pub fn n_snapshots(&self) -> Result<usize, FomError> {
        Ok(self.n_steps()? / self.save_stride + 1)
    }

    /// Save interval of the produced trajectory.
    pub fn save_dt(&self) -> f64 {
        self.dt * self.save_stride as f64
    }

    pub fn validate(&self) -> Result<(), FomError> {
        self.n_steps()?;
        if self.blobs.is_empty() {
            return Err(FomError::InvalidConfig(
                "at least one blob is required".into(),
            ));
        }
        if self
            .blobs
            .iter()
            .any(|b| !(b.sigma > 0.0 && b.sigma.is_finite() && b.amplitude.is_finite()))
        {
            return Err(FomError::InvalidConfig(
                "blob widths must be positive and amplitudes finite".into(),
            ));
        }
        if !(self.diffusivity >= 0.0 && self.diffusivity.is_finite()) {
            return Err(FomError::InvalidConfig(
                "diffusivity must be nonnegative".into(),
            ));
        }
        let cfl = self.cfl()?;
        if !(cfl <= MAX_CFL) {
            return Err(FomError::CflViolation {
                cfl,
                limit: MAX_CFL,
            });
        }
        let number = self.diffusion_number();
        if number > MAX_DIFFUSION_NUMBER {
            return Err(FomError::DiffusionLimit {
                number,
                limit: MAX_DIFFUSION_NUMBER,
            });
        }
        Ok(())
    }

    /// Displacement vector from `p` to `q`, using the nearest periodic image
    /// when the boundary is periodic.
    fn offset(&self, p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
        let mut d = [q[0] - p[0], q[1] - p[1]];
        if self.boundary == Boundary::Periodic {
            let len = [self.nx as f64 * self.hx, self.nz as f64 * self.hz];
            for k in 0..2 {
                d[k] -= len[k] * (d[k] / len[k]).round();
            }
        }
        d
    }

    fn gaussian_field(&self, grid: &Grid, shift: [f64; 2], spread: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|l| {
                let p = grid.cell_center(l);
                self.blobs
                    .iter()
                    .map(|b| {
                        let s2 = b.sigma * b.sigma + spread;
                        let d = self.offset([b.center[0] + shift[0], b.center[1] + shift[1]], p);
                        b.amplitude
                            * (b.sigma * b.sigma / s2)
                            * (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * s2)).exp()
                    })
                    .sum()
            })
            .collect()
    }

    pub fn initial_field(&self) -> Result<Vec<f64>, FomError> {
        let grid = self.grid()?;
        Ok(self.gaussian_field(&grid, [0.0, 0.0], 0.0))
    }
}

/// Ready-made scenarios on the unit square `[0, 1]²` with periodic boundaries.
impl FomConfig {
    /// Gaussian blob (σ = 0.06) rotating half a turn about the center over
    /// `t ∈ [0, 1]`, saved at `n_snapshots` equispaced times. `dt` is the
    /// largest step with an integer save stride and CFL ≤ 0.45.
    pub fn rotating_blob(n: usize, n_snapshots: usize) -> Self {
        let h = 1.0 / n as f64;
        let omega = std::f64::consts::PI;
        let max_speed = omega * 0.5f64.sqrt();
        let intervals = n_snapshots.saturating_sub(1).max(1);
        let stride = ((max_speed * intervals as f64
            / (0.45 * h * intervals as f64 * intervals as f64))
            .ceil() as usize)
            .max(1);
        Self {
            nx: n,
            nz: n,
            hx: h,
            hz: h,
            origin: [0.0, 0.0],
            velocity: Velocity::Rotation {
                center: [0.5, 0.5],
                omega,
            },
            diffusivity: 0.0,
            blobs: vec![Blob {
                center: [0.72, 0.5],
                sigma: 0.06,
                amplitude: 1.0,
            }],
            dt: 1.0 / (intervals * stride) as f64,
            t_final: 1.0,
            save_stride: stride,
            boundary: Boundary::Periodic,
        }
    }

    /// Gaussian blob of width `sigma_cells` translated along `x` by
    /// `shift_cells` over `t ∈ [0, 1]`, saved at `n_snapshots` times. The
    /// blob starts so that its path is centered in the domain.
    pub fn translating_blob(
        n: usize,
        sigma_cells: f64,
        shift_cells: f64,
        n_snapshots: usize,
    ) -> Self {
        let h = 1.0 / n as f64;
        let speed = shift_cells * h;
        let intervals = n_snapshots.saturating_sub(1).max(1);
        let stride = ((speed / (0.45 * h * intervals as f64)).ceil() as usize).max(1);
        Self {
            nx: n,
            nz: n,
            hx: h,
            hz: h,
            origin: [0.0, 0.0],
            velocity: Velocity::Constant { vx: speed, vz: 0.0 },
            diffusivity: 0.0,
            blobs: vec![Blob {
                center: [0.5 - 0.5 * speed, 0.5],
                sigma: sigma_cells * h,
                amplitude: 1.0,
            }],
            dt: 1.0 / (intervals * stride) as f64,
            t_final: 1.0,
            save_stride: stride,
            boundary: Boundary::Periodic,
        }
    }
}

/// Face fluxes (advective upwind plus diffusive) for one sweep direction.
#[inline]
fn face_flux(u_left: f64, u_right: f64, v: f64, nu_over_h: f64) -> f64 {
    v.max(0.0) * u_left + v.min(0.0) * u_right - nu_over_h * (u_right - u_left)
}

struct Stepper {
    nx: usize,
    nz: usize,
    periodic: bool,
    /// `vx` on x-faces: index `iz * (nx + 1) + k`, face `k` at `x0 + k·hx`.
    vx: Vec<f64>,
    /// `vz` on z-faces: index `k * nx + ix`, face `k` at `z0 + k·hz`.
    vz: Vec<f64>,
    dt_hx: f64,
    dt_hz: f64,
    nu_hx: f64,
    nu_hz: f64,
    fx: Vec<f64>,
    fz: Vec<f64>,
}

impl Stepper {
    fn new(cfg: &FomConfig, grid: &Grid) -> Self {
        let (nx, nz) = (grid.nx(), grid.nz());
        let [x0, z0] = cfg.origin;
        let mut vx = vec![0.0; (nx + 1) * nz];
        for iz in 0..nz {
            for k in 0..=nx {
                vx[iz * (nx + 1) + k] = cfg
                    .velocity
                    .at(x0 + k as f64 * grid.hx(), grid.z_center(iz))[0];
            }
        }
        let mut vz = vec![0.0; (nz + 1) * nx];
        for k in 0..=nz {
            for ix in 0..nx {
                vz[k * nx + ix] = cfg
                    .velocity
                    .at(grid.x_center(ix), z0 + k as f64 * grid.hz())[1];
            }
        }
        let periodic = cfg.boundary == Boundary::Periodic;
        if periodic {
            // The first and last faces coincide; make them bit-identical.
            for iz in 0..nz {
                vx[iz * (nx + 1)] = vx[iz * (nx + 1) + nx];
            }
            for ix in 0..nx {
                vz[ix] = vz[nz * nx + ix];
            }
        }
        Self {
            nx,
            nz,
            periodic,
            vx,
            vz,
            dt_hx: cfg.dt / grid.hx(),
            dt_hz: cfg.dt / grid.hz(),
            nu_hx: cfg.diffusivity / grid.hx(),
            nu_hz: cfg.diffusivity / grid.hz(),
            fx: vec![0.0; (nx + 1) * nz],
            fz: vec![0.0; (nz + 1) * nx],
        }
    }

    fn step(&mut self, u: &mut [f64]) {
        let (nx, nz) = (self.nx, self.nz);
        for iz in 0..nz {
            let row = &u[iz * nx..(iz + 1) * nx];
            for k in 0..=nx {
                let (l, r) = if self.periodic {
                    ((k + nx - 1) % nx, k % nx)
                } else {
                    (k.saturating_sub(1), k.min(nx - 1))
                };
                let nu = if !self.periodic && (k == 0 || k == nx) {
                    0.0
                } else {
                    self.nu_hx
                };
                self.fx[iz * (nx + 1) + k] =
                    face_flux(row[l], row[r], self.vx[iz * (nx + 1) + k], nu);
            }
        }
        for k in 0..=nz {
            let (b, t) = if self.periodic {
                ((k + nz - 1) % nz, k % nz)
            } else {
                (k.saturating_sub(1), k.min(nz - 1))
            };
            let nu = if !self.periodic && (k == 0 || k == nz) {
                0.0
            } else {
                self.nu_hz
            };
            for ix in 0..nx {
                self.fz[k * nx + ix] =
                    face_flux(u[b * nx + ix], u[t * nx + ix], self.vz[k * nx + ix], nu);
            }
        }
        for iz in 0..nz {
            for ix in 0..nx {
                let fx = &self.fx[iz * (nx + 1)..];
                let div_x = fx[ix + 1] - fx[ix];
                let div_z = self.fz[(iz + 1) * nx + ix] - self.fz[iz * nx + ix];
                u[iz * nx + ix] -= self.dt_hx * div_x + self.dt_hz * div_z;
            }
        }
    }
}

/// Integrates the advection-diffusion equation from the Gaussian initial
/// condition, saving every `save_stride` steps.
pub fn simulate(cfg: &FomConfig) -> Result<Trajectory, FomError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let n_steps = cfg.n_steps()?;
    let mut u = cfg.initial_field()?;
    let mut stepper = Stepper::new(cfg, &grid);
    let mut fields = Vec::with_capacity(n_steps / cfg.save_stride + 1);
    fields.push(u.clone());
    for s in 1..=n_steps {
        stepper.step(&mut u);
        if s % cfg.save_stride == 0 {
            fields.push(u.clone());
        }
    }
    Ok(Trajectory::new(grid, cfg.save_dt(), fields)?)
}

/// Exact translating (and, with diffusion, spreading) Gaussian on the grid at
/// the same save times as [`simulate`].
pub fn analytic_gaussian(cfg: &FomConfig) -> Result<Trajectory, FomError> {
    let Velocity::Constant { vx, vz } = cfg.velocity else {
        return Err(FomError::UnsupportedSpec(
            "analytic solution needs a constant velocity".into(),
        ));
    };
    let n = cfg.n_snapshots()?;
    let grid = cfg.grid()?;
    let save_dt = cfg.save_dt();
    let fields = (0..n)
        .map(|k| {
            let t = k as f64 * save_dt;
            cfg.gaussian_field(&grid, [vx * t, vz * t], 2.0 * cfg.diffusivity * t)
        })
        .collect();
    Ok(Trajectory::new(grid, save_dt, fields)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base() -> FomConfig {
        FomConfig {
            nx: 32,
            nz: 32,
            hx: 1.0 / 32.0,
            hz: 1.0 / 32.0,
            origin: [0.0, 0.0],
            velocity: Velocity::Constant { vx: 1.0, vz: 0.0 },
            diffusivity: 0.0,
            blobs: vec![Blob {
                center: [0.3, 0.5],
                sigma: 0.1,
                amplitude: 1.0,
            }],
            dt: 1.0 / 128.0,
            t_final: 0.25,
            save_stride: 4,
            boundary: Boundary::Periodic,
        }
    }

    #[test]
    fn stationary_field_is_unchanged() {
        let cfg = FomConfig {
            velocity: Velocity::Constant { vx: 0.0, vz: 0.0 },
            ..base()
        };
        let traj = simulate(&cfg).unwrap();
        let init = cfg.initial_field().unwrap();
        assert_eq!(traj.len(), 9);
        for k in 0..traj.len() {
            assert_eq!(traj.field(k), &init[..]);
        }
    }

    #[test]
    fn config_checks() {
        let cfg = FomConfig {
            dt: 0.05,
            t_final: 1.0,
            ..base()
        };
        assert!(matches!(cfg.validate(), Err(FomError::CflViolation { .. })));
        let cfg = FomConfig {
            diffusivity: 1.0,
            ..base()
        };
        assert!(matches!(
            cfg.validate(),
            Err(FomError::DiffusionLimit { .. })
        ));
        let cfg = FomConfig {
            t_final: 0.25 + 1e-3,
            ..base()
        };
        assert!(matches!(cfg.validate(), Err(FomError::InvalidConfig(_))));
        let cfg = FomConfig {
            save_stride: 3,
            ..base()
        };
        assert!(matches!(cfg.validate(), Err(FomError::InvalidConfig(_))));
        let cfg = FomConfig {
            velocity: Velocity::Rotation {
                center: [0.5, 0.5],
                omega: 1.0,
            },
            ..base()
        };
        assert!(matches!(
            analytic_gaussian(&cfg),
            Err(FomError::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn analytic_peak_decays_with_spreading() {
        let cfg = FomConfig {
            velocity: Velocity::Constant { vx: 0.0, vz: 0.0 },
            diffusivity: 0.01,
            blobs: vec![Blob {
                center: [16.5 / 32.0, 16.5 / 32.0],
                sigma: 0.1,
                amplitude: 2.0,
            }],
            ..base()
        };
        let traj = analytic_gaussian(&cfg).unwrap();
        for k in 0..traj.len() {
            let t = traj.time(k);
            let peak = traj.field(k).iter().fold(f64::MIN, |a, b| a.max(*b));
            let expected = 2.0 * 0.01 / (0.01 + 2.0 * 0.01 * t);
            assert!((peak - expected).abs() < 1e-12, "{peak} vs {expected}");
        }
    }

    #[test]
    fn presets_are_valid() {
        for (n, k) in [(64, 65), (32, 17), (16, 5), (32, 2)] {
            let cfg = FomConfig::rotating_blob(n, k);
            cfg.validate().unwrap();
            assert_eq!(cfg.n_snapshots().unwrap(), k);
            assert!(cfg.cfl().unwrap() <= 0.45 + 1e-12);
            let cfg = FomConfig::translating_blob(n, 3.0, 8.0, k);
            cfg.validate().unwrap();
            assert_eq!(cfg.n_snapshots().unwrap(), k);
        }
        assert_eq!(FomConfig::rotating_blob(64, 65).dt, 1.0 / 320.0);
    }

    #[test]
    fn outflow_boundary_loses_mass() {
        let cfg = FomConfig {
            boundary: Boundary::Outflow,
            blobs: vec![Blob {
                center: [0.85, 0.5],
                sigma: 0.08,
                amplitude: 1.0,
            }],
            ..base()
        };
        let traj = simulate(&cfg).unwrap();
        let m0: f64 = traj.field(0).iter().sum();
        let m1: f64 = traj.field(traj.len() - 1).iter().sum();
        assert!(m1 < 0.8 * m0);
    }
}
