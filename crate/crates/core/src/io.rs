//! Bit-exact persistence for trajectories, plans and trained models, plus CSV
//! export. All binary numbers are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpr::{GprError, GprModel, Hyperparameters};
use crate::interpolation::{
    DictionaryLabel, InterpolationError, InterpolationModel, IntervalModel, PartTransport,
};
use crate::measure::{DiscreteMeasure, Grid, MeasureError, Sign, Snapshot, Trajectory};
use crate::pod::{PodBasis, PodError};
use crate::rom::{
    AlphaRegressor, AlphaSample, CoefficientRegressor, ErrorReport, MappingKind, RegressorKind,
    ResidualCorrector, RomError, RomModel, TimeAlphaMapping, TrainOptions,
};
use crate::transport::{PlanEntries, TransportError, TransportPlan};

pub const TRAJECTORY_MAGIC: [u8; 4] = *b"OTRM";
pub const PLAN_MAGIC: [u8; 4] = *b"OTPL";
pub const MEASURE_MAGIC: [u8; 4] = *b"OTMS";
pub const MATRIX_MAGIC: [u8; 4] = *b"OTMX";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("malformed artifact: {0}")]
    Malformed(String),
    #[error("cannot export an empty error report")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    ManifestRead(#[from] toml::de::Error),
    #[error("manifest: {0}")]
    ManifestWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Gpr(#[from] GprError),
    #[error(transparent)]
    Rom(#[from] RomError),
}

impl IoError {
    /// True when the underlying cause is a file that does not exist.
    pub fn is_not_found(&self) -> bool {
        matches!(self, IoError::Io(e) if e.kind() == std::io::ErrorKind::NotFound)
    }
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn new(magic: [u8; 4]) -> Self {
        let mut e = Self(magic.to_vec());
        e.u32(FORMAT_VERSION);
        e
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.0.reserve(8 * v.len());
        for x in v {
            self.f64(*x);
        }
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8], magic: [u8; 4]) -> Result<Self, IoError> {
        let mut d = Self { buf, pos: 0 };
        let found: [u8; 4] = d.take(4)?.try_into().expect("four bytes");
        if found != magic {
            return Err(IoError::BadMagic {
                expected: magic,
                found,
            });
        }
        let version = d.u32()?;
        if version != FORMAT_VERSION {
            return Err(IoError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(d)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(IoError::TruncatedFile {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("four bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("eight bytes"),
        ))
    }
    fn len(&mut self) -> Result<usize, IoError> {
        let v = self.u64()?;
        usize::try_from(v)
            .map_err(|_| IoError::Malformed(format!("count {v} does not fit in memory")))
    }
    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("eight bytes"),
        ))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, IoError> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| IoError::Malformed("length overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect())
    }
    fn finish(self) -> Result<(), IoError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(IoError::TrailingBytes(n)),
        }
    }
}

fn encode_grid(e: &mut Encoder, g: &Grid) {
    e.len(g.nx());
    e.len(g.nz());
    e.f64(g.hx());
    e.f64(g.hz());
    e.f64(g.origin().0);
    e.f64(g.origin().1);
}

fn decode_grid(d: &mut Decoder) -> Result<Grid, IoError> {
    let (nx, nz) = (d.len()?, d.len()?);
    let (hx, hz, x0, z0) = (d.f64()?, d.f64()?, d.f64()?, d.f64()?);
    Ok(Grid::new(nx, nz, hx, hz, (x0, z0))?)
}

/// Header `OTRM, version, nx, nz, hx, hz, x0, z0, N_T, dt, t_f`, then the
/// fields in time-major order.
pub fn encode_trajectory(traj: &Trajectory) -> Vec<u8> {
    let mut e = Encoder::new(TRAJECTORY_MAGIC);
    encode_grid(&mut e, traj.grid());
    e.len(traj.len());
    e.f64(traj.dt());
    e.f64(traj.t_final());
    for f in traj.fields() {
        e.f64s(f);
    }
    e.0
}

pub fn decode_trajectory(buf: &[u8]) -> Result<Trajectory, IoError> {
    let mut d = Decoder::new(buf, TRAJECTORY_MAGIC)?;
    let grid = decode_grid(&mut d)?;
    let n = d.len()?;
    let dt = d.f64()?;
    let t_final = d.f64()?;
    let fields = (0..n)
        .map(|_| d.f64s(grid.len()))
        .collect::<Result<Vec<_>, _>>()?;
    d.finish()?;
    let traj = Trajectory::new(grid, dt, fields)?;
    if traj.t_final().to_bits() != t_final.to_bits() {
        return Err(IoError::Malformed(format!(
            "header t_f {t_final} disagrees with (N_T - 1)·dt = {}",
            traj.t_final()
        )));
    }
    Ok(traj)
}

pub fn save_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), IoError> {
    Ok(fs::write(path, encode_trajectory(traj))?)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, IoError> {
    decode_trajectory(&fs::read(path)?)
}

const PLAN_DENSE: u32 = 0;
const PLAN_SPARSE: u32 = 1;

/// Plans are stored as `(row, col, value)` triplets. A dense plan keeps its
/// storage flag and only its nonzero entries; zeros are refilled on load.
pub fn encode_plan(plan: &TransportPlan) -> Vec<u8> {
    let mut e = Encoder::new(PLAN_MAGIC);
    e.len(plan.rows());
    e.len(plan.cols());
    e.f64(plan.epsilon_used());
    e.len(plan.iterations());
    e.f64(plan.marginal_violation());
    let (flag, triplets): (u32, Vec<(u32, u32, f64)>) = match plan.storage() {
        PlanEntries::Dense(v) => (
            PLAN_DENSE,
            v.iter()
                .enumerate()
                .filter(|(_, x)| x.to_bits() != 0)
                .map(|(k, x)| ((k / plan.cols()) as u32, (k % plan.cols()) as u32, *x))
                .collect(),
        ),
        PlanEntries::Sparse(t) => (PLAN_SPARSE, t.clone()),
    };
    e.u32(flag);
    e.len(triplets.len());
    for (i, j, v) in triplets {
        e.u32(i);
        e.u32(j);
        e.f64(v);
    }
    e.0
}

pub fn decode_plan(buf: &[u8]) -> Result<TransportPlan, IoError> {
    let mut d = Decoder::new(buf, PLAN_MAGIC)?;
    let (rows, cols) = (d.len()?, d.len()?);
    let eps = d.f64()?;
    let iterations = d.len()?;
    let violation = d.f64()?;
    let flag = d.u32()?;
    let nnz = d.len()?;
    let mut triplets = Vec::with_capacity(nnz.min(buf.len() / 16));
    for _ in 0..nnz {
        triplets.push((d.u32()?, d.u32()?, d.f64()?));
    }
    d.finish()?;
    let entries = match flag {
        PLAN_SPARSE => PlanEntries::Sparse(triplets),
        PLAN_DENSE => {
            let mut v = vec![
                0.0;
                rows.checked_mul(cols)
                    .ok_or_else(|| IoError::Malformed("plan size overflow".into()))?
            ];
            for (i, j, x) in triplets {
                let (i, j) = (i as usize, j as usize);
                if i >= rows || j >= cols {
                    return Err(IoError::Malformed(format!(
                        "entry ({i},{j}) outside {rows}x{cols}"
                    )));
                }
                v[i * cols + j] = x;
            }
            PlanEntries::Dense(v)
        }
        f => return Err(IoError::Malformed(format!("unknown plan storage flag {f}"))),
    };
    Ok(TransportPlan::from_parts(
        rows, cols, entries, eps, iterations, violation,
    )?)
}

pub fn save_plan(path: impl AsRef<Path>, plan: &TransportPlan) -> Result<(), IoError> {
    Ok(fs::write(path, encode_plan(plan))?)
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<TransportPlan, IoError> {
    decode_plan(&fs::read(path)?)
}

fn encode_measure(e: &mut Encoder, m: &DiscreteMeasure) {
    e.f64(m.mass());
    e.len(m.len());
    for &s in m.support() {
        e.len(s);
    }
    e.f64s(m.weights());
}

fn decode_measure(d: &mut Decoder) -> Result<DiscreteMeasure, IoError> {
    let mass = d.f64()?;
    let n = d.len()?;
    let support = (0..n).map(|_| d.len()).collect::<Result<Vec<_>, _>>()?;
    let weights = d.f64s(n)?;
    Ok(DiscreteMeasure::from_parts(support, weights, mass)?)
}

/// Column-major `rows × cols` matrix of f64.
pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut e = Encoder::new(MATRIX_MAGIC);
    e.len(m.nrows());
    e.len(m.ncols());
    e.f64s(m.as_slice());
    e.0
}

pub fn decode_matrix(buf: &[u8]) -> Result<DMatrix<f64>, IoError> {
    let mut d = Decoder::new(buf, MATRIX_MAGIC)?;
    let (rows, cols) = (d.len()?, d.len()?);
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| IoError::Malformed("matrix size overflow".into()))?;
    let data = d.f64s(n)?;
    d.finish()?;
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn save_matrix(path: &Path, m: &DMatrix<f64>) -> Result<(), IoError> {
    Ok(fs::write(path, encode_matrix(m))?)
}

fn load_matrix(path: &Path) -> Result<DMatrix<f64>, IoError> {
    decode_matrix(&fs::read(path)?)
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridManifest {
    nx: usize,
    nz: usize,
    hx: f64,
    hz: f64,
    origin: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartManifest {
    interval: usize,
    sign: String,
    mass_left: f64,
    mass_right: f64,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleManifest {
    time: f64,
    alpha_global: f64,
    interval: usize,
    step: usize,
    residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpManifest {
    prior_mean: f64,
    hyperparameters: Hyperparameters,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingManifest {
    kind: MappingKind,
    regressor: Option<RegressorKind>,
    /// Present for a GP regressor; its data lives in `alpha_gp.bin`.
    gp: Option<GpManifest>,
    knot_times: Option<Vec<f64>>,
    knot_alphas: Option<Vec<f64>>,
    samples: Vec<SampleManifest>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientManifest {
    offset: f64,
    scale: f64,
    gp: GpManifest,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectorManifest {
    singular_values: Vec<f64>,
    energy_threshold: Option<f64>,
    time_scale: f64,
    coefficients: Vec<CoefficientManifest>,
}

/// Human-readable description of a model directory; bulk arrays live in the
/// binary files it names.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    n_checkpoints: usize,
    checkpoint_indices: Vec<usize>,
    checkpoint_times: Vec<f64>,
    grid: GridManifest,
    options: TrainOptions,
    mapping: MappingManifest,
    parts: Vec<PartManifest>,
    corrector: Option<CorrectorManifest>,
}

const CHECKPOINTS_FILE: &str = "checkpoints.bin";
const ALPHA_GP_FILE: &str = "alpha_gp.bin";
const RESIDUAL_MODES_FILE: &str = "residual_modes.bin";
const RESIDUAL_GP_FILE: &str = "residual_gp.bin";

fn gp_data(gp: &GprModel) -> DMatrix<f64> {
    let n = gp.train_x().len();
    DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            gp.train_x()[i]
        } else {
            gp.train_y()[i]
        }
    })
}

fn sign_tag(s: Sign) -> &'static str {
    s.tag()
}

fn parse_sign(s: &str) -> Result<Sign, IoError> {
    [Sign::Positive, Sign::Negative]
        .into_iter()
        .find(|x| x.tag() == s)
        .ok_or_else(|| IoError::Malformed(format!("unknown sign {s:?}")))
}

/// Writes `model` into `dir` (created if missing): a TOML manifest, one file
/// per transported part (measures plus plan), checkpoints, and the GP data.
pub fn save_model(dir: impl AsRef<Path>, model: &RomModel) -> Result<(), IoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let interp = &model.interpolation;
    let grid = interp.grid();
    let cps = interp.checkpoints();
    save_matrix(
        &dir.join(CHECKPOINTS_FILE),
        &DMatrix::from_fn(grid.len(), cps.len(), |l, c| cps[c].values[l]),
    )?;

    let mut parts = Vec::new();
    for (i, iv) in interp.intervals().iter().enumerate() {
        for p in iv.parts() {
            let file = format!("interval_{i}_{}.part", sign_tag(p.sign));
            let mut e = Encoder::new(MEASURE_MAGIC);
            encode_measure(&mut e, &p.source);
            encode_measure(&mut e, &p.target);
            fs::write(dir.join(&file), e.0)?;
            save_plan(
                dir.join(format!("interval_{i}_{}.plan", sign_tag(p.sign))),
                &p.plan,
            )?;
            parts.push(PartManifest {
                interval: i,
                sign: sign_tag(p.sign).into(),
                mass_left: p.mass_left,
                mass_right: p.mass_right,
                file,
            });
        }
    }

    let m = &model.mapping;
    let mut mapping = MappingManifest {
        kind: m.kind(),
        regressor: m.regressor().map(|r| r.kind()),
        gp: None,
        knot_times: None,
        knot_alphas: None,
        samples: m
            .samples()
            .iter()
            .map(|s| SampleManifest {
                time: s.time,
                alpha_global: s.alpha_global,
                interval: s.label.interval,
                step: s.label.step,
                residual: s.residual,
            })
            .collect(),
    };
    match m.regressor() {
        Some(AlphaRegressor::Gpr(gp)) => {
            mapping.gp = Some(GpManifest {
                prior_mean: gp.prior_mean(),
                hyperparameters: gp.hyperparameters(),
            });
            save_matrix(&dir.join(ALPHA_GP_FILE), &gp_data(gp))?;
        }
        Some(AlphaRegressor::PiecewiseLinear { times, alphas }) => {
            mapping.knot_times = Some(times.clone());
            mapping.knot_alphas = Some(alphas.clone());
        }
        None => {}
    }

    let corrector = match &model.corrector {
        None => None,
        Some(c) => {
            save_matrix(&dir.join(RESIDUAL_MODES_FILE), c.basis.modes())?;
            if let Some(first) = c.regressors.first() {
                let x = first.gp.train_x();
                let mut data = DMatrix::zeros(x.len(), 1 + c.regressors.len());
                data.column_mut(0).copy_from_slice(x);
                for (r, reg) in c.regressors.iter().enumerate() {
                    if reg.gp.train_x() != x {
                        return Err(IoError::Malformed(
                            "residual regressors disagree on training inputs".into(),
                        ));
                    }
                    data.column_mut(r + 1).copy_from_slice(reg.gp.train_y());
                }
                save_matrix(&dir.join(RESIDUAL_GP_FILE), &data)?;
            }
            Some(CorrectorManifest {
                singular_values: c.basis.singular_values().to_vec(),
                energy_threshold: c.basis.energy_threshold(),
                time_scale: c.time_scale,
                coefficients: c
                    .regressors
                    .iter()
                    .map(|r| CoefficientManifest {
                        offset: r.offset,
                        scale: r.scale,
                        gp: GpManifest {
                            prior_mean: r.gp.prior_mean(),
                            hyperparameters: r.gp.hyperparameters(),
                        },
                    })
                    .collect(),
            })
        }
    };

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n_checkpoints: model.n_checkpoints(),
        checkpoint_indices: model.checkpoint_indices.clone(),
        checkpoint_times: cps.iter().map(|c| c.time).collect(),
        grid: GridManifest {
            nx: grid.nx(),
            nz: grid.nz(),
            hx: grid.hx(),
            hz: grid.hz(),
            origin: [grid.origin().0, grid.origin().1],
        },
        options: model.options,
        mapping,
        parts,
        corrector,
    };
    Ok(fs::write(
        dir.join(MANIFEST_FILE),
        toml::to_string(&manifest)?,
    )?)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<RomModel, IoError> {
    let dir = dir.as_ref();
    let manifest: Manifest = toml::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(IoError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let g = &manifest.grid;
    let grid = Grid::new(g.nx, g.nz, g.hx, g.hz, (g.origin[0], g.origin[1]))?;
    let nc = manifest.n_checkpoints;
    if manifest.checkpoint_times.len() != nc || manifest.checkpoint_indices.len() != nc {
        return Err(IoError::Malformed(format!(
            "{nc} checkpoints declared, times/indices disagree"
        )));
    }
    let cp = load_matrix(&dir.join(CHECKPOINTS_FILE))?;
    if cp.shape() != (grid.len(), nc) {
        return Err(IoError::Malformed(format!(
            "checkpoint matrix is {:?}, expected {:?}",
            cp.shape(),
            (grid.len(), nc)
        )));
    }
    let checkpoints: Vec<Snapshot> = columns(&cp)
        .into_iter()
        .zip(&manifest.checkpoint_times)
        .map(|(v, &t)| Snapshot::new(t, v))
        .collect();

    let mut intervals = vec![
        IntervalModel {
            positive: None,
            negative: None
        };
        nc.saturating_sub(1)
    ];
    for p in &manifest.parts {
        let sign = parse_sign(&p.sign)?;
        let slot = intervals
            .get_mut(p.interval)
            .ok_or_else(|| IoError::Malformed(format!("part for interval {}", p.interval)))?;
        let buf = fs::read(dir.join(&p.file))?;
        let mut d = Decoder::new(&buf, MEASURE_MAGIC)?;
        let source = decode_measure(&mut d)?;
        let target = decode_measure(&mut d)?;
        d.finish()?;
        let plan = load_plan(dir.join(format!("interval_{}_{}.plan", p.interval, p.sign)))?;
        let part = PartTransport {
            sign,
            mass_left: p.mass_left,
            mass_right: p.mass_right,
            source,
            target,
            plan,
        };
        match sign {
            Sign::Positive => slot.positive = Some(part),
            Sign::Negative => slot.negative = Some(part),
        }
    }
    let interpolation = InterpolationModel::from_parts(grid, checkpoints, intervals)?;

    let load_gp = |file: &str, col: usize, gm: &GpManifest| -> Result<GprModel, IoError> {
        let data = load_matrix(&dir.join(file))?;
        if data.ncols() <= col {
            return Err(IoError::Malformed(format!(
                "{file} has {} columns, need {}",
                data.ncols(),
                col + 1
            )));
        }
        let x: Vec<f64> = data.column(0).iter().copied().collect();
        let y: Vec<f64> = data.column(col).iter().copied().collect();
        Ok(GprModel::from_parts(
            &x,
            &y,
            gm.prior_mean,
            gm.hyperparameters,
        )?)
    };

    let mm = &manifest.mapping;
    let mapping = match mm.kind {
        MappingKind::Linear => TimeAlphaMapping::linear(manifest.checkpoint_times.clone())?,
        MappingKind::MinL2 => {
            let regressor = match (mm.regressor, &mm.gp, &mm.knot_times, &mm.knot_alphas) {
                (Some(RegressorKind::Gpr), Some(gm), _, _) => {
                    AlphaRegressor::Gpr(load_gp(ALPHA_GP_FILE, 1, gm)?)
                }
                (Some(RegressorKind::PiecewiseLinear), _, Some(t), Some(a))
                    if t.len() == a.len() && !t.is_empty() =>
                {
                    AlphaRegressor::PiecewiseLinear {
                        times: t.clone(),
                        alphas: a.clone(),
                    }
                }
                _ => {
                    return Err(IoError::Malformed(
                        "MinL2 mapping without a complete regressor".into(),
                    ))
                }
            };
            let samples = mm
                .samples
                .iter()
                .map(|s| AlphaSample {
                    time: s.time,
                    alpha_global: s.alpha_global,
                    label: DictionaryLabel {
                        interval: s.interval,
                        step: s.step,
                    },
                    residual: s.residual,
                })
                .collect();
            TimeAlphaMapping::minl2(manifest.checkpoint_times.clone(), regressor, samples)?
        }
    };

    let corrector = match &manifest.corrector {
        None => None,
        Some(c) => {
            let modes = load_matrix(&dir.join(RESIDUAL_MODES_FILE))?;
            if modes.nrows() != grid.len() || modes.ncols() != c.coefficients.len() {
                return Err(IoError::Malformed(format!(
                    "residual modes are {:?} for {} coefficients",
                    modes.shape(),
                    c.coefficients.len()
                )));
            }
            let basis = PodBasis::from_parts(modes, c.singular_values.clone(), c.energy_threshold)?;
            let regressors = c
                .coefficients
                .iter()
                .enumerate()
                .map(|(r, cm)| {
                    Ok(CoefficientRegressor {
                        gp: load_gp(RESIDUAL_GP_FILE, r + 1, &cm.gp)?,
                        offset: cm.offset,
                        scale: cm.scale,
                    })
                })
                .collect::<Result<Vec<_>, IoError>>()?;
            Some(ResidualCorrector {
                basis,
                regressors,
                time_scale: c.time_scale,
            })
        }
    };

    Ok(RomModel {
        checkpoint_indices: manifest.checkpoint_indices,
        interpolation,
        mapping,
        corrector,
        options: manifest.options,
    })
}

/// 17 significant digits, scientific notation.
fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// `time,error,kind` rows followed by `mean,<value>,<kind>`.
pub fn error_report_csv(report: &ErrorReport) -> Result<String, IoError> {
    if report.is_empty() {
        return Err(IoError::EmptyReport);
    }
    let kind = report.kind.tag();
    let mut s = String::from("time,error,kind\n");
    for (t, e) in report.times.iter().zip(&report.errors) {
        s.push_str(&format!("{},{},{kind}\n", fmt17(*t), fmt17(*e)));
    }
    s.push_str(&format!("mean,{},{kind}\n", fmt17(report.mean())));
    Ok(s)
}

pub fn export_error_report_csv(
    report: &ErrorReport,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let csv = error_report_csv(report)?;
    Ok(fs::write(path, csv)?)
}

/// `x,z,value` per cell center.
pub fn export_snapshot_csv(
    grid: &Grid,
    snapshot: &Snapshot,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    snapshot.validate(grid)?;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "x,z,value")?;
    for (l, v) in snapshot.values.iter().enumerate() {
        let [x, z] = grid.cell_center(l);
        writeln!(out, "{},{},{}", fmt17(x), fmt17(z), fmt17(*v))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::ErrorKind;

    fn traj() -> Trajectory {
        let grid = Grid::new(3, 2, 0.5, 0.25, (0.25, -1.0)).unwrap();
        let fields = (0..3)
            .map(|k| (0..6).map(|l| (k * 6 + l) as f64 * 0.1 - 0.7).collect())
            .collect();
        Trajectory::new(grid, 0.125, fields).unwrap()
    }

    #[test]
    fn trajectory_round_trip() {
        let t = traj();
        let bytes = encode_trajectory(&t);
        assert_eq!(&bytes[..4], b"OTRM");
        assert_eq!(bytes.len(), 8 + 2 * 8 + 4 * 8 + 8 + 2 * 8 + 3 * 6 * 8);
        assert_eq!(decode_trajectory(&bytes).unwrap(), t);
    }

    #[test]
    fn trajectory_corruption() {
        let bytes = encode_trajectory(&traj());
        assert!(matches!(
            decode_trajectory(&bytes[..bytes.len() - 3]),
            Err(IoError::TruncatedFile { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_trajectory(&bad),
            Err(IoError::BadMagic { .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_trajectory(&bad),
            Err(IoError::VersionMismatch { found: 9, .. })
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            decode_trajectory(&long),
            Err(IoError::TrailingBytes(1))
        ));
    }

    #[test]
    fn csv_layout() {
        let r = ErrorReport {
            kind: ErrorKind::Interp,
            times: vec![0.0, 0.5],
            errors: vec![0.1, 0.2],
        };
        let csv = error_report_csv(&r).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "time,error,kind");
        assert!(lines[3].starts_with("mean,") && lines[3].ends_with(",interp"));
        let mean: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean, r.mean());
        let empty = ErrorReport {
            kind: ErrorKind::Gen,
            times: vec![],
            errors: vec![],
        };
        assert!(matches!(
            error_report_csv(&empty),
            Err(IoError::EmptyReport)
        ));
    }
}
