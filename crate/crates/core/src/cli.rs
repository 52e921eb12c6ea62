//! Command-line front end: `generate → train → infer → evaluate → sweep`.
//!
//! Every command reads a [`RunConfig`] and works inside its `work_dir`:
//!
//! | file | written by |
//! |------|------------|
//! | `reference.otrm`, `training.otrm` | `generate` |
//! | `model/` | `train` (plus `timing.csv`) |
//! | `infer_<t>.csv` | `infer` |
//! | `errors_*.csv`, `summary.csv`, `pod_modes.csv` | `evaluate` |
//! | `sweep.csv` | `sweep` |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::fomgen::{simulate, FomError};
use crate::io::{self, IoError};
use crate::measure::{Snapshot, Trajectory};
use crate::pod::{compute_pod, snapshot_matrix, ModeSelector, PodBasis};
use crate::rom::{error_metrics, train_timed, ErrorKind, ErrorReport, RomError, RomModel};

pub const THREADS_ENV: &str = "OTROM_THREADS";
pub const REFERENCE_FILE: &str = "reference.otrm";
pub const TRAINING_FILE: &str = "training.otrm";
pub const MODEL_DIR: &str = "model";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const POD_MODES_FILE: &str = "pod_modes.csv";

#[derive(Debug, Parser)]
#[command(
    name = "otrom",
    version,
    about = "Optimal-transport reduced-order models from sparse snapshot checkpoints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the reference (fine step) and training (coarse step) trajectories.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and save a model from the training trajectory.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Predict the snapshot at one time.
    Infer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        time: f64,
    },
    /// Discretization, interpolation, generalization and projection errors.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and evaluate over checkpoint counts at fixed dictionary size.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("missing artifact {}: run `{}` first", .path.display(), .producer)]
    MissingArtifact {
        path: PathBuf,
        producer: &'static str,
    },
    #[error("unreadable artifact {}: {}", .path.display(), .source)]
    InvalidArtifact { path: PathBuf, source: IoError },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Machine-readable category printed on failure.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config_error",
            CliError::InvalidArgument(_) => "invalid_argument",
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::InvalidArtifact { .. } => "invalid_artifact",
            CliError::Numerical(_) => "numerical_failure",
            CliError::Io(_) => "io_error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::InvalidArgument(_) => 2,
            CliError::MissingArtifact { .. } | CliError::InvalidArtifact { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<RomError> for CliError {
    fn from(e: RomError) -> Self {
        match e {
            RomError::TimeOutOfDomain { .. } => CliError::InvalidArgument(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FomError> for CliError {
    fn from(e: FomError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn write_err(path: &Path) -> impl FnOnce(IoError) -> CliError + '_ {
    move |e| CliError::Io(format!("writing {}: {e}", path.display()))
}

fn load_artifact<T>(
    path: PathBuf,
    producer: &'static str,
    load: impl FnOnce(&Path) -> Result<T, IoError>,
) -> Result<T, CliError> {
    load(&path).map_err(|source| {
        if source.is_not_found() {
            CliError::MissingArtifact { path, producer }
        } else {
            CliError::InvalidArtifact { path, source }
        }
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Shared inputs of the commands that work on generated data.
struct Workspace {
    cfg: RunConfig,
    dir: PathBuf,
}

impl Workspace {
    fn open(config: &Path) -> Result<Self, CliError> {
        let cfg = RunConfig::load(config)?;
        let dir = cfg.work_dir().to_path_buf();
        Ok(Self { cfg, dir })
    }

    fn ensure_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", self.dir.display())))
    }

    fn reference(&self) -> Result<Trajectory, CliError> {
        load_artifact(self.dir.join(REFERENCE_FILE), "generate", |p| {
            io::load_trajectory(p)
        })
    }

    fn training(&self) -> Result<Trajectory, CliError> {
        let traj = load_artifact(self.dir.join(TRAINING_FILE), "generate", |p| {
            io::load_trajectory(p)
        })?;
        let expected = self.cfg.n_training_snapshots()?;
        if traj.len() != expected {
            return Err(CliError::InvalidArtifact {
                path: self.dir.join(TRAINING_FILE),
                source: IoError::Malformed(format!(
                    "{} snapshots, config implies {expected}; rerun `generate`",
                    traj.len()
                )),
            });
        }
        Ok(traj)
    }

    fn model(&self) -> Result<RomModel, CliError> {
        load_artifact(self.dir.join(MODEL_DIR), "train", |p| io::load_model(p))
    }

    /// Training times and the test times between them (reference save points).
    fn protocol(
        &self,
        reference: &Trajectory,
        training: &Trajectory,
    ) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let every = self.cfg.eval.train_every;
        let train_times: Vec<f64> = (0..training.len()).map(|k| training.time(k)).collect();
        let steps = self.cfg.test_steps()?;
        let mut test_times = Vec::new();
        for k in 0..training.len().saturating_sub(1) {
            for &s in &steps {
                let idx = k * every + s;
                if idx >= reference.len() {
                    return Err(CliError::InvalidArtifact {
                        path: self.dir.join(REFERENCE_FILE),
                        source: IoError::Malformed(
                            "reference is shorter than the training protocol; rerun `generate`"
                                .into(),
                        ),
                    });
                }
                test_times.push(reference.time(idx));
            }
        }
        Ok((train_times, test_times))
    }
}

pub fn cmd_generate(config: &Path) -> Result<(), CliError> {
    let ws = Workspace::open(config)?;
    ws.ensure_dir()?;
    let reference = simulate(&ws.cfg.fom)?;
    let training = simulate(&ws.cfg.training_fom()?)?;
    for (name, traj) in [(REFERENCE_FILE, &reference), (TRAINING_FILE, &training)] {
        let path = ws.dir.join(name);
        io::save_trajectory(&path, traj).map_err(write_err(&path))?;
        info!(
            "wrote {} ({} snapshots, Δt_save = {})",
            path.display(),
            traj.len(),
            traj.dt()
        );
    }
    println!(
        "reference {} snapshots, training {} snapshots",
        reference.len(),
        training.len()
    );
    Ok(())
}

pub fn cmd_train(config: &Path) -> Result<(), CliError> {
    let ws = Workspace::open(config)?;
    let training = ws.training()?;
    let opts = ws.cfg.train_options(ws.cfg.rom.n_checkpoints)?;
    let (model, timings) = train_timed(&training, &opts)?;
    let dir = ws.dir.join(MODEL_DIR);
    io::save_model(&dir, &model).map_err(write_err(&dir))?;
    let mut csv = String::from("stage,seconds,percent\n");
    for (stage, secs, pct) in timings.breakdown() {
        info!("{stage:<10} {secs:>9.3} s {pct:>6.2} %");
        writeln!(csv, "{stage},{secs},{pct}").expect("write to string");
    }
    write_text(&ws.dir.join("timing.csv"), &csv)?;
    println!(
        "trained N_c = {} ({:?} mapping) in {:.3} s",
        model.n_checkpoints(),
        opts.mapping,
        timings.total().as_secs_f64()
    );
    Ok(())
}

fn time_label(t: f64) -> String {
    format!("{t}").replace('-', "m")
}

pub fn cmd_infer(config: &Path, t: f64) -> Result<(), CliError> {
    let ws = Workspace::open(config)?;
    if !t.is_finite() {
        return Err(CliError::InvalidArgument(format!("time {t} is not finite")));
    }
    let model = ws.model()?;
    let (i, alpha) = model.mapping.map_time(t)?;
    let plain = model.infer(t)?;
    let corrected = model
        .corrector
        .as_ref()
        .map(|_| model.infer_corrected(t))
        .transpose()?;
    let grid = *model.grid();
    let path = ws.dir.join(format!("infer_{}.csv", time_label(t)));
    let mut csv = String::from(if corrected.is_some() {
        "x,z,synthetic,corrected\n"
    } else {
        "x,z,synthetic\n"
    });
    for l in 0..grid.len() {
        let [x, z] = grid.cell_center(l);
        write!(csv, "{x:.16e},{z:.16e},{:.16e}", plain.values[l]).expect("write to string");
        if let Some(c) = &corrected {
            write!(csv, ",{:.16e}", c.values[l]).expect("write to string");
        }
        csv.push('\n');
    }
    write_text(&path, &csv)?;
    let shown: &Snapshot = corrected.as_ref().unwrap_or(&plain);
    println!(
        "t = {t}: interval {i}, alpha_local = {alpha:.6}, L1 = {:.6e}, L2 = {:.6e} -> {}",
        shown.l1_norm(),
        shown.l2_norm(),
        path.display()
    );
    Ok(())
}

fn export(dir: &Path, name: &str, report: &ErrorReport) -> Result<(), CliError> {
    let path = dir.join(name);
    io::export_error_report_csv(report, &path).map_err(write_err(&path))
}

fn projection_report(
    basis: &PodBasis,
    reference: &Trajectory,
    times: &[f64],
) -> Result<ErrorReport, CliError> {
    let errors = times
        .iter()
        .map(|&t| {
            let k = reference
                .index_of_time(t)
                .ok_or(RomError::MissingReferenceTime(t))?;
            basis
                .projection_error(reference.field(k))
                .map_err(|e| CliError::Numerical(format!("projection at t = {t}: {e}")))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(ErrorReport {
        kind: ErrorKind::Proj,
        times: times.to_vec(),
        errors,
    })
}

fn pod_of(columns: &[Vec<f64>], threshold: f64) -> Result<PodBasis, CliError> {
    let s = snapshot_matrix(columns).map_err(|e| CliError::Numerical(e.to_string()))?;
    compute_pod(&s, ModeSelector::Energy(threshold)).map_err(|e| CliError::Numerical(e.to_string()))
}

/// Mean errors of one trained model.
struct Evaluation {
    interp: ErrorReport,
    gen: ErrorReport,
    interp_corrected: Option<ErrorReport>,
    gen_corrected: Option<ErrorReport>,
}

fn evaluate_model(
    model: &RomModel,
    reference: &Trajectory,
    training: &Trajectory,
    train_times: &[f64],
    test_times: &[f64],
) -> Result<Evaluation, CliError> {
    if model.grid() != training.grid() || model.grid() != reference.grid() {
        return Err(CliError::Numerical(
            "model, training and reference grids differ; rerun `generate` and `train`".into(),
        ));
    }
    let interp = error_metrics(ErrorKind::Interp, training, train_times, |t| {
        Ok(model.infer(t)?.values)
    })?;
    let gen = error_metrics(ErrorKind::Gen, reference, test_times, |t| {
        Ok(model.infer(t)?.values)
    })?;
    let (interp_corrected, gen_corrected) = if model.corrector.is_some() {
        (
            Some(error_metrics(
                ErrorKind::Interp,
                training,
                train_times,
                |t| Ok(model.infer_corrected(t)?.values),
            )?),
            Some(error_metrics(ErrorKind::Gen, reference, test_times, |t| {
                Ok(model.infer_corrected(t)?.values)
            })?),
        )
    } else {
        (None, None)
    };
    Ok(Evaluation {
        interp,
        gen,
        interp_corrected,
        gen_corrected,
    })
}

pub fn cmd_evaluate(config: &Path) -> Result<(), CliError> {
    let ws = Workspace::open(config)?;
    let reference = ws.reference()?;
    let training = ws.training()?;
    let model = ws.model()?;
    let (train_times, test_times) = ws.protocol(&reference, &training)?;

    let disc = error_metrics(ErrorKind::Disc, &reference, &train_times, |t| {
        let k = training
            .index_of_time(t)
            .ok_or(RomError::MissingReferenceTime(t))?;
        Ok(training.field(k).to_vec())
    })?;
    let ev = evaluate_model(&model, &reference, &training, &train_times, &test_times)?;

    let threshold = ws.cfg.rom.pod_threshold;
    let dict = model
        .interpolation
        .generate_synthetic_matrix(model.options.n_synth)
        .map_err(RomError::from)?;
    let synth_basis = pod_of(&dict.columns, threshold)?;
    let check_cols: Vec<Vec<f64>> = model
        .interpolation
        .checkpoints()
        .iter()
        .map(|c| c.values.clone())
        .collect();
    let check_basis = pod_of(&check_cols, threshold)?;
    let proj_synth = projection_report(&synth_basis, &reference, &test_times)?;
    let proj_check = projection_report(&check_basis, &reference, &test_times)?;

    let mut rows: Vec<(&str, &ErrorReport)> = vec![
        ("errors_disc.csv", &disc),
        ("errors_interp.csv", &ev.interp),
        ("errors_gen.csv", &ev.gen),
        ("errors_proj_synth.csv", &proj_synth),
        ("errors_proj_check.csv", &proj_check),
    ];
    if let (Some(i), Some(g)) = (&ev.interp_corrected, &ev.gen_corrected) {
        rows.push(("errors_interp_corrected.csv", i));
        rows.push(("errors_gen_corrected.csv", g));
    }
    let mut summary = String::from("metric,kind,mean,max,count\n");
    for (name, report) in &rows {
        export(&ws.dir, name, report)?;
        let metric = name.trim_start_matches("errors_").trim_end_matches(".csv");
        writeln!(
            summary,
            "{metric},{},{:.16e},{:.16e},{}",
            report.kind.tag(),
            report.mean(),
            report.max(),
            report.len()
        )
        .expect("write to string");
        println!(
            "{metric:<18} mean {:.6e}  max {:.6e}",
            report.mean(),
            report.max()
        );
    }
    write_text(&ws.dir.join(SUMMARY_FILE), &summary)?;
    let modes = format!(
        "basis,modes,columns\nsynth,{},{}\ncheck,{},{}\n",
        synth_basis.n_modes(),
        dict.len(),
        check_basis.n_modes(),
        check_cols.len()
    );
    write_text(&ws.dir.join(POD_MODES_FILE), &modes)
}

pub fn cmd_sweep(config: &Path, checkpoints: Option<&[usize]>) -> Result<(), CliError> {
    let ws = Workspace::open(config)?;
    let list = match checkpoints {
        Some(l) => l.to_vec(),
        None => ws.cfg.sweep_checkpoints()?,
    };
    if list.is_empty() {
        return Err(CliError::InvalidArgument("empty checkpoint list".into()));
    }
    let reference = ws.reference()?;
    let training = ws.training()?;
    let n_t = training.len();
    for &nc in &list {
        if nc < 2 || nc > n_t || nc > ws.cfg.rom.n_total_synthetic {
            return Err(CliError::InvalidArgument(format!(
                "N_c = {nc} outside [2, min(N_T = {n_t}, N_tot = {})]",
                ws.cfg.rom.n_total_synthetic
            )));
        }
    }
    let (train_times, test_times) = ws.protocol(&reference, &training)?;
    let corrected = ws.cfg.rom.correction;
    let mut csv = String::from("n_checkpoints,n_total,n_synth,mean_interp,mean_gen");
    if corrected {
        csv.push_str(",mean_interp_corrected,mean_gen_corrected");
    }
    csv.push('\n');
    for &nc in &list {
        let opts = ws.cfg.train_options(nc)?;
        let (model, timings) = train_timed(&training, &opts)?;
        let ev = evaluate_model(&model, &reference, &training, &train_times, &test_times)?;
        write!(
            csv,
            "{nc},{},{},{:.16e},{:.16e}",
            ws.cfg.rom.n_total_synthetic,
            opts.n_synth,
            ev.interp.mean(),
            ev.gen.mean()
        )
        .expect("write to string");
        if let (Some(i), Some(g)) = (&ev.interp_corrected, &ev.gen_corrected) {
            write!(csv, ",{:.16e},{:.16e}", i.mean(), g.mean()).expect("write to string");
        }
        csv.push('\n');
        info!(
            "N_c = {nc}: trained in {:.3} s",
            timings.total().as_secs_f64()
        );
        println!(
            "N_c = {nc:>3}  n_synth = {:>4}  E_interp {:.6e}  E_gen {:.6e}",
            opts.n_synth,
            ev.interp.mean(),
            ev.gen.mean()
        );
    }
    ws.ensure_dir()?;
    write_text(&ws.dir.join(SWEEP_FILE), &csv)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { config } => cmd_generate(config),
        Command::Train { config } => cmd_train(config),
        Command::Infer { config, time } => cmd_infer(config, *time),
        Command::Evaluate { config } => cmd_evaluate(config),
        Command::Sweep {
            config,
            checkpoints,
        } => cmd_sweep(config, checkpoints.as_deref()),
    }
}

/// Caps the global rayon pool from `OTROM_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a positive integer"))
    })?;
    // A pool that already exists (e.g. in tests) keeps its size.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// One-line failure report: `error[<category>]: <message>`.
pub fn error_line(e: &CliError) -> String {
    let msg = e
        .to_string()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    format!("error[{}]: {msg}", e.category())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                eprintln!("error[invalid_argument]: {}", e.kind());
                return 2;
            }
            return 0;
        }
    };
    let threads = std::env::var(THREADS_ENV).ok();
    match configure_threads(threads.as_deref()).and_then(|_| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}
