//! Mean interpolation error as the number of checkpoints grows with the
//! dictionary size held fixed, and the augmented-vs-checkpoint POD comparison.
//!
//! cargo run --example checkpoint_sweep

use otrom::fomgen::{simulate, FomConfig};
use otrom::pod::{compute_pod, snapshot_matrix, ModeSelector, DEFAULT_ENERGY_THRESHOLD};
use otrom::rom::{error_metrics, n_synth_for_total, train, ErrorKind, TrainOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = simulate(&FomConfig::rotating_blob(32, 17))?;
    let times: Vec<f64> = (0..traj.len()).map(|k| traj.time(k)).collect();
    let n_total = traj.len();
    println!("N_c  n_synth  mean E_interp  POD modes (synthetic / checkpoints)");
    for nc in [2, 3, 5, 9, 17] {
        let n_synth = n_synth_for_total(n_total, nc)?;
        let model = train(
            &traj,
            &TrainOptions {
                n_checkpoints: nc,
                n_synth,
                ..Default::default()
            },
        )?;
        let report = error_metrics(ErrorKind::Interp, &traj, &times, |t| {
            Ok(model.infer(t)?.values)
        })?;
        let dict = model.interpolation.generate_synthetic_matrix(n_synth)?;
        let checks: Vec<Vec<f64>> = model
            .interpolation
            .checkpoints()
            .iter()
            .map(|c| c.values.clone())
            .collect();
        let modes = |cols: &[Vec<f64>]| -> Result<usize, Box<dyn std::error::Error>> {
            Ok(compute_pod(
                &snapshot_matrix(cols)?,
                ModeSelector::Energy(DEFAULT_ENERGY_THRESHOLD),
            )?
            .n_modes())
        };
        println!(
            "{nc:<4} {n_synth:<8} {:<14.3e} {} / {}",
            report.mean(),
            modes(&dict.columns)?,
            modes(&checks)?
        );
    }
    Ok(())
}
