//! Adds the POD + GP residual corrector on top of a MinL2 model and reports
//! the error with and without it.
//!
//! cargo run --example residual_correction

use otrom::fomgen::{simulate, FomConfig};
use otrom::measure::Trajectory;
use otrom::rom::{error_metrics, n_synth_for_total, train, ErrorKind, MappingKind, TrainOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = simulate(&FomConfig::rotating_blob(32, 33))?;
    let fields = (0..reference.len())
        .step_by(2)
        .map(|k| reference.field(k).to_vec())
        .collect();
    let training = Trajectory::new(*reference.grid(), 2.0 * reference.dt(), fields)?;
    let train_times: Vec<f64> = (0..training.len()).map(|k| training.time(k)).collect();
    let test_times: Vec<f64> = (1..reference.len())
        .step_by(2)
        .map(|k| reference.time(k))
        .collect();

    for nc in [3, 5] {
        let opts = TrainOptions {
            n_checkpoints: nc,
            mapping: MappingKind::MinL2,
            n_synth: n_synth_for_total(33, nc)?,
            correction: true,
            ..Default::default()
        };
        let model = train(&training, &opts)?;
        let corrector = model.corrector.as_ref().expect("correction requested");
        println!(
            "N_c = {nc}: {} residual modes (retained energy {:.6})",
            corrector.basis.n_modes(),
            corrector.basis.retained_energy()
        );
        for (kind, traj, times) in [
            (ErrorKind::Interp, &training, &train_times),
            (ErrorKind::Gen, &reference, &test_times),
        ] {
            let plain = error_metrics(kind, traj, times, |t| Ok(model.infer(t)?.values))?;
            let corrected =
                error_metrics(kind, traj, times, |t| Ok(model.infer_corrected(t)?.values))?;
            println!(
                "  {:<6} mean {:.3e} -> corrected {:.3e}",
                kind.tag(),
                plain.mean(),
                corrected.mean()
            );
        }
    }
    Ok(())
}
