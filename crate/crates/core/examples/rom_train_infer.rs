//! Trains the reduced model with the linear and the MinL2 time mapping and
//! compares training and generalization errors.
//!
//! cargo run --example rom_train_infer

use otrom::fomgen::{simulate, FomConfig};
use otrom::measure::Trajectory;
use otrom::rom::{
    error_metrics, n_synth_for_total, train_timed, ErrorKind, MappingKind, TrainOptions,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Reference saved twice as often as the training data.
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

    for mapping in [MappingKind::Linear, MappingKind::MinL2] {
        let opts = TrainOptions {
            n_checkpoints: 3,
            mapping,
            n_synth: n_synth_for_total(33, 3)?,
            ..Default::default()
        };
        let (model, timings) = train_timed(&training, &opts)?;
        let interp = error_metrics(ErrorKind::Interp, &training, &train_times, |t| {
            Ok(model.infer(t)?.values)
        })?;
        let gen = error_metrics(ErrorKind::Gen, &reference, &test_times, |t| {
            Ok(model.infer(t)?.values)
        })?;
        println!(
            "{:<6} trained in {:.2} s: mean E_interp {:.3e}, mean E_gen {:.3e}",
            mapping.tag(),
            timings.total().as_secs_f64(),
            interp.mean(),
            gen.mean()
        );
        for t in [0.25, 0.5, 0.75] {
            let (i, alpha) = model.mapping.map_time(t)?;
            println!("  t = {t}: interval {i}, α = {alpha:.4}");
        }
    }
    Ok(())
}
