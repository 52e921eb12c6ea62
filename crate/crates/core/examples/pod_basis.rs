//! POD of a rotating-blob snapshot matrix: energy spectrum, mode count at a
//! threshold, and projection error of a held-out snapshot.
//!
//! cargo run --example pod_basis

use otrom::fomgen::{simulate, FomConfig};
use otrom::pod::{compute_pod, snapshot_matrix, ModeSelector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = simulate(&FomConfig::rotating_blob(32, 33))?;
    // Even snapshots train the basis, odd ones test it.
    let train: Vec<Vec<f64>> = (0..traj.len())
        .step_by(2)
        .map(|k| traj.field(k).to_vec())
        .collect();
    let s = snapshot_matrix(&train)?;

    for threshold in [0.9, 0.99, 0.9999] {
        let pod = compute_pod(&s, ModeSelector::Energy(threshold))?;
        let held_out = (1..traj.len())
            .step_by(2)
            .map(|k| pod.projection_error(traj.field(k)))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = held_out.iter().sum::<f64>() / held_out.len() as f64;
        println!(
            "E >= {threshold:<6}: {:>2} modes, retained {:.6}, mean held-out error {mean:.3e}",
            pod.n_modes(),
            pod.retained_energy()
        );
    }
    let full = compute_pod(&s, ModeSelector::Rank(train.len()))?;
    let sv: Vec<String> = full
        .singular_values()
        .iter()
        .take(8)
        .map(|v| format!("{v:.3e}"))
        .collect();
    println!("leading singular values: {}", sv.join(" "));
    Ok(())
}
