//! Saves a trained model directory, reloads it, and checks that inference is
//! bit-identical without solving any new transport problems.
//!
//! cargo run --example model_io -- [model_dir]

use std::path::PathBuf;

use otrom::fomgen::{simulate, FomConfig};
use otrom::io::{load_model, save_model};
use otrom::rom::{train, MappingKind, TrainOptions};
use otrom::transport::solve_count;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("otrom_model_example"));
    let traj = simulate(&FomConfig::rotating_blob(24, 9))?;
    let opts = TrainOptions {
        n_checkpoints: 3,
        mapping: MappingKind::MinL2,
        correction: true,
        ..Default::default()
    };
    let model = train(&traj, &opts)?;
    save_model(&dir, &model)?;

    let solves = solve_count();
    let back = load_model(&dir)?;
    assert_eq!(back, model);
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let (a, b) = (
            model.infer_corrected(t)?.values,
            back.infer_corrected(t)?.values,
        );
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(solve_count(), solves);
    let mut files: Vec<String> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("{}: {}", dir.display(), files.join(", "));
    println!("reloaded model reproduces inference bit for bit with no new transport solves");
    Ok(())
}
