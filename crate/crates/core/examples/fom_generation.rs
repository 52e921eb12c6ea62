//! Runs the advection-diffusion reference solver on the rotating-blob preset,
//! checks mass conservation, and writes the trajectory plus one snapshot CSV.
//!
//! cargo run --example fom_generation -- [output_dir]

use std::path::PathBuf;

use otrom::fomgen::{simulate, FomConfig};
use otrom::io::{export_snapshot_csv, load_trajectory, save_trajectory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let cfg = FomConfig::rotating_blob(32, 17);
    let traj = simulate(&cfg)?;
    println!(
        "{}×{} grid, dt = {}, {} snapshots over [0, {}]",
        cfg.nx,
        cfg.nz,
        cfg.dt,
        traj.len(),
        traj.t_final()
    );

    let m0: f64 = traj.field(0).iter().sum();
    for k in (0..traj.len()).step_by(4) {
        let u = traj.field(k);
        let peak = u.iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "t = {:.4}: mass drift {:+.1e}, peak {peak:.4}",
            traj.time(k),
            u.iter().sum::<f64>() - m0
        );
    }

    let path = out.join("rotating_blob_32.otrm");
    save_trajectory(&path, &traj)?;
    assert_eq!(load_trajectory(&path)?.fields(), traj.fields());
    let csv = out.join("rotating_blob_32_final.csv");
    export_snapshot_csv(traj.grid(), &traj.snapshot(traj.len() - 1), &csv)?;
    println!("wrote {} and {}", path.display(), csv.display());
    Ok(())
}
