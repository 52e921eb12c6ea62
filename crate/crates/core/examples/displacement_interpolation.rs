//! McCann interpolation between two Gaussian blobs versus the pointwise blend:
//! the transported blob moves, the blend only fades one blob into the other.
//!
//! cargo run --example displacement_interpolation

use otrom::fomgen::{analytic_gaussian, FomConfig};
use otrom::interpolation::{InterpolationModel, InterpolationOptions};
use otrom::rom::relative_l2;

fn centroid_x(grid: &otrom::measure::Grid, u: &[f64]) -> f64 {
    let mass: f64 = u.iter().sum();
    u.iter()
        .enumerate()
        .map(|(l, v)| v * grid.cell_center(l)[0])
        .sum::<f64>()
        / mass
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // σ = 3 cells, shifted 8 cells over the unit interval; five exact snapshots.
    let exact = analytic_gaussian(&FomConfig::translating_blob(32, 3.0, 8.0, 5))?;
    let grid = *exact.grid();
    let ends = vec![exact.snapshot(0), exact.snapshot(exact.len() - 1)];
    let model = InterpolationModel::build(grid, ends, &InterpolationOptions::default())?;

    println!("alpha  centroid(OT)  centroid(blend)  err(OT)   err(blend)");
    for k in 0..exact.len() {
        let alpha = k as f64 / (exact.len() - 1) as f64;
        let ot = model.synth_snapshot(0, alpha)?.values;
        let blend: Vec<f64> = exact
            .field(0)
            .iter()
            .zip(exact.field(exact.len() - 1))
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        println!(
            "{alpha:<5}  {:<12.4}  {:<15.4}  {:.2e}  {:.2e}",
            centroid_x(&grid, &ot),
            centroid_x(&grid, &blend),
            relative_l2(exact.field(k), &ot).unwrap_or(f64::NAN),
            relative_l2(exact.field(k), &blend).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
