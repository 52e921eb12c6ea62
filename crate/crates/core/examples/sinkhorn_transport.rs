//! Entropic transport between two point clouds, compared with the exact LP
//! optimum as the regularization shrinks.
//!
//! cargo run --example sinkhorn_transport

use otrom::transport::{exact_lp, sinkhorn, transport_cost, CostMatrix, Epsilon, SinkhornOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let src = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let dst = [[0.5, 0.5], [2.0, 0.0], [0.0, 2.0], [1.0, 1.0]];
    let a = [0.5, 0.3, 0.2];
    let b = [0.25, 0.25, 0.25, 0.25];
    let cost = CostMatrix::from_points(&src, &dst, 2)?;

    let exact = exact_lp(&a, &b, &cost)?;
    println!("exact LP cost          {:.6}", exact.cost);
    for eps in [1e-1, 1e-2, 1e-3] {
        let opts = SinkhornOptions {
            epsilon: Epsilon::Absolute(eps),
            ..Default::default()
        };
        let plan = sinkhorn(&a, &b, &cost, &opts)?;
        let (rows, cols) = plan.marginal_errors(&a, &b);
        println!(
            "eps = {eps:<6} cost {:.6}  iterations {:>5}  marginal violation {:.1e}",
            transport_cost(&plan, &cost)?,
            plan.iterations(),
            rows.max(cols)
        );
    }
    Ok(())
}
