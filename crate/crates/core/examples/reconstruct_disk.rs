//! Fits a density grid to a synthetic disk silhouette using only the
//! reconstruction loss, then reports the front-view IoU.
//!
//! ```bash
//! cargo run --release -p arbor --example reconstruct_disk -- [iterations]
//! ```

use std::time::Instant;

use arbor::distill::{constant_prior, disk_target, reconstruct, Conditioning, ReconConfig};

fn main() -> arbor::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let (img, mask) = disk_target(64, 14.0, [0.2, 0.45, 0.15]);
    let cfg = ReconConfig {
        alpha: 0.0,
        beta: 0.0,
        grid_resolution: 32,
        iterations,
        ..Default::default()
    };
    // Unused with alpha = beta = 0, but the signature takes both priors.
    let unused = constant_prior(cfg.prior_image_size, [1.0; 3], 0.5, Conditioning::None)?;

    let start = Instant::now();
    let rec = reconstruct(&img, &mask, "Magnolia", &unused, &unused, &cfg)?;
    for r in rec.history.iter().step_by(100) {
        println!("iter {:5}  loss {:10.4}", r.iteration, r.total);
    }
    println!(
        "front-view IoU {:.4} after {} iterations ({:.1} s)",
        rec.front_iou(&mask, cfg.render_steps)?,
        iterations,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
