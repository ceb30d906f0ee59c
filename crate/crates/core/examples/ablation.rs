//! Sweeps the 2D/3D prior weight ratio on a synthetic disk and prints the
//! report as JSON. Short runs by default.
//!
//! ```bash
//! cargo run --release -p arbor --example ablation -- [iterations]
//! ```

use arbor::distill::{ablate, disk_target, image_prior, Conditioning, ReconConfig, DEFAULT_RATIOS};

fn main() -> arbor::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let (img, mask) = disk_target(48, 10.0, [0.2, 0.45, 0.15]);
    let base = ReconConfig {
        iterations,
        grid_resolution: 24,
        lr: 0.01,
        ..Default::default()
    };
    let s = base.prior_image_size;
    let p2 = image_prior(
        &img,
        s,
        0.5,
        Conditioning::Genus {
            label: "Magnolia".into(),
        },
    )?;
    let p3 = image_prior(
        &img,
        s,
        0.25,
        Conditioning::ReferenceView {
            azimuth: 0.0,
            elevation: 0.0,
        },
    )?;
    let report = ablate(&img, &mask, "Magnolia", &p2, &p3, &base, &DEFAULT_RATIOS)?;
    for row in &report.rows {
        println!(
            "alpha/beta {:5}: front IoU {:.3}  side IoU {:.3}  brightness {:.3}",
            row.ratio, row.front_iou, row.side_iou, row.mean_brightness
        );
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
