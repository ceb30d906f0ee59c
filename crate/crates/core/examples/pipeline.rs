//! The whole batch pipeline on one synthetic photo: reconstruct, grow,
//! measure and evaluate, all written into one directory.
//!
//! ```bash
//! cargo run --release -p arbor --example pipeline -- /tmp/arbor-run
//! ```

use std::path::PathBuf;

use arbor::distill::disk_target;
use arbor::pipeline::{run_pipeline, PipelineConfig};

fn main() -> arbor::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "arbor-run".into()));
    std::fs::create_dir_all(&dir)?;
    let (img, mask) = disk_target(48, 12.0, [0.25, 0.5, 0.2]);
    let (ip, mp) = (dir.join("photo.png"), dir.join("photo_mask.png"));
    img.write(&ip)?;
    mask.write_binary(&mp)?;

    let mut cfg = PipelineConfig {
        seed: 7,
        ..Default::default()
    };
    cfg.recon.iterations = 300;
    cfg.recon.grid_resolution = 24;
    cfg.recon.lr = 0.01;
    let run = run_pipeline(&cfg, &ip, &mp, "Magnolia", &dir.join("out"))?;
    for f in &run.outcome.files {
        println!("wrote {}", f.display());
    }
    for w in &run.outcome.warnings {
        println!("warning: {w}");
    }
    let p = &run.phenotype.report;
    println!(
        "height {:.2} m, crown radius {:.2} m, dbh {:?} cm",
        p.height, p.crown_radius, p.dbh
    );
    if let Some(cd) = &run.rows[0].chamfer {
        println!("chamfer to envelope markers {:.5}", cd.value);
    }
    Ok(())
}
