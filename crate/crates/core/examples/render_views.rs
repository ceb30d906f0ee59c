//! Renders a soft sphere of density from the 12 standard azimuths and writes
//! the color images as PNG.
//!
//! ```bash
//! cargo run --release -p arbor --example render_views -- /tmp/views
//! ```

use std::path::PathBuf;

use arbor::distill::default_extent;
use arbor::render::{render_views, view_azimuths, CameraPose, DensityGrid};
use arbor::Vec3;

fn main() -> arbor::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "views".into()));
    std::fs::create_dir_all(&dir)?;
    let ext = default_extent();
    let c = Vec3::new(0.3, 0.0, 1.0);
    let grid = DensityGrid::from_fn(
        [32; 3],
        ext,
        |p| if (p - c).norm() < 0.5 { 8.0 } else { 1e-3 },
        |p| [0.2 + 0.3 * p.z, 0.5, 0.2],
    )?;
    let pose = CameraPose::front(&ext, 64, 64);
    let views = render_views(&grid, &pose, 12, 96)?;
    for (v, az) in views.iter().zip(view_azimuths(12)) {
        let path = dir.join(format!("view_{az:03.0}.png"));
        v.rgb.write(&path)?;
        let coverage = v.mask.values().iter().sum::<f64>() / v.mask.values().len() as f64;
        println!("{} azimuth {az:5.1}  coverage {coverage:.3}", path.display());
    }
    Ok(())
}
