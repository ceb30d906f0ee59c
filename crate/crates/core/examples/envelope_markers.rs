//! Thresholds a density grid into an occupancy volume, reports degeneracy,
//! scatters attraction markers and writes both to disk.
//!
//! ```bash
//! cargo run --release -p arbor --example envelope_markers -- /tmp/envelope
//! ```

use std::path::PathBuf;

use arbor::distill::default_extent;
use arbor::envelope::{default_tau, extract_occupancy, sample_markers, DEFAULT_MARKER_DENSITY};
use arbor::render::DensityGrid;
use arbor::Vec3;

fn main() -> arbor::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "envelope".into()));
    std::fs::create_dir_all(&dir)?;
    // an ellipsoidal crown above the ground
    let c = Vec3::new(0.0, 0.0, 1.3);
    let grid = DensityGrid::from_fn(
        [40; 3],
        default_extent(),
        |p| {
            let q = p - c;
            let r = (q.x * q.x / 0.36 + q.y * q.y / 0.36 + q.z * q.z / 0.25).sqrt();
            if r < 1.0 {
                5.0
            } else {
                0.01
            }
        },
        |_| [0.3, 0.5, 0.2],
    )?;
    let tau = default_tau(&grid);
    let ex = extract_occupancy(&grid, tau)?;
    println!(
        "tau {tau:.3}, inside fraction {:.3}, warning {:?}",
        ex.inside_fraction, ex.warning
    );
    let vol = ex.volume;
    let anchor = vol.default_anchor().expect("non-empty envelope");
    println!(
        "anchor {anchor:?}, degeneracy with anchor: {:?}",
        vol.degeneracy(Some(anchor))
    );
    let markers = sample_markers(&vol, DEFAULT_MARKER_DENSITY, 42)?;
    println!("{} markers in {:.3} m^3", markers.len(), vol.inside_volume());
    vol.write(&dir.join("envelope.occ"))?;
    markers.write_ply(&dir.join("markers.ply"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
