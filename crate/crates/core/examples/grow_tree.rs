//! Grows one tree per genus preset inside the same spherical crown and
//! writes the skeleton, mesh and leaves of each.
//!
//! ```bash
//! cargo run --release -p arbor --example grow_tree -- /tmp/trees
//! ```

use std::path::PathBuf;

use arbor::envelope::MarkerSet;
use arbor::growth::{attach_foliage, export_mesh, grow, presets, write_leaves_ply};
use arbor::rng::substream;
use arbor::Vec3;
use rand::Rng;

fn main() -> arbor::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "trees".into()));
    std::fs::create_dir_all(&dir)?;
    let mut r = substream(1, "example-crown");
    let c = Vec3::new(0.0, 0.0, 1.6);
    let mut pts = Vec::new();
    while pts.len() < 3000 {
        let p = Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        if p.norm() <= 1.0 {
            pts.push(c + p * 0.8);
        }
    }
    let markers = MarkerSet::new(pts);
    for params in presets() {
        let g = grow(Vec3::ZERO, &markers, &params, &[])?;
        let leaves = attach_foliage(&g.skeleton, params.tip_radius, 40.0, 0.02, 1)?;
        let name = params.name.to_lowercase();
        g.skeleton
            .write_json(&dir.join(format!("{name}.json")), &params.name, 1)?;
        export_mesh(&g.skeleton, 8)?.write_obj(&dir.join(format!("{name}.obj")))?;
        write_leaves_ply(&dir.join(format!("{name}_leaves.ply")), &leaves)?;
        println!(
            "{:<11} {:5} nodes  {:3} steps  {:5.1}% markers used  base radius {:.3} m  {} leaves",
            params.name,
            g.skeleton.len(),
            g.last_step,
            100.0 * g.consumed.len() as f64 / markers.len() as f64,
            g.skeleton.max_radius(),
            leaves.len()
        );
    }
    Ok(())
}
