//! Height, DBH, crown radius and leaf-off/leaf-on shadow area of a grown
//! tree, plus the shadow raster as PGM.
//!
//! ```bash
//! cargo run --release -p arbor --example phenotypes -- /tmp/shadow.pgm
//! ```

use arbor::envelope::MarkerSet;
use arbor::growth::{attach_foliage, grow, preset};
use arbor::phenotype::{measure, shadow_raster, PhenotypeOptions};
use arbor::rng::substream;
use arbor::Vec3;
use rand::Rng;

fn main() -> arbor::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "shadow.pgm".into());
    let mut r = substream(5, "example-crown");
    let c = Vec3::new(0.0, 0.0, 2.6);
    let mut pts = Vec::new();
    while pts.len() < 4000 {
        let p = Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        if p.norm() <= 1.0 {
            pts.push(c + p);
        }
    }
    let params = preset("Cinnamomum")?;
    let tree = grow(Vec3::ZERO, &MarkerSet::new(pts), &params, &[])?.skeleton;
    let leaves = attach_foliage(&tree, params.tip_radius, 60.0, 0.025, 5)?;
    let opts = PhenotypeOptions::default();
    let report = measure(&tree, &leaves, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let raster = shadow_raster(&tree, &leaves, opts.sun_direction, opts.ground_res)?;
    raster.write_pgm(std::path::Path::new(&out))?;
    println!("{}x{} shadow raster written to {out}", raster.width, raster.height);
    Ok(())
}
