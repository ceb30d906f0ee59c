//! Chamfer distance between two grown trees and their branch statistics.
//!
//! ```bash
//! cargo run --release -p arbor --example evaluate_metrics
//! ```

use arbor::envelope::MarkerSet;
use arbor::growth::{grow, preset};
use arbor::metrics::{branch_attributes, chamfer, sample_points, Normalization, CHAMFER_CONVENTION};
use arbor::rng::substream;
use arbor::Vec3;
use rand::Rng;

fn main() -> arbor::Result<()> {
    let mut r = substream(9, "example-crown");
    let pts: Vec<Vec3> = (0..3000)
        .map(|_| {
            Vec3::new(
                r.random_range(-0.7..0.7),
                r.random_range(-0.7..0.7),
                r.random_range(1.0..2.2),
            )
        })
        .collect();
    let markers = MarkerSet::new(pts);
    let a = grow(Vec3::ZERO, &markers, &preset("Pinus")?, &[])?.skeleton;
    let b = grow(Vec3::ZERO, &markers, &preset("Magnolia")?, &[])?.skeleton;

    let (pa, pb) = (sample_points(&a, 4096, 1)?, sample_points(&b, 4096, 2)?);
    println!("convention: {CHAMFER_CONVENTION}");
    for mode in [Normalization::Raw, Normalization::UnitDiagonal] {
        let cd = chamfer(&pa, &pb, mode)?;
        println!(
            "{mode:?}: {:.6} (a->b {:.6}, b->a {:.6})",
            cd.value, cd.a_to_b, cd.b_to_a
        );
    }
    for (name, t) in [("Pinus", &a), ("Magnolia", &b)] {
        let at = branch_attributes(t)?;
        println!(
            "{name:<9} {:4} branches  straightness {:.3}  junction angle {:5.1}  segment ratio {:.3}",
            at.branches.len(),
            at.straightness.mean,
            at.junction_angle.mean,
            at.segment_ratio.mean
        );
    }
    Ok(())
}
