//! Growth over time, with a wall on one side and a neighbor competing for
//! the same markers.
//!
//! ```bash
//! cargo run --release -p arbor --example simulate_growth
//! ```

use arbor::envelope::MarkerSet;
use arbor::growth::{grow_together, preset, simulate, Obstacle};
use arbor::rng::substream;
use arbor::Vec3;
use rand::Rng;

fn main() -> arbor::Result<()> {
    let mut r = substream(3, "example-hedge");
    let pts: Vec<Vec3> = (0..4000)
        .map(|_| {
            Vec3::new(
                r.random_range(-1.5..1.5),
                r.random_range(-0.5..0.5),
                r.random_range(0.8..2.0),
            )
        })
        .collect();
    let markers = MarkerSet::new(pts);
    let pinus = preset("Pinus")?;
    let wall = [Obstacle::HalfSpace {
        point: Vec3::new(0.0, -0.3, 0.0),
        normal: Vec3::new(0.0, 1.0, 0.0),
    }];

    let (g, snaps) = simulate(Vec3::ZERO, &markers, &pinus, &wall, &[0, 5, 10, 20, 40, 80, 500])?;
    println!("one tree against a wall, stopped after step {}", g.last_step);
    for s in &snaps {
        let flag = if s.beyond_termination { "  (past the end)" } else { "" };
        println!("  step {:3}: {:5} nodes{flag}", s.step, s.skeleton.len());
    }

    let anchors = [Vec3::new(-0.8, 0.0, 0.0), Vec3::new(0.8, 0.0, 0.0)];
    let ligustrum = preset("Ligustrum")?;
    let pair = grow_together(&anchors, &markers, &[pinus, ligustrum], &[])?;
    for (g, a) in pair.iter().zip(anchors) {
        println!(
            "competing tree at x={:+.1}: {} nodes, {} markers",
            a.x,
            g.skeleton.len(),
            g.consumed.len()
        );
    }
    Ok(())
}
