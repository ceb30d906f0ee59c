//! Ranks a few synthetic photos by patch-wise variance of the Laplacian and
//! drops the blurry ones.
//!
//! ```bash
//! cargo run -p arbor --example curate_images
//! ```

use arbor::imaging::{curate, sharpness_score, Image};

fn main() -> arbor::Result<()> {
    let sharp = Image::from_fn(64, 64, 3, |x, y| vec![((x / 2 + y / 2) % 2) as f64; 3])?;
    let soft = sharp.box_blur3().box_blur3();
    let flat = Image::filled(64, 64, 3, 0.4)?;
    let imgs = [sharp, soft, flat];
    for (name, img) in ["sharp", "soft", "flat"].iter().zip(&imgs) {
        println!("{name:>6}: score {:.5}", sharpness_score(&img.to_gray(), 16)?);
    }
    let c = curate(&imgs, 0.01, 16)?;
    println!("kept {:?}, rejected {:?}", c.kept, c.rejected);
    Ok(())
}
