//! Compares the closed-form score of a Gaussian prior with its PAAS
//! Monte-Carlo estimate at a few noise levels.
//!
//! ```bash
//! cargo run --release -p arbor --example score_distillation
//! ```

use arbor::distill::{paas_estimate, score, DenoiserSpec, NoiseSchedule};

fn main() -> arbor::Result<()> {
    let (mu, s) = (vec![0.5, -0.2, 0.1], 0.6);
    let prior = DenoiserSpec::isotropic(mu.clone(), s)?;
    let x = vec![1.5, 0.4, -0.8];
    let schedule = NoiseSchedule::geometric(1.0, 0.02, 5)?;
    for &sigma in &schedule.sigmas {
        let exact: Vec<f64> = mu
            .iter()
            .zip(&x)
            .map(|(m, x)| (m - x) / (s * s + sigma * sigma))
            .collect();
        let den = score(&prior, &x, sigma)?;
        let mc = paas_estimate(&prior, &x, sigma, 20_000, 7)?;
        println!("sigma {sigma:.3}");
        for i in 0..x.len() {
            println!(
                "  dim {i}: closed form {:8.4}  denoiser score {:8.4}  paas {:8.4} +- {:.4}",
                exact[i], den[i], mc.mean[i], mc.stderr[i]
            );
        }
    }
    Ok(())
}
