use std::path::PathBuf;
use std::process::ExitCode;

use arbor::pipeline::{self, Outcome, PipelineConfig};
use arbor::{ArborError, Result, Vec3};
use clap::{Parser, Subcommand};

/// Tree envelopes from single photos, with skeletons grown inside them.
#[derive(Parser)]
#[command(name = "arbor", version)]
struct Cli {
    /// Pipeline config (JSON). Flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Exit with status 1 when a command reports a degenerate result.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads.
    #[arg(long, global = true, env = "ARBOR_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score images by sharpness and split them into kept and rejected.
    Curate {
        dir: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        patch: Option<usize>,
    },
    /// Fit a density grid to one segmented image.
    Reconstruct {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        genus: String,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Grow a skeleton inside a reconstructed grid or occupancy volume.
    Grow {
        input: PathBuf,
        #[arg(long)]
        genus: String,
    },
    /// Grow and save the skeleton after selected step counts.
    Simulate {
        input: PathBuf,
        #[arg(long)]
        genus: String,
        /// Comma-separated, ascending.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<usize>>,
    },
    /// Height, DBH, crown radius and shadow areas of a skeleton.
    Measure {
        skeleton: PathBuf,
        #[arg(long)]
        leaves: Option<PathBuf>,
        /// Sun direction x,y,z; z must be negative.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        sun: Option<Vec<f64>>,
        /// Also write the shadow rasters as PGM.
        #[arg(long)]
        shadow_pgm: bool,
    },
    /// Chamfer distance and branch attributes, one JSON row per skeleton.
    Evaluate {
        #[arg(required = true)]
        skeletons: Vec<PathBuf>,
        /// Reference point clouds (PLY): none, one shared, or one per skeleton.
        #[arg(long = "reference")]
        references: Vec<PathBuf>,
    },
    /// Sweep the 2D/3D prior weight ratio.
    Ablate {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        genus: String,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        iterations: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Curate { threshold, patch, .. } => {
            cfg.curate.threshold = threshold.unwrap_or(cfg.curate.threshold);
            cfg.curate.patch = patch.unwrap_or(cfg.curate.patch);
        }
        Command::Reconstruct {
            iterations: Some(n), ..
        } => cfg.recon.iterations = *n,
        Command::Ablate { ratios, iterations, .. } => {
            if let Some(r) = ratios {
                cfg.ablation.ratios = r.clone();
            }
            if iterations.is_some() {
                cfg.ablation.iterations = *iterations;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    pipeline::with_jobs(cli.jobs, || match &cli.command {
        Command::Curate { dir, .. } => pipeline::cmd_curate(&cfg, dir, out).map(|r| r.1),
        Command::Reconstruct { image, mask, genus, .. } => pipeline::cmd_reconstruct(&cfg, image, mask, genus, out),
        Command::Grow { input, genus } => pipeline::cmd_grow(&cfg, input, genus, out),
        Command::Simulate { input, genus, steps } => pipeline::cmd_simulate(&cfg, input, genus, steps.as_deref(), out),
        Command::Measure {
            skeleton,
            leaves,
            sun,
            shadow_pgm,
        } => {
            let sun = match sun.as_deref() {
                None => None,
                Some(&[x, y, z]) => Some(Vec3::new(x, y, z)),
                Some(_) => return Err(ArborError::InvalidArgument("--sun takes three numbers x,y,z".into())),
            };
            pipeline::cmd_measure(&cfg, skeleton, leaves.as_deref(), sun, *shadow_pgm, out).map(|r| r.1)
        }
        Command::Evaluate { skeletons, references } => {
            pipeline::cmd_evaluate(&cfg, skeletons, references, out).map(|r| r.1)
        }
        Command::Ablate { image, mask, genus, .. } => pipeline::cmd_ablate(&cfg, image, mask, genus, out).map(|r| r.1),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(pipeline::exit_code(&result, cli.strict) as u8)
}
