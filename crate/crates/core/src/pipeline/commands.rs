use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{write_atomic, Outcome, PipelineConfig};
use crate::distill::{self, Conditioning, DenoiserSpec, LossRecord};
use crate::envelope::{default_tau, extract_occupancy, sample_markers, MarkerSet, OccupancyVolume, OCCUPANCY_MAGIC};
use crate::error::{ArborError, Result};
use crate::geom::Vec3;
use crate::growth::{self, attach_foliage, export_mesh, GenusParams, Leaf, Obstacle, TreeSkeleton};
use crate::imaging::{self, Image, Mask};
use crate::metrics::{self, ChamferResult, Summary};
use crate::phenotype::{self, PhenotypeReport};
use crate::ply;
use crate::render::{self, DensityGrid, CHECKPOINT_MAGIC};
use crate::rng;

const GRID_FILE: &str = "grid.arbg";
const ENVELOPE_FILE: &str = "envelope.occ";
const MARKERS_FILE: &str = "markers.ply";
const SKELETON_FILE: &str = "skeleton.json";
const MESH_FILE: &str = "tree.obj";
const LEAVES_FILE: &str = "leaves.ply";
const METRICS_FILE: &str = "metrics.jsonl";

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Creates `out` and refuses to write any of `names` over one of `inputs`.
fn prepare_out(out: &Path, inputs: &[&Path], names: &[&str]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let out = out.canonicalize()?;
    for input in inputs {
        let Ok(input) = input.canonicalize() else { continue };
        if names.iter().any(|n| out.join(n) == input) {
            return Err(ArborError::invalid(format!(
                "output would overwrite input {}",
                input.display()
            )));
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: PathBuf, value: &T, outcome: &mut Outcome) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    outcome.files.push(path);
    Ok(())
}

/// Downscales so the longer side is at most `max_side`.
fn working_copy(img: &Image, mask: &Mask, max_side: usize) -> Result<(Image, Mask)> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(ArborError::invalid(format!(
            "image is {}x{} but mask is {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    let long = img.width().max(img.height());
    if long <= max_side {
        return Ok((img.clone(), mask.clone()));
    }
    let scale = max_side as f64 / long as f64;
    let w = ((img.width() as f64 * scale).round() as usize).max(1);
    let h = ((img.height() as f64 * scale).round() as usize).max(1);
    Ok((img.resize(w, h), mask.resize(w, h)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationEntry {
    pub file: String,
    pub score: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationManifest {
    pub created_unix: u64,
    pub threshold: f64,
    pub patch: usize,
    pub images: Vec<CurationEntry>,
    pub kept: Vec<String>,
    pub rejected: Vec<String>,
    /// Files that could not be read as images, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Scores every readable image in `in_dir` (sorted by file name) and writes
/// `curation.json`.
pub fn cmd_curate(cfg: &PipelineConfig, in_dir: &Path, out: &Path) -> Result<(CurationManifest, Outcome)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(in_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    prepare_out(out, &[], &[])?;
    let mut outcome = Outcome::default();
    let mut names = Vec::new();
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for p in &entries {
        match Image::read(p) {
            Ok(img) => {
                names.push(file_label(p));
                images.push(img);
            }
            Err(e) => {
                outcome.warn(format!("skipping {}: {e}", p.display()));
                skipped.push((file_label(p), e.to_string()));
            }
        }
    }
    let c = imaging::curate(&images, cfg.curate.threshold, cfg.curate.patch)?;
    let manifest = CurationManifest {
        created_unix: unix_time(),
        threshold: cfg.curate.threshold,
        patch: cfg.curate.patch,
        images: names
            .iter()
            .zip(&c.scores)
            .enumerate()
            .map(|(i, (n, s))| CurationEntry {
                file: n.clone(),
                score: *s,
                kept: c.kept.contains(&i),
            })
            .collect(),
        kept: c.kept.iter().map(|&i| names[i].clone()).collect(),
        rejected: c.rejected.iter().map(|&i| names[i].clone()).collect(),
        skipped,
    };
    write_json(out.join("curation.json"), &manifest, &mut outcome)?;
    Ok((manifest, outcome))
}

fn build_priors(cfg: &PipelineConfig, img: &Image, genus: &str) -> Result<(DenoiserSpec, DenoiserSpec)> {
    let size = cfg.recon.prior_image_size;
    let spec2d = cfg.prior2d.build(
        img,
        size,
        Conditioning::Genus {
            label: genus.to_string(),
        },
    )?;
    let spec3d = cfg.prior3d.build(
        img,
        size,
        Conditioning::ReferenceView {
            azimuth: 0.0,
            elevation: 0.0,
        },
    )?;
    Ok((spec2d, spec3d))
}

fn load_inputs(cfg: &PipelineConfig, image: &Path, mask: &Path, genus: &str) -> Result<(Image, Mask, GenusParams)> {
    let params = cfg.genus(genus)?;
    let img = Image::read(image)?;
    let m = Mask::read(mask)?;
    let (img, m) = working_copy(&img, &m, cfg.working_size)?;
    Ok((img, m, params))
}

/// Loss records at every 100th iteration plus the last one.
fn loss_curve(history: &[LossRecord]) -> Vec<LossRecord> {
    let n = history.len();
    history
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 100 == 0 || i + 1 == n)
        .map(|(_, r)| *r)
        .collect()
}

/// Fits a density grid to one image and mask. Writes the grid checkpoint,
/// the front-view render and `reconstruct.json`. A non-finite loss still
/// writes the manifest, with the diagnostic, before returning the error.
pub fn cmd_reconstruct(cfg: &PipelineConfig, image: &Path, mask: &Path, genus: &str, out: &Path) -> Result<Outcome> {
    let (img, m, params) = load_inputs(cfg, image, mask, genus)?;
    prepare_out(out, &[image, mask], &[GRID_FILE, "front.png", "reconstruct.json"])?;
    let (spec2d, spec3d) = build_priors(cfg, &img, &params.name)?;
    let recon_cfg = distill::ReconConfig {
        rng_seed: cfg.seed,
        ..cfg.recon.clone()
    };
    let mut outcome = Outcome::default();
    let mut manifest = json!({
        "created_unix": unix_time(),
        "seed": cfg.seed,
        "genus": params.name,
        "image": image.display().to_string(),
        "mask": mask.display().to_string(),
        "working_size": [img.width(), img.height()],
        "config": recon_cfg,
        "prior2d": cfg.prior2d,
        "prior3d": cfg.prior3d,
        "schedule": recon_cfg.schedule,
    });
    let rec = match distill::reconstruct(&img, &m, &params.name, &spec2d, &spec3d, &recon_cfg) {
        Ok(r) => r,
        Err(e) => {
            manifest["status"] = json!("failed");
            manifest["error"] = json!(e.to_string());
            if let ArborError::NonFiniteLoss {
                iteration,
                rec,
                prior2d,
                prior3d,
            } = &e
            {
                // serde_json writes non-finite numbers as null, so keep text too
                manifest["diagnostic"] = json!({
                    "iteration": iteration,
                    "rec": rec.to_string(),
                    "prior2d": prior2d.to_string(),
                    "prior3d": prior3d.to_string(),
                });
            }
            write_json(out.join("reconstruct.json"), &manifest, &mut outcome)?;
            return Err(e);
        }
    };
    rec.grid.write_checkpoint(&out.join(GRID_FILE))?;
    outcome.files.push(out.join(GRID_FILE));
    let front = render::render(&rec.grid, &rec.input_pose, recon_cfg.render_steps)?;
    front.rgb.write(&out.join("front.png"))?;
    outcome.files.push(out.join("front.png"));
    let iou = imaging::silhouette_iou(&front.mask, &m, 0.5)?;
    if iou < 0.5 {
        outcome.warn(format!("front-view silhouette IoU is only {iou:.3}"));
    }
    manifest["status"] = json!("ok");
    manifest["losses"] = json!(loss_curve(&rec.history));
    manifest["final"] = json!(rec.history.last());
    manifest["front_iou"] = json!(iou);
    manifest["warnings"] = json!(outcome.warnings);
    write_json(out.join("reconstruct.json"), &manifest, &mut outcome)?;
    Ok(outcome)
}

struct GrowthSetup {
    volume: OccupancyVolume,
    tau: f64,
    anchor: Vec3,
    markers: MarkerSet,
    params: GenusParams,
    obstacles: Vec<Obstacle>,
}

/// Loads a grid checkpoint or an occupancy file, told apart by magic.
fn load_envelope(cfg: &PipelineConfig, input: &Path, outcome: &mut Outcome) -> Result<(OccupancyVolume, f64)> {
    let bytes = std::fs::read(input)?;
    if bytes.starts_with(OCCUPANCY_MAGIC) {
        let v = OccupancyVolume::from_bytes(&bytes)?;
        let tau = v.tau;
        return Ok((v, tau));
    }
    if bytes.starts_with(CHECKPOINT_MAGIC) {
        let grid = DensityGrid::from_checkpoint_bytes(&bytes)?;
        let tau = match cfg.envelope.tau {
            Some(t) => t,
            None => default_tau(&grid),
        };
        let ex = extract_occupancy(&grid, tau)?;
        if let Some(w) = ex.warning {
            outcome.warn(format!("envelope is degenerate: {w}"));
        }
        return Ok((ex.volume, tau));
    }
    Err(ArborError::format(
        "envelope",
        format!("{} is neither a grid checkpoint nor an occupancy file", input.display()),
    ))
}

fn setup_growth(cfg: &PipelineConfig, input: &Path, genus: &str, outcome: &mut Outcome) -> Result<GrowthSetup> {
    let params = cfg.genus(genus)?;
    let obstacles = cfg
        .growth
        .obstacles
        .iter()
        .map(|o| o.resolve())
        .collect::<Result<Vec<_>>>()?;
    let (volume, tau) = load_envelope(cfg, input, outcome)?;
    let anchor = cfg
        .envelope
        .anchor
        .or_else(|| volume.default_anchor())
        .unwrap_or_else(|| {
            let c = volume.extent.center();
            Vec3::new(c.x, c.y, volume.extent.min.z)
        });
    // empty and full were already reported by extraction
    if let Some(d) = volume.degeneracy(Some(anchor)) {
        if outcome.warnings.is_empty() {
            outcome.warn(format!("envelope is degenerate: {d}"));
        }
    }
    let markers = sample_markers(&volume, cfg.envelope.marker_density, cfg.seed)?;
    Ok(GrowthSetup {
        volume,
        tau,
        anchor,
        markers,
        params,
        obstacles,
    })
}

/// Extracts the envelope, scatters markers, grows a skeleton and dresses it
/// with a mesh and leaves.
pub fn cmd_grow(cfg: &PipelineConfig, input: &Path, genus: &str, out: &Path) -> Result<Outcome> {
    let names = [
        ENVELOPE_FILE,
        MARKERS_FILE,
        SKELETON_FILE,
        MESH_FILE,
        LEAVES_FILE,
        "grow.json",
    ];
    prepare_out(out, &[input], &names)?;
    let mut outcome = Outcome::default();
    let s = setup_growth(cfg, input, genus, &mut outcome)?;
    let g = growth::grow(s.anchor, &s.markers, &s.params, &s.obstacles)?;
    if let Some(w) = g.warning {
        outcome.warn(w.to_string());
    }
    let leaves = attach_foliage(
        &g.skeleton,
        s.params.tip_radius,
        cfg.growth.leaf_density,
        cfg.growth.leaf_radius,
        cfg.seed,
    )?;

    s.volume.write(&out.join(ENVELOPE_FILE))?;
    s.markers.write_ply(&out.join(MARKERS_FILE))?;
    g.skeleton
        .write_json(&out.join(SKELETON_FILE), &s.params.name, cfg.seed)?;
    export_mesh(&g.skeleton, cfg.growth.mesh_sides)?.write_obj(&out.join(MESH_FILE))?;
    growth::write_leaves_ply(&out.join(LEAVES_FILE), &leaves)?;
    outcome.files.extend(names[..5].iter().map(|n| out.join(n)));

    let coverage = if s.markers.is_empty() {
        0.0
    } else {
        g.consumed.len() as f64 / s.markers.len() as f64
    };
    let manifest = json!({
        "created_unix": unix_time(),
        "seed": cfg.seed,
        "input": input.display().to_string(),
        "genus": s.params,
        "tau": s.tau,
        "inside_fraction": s.volume.inside_fraction(),
        "anchor": s.anchor,
        "obstacles": cfg.growth.obstacles,
        "markers": s.markers.len(),
        "consumed": g.consumed.len(),
        "coverage": coverage,
        "nodes": g.skeleton.len(),
        "last_step": g.last_step,
        "converged": g.converged,
        "leaves": leaves.len(),
        "warnings": outcome.warnings,
    });
    write_json(out.join("grow.json"), &manifest, &mut outcome)?;
    Ok(outcome)
}

/// Grows once and writes `snapshot_{k}.json` for each requested step count
/// (the config's list when `steps` is `None`).
pub fn cmd_simulate(
    cfg: &PipelineConfig,
    input: &Path,
    genus: &str,
    steps: Option<&[usize]>,
    out: &Path,
) -> Result<Outcome> {
    let steps = steps.unwrap_or(&cfg.growth.snapshots);
    let files: Vec<String> = steps.iter().map(|k| format!("snapshot_{k}.json")).collect();
    let mut names: Vec<&str> = files.iter().map(String::as_str).collect();
    names.push("simulate.json");
    prepare_out(out, &[input], &names)?;
    let mut outcome = Outcome::default();
    let s = setup_growth(cfg, input, genus, &mut outcome)?;
    let (g, snaps) = growth::simulate(s.anchor, &s.markers, &s.params, &s.obstacles, steps)?;
    if let Some(w) = g.warning {
        outcome.warn(w.to_string());
    }
    let mut entries = Vec::new();
    for (snap, file) in snaps.iter().zip(&files) {
        snap.skeleton.write_json(&out.join(file), &s.params.name, cfg.seed)?;
        outcome.files.push(out.join(file));
        if snap.beyond_termination {
            outcome.warn(format!(
                "snapshot {} is past the end of growth at step {}",
                snap.step, g.last_step
            ));
        }
        entries.push(json!({
            "step": snap.step,
            "file": file,
            "nodes": snap.skeleton.len(),
            "beyond_termination": snap.beyond_termination,
        }));
    }
    let manifest = json!({
        "created_unix": unix_time(),
        "seed": cfg.seed,
        "input": input.display().to_string(),
        "genus": s.params.name,
        "last_step": g.last_step,
        "converged": g.converged,
        "snapshots": entries,
        "warnings": outcome.warnings,
    });
    write_json(out.join("simulate.json"), &manifest, &mut outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub skeleton: String,
    pub leaves: Option<String>,
    pub leaf_count: usize,
    pub leaf_radius: f64,
    pub report: PhenotypeReport,
}

/// Leaves from a PLY file; normals default to +Z when the file has none.
fn read_leaves(path: &Path, radius: f64) -> Result<Vec<Leaf>> {
    let (points, normals) = ply::read_points_normals(path)?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &position)| Leaf {
            position,
            normal: normals.as_ref().map_or(Vec3::Z, |n| n[i]),
            radius,
        })
        .collect())
}

/// Writes `phenotype.json`, and leaf-off/leaf-on shadow rasters as PGM when
/// `shadow_pgm` is set. `sun` overrides the configured sun direction.
pub fn cmd_measure(
    cfg: &PipelineConfig,
    skeleton: &Path,
    leaves: Option<&Path>,
    sun: Option<Vec3>,
    shadow_pgm: bool,
    out: &Path,
) -> Result<(MeasureDocument, Outcome)> {
    let mut inputs = vec![skeleton];
    inputs.extend(leaves);
    prepare_out(
        out,
        &inputs,
        &["phenotype.json", "shadow_leaf_off.pgm", "shadow_leaf_on.pgm"],
    )?;
    let (skel, _) = TreeSkeleton::read_json(skeleton)?;
    let leaf_list = match leaves {
        Some(p) => read_leaves(p, cfg.growth.leaf_radius)?,
        None => Vec::new(),
    };
    let mut opts = cfg.phenotype;
    if let Some(s) = sun {
        opts.sun_direction = s;
    }
    let report = phenotype::measure(&skel, &leaf_list, &opts)?;
    let mut outcome = Outcome::default();
    if report.dbh.is_none() {
        outcome.warn(format!(
            "trunk does not reach breast height {} m; DBH undefined",
            opts.breast_height
        ));
    }
    if shadow_pgm {
        let sun = opts.sun_direction.normalize();
        for (name, l) in [("shadow_leaf_off.pgm", &[][..]), ("shadow_leaf_on.pgm", &leaf_list[..])] {
            phenotype::shadow_raster(&skel, l, sun, opts.ground_res)?.write_pgm(&out.join(name))?;
            outcome.files.push(out.join(name));
        }
    }
    let doc = MeasureDocument {
        skeleton: file_label(skeleton),
        leaves: leaves.map(file_label),
        leaf_count: leaf_list.len(),
        leaf_radius: cfg.growth.leaf_radius,
        report,
    };
    write_json(out.join("phenotype.json"), &doc, &mut outcome)?;
    Ok((doc, outcome))
}

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub index: usize,
    pub tree: String,
    pub genus: String,
    pub nodes: usize,
    pub branches: usize,
    pub reference: Option<String>,
    pub samples: usize,
    pub chamfer: Option<ChamferResult>,
    pub straightness: Summary,
    pub tortuosity: Summary,
    pub junction_angle: Summary,
    pub bend_angle: Summary,
    pub segment_ratio: Summary,
    pub features: Vec<f64>,
}

fn evaluate_one(
    cfg: &PipelineConfig,
    index: usize,
    skeleton: &Path,
    reference: Option<&Path>,
) -> Result<EvaluationRow> {
    let (skel, doc) = TreeSkeleton::read_json(skeleton)?;
    let attrs = metrics::branch_attributes(&skel)?;
    let chamfer = match reference {
        Some(r) => {
            let cloud = ply::read_points(r)?;
            let seed = rng::substream(cfg.seed, &format!("evaluate/{index}")).random::<u64>();
            let samples = metrics::sample_points(&skel, cfg.metrics.samples, seed)?;
            Some(metrics::chamfer(&samples, &cloud, cfg.metrics.normalization)?)
        }
        None => None,
    };
    Ok(EvaluationRow {
        index,
        tree: file_label(skeleton),
        genus: doc.genus,
        nodes: skel.len(),
        branches: attrs.branches.len(),
        reference: reference.map(file_label),
        samples: if chamfer.is_some() { cfg.metrics.samples } else { 0 },
        chamfer,
        features: attrs.feature_vector(),
        straightness: attrs.straightness,
        tortuosity: attrs.tortuosity,
        junction_angle: attrs.junction_angle,
        bend_angle: attrs.bend_angle,
        segment_ratio: attrs.segment_ratio,
    })
}

/// Scores skeletons in parallel and writes one JSON row per tree, in input
/// order. `references` is empty (attributes only), a single cloud shared by
/// every tree, or one cloud per tree.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    skeletons: &[PathBuf],
    references: &[PathBuf],
    out: &Path,
) -> Result<(Vec<EvaluationRow>, Outcome)> {
    if skeletons.is_empty() {
        return Err(ArborError::invalid("no skeletons to evaluate"));
    }
    if !(references.len() <= 1 || references.len() == skeletons.len()) {
        return Err(ArborError::invalid(format!(
            "{} references for {} skeletons; give none, one, or one per skeleton",
            references.len(),
            skeletons.len()
        )));
    }
    let inputs: Vec<&Path> = skeletons.iter().chain(references).map(PathBuf::as_path).collect();
    prepare_out(out, &inputs, &[METRICS_FILE])?;
    let rows = skeletons
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = match references.len() {
                0 => None,
                1 => Some(references[0].as_path()),
                _ => Some(references[i].as_path()),
            };
            evaluate_one(cfg, i, s, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for r in &rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    let path = out.join(METRICS_FILE);
    write_atomic(&path, text.as_bytes())?;
    let outcome = Outcome {
        files: vec![path],
        warnings: Vec::new(),
    };
    Ok((rows, outcome))
}

/// α/β sweep on one image; writes `ablation.json`.
pub fn cmd_ablate(
    cfg: &PipelineConfig,
    image: &Path,
    mask: &Path,
    genus: &str,
    out: &Path,
) -> Result<(distill::AblationReport, Outcome)> {
    let (img, m, params) = load_inputs(cfg, image, mask, genus)?;
    prepare_out(out, &[image, mask], &["ablation.json"])?;
    let (spec2d, spec3d) = build_priors(cfg, &img, &params.name)?;
    let base = distill::ReconConfig {
        rng_seed: cfg.seed,
        iterations: cfg.ablation.iterations.unwrap_or(cfg.recon.iterations),
        ..cfg.recon.clone()
    };
    let report = distill::ablate(&img, &m, &params.name, &spec2d, &spec3d, &base, &cfg.ablation.ratios)?;
    let mut outcome = Outcome::default();
    let doc = json!({
        "created_unix": unix_time(),
        "seed": cfg.seed,
        "genus": params.name,
        "beta": base.beta,
        "report": report,
    });
    write_json(out.join("ablation.json"), &doc, &mut outcome)?;
    Ok((report, outcome))
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub outcome: Outcome,
    pub skeleton: PathBuf,
    pub metrics: PathBuf,
    pub phenotype: MeasureDocument,
    pub rows: Vec<EvaluationRow>,
}

/// reconstruct, grow, measure and evaluate in one directory. The evaluation
/// compares the grown skeleton with the envelope markers it grew into.
pub fn run_pipeline(cfg: &PipelineConfig, image: &Path, mask: &Path, genus: &str, out: &Path) -> Result<PipelineRun> {
    let mut outcome = cmd_reconstruct(cfg, image, mask, genus, out)?;
    outcome.extend(cmd_grow(cfg, &out.join(GRID_FILE), genus, out)?);
    let skeleton = out.join(SKELETON_FILE);
    let (phenotype, o) = cmd_measure(cfg, &skeleton, Some(&out.join(LEAVES_FILE)), None, false, out)?;
    outcome.extend(o);
    let (rows, o) = cmd_evaluate(cfg, std::slice::from_ref(&skeleton), &[out.join(MARKERS_FILE)], out)?;
    outcome.extend(o);
    Ok(PipelineRun {
        outcome,
        skeleton,
        metrics: out.join(METRICS_FILE),
        phenotype,
        rows,
    })
}
