//! Drives the `arbor` binary end to end on small synthetic inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arbor::distill::disk_target;
use arbor::envelope::OccupancyVolume;
use arbor::growth::TreeSkeleton;
use arbor::{Aabb, Vec3};
use serde_json::Value;

fn arbor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbor"))
        .args(args)
        .env_remove("ARBOR_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

/// Sphere of radius 0.6 m centered 1.2 m above the ground.
fn sphere_occ(dir: &Path) -> PathBuf {
    let ext = Aabb::new(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 2.0));
    let c = Vec3::new(0.0, 0.0, 1.2);
    let p = dir.join("sphere.occ");
    OccupancyVolume::from_fn([20; 3], ext, |q| (q - c).norm() <= 0.6)
        .unwrap()
        .write(&p)
        .unwrap();
    p
}

fn disk_files(dir: &Path) -> (PathBuf, PathBuf) {
    let (img, mask) = disk_target(24, 6.0, [0.2, 0.5, 0.2]);
    let (ip, mp) = (dir.join("disk.png"), dir.join("disk_mask.png"));
    img.write(&ip).unwrap();
    mask.write_binary(&mp).unwrap();
    (ip, mp)
}

#[test]
fn missing_mask_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = disk_files(dir.path());
    let out = dir.path().join("out");
    let o = arbor(&[
        "reconstruct",
        "--image",
        s(&img),
        "--mask",
        s(&dir.path().join("nope.png")),
        "--genus",
        "Pinus",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_flags_and_unknown_genus_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let occ = sphere_occ(dir.path());
    assert_eq!(code(&arbor(&["grow"])), 2);
    let o = arbor(&["grow", s(&occ), "--genus", "Quercus", "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    let o = arbor(&[
        "grow",
        s(&occ),
        "--genus",
        "Pinus",
        "--jobs",
        "0",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reconstruct_manifest_echoes_default_weights() {
    let dir = tempfile::tempdir().unwrap();
    let (img, mask) = disk_files(dir.path());
    let cfg = write_config(
        dir.path(),
        r#"{"recon": {"grid_resolution": 8, "render_steps": 16, "prior_image_size": 8}}"#,
    );
    let out = dir.path().join("out");
    let o = arbor(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--image",
        s(&img),
        "--mask",
        s(&mask),
        "--genus",
        "Magnolia",
        "--iterations",
        "120",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("reconstruct.json"));
    assert_eq!(m["config"]["lambda_rgb"], 5.0);
    assert_eq!(m["config"]["lambda_mask"], 20.0);
    assert_eq!(m["config"]["alpha"], 1.0);
    assert_eq!(m["config"]["beta"], 8.0);
    assert_eq!(m["config"]["lr"], 0.001);
    assert_eq!(m["config"]["iterations"], 120);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["status"], "ok");
    let its: Vec<u64> = m["losses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["iteration"].as_u64().unwrap())
        .collect();
    assert_eq!(its, vec![0, 100, 119]);
    assert!(out.join("grid.arbg").exists());

    // the checkpoint feeds straight into grow
    let o = arbor(&[
        "grow",
        s(&out.join("grid.arbg")),
        "--genus",
        "Magnolia",
        "--out",
        s(&out),
    ]);
    assert!(code(&o) == 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("skeleton.json").exists());
}

#[test]
fn non_finite_loss_exits_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let (img, mask) = disk_files(dir.path());
    let cfg = write_config(
        dir.path(),
        r#"{"recon": {"grid_resolution": 4, "iterations": 3, "alpha": 0, "beta": 0, "lambda_mask": 1.7976931348623157e308}}"#,
    );
    let out = dir.path().join("out");
    let o = arbor(&[
        "reconstruct",
        "--config",
        s(&cfg),
        "--image",
        s(&img),
        "--mask",
        s(&mask),
        "--genus",
        "Pinus",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 1);
    let m = read_json(&out.join("reconstruct.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["diagnostic"]["iteration"], 0);
    assert!(!out.join("grid.arbg").exists());
}

#[test]
fn grow_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let occ = sphere_occ(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        code(&arbor(&[
            "grow",
            s(&occ),
            "--genus",
            "Pinus",
            "--seed",
            "11",
            "--out",
            s(&a)
        ])),
        0
    );
    assert_eq!(
        code(&arbor(&[
            "grow",
            s(&occ),
            "--genus",
            "Pinus",
            "--seed",
            "11",
            "--jobs",
            "3",
            "--out",
            s(&b)
        ])),
        0
    );
    for f in ["envelope.occ", "markers.ply", "skeleton.json", "tree.obj", "leaves.ply"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let m = read_json(&a.join("grow.json"));
    assert!(m["coverage"].as_f64().unwrap() >= 0.95);
    assert_eq!(m["warnings"].as_array().unwrap().len(), 0);
}

#[test]
fn wall_in_config_keeps_nodes_on_the_open_side() {
    let dir = tempfile::tempdir().unwrap();
    let occ = sphere_occ(dir.path());
    let cfg = write_config(
        dir.path(),
        r#"{"growth": {"obstacles": [{"type": "wall", "point": [-0.2, 0, 0], "normal": [1, 0, 0]}]}}"#,
    );
    let out = dir.path().join("out");
    let o = arbor(&[
        "grow",
        s(&occ),
        "--genus",
        "Ligustrum",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (skel, _) = TreeSkeleton::read_json(&out.join("skeleton.json")).unwrap();
    assert!(skel.len() > 5);
    assert!(skel.nodes.iter().all(|n| n.position.x >= -0.2));
}

#[test]
fn strict_escalates_empty_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.occ");
    OccupancyVolume::from_fn([4; 3], Aabb::new(Vec3::ZERO, Vec3::splat(1.0)), |_| false)
        .unwrap()
        .write(&p)
        .unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&arbor(&["grow", s(&p), "--genus", "Pinus", "--out", s(&out)])), 0);
    assert_eq!(
        code(&arbor(&[
            "grow",
            s(&p),
            "--genus",
            "Pinus",
            "--strict",
            "--out",
            s(&out)
        ])),
        1
    );
}

#[test]
fn simulate_snapshots_nest_and_flag_overruns() {
    let dir = tempfile::tempdir().unwrap();
    let occ = sphere_occ(dir.path());
    let out = dir.path().join("out");
    let o = arbor(&[
        "simulate",
        s(&occ),
        "--genus",
        "Magnolia",
        "--steps",
        "0,5,10,1000",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps: Vec<TreeSkeleton> = [0, 5, 10, 1000]
        .iter()
        .map(|k| {
            TreeSkeleton::read_json(&out.join(format!("snapshot_{k}.json")))
                .unwrap()
                .0
        })
        .collect();
    // step 0 is the trunk seed: an unbranched chain
    assert!(snaps[0].nodes.iter().all(|n| n.creation_step == 0));
    assert!(snaps[0].children().iter().all(|c| c.len() <= 1));
    for w in snaps.windows(2) {
        assert!(w[0].len() <= w[1].len());
        for (x, y) in w[0].nodes.iter().zip(&w[1].nodes) {
            assert_eq!((x.position, x.parent), (y.position, y.parent));
        }
    }
    let m = read_json(&out.join("simulate.json"));
    let flags: Vec<bool> = m["snapshots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["beyond_termination"].as_bool().unwrap())
        .collect();
    assert_eq!(flags, vec![false, false, false, true]);
    let strict = arbor(&[
        "simulate",
        s(&occ),
        "--genus",
        "Magnolia",
        "--steps",
        "1000",
        "--strict",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&strict), 1);
}

#[test]
fn measure_cylinder_and_shadow_rasters() {
    let dir = tempfile::tempdir().unwrap();
    let mut skel = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::new(0.0, 0.0, 3.0)]);
    for n in &mut skel.nodes {
        n.radius = 0.1;
    }
    let sp = dir.path().join("cyl.json");
    skel.write_json(&sp, "Pinus", 0).unwrap();
    let out = dir.path().join("out");
    let o = arbor(&["measure", s(&sp), "--sun", "0,0", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = arbor(&["measure", s(&sp), "--sun", "0,0,-1", "--shadow-pgm", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("phenotype.json"));
    assert_eq!(m["report"]["dbh"], 20.0);
    assert_eq!(m["report"]["height"], 3.0);
    assert!(out.join("shadow_leaf_off.pgm").exists());

    // a trunk shorter than breast height has no DBH
    let short = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)]);
    let shp = dir.path().join("short.json");
    short.write_json(&shp, "Pinus", 0).unwrap();
    assert_eq!(code(&arbor(&["measure", s(&shp), "--out", s(&out)])), 0);
    assert!(read_json(&out.join("phenotype.json"))["report"]["dbh"].is_null());
    assert_eq!(code(&arbor(&["measure", s(&shp), "--strict", "--out", s(&out)])), 1);
}

#[test]
fn evaluate_rows_follow_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let straight = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(0.0, 0.0, 2.0)]);
    let bent = TreeSkeleton::chain(&[Vec3::ZERO, Vec3::Z, Vec3::new(1.0, 0.0, 1.0)]);
    let (a, b) = (dir.path().join("straight.json"), dir.path().join("bent.json"));
    straight.write_json(&a, "Pinus", 0).unwrap();
    bent.write_json(&b, "Pinus", 0).unwrap();
    let out = dir.path().join("out");
    let o = arbor(&["evaluate", s(&a), s(&b), "--jobs", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["tree"], "straight.json");
    assert!(rows[0]["chamfer"].is_null());
    assert_eq!(rows[0]["straightness"]["mean"], 1.0);
    assert!(rows[1]["straightness"]["mean"].as_f64().unwrap() < 1.0);

    // two references for three skeletons is ambiguous
    let o = arbor(&[
        "evaluate",
        s(&a),
        s(&b),
        s(&a),
        "--reference",
        s(&a),
        "--reference",
        s(&b),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn curate_orders_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("imgs");
    std::fs::create_dir(&imgs).unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&arbor(&["curate", s(&imgs), "--out", s(&out)])), 0);
    let m = read_json(&out.join("curation.json"));
    assert_eq!(m["images"].as_array().unwrap().len(), 0);

    let flat = arbor::imaging::Image::filled(32, 32, 3, 0.5).unwrap();
    let checker = arbor::imaging::Image::from_fn(32, 32, 3, |x, y| vec![((x + y) % 2) as f64; 3]).unwrap();
    flat.write(&imgs.join("a_flat.png")).unwrap();
    checker.write(&imgs.join("b_checker.png")).unwrap();
    std::fs::write(imgs.join("c_notes.txt"), "not an image").unwrap();
    assert_eq!(code(&arbor(&["curate", s(&imgs), "--patch", "8", "--out", s(&out)])), 0);
    let m = read_json(&out.join("curation.json"));
    assert_eq!(m["kept"], serde_json::json!(["b_checker.png"]));
    assert_eq!(m["rejected"], serde_json::json!(["a_flat.png"]));
    assert_eq!(m["skipped"].as_array().unwrap().len(), 1);
    let o = arbor(&["curate", s(&imgs), "--patch", "8", "--threshold", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        read_json(&out.join("curation.json"))["kept"].as_array().unwrap().len(),
        2
    );
}
