use std::path::Path;
use std::process::{Command, Output};

use fgembed_core::io::{self, Image};
use fgembed_core::synth::{Primitive, Shape};
use fgembed_core::{transfer_fg, GridDomain, RankMap, SceneSpec, SegmentationMap};

fn fgembed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fgembed"))
        .args(args)
        .current_dir(dir)
        .env_remove("FGEMBED_CONFIG")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fgembed(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_spec(dir: &Path, name: &str, spec: &SceneSpec) {
    std::fs::write(dir.join(name), serde_json::to_string(spec).unwrap()).unwrap();
}

fn disk_spec() -> SceneSpec {
    SceneSpec {
        height: 40,
        width: 40,
        shapes: vec![Shape { primitive: Primitive::Disk { cy: 19.5, cx: 19.5, radius: 10.0 }, depth: 1 }],
        seed: 0,
    }
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = fgembed(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("globalize"));
    assert_eq!(fgembed(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(fgembed(dir.path(), &["embed"]).status.code(), Some(1));
    assert_eq!(fgembed(dir.path(), &["embed", "x", "-o", "y", "--phi", "3"]).status.code(), Some(1));
    assert_eq!(fgembed(dir.path(), &["embed", "x", "-o", "y", "--radii", "4,16"]).status.code(), Some(1));
    assert_eq!(fgembed(dir.path(), &["bench", "a", "b", "c", "d"]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = fgembed(dir.path(), &["embed", "missing.aff1", "-o", "x.eig1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.aff1"));
    std::fs::write(dir.path().join("junk.aff1"), b"AFF1\x01").unwrap();
    assert_eq!(fgembed(dir.path(), &["embed", "junk.aff1", "-o", "x.eig1"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), r#"{"sigmab": 1}"#).unwrap();
    let bad = fgembed(dir.path(), &["--config", "bad.json", "embed", "a", "-o", "b"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown field"));
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"m": 5, "phi": 0.5}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fgembed"))
        .args(["--print-config", "--m", "7", "synth", "-o", "unused"])
        .current_dir(dir.path())
        .env("FGEMBED_CONFIG", "c.json")
        .output()
        .unwrap();
    assert!(out.status.success());
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["m"], 7);
    assert_eq!(cfg["phi"], 0.5);
    assert_eq!(cfg["sigma_b"], 0.1);
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn predict_constant_image_has_no_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let d = GridDomain::new(12, 10).unwrap();
    io::write_image(dir.path().join("flat.pgm"), &Image::gray(d, vec![0.6; d.len()])).unwrap();
    ok(dir.path(), &["predict", "flat.pgm", "-o", "flat.aff1"]);
    let rel = io::read_aff1(dir.path().join("flat.aff1")).unwrap();
    assert_eq!(rel.stencil().len(), 24);
    assert!(rel.b_tensor().iter().all(|&b| b == 0.0));

    ok(dir.path(), &["embed", "flat.aff1", "-o", "flat.eig1", "--m", "2"]);
    ok(dir.path(), &["decode", "flat.eig1", "-o", "dec"]);
    let rank = io::read_rnk1(dir.path().join("dec/rank.rnk1")).unwrap();
    assert!(rank.spread() < 1e-6);
}

#[test]
fn decode_with_one_eigenvector_keeps_the_rank_map() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "disk.json", &disk_spec());
    ok(dir.path(), &["synth", "--spec", "disk.json", "-o", "s"]);
    ok(dir.path(), &["embed", "s/targets.aff1", "-o", "one.eig1", "--m", "1"]);
    let out = fgembed(dir.path(), &["decode", "one.eig1", "-o", "dec"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("dec/rank.rnk1").exists());
    assert!(!dir.path().join("dec/segments.seg1").exists());
}

#[test]
fn solver_budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "disk.json", &disk_spec());
    ok(dir.path(), &["synth", "--spec", "disk.json", "-o", "s"]);
    let out = fgembed(dir.path(), &["embed", "s/targets.aff1", "-o", "e.eig1", "--m", "8", "--max-iter", "20"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residuals"));
}

#[test]
fn disk_scene_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "disk.json", &disk_spec());
    ok(dir.path(), &["synth", "--spec", "disk.json", "-o", "s"]);
    for f in ["spec.json", "image.pgm", "segments.seg1", "rank.rnk1", "ownership.own1", "targets.aff1"] {
        assert!(dir.path().join("s").join(f).exists(), "{f}");
    }
    let residuals = ok(dir.path(), &["embed", "s/targets.aff1", "-o", "e.eig1", "--m", "4"]);
    assert_eq!(residuals.lines().count(), 5);
    ok(dir.path(), &["decode", "e.eig1", "-o", "dec"]);
    let seg = io::read_seg1(dir.path().join("dec/segments.seg1")).unwrap();
    assert_eq!(seg.region_count(), 2);
    let rank = io::read_rnk1(dir.path().join("dec/rank.rnk1")).unwrap();
    let medians = transfer_fg(&rank, &seg).unwrap();
    let d = seg.domain();
    assert!(medians[seg.label(d.index(19, 19))] > medians[seg.label(d.index(0, 0))]);
    let painted = io::read_rnk1(dir.path().join("dec/region_rank.rnk1")).unwrap();
    assert_eq!(painted.theta[d.index(19, 19)] as f32, medians[seg.label(d.index(19, 19))] as f32);
    let boundary = io::load_image(dir.path().join("dec/boundary.pgm")).unwrap();
    assert_eq!(boundary.domain, d);
}

#[test]
fn globalize_orders_three_layers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        height: 36,
        width: 36,
        shapes: vec![
            Shape { primitive: Primitive::Rect { top: 4, left: 4, height: 28, width: 28 }, depth: 1 },
            Shape { primitive: Primitive::Disk { cy: 18.0, cx: 18.0, radius: 7.0 }, depth: 2 },
        ],
        seed: 0,
    };
    write_spec(dir.path(), "nest.json", &spec);
    ok(dir.path(), &["synth", "--spec", "nest.json", "-o", "s"]);
    ok(dir.path(), &["globalize", "--seg", "s/segments.seg1", "--own", "s/ownership.own1", "-o", "g.rnk1"]);
    let seg = io::read_seg1(dir.path().join("s/segments.seg1")).unwrap();
    let medians = transfer_fg(&io::read_rnk1(dir.path().join("g.rnk1")).unwrap(), &seg).unwrap();
    let d = seg.domain();
    let at = |r, c| medians[seg.label(d.index(r, c))];
    assert!(at(18, 18) > at(5, 5));
    assert!(at(5, 5) > at(0, 0));

    let report = ok(dir.path(), &["bench", "g.rnk1", "s/rank.rnk1", "s/segments.seg1"]);
    assert!(report.contains("R-ACC     1.0000 (2/2)"), "{report}");
}

#[test]
fn globalize_single_region_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec { height: 8, width: 9, shapes: vec![], seed: 0 };
    write_spec(dir.path(), "empty.json", &spec);
    ok(dir.path(), &["synth", "--spec", "empty.json", "-o", "s"]);
    ok(dir.path(), &["globalize", "--seg", "s/segments.seg1", "--own", "s/ownership.own1", "-o", "g.rnk1"]);
    assert!(io::read_rnk1(dir.path().join("g.rnk1")).unwrap().spread() < 1e-6);
}

#[test]
fn bench_reports_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = GridDomain::new(2, 6).unwrap();
    // strip A | B | C; both boundaries have 4 pixels
    let raw = [0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2];
    let seg = SegmentationMap::from_partition(d, &raw).unwrap();
    let gt: Vec<f64> = raw.iter().map(|&r| [3.0, 2.0, 1.0][r]).collect();
    let inverted: Vec<f64> = gt.iter().map(|v| -v).collect();
    let half: Vec<f64> = raw.iter().map(|&r| [3.0, 1.0, 2.0][r]).collect();
    io::write_seg1(dir.path().join("s.seg1"), &seg).unwrap();
    for (name, v) in [("gt", &gt), ("inv", &inverted), ("half", &half)] {
        io::write_rnk1(dir.path().join(format!("{name}.rnk1")), &RankMap::new(d, v.clone()).unwrap()).unwrap();
    }
    let same = ok(dir.path(), &["bench", "gt.rnk1", "gt.rnk1", "s.seg1"]);
    assert!(same.contains("R-ACC     1.0000 (2/2)"));
    assert!(same.contains("B-ACC     1.0000 (8/8)"));
    let inv = ok(dir.path(), &["bench", "inv.rnk1", "gt.rnk1", "s.seg1"]);
    assert!(inv.contains("R-ACC     0.0000 (0/2)"));

    let both = ok(
        dir.path(),
        &["bench", "half.rnk1", "gt.rnk1", "s.seg1", "gt.rnk1", "gt.rnk1", "s.seg1", "--json", "r.json"],
    );
    assert!(both.contains("R-ACC     0.5000 (1/2)"));
    assert!(both.contains("# pooled over 2 images"));
    assert!(both.contains("R-ACC     0.7500 (3/4)"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["images"].as_array().unwrap().len(), 2);
    assert_eq!(json["aggregate"]["pooled"]["r_acc"]["correct"], 3);
    assert_eq!(json["aggregate"]["per_image_mean"][0], 0.75);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["synth", "-o", "s", "--height", "24", "--width", "30", "--shapes", "2", "--scene-seed", "4"]);
    ok(p, &["predict", "s/image.pgm", "-o", "p.aff1"]);
    let first = ok(p, &["embed", "p.aff1", "-o", "a.eig1", "--m", "3", "--seed", "11"]);
    let second = ok(p, &["embed", "p.aff1", "-o", "b.eig1", "--m", "3", "--seed", "11"]);
    assert_eq!(first, second);
    assert_eq!(std::fs::read(p.join("a.eig1")).unwrap(), std::fs::read(p.join("b.eig1")).unwrap());
    ok(p, &["synth", "-o", "t", "--height", "24", "--width", "30", "--shapes", "2", "--scene-seed", "4"]);
    for f in ["image.pgm", "segments.seg1", "rank.rnk1", "ownership.own1", "targets.aff1", "spec.json"] {
        assert_eq!(std::fs::read(p.join("s").join(f)).unwrap(), std::fs::read(p.join("t").join(f)).unwrap(), "{f}");
    }
}
