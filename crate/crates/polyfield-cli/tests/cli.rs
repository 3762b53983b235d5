//! End-to-end pipeline tests through the command layer and the installed
//! binary: spec'd worked examples, exit codes, and format interplay.

use polyfield_cli::commands::{
    cmd_afm, cmd_eval, cmd_gen, cmd_init, cmd_refine, AfmArgs, EvalArgs, GenArgs, InitArgs,
    RefineArgs,
};
use polyfield_cli::formats::{afmbin, fgrid, geojson};
use polyfield_cli::CliError;
use polyfield_core::afm::decode_afm;
use polyfield_core::raster::rasterize_union;
use polyfield_core::refine::{save_weights, Activation, GcnHead, GcnLayer, GcnWeights};
use polyfield_core::FeatureGrid;
use std::path::Path;
use std::process::Command;

fn gen(seed: u64, n: usize, sigma: f64, dir: &Path) -> GenArgs {
    GenArgs {
        seed,
        height: 128,
        width: 128,
        n_buildings: n,
        out_dir: dir.to_path_buf(),
        vertex_sigma: sigma,
        flip_prob: 0.0,
        size_range: (16, 40),
        corner_range: (4, 8),
    }
}

#[test]
fn eval_of_gt_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(21, 3, 2.0, dir.path())).unwrap();
    let report_path = dir.path().join("report.json");
    let csv_path = dir.path().join("report.csv");
    cmd_eval(&EvalArgs {
        pred: dir.path().join("gt.geojson"),
        gt: dir.path().join("gt.geojson"),
        output: report_path.clone(),
        csv: Some(csv_path.clone()),
        height: Some(128),
        width: Some(128),
        iou_thresholds: None,
        parallel: false,
    })
    .unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let scene = &doc["scenes"][0];
    assert_eq!(scene["polis_mean"], 0.0);
    assert_eq!(scene["mta_mean"], 0.0);
    assert_eq!(scene["ap"], 1.0);
    assert_eq!(scene["ar"], 1.0);
    assert_eq!(scene["precision"], 1.0);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("scene,precision,recall"));
    assert!(csv.lines().count() >= 3);
}

#[test]
fn afm_command_round_trips_through_decode() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(33, 2, 0.0, dir.path())).unwrap();
    let out = dir.path().join("encoded.afm");
    cmd_afm(&AfmArgs {
        input: dir.path().join("gt.geojson"),
        height: 128,
        width: 128,
        output: out.clone(),
        parallel: true,
    })
    .unwrap();
    let field = afmbin::read_afm(&out).unwrap();
    let rings: Vec<_> = geojson::read_rings(dir.path().join("gt.geojson"), true)
        .unwrap()
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    let mask = rasterize_union(&rings, 128, 128).unwrap();
    let decoded = decode_afm(&field, 1);
    let boundary = mask.boundary_pixels();
    let hit = boundary.iter().filter(|&&(i, j)| decoded.get(i, j)).count();
    assert!(
        hit as f64 >= 0.99 * boundary.len() as f64,
        "recall {hit}/{}",
        boundary.len()
    );
}

#[test]
fn init_command_reconstructs_clean_scene() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(55, 3, 0.0, dir.path())).unwrap();
    let out = dir.path().join("init.geojson");
    cmd_init(&InitArgs {
        mask: dir.path().join("mask.pgm"),
        convex: dir.path().join("convex.pgm"),
        concave: dir.path().join("concave.pgm"),
        output: out.clone(),
        epsilon: 1.0,
        nms_radius: 3.0,
        score_threshold: 0.5,
        missing_dist: 3.0,
    })
    .unwrap();
    let init = geojson::read_rings(&out, true).unwrap();
    let gt = geojson::read_rings(dir.path().join("gt.geojson"), true).unwrap();
    assert_eq!(init.len(), gt.len());
}

#[test]
fn refine_with_zero_head_weights_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(77, 2, 2.0, dir.path())).unwrap();

    // A constant 1-channel feature map and a zero head.
    let fmap = FeatureGrid::from_values(128, 128, 1, vec![0.25; 128 * 128]).unwrap();
    let fmap_path = dir.path().join("features.fgr");
    fgrid::write_fgrid(&fmap_path, &fmap).unwrap();
    let weights = GcnWeights {
        layers: vec![GcnLayer {
            w_self: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            w_nbr: vec![vec![0.0; 3]; 3],
            bias: vec![0.0; 3],
            activation: Activation::Identity,
        }],
        head: GcnHead {
            w: vec![vec![0.0; 3], vec![0.0; 3]],
            bias: vec![0.0, 0.0],
        },
    };
    let weights_path = dir.path().join("weights.json");
    save_weights(&weights, &weights_path).unwrap();

    let out = dir.path().join("refined.geojson");
    cmd_refine(&RefineArgs {
        input: dir.path().join("pred.geojson"),
        output: out.clone(),
        field: None,
        features: Some(fmap_path),
        weights: Some(weights_path),
        steps: 3,
        offset_clamp: 8.0,
        lr: 0.05,
        iters: 100,
        lambda_ortho: 2.0,
    })
    .unwrap();
    let input = geojson::read_rings(dir.path().join("pred.geojson"), false).unwrap();
    let output = geojson::read_rings(&out, false).unwrap();
    assert_eq!(input.len(), output.len());
    for ((a, _), (b, _)) in input.iter().zip(&output) {
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9);
        }
    }
}

#[test]
fn energy_refine_command_improves_report() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(99, 3, 2.0, dir.path())).unwrap();
    let refined = dir.path().join("refined.geojson");
    cmd_refine(&RefineArgs {
        input: dir.path().join("pred.geojson"),
        output: refined.clone(),
        field: Some(dir.path().join("field.afm")),
        features: None,
        weights: None,
        steps: 3,
        offset_clamp: 8.0,
        lr: 0.05,
        iters: 1000,
        lambda_ortho: 2.0,
    })
    .unwrap();
    let eval = |pred: &Path, out: &Path| -> f64 {
        cmd_eval(&EvalArgs {
            pred: pred.to_path_buf(),
            gt: dir.path().join("gt.geojson"),
            output: out.to_path_buf(),
            csv: None,
            height: Some(128),
            width: Some(128),
            iou_thresholds: None,
            parallel: false,
        })
        .unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
        doc["scenes"][0]["polis_mean"].as_f64().unwrap()
    };
    let before = eval(&dir.path().join("pred.geojson"), &dir.path().join("r0.json"));
    let after = eval(&refined, &dir.path().join("r1.json"));
    assert!(
        after < 0.6 * before,
        "refinement did not improve PoLiS: {before} → {after}"
    );
}

#[test]
fn refine_argument_validation() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(&gen(13, 1, 1.0, dir.path())).unwrap();
    let args = RefineArgs {
        input: dir.path().join("pred.geojson"),
        output: dir.path().join("out.geojson"),
        field: None,
        features: None,
        weights: None,
        steps: 3,
        offset_clamp: 8.0,
        lr: 0.05,
        iters: 10,
        lambda_ortho: 2.0,
    };
    match cmd_refine(&args) {
        Err(e @ CliError::Validation(_)) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected validation error, got {other:?}"),
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyfield"))
}

#[test]
fn binary_runs_are_deterministic_and_exit_codes_hold() {
    let dir = tempfile::tempdir().unwrap();
    let run_gen = |out: &Path| {
        binary()
            .args([
                "gen", "--seed", "8", "--height", "96", "--width", "96", "--n", "2", "--out",
            ])
            .arg(out)
            .status()
            .unwrap()
    };
    let d1 = dir.path().join("a");
    let d2 = dir.path().join("b");
    assert!(run_gen(&d1).success());
    assert!(run_gen(&d2).success());
    for name in ["gt.geojson", "pred.geojson", "mask.pgm", "field.afm"] {
        assert_eq!(
            std::fs::read(d1.join(name)).unwrap(),
            std::fs::read(d2.join(name)).unwrap()
        );
    }

    // Placement failure: diagnostic on stderr, exit code 2.
    let out = binary()
        .args([
            "gen", "--seed", "1", "--height", "48", "--width", "48", "--n", "30", "--out",
        ])
        .arg(dir.path().join("impossible"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("place"), "stderr: {stderr}");

    // Unreadable input: exit code 2; unparsable input: exit code 1.
    let status = binary()
        .args(["eval", "--pred", "missing.geojson", "--gt", "missing.geojson", "--out"])
        .arg(dir.path().join("r.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let bad = dir.path().join("bad.geojson");
    std::fs::write(&bad, "{not json").unwrap();
    let status = binary()
        .args(["eval", "--pred"])
        .arg(&bad)
        .args(["--gt"])
        .arg(&bad)
        .args(["--out"])
        .arg(dir.path().join("r.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Gradient suite exits 0 and prints one line per check.
    let out = binary().args(["gradcheck", "--seed", "7"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("gradcheck")).count(), 5);
}
