//! Subcommand implementations. Each takes a plain argument struct so the
//! pipeline can be driven from tests without spawning the binary.

use crate::error::CliError;
use crate::formats::{afmbin, fgrid, geojson, pgm, report};
use log::{debug, info};
use polyfield_core::afm::{afm_loss, afm_loss_grad, encode_afm, AfmLossMode, AttractionField};
use polyfield_core::corners::{corners_from_heatmap, init_scene_polygons, nms_corners};
use polyfield_core::losses::{mask_bce, mask_bce_grad, ortho_loss, ortho_loss_grad, DEFAULT_CLAMP_EPS};
use polyfield_core::metrics::{evaluate_scene, EvalConfig};
use polyfield_core::refine::{
    attraction_energy, attraction_energy_grad, energy_refine, gcn_refine, load_weights,
    RefineConfig, RefineError,
};
use polyfield_core::synth::{render_scene, NoiseSpec, SceneSpec, SynthError};
use polyfield_core::{
    BinaryMask, Detection, InitConfig, Point2, PolygonRing, ProbGrid,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::{Path, PathBuf};

fn in_pool<T: Send>(parallel: bool, f: impl FnOnce() -> T + Send) -> T {
    if parallel {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub n_buildings: usize,
    pub out_dir: PathBuf,
    pub vertex_sigma: f64,
    pub flip_prob: f64,
    pub size_range: (usize, usize),
    pub corner_range: (usize, usize),
}

/// Generate a scene bundle: gt.geojson, pred.geojson (the corrupted
/// rings), mask.pgm, convex/concave maps with float sidecars, field.afm.
/// Re-running with identical arguments reproduces identical bytes.
pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let spec = SceneSpec {
        seed: args.seed,
        height: args.height,
        width: args.width,
        n_buildings: args.n_buildings,
        size_range: args.size_range,
        vertex_budget: args.corner_range,
        noise: NoiseSpec {
            vertex_sigma: args.vertex_sigma,
            mask_flip_prob: args.flip_prob,
        },
    };
    let scene = render_scene(&spec).map_err(|e| match e {
        SynthError::InvalidSpec(msg) => CliError::Validation(msg),
        other => CliError::Generation(other.to_string()),
    })?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let at = |name: &str| args.out_dir.join(name);
    let gt: Vec<(PolygonRing, Option<f64>)> =
        scene.gt_rings.iter().map(|r| (r.clone(), None)).collect();
    geojson::write_rings(at("gt.geojson"), &gt)?;
    let pred: Vec<(PolygonRing, Option<f64>)> = scene
        .corrupted_rings
        .iter()
        .map(|r| (r.clone(), Some(1.0)))
        .collect();
    geojson::write_rings(at("pred.geojson"), &pred)?;
    pgm::write_mask(at("mask.pgm"), &scene.mask)?;
    pgm::write_prob(at("convex.pgm"), &scene.convex_map)?;
    pgm::write_prob(at("concave.pgm"), &scene.concave_map)?;
    afmbin::write_afm(at("field.afm"), &scene.afm)?;
    info!(
        "wrote bundle to {} ({} buildings on {}x{})",
        args.out_dir.display(),
        scene.gt_rings.len(),
        args.width,
        args.height
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AfmArgs {
    pub input: PathBuf,
    pub height: usize,
    pub width: usize,
    pub output: PathBuf,
    pub parallel: bool,
}

/// Encode the attraction field of a ground-truth GeoJSON.
pub fn cmd_afm(args: &AfmArgs) -> Result<(), CliError> {
    let rings: Vec<PolygonRing> = geojson::read_rings(&args.input, true)?
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    let field = in_pool(args.parallel, || {
        encode_afm(&rings, args.height, args.width)
    })
    .map_err(|e| CliError::Validation(e.to_string()))?;
    afmbin::write_afm(&args.output, &field)?;
    debug!("encoded {} rings into {}", rings.len(), args.output.display());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct InitArgs {
    pub mask: PathBuf,
    pub convex: PathBuf,
    pub concave: PathBuf,
    pub output: PathBuf,
    pub epsilon: f64,
    pub nms_radius: f64,
    pub score_threshold: f64,
    pub missing_dist: f64,
}

/// Dynamic polygon initialization from a mask and corner heatmaps.
pub fn cmd_init(args: &InitArgs) -> Result<(), CliError> {
    let mask = pgm::read_mask(&args.mask)?;
    let convex = pgm::read_prob(&args.convex)?;
    let concave = pgm::read_prob(&args.concave)?;
    for (name, h, w) in [
        ("convex", convex.height(), convex.width()),
        ("concave", concave.height(), concave.width()),
    ] {
        if (h, w) != (mask.height(), mask.width()) {
            return Err(CliError::Validation(format!(
                "bundle dimension invariant violated: {name} map is {h}x{w}, mask is {}x{}",
                mask.height(),
                mask.width()
            )));
        }
    }
    let cfg = InitConfig {
        epsilon: args.epsilon,
        nms_radius: args.nms_radius,
        missing_dist: args.missing_dist,
        score_threshold: args.score_threshold,
    };
    if !(0.0..1.0).contains(&args.score_threshold) || args.score_threshold <= 0.0 {
        return Err(CliError::Validation(format!(
            "score threshold {} outside (0, 1)",
            args.score_threshold
        )));
    }
    if args.nms_radius <= 0.0 || args.epsilon < 0.0 || args.missing_dist < 0.0 {
        return Err(CliError::Validation(
            "nms radius must be positive; epsilon and missing distance non-negative".into(),
        ));
    }
    let corners = corners_from_heatmap(&convex, &concave, cfg.score_threshold);
    let kept = nms_corners(&corners, cfg.nms_radius);
    let rings = init_scene_polygons(&mask, &kept, &cfg)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    info!(
        "initialized {} polygons from {} corners",
        rings.len(),
        kept.len()
    );
    let out: Vec<(PolygonRing, Option<f64>)> = rings.into_iter().map(|r| (r, None)).collect();
    geojson::write_rings(&args.output, &out)
}

#[derive(Debug, Clone)]
pub struct RefineArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub field: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub steps: usize,
    pub offset_clamp: f64,
    pub lr: f64,
    pub iters: usize,
    pub lambda_ortho: f64,
}

fn map_refine_err(e: RefineError) -> CliError {
    match e {
        RefineError::Read { path, source } | RefineError::Write { path, source } => {
            CliError::Io {
                path: path.into(),
                source,
            }
        }
        RefineError::Malformed { path, source } => CliError::Parse {
            path: path.into(),
            location: format!("line {} column {}", source.line(), source.column()),
            detail: source.to_string(),
        },
        other => CliError::Validation(other.to_string()),
    }
}

/// Refine polygons either against an attraction field (energy descent) or
/// through a weight stack sampled on a feature grid (GCN forward pass).
pub fn cmd_refine(args: &RefineArgs) -> Result<(), CliError> {
    if args.lr <= 0.0 || args.iters == 0 || args.steps == 0 || args.offset_clamp <= 0.0 {
        return Err(CliError::Validation(
            "refine needs lr > 0, iters >= 1, steps >= 1, offset clamp > 0".into(),
        ));
    }
    let rings = geojson::read_rings(&args.input, false)?;
    let cfg = RefineConfig {
        steps: args.steps,
        offset_clamp: args.offset_clamp,
        lr: args.lr,
        iters: args.iters,
        lambda_ortho: args.lambda_ortho,
        share_step_weights: true,
    };
    let refined: Vec<(PolygonRing, Option<f64>)> = match (&args.field, &args.features) {
        (Some(field_path), None) => {
            let field = afmbin::read_afm(field_path)?;
            rings
                .into_iter()
                .map(|(r, s)| (energy_refine(&r, &field, &cfg), s))
                .collect()
        }
        (None, Some(features_path)) => {
            let weights_path = args.weights.as_ref().ok_or_else(|| {
                CliError::Validation("--features requires --weights".to_string())
            })?;
            let weights = load_weights(weights_path).map_err(map_refine_err)?;
            let fmap = fgrid::read_fgrid(features_path)?;
            rings
                .into_iter()
                .map(|(r, s)| {
                    gcn_refine(&r, &fmap, &weights, &cfg)
                        .map(|out| (out, s))
                        .map_err(map_refine_err)
                })
                .collect::<Result<_, _>>()?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "choose one of --field (energy refiner) or --features + --weights (GCN)".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "refine needs --field or --features + --weights".into(),
            ))
        }
    };
    geojson::write_rings(&args.output, &refined)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub output: PathBuf,
    pub csv: Option<PathBuf>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub iou_thresholds: Option<String>,
    pub parallel: bool,
}

/// Parse "0.5,0.55,0.6" or "0.5:0.95:0.05" into a threshold list.
pub fn parse_thresholds(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |detail: String| CliError::Validation(format!("--iou-thresholds: {detail}"));
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range form is start:stop:step".into()));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("{s:?}: {e}")))
        };
        let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step <= 0.0 || stop < start {
            return Err(bad("need stop >= start and step > 0".into()));
        }
        let n = ((stop - start) / step + 0.5).floor() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("{s:?}: {e}")))
            })
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(bad("list is empty".into()));
    }
    for &v in &values {
        if !(v > 0.0 && v <= 1.0) {
            return Err(bad(format!("threshold {v} outside (0, 1]")));
        }
    }
    Ok(values)
}

fn infer_grid(rings: &[&PolygonRing]) -> (usize, usize) {
    let (mut mx, mut my) = (0.0f64, 0.0f64);
    for r in rings {
        for v in r.vertices() {
            mx = mx.max(v.x);
            my = my.max(v.y);
        }
    }
    ((my + 2.0).ceil() as usize, (mx + 2.0).ceil() as usize)
}

/// Evaluate predictions against ground truth and write the report.
pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let preds = geojson::read_rings(&args.pred, false)?;
    let gts: Vec<PolygonRing> = geojson::read_rings(&args.gt, true)?
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    let dets: Vec<Detection> = preds
        .into_iter()
        .map(|(ring, score)| Detection {
            ring,
            score: score.unwrap_or(1.0),
        })
        .collect();
    let inferred = infer_grid(
        &dets
            .iter()
            .map(|d| &d.ring)
            .chain(gts.iter())
            .collect::<Vec<_>>(),
    );
    let mut cfg = EvalConfig::new(
        args.height.unwrap_or(inferred.0),
        args.width.unwrap_or(inferred.1),
    );
    if let Some(text) = &args.iou_thresholds {
        cfg.iou_thresholds = parse_thresholds(text)?;
    }
    let metrics = in_pool(args.parallel, || evaluate_scene(&dets, &gts, &cfg))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let named = [("scene", &metrics)];
    report::write_json(&args.output, &named)?;
    if let Some(csv) = &args.csv {
        report::write_csv(csv, &named)?;
    }
    info!(
        "eval: precision {:.4} recall {:.4} ap {:.4} ar {:.4}",
        metrics.precision, metrics.recall, metrics.ap, metrics.ar
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GradcheckArgs {
    pub seed: u64,
}

/// Softened relative error between an analytic derivative and a central
/// difference; the floor keeps the measure meaningful at near-zero
/// gradients where finite differences bottom out in rounding noise.
fn grad_rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / (analytic.abs() + fd.abs() + 1e-4)
}

const GRAD_TOL: f64 = 1e-4;
const FD_H: f64 = 1e-5;

fn check_bce(rng: &mut StdRng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let h = rng.gen_range(1..4);
        let w = rng.gen_range(1..4);
        let gt = BinaryMask::from_bits(h, w, (0..h * w).map(|_| rng.gen_bool(0.5)).collect())
            .expect("valid dims");
        let values: Vec<f64> = (0..h * w).map(|_| rng.gen_range(0.1..0.9)).collect();
        let pred = ProbGrid::from_values(h, w, values.clone()).expect("valid values");
        let grad = mask_bce_grad(&pred, &gt, DEFAULT_CLAMP_EPS).expect("matching dims");
        for idx in 0..h * w {
            let mut vp = values.clone();
            let mut vm = values.clone();
            vp[idx] += FD_H;
            vm[idx] -= FD_H;
            let lp = mask_bce(&ProbGrid::from_values(h, w, vp).unwrap(), &gt, DEFAULT_CLAMP_EPS).unwrap();
            let lm = mask_bce(&ProbGrid::from_values(h, w, vm).unwrap(), &gt, DEFAULT_CLAMP_EPS).unwrap();
            worst = worst.max(grad_rel_err(grad[idx], (lp - lm) / (2.0 * FD_H)));
        }
    }
    worst
}

fn check_afm(rng: &mut StdRng, mode: AfmLossMode) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let h = rng.gen_range(1..4);
        let w = rng.gen_range(1..4);
        let gt_v: Vec<[f64; 2]> = (0..h * w)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        // Keep residuals off the L1 kink so the loss is smooth at the
        // evaluation point.
        let pred_v: Vec<[f64; 2]> = gt_v
            .iter()
            .map(|v| {
                let mut out = [0.0; 2];
                for (c, dst) in out.iter_mut().enumerate() {
                    let off: f64 = rng.gen_range(0.05..1.0);
                    *dst = v[c] + off * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
                out
            })
            .collect();
        let gt = AttractionField::from_vectors(h, w, gt_v).expect("valid dims");
        let pred = AttractionField::from_vectors(h, w, pred_v.clone()).expect("valid dims");
        let grad = afm_loss_grad(&pred, &gt, mode).expect("matching dims");
        for idx in 0..h * w {
            for c in 0..2 {
                let mut vp = pred_v.clone();
                let mut vm = pred_v.clone();
                vp[idx][c] += FD_H;
                vm[idx][c] -= FD_H;
                let lp = afm_loss(
                    &AttractionField::from_vectors(h, w, vp).unwrap(),
                    &gt,
                    mode,
                )
                .unwrap();
                let lm = afm_loss(
                    &AttractionField::from_vectors(h, w, vm).unwrap(),
                    &gt,
                    mode,
                )
                .unwrap();
                worst = worst.max(grad_rel_err(
                    grad.vectors()[idx][c],
                    (lp - lm) / (2.0 * FD_H),
                ));
            }
        }
    }
    worst
}

fn check_ortho(rng: &mut StdRng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(3..9);
        let pts: Vec<Point2> = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                let r = rng.gen_range(2.0..4.0);
                Point2::new(10.0 + r * a.cos(), 10.0 + r * a.sin())
            })
            .collect();
        let ring = PolygonRing::new(pts.clone()).expect("valid ring");
        let grad = &ortho_loss_grad(&[ring])[0];
        for i in 0..n {
            for c in 0..2 {
                let eval = |delta: f64| {
                    let mut q = pts.clone();
                    if c == 0 {
                        q[i].x += delta;
                    } else {
                        q[i].y += delta;
                    }
                    ortho_loss(&[PolygonRing::new(q).unwrap()])
                };
                let fd = (eval(FD_H) - eval(-FD_H)) / (2.0 * FD_H);
                worst = worst.max(grad_rel_err(grad[i][c], fd));
            }
        }
    }
    worst
}

fn check_energy(rng: &mut StdRng) -> f64 {
    let square = PolygonRing::new(vec![
        Point2::new(3.5, 3.5),
        Point2::new(12.5, 3.5),
        Point2::new(12.5, 12.5),
        Point2::new(3.5, 12.5),
    ])
    .expect("valid ring");
    let field = encode_afm(&[square], 16, 16).expect("valid scene");
    let mut worst = 0.0f64;
    for _ in 0..50 {
        // Positions clear of bilinear cell boundaries.
        let pts: Vec<Point2> = (0..4)
            .map(|_| {
                Point2::new(
                    rng.gen_range(2..14) as f64 + rng.gen_range(0.6..0.9),
                    rng.gen_range(2..14) as f64 + rng.gen_range(0.6..0.9),
                )
            })
            .collect();
        let grad = attraction_energy_grad(&pts, &field);
        for i in 0..pts.len() {
            for c in 0..2 {
                let eval = |delta: f64| {
                    let mut q = pts.clone();
                    if c == 0 {
                        q[i].x += delta;
                    } else {
                        q[i].y += delta;
                    }
                    attraction_energy(&q, &field)
                };
                let fd = (eval(FD_H) - eval(-FD_H)) / (2.0 * FD_H);
                worst = worst.max(grad_rel_err(grad[i][c], fd));
            }
        }
    }
    worst
}

/// Run the full finite-difference suite; succeeds only when every check
/// stays under the tolerance.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let mut rng = StdRng::seed_from_u64(args.seed);
    let checks: Vec<(&str, f64)> = vec![
        ("mask_bce", check_bce(&mut rng)),
        ("afm_loss[sq_l2]", check_afm(&mut rng, AfmLossMode::SqL2)),
        ("afm_loss[l1]", check_afm(&mut rng, AfmLossMode::L1)),
        ("ortho_loss", check_ortho(&mut rng)),
        ("energy_data_term", check_energy(&mut rng)),
    ];
    let mut failures = Vec::new();
    for (name, err) in &checks {
        let status = if *err < GRAD_TOL { "ok" } else { "FAIL" };
        println!("gradcheck {name:<18} max rel err {err:.3e} (tol {GRAD_TOL:.0e}) ... {status}");
        if *err >= GRAD_TOL {
            failures.push(*name);
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "gradient checks failed: {}",
            failures.join(", ")
        )))
    }
}

/// Convenience for tests: returns the parsed grid dimensions a bundle
/// directory was generated with.
pub fn bundle_dims(dir: &Path) -> Result<(usize, usize), CliError> {
    let mask = pgm::read_mask(dir.join("mask.pgm"))?;
    Ok((mask.height(), mask.width()))
}
