use clap::{Parser, Subcommand};
use polyfield_cli::commands::{
    cmd_afm, cmd_eval, cmd_gen, cmd_gradcheck, cmd_init, cmd_refine, AfmArgs, EvalArgs, GenArgs,
    GradcheckArgs, InitArgs, RefineArgs,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Building-footprint reconstruction pipeline: synthetic scene bundles,
/// attraction-field encoding, dynamic polygon initialization, iterative
/// refinement, and raster + vector evaluation.
///
/// Set POLYFIELD_LOG to error, info, or debug to control logging.
#[derive(Parser)]
#[command(name = "polyfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene bundle into a directory.
    Gen {
        /// RNG seed; the bundle is a pure function of the arguments.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        /// Number of buildings to place.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Output directory for the bundle.
        #[arg(long)]
        out: PathBuf,
        /// Gaussian jitter applied per vertex to produce pred.geojson.
        #[arg(long, default_value_t = 2.0)]
        vertex_sigma: f64,
        /// Per-pixel mask corruption probability.
        #[arg(long, default_value_t = 0.0)]
        flip_prob: f64,
        #[arg(long, default_value_t = 16)]
        size_min: usize,
        #[arg(long, default_value_t = 40)]
        size_max: usize,
        #[arg(long, default_value_t = 4)]
        corners_min: usize,
        #[arg(long, default_value_t = 10)]
        corners_max: usize,
    },
    /// Encode the attraction field of a ground-truth GeoJSON.
    Afm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        out: PathBuf,
        /// Use all cores for encoding.
        #[arg(long, default_value_t = false)]
        parallel: bool,
    },
    /// Initialize polygons from a mask and corner heatmaps.
    Init {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        convex: PathBuf,
        #[arg(long)]
        concave: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Contour simplification tolerance in pixels.
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 3.0)]
        nms_radius: f64,
        #[arg(long, default_value_t = 0.5)]
        score_threshold: f64,
        #[arg(long, default_value_t = 3.0)]
        missing_dist: f64,
    },
    /// Refine polygons with the energy descender (--field) or a GCN
    /// forward pass (--features + --weights).
    Refine {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 8.0)]
        offset_clamp: f64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 2.0)]
        lambda_ortho: f64,
    },
    /// Evaluate predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// JSON report output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional flat CSV alongside the JSON report.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Raster grid height; inferred from the data when omitted.
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        /// "0.5,0.6,0.7" or "0.5:0.95:0.05"; the standard sweep by default.
        #[arg(long)]
        iou_thresholds: Option<String>,
        #[arg(long, default_value_t = false)]
        parallel: bool,
    },
    /// Run the finite-difference gradient suite; exits 0 iff all pass.
    Gradcheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), polyfield_cli::CliError> {
    match cli.command {
        Command::Gen {
            seed,
            height,
            width,
            n,
            out,
            vertex_sigma,
            flip_prob,
            size_min,
            size_max,
            corners_min,
            corners_max,
        } => cmd_gen(&GenArgs {
            seed,
            height,
            width,
            n_buildings: n,
            out_dir: out,
            vertex_sigma,
            flip_prob,
            size_range: (size_min, size_max),
            corner_range: (corners_min, corners_max),
        }),
        Command::Afm {
            input,
            height,
            width,
            out,
            parallel,
        } => cmd_afm(&AfmArgs {
            input,
            height,
            width,
            output: out,
            parallel,
        }),
        Command::Init {
            mask,
            convex,
            concave,
            out,
            epsilon,
            nms_radius,
            score_threshold,
            missing_dist,
        } => cmd_init(&InitArgs {
            mask,
            convex,
            concave,
            output: out,
            epsilon,
            nms_radius,
            score_threshold,
            missing_dist,
        }),
        Command::Refine {
            input,
            out,
            field,
            features,
            weights,
            steps,
            offset_clamp,
            lr,
            iters,
            lambda_ortho,
        } => cmd_refine(&RefineArgs {
            input,
            output: out,
            field,
            features,
            weights,
            steps,
            offset_clamp,
            lr,
            iters,
            lambda_ortho,
        }),
        Command::Eval {
            pred,
            gt,
            out,
            csv,
            height,
            width,
            iou_thresholds,
            parallel,
        } => cmd_eval(&EvalArgs {
            pred,
            gt,
            output: out,
            csv,
            height,
            width,
            iou_thresholds,
            parallel,
        }),
        Command::Gradcheck { seed } => cmd_gradcheck(&GradcheckArgs { seed }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("POLYFIELD_LOG", "error"),
    )
    .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
