//! `calmap` — co-calibration and hybrid-mapping pipeline.
//!
//! Exit codes: 0 success; 1 flag/file validation errors; 2 algorithmic
//! failures (the error name is printed). All outputs are written atomically.

mod commands;
mod repro;
mod util;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use util::{parse_vec3, CliError};

#[derive(Parser)]
#[command(name = "calmap", version, about = "Fisheye-camera / LiDAR co-calibration and mapping")]
struct Cli {
    /// Cap the worker thread count (default: all cores). Results are
    /// independent of this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Verbose progress output on stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a LiDAR scan and fisheye image with known ground truth.
    Simulate {
        /// Scene description JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for cloud.ply, image.pgm, gt.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Joint intrinsic+extrinsic calibration by edge alignment.
    Calibrate {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Initial calibration JSON (intrinsics, extrinsic, knobs).
        #[arg(long)]
        init: PathBuf,
        /// Result JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mutual-information extrinsic baseline.
    CalibrateMi {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Deterministic point subsampling stride.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 500)]
        max_evals: usize,
        /// Histogram bins per axis.
        #[arg(long, default_value_t = 64)]
        bins: usize,
    },
    /// Compare a calibration result against ground truth.
    Evaluate {
        /// Calibration result JSON.
        #[arg(long)]
        calib: PathBuf,
        /// Ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// Optional report JSON path (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump edge-extraction intermediates for inspection.
    EdgesDebug {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        init: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Colorize a map from calibrated camera views.
    Colorize {
        /// Map cloud PLY (map frame).
        #[arg(long)]
        map: PathBuf,
        /// View images (PGM or PPM), one per pose.
        #[arg(long, num_args = 1.., required = true)]
        image: Vec<PathBuf>,
        /// Rig poses JSON (one per image; identity when omitted).
        #[arg(long)]
        poses: Option<PathBuf>,
        /// Calibration result JSON supplying intrinsics and extrinsic.
        #[arg(long)]
        calib: PathBuf,
        /// Depth-buffer tolerance, meters.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble odometry scans into a voxelized coarse map.
    Assemble {
        #[arg(long, num_args = 1.., required = true)]
        scans: Vec<PathBuf>,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        voxel: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register fine scans into a coarse map and fuse (fine wins).
    Stitch {
        #[arg(long)]
        coarse: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        fine: Vec<PathBuf>,
        /// Initial poses JSON, one per fine scan.
        #[arg(long)]
        poses: PathBuf,
        /// Coarse points within this distance of a fine point are dropped.
        #[arg(long, default_value_t = 0.05)]
        fusion_voxel: f64,
        /// Initial ICP correspondence radius, meters.
        #[arg(long, default_value_t = 1.0)]
        max_corr_dist: f64,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-scan report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Propose camera viewpoints covering a region of interest.
    Viewpoints {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_vec3)]
        roi_min: nalgebra::Vector3<f64>,
        #[arg(long, value_parser = parse_vec3)]
        roi_max: nalgebra::Vector3<f64>,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        clearance: f64,
        #[arg(long, default_value_t = 0.1)]
        voxel: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end synthetic reproduction: simulate, perturb, calibrate with
    /// both methods, and compare against ground truth.
    Repro {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Draw per-face brightness gains from [0.7, 1.3).
        #[arg(long)]
        non_lambertian: bool,
        /// Directory for repro_report.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            std::process::exit(1);
        }
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Calibrate {
            cloud,
            image,
            init,
            out,
        } => commands::calibrate(&cloud, &image, &init, &out),
        Command::CalibrateMi {
            cloud,
            image,
            init,
            out,
            stride,
            max_evals,
            bins,
        } => commands::calibrate_mi(&cloud, &image, &init, &out, stride, max_evals, bins),
        Command::Evaluate { calib, gt, out } => {
            commands::evaluate(&calib, &gt, out.as_deref())
        }
        Command::EdgesDebug {
            cloud,
            image,
            init,
            out,
        } => commands::edges_debug(&cloud, &image, &init, &out),
        Command::Colorize {
            map,
            image,
            poses,
            calib,
            tol,
            out,
        } => commands::colorize_cmd(&map, &image, poses.as_deref(), &calib, tol, &out),
        Command::Assemble {
            scans,
            poses,
            voxel,
            out,
        } => commands::assemble(&scans, &poses, voxel, &out),
        Command::Stitch {
            coarse,
            fine,
            poses,
            fusion_voxel,
            max_corr_dist,
            out,
            report,
        } => commands::stitch(
            &coarse,
            &fine,
            &poses,
            fusion_voxel,
            max_corr_dist,
            &out,
            report.as_deref(),
        ),
        Command::Viewpoints {
            map,
            roi_min,
            roi_max,
            k,
            clearance,
            voxel,
            out,
        } => commands::viewpoints(&map, roi_min, roi_max, k, clearance, voxel, &out),
        Command::Repro {
            seed,
            non_lambertian,
            out,
        } => repro::run_repro(seed, non_lambertian, &out),
    }
}
