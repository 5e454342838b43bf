//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on usage, input or parse errors, 2 when the
//! intensity estimates are degenerate (`a_hat >= b_hat`). Diagnostics go to
//! stderr as a single line; results go to files or stdout.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scanperc_core::{
    compute_threshold, generate_scene, misselection_bound, preprocess, run_detection, BinaryImage,
    DetectParams, Error as CoreError, Mask, NoiseModel, Population, Scanner, SceneFamily, Shape,
};

use crate::io::{
    read_image, scale_to_maxval, write_atomic, write_binary_pgm, write_image, ImageFormat, IoError,
};
use crate::mc;
use crate::report::{fmt6, report_json};
use crate::scene::{SceneDoc, SceneError};

#[derive(Debug, Parser)]
#[command(
    name = "scanperc",
    version,
    about = "Particle detection in noisy images with scan estimators and triangular-lattice percolation"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the background and particle intensity estimates and their midpoint.
    Estimate(EstimateArgs),
    /// Run the full detection pipeline and write a JSON report.
    Detect(DetectArgs),
    /// Render a synthetic scene described by a JSON document.
    Synth(SynthArgs),
    /// Estimator error table over random scenes (CSV).
    #[command(name = "mc-consistency")]
    McConsistency(McConsistencyArgs),
    /// Detection power on scenes with particles and false alarms on pure noise (CSV).
    #[command(name = "mc-detection")]
    McDetection(McDetectionArgs),
    /// Evaluate the tail bound on the scan estimator preferring a window that overlaps particles.
    Bound(BoundArgs),
    /// Largest-cluster statistics of i.i.d. site fields on the triangular lattice (CSV).
    #[command(name = "percolation-phase")]
    PercolationPhase(PhaseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Window side for the background estimate (published cryo-EM run: 65).
    #[arg(long, default_value_t = 65)]
    pub phi0: usize,
    /// Window side for the particle estimate (published cryo-EM run: 9).
    #[arg(long, default_value_t = 9)]
    pub phi1: usize,
    /// Drop clusters with fewer pixels (published cryo-EM run: 30).
    #[arg(long, default_value_t = 30)]
    pub min_cluster: usize,
    /// 2x2 block-average passes before estimation (published cryo-EM run: 2).
    #[arg(long, default_value_t = 2)]
    pub downsample: usize,
    /// Divide by the maximum after downsampling (published cryo-EM run: true).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub normalize: bool,
}

impl PipelineArgs {
    fn params(&self) -> DetectParams {
        DetectParams {
            phi0: self.phi0,
            phi1: self.phi1,
            min_cluster_pixels: self.min_cluster,
            downsample_passes: self.downsample,
            normalize: self.normalize,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Pgm,
    Csv,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Pgm => ImageFormat::Pgm,
            FormatArg::Csv => ImageFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input image (.pgm or .csv).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Override format detection from the extension.
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input image (.pgm or .csv).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the thresholded picture as PGM (maxval 1).
    #[arg(long)]
    pub binary_out: Option<PathBuf>,
    /// Write the thresholded picture without small clusters as PGM (maxval 1).
    #[arg(long)]
    pub filtered_out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene document (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output image. CSV keeps exact values; PGM is rescaled to 0..=65535.
    #[arg(long)]
    pub out: PathBuf,
    /// Union of the particle masks as PGM (maxval 1).
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Noise bound M (the half width for uniform noise).
    #[arg(long, default_value_t = 0.2)]
    pub noise_m: f64,
    /// Raw standard deviation; switches to Gaussian noise truncated at +-M.
    #[arg(long)]
    pub noise_sigma_raw: Option<f64>,
}

impl NoiseArgs {
    fn model(&self) -> Result<NoiseModel, CoreError> {
        match self.noise_sigma_raw {
            Some(s) => NoiseModel::truncated_gaussian(s, self.noise_m),
            None => NoiseModel::uniform(self.noise_m),
        }
    }
}

#[derive(Debug, Args)]
pub struct McConsistencyArgs {
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 0.3)]
    pub a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub b: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Fraction of the image covered by particles.
    #[arg(long, default_value_t = 0.3)]
    pub coverage: f64,
    /// Background window sides; the reserved noise square uses the largest.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub phi0_grid: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    pub phi1: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McDetectionArgs {
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 0.4)]
    pub a: f64,
    #[arg(long, default_value_t = 0.6)]
    pub b: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Number of nonconvex particles (alternating L-shapes and gapped annuli).
    #[arg(long, default_value_t = 5)]
    pub particles: usize,
    /// Scan window sides, in pixels of the downsampled image.
    #[arg(long, default_value_t = 32)]
    pub phi0: usize,
    #[arg(long, default_value_t = 6)]
    pub phi1: usize,
    #[arg(long, default_value_t = 30)]
    pub min_cluster: usize,
    /// 2x2 averaging passes before detection. Scenes are generated at full
    /// size with a reserved square of `phi0 << downsample` pixels.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also threshold pure-noise images of these sides at a fixed level.
    #[arg(long, value_delimiter = ',')]
    pub false_alarm_sizes: Vec<usize>,
    /// Fixed-threshold level as the background black fraction it produces.
    #[arg(long, default_value_t = 0.25)]
    pub black_fraction: f64,
    /// CSV output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Particle pixels inside each competing window, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub s1: Vec<i64>,
    /// Pixels of each competing window outside the all-noise square.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub excess: Vec<i64>,
    /// Intensity contrast b - a.
    #[arg(long, allow_hyphen_values = true)]
    pub contrast: f64,
    /// Noise standard deviation.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Almost-sure noise bound M.
    #[arg(long = "bound-m", allow_hyphen_values = true)]
    pub bound_m: f64,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Occupation probabilities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.5,0.6")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let degenerate = matches!(
            self,
            CliError::Core(CoreError::DegenerateEstimates { .. })
                | CliError::Io(IoError::Core(CoreError::DegenerateEstimates { .. }))
        );
        if degenerate {
            2
        } else {
            1
        }
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(argv: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(stderr, "{first}");
                    1
                }
            };
        }
    };
    let result = match cli.jobs {
        Some(k) => match rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| run(&cli.command, stdout)),
            Err(e) => Err(CliError::Usage(format!(
                "cannot start {k} worker threads: {e}"
            ))),
        },
        None => run(&cli.command, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn emit(
    out: &Option<PathBuf>,
    text: &str,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| IoError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?,
    }
    Ok(())
}

fn print(stdout: &mut (dyn Write + Send), text: &str) -> Result<(), CliError> {
    emit(&None, text, stdout)
}

pub fn run(cmd: &Command, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match cmd {
        Command::Estimate(args) => {
            let img = read_image(&args.input, args.format.map(Into::into))?;
            let params = args.pipeline.params();
            let work = preprocess(&img, &params)?;
            let est = Scanner::new(&work).estimates(params.phi0, params.phi1)?;
            print(
                stdout,
                &format!("a_hat {}\nb_hat {}\n", fmt6(est.a_hat), fmt6(est.b_hat)),
            )?;
            let theta = compute_threshold(est.a_hat, est.b_hat)?;
            print(stdout, &format!("theta {}\n", fmt6(theta)))
        }
        Command::Detect(args) => {
            let img = read_image(&args.input, args.format.map(Into::into))?;
            let report = run_detection(&img, &args.pipeline.params())?;
            emit(&args.out, &report_json(&report), stdout)?;
            if let Some(p) = &args.binary_out {
                write_binary_pgm(&report.binary, p)?;
            }
            if let Some(p) = &args.filtered_out {
                write_binary_pgm(&report.filtered_binary(), p)?;
            }
            Ok(())
        }
        Command::Synth(args) => {
            let text = std::fs::read_to_string(&args.scene).map_err(|source| IoError::Io {
                path: args.scene.clone(),
                source,
            })?;
            let (spec, noise) = SceneDoc::from_json(&text)?.build()?;
            let scene = generate_scene(&spec, &noise, args.seed)?;
            let format = ImageFormat::from_path(&args.out)
                .ok_or_else(|| IoError::UnknownFormat(args.out.clone()))?;
            let img = match format {
                ImageFormat::Pgm => scale_to_maxval(&scene.image, u16::MAX)?,
                ImageFormat::Csv => scene.image,
            };
            write_image(&img, &args.out, Some(format))?;
            if let Some(p) = &args.truth_out {
                write_binary_pgm(&truth_image(spec.n, &scene.masks), p)?;
            }
            Ok(())
        }
        Command::McConsistency(args) => {
            let k0 = args
                .phi0_grid
                .iter()
                .copied()
                .max()
                .ok_or_else(|| CliError::Usage("--phi0-grid must not be empty".into()))?;
            let family = consistency_family(args.n, args.a, args.b, args.coverage, k0, args.phi1);
            let table = mc::mc_consistency(
                &family,
                &args.noise.model()?,
                &args.phi0_grid,
                args.phi1,
                args.trials,
                args.seed,
            )?;
            emit(&args.out, &table.to_csv(), stdout)
        }
        Command::McDetection(args) => {
            let noise = args.noise.model()?;
            let scale = 1usize
                .checked_shl(args.downsample as u32)
                .filter(|s| *s <= args.n)
                .ok_or_else(|| CliError::Usage("--downsample is too large for --n".into()))?;
            let family = detection_family(
                args.n,
                args.a,
                args.b,
                args.particles,
                args.phi0 * scale,
                args.phi1 * scale,
            );
            let params = DetectParams {
                phi0: args.phi0,
                phi1: args.phi1,
                min_cluster_pixels: args.min_cluster,
                downsample_passes: args.downsample,
                normalize: false,
            };
            let summary = mc::mc_detection(&family, &noise, &params, args.trials, args.seed)?;
            let mut text = summary.to_csv();
            if !args.false_alarm_sizes.is_empty() {
                let theta = args.a + noise.upper_quantile(args.black_fraction)?;
                let rows = mc::mc_false_alarm(
                    &args.false_alarm_sizes,
                    args.a,
                    &noise,
                    theta,
                    args.min_cluster,
                    args.trials,
                    args.seed,
                )?;
                text.push('\n');
                text.push_str(&mc::false_alarm_csv(&rows));
            }
            emit(&args.out, &text, stdout)
        }
        Command::Bound(args) => {
            let v = misselection_bound(
                &args.s1,
                &args.excess,
                args.contrast,
                args.sigma,
                args.bound_m,
            )?;
            print(
                stdout,
                &format!("bound {}\nclipped {}\n", fmt6(v.raw), fmt6(v.clipped)),
            )
        }
        Command::PercolationPhase(args) => {
            let rows = mc::percolation_phase(args.size, &args.p, args.trials, args.seed)?;
            emit(&args.out, &mc::phase_csv(&rows), stdout)
        }
    }
}

fn truth_image(n: usize, masks: &[Mask]) -> BinaryImage {
    let mut img = BinaryImage::blank(n, n);
    for m in masks {
        for &(r, c) in m.pixels() {
            img.set(r, c, true);
        }
    }
    img
}

/// Scenes for the estimator-error experiments: squares, discs and L-shapes
/// a few times wider than `phi1`, covering `coverage` of the image around a
/// reserved all-noise square of side `k0`.
pub fn consistency_family(
    n: usize,
    a: f64,
    b: f64,
    coverage: f64,
    k0: usize,
    phi1: usize,
) -> SceneFamily {
    let t = phi1.max(1);
    let s = 4 * t;
    SceneFamily {
        n,
        a,
        b,
        noise_square_side: k0,
        phi1,
        shapes: vec![
            Shape::Square { side: s },
            Shape::LShape {
                arm: s + s / 3,
                thickness: (s / 2).max(t),
            },
            Shape::Disc {
                radius: (s * 3 / 5).max(t),
            },
        ],
        population: Population::Coverage(coverage),
        margin: 1,
    }
}

/// Scenes for the detection experiments: `count` nonconvex particles
/// alternating between L-shapes and gapped annuli, each holding a
/// `phi1 x phi1` square.
pub fn detection_family(
    n: usize,
    a: f64,
    b: f64,
    count: usize,
    k0: usize,
    phi1: usize,
) -> SceneFamily {
    let t = phi1.max(1);
    SceneFamily {
        n,
        a,
        b,
        noise_square_side: k0,
        phi1,
        shapes: vec![
            Shape::LShape {
                arm: 2 * t,
                thickness: t,
            },
            Shape::GappedAnnulus {
                outer: 2 * t,
                inner: t * 2 / 3,
                gap: t / 2,
            },
        ],
        population: Population::Count(count),
        margin: 2,
    }
}
