mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contourreg::bench::{bench_maxpool, to_csv};
use contourreg::experiment::{run_study, Targets};
use contourreg::losses::{finite_diff_check, total_loss, LogitField, LossConfig};
use contourreg::metrics::{Connectivity, MetricsReport};
use contourreg::morphology::{contour, WindowRadius};
use contourreg::volume::{load_volume, percentile_clip, save_volume, LabelVolume, VolumeGeometry};
use contourreg::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::RunConfig;

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "contourreg", version, about = "Contour-regularized segmentation losses and outlier studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clip an f32 volume to intensity percentiles.
    Clip {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 99.5)]
        hi: f64,
    },
    /// Write the contour (windowed max minus windowed min) of an f32 volume.
    Contour {
        input: PathBuf,
        output: PathBuf,
        /// Window radius.
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Evaluate the composite loss; prints a JSON report.
    Loss {
        /// Label volume (u8).
        labels: PathBuf,
        /// One f32 logit volume per class, in class order.
        #[arg(required = true, num_args = 2..)]
        logits: Vec<PathBuf>,
        #[command(flatten)]
        loss: LossArgs,
    },
    /// Compare the analytic gradient with central differences on random logits.
    Gradcheck {
        #[arg(long, value_delimiter = ',', default_value = "8,8,8")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Scale the analytic gradient by (1 + x), as a negative control.
        #[arg(long, hide = true)]
        corrupt_gradient: Option<f64>,
    },
    /// Per-class DSC, HD, AVD and component counts.
    Metrics {
        pred: PathBuf,
        truth: PathBuf,
        /// Classes to score.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        classes: Vec<u8>,
        /// Label range of the inputs.
        #[arg(long, default_value_t = 5)]
        num_classes: u8,
        #[arg(long, default_value = "26")]
        connectivity: Connectivity,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Median timings of the naive and separable max-pool kernels, as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "64,64,64")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        d_list: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit phantoms at several contour weights and count tumor components.
    Study {
        /// Must include 0, the baseline.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4")]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        /// Receives study.json and summary.txt.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TargetArg::Corrupted)]
        targets: TargetArg,
        /// Optimizer steps per run [default: 400].
        #[arg(long)]
        iterations: Option<usize>,
        /// Gradient descent step [default: 2000].
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Phantom dimensions [default: 48,48,48].
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Speckles per phantom [default: 8].
        #[arg(long)]
        speckles: Option<usize>,
        #[command(flatten)]
        loss: LossArgs,
    },
}

/// Loss settings: a JSON config file, then individual overrides.
#[derive(Args)]
struct LossArgs {
    /// JSON file with optional "loss", "optimizer" and "phantom" sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Contour weight [default: 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Contour window radius [default: 1].
    #[arg(long)]
    d: Option<usize>,
    /// Class whose probability map is regularized [default: 2].
    #[arg(long)]
    cr_class: Option<usize>,
}

impl LossArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(alpha) = self.alpha {
            cfg.loss.alpha = alpha;
        }
        if let Some(d) = self.d {
            cfg.loss.d = d;
        }
        if let Some(c) = self.cr_class {
            cfg.loss.cr_class = c;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Corrupted,
    Clean,
}

impl From<TargetArg> for Targets {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Corrupted => Targets::Corrupted,
            TargetArg::Clean => Targets::Clean,
        }
    }
}

enum Failure {
    Lib(Error),
    GradCheck(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(e) if e.is_io() => 2,
            Failure::Lib(
                Error::Header { .. } | Error::UnknownDtype(_) | Error::LengthMismatch { .. },
            ) => 2,
            Failure::Lib(e) if e.is_numeric() => 3,
            Failure::Lib(_) => 1,
            Failure::GradCheck(_) => 3,
        }
    }
}

fn dims3(dims: &[usize]) -> Result<[usize; 3]> {
    dims.try_into()
        .map_err(|_| Error::InvalidArgument(format!("expected three dimensions, got {}", dims.len())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn load_scalar(path: &Path) -> Result<contourreg::volume::ScalarVolume> {
    load_volume(path, u8::MAX)?.into_scalar()
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Clip { input, output, lo, hi } => {
            let vol = load_scalar(&input)?;
            save_volume(&percentile_clip(&vol, lo, hi)?, &output)?;
            eprintln!("clipped {} to percentiles [{lo}, {hi}]", input.display());
        }
        Command::Contour { input, output, d } => {
            let vol = load_scalar(&input)?;
            save_volume(&contour(&vol, WindowRadius(d)), &output)?;
        }
        Command::Loss { labels, logits, loss } => {
            let mut cfg = loss.resolve()?.loss;
            cfg.num_classes = logits.len();
            cfg.validate()?;
            let classes = u8::try_from(cfg.num_classes)
                .map_err(|_| Error::InvalidArgument(format!("too many classes: {}", cfg.num_classes)))?;
            let y = load_volume(&labels, classes)?.into_labels()?;
            let mut data = Vec::with_capacity(logits.len() * y.data().len());
            for path in &logits {
                let z = load_scalar(path)?;
                if z.dims() != y.dims() {
                    return Err(Error::GeometryMismatch {
                        left: z.dims(),
                        right: y.dims(),
                    }
                    .into());
                }
                data.extend(z.data().iter().map(|&v| v as f64));
            }
            let z = LogitField::new(*y.geometry(), cfg.num_classes, data)?;
            let (report, _) = total_loss(&z, &y, &cfg)?;
            print_json(&report);
        }
        Command::Gradcheck {
            dims,
            classes,
            d,
            alpha,
            seed,
            samples,
            step,
            corrupt_gradient,
        } => {
            let cfg = LossConfig {
                alpha,
                d,
                cr_class: classes.saturating_sub(1),
                num_classes: classes,
                ..LossConfig::default()
            };
            cfg.validate()?;
            let (z, y) = random_case(dims3(&dims)?, classes, seed)?;
            let scale = 1.0 + corrupt_gradient.unwrap_or(0.0);
            let loss = |z: &LogitField, y: &LabelVolume, c: &LossConfig| {
                total_loss(z, y, c).map(|(r, g)| (r, g.into_iter().map(|v| v * scale).collect()))
            };
            let report = finite_diff_check(loss, &z, &y, &cfg, step, samples, seed)?;
            print_json(&report);
            if report.max_rel_error.is_nan() || report.max_rel_error >= GRADCHECK_TOLERANCE {
                return Err(Failure::GradCheck(report.max_rel_error));
            }
        }
        Command::Metrics {
            pred,
            truth,
            classes,
            num_classes,
            connectivity,
            format,
        } => {
            let pred = load_volume(&pred, num_classes)?.into_labels()?;
            let truth = load_volume(&truth, num_classes)?.into_labels()?;
            if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
                return Err(Error::InvalidArgument(format!("class {c} out of range for {num_classes} classes")).into());
            }
            let report = MetricsReport::evaluate(&pred, &truth, &classes, connectivity)?;
            match format {
                Format::Json => print_json(&report),
                Format::Text => print!("{report}"),
            }
        }
        Command::Bench { dims, d_list, reps, seed } => {
            print!("{}", to_csv(&bench_maxpool(dims3(&dims)?, &d_list, reps, seed)?));
        }
        Command::Study {
            alphas,
            seeds,
            out_dir,
            targets,
            iterations,
            learning_rate,
            dims,
            speckles,
            loss,
        } => {
            let mut cfg = loss.resolve()?;
            if let Some(n) = iterations {
                cfg.optimizer.iterations = n;
            }
            if let Some(lr) = learning_rate {
                cfg.optimizer.learning_rate = lr;
            }
            if let Some(dims) = dims {
                cfg.phantom.dims = dims3(&dims)?;
            }
            if let Some(n) = speckles {
                cfg.phantom.speckle_count = n;
            }
            cfg.validate()?;
            eprintln!("running {} fits", alphas.len() * seeds.len());
            let report = run_study(&cfg.phantom, &alphas, &seeds, &cfg.loss, &cfg.optimizer, targets.into())?;
            let table = report.to_string();
            if let Some(dir) = out_dir {
                write(&dir, "study.json", report.to_json() + "\n")?;
                write(&dir, "summary.txt", table.clone())?;
            }
            print!("{table}");
        }
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: String) -> Result<()> {
    let io_err = |path: &Path, source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn random_case(dims: [usize; 3], classes: usize, seed: u64) -> Result<(LogitField, LabelVolume)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = VolumeGeometry::isotropic(dims)?;
    let z = (0..g.len() * classes).map(|_| rng.random_range(-3.0..3.0)).collect();
    let labels = (0..g.len()).map(|_| rng.random_range(0..classes) as u8).collect();
    Ok((
        LogitField::new(g, classes, z)?,
        LabelVolume::new(g, classes as u8, labels)?,
    ))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::GradCheck(err) => {
                    eprintln!("error: max relative error {err:.3e} is not below {GRADCHECK_TOLERANCE:e}")
                }
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
