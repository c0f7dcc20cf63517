//! Command-line front end.
//!
//! Every command accepts `--config FILE` with `key = value` lines named after
//! its long flags. Flags given on the command line win over the file.

use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use s2k_core::baseline::{estimate_gaussian_spectral, fit_radial_prior};
use s2k_core::dataset::{load_hr_dir, read_dataset, synthesize, write_dataset, DatasetSample, SynthConfig};
use s2k_core::degradation::{degrade, DegradationConfig};
use s2k_core::evaluation::{evaluate_sample, mean, median, RESULTS_HEADER};
use s2k_core::imaging::{load_image, save_image, GrayImage};
use s2k_core::model::{estimate, load_generator, Arch, GeneratorConfig, LossWeights, TrainConfig};
use s2k_core::nn::{save_tensors, TensorRecord};
use s2k_core::restoration::DEFAULT_NSR;
use s2k_core::scenes::scene_set;
use s2k_core::spectral::DualityConstants;
use s2k_core::theory::{advantage_for, profile_distance, Normalization, ShapeConfig};
use s2k_core::{Error, KernelFamily, Kernel};

const USAGE_EXIT: u8 = 2;
const DATA_EXIT: u8 = 3;

#[derive(Parser)]
#[command(name = "s2k", version, about = "Blur-kernel estimation from amplitude spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of degraded pairs.
    Synth(SynthArgs),
    /// Compare kernel/image sparsity in the frequency and spatial domains.
    VerifyTheory(VerifyArgs),
    /// Train the estimator on a dataset.
    Train(TrainArgs),
    /// Estimate kernels for one image or a directory of images.
    Estimate(EstimateArgs),
    /// Kernel and restoration metrics on a dataset.
    Evaluate(EvaluateArgs),
    /// Write procedural dead-leaves scenes as PNG files.
    Scenes(ScenesArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    family: KernelFamily,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
    scale: u8,
    /// Directory of HR images; dead-leaves scenes are generated when absent.
    #[arg(long)]
    hr_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    spec_size: usize,
    /// HR crop side (default: spec-size x scale).
    #[arg(long)]
    hr_size: Option<usize>,
    /// Kernel side (default: 15 for gaussian/disk, 23 for motion).
    #[arg(long)]
    native_size: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Number of generated scenes when no HR directory is given.
    #[arg(long, default_value_t = 20)]
    scenes: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    #[arg(long, default_value = "peak1")]
    norm: Normalization,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "unet-5-32")]
    arch: Arch,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "100,1,1")]
    loss_weights: LossWeights,
    /// Fraction of the dataset (taken from the end) held out for validation.
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Save a numbered checkpoint every N epochs (0: final only).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "baseline")]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 15)]
    native_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Use the closed-form spectral Gaussian fit instead of a network.
    #[arg(long, value_parser = ["spectral"])]
    baseline: Option<String>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Upscaling factor (default: the dataset's).
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NSR)]
    nsr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ScenesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => USAGE_EXIT,
            _ => DATA_EXIT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: USAGE_EXIT,
        message: message.into(),
    }
}

fn data(message: impl Into<String>) -> Failure {
    Failure {
        code: DATA_EXIT,
        message: message.into(),
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Flags from a `key = value` file, as arguments to splice in after the
/// subcommand name.
fn config_args(path: &Path) -> CliResult<Vec<OsString>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(usage(format!("{}:{}: nested config files are not supported", path.display(), n + 1)));
        }
        args.push(OsString::from(format!("--{key}")));
        args.push(OsString::from(value.trim()));
    }
    Ok(args)
}

/// Rewrites argv so file settings precede command-line flags; with
/// `args_override_self` the later (command-line) occurrence wins.
fn expand_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(it.next().ok_or_else(|| usage("--config needs a value"))?));
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let file_args = config_args(&path)?;
    let split = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 2);
    let at = split.unwrap_or(rest.len()).min(rest.len());
    rest.splice(at..at, file_args);
    Ok(rest)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| data(format!("writing {}: {e}", path.display()))
}

fn create_csv(path: &Path) -> CliResult<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::from(Error::Io {
            path: parent.to_path_buf(),
            source: e,
        }))?;
    }
    let file = File::create(path).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn run_synth(a: SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        family: a.family,
        count: a.count,
        scale: a.scale as usize,
        spec_size: a.spec_size,
        hr_size: a.hr_size,
        native_size: a.native_size,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    cfg.validate()?;
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let sources = match &a.hr_dir {
        Some(dir) => load_hr_dir(dir)?,
        None => {
            if a.scenes == 0 {
                return Err(usage("--scenes must be at least 1"));
            }
            scene_set(a.scenes, cfg.hr_side() + 32, a.seed)
        }
    };
    let samples = synthesize(&sources, &cfg)?;
    write_dataset(&a.out, &samples, cfg.spec_size)?;
    eprintln!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(())
}

const REPORT_HEADER: [&str; 13] = [
    "id",
    "family",
    "phi_freq",
    "phi_spatial",
    "upper_bound_freq",
    "lower_bound_spatial",
    "ratio",
    "upper_bound_holds",
    "lower_bound_holds",
    "normalization",
    "tau",
    "profile_freq",
    "profile_spatial",
];

fn run_verify(a: VerifyArgs) -> CliResult {
    let shape = ShapeConfig {
        tau: a.tau,
        normalization: a.norm,
    };
    shape.validate()?;
    let samples = read_dataset(&a.dataset)?;
    let mut w = create_csv(&a.out)?;
    w.write_record(REPORT_HEADER).map_err(csv_err(&a.out))?;
    let mut ratios = Vec::with_capacity(samples.len());
    for s in &samples {
        let noiseless = DegradationConfig::with_scale(s.scale);
        let lr = degrade(&s.hr, &s.kernel, &noiseless, 0)?;
        let r = advantage_for(&lr, &s.kernel, &shape)?;
        let (pf, ps) = profile_distance(&lr, &s.kernel)?;
        ratios.push(r.ratio);
        w.write_record([
            s.id.to_string(),
            s.params.family().to_string(),
            r.phi_freq.to_string(),
            r.phi_spatial.to_string(),
            r.upper_bound_freq.to_string(),
            r.lower_bound_spatial.to_string(),
            fmt(r.ratio),
            r.upper_bound_holds().to_string(),
            r.lower_bound_holds().to_string(),
            r.normalization.to_string(),
            fmt(r.tau),
            fmt(pf),
            fmt(ps),
        ])
        .map_err(csv_err(&a.out))?;
    }
    w.flush().map_err(|e| data(e.to_string()))?;
    let below = ratios.iter().filter(|&&r| r < 1.0).count() as f64 / ratios.len() as f64;
    println!(
        "pairs={} fraction_ratio_below_1={below:.4} median_ratio={:.4}",
        ratios.len(),
        median(&ratios)
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> CliResult {
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(usage("--val-fraction must lie in [0, 1)"));
    }
    let samples = read_dataset(&a.dataset)?;
    let spec_size = samples[0].spectrum.nrows();
    let native_size = samples[0].kernel.size();
    let n_val = (samples.len() as f64 * a.val_fraction).round() as usize;
    if n_val >= samples.len() {
        return Err(data("validation split leaves no training samples"));
    }
    let training: Vec<_> = samples.iter().map(DatasetSample::training_sample).collect();
    let (train_set, val_set) = training.split_at(samples.len() - n_val);
    let gen_cfg = GeneratorConfig {
        depth: a.arch.depth,
        base_channels: a.arch.channels,
        input_size: spec_size,
        skip: true,
    };
    let mut cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        weights: a.loss_weights,
        native_size,
        checkpoint_every: a.checkpoint_every,
        out_dir: Some(a.out.clone()),
        ..TrainConfig::default()
    };
    cfg.gen_adam.lr = a.lr;
    cfg.disc_adam.lr = a.lr;
    s2k_core::model::train(train_set, val_set, gen_cfg, &cfg, |r| {
        eprintln!(
            "epoch {:>3}  l1 {:.5}  adv {:.4}  tv {:.5}  d {:.4}  val_dv {:.6}",
            r.epoch, r.l1, r.adv, r.tv, r.d_loss, r.val_dv
        );
    })?;
    eprintln!("checkpoint written to {}", a.out.join("generator.s2k1").display());
    Ok(())
}

fn image_paths(input: &Path) -> CliResult<Vec<PathBuf>> {
    if input.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| data(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("s2k1"))
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(data(format!("no images in {}", input.display())));
        }
        Ok(paths)
    } else if input.is_file() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(data(format!("{} does not exist", input.display())))
    }
}

fn write_kernel(out: &Path, stem: &str, k: &Kernel) -> CliResult {
    let v = k.values();
    save_tensors(
        out.join(format!("{stem}_kernel.s2k1")),
        &[TensorRecord::from_f64("kernel", vec![k.size(), k.size()], v.as_slice().expect("standard layout"))?],
    )?;
    let peak = v.iter().copied().fold(0.0, f64::max);
    let vis = GrayImage::from_array(v.mapv(|x| if peak > 0.0 { x / peak } else { 0.0 }))?;
    save_image(out.join(format!("{stem}_kernel.png")), &vis)?;
    Ok(())
}

fn run_estimate(a: EstimateArgs) -> CliResult {
    if a.native_size.is_multiple_of(2) {
        return Err(usage("--native-size must be odd"));
    }
    let paths = image_paths(&a.input)?;
    fs::create_dir_all(&a.out).map_err(|e| data(format!("{}: {e}", a.out.display())))?;
    let generator = match &a.ckpt {
        Some(p) if a.baseline.is_none() => Some(load_generator(p)?),
        _ => None,
    };
    let prior = if generator.is_none() {
        Some(fit_radial_prior(&scene_set(8, 128, 0))?)
    } else {
        None
    };
    for path in paths {
        let img = load_image(&path)?;
        let k = match (&generator, prior) {
            (Some(g), _) => estimate(&img, g, a.native_size)?,
            (None, Some(prior)) => {
                let (h, w) = img.dims();
                estimate_gaussian_spectral(&img, &DualityConstants::calibrate(h, w)?, a.native_size, prior)?
            }
            (None, None) => unreachable!("either a network or the baseline is selected"),
        };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_kernel(&a.out, &stem, &k)?;
        eprintln!("{}: kernel written", path.display());
    }
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> CliResult {
    if !(a.nsr >= 0.0) {
        return Err(usage("--nsr must be nonnegative"));
    }
    let samples = read_dataset(&a.dataset)?;
    let generator = load_generator(&a.ckpt)?;
    let mut w = create_csv(&a.out)?;
    w.write_record(RESULTS_HEADER).map_err(csv_err(&a.out))?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); RESULTS_HEADER.len() - 2];
    for s in &samples {
        let scale = a.scale.unwrap_or(s.scale);
        let k = estimate(&s.lr, &generator, s.kernel.size())?;
        let values = evaluate_sample(s, &k, scale, a.nsr)?.values();
        let mut row = vec![s.id.to_string(), s.params.family().to_string()];
        for (col, v) in columns.iter_mut().zip(&values) {
            col.push(*v);
            row.push(fmt(*v));
        }
        w.write_record(&row).map_err(csv_err(&a.out))?;
    }
    for (label, agg) in [("mean", mean as fn(&[f64]) -> f64), ("median", median)] {
        let mut row = vec![label.to_string(), String::new()];
        row.extend(columns.iter().map(|c| fmt(agg(c))));
        w.write_record(&row).map_err(csv_err(&a.out))?;
    }
    w.flush().map_err(|e| data(e.to_string()))?;
    println!(
        "samples={} mean_psnr_s2k={:.3} mean_psnr_bicubic={:.3} mean_psnr_gt={:.3} median_dv_s2k={:.6}",
        samples.len(),
        mean(&columns[2]),
        mean(&columns[6]),
        mean(&columns[10]),
        median(&columns[0]),
    );
    Ok(())
}

fn run_scenes(a: ScenesArgs) -> CliResult {
    if a.count == 0 || a.size < 16 {
        return Err(usage("--count must be positive and --size at least 16"));
    }
    fs::create_dir_all(&a.out).map_err(|e| data(format!("{}: {e}", a.out.display())))?;
    for (i, img) in scene_set(a.count, a.size, a.seed).iter().enumerate() {
        save_image(a.out.join(format!("scene_{i:04}.png")), img)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(a) => run_synth(a),
        Command::VerifyTheory(a) => run_verify(a),
        Command::Train(a) => run_train(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Scenes(a) => run_scenes(a),
    }
}

fn main() -> ExitCode {
    let outcome = expand_config(std::env::args_os().collect()).and_then(|argv| {
        let cli = Cli::try_parse_from(argv).map_err(|e| {
            let _ = e.print();
            Failure {
                code: if e.use_stderr() { USAGE_EXIT } else { 0 },
                message: String::new(),
            }
        })?;
        run(cli)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
