//! `regdiff` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when
//! registration fails.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use regdiff::harness::config::RunConfig;
use regdiff::harness::eval::evaluate_pairs;
use regdiff::harness::io::{
    list_sample_dirs, read_json, write_gray_png, write_json, write_sample, GtFile, PairPaths,
    PredictionsFile,
};
use regdiff::harness::{detect_pair, write_detection};
use regdiff::synthgen::make_change_pair;
use regdiff::{build_plan, extract_pyramid_pair, warp_and_difference, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_REGISTRATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "regdiff",
    version,
    about = "Two-view change detection by 3D registration and feature differencing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic change pairs.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: u64,
        /// First seed; samples use seeds `start..start+count`.
        #[arg(long)]
        start: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect changes in one pair or a directory of sample pairs.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        input: PairArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Where to write the result; defaults to `<pred>/eval.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the warped feature norm and visibility mask of one level.
    WarpDebug {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        pair: PathBuf,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Sample directory, or a directory of sample directories.
    #[arg(long, conflicts_with_all = ["img1", "img2"], required_unless_present_all = ["img1", "img2"])]
    pair: Option<PathBuf>,
    #[arg(long, requires = "img2")]
    img1: Option<PathBuf>,
    #[arg(long, requires = "img1")]
    img2: Option<PathBuf>,
    #[arg(long, requires = "img1")]
    depth1: Option<PathBuf>,
    #[arg(long, requires = "img1")]
    depth2: Option<PathBuf>,
    #[arg(long, requires = "img1")]
    cameras: Option<PathBuf>,
    #[arg(long, requires = "img1")]
    correspondences: Option<PathBuf>,
}

impl PairArgs {
    /// Named pairs in a stable order.
    fn pairs(&self) -> Result<Vec<(String, PairPaths)>, Error> {
        if let Some(root) = &self.pair {
            return Ok(list_sample_dirs(root)?
                .into_iter()
                .map(|d| (dir_name(&d), PairPaths::from_sample_dir(&d)))
                .collect());
        }
        let paths = PairPaths {
            img1: self.img1.clone().expect("clap requires img1"),
            img2: self.img2.clone().expect("clap requires img2"),
            depth1: self.depth1.clone(),
            depth2: self.depth2.clone(),
            cameras: self.cameras.clone(),
            correspondences: self.correspondences.clone(),
        };
        Ok(vec![("pair".to_string(), paths)])
    }
}

fn dir_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pair".to_string())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_registration_failure() {
        EXIT_REGISTRATION
    } else {
        EXIT_INPUT
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INPUT,
            };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Generate {
            config,
            count,
            start,
            out,
        } => generate(config.as_deref(), start.unwrap_or(0), count, &out),
        Command::Detect { config, input, out } => detect(config.as_deref(), &input, &out),
        Command::Eval { pred, gt, iou, out } => eval(&pred, &gt, iou, out.as_deref()),
        Command::WarpDebug {
            config,
            pair,
            level,
            out,
        } => warp_debug(config.as_deref(), &pair, level, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("REGDIFF_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
            {
                log::debug!("thread pool already initialized");
            }
        }
        _ => log::warn!("ignoring REGDIFF_THREADS={v:?}"),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            RunConfig::from_toml(&text)
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn generate(config: Option<&Path>, start: u64, count: u64, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?.generator;
    create_dir(out)?;
    let end = start
        .checked_add(count)
        .ok_or_else(|| Error::InputDomain("seed range overflows".into()))?;
    (start..end).into_par_iter().try_for_each(|seed| {
        let sample = make_change_pair(&cfg, seed)?;
        let dir = write_sample(out, &sample, &cfg)?;
        log::info!("wrote {}", dir.display());
        Ok::<_, Error>(())
    })?;
    log::info!("generated {count} samples in {}", out.display());
    Ok(())
}

fn detect(config: Option<&Path>, input: &PairArgs, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let pairs = input.pairs()?;
    create_dir(out)?;
    let results: Vec<(String, Result<(), Error>)> = pairs
        .par_iter()
        .map(|(name, paths)| {
            let r = paths.load(name).and_then(|inputs| {
                let det = detect_pair(&inputs, &cfg)?;
                write_detection(out, &inputs, &det, &cfg)?;
                log::info!(
                    "{name}: {} + {} boxes ({})",
                    det.image1.len(),
                    det.image2.len(),
                    det.diagnostics.strategy
                );
                Ok(())
            });
            (name.clone(), r)
        })
        .collect();

    let mut index = Vec::new();
    let mut first_err = None;
    for (name, r) in results {
        match r {
            Ok(()) => index
                .push(serde_json::json!({ "name": name, "predictions": format!("{name}.json") })),
            Err(e) => {
                if pairs.len() > 1 {
                    log::error!("{name}: {e}");
                }
                first_err.get_or_insert(e);
            }
        }
    }
    write_json(&out.join("index.json"), &index)?;
    first_err.map_or(Ok(()), Err)
}

fn eval(pred: &Path, gt: &Path, iou: f64, out: Option<&Path>) -> Result<(), Error> {
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(Error::InputDomain(format!(
            "--iou must be in (0, 1], got {iou}"
        )));
    }
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for dir in list_sample_dirs(gt)? {
        let name = dir_name(&dir);
        let g: GtFile = read_json(&dir.join("gt_boxes.json"))?;
        let pfile = pred.join(format!("{name}.json"));
        let p: PredictionsFile = if pfile.exists() {
            read_json(&pfile)?
        } else {
            log::warn!("{name}: no predictions, counted as empty");
            PredictionsFile::default()
        };
        preds.push((p.image1, p.image2));
        gts.push(g.boxes());
    }
    let result = evaluate_pairs(&preds, &gts, iou)?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| pred.join("eval.json"));
    write_json(&out, &result)?;
    println!("AP@{iou}: {:.4}", result.ap);
    Ok(())
}

fn warp_debug(config: Option<&Path>, pair: &Path, level: usize, out: &Path) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let inputs = PairPaths::from_sample_dir(pair).load(&dir_name(pair))?;
    let pipe = &cfg.pipeline;
    if level >= pipe.features.levels {
        return Err(Error::InputDomain(format!(
            "level {level} out of range, pyramid has {}",
            pipe.features.levels
        )));
    }
    let strategy = cfg.strategy.resolve(&inputs)?;
    let plan = build_plan(&strategy, inputs.depth1.as_ref(), inputs.depth2.as_ref())?;
    let (p1, p2) = extract_pyramid_pair(&inputs.rgb1, &inputs.rgb2, &pipe.features)?;
    let (d1, d2) = warp_and_difference(
        &p1,
        &p2,
        inputs.depth1.as_ref(),
        inputs.depth2.as_ref(),
        &plan,
        &pipe.difference,
    )?;
    create_dir(out)?;
    for (view, pyr, target) in [(1, &d1, &p1), (2, &d2, &p2)] {
        let lv = &pyr.levels[level];
        let (h, w) = lv.rendered.dims();
        let rendered = lv.rendered.channel_norm();
        let own = target.levels[level].channel_norm();
        let max = own.iter().chain(&rendered).fold(0.0f32, |a, &b| a.max(b));
        write_gray_png(
            &out.join(format!("view{view}_features_l{level}.png")),
            w,
            h,
            &own,
            max,
        )?;
        write_gray_png(
            &out.join(format!("view{view}_rendered_l{level}.png")),
            w,
            h,
            &rendered,
            max,
        )?;
        write_gray_png(
            &out.join(format!("view{view}_mask_l{level}.png")),
            w,
            h,
            lv.mask.values(),
            1.0,
        )?;
        write_gray_png(
            &out.join(format!("view{view}_splat_mask_l{level}.png")),
            w,
            h,
            lv.splat_mask.values(),
            1.0,
        )?;
        let diff = lv.difference.channel_norm();
        let dmax = diff.iter().fold(0.0f32, |a, &b| a.max(b));
        write_gray_png(
            &out.join(format!("view{view}_difference_l{level}.png")),
            w,
            h,
            &diff,
            dmax,
        )?;
    }
    log::info!("wrote level {level} debug images to {}", out.display());
    Ok(())
}
