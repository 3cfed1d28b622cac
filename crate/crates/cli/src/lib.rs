//! Batch frontend for `thermsal-core`.
//!
//! [`run_command`] parses an argument list, runs one subcommand on a bounded
//! worker pool and returns the process exit status: 0 on success, 1 for
//! usage or validation errors, 2 for I/O errors. Outputs do not depend on the
//! number of workers.

mod commands;
pub mod curves;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use thermsal_core::Error;

pub use curves::{
    format_curve_csv, format_curve_svg, parse_curve_csv, read_curve_csv, write_curve_csv, write_curve_svg,
};

/// Environment variable overriding `--workers`.
pub const WORKERS_ENV: &str = "THERMSAL_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "thermsal", version, about = "Thermal pedestrian saliency toolkit")]
pub struct Cli {
    /// Worker threads (overridden by THERMSAL_WORKERS).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute static saliency maps for every image under a directory.
    Saliency(SaliencyArgs),
    /// Replace one channel of thermal frames with their saliency maps.
    Fuse(FuseArgs),
    /// KAIST frame lists and annotation statistics.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Score detections on KAIST: LAMR, AP and the miss-rate curve.
    EvalDet(EvalDetArgs),
    /// Score saliency maps against ground-truth masks: F-measure and MAE.
    EvalSal(EvalSalArgs),
    /// Plot miss-rate / FPPI curve files as SVG.
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Spectral,
    Finegrained,
    External,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Output size WxH for external maps (default: keep input size).
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(usize, usize)>,
    /// Spectral residual working size WxH.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub working_size: (usize, usize),
    /// Spectral residual smoothing sigma.
    #[arg(long, default_value_t = 2.5)]
    pub sigma: f64,
    /// Fine-grained surround radii.
    #[arg(long, value_delimiter = ',', default_value = "3,7,15,31")]
    pub radii: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub thermal: PathBuf,
    #[arg(long)]
    pub saliency: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Channel replaced by the saliency map.
    #[arg(long, default_value_t = 2)]
    pub channel: usize,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Stride-sampled frame list of one split.
    Sample(SampleArgs),
    /// Frames selected for saliency annotation.
    Subset(SubsetArgs),
    /// Histogram of reasonable pedestrians per frame.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct DatasetOpts {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Split to use (default: train, or test for eval-det).
    #[arg(long, value_parser = ["train", "test"])]
    pub split: Option<String>,
    /// Frame-index phase of the stride sampling.
    #[arg(long, default_value_t = 0)]
    pub offset: u32,
    /// Minimum pedestrian height in pixels.
    #[arg(long, default_value_t = 50.0)]
    pub min_height: f64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub opts: DatasetOpts,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop frames without a reasonable pedestrian.
    #[arg(long)]
    pub drop_empty: bool,
}

#[derive(Debug, Args)]
pub struct SubsetArgs {
    #[command(flatten)]
    pub opts: DatasetOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub opts: DatasetOpts,
    /// Frame list to summarize (default: the annotation subset of --split).
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    #[command(flatten)]
    pub opts: DatasetOpts,
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long, default_value = "all", value_parser = ["day", "night", "all"])]
    pub condition: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Curve CSV path (default: `<out stem>_curve.csv`).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    #[arg(long, default_value = "all", value_parser = ["all", "11"])]
    pub ap_interp: String,
    /// Method name written to the report.
    #[arg(long, default_value = "detector")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct EvalSalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub beta2: f64,
    #[arg(long, default_value = "adaptive", value_parser = ["adaptive", "max"])]
    pub thresholding: String,
    #[arg(long, default_value = "saliency")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Named curve file `NAME=PATH`; repeat for several methods.
    #[arg(long = "input", value_parser = parse_named, required = true)]
    pub inputs: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub svg: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("size {s:?} has a zero side"));
    }
    Ok((w, h))
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.into(), path.into())),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

/// Failure of a command-line run, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Runs one command line (without the program name) and returns its exit
/// status. Diagnostics go to stderr, summaries to stdout.
pub fn run_command<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    match run(args.into_iter().map(Into::into).collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let args = apply_config(args)?;
    let cli = match Cli::try_parse_from(std::iter::once(OsString::from("thermsal")).chain(args)) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let workers = resolve_workers(cli.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("error: cannot start {workers} workers: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command))
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("error: {WORKERS_ENV}={v:?} is not a worker count")))?,
        _ => flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(CliError::Usage("error: worker count must be at least 1".into()));
    }
    Ok(n)
}

/// Removes `--config FILE` from `args` and appends `--key value` for every
/// config entry naming a flag of the selected subcommand that is not already
/// given on the command line.
fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it
                .next()
                .ok_or_else(|| CliError::Usage("error: --config needs a file argument".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let entries = read_config(&path)?;

    let words: Vec<String> = rest.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut cmd = Cli::command();
    let mut positional = words
        .iter()
        .enumerate()
        .filter(|(i, w)| !w.starts_with('-') && (*i == 0 || words[i - 1] != "--workers"))
        .map(|(_, w)| w);
    let mut target = match positional.next().and_then(|name| cmd.find_subcommand_mut(name)) {
        Some(sub) => sub.clone(),
        None => return Ok(rest),
    };
    if target.has_subcommands() {
        match positional.next().and_then(|name| target.find_subcommand(name)) {
            Some(sub) => target = sub.clone(),
            None => return Ok(rest),
        }
    }
    let given = |long: &str| {
        words
            .iter()
            .any(|w| w == &format!("--{long}") || w.starts_with(&format!("--{long}=")))
    };
    for (key, value) in entries {
        let Some(arg) = target.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        if given(&key) {
            continue;
        }
        if arg.get_action().takes_values() {
            rest.push(format!("--{key}").into());
            rest.push(value.into());
        } else if value == "true" {
            rest.push(format!("--{key}").into());
        }
    }
    Ok(rest)
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Core(Error::Parse {
                context: path.display().to_string(),
                line: n + 1,
                message: "expected key=value".into(),
            })
        })?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_names() {
        assert_eq!(parse_size("64x32"), Ok((64, 32)));
        assert!(parse_size("0x3").is_err());
        assert!(parse_size("64").is_err());
        assert_eq!(parse_named("a=b.csv"), Ok(("a".into(), "b.csv".into())));
        assert!(parse_named("=b").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
