use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use thermsal_core::dataset::{
    format_frame_list, frames_with_pedestrians, histogram_total, parse_frame_list, pedestrian_histogram, sample_split,
    select_annotation_subset,
};
use thermsal_core::detmetrics::{evaluate, parse_detections, EvalCondition, EvalOptions};
use thermsal_core::fusion::fuse_channel_replace;
use thermsal_core::imagery::{load_gray, GrayImage};
use thermsal_core::saliency::{fine_grained, spectral_residual, SaliencyMap};
use thermsal_core::salmetrics::{evaluate_saliency, SaliencyEvalConfig};
use thermsal_core::{
    Condition, DatasetConfig, DatasetIndex, Error, FineGrainedParams, FrameRef, FusionConfig, Result,
    SpectralResidualParams, Split,
};

use crate::curves::{write_curve_csv, write_file};
use crate::{
    CliError, Command, CurvesArgs, DatasetCommand, DatasetOpts, EvalDetArgs, EvalSalArgs, FuseArgs, MethodArg,
    SaliencyArgs, SampleArgs, StatsArgs, SubsetArgs,
};

pub(crate) fn dispatch(cmd: &Command) -> std::result::Result<(), CliError> {
    match cmd {
        Command::Saliency(a) => saliency(a),
        Command::Fuse(a) => fuse(a),
        Command::Dataset(DatasetCommand::Sample(a)) => sample(a),
        Command::Dataset(DatasetCommand::Subset(a)) => subset(a),
        Command::Dataset(DatasetCommand::Stats(a)) => stats(a),
        Command::EvalDet(a) => eval_det(a),
        Command::EvalSal(a) => eval_sal(a),
        Command::Curves(a) => curves(a),
    }
    .map_err(CliError::from)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Images under `root` keyed by relative path without extension, using `/`
/// separators. Two files differing only in extension are rejected.
fn list_images(root: &Path) -> Result<BTreeMap<String, PathBuf>> {
    if !root.is_dir() {
        return Err(Error::Io {
            path: root.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::Io {
                path,
                source: e
                    .into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("directory loop")),
            }
        })?;
        if !entry.file_type().is_file() || !is_image(entry.path()) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        let key = rel
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if let Some(prev) = out.insert(key.clone(), entry.path().to_path_buf()) {
            return Err(Error::Invalid(format!(
                "{} and {} map to the same output {key}.png",
                prev.display(),
                entry.path().display()
            )));
        }
    }
    Ok(out)
}

fn output_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.png"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|source| Error::Io { path: p.into(), source })
        }
        _ => Ok(()),
    }
}

/// Runs `job` on every item in parallel and reports the first failure in
/// input order, so errors are as deterministic as outputs.
fn for_each_ordered<K: Sync, V: Sync>(items: &[(K, V)], job: impl Fn(&K, &V) -> Result<()> + Sync) -> Result<()> {
    let results: Vec<Result<()>> = items.par_iter().map(|(k, v)| job(k, v)).collect();
    results.into_iter().collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

fn saliency(a: &SaliencyArgs) -> Result<()> {
    let spectral = SpectralResidualParams {
        working_width: a.working_size.0,
        working_height: a.working_size.1,
        smoothing_sigma: a.sigma,
        ..Default::default()
    };
    spectral.validate()?;
    let fine = FineGrainedParams {
        surround_radii: a.radii.clone(),
    };
    fine.validate()?;
    if a.size.is_some() && a.method != MethodArg::External {
        return Err(Error::Invalid("--size applies to --method external only".into()));
    }

    let inputs: Vec<(String, PathBuf)> = list_images(&a.input)?.into_iter().collect();
    if inputs.is_empty() {
        return Err(Error::Invalid(format!(
            "no PNG or JPEG images under {}",
            a.input.display()
        )));
    }
    for_each_ordered(&inputs, |key, path| {
        let img = load_gray(path)?;
        let sal: SaliencyMap<f64> = match a.method {
            MethodArg::Spectral => spectral_residual(&img, &spectral)?,
            MethodArg::Finegrained => fine_grained(&img, &fine)?,
            MethodArg::External => SaliencyMap::from_external(&img, a.size)?,
        };
        let out = output_path(&a.output, key);
        ensure_parent(&out)?;
        sal.to_gray().save(&out)
    })?;
    println!("wrote {} saliency maps to {}", inputs.len(), a.output.display());
    Ok(())
}

fn fuse(a: &FuseArgs) -> Result<()> {
    let cfg = FusionConfig::new(a.channel)?;
    let thermal = list_images(&a.thermal)?;
    let saliency = list_images(&a.saliency)?;
    let missing: Vec<&str> = thermal
        .keys()
        .filter(|k| !saliency.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!("no saliency map for {}", missing.join(", "))));
    }
    if thermal.is_empty() {
        return Err(Error::Invalid(format!(
            "no PNG or JPEG images under {}",
            a.thermal.display()
        )));
    }
    let pairs: Vec<(String, (PathBuf, PathBuf))> = thermal
        .into_iter()
        .map(|(k, t)| {
            let s = saliency[&k].clone();
            (k, (t, s))
        })
        .collect();
    for_each_ordered(&pairs, |key, (t, s)| {
        let thermal = load_gray(t)?;
        let sal = SaliencyMap::<f64>::from_gray(&load_gray(s)?);
        let fused = fuse_channel_replace(&thermal, &sal, cfg)?;
        let out = output_path(&a.output, key);
        ensure_parent(&out)?;
        fused.save(&out)
    })?;
    println!("wrote {} fused images to {}", pairs.len(), a.output.display());
    Ok(())
}

fn dataset_config(opts: &DatasetOpts, split: Split) -> Result<DatasetConfig> {
    let mut cfg = DatasetConfig {
        min_height: opts.min_height,
        ..DatasetConfig::default()
    };
    match split {
        Split::Train => cfg.train_offset = opts.offset,
        Split::Test => cfg.test_offset = opts.offset,
    }
    if !opts.min_height.is_finite() || opts.min_height < 0.0 {
        return Err(Error::Invalid(format!(
            "minimum height {} must be non-negative",
            opts.min_height
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_dataset(opts: &DatasetOpts, default_split: Split) -> Result<(Split, DatasetConfig, DatasetIndex)> {
    let split = match &opts.split {
        Some(s) => s.parse()?,
        None => default_split,
    };
    let cfg = dataset_config(opts, split)?;
    let index = DatasetIndex::scan(&opts.dataset, &cfg)?;
    Ok((split, cfg, index))
}

fn condition_counts(frames: &[FrameRef]) -> (usize, usize) {
    let day = frames.iter().filter(|f| f.condition == Condition::Day).count();
    (day, frames.len() - day)
}

fn sample(a: &SampleArgs) -> Result<()> {
    let (split, cfg, index) = load_dataset(&a.opts, Split::Train)?;
    let mut frames = sample_split(&index, split, &cfg);
    if a.drop_empty {
        frames = frames_with_pedestrians(&index, &frames, &cfg);
    }
    write_file(&a.out, format_frame_list(&frames).as_bytes())?;
    let (day, night) = condition_counts(&frames);
    println!("{split}: {} frames ({day} day, {night} night)", frames.len());
    Ok(())
}

fn subset(a: &SubsetArgs) -> Result<()> {
    let (split, cfg, index) = load_dataset(&a.opts, Split::Train)?;
    let frames = select_annotation_subset(&index, split, &cfg);
    write_file(&a.out, format_frame_list(&frames).as_bytes())?;
    let (day, night) = condition_counts(&frames);
    let instances = histogram_total(&pedestrian_histogram(&index, &frames, &cfg));
    println!(
        "{split} subset: {} frames ({day} day, {night} night), {instances} pedestrians",
        frames.len()
    );
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let (split, cfg, index) = load_dataset(&a.opts, Split::Train)?;
    let frames = match &a.frames {
        Some(path) => {
            let frames = parse_frame_list(&read_text(path)?, &cfg)?;
            if let Some(f) = frames.iter().find(|f| !index.contains(f)) {
                return Err(Error::Invalid(format!("frame {f} is not in the dataset")));
            }
            frames
        }
        None => select_annotation_subset(&index, split, &cfg),
    };
    let hist = pedestrian_histogram(&index, &frames, &cfg);
    let mut csv = String::from("pedestrians,frames\n");
    for (count, n) in &hist {
        csv.push_str(&format!("{count},{n}\n"));
    }
    write_file(&a.out, csv.as_bytes())?;
    println!("{} frames, {} pedestrians", frames.len(), histogram_total(&hist));
    Ok(())
}

fn default_curve_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_curve.csv"))
}

fn eval_det(a: &EvalDetArgs) -> Result<()> {
    let condition: EvalCondition = a.condition.parse()?;
    let opts = EvalOptions {
        iou_thresh: a.iou,
        interpolation: a.ap_interp.parse()?,
    };
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(Error::Invalid(format!("IoU threshold {} is outside (0, 1]", a.iou)));
    }
    let (split, cfg, index) = load_dataset(&a.opts, Split::Test)?;
    let frames = sample_split(&index, split, &cfg);
    let evaluated = index.restrict(&frames);
    let dets = parse_detections(&read_text(&a.dets)?, &cfg, &a.dets.display().to_string())?;
    let report = evaluate(&evaluated, &dets, condition, &cfg, &opts)?;

    let csv = format!(
        "method,condition,frames,ground_truth,detections,lamr,map\n{},{},{},{},{},{:.6},{:.6}\n",
        a.method, report.condition, report.frames, report.ground_truth, report.detections, report.lamr, report.map
    );
    write_file(&a.out, csv.as_bytes())?;
    let curve_path = a.curve.clone().unwrap_or_else(|| default_curve_path(&a.out));
    write_curve_csv(&report.curve, &curve_path)?;

    println!(
        "{:<16} {:<9} {:>7} {:>7} {:>9} {:>8} {:>8}",
        "method", "condition", "frames", "gt", "dets", "LAMR", "AP"
    );
    println!(
        "{:<16} {:<9} {:>7} {:>7} {:>9} {:>7.2}% {:>7.2}%",
        a.method,
        report.condition,
        report.frames,
        report.ground_truth,
        report.detections,
        100.0 * report.lamr,
        100.0 * report.map
    );
    Ok(())
}

fn eval_sal(a: &EvalSalArgs) -> Result<()> {
    let cfg = SaliencyEvalConfig {
        beta_squared: a.beta2,
        thresholding: a.thresholding.parse()?,
    };
    cfg.validate()?;
    let preds = list_images(&a.pred)?;
    let gts = list_images(&a.gt)?;
    let load = |files: &BTreeMap<String, PathBuf>| -> Result<Vec<(String, GrayImage)>> {
        let items: Vec<(&String, &PathBuf)> = files.iter().collect();
        let loaded: Vec<Result<(String, GrayImage)>> = items
            .par_iter()
            .map(|(k, p)| Ok(((*k).clone(), load_gray(p)?)))
            .collect();
        loaded.into_iter().collect()
    };
    let gt_imgs = load(&gts)?;
    let gt_dims: BTreeMap<&str, (usize, usize)> = gt_imgs.iter().map(|(k, g)| (k.as_str(), g.dims())).collect();
    let pred_imgs = load(&preds)?;

    let gt_maps: BTreeMap<String, SaliencyMap<f64>> = gt_imgs
        .par_iter()
        .map(|(k, g)| (k.clone(), thermsal_core::BinaryMask::from_gray(g).to_saliency()))
        .collect();
    let pred_maps: Vec<Result<(String, SaliencyMap<f64>)>> = pred_imgs
        .par_iter()
        .map(|(k, p)| {
            Ok((
                k.clone(),
                SaliencyMap::from_external(p, gt_dims.get(k.as_str()).copied())?,
            ))
        })
        .collect();
    let pred_maps: BTreeMap<String, SaliencyMap<f64>> = pred_maps.into_iter().collect::<Result<_>>()?;

    let scores = evaluate_saliency(&pred_maps, &gt_maps, &cfg)?;
    let csv = format!(
        "method,f_beta,mae\n{},{:.6},{:.6}\n",
        a.method, scores.f_beta, scores.mae
    );
    write_file(&a.out, csv.as_bytes())?;
    println!(
        "{}: F_beta {:.4}, MAE {:.4} over {} images",
        a.method, scores.f_beta, scores.mae, scores.images
    );
    Ok(())
}

fn curves(a: &CurvesArgs) -> Result<()> {
    let curves = a
        .inputs
        .iter()
        .map(|(name, path)| Ok((name.clone(), crate::curves::read_curve_csv(path)?)))
        .collect::<Result<Vec<_>>>()?;
    crate::curves::write_curve_svg(&curves, &a.svg)?;
    println!("plotted {} curves to {}", curves.len(), a.svg.display());
    Ok(())
}
