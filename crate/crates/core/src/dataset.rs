//! KAIST multispectral dataset structure and evaluation protocol.
//!
//! Frames are identified as `setXX/VYYY/IZZZZZ`. Images live under
//! `setXX/VYYY/lwir/` (optionally below an `images/` directory) and bbGt
//! annotation files under `annotations/setXX/VYYY/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use walkdir::WalkDir;

use crate::{Error, Result, Scalar};

pub const KAIST_WIDTH: usize = 640;
pub const KAIST_HEIGHT: usize = 512;

/// Header line written by [`serialize_bbgt`].
pub const BBGT_HEADER: &str = "% bbGt version=3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Day,
    Night,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Day => "day",
            Condition::Night => "night",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(Condition::Day),
            "night" => Ok(Condition::Night),
            other => Err(Error::Invalid(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Dataset layout and protocol knobs. Defaults follow the KAIST release.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub day_sets: BTreeSet<u32>,
    pub test_sets: BTreeSet<u32>,
    pub train_stride: u32,
    pub test_stride: u32,
    /// Frame-index phase of the stride sampling.
    pub train_offset: u32,
    pub test_offset: u32,
    pub image_width: usize,
    pub image_height: usize,
    /// Smallest pedestrian height (pixels) kept under reasonable conditions.
    pub min_height: f64,
    pub subset_day_stride: usize,
    pub subset_night_stride: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            day_sets: [0, 1, 2, 6, 7, 8].into_iter().collect(),
            test_sets: (6..=11).collect(),
            train_stride: 3,
            test_stride: 20,
            train_offset: 0,
            test_offset: 0,
            image_width: KAIST_WIDTH,
            image_height: KAIST_HEIGHT,
            min_height: 50.0,
            subset_day_stride: 15,
            subset_night_stride: 10,
        }
    }
}

impl DatasetConfig {
    pub fn condition_of(&self, set_id: u32) -> Condition {
        if self.day_sets.contains(&set_id) {
            Condition::Day
        } else {
            Condition::Night
        }
    }

    pub fn split_of(&self, set_id: u32) -> Split {
        if self.test_sets.contains(&set_id) {
            Split::Test
        } else {
            Split::Train
        }
    }

    pub fn frame(&self, set_id: u32, video_id: u32, frame_index: u32) -> FrameRef {
        FrameRef {
            split: self.split_of(set_id),
            set_id,
            video_id,
            frame_index,
            condition: self.condition_of(set_id),
        }
    }

    /// Resolves a canonical `setXX/VYYY/IZZZZZ` id.
    pub fn frame_from_id(&self, id: &str) -> Result<FrameRef> {
        let (s, v, i) = parse_frame_id(id)?;
        Ok(self.frame(s, v, i))
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_stride == 0 || self.test_stride == 0 {
            return Err(Error::Invalid("sampling strides must be positive".into()));
        }
        if self.subset_day_stride == 0 || self.subset_night_stride == 0 {
            return Err(Error::Invalid("subset strides must be positive".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Invalid("image size must be positive".into()));
        }
        Ok(())
    }
}

/// One video frame. Ordering is `(split, set, video, frame)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameRef {
    pub split: Split,
    pub set_id: u32,
    pub video_id: u32,
    pub frame_index: u32,
    pub condition: Condition,
}

impl FrameRef {
    /// Canonical id `setXX/VYYY/IZZZZZ`.
    pub fn id(&self) -> String {
        format!("set{:02}/V{:03}/I{:05}", self.set_id, self.video_id, self.frame_index)
    }
}

impl fmt::Display for FrameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "set{:02}/V{:03}/I{:05}",
            self.set_id, self.video_id, self.frame_index
        )
    }
}

fn parse_tagged(s: &str, tag: char, digits: usize) -> Option<u32> {
    let rest = s.strip_prefix(tag)?;
    (rest.len() == digits && rest.bytes().all(|b| b.is_ascii_digit()))
        .then(|| rest.parse().ok())
        .flatten()
}

fn parse_set(s: &str) -> Option<u32> {
    let rest = s.strip_prefix("set")?;
    (rest.len() == 2 && rest.bytes().all(|b| b.is_ascii_digit()))
        .then(|| rest.parse().ok())
        .flatten()
}

/// Splits `setXX/VYYY/IZZZZZ` into its numeric parts.
pub fn parse_frame_id(id: &str) -> Result<(u32, u32, u32)> {
    let parts: Vec<&str> = id.split('/').collect();
    let parsed = match parts.as_slice() {
        [s, v, i] => parse_set(s).zip(parse_tagged(v, 'V', 3)).zip(parse_tagged(i, 'I', 5)),
        _ => None,
    };
    parsed
        .map(|((s, v), i)| (s, v, i))
        .ok_or_else(|| Error::Invalid(format!("malformed frame id {id:?}")))
}

/// One bbGt object line.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation<T> {
    pub label: String,
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
    /// Occlusion level; zero means unoccluded.
    pub occlusion: u32,
    pub visible: [T; 4],
    pub ignore: bool,
}

impl<T: Scalar> Annotation<T> {
    pub fn person(x: T, y: T, w: T, h: T) -> Self {
        Self {
            label: "person".into(),
            x,
            y,
            w,
            h,
            occlusion: 0,
            visible: [T::zero(); 4],
            ignore: false,
        }
    }

    pub fn is_occluded(&self) -> bool {
        self.occlusion != 0
    }

    pub fn bbox(&self) -> crate::detmetrics::BBox<T> {
        crate::detmetrics::BBox::new(self.x, self.y, self.w, self.h)
    }

    /// Whether the box lies entirely inside a `width` x `height` image.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.x >= T::zero()
            && self.y >= T::zero()
            && self.x + self.w <= T::from_usize_lossy(width)
            && self.y + self.h <= T::from_usize_lossy(height)
    }
}

fn parse_field<V: FromStr>(tok: &str, name: &str, context: &str, line: usize) -> Result<V> {
    tok.parse().map_err(|_| Error::Parse {
        context: context.into(),
        line,
        message: format!("{name} field {tok:?} is not numeric"),
    })
}

fn parse_flag(tok: &str, name: &str, context: &str, line: usize) -> Result<u32> {
    // Some exports write flags as "0.0"/"1.0".
    match tok.parse::<u32>() {
        Ok(v) => Ok(v),
        Err(_) => {
            let v: f64 = parse_field(tok, name, context, line)?;
            if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                Ok(v as u32)
            } else {
                Err(Error::Parse {
                    context: context.into(),
                    line,
                    message: format!("{name} flag {tok:?} is not a non-negative integer"),
                })
            }
        }
    }
}

/// Parses a bbGt annotation file.
///
/// Each object line carries `label x y w h occ vx vy vw vh ign`, optionally
/// followed by an angle field that is ignored.
pub fn parse_bbgt<T: Scalar>(text: &str, context: &str) -> Result<Vec<Annotation<T>>> {
    let mut lines = text.lines().enumerate();
    let header = lines.by_ref().find(|(_, l)| !l.trim().is_empty());
    match header {
        Some((_, l)) if l.trim_start().starts_with("% bbGt") => {}
        Some((n, _)) => {
            return Err(Error::Parse {
                context: context.into(),
                line: n + 1,
                message: "missing '% bbGt' version header".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                context: context.into(),
                line: 1,
                message: "empty file, missing '% bbGt' version header".into(),
            })
        }
    }

    let mut out = Vec::new();
    for (n, raw) in lines {
        let line = n + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 11 && toks.len() != 12 {
            return Err(Error::Parse {
                context: context.into(),
                line,
                message: format!("expected 11 or 12 fields, found {}", toks.len()),
            });
        }
        let num = |i: usize, name: &str| parse_field::<T>(toks[i], name, context, line);
        let ann = Annotation {
            label: toks[0].to_string(),
            x: num(1, "x")?,
            y: num(2, "y")?,
            w: num(3, "w")?,
            h: num(4, "h")?,
            occlusion: parse_flag(toks[5], "occluded", context, line)?,
            visible: [num(6, "vx")?, num(7, "vy")?, num(8, "vw")?, num(9, "vh")?],
            ignore: parse_flag(toks[10], "ignore", context, line)? != 0,
        };
        if toks.len() == 12 {
            num(11, "angle")?;
        }
        if !(ann.w > T::zero() && ann.h > T::zero()) {
            return Err(Error::Parse {
                context: context.into(),
                line,
                message: format!("box size {}x{} is not positive", ann.w, ann.h),
            });
        }
        if [ann.x, ann.y, ann.w, ann.h].iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                context: context.into(),
                line,
                message: "non-finite box coordinate".into(),
            });
        }
        out.push(ann);
    }
    Ok(out)
}

/// Writes annotations in the 11-field bbGt layout accepted by [`parse_bbgt`].
pub fn serialize_bbgt<T: Scalar>(anns: &[Annotation<T>]) -> String {
    let mut s = String::from(BBGT_HEADER);
    s.push('\n');
    for a in anns {
        s.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {}\n",
            a.label,
            a.x,
            a.y,
            a.w,
            a.h,
            a.occlusion,
            a.visible[0],
            a.visible[1],
            a.visible[2],
            a.visible[3],
            u8::from(a.ignore)
        ));
    }
    s
}

/// Splits annotations into reasonable pedestrians and ignore regions.
///
/// Kept: label `person`, height at least `min_height`, unoccluded, not
/// flagged ignore, box fully inside the image. Everything else is returned
/// in `ignored`, preserving input order in both lists.
pub fn filter_reasonable<T: Scalar>(
    anns: &[Annotation<T>],
    img_w: usize,
    img_h: usize,
    min_height: T,
) -> (Vec<Annotation<T>>, Vec<Annotation<T>>) {
    anns.iter().cloned().partition(|a| {
        a.label == "person" && a.h >= min_height && !a.is_occluded() && !a.ignore && a.inside(img_w, img_h)
    })
}

/// Frame list plus per-frame annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetIndex<T = f64> {
    frames: Vec<FrameRef>,
    annotations: BTreeMap<FrameRef, Vec<Annotation<T>>>,
}

impl<T: Scalar> DatasetIndex<T> {
    /// Sorts and deduplicates `frames`; frames that appear only as
    /// annotation keys are added.
    pub fn new(frames: Vec<FrameRef>, annotations: BTreeMap<FrameRef, Vec<Annotation<T>>>) -> Self {
        let mut all: BTreeSet<FrameRef> = frames.into_iter().collect();
        all.extend(annotations.keys().copied());
        Self {
            frames: all.into_iter().collect(),
            annotations,
        }
    }

    /// Indexes a KAIST-style directory tree.
    pub fn scan(root: &Path, cfg: &DatasetConfig) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
            ));
        }
        let mut frames = BTreeSet::new();
        let mut annotations = BTreeMap::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(root).to_path_buf();
                Error::io(
                    path,
                    e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
                )
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let path = entry.path();
            let Some(kind) = classify(path) else { continue };
            match kind {
                Entry::Image(s, v, i) => {
                    frames.insert(cfg.frame(s, v, i));
                }
                Entry::Annotation(s, v, i) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let anns = parse_bbgt(&text, &path.display().to_string())?;
                    annotations.insert(cfg.frame(s, v, i), anns);
                }
            }
        }
        Ok(Self::new(frames.into_iter().collect(), annotations))
    }

    pub fn frames(&self) -> &[FrameRef] {
        &self.frames
    }

    /// Sub-index over `frames` (entries absent from `self` are dropped).
    pub fn restrict(&self, frames: &[FrameRef]) -> Self {
        let keep: BTreeSet<FrameRef> = frames.iter().filter(|f| self.contains(f)).copied().collect();
        let annotations = self
            .annotations
            .iter()
            .filter(|(f, _)| keep.contains(f))
            .map(|(f, a)| (*f, a.clone()))
            .collect();
        Self {
            frames: keep.into_iter().collect(),
            annotations,
        }
    }

    pub fn contains(&self, frame: &FrameRef) -> bool {
        self.frames.binary_search(frame).is_ok()
    }

    pub fn annotations(&self, frame: &FrameRef) -> &[Annotation<T>] {
        self.annotations.get(frame).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Reasonable pedestrians and ignore regions of one frame.
    pub fn reasonable(&self, frame: &FrameRef, cfg: &DatasetConfig) -> (Vec<Annotation<T>>, Vec<Annotation<T>>) {
        filter_reasonable(
            self.annotations(frame),
            cfg.image_width,
            cfg.image_height,
            T::lit(cfg.min_height),
        )
    }

    pub fn pedestrian_count(&self, frame: &FrameRef, cfg: &DatasetConfig) -> usize {
        self.reasonable(frame, cfg).0.len()
    }
}

enum Entry {
    Image(u32, u32, u32),
    Annotation(u32, u32, u32),
}

fn classify(path: &Path) -> Option<Entry> {
    let names: Vec<&str> = path.iter().rev().take(4).map(|c| c.to_str()).collect::<Option<_>>()?;
    let file = Path::new(names[0]);
    let stem = file.file_stem()?.to_str()?;
    let ext = file.extension()?.to_str()?.to_ascii_lowercase();
    let frame = parse_tagged(stem, 'I', 5)?;
    match ext.as_str() {
        "png" | "jpg" | "jpeg" if names.len() == 4 && names[1] == "lwir" => Some(Entry::Image(
            parse_set(names[3])?,
            parse_tagged(names[2], 'V', 3)?,
            frame,
        )),
        "txt" if names.len() >= 3 => {
            let in_annotations = path
                .ancestors()
                .skip(3)
                .any(|a| a.file_name().and_then(|n| n.to_str()) == Some("annotations"));
            in_annotations.then_some(())?;
            Some(Entry::Annotation(
                parse_set(names[2])?,
                parse_tagged(names[1], 'V', 3)?,
                frame,
            ))
        }
        _ => None,
    }
}

/// Stride sampling: per video, keep frames whose index is congruent to the
/// split's offset modulo its stride. Output preserves index order.
pub fn sample_split<T: Scalar>(index: &DatasetIndex<T>, split: Split, cfg: &DatasetConfig) -> Vec<FrameRef> {
    let (stride, offset) = match split {
        Split::Train => (cfg.train_stride, cfg.train_offset),
        Split::Test => (cfg.test_stride, cfg.test_offset),
    };
    let stride = stride.max(1);
    index
        .frames()
        .iter()
        .filter(|f| f.split == split && f.frame_index % stride == offset % stride)
        .copied()
        .collect()
}

/// Frames with at least one reasonable pedestrian.
pub fn frames_with_pedestrians<T: Scalar>(
    index: &DatasetIndex<T>,
    frames: &[FrameRef],
    cfg: &DatasetConfig,
) -> Vec<FrameRef> {
    frames
        .iter()
        .filter(|f| index.pedestrian_count(f, cfg) > 0)
        .copied()
        .collect()
}

/// Annotation-subset selection: among frames of `split` containing
/// pedestrians, keep every `subset_day_stride`-th day frame and every
/// `subset_night_stride`-th night frame (0-based positions in canonical
/// order, counted separately per condition).
pub fn select_annotation_subset<T: Scalar>(
    index: &DatasetIndex<T>,
    split: Split,
    cfg: &DatasetConfig,
) -> Vec<FrameRef> {
    let candidates: Vec<FrameRef> = index.frames().iter().filter(|f| f.split == split).copied().collect();
    let with_peds = frames_with_pedestrians(index, &candidates, cfg);
    let (mut day_pos, mut night_pos) = (0usize, 0usize);
    let mut out = Vec::new();
    for f in with_peds {
        let (pos, stride) = match f.condition {
            Condition::Day => (&mut day_pos, cfg.subset_day_stride),
            Condition::Night => (&mut night_pos, cfg.subset_night_stride),
        };
        if *pos % stride.max(1) == 0 {
            out.push(f);
        }
        *pos += 1;
    }
    out
}

/// Histogram of reasonable-pedestrian count per frame.
pub fn pedestrian_histogram<T: Scalar>(
    index: &DatasetIndex<T>,
    frames: &[FrameRef],
    cfg: &DatasetConfig,
) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for f in frames {
        *hist.entry(index.pedestrian_count(f, cfg)).or_insert(0) += 1;
    }
    hist
}

/// Total instances `sum(count * frequency)` of a histogram.
pub fn histogram_total(hist: &BTreeMap<usize, usize>) -> usize {
    hist.iter().map(|(c, n)| c * n).sum()
}

pub fn format_frame_list(frames: &[FrameRef]) -> String {
    let mut s = String::with_capacity(frames.len() * 18);
    for f in frames {
        s.push_str(&f.id());
        s.push('\n');
    }
    s
}

pub fn parse_frame_list(text: &str, cfg: &DatasetConfig) -> Result<Vec<FrameRef>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| cfg.frame_from_id(l))
        .collect()
}
