//! Pedestrian detection evaluation under reasonable conditions.
//!
//! Detections are matched greedily per frame in descending score order
//! against reasonable ground truth; unmatched detections that fall mostly
//! inside an ignore region are neither rewarded nor penalized. Sweeping the
//! score threshold gives the FPPI / miss-rate curve, summarized by the
//! log-average miss rate over nine FPPI references in `[1e-2, 1e0]`, and the
//! ranked labels give all-point (or 11-point) average precision.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{Condition, DatasetConfig, DatasetIndex, FrameRef};
use crate::{Error, Result, Scalar};

/// Floor applied to sampled miss rates before taking logarithms.
pub const MISS_RATE_FLOOR: f64 = 1e-10;

/// Axis-aligned box, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn intersection(&self, other: &Self) -> T {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if iw <= T::zero() || ih <= T::zero() {
            T::zero()
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection(other);
        if inter == T::zero() {
            return T::zero();
        }
        inter / (self.area() + other.area() - inter)
    }
}

/// Intersection over union of two boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    a.iou(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox<T> {
    pub bbox: BBox<T>,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub frame: FrameRef,
    pub bbox: BBox<T>,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchLabel {
    Tp,
    Fp,
    Ignored,
}

/// Matching outcome of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMatch {
    /// One label per detection, in input order.
    pub labels: Vec<MatchLabel>,
    /// One flag per kept ground-truth box.
    pub matched: Vec<bool>,
}

impl FrameMatch {
    pub fn missed(&self) -> usize {
        self.matched.iter().filter(|m| !**m).count()
    }
}

/// Everything needed to score one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput<T> {
    pub dets: Vec<ScoredBox<T>>,
    pub kept: Vec<BBox<T>>,
    pub ignored: Vec<BBox<T>>,
}

impl<T> Default for FrameInput<T> {
    fn default() -> Self {
        Self {
            dets: Vec::new(),
            kept: Vec::new(),
            ignored: Vec::new(),
        }
    }
}

fn by_score_desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Greedy matching of one frame.
///
/// Detections are visited by descending score, ties in input order. Each
/// takes the still-unmatched kept box of highest IoU (first one on equal
/// IoU) provided that IoU reaches `iou_thresh`. An unmatched detection whose
/// intersection with some ignore region covers at least `iou_thresh` of the
/// detection's own area is `Ignored`; any other is `Fp`.
pub fn match_frame<T: Scalar>(
    dets: &[ScoredBox<T>],
    kept: &[BBox<T>],
    ignored: &[BBox<T>],
    iou_thresh: T,
) -> FrameMatch {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| by_score_desc(dets[a].score, dets[b].score));

    let mut labels = vec![MatchLabel::Fp; dets.len()];
    let mut matched = vec![false; kept.len()];
    for i in order {
        let det = &dets[i].bbox;
        let mut best: Option<(usize, T)> = None;
        for (g, gt) in kept.iter().enumerate() {
            if matched[g] {
                continue;
            }
            let overlap = det.iou(gt);
            if overlap >= iou_thresh && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        labels[i] = match best {
            Some((g, _)) => {
                matched[g] = true;
                MatchLabel::Tp
            }
            None => {
                let area = det.area();
                let covered = ignored.iter().any(|ig| det.intersection(ig) >= iou_thresh * area);
                if covered {
                    MatchLabel::Ignored
                } else {
                    MatchLabel::Fp
                }
            }
        };
    }
    FrameMatch { labels, matched }
}

/// Labeled detection in global ranking order.
#[derive(Debug, Clone, Copy)]
struct Ranked<T> {
    score: T,
    label: MatchLabel,
    frame: usize,
    slot: usize,
}

/// Matches every frame and ranks all detections by descending score; ties
/// fall back to frame position and then to input order within the frame.
fn rank_all<T: Scalar>(frames: &[FrameInput<T>], iou_thresh: T) -> (Vec<Ranked<T>>, usize) {
    let per_frame: Vec<FrameMatch> = frames
        .par_iter()
        .map(|f| match_frame(&f.dets, &f.kept, &f.ignored, iou_thresh))
        .collect();
    let mut ranked: Vec<Ranked<T>> = frames
        .iter()
        .zip(&per_frame)
        .enumerate()
        .flat_map(|(fi, (f, m))| {
            f.dets
                .iter()
                .zip(&m.labels)
                .enumerate()
                .map(move |(slot, (d, &label))| Ranked {
                    score: d.score,
                    label,
                    frame: fi,
                    slot,
                })
        })
        .collect();
    ranked.sort_by(|a, b| {
        by_score_desc(a.score, b.score)
            .then(a.frame.cmp(&b.frame))
            .then(a.slot.cmp(&b.slot))
    });
    let total_gt = frames.iter().map(|f| f.kept.len()).sum();
    (ranked, total_gt)
}

/// One sample of the FPPI / miss-rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T> {
    /// Detections scoring at least this value are accepted.
    pub threshold: T,
    pub fppi: T,
    pub miss_rate: T,
}

/// FPPI / miss-rate curve with one point per distinct detection score.
///
/// Greedy matching makes the labels at a threshold a prefix of the full
/// ranking, so one pass over the ranked detections suffices. Points come out
/// by descending threshold, which is ascending FPPI. Without any detection
/// the curve is the single point `(+inf, 0, 1)`.
pub fn fppi_missrate_curve<T: Scalar>(frames: &[FrameInput<T>], iou_thresh: T) -> Result<Vec<OperatingPoint<T>>> {
    let (ranked, total_gt) = rank_all(frames, iou_thresh);
    if total_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let n_frames = T::from_usize_lossy(frames.len());
    let gt = T::from_usize_lossy(total_gt);
    if ranked.is_empty() {
        return Ok(vec![OperatingPoint {
            threshold: T::infinity(),
            fppi: T::zero(),
            miss_rate: T::one(),
        }]);
    }

    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].score;
        while i < ranked.len() && ranked[i].score == threshold {
            match ranked[i].label {
                MatchLabel::Tp => tp += 1,
                MatchLabel::Fp => fp += 1,
                MatchLabel::Ignored => {}
            }
            i += 1;
        }
        curve.push(OperatingPoint {
            threshold,
            fppi: T::from_usize_lossy(fp) / n_frames,
            miss_rate: T::from_usize_lossy(total_gt - tp) / gt,
        });
    }
    Ok(curve)
}

/// The nine FPPI references `10^(-2 + k/4)`, `k = 0..=8`.
pub fn lamr_references<T: Scalar>() -> [T; 9] {
    std::array::from_fn(|k| T::lit(10.0).powf(T::lit(-2.0 + 0.25 * k as f64)))
}

/// Log-average miss rate of a curve sorted by ascending FPPI.
///
/// At each reference the miss rate of the last point with `fppi <= ref` is
/// taken (1.0 when there is none); the result is the geometric mean of those
/// samples after flooring them at [`MISS_RATE_FLOOR`].
pub fn lamr<T: Scalar>(curve: &[OperatingPoint<T>]) -> T {
    let floor = T::lit(MISS_RATE_FLOOR);
    let refs = lamr_references::<T>();
    let log_sum = refs.iter().fold(T::zero(), |acc, &r| {
        let miss = curve
            .iter()
            .take_while(|p| p.fppi <= r)
            .last()
            .map_or(T::one(), |p| p.miss_rate);
        acc + miss.max(floor).ln()
    });
    (log_sum / T::from_usize_lossy(refs.len())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApInterpolation {
    /// Area under the non-increasing precision envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

impl FromStr for ApInterpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-point" => Ok(Self::AllPoint),
            "11" | "11-point" => Ok(Self::ElevenPoint),
            other => Err(Error::Invalid(format!("unknown AP interpolation {other:?}"))),
        }
    }
}

/// Single-class average precision over all frames.
///
/// Ignored detections are dropped from the ranking. With all-point
/// interpolation every true positive adds `1 / G` recall at the envelope
/// precision of its rank, so AP is the envelope sum over TP ranks over `G`.
pub fn average_precision<T: Scalar>(frames: &[FrameInput<T>], iou_thresh: T, interp: ApInterpolation) -> Result<T> {
    let (ranked, total_gt) = rank_all(frames, iou_thresh);
    if total_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }

    // (tp, precision) after each counted rank.
    let mut points: Vec<(usize, MatchLabel, T)> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for r in ranked.iter().filter(|r| r.label != MatchLabel::Ignored) {
        if r.label == MatchLabel::Tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let precision = T::from_usize_lossy(tp) / T::from_usize_lossy(tp + fp);
        points.push((tp, r.label, precision));
    }

    let mut envelope = vec![T::zero(); points.len()];
    let mut running = T::zero();
    for (k, &(_, _, p)) in points.iter().enumerate().rev() {
        running = running.max(p);
        envelope[k] = running;
    }

    let gt = T::from_usize_lossy(total_gt);
    let ap = match interp {
        ApInterpolation::AllPoint => {
            let sum = points
                .iter()
                .zip(&envelope)
                .filter(|((_, label, _), _)| *label == MatchLabel::Tp)
                .fold(T::zero(), |acc, (_, &e)| acc + e);
            sum / gt
        }
        ApInterpolation::ElevenPoint => {
            let sum = (0..=10usize).fold(T::zero(), |acc, step| {
                // first rank reaching recall step/10 carries the envelope max
                let reached = points.iter().position(|&(tp, _, _)| tp * 10 >= step * total_gt);
                acc + reached.map_or(T::zero(), |k| envelope[k])
            });
            sum / T::lit(11.0)
        }
    };
    Ok(ap)
}

/// Which frames an evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalCondition {
    Day,
    Night,
    All,
}

impl EvalCondition {
    pub fn includes(self, c: Condition) -> bool {
        match self {
            EvalCondition::All => true,
            EvalCondition::Day => c == Condition::Day,
            EvalCondition::Night => c == Condition::Night,
        }
    }
}

impl fmt::Display for EvalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalCondition::Day => "day",
            EvalCondition::Night => "night",
            EvalCondition::All => "all",
        })
    }
}

impl FromStr for EvalCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(Self::Day),
            "night" => Ok(Self::Night),
            "all" => Ok(Self::All),
            other => Err(Error::Invalid(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions<T> {
    pub iou_thresh: T,
    pub interpolation: ApInterpolation,
}

impl<T: Scalar> Default for EvalOptions<T> {
    fn default() -> Self {
        Self {
            iou_thresh: T::lit(0.5),
            interpolation: ApInterpolation::AllPoint,
        }
    }
}

/// Metrics of one condition, one row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub condition: EvalCondition,
    pub frames: usize,
    pub ground_truth: usize,
    pub detections: usize,
    pub lamr: T,
    pub map: T,
    pub curve: Vec<OperatingPoint<T>>,
}

/// Per-frame inputs for the frames of `index` under `condition`, with
/// annotations reduced to reasonable pedestrians and ignore regions.
/// Detections on frames outside that set are skipped.
pub fn build_frame_inputs<T: Scalar>(
    index: &DatasetIndex<T>,
    detections: &[Detection<T>],
    condition: EvalCondition,
    cfg: &DatasetConfig,
) -> Vec<FrameInput<T>> {
    let frames: Vec<FrameRef> = index
        .frames()
        .iter()
        .filter(|f| condition.includes(f.condition))
        .copied()
        .collect();
    let mut by_frame: BTreeMap<FrameRef, Vec<ScoredBox<T>>> = BTreeMap::new();
    for d in detections {
        by_frame.entry(d.frame).or_default().push(ScoredBox {
            bbox: d.bbox,
            score: d.score,
        });
    }
    frames
        .par_iter()
        .map(|f| {
            let (kept, ignored) = index.reasonable(f, cfg);
            FrameInput {
                dets: by_frame.get(f).cloned().unwrap_or_default(),
                kept: kept.iter().map(|a| a.bbox()).collect(),
                ignored: ignored.iter().map(|a| a.bbox()).collect(),
            }
        })
        .collect()
}

/// Curve, LAMR and AP for the frames of `index` under `condition`.
pub fn evaluate<T: Scalar>(
    index: &DatasetIndex<T>,
    detections: &[Detection<T>],
    condition: EvalCondition,
    cfg: &DatasetConfig,
    opts: &EvalOptions<T>,
) -> Result<EvalReport<T>> {
    let inputs = build_frame_inputs(index, detections, condition, cfg);
    let curve = fppi_missrate_curve(&inputs, opts.iou_thresh)?;
    let map = average_precision(&inputs, opts.iou_thresh, opts.interpolation)?;
    Ok(EvalReport {
        condition,
        frames: inputs.len(),
        ground_truth: inputs.iter().map(|f| f.kept.len()).sum(),
        detections: inputs.iter().map(|f| f.dets.len()).sum(),
        lamr: lamr(&curve),
        map,
        curve,
    })
}

/// Parses `frame_id x y w h score` lines. Blank lines and `#` comments are
/// skipped.
pub fn parse_detections<T: Scalar>(text: &str, cfg: &DatasetConfig, context: &str) -> Result<Vec<Detection<T>>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            context: context.into(),
            line,
            message,
        };
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", toks.len())));
        }
        let frame = cfg.frame_from_id(toks[0]).map_err(|e| err(e.to_string()))?;
        let mut nums = [T::zero(); 5];
        for (slot, tok) in nums.iter_mut().zip(&toks[1..]) {
            *slot = tok
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("field {tok:?} is not a finite number")))?;
        }
        let [x, y, w, h, score] = nums;
        if !(w > T::zero() && h > T::zero()) {
            return Err(err(format!("box size {w}x{h} is not positive")));
        }
        out.push(Detection {
            frame,
            bbox: BBox::new(x, y, w, h),
            score,
        });
    }
    Ok(out)
}
