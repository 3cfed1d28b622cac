//! Independent reference implementations and instance generators for tests.
//!
//! Nothing here calls into the library's numeric paths: every oracle is a
//! straight transcription of the definition it checks, written for clarity
//! rather than speed.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::Rng;

use thermsal_core::detmetrics::{BBox, FrameInput, ScoredBox};

// ---------------------------------------------------------------- numerics

/// Direct O(N^2) 2-D DFT. `sign = -1` forward, `+1` inverse (unscaled).
pub fn dft_direct(w: usize, h: usize, re: &[f64], im: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
    let mut out_re = vec![0.0; w * h];
    let mut out_im = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let (mut sr, mut si) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let angle = sign * 2.0 * PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    let (s, c) = angle.sin_cos();
                    let (a, b) = (re[y * w + x], im[y * w + x]);
                    sr += a * c - b * s;
                    si += a * s + b * c;
                }
            }
            out_re[v * w + u] = sr;
            out_im[v * w + u] = si;
        }
    }
    (out_re, out_im)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed sinc with a = 3.
pub fn lanczos3(x: f64) -> f64 {
    if x.abs() < 3.0 {
        sinc(x) * sinc(x / 3.0)
    } else {
        0.0
    }
}

fn clampi(v: i64, len: usize) -> usize {
    v.clamp(0, len as i64 - 1) as usize
}

/// Direct 2-D windowed-sinc resampling of an upscale: every output pixel is
/// the normalized double sum over the 6x6 source neighborhood around its
/// pixel-center-aligned source position, with clamped addressing.
pub fn lanczos_upscale_direct(src: &[f64], w: usize, h: usize, ow: usize, oh: usize) -> Vec<f64> {
    assert!(ow >= w && oh >= h);
    let mut out = vec![0.0; ow * oh];
    for oy in 0..oh {
        let cy = (oy as f64 + 0.5) * h as f64 / oh as f64 - 0.5;
        for ox in 0..ow {
            let cx = (ox as f64 + 0.5) * w as f64 / ow as f64 - 0.5;
            let (mut acc, mut norm) = (0.0, 0.0);
            for j in (cy.floor() as i64 - 3)..=(cy.floor() as i64 + 3) {
                for i in (cx.floor() as i64 - 3)..=(cx.floor() as i64 + 3) {
                    let k = lanczos3(i as f64 - cx) * lanczos3(j as f64 - cy);
                    acc += k * src[clampi(j, h) * w + clampi(i, w)];
                    norm += k;
                }
            }
            out[oy * ow + ox] = acc / norm;
        }
    }
    out
}

/// Mean of the `(2r+1)^2` box around `(x, y)` with clamped addressing.
pub fn box_mean_brute(src: &[f64], w: usize, h: usize, x: usize, y: usize, r: usize) -> f64 {
    let r = r as i64;
    let mut sum = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            sum += src[clampi(y as i64 + dy, h) * w + clampi(x as i64 + dx, w)];
        }
    }
    sum / ((2 * r + 1) * (2 * r + 1)) as f64
}

/// Brute-force center-surround saliency.
pub fn fine_grained_direct(img: &[u8], w: usize, h: usize, radii: &[usize]) -> Vec<f64> {
    let src: Vec<f64> = img.iter().map(|&v| f64::from(v)).collect();
    let mut total = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = src[y * w + x];
            for &r in radii {
                let s = box_mean_brute(&src, w, h, x, y, r);
                total[y * w + x] += (c - s).max(0.0) + (s - c).max(0.0);
            }
        }
    }
    minmax(&total)
}

pub fn minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Spectral residual straight from its definition, for inputs already at the
/// working size (so no resampling is involved).
pub fn spectral_residual_direct(img: &[u8], w: usize, h: usize, eps: f64, sigma: f64) -> Vec<f64> {
    let n = w * h;
    let re: Vec<f64> = img.iter().map(|&v| f64::from(v) / 255.0).collect();
    let (fr, fi) = dft_direct(w, h, &re, &vec![0.0; n], -1.0);

    let log_amp: Vec<f64> = (0..n)
        .map(|i| ((fr[i] * fr[i] + fi[i] * fi[i]).sqrt() + eps).ln())
        .collect();
    let mut residual = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    s += log_amp[clampi(y as i64 + dy, h) * w + clampi(x as i64 + dx, w)];
                }
            }
            residual[y * w + x] = log_amp[y * w + x] - s / 9.0;
        }
    }

    let mut gr = vec![0.0; n];
    let mut gi = vec![0.0; n];
    for i in 0..n {
        let phase = fi[i].atan2(fr[i]);
        gr[i] = residual[i].exp() * phase.cos();
        gi[i] = residual[i].exp() * phase.sin();
    }
    let (ir, ii) = dft_direct(w, h, &gr, &gi, 1.0);
    let energy: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (ir[i] / n as f64, ii[i] / n as f64);
            a * a + b * b
        })
        .collect();

    let smoothed = if sigma > 0.0 {
        let radius = (3.0 * sigma).ceil() as i64;
        let g: Vec<f64> = (-radius..=radius)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let gsum: f64 = g.iter().sum();
        let mut out = vec![0.0; n];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, gy) in g.iter().enumerate() {
                    for (i, gx) in g.iter().enumerate() {
                        let sy = clampi(y as i64 + j as i64 - radius, h);
                        let sx = clampi(x as i64 + i as i64 - radius, w);
                        acc += gx * gy * energy[sy * w + sx];
                    }
                }
                out[y * w + x] = acc / (gsum * gsum);
            }
        }
        out
    } else {
        energy
    };
    minmax(&smoothed).into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

pub fn rot180<T: Clone>(v: &[T]) -> Vec<T> {
    v.iter().rev().cloned().collect()
}

// ---------------------------------------------------------------- detection

/// Random matching instance: up to `max_frames` frames, up to `max_gt`
/// reasonable boxes, up to `max_ignore` ignore regions and up to `max_dets`
/// detections per frame. Scores are drawn from a small grid so ties occur.
pub fn random_instance(
    rng: &mut StdRng,
    max_frames: usize,
    max_gt: usize,
    max_ignore: usize,
    max_dets: usize,
) -> Vec<FrameInput<f64>> {
    let n_frames = rng.gen_range(1..=max_frames);
    let mut frames: Vec<FrameInput<f64>> = (0..n_frames)
        .map(|_| {
            let rbox = |rng: &mut StdRng| {
                BBox::new(
                    rng.gen_range(0..40) as f64,
                    rng.gen_range(0..40) as f64,
                    rng.gen_range(4..30) as f64,
                    rng.gen_range(4..40) as f64,
                )
            };
            let kept: Vec<BBox<f64>> = (0..rng.gen_range(0..=max_gt)).map(|_| rbox(rng)).collect();
            let ignored: Vec<BBox<f64>> = (0..rng.gen_range(0..=max_ignore)).map(|_| rbox(rng)).collect();
            let dets = (0..rng.gen_range(0..=max_dets))
                .map(|_| {
                    // half the detections jitter around a ground-truth box
                    let bbox = if !kept.is_empty() && rng.gen_bool(0.5) {
                        let g = kept[rng.gen_range(0..kept.len())];
                        BBox::new(
                            g.x + rng.gen_range(-3..=3) as f64,
                            g.y + rng.gen_range(-3..=3) as f64,
                            (g.w + rng.gen_range(-2..=2) as f64).max(1.0),
                            (g.h + rng.gen_range(-2..=2) as f64).max(1.0),
                        )
                    } else {
                        rbox(rng)
                    };
                    ScoredBox {
                        bbox,
                        score: rng.gen_range(0..20) as f64 / 20.0,
                    }
                })
                .collect();
            FrameInput { dets, kept, ignored }
        })
        .collect();
    if frames.iter().all(|f| f.kept.is_empty()) {
        frames[0].kept.push(BBox::new(5.0, 5.0, 10.0, 20.0));
    }
    frames
}

fn overlap_area(a: &BBox<f64>, b: &BBox<f64>) -> f64 {
    let w = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let h = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

fn iou_ref(a: &BBox<f64>, b: &BBox<f64>) -> f64 {
    let i = overlap_area(a, b);
    if i == 0.0 {
        0.0
    } else {
        i / (a.w * a.h + b.w * b.h - i)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RefLabel {
    Tp,
    Fp,
    Ignore,
}

/// Greedy matching of the detections with score >= `min_score`. Returns the
/// label of every considered detection keyed by its input slot.
pub fn match_ref(frame: &FrameInput<f64>, min_score: f64, thr: f64) -> Vec<(usize, RefLabel)> {
    let mut idx: Vec<usize> = (0..frame.dets.len())
        .filter(|&i| frame.dets[i].score >= min_score)
        .collect();
    // stable: equal scores stay in input order
    idx.sort_by(|&a, &b| frame.dets[b].score.partial_cmp(&frame.dets[a].score).unwrap());
    let mut used = vec![false; frame.kept.len()];
    let mut out = Vec::new();
    for i in idx {
        let d = &frame.dets[i].bbox;
        let mut best: Option<usize> = None;
        let mut best_iou = thr;
        for (g, gt) in frame.kept.iter().enumerate() {
            let o = iou_ref(d, gt);
            if !used[g] && o >= thr && (best.is_none() || o > best_iou) {
                best = Some(g);
                best_iou = o;
            }
        }
        let label = if let Some(g) = best {
            used[g] = true;
            RefLabel::Tp
        } else if frame.ignored.iter().any(|ig| overlap_area(d, ig) / (d.w * d.h) >= thr) {
            RefLabel::Ignore
        } else {
            RefLabel::Fp
        };
        out.push((i, label));
    }
    out
}

/// LAMR by brute force: matching recomputed from scratch at every distinct
/// score, then the nine-reference rule on those points.
pub fn lamr_brute(frames: &[FrameInput<f64>], thr: f64) -> f64 {
    let gt: usize = frames.iter().map(|f| f.kept.len()).sum();
    let mut scores: Vec<f64> = frames.iter().flat_map(|f| f.dets.iter().map(|d| d.score)).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scores.dedup();

    // (threshold, fppi, miss) for every distinct threshold
    let points: Vec<(f64, f64, f64)> = scores
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0, 0);
            for f in frames {
                for (_, l) in match_ref(f, t, thr) {
                    match l {
                        RefLabel::Tp => tp += 1,
                        RefLabel::Fp => fp += 1,
                        RefLabel::Ignore => {}
                    }
                }
            }
            (t, fp as f64 / frames.len() as f64, (gt - tp) as f64 / gt as f64)
        })
        .collect();

    let mut log_sum = 0.0;
    for k in 0..9 {
        let reference = 10f64.powf(-2.0 + 0.25 * k as f64);
        // among points with fppi <= reference, the lowest threshold
        let miss = points
            .iter()
            .filter(|p| p.1 <= reference)
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map_or(1.0, |p| p.2);
        log_sum += miss.max(1e-10).ln();
    }
    (log_sum / 9.0).exp()
}

/// Ranked, labeled detections: descending score, then frame, then slot.
pub fn ranked_labels(frames: &[FrameInput<f64>], thr: f64) -> Vec<(f64, usize, usize, RefLabel)> {
    let mut all = Vec::new();
    for (fi, f) in frames.iter().enumerate() {
        for (slot, l) in match_ref(f, f64::NEG_INFINITY, thr) {
            all.push((f.dets[slot].score, fi, slot, l));
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all
}

/// All-point AP by exhaustive envelope integration: the envelope at recall
/// level m/G is the best precision over every rank that reaches m true
/// positives, and each level contributes a 1/G-wide strip.
pub fn ap_envelope_oracle(frames: &[FrameInput<f64>], thr: f64) -> f64 {
    let gt: usize = frames.iter().map(|f| f.kept.len()).sum();
    let mut pr: Vec<(usize, f64)> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, _, _, l) in ranked_labels(frames, thr) {
        match l {
            RefLabel::Tp => tp += 1,
            RefLabel::Fp => fp += 1,
            RefLabel::Ignore => continue,
        }
        pr.push((tp, tp as f64 / (tp + fp) as f64));
    }
    let mut area = 0.0;
    for m in 1..=tp {
        let best = pr.iter().filter(|(t, _)| *t >= m).map(|(_, p)| *p).fold(0.0, f64::max);
        area += best;
    }
    area / gt as f64
}

// ---------------------------------------------------------------- saliency metrics

/// F1 straight from the confusion matrix.
pub fn f1_oracle(pred: &[bool], gt: &[bool]) -> f64 {
    let mut cm = [[0usize; 2]; 2];
    for (&p, &g) in pred.iter().zip(gt) {
        cm[usize::from(p)][usize::from(g)] += 1;
    }
    let (tp, fp, fn_) = (cm[1][1], cm[1][0], cm[0][1]);
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / ((2 * tp) as f64 + fn_ as f64 + fp as f64)
    }
}
