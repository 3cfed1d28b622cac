//! Saliency-map scoring: F-measure over binarized maps and mean absolute error.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::imagery::GrayImage;
use crate::saliency::SaliencyMap;
use crate::{Error, Result, Scalar};

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(Error::Dimension(format!(
                "mask {width}x{height} with {} entries",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixels at or above `threshold`.
    pub fn threshold<T: Scalar>(map: &SaliencyMap<T>, threshold: T) -> Self {
        let (width, height) = map.dims();
        Self {
            width,
            height,
            data: map.data().iter().map(|&v| v >= threshold).collect(),
        }
    }

    /// Ground-truth mask from an 8-bit image, foreground at `v / 255 >= 0.5`.
    pub fn from_gray(img: &GrayImage) -> Self {
        let (width, height) = img.dims();
        Self {
            width,
            height,
            data: img.data().iter().map(|&v| f64::from(v) / 255.0 >= 0.5).collect(),
        }
    }

    /// The mask as a `{0, 1}` saliency map.
    pub fn to_saliency<T: Scalar>(&self) -> SaliencyMap<T> {
        let values = self
            .data
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        let map = crate::imagery::FloatMap::from_raw(self.width, self.height, values);
        SaliencyMap::clamped(map)
    }
}

/// How predictions are binarized before the F-measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Thresholding {
    /// One threshold per map at twice its mean, capped at 1.
    #[default]
    Adaptive2xMean,
    /// Best F over the 255 thresholds `k / 255`, `k = 1..=255`.
    MaxOver255,
}

impl FromStr for Thresholding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" | "adaptive_2x_mean" => Ok(Self::Adaptive2xMean),
            "max" | "max_over_255" => Ok(Self::MaxOver255),
            other => Err(Error::Invalid(format!("unknown thresholding {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyEvalConfig<T> {
    pub beta_squared: T,
    pub thresholding: Thresholding,
}

impl<T: Scalar> Default for SaliencyEvalConfig<T> {
    fn default() -> Self {
        Self {
            beta_squared: T::lit(0.3),
            thresholding: Thresholding::Adaptive2xMean,
        }
    }
}

impl<T: Scalar> SaliencyEvalConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.beta_squared <= T::zero() || !self.beta_squared.is_finite() {
            return Err(Error::Invalid(format!(
                "beta^2 = {} must be positive",
                self.beta_squared
            )));
        }
        Ok(())
    }
}

/// Binarizes at `min(2 * mean, 1)`. An all-zero map gives an empty mask.
pub fn adaptive_binarize<T: Scalar>(s: &SaliencyMap<T>) -> BinaryMask {
    let t = (T::lit(2.0) * s.map().mean()).min(T::one());
    if t <= T::zero() {
        let (w, h) = s.dims();
        return BinaryMask {
            width: w,
            height: h,
            data: vec![false; w * h],
        };
    }
    BinaryMask::threshold(s, t)
}

fn check_same<A: PartialEq + Copy + Into<(usize, usize)>>(a: A, b: A) -> Result<()> {
    let ((aw, ah), (bw, bh)) = (a.into(), b.into());
    if (aw, ah) != (bw, bh) {
        return Err(Error::DimensionMismatch(aw, ah, bw, bh));
    }
    Ok(())
}

/// Weighted harmonic mean `(1 + b2) P R / (b2 P + R)` of precision and
/// recall, zero when there is no true positive.
pub fn f_beta<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask, beta_squared: T) -> Result<T> {
    check_same(pred.dims(), gt.dims())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f_from_counts(tp, fp, fn_, beta_squared))
}

fn f_from_counts<T: Scalar>(tp: usize, fp: usize, fn_: usize, beta_squared: T) -> T {
    if tp == 0 {
        return T::zero();
    }
    // same quantity with P and R expanded into counts
    let weighted_tp = (T::one() + beta_squared) * T::from_usize_lossy(tp);
    weighted_tp / (weighted_tp + beta_squared * T::from_usize_lossy(fn_) + T::from_usize_lossy(fp))
}

/// Mean absolute per-pixel difference.
pub fn mae<T: Scalar>(s: &SaliencyMap<T>, g: &SaliencyMap<T>) -> Result<T> {
    check_same(s.dims(), g.dims())?;
    let sum = s
        .data()
        .iter()
        .zip(g.data())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs());
    Ok(sum / T::from_usize_lossy(s.data().len()))
}

/// F-measure of one prediction under the configured thresholding.
pub fn image_f_beta<T: Scalar>(pred: &SaliencyMap<T>, gt: &BinaryMask, cfg: &SaliencyEvalConfig<T>) -> Result<T> {
    match cfg.thresholding {
        Thresholding::Adaptive2xMean => f_beta(&adaptive_binarize(pred), gt, cfg.beta_squared),
        Thresholding::MaxOver255 => {
            check_same(pred.dims(), gt.dims())?;
            let mut best = T::zero();
            for k in 1..=255u32 {
                let t = T::from(k).unwrap() / T::lit(255.0);
                best = best.max(f_beta(&BinaryMask::threshold(pred, t), gt, cfg.beta_squared)?);
            }
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyScores<T> {
    pub f_beta: T,
    pub mae: T,
    pub images: usize,
}

/// Per-image F-measure and MAE averaged over all keys.
///
/// Ground truth is binarized at 0.5 for the F-measure; MAE compares the
/// prediction against the ground-truth map as given.
pub fn evaluate_saliency<T: Scalar>(
    preds: &BTreeMap<String, SaliencyMap<T>>,
    gts: &BTreeMap<String, SaliencyMap<T>>,
    cfg: &SaliencyEvalConfig<T>,
) -> Result<SaliencyScores<T>> {
    cfg.validate()?;
    let missing_predictions: Vec<String> = gts.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    let missing_ground_truth: Vec<String> = preds.keys().filter(|k| !gts.contains_key(*k)).cloned().collect();
    if !missing_predictions.is_empty() || !missing_ground_truth.is_empty() {
        return Err(Error::KeyMismatch {
            missing_predictions,
            missing_ground_truth,
        });
    }
    if preds.is_empty() {
        return Err(Error::Invalid("no saliency maps to evaluate".into()));
    }

    let (mut f_sum, mut mae_sum) = (T::zero(), T::zero());
    for (key, pred) in preds {
        let gt = &gts[key];
        let gt_mask = BinaryMask::threshold(gt, T::lit(0.5));
        f_sum = f_sum + image_f_beta(pred, &gt_mask, cfg)?;
        mae_sum = mae_sum + mae(pred, gt)?;
    }
    let n = T::from_usize_lossy(preds.len());
    Ok(SaliencyScores {
        f_beta: f_sum / n,
        mae: mae_sum / n,
        images: preds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::FloatMap;

    fn smap(w: usize, h: usize, v: &[f64]) -> SaliencyMap<f64> {
        SaliencyMap::new(FloatMap::new(w, h, v.to_vec()).unwrap()).unwrap()
    }

    fn mask(v: &[u8]) -> BinaryMask {
        BinaryMask::new(v.len(), 1, v.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn adaptive_examples() {
        assert_eq!(
            adaptive_binarize(&smap(4, 1, &[0.0, 0.0, 1.0, 1.0])),
            mask(&[0, 0, 1, 1])
        );
        assert_eq!(adaptive_binarize(&smap(2, 2, &[0.0; 4])).count(), 0);
        assert_eq!(
            adaptive_binarize(&smap(4, 1, &[0.1, 0.1, 0.1, 0.9])),
            mask(&[0, 0, 0, 1])
        );
    }

    #[test]
    fn f_beta_examples() {
        let gt = mask(&[1, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(f_beta(&gt, &gt, 0.3f64).unwrap(), 1.0);
        assert_eq!(f_beta(&mask(&[0; 8]), &gt, 0.3).unwrap(), 0.0);
        let half = mask(&[1, 1, 0, 0, 1, 1, 0, 0]);
        assert!((f_beta(&half, &gt, 0.3f64).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            f_beta(&mask(&[1]), &gt, 0.3),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn mae_examples() {
        let s = smap(2, 2, &[0.0, 0.5, 0.5, 1.0]);
        let g = smap(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(mae(&s, &g).unwrap(), 0.25);
        assert_eq!(mae(&g, &s).unwrap(), 0.25);
        assert_eq!(mae(&s, &s).unwrap(), 0.0);
        assert_eq!(mae(&smap(2, 1, &[1.0, 1.0]), &smap(2, 1, &[0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn max_over_thresholds_beats_adaptive() {
        let pred = smap(4, 1, &[0.2, 0.3, 0.25, 0.9]);
        let gt = mask(&[1, 1, 1, 0]);
        let cfg = SaliencyEvalConfig::default();
        let adaptive = image_f_beta(&pred, &gt, &cfg).unwrap();
        let best = image_f_beta(
            &pred,
            &gt,
            &SaliencyEvalConfig {
                thresholding: Thresholding::MaxOver255,
                ..cfg
            },
        )
        .unwrap();
        assert!(best >= adaptive);
        assert!((best - 0.975 / 1.225).abs() < 1e-12);
    }

    #[test]
    fn evaluate_requires_same_keys() {
        let m = smap(1, 1, &[1.0]);
        let preds = BTreeMap::from([("a".to_string(), m.clone())]);
        let gts = BTreeMap::from([("b".to_string(), m.clone())]);
        let err = evaluate_saliency(&preds, &gts, &SaliencyEvalConfig::default()).unwrap_err();
        match err {
            Error::KeyMismatch {
                missing_predictions,
                missing_ground_truth,
            } => {
                assert_eq!(missing_predictions, vec!["b"]);
                assert_eq!(missing_ground_truth, vec!["a"]);
            }
            other => panic!("unexpected {other}"),
        }
        let perfect = evaluate_saliency(&preds, &preds, &SaliencyEvalConfig::default()).unwrap();
        assert_eq!((perfect.f_beta, perfect.mae), (1.0, 0.0));
    }

    #[test]
    fn gt_binarized_at_half() {
        let img = GrayImage::new(4, 1, vec![0, 127, 128, 255]).unwrap();
        assert_eq!(BinaryMask::from_gray(&img), mask(&[0, 0, 1, 1]));
    }
}
