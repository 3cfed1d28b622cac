//! Channel-replacement fusion of a thermal frame with its saliency map.
//!
//! KAIST thermal frames are one intensity plane replicated three times. One
//! of those duplicate planes is swapped for the 8-bit saliency map, so the
//! result is an ordinary 3-channel image any detector can train on.

use crate::imagery::{GrayImage, RgbImage};
use crate::saliency::SaliencyMap;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionConfig {
    replaced_channel: usize,
}

impl FusionConfig {
    pub fn new(replaced_channel: usize) -> Result<Self> {
        if replaced_channel > 2 {
            return Err(Error::Invalid(format!(
                "channel index {replaced_channel} is not one of 0, 1, 2"
            )));
        }
        Ok(Self { replaced_channel })
    }

    pub fn replaced_channel(&self) -> usize {
        self.replaced_channel
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { replaced_channel: 2 }
    }
}

pub fn replicate_to_rgb(thermal: &GrayImage) -> RgbImage {
    RgbImage::from_planes([thermal.clone(), thermal.clone(), thermal.clone()])
        .expect("identical planes share dimensions")
}

/// Replaces plane `cfg.replaced_channel` with `round(s * 255)`; the other
/// two planes are copies of the thermal frame.
pub fn fuse_channel_replace<T: Scalar>(
    thermal: &GrayImage,
    saliency: &SaliencyMap<T>,
    cfg: FusionConfig,
) -> Result<RgbImage> {
    let (tw, th) = thermal.dims();
    let (sw, sh) = saliency.dims();
    if (tw, th) != (sw, sh) {
        return Err(Error::DimensionMismatch(tw, th, sw, sh));
    }
    let replaced = GrayImage::new(tw, th, saliency.quantized().collect())?;
    let mut planes = [thermal.clone(), thermal.clone(), thermal.clone()];
    planes[cfg.replaced_channel] = replaced;
    RgbImage::from_planes(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::FloatMap;

    #[test]
    fn single_pixel_substitution() {
        let t = GrayImage::new(1, 1, vec![100]).unwrap();
        let s = SaliencyMap::new(FloatMap::new(1, 1, vec![200.0 / 255.0]).unwrap()).unwrap();
        let out = fuse_channel_replace(&t, &s, FusionConfig::default()).unwrap();
        assert_eq!(out.plane(0), &[100]);
        assert_eq!(out.plane(1), &[100]);
        assert_eq!(out.plane(2), &[200]);

        let out = fuse_channel_replace(&t, &s, FusionConfig::new(0).unwrap()).unwrap();
        assert_eq!(out.plane(0), &[200]);
        assert_eq!(out.plane(2), &[100]);
    }

    #[test]
    fn shape_mismatch() {
        let t = GrayImage::filled(64, 64, 1).unwrap();
        let s = SaliencyMap::from_gray(&GrayImage::filled(32, 32, 1).unwrap());
        assert!(matches!(
            fuse_channel_replace::<f64>(&t, &s, FusionConfig::default()),
            Err(Error::DimensionMismatch(64, 64, 32, 32))
        ));
    }

    #[test]
    fn channel_range() {
        assert!(FusionConfig::new(3).is_err());
        assert_eq!(FusionConfig::default().replaced_channel(), 2);
    }

    #[test]
    fn replicate_shape() {
        let t = GrayImage::from_fn(640, 512, |x, y| ((x ^ y) & 0xff) as u8).unwrap();
        let rgb = replicate_to_rgb(&t);
        assert_eq!(rgb.dims(), (640, 512));
        for c in 0..3 {
            assert_eq!(rgb.plane(c), t.data());
        }
    }
}
