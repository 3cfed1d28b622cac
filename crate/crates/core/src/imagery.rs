//! Raster buffers, PNG/JPEG I/O and Lanczos resampling.
//!
//! Files are 8-bit; everything in between is real-valued. Conversion between
//! the two domains is `v / 255` on the way in and `round(v * 255)` clamped to
//! `[0, 255]` on the way out.

use std::path::Path;

use image::{ExtendedColorType, ImageError, ImageFormat, ImageReader};

use crate::{Error, Result, Scalar};

/// Lanczos window half-width.
pub const LANCZOS_LOBES: usize = 3;

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Intensities scaled to `[0, 1]`.
    pub fn to_float_map<T: Scalar>(&self) -> FloatMap<T> {
        let scale = T::lit(255.0);
        FloatMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| T::from(v).unwrap() / scale).collect(),
        }
    }

    /// Raw intensities in `[0, 255]`, unscaled.
    pub fn to_intensity_map<T: Scalar>(&self) -> FloatMap<T> {
        FloatMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| T::from(v).unwrap()).collect(),
        }
    }

    /// Quantizes a `[0, 1]` map: `round(v * 255)` clamped to the byte range.
    pub fn from_unit_map<T: Scalar>(map: &FloatMap<T>) -> Self {
        Self {
            width: map.width,
            height: map.height,
            data: map.data.iter().map(|&v| quantize(v)).collect(),
        }
    }

    pub fn rotate180(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self { data, ..*self }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_png(
            path.as_ref(),
            &self.data,
            self.width,
            self.height,
            ExtendedColorType::L8,
        )
    }
}

/// Three 8-bit planes sharing one size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 3],
}

impl RgbImage {
    pub fn from_planes(planes: [GrayImage; 3]) -> Result<Self> {
        let (w, h) = planes[0].dims();
        for p in &planes[1..] {
            if p.dims() != (w, h) {
                return Err(Error::DimensionMismatch(w, h, p.width, p.height));
            }
        }
        let [a, b, c] = planes;
        Ok(Self {
            width: w,
            height: h,
            planes: [a.data, b.data, c.data],
        })
    }

    pub fn from_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        check_dims(width, height * 3, rgb.len())?;
        let mut planes = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for px in rgb.chunks_exact(3) {
            for (plane, &v) in planes.iter_mut().zip(px) {
                plane.push(v);
            }
        }
        Ok(Self { width, height, planes })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Plane `index` (0, 1 or 2) as raw bytes.
    pub fn plane(&self, index: usize) -> &[u8] {
        &self.planes[index]
    }

    pub fn plane_image(&self, index: usize) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.planes[index].clone(),
        }
    }

    pub fn interleaved(&self) -> Vec<u8> {
        let n = self.width * self.height;
        let mut out = Vec::with_capacity(n * 3);
        for i in 0..n {
            out.extend(self.planes.iter().map(|p| p[i]));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_png(
            path.as_ref(),
            &self.interleaved(),
            self.width,
            self.height,
            ExtendedColorType::Rgb8,
        )
    }
}

/// A decoded image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Image {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Gray(g) => g.dims(),
            Image::Rgb(c) => c.dims(),
        }
    }

    /// Single-channel view. Thermal frames stored as three replicated planes
    /// collapse to their first plane.
    pub fn into_gray(self) -> GrayImage {
        match self {
            Image::Gray(g) => g,
            Image::Rgb(c) => {
                let [first, _, _] = c.planes;
                GrayImage {
                    width: c.width,
                    height: c.height,
                    data: first,
                }
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            Image::Gray(g) => g.save(path),
            Image::Rgb(c) => c.save(path),
        }
    }
}

/// Reads a PNG or JPEG file. Single-channel files (with or without alpha)
/// load as [`Image::Gray`], everything else as [`Image::Rgb`].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        Some(other) => return Err(Error::format(ctx, format!("unsupported format {other:?}"))),
        None => return Err(Error::format(ctx, "not a PNG or JPEG file")),
    }
    let decoded = reader.decode().map_err(|e| match e {
        // a short or garbled stream is a format problem, not an i/o one
        ImageError::IoError(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::InvalidData
            ) =>
        {
            Error::format(ctx.clone(), io.to_string())
        }
        other => image_error(path, other),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if decoded.color().has_color() {
        let rgb = decoded.into_rgb8();
        Ok(Image::Rgb(RgbImage::from_interleaved(w, h, rgb.as_raw())?))
    } else {
        let gray = decoded.into_luma8();
        Ok(Image::Gray(GrayImage::new(w, h, gray.into_raw())?))
    }
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    load_image(path).map(Image::into_gray)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    img.save(path)
}

fn write_png(path: &Path, buf: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    let (w32, h32) = (to_u32(w)?, to_u32(h)?);
    image::save_buffer_with_format(path, buf, w32, h32, color, ImageFormat::Png).map_err(|e| image_error(path, e))
}

fn image_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path.display().to_string(), other.to_string()),
    }
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Dimension(format!("{v} exceeds the encoder limit")))
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("{width}x{height} has a zero side")));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Dimension(format!(
            "buffer of {len} values does not hold {width}x{height}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn quantize<T: Scalar>(v: T) -> u8 {
    let scaled = (v * T::lit(255.0)).round();
    scaled.max(T::zero()).min(T::lit(255.0)).to_u8().unwrap_or(0)
}

/// Real-valued row-major raster. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> FloatMap<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Builds without the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Value at `(x, y)` with coordinates clamped into the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    pub fn rotate180(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self { data, ..*self }
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> T {
        let sum = self.data.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_usize_lossy(self.data.len())
    }

    pub(crate) fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Affine rescale to `[0, 1]`; a constant map becomes all zeros.
pub fn minmax_normalize<T: Scalar>(src: &FloatMap<T>) -> FloatMap<T> {
    let (lo, hi) = src.min_max();
    if hi > lo {
        let range = hi - lo;
        src.map_values(|v| (v - lo) / range)
    } else {
        src.map_values(|_| T::zero())
    }
}

/// Lanczos-3 kernel `sinc(x) * sinc(x / 3)` on `|x| < 3`.
pub fn lanczos_kernel<T: Scalar>(x: T) -> T {
    let a = T::from_usize_lossy(LANCZOS_LOBES);
    let ax = x.abs();
    if ax == T::zero() {
        T::one()
    } else if ax >= a {
        T::zero()
    } else {
        let px = T::PI() * x;
        a * px.sin() * (px / a).sin() / (px * px)
    }
}

/// Normalized taps for each output coordinate along one axis: pairs of
/// source index (already clamped) and weight.
fn axis_taps<T: Scalar>(in_len: usize, out_len: usize) -> Vec<Vec<(usize, T)>> {
    let scale = T::from_usize_lossy(in_len) / T::from_usize_lossy(out_len);
    // Widen the kernel when shrinking so every source sample contributes.
    let support_scale = scale.max(T::one());
    let reach = T::from_usize_lossy(LANCZOS_LOBES) * support_scale;
    let half = T::lit(0.5);
    let last = in_len as isize - 1;

    (0..out_len)
        .map(|o| {
            let center = (T::from_usize_lossy(o) + half) * scale - half;
            let lo = (center - reach).ceil().to_isize().unwrap_or(0);
            let hi = (center + reach).floor().to_isize().unwrap_or(last);
            let mut taps: Vec<(usize, T)> = Vec::with_capacity((hi - lo + 1).max(1) as usize);
            let mut total = T::zero();
            for i in lo..=hi {
                let w = lanczos_kernel((T::from(i).unwrap() - center) / support_scale);
                if w == T::zero() {
                    continue;
                }
                let idx = i.clamp(0, last) as usize;
                total = total + w;
                match taps.last_mut() {
                    Some((prev, acc)) if *prev == idx => *acc = *acc + w,
                    _ => taps.push((idx, w)),
                }
            }
            for (_, w) in &mut taps {
                *w = *w / total;
            }
            taps
        })
        .collect()
}

/// Separable Lanczos-3 resampling with per-output weight normalization and
/// edge-clamped source addressing.
pub fn resize_lanczos<T: Scalar>(src: &FloatMap<T>, out_width: usize, out_height: usize) -> Result<FloatMap<T>> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::Dimension(format!(
            "resize target {out_width}x{out_height} has a zero side"
        )));
    }
    let (w, h) = src.dims();
    let x_taps = axis_taps::<T>(w, out_width);
    let y_taps = axis_taps::<T>(h, out_height);

    let mut horizontal = Vec::with_capacity(out_width * h);
    for row in src.data.chunks_exact(w) {
        for taps in &x_taps {
            horizontal.push(taps.iter().fold(T::zero(), |acc, &(i, wt)| acc + row[i] * wt));
        }
    }

    let mut out = Vec::with_capacity(out_width * out_height);
    for taps in &y_taps {
        for x in 0..out_width {
            out.push(
                taps.iter()
                    .fold(T::zero(), |acc, &(j, wt)| acc + horizontal[j * out_width + x] * wt),
            );
        }
    }
    Ok(FloatMap::from_raw(out_width, out_height, out))
}
