//! Static saliency from single-channel thermal frames.
//!
//! Two generators are provided: the spectral residual of the log-amplitude
//! spectrum, and a multi-scale center-surround contrast computed with
//! summed-area tables. Both return a [`SaliencyMap`] with the source size and
//! values in `[0, 1]`.

use std::ops::{Add, Sub};
use std::str::FromStr;

use num_traits::Zero;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::imagery::{minmax_normalize, quantize, resize_lanczos, FloatMap, GrayImage};
use crate::{Error, Result, Scalar};

/// Per-pixel saliency in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<T> {
    map: FloatMap<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    /// Wraps a map whose values already lie in `[0, 1]`.
    pub fn new(map: FloatMap<T>) -> Result<Self> {
        if let Some(v) = map.data().iter().find(|&&v| v < T::zero() || v > T::one()) {
            return Err(Error::Invalid(format!("saliency value {v} outside [0, 1]")));
        }
        Ok(Self { map })
    }

    /// Clamps every value into `[0, 1]`.
    pub fn clamped(map: FloatMap<T>) -> Self {
        let map = map.map_values(|v| v.max(T::zero()).min(T::one()));
        Self { map }
    }

    /// Min-max normalizes an arbitrary map.
    pub fn normalized(map: &FloatMap<T>) -> Self {
        Self {
            map: minmax_normalize(map),
        }
    }

    /// Reads stored bytes back as `v / 255`.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            map: img.to_float_map(),
        }
    }

    /// Ingests an externally produced saliency image: min-max normalized and,
    /// when `target` is given, Lanczos-resized to that size.
    pub fn from_external(img: &GrayImage, target: Option<(usize, usize)>) -> Result<Self> {
        let normalized = minmax_normalize(&img.to_float_map::<T>());
        match target {
            Some((w, h)) if (w, h) != normalized.dims() => Ok(Self::clamped(resize_lanczos(&normalized, w, h)?)),
            _ => Ok(Self { map: normalized }),
        }
    }

    pub fn map(&self) -> &FloatMap<T> {
        &self.map
    }

    pub fn into_map(self) -> FloatMap<T> {
        self.map
    }

    pub fn dims(&self) -> (usize, usize) {
        self.map.dims()
    }

    pub fn data(&self) -> &[T] {
        self.map.data()
    }

    /// 8-bit encoding `round(s * 255)`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_unit_map(&self.map)
    }

    pub(crate) fn quantized(&self) -> impl Iterator<Item = u8> + '_ {
        self.map.data().iter().map(|&v| quantize(v))
    }
}

/// Complex raster in split real/imaginary form.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMap<T> {
    pub width: usize,
    pub height: usize,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexMap<T> {
    pub fn new(width: usize, height: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 || re.len() != n || im.len() != n {
            return Err(Error::Dimension(format!(
                "complex map {width}x{height} with {} / {} components",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { width, height, re, im })
    }

    pub fn from_real(src: &FloatMap<T>) -> Self {
        let (width, height) = src.dims();
        Self {
            width,
            height,
            re: src.data().to_vec(),
            im: vec![T::zero(); width * height],
        }
    }

    pub fn norm_sqr(&self) -> Vec<T> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| r * r + i * i).collect()
    }

    fn to_buffer(&self) -> Vec<Complex<T>> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&re, &im)| Complex::new(re, im))
            .collect()
    }

    fn from_buffer(width: usize, height: usize, buf: Vec<Complex<T>>) -> Self {
        let (re, im) = buf.into_iter().map(|c| (c.re, c.im)).unzip();
        Self { width, height, re, im }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn fft2d_in_place<T: Scalar>(buf: &mut [Complex<T>], width: usize, height: usize, dir: Direction) {
    let mut planner = FftPlanner::<T>::new();
    let (row_fft, col_fft) = match dir {
        Direction::Forward => (planner.plan_fft_forward(width), planner.plan_fft_forward(height)),
        Direction::Inverse => (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height)),
    };
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::zero(); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = buf[y * width + x];
        }
        col_fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            buf[y * width + x] = *c;
        }
    }
}

/// Unnormalized forward 2-D DFT.
pub fn dft2d<T: Scalar>(src: &FloatMap<T>) -> ComplexMap<T> {
    dft2d_complex(&ComplexMap::from_real(src))
}

/// Unnormalized forward 2-D DFT of a complex raster.
pub fn dft2d_complex<T: Scalar>(src: &ComplexMap<T>) -> ComplexMap<T> {
    let mut buf = src.to_buffer();
    fft2d_in_place(&mut buf, src.width, src.height, Direction::Forward);
    ComplexMap::from_buffer(src.width, src.height, buf)
}

/// Inverse 2-D DFT scaled by `1 / (W * H)`.
pub fn idft2d<T: Scalar>(src: &ComplexMap<T>) -> ComplexMap<T> {
    let mut buf = src.to_buffer();
    fft2d_in_place(&mut buf, src.width, src.height, Direction::Inverse);
    let scale = T::one() / T::from_usize_lossy(src.width * src.height);
    for c in &mut buf {
        *c = *c * scale;
    }
    ComplexMap::from_buffer(src.width, src.height, buf)
}

/// Summed-area table with a zero guard row and column, so box queries need
/// no bounds special-casing.
#[derive(Debug, Clone)]
pub struct SummedAreaTable<V> {
    width: usize,
    height: usize,
    table: Vec<V>,
}

impl<V> SummedAreaTable<V>
where
    V: Copy + Zero + Add<Output = V> + Sub<Output = V>,
{
    pub fn build(width: usize, height: usize, values: impl IntoIterator<Item = V>) -> Self {
        let stride = width + 1;
        let mut table = vec![V::zero(); stride * (height + 1)];
        let mut values = values.into_iter();
        for y in 0..height {
            let mut row_sum = V::zero();
            for x in 0..width {
                row_sum = row_sum + values.next().expect("table input shorter than width*height");
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        Self { width, height, table }
    }

    /// Sum over `[0..=x] x [0..=y]`.
    #[inline]
    pub fn prefix(&self, x: usize, y: usize) -> V {
        self.table[(y + 1) * (self.width + 1) + x + 1]
    }

    /// Sum over the inclusive rectangle `[x0..=x1] x [y0..=y1]`.
    #[inline]
    pub fn box_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> V {
        let s = self.width + 1;
        let t = &self.table;
        t[(y1 + 1) * s + x1 + 1] + t[y0 * s + x0] - t[y0 * s + x1 + 1] - t[(y1 + 1) * s + x0]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Inclusive summed-area table: entry `(x, y)` is the sum over `[0..=x] x [0..=y]`.
pub fn integral_image<T: Scalar>(src: &FloatMap<T>) -> FloatMap<T> {
    let (w, h) = src.dims();
    let sat = SummedAreaTable::build(w, h, src.data().iter().copied());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(sat.prefix(x, y));
        }
    }
    FloatMap::from_raw(w, h, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResidualParams<T> {
    pub working_width: usize,
    pub working_height: usize,
    /// Guard added to the amplitude before taking the logarithm.
    pub log_epsilon: T,
    /// Gaussian sigma of the post-reconstruction blur, in working-size pixels.
    pub smoothing_sigma: T,
}

impl<T: Scalar> Default for SpectralResidualParams<T> {
    fn default() -> Self {
        Self {
            working_width: 64,
            working_height: 64,
            log_epsilon: T::lit(1e-8),
            smoothing_sigma: T::lit(2.5),
        }
    }
}

impl<T: Scalar> SpectralResidualParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.working_width < 8 || self.working_height < 8 {
            return Err(Error::Invalid(format!(
                "working size {}x{} is below 8x8",
                self.working_width, self.working_height
            )));
        }
        if self.log_epsilon <= T::zero() || !self.log_epsilon.is_finite() {
            return Err(Error::Invalid(format!(
                "log epsilon {} must be positive",
                self.log_epsilon
            )));
        }
        if self.smoothing_sigma < T::zero() || !self.smoothing_sigma.is_finite() {
            return Err(Error::Invalid(format!(
                "smoothing sigma {} must be non-negative",
                self.smoothing_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineGrainedParams {
    /// Surround box radii; the box side is `2r + 1`.
    pub surround_radii: Vec<usize>,
}

impl Default for FineGrainedParams {
    fn default() -> Self {
        Self {
            surround_radii: vec![3, 7, 15, 31],
        }
    }
}

impl FineGrainedParams {
    pub fn validate(&self) -> Result<()> {
        if self.surround_radii.is_empty() {
            return Err(Error::Invalid("no surround radii".into()));
        }
        if self.surround_radii[0] < 1 || self.surround_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "surround radii {:?} must be positive and strictly increasing",
                self.surround_radii
            )));
        }
        Ok(())
    }

    pub fn max_radius(&self) -> usize {
        self.surround_radii.iter().copied().max().unwrap_or(0)
    }
}

/// Which static saliency generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaliencyMethod {
    SpectralResidual,
    FineGrained,
}

impl FromStr for SaliencyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" | "spectral-residual" => Ok(Self::SpectralResidual),
            "finegrained" | "fine-grained" => Ok(Self::FineGrained),
            other => Err(Error::Invalid(format!("unknown saliency method {other:?}"))),
        }
    }
}

/// Mean over the 3x3 neighborhood with replicated edges.
fn box3<T: Scalar>(src: &FloatMap<T>) -> FloatMap<T> {
    let (w, h) = src.dims();
    let ninth = T::one() / T::lit(9.0);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = T::zero();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    acc = acc + src.get_clamped(x + dx, y + dy);
                }
            }
            out.push(acc * ninth);
        }
    }
    FloatMap::from_raw(w, h, out)
}

/// Normalized Gaussian taps of radius `ceil(3 sigma)`.
fn gaussian_taps<T: Scalar>(sigma: T) -> Vec<T> {
    let radius = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0);
    let two_var = T::lit(2.0) * sigma * sigma;
    let raw: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = T::from_usize_lossy(i) - T::from_usize_lossy(radius);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let total = raw.iter().fold(T::zero(), |a, &b| a + b);
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur with replicated edges; `sigma == 0` is a no-op.
pub fn gaussian_blur<T: Scalar>(src: &FloatMap<T>, sigma: T) -> FloatMap<T> {
    if sigma <= T::zero() {
        return src.clone();
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let (w, h) = src.dims();
    let mut horizontal = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = taps.iter().enumerate().fold(T::zero(), |acc, (k, &t)| {
                acc + t * src.get_clamped(x + k as isize - r, y)
            });
            horizontal.push(v);
        }
    }
    let horizontal = FloatMap::from_raw(w, h, horizontal);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = taps.iter().enumerate().fold(T::zero(), |acc, (k, &t)| {
                acc + t * horizontal.get_clamped(x, y + k as isize - r)
            });
            out.push(v);
        }
    }
    FloatMap::from_raw(w, h, out)
}

/// Spectral-residual saliency.
///
/// The frame is Lanczos-resized to the working size and transformed. The
/// log amplitude minus its 3x3 local mean is recombined with the original
/// phase and transformed back; the squared magnitude of that reconstruction
/// is blurred, min-max normalized and resized back to the source size.
pub fn spectral_residual<T: Scalar>(src: &GrayImage, params: &SpectralResidualParams<T>) -> Result<SaliencyMap<T>> {
    params.validate()?;
    let (w, h) = src.dims();
    if w < 8 || h < 8 {
        return Err(Error::Dimension(format!(
            "spectral residual needs at least 8x8, got {w}x{h}"
        )));
    }

    let working = resize_lanczos(&src.to_float_map::<T>(), params.working_width, params.working_height)?;
    let spectrum = dft2d(&working);
    let (ww, wh) = working.dims();

    let log_amplitude: Vec<T> = spectrum
        .re
        .iter()
        .zip(&spectrum.im)
        .map(|(&re, &im)| (re.hypot(im) + params.log_epsilon).ln())
        .collect();
    let log_amplitude = FloatMap::from_raw(ww, wh, log_amplitude);
    let local_mean = box3(&log_amplitude);

    let mut re = Vec::with_capacity(ww * wh);
    let mut im = Vec::with_capacity(ww * wh);
    for i in 0..ww * wh {
        let residual = log_amplitude.data()[i] - local_mean.data()[i];
        let phase = spectrum.im[i].atan2(spectrum.re[i]);
        let magnitude = residual.exp();
        re.push(magnitude * phase.cos());
        im.push(magnitude * phase.sin());
    }
    let reconstruction = idft2d(&ComplexMap {
        width: ww,
        height: wh,
        re,
        im,
    });
    let energy = FloatMap::from_raw(ww, wh, reconstruction.norm_sqr());

    let smoothed = gaussian_blur(&energy, params.smoothing_sigma);
    let normalized = minmax_normalize(&smoothed);
    let restored = resize_lanczos(&normalized, w, h)?;
    Ok(SaliencyMap::clamped(restored))
}

/// Multi-scale center-surround saliency.
///
/// For every radius the surround is the mean of the `(2r + 1)^2` box around
/// the pixel (edges replicated). On- and off-center contrasts
/// `max(0, c - s)` and `max(0, s - c)` are summed over all radii and the
/// total is min-max normalized.
pub fn fine_grained<T: Scalar>(src: &GrayImage, params: &FineGrainedParams) -> Result<SaliencyMap<T>> {
    params.validate()?;
    let (w, h) = src.dims();
    let pad = params.max_radius();
    if w <= 2 * pad || h <= 2 * pad {
        return Err(Error::Dimension(format!(
            "{w}x{h} image is too small for surround radius {pad}"
        )));
    }

    // Integer table over the edge-replicated padded frame keeps every box sum
    // exact, so flat regions produce exactly zero contrast.
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let padded = (0..ph).flat_map(|py| {
        let y = py.saturating_sub(pad).min(h - 1);
        (0..pw).map(move |px| {
            let x = px.saturating_sub(pad).min(w - 1);
            u64::from(src.get(x, y))
        })
    });
    let sat = SummedAreaTable::<u64>::build(pw, ph, padded);

    let areas: Vec<T> = params
        .surround_radii
        .iter()
        .map(|&r| T::from_usize_lossy((2 * r + 1) * (2 * r + 1)))
        .collect();

    let mut contrast = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let center = T::from(src.get(x, y)).unwrap();
            let (cx, cy) = (x + pad, y + pad);
            let mut total = T::zero();
            for (&r, &area) in params.surround_radii.iter().zip(&areas) {
                let sum = sat.box_sum(cx - r, cy - r, cx + r, cy + r);
                let surround = T::from(sum).unwrap() / area;
                let on = (center - surround).max(T::zero());
                let off = (surround - center).max(T::zero());
                total = total + on + off;
            }
            contrast.push(total);
        }
    }
    Ok(SaliencyMap::normalized(&FloatMap::from_raw(w, h, contrast)))
}
