//! Thermal pedestrian saliency toolkit.
//!
//! Static saliency generation (spectral residual and multi-scale
//! center-surround), thermal/saliency channel-replacement fusion, the KAIST
//! multispectral dataset protocol (bbGt parsing, frame sampling, reasonable
//! filtering, annotation-subset selection) and the evaluation metrics used to
//! score pedestrian detectors (FPPI/miss-rate curves, LAMR, AP) and saliency
//! models (F-measure, MAE).
//!
//! The numeric core is generic over the floating point type through
//! [`Scalar`]; `f64` aliases are exported at the crate root for the common case.

pub mod dataset;
pub mod detmetrics;
mod error;
pub mod fusion;
pub mod imagery;
pub mod saliency;
pub mod salmetrics;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use dataset::{Condition, DatasetConfig, DatasetIndex, FrameRef, Split, KAIST_HEIGHT, KAIST_WIDTH};
pub use detmetrics::{ApInterpolation, FrameMatch, MatchLabel};
pub use fusion::FusionConfig;
pub use imagery::{GrayImage, Image, RgbImage};
pub use saliency::{FineGrainedParams, SaliencyMethod};
pub use salmetrics::{BinaryMask, Thresholding};

/// Real-valued raster in double precision.
pub type FloatMap = imagery::FloatMap<f64>;
/// Real-valued raster in single precision.
pub type FloatMapF32 = imagery::FloatMap<f32>;
/// Saliency map in double precision.
pub type SaliencyMap = saliency::SaliencyMap<f64>;
/// Saliency map in single precision.
pub type SaliencyMapF32 = saliency::SaliencyMap<f32>;
pub type ComplexMap = saliency::ComplexMap<f64>;
pub type SpectralResidualParams = saliency::SpectralResidualParams<f64>;
pub type Annotation = dataset::Annotation<f64>;
pub type BBox = detmetrics::BBox<f64>;
pub type Detection = detmetrics::Detection<f64>;
pub type OperatingPoint = detmetrics::OperatingPoint<f64>;
pub type EvalReport = detmetrics::EvalReport<f64>;
pub type SaliencyEvalConfig = salmetrics::SaliencyEvalConfig<f64>;
