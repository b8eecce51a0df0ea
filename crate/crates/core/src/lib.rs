//! Intelligent windowing for grayscale MR-style images.
//!
//! The pipeline suppresses background pixels with a foreground mask,
//! computes window width/level from the foreground only, and renders the
//! windowed image:
//!
//! 1. [`ingest::load_image`] parses DICOM or PGM bytes into a [`RealImage`].
//! 2. [`suppression::suppress_background`] (or an external mask) yields a [`BinaryMask`].
//! 3. [`windowing::auto_window`] derives [`WindowSettings`] from the masked pixels.
//! 4. [`windowing::apply_window`] produces an 8-bit [`windowing::DisplayImage`].
//!
//! Real-valued code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

pub mod dicom;
pub mod imaging;
pub mod ingest;
pub mod mask;
pub mod pgm;
pub mod phantom;
pub mod rng;
pub mod scalar;
pub mod suppression;
pub mod windowing;

pub use mask::BinaryMask;
pub use scalar::Scalar;

pub type RealImage = imaging::RealImage<f64>;
pub type RealImage32 = imaging::RealImage<f32>;
pub type Histogram = imaging::Histogram<f64>;
pub type Histogram32 = imaging::Histogram<f32>;
pub type RescaleTransform = imaging::RescaleTransform<f64>;
pub type WindowSettings = windowing::WindowSettings<f64>;
pub type WindowSettings32 = windowing::WindowSettings<f32>;
pub type BiasReport = windowing::BiasReport<f64>;
pub type LoadedImage = ingest::LoadedImage<f64>;
