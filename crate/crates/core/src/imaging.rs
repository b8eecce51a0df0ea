//! Pixel containers, modality rescale and histogram construction.
//!
//! A [`StoredImage`] is the byte-faithful record of the integer samples as
//! they were read from disk. [`rescale_to_real`] applies the linear modality
//! transform and produces a [`RealImage`], which is what every downstream
//! statistic and display transform operates on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported pixel layout: {0}")]
    InvalidLayout(String),
    #[error("stored value {value:#x} at index {index} does not fit in {bits} bits")]
    ValueOutOfRange { index: usize, value: u16, bits: u8 },
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("rescale slope must be finite and nonzero, intercept finite")]
    InvalidRescale,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("selection contains no pixels")]
    EmptySelection,
    #[error("bin count must be at least 1")]
    ZeroBins,
}

impl ImagingError {
    pub fn name(&self) -> &'static str {
        match self {
            ImagingError::InvalidDimensions { .. } => "InvalidDimensions",
            ImagingError::LengthMismatch { .. } => "LengthMismatch",
            ImagingError::InvalidLayout(_) => "InvalidLayout",
            ImagingError::ValueOutOfRange { .. } => "ValueOutOfRange",
            ImagingError::NonFiniteValue(_) => "NonFiniteValue",
            ImagingError::InvalidRescale => "InvalidRescale",
            ImagingError::DimensionMismatch { .. } => "DimensionMismatch",
            ImagingError::EmptySelection => "EmptySelection",
            ImagingError::ZeroBins => "ZeroBins",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelRepresentation {
    Unsigned,
    /// Two's complement within `bits_stored`.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Photometric {
    /// Low values render bright.
    #[serde(rename = "MONOCHROME1")]
    Monochrome1,
    /// Low values render dark.
    #[serde(rename = "MONOCHROME2")]
    Monochrome2,
}

impl Photometric {
    pub fn as_str(self) -> &'static str {
        match self {
            Photometric::Monochrome1 => "MONOCHROME1",
            Photometric::Monochrome2 => "MONOCHROME2",
        }
    }
}

/// Bit layout of the stored integer samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelLayout {
    pub bits_allocated: u8,
    pub bits_stored: u8,
    pub high_bit: u8,
    pub representation: PixelRepresentation,
}

impl PixelLayout {
    pub fn unsigned(bits: u8) -> Self {
        Self {
            bits_allocated: bits,
            bits_stored: bits,
            high_bit: bits.saturating_sub(1),
            representation: PixelRepresentation::Unsigned,
        }
    }

    pub fn signed(bits: u8) -> Self {
        Self {
            representation: PixelRepresentation::Signed,
            ..Self::unsigned(bits)
        }
    }

    fn validate(&self) -> Result<(), ImagingError> {
        let bad = |why: &str| Err(ImagingError::InvalidLayout(why.to_string()));
        if self.bits_allocated != 8 && self.bits_allocated != 16 {
            return bad("bits_allocated must be 8 or 16");
        }
        if self.bits_stored == 0 || self.bits_stored > self.bits_allocated {
            return bad("bits_stored must be in 1..=bits_allocated");
        }
        if self.high_bit >= self.bits_allocated || self.high_bit + 1 < self.bits_stored {
            return bad("high_bit must satisfy bits_stored - 1 <= high_bit < bits_allocated");
        }
        Ok(())
    }

    /// Interprets a raw stored word: bits outside `[high_bit - bits_stored + 1, high_bit]`
    /// are discarded, then the value is sign-extended for signed layouts.
    pub fn interpret(&self, word: u16) -> i32 {
        let shift = u32::from(self.high_bit + 1 - self.bits_stored);
        let mask = (1u32 << self.bits_stored) - 1;
        let v = (u32::from(word) >> shift) & mask;
        match self.representation {
            PixelRepresentation::Unsigned => v as i32,
            PixelRepresentation::Signed => {
                let sign = 1u32 << (self.bits_stored - 1);
                if v & sign != 0 {
                    v as i32 - (1i32 << self.bits_stored)
                } else {
                    v as i32
                }
            }
        }
    }

    /// Smallest and largest interpretable value.
    pub fn value_range(&self) -> (i32, i32) {
        match self.representation {
            PixelRepresentation::Unsigned => (0, (1i32 << self.bits_stored) - 1),
            PixelRepresentation::Signed => (
                -(1i32 << (self.bits_stored - 1)),
                (1i32 << (self.bits_stored - 1)) - 1,
            ),
        }
    }
}

/// Raw integer samples exactly as parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredImage {
    width: usize,
    height: usize,
    layout: PixelLayout,
    photometric: Photometric,
    values: Vec<u16>,
}

impl StoredImage {
    /// Validates dimensions, layout and that every word fits in `bits_allocated`.
    ///
    /// Words may carry bits above `high_bit` (overlay planes); they are
    /// masked off at interpretation time, not here.
    pub fn new(
        width: usize,
        height: usize,
        layout: PixelLayout,
        photometric: Photometric,
        values: Vec<u16>,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidDimensions { width, height });
        }
        layout.validate()?;
        if values.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if layout.bits_allocated == 8 {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v > 0xFF) {
                return Err(ImagingError::ValueOutOfRange {
                    index,
                    value,
                    bits: 8,
                });
            }
        }
        Ok(Self {
            width,
            height,
            layout,
            photometric,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> PixelLayout {
        self.layout
    }

    pub fn bits_allocated(&self) -> u8 {
        self.layout.bits_allocated
    }

    pub fn photometric(&self) -> Photometric {
        self.photometric
    }

    pub fn stored_values(&self) -> &[u16] {
        &self.values
    }

    /// Interpreted (masked, sign-extended) value of pixel `index`.
    pub fn value(&self, index: usize) -> i32 {
        self.layout.interpret(self.values[index])
    }
}

/// Linear modality transform `v = slope * s + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleTransform<T> {
    slope: T,
    intercept: T,
}

impl<T: Scalar> RescaleTransform<T> {
    pub fn new(slope: T, intercept: T) -> Result<Self, ImagingError> {
        if !slope.is_finite() || slope.is_zero() || !intercept.is_finite() {
            return Err(ImagingError::InvalidRescale);
        }
        Ok(Self { slope, intercept })
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    pub fn intercept(&self) -> T {
        self.intercept
    }

    pub fn apply(&self, stored: i32) -> T {
        self.slope * T::of(f64::from(stored)) + self.intercept
    }
}

impl<T: Scalar> Default for RescaleTransform<T> {
    fn default() -> Self {
        Self {
            slope: T::one(),
            intercept: T::zero(),
        }
    }
}

/// Real-valued image in modality units with cached extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    min: T,
    max: T,
}

impl<T: Scalar> RealImage<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidDimensions { width, height });
        }
        if values.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ImagingError::NonFiniteValue(i));
        }
        let (min, max) = extrema(values.iter().copied()).expect("nonempty");
        Ok(Self {
            width,
            height,
            values,
            min,
            max,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, ImagingError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn value_min(&self) -> T {
        self.min
    }

    pub fn value_max(&self) -> T {
        self.max
    }

    /// Values of the pixels selected by `mask` (all pixels when `None`), row-major.
    pub fn select(&self, mask: Option<&BinaryMask>) -> Result<Vec<T>, ImagingError> {
        match mask {
            None => Ok(self.values.clone()),
            Some(m) => {
                m.ensure_dims(self.width, self.height)?;
                Ok(self
                    .values
                    .iter()
                    .zip(m.bits())
                    .filter_map(|(&v, &keep)| keep.then_some(v))
                    .collect())
            }
        }
    }
}

fn extrema<T: Scalar>(mut it: impl Iterator<Item = T>) -> Option<(T, T)> {
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Applies the modality transform to every stored sample.
///
/// Fails only if the transform overflows the scalar type.
pub fn rescale_to_real<T: Scalar>(
    img: &StoredImage,
    t: &RescaleTransform<T>,
) -> Result<RealImage<T>, ImagingError> {
    let values = img
        .values
        .iter()
        .map(|&w| t.apply(img.layout.interpret(w)))
        .collect();
    RealImage::new(img.width, img.height, values)
}

/// 256 bins for 8-bit sources, 4096 for 16-bit sources.
pub fn default_bin_count(bits_allocated: u8) -> usize {
    if bits_allocated <= 8 {
        256
    } else {
        4096
    }
}

/// Binned intensity counts over `[range_min, range_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    range_min: T,
    range_max: T,
    counts: Vec<u64>,
    total: u64,
}

impl<T: Scalar> Histogram<T> {
    /// Builds a histogram from explicit counts. `range_min < range_max` is
    /// required unless there is a single bin.
    pub fn from_counts(range_min: T, range_max: T, counts: Vec<u64>) -> Result<Self, ImagingError> {
        if counts.is_empty() {
            return Err(ImagingError::ZeroBins);
        }
        if !range_min.is_finite()
            || !range_max.is_finite()
            || (counts.len() > 1 && range_min >= range_max)
        {
            return Err(ImagingError::InvalidLayout(
                "histogram range must be finite and increasing".into(),
            ));
        }
        let total = counts.iter().sum();
        Ok(Self {
            range_min,
            range_max,
            counts,
            total,
        })
    }

    pub fn range_min(&self) -> T {
        self.range_min
    }

    pub fn range_max(&self) -> T {
        self.range_max
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Lower edge of `bin` in data units; `bin == bin_count` gives `range_max`.
    pub fn bin_lower_edge(&self, bin: usize) -> T {
        let span = self.range_max - self.range_min;
        self.range_min + span * T::of_usize(bin) / T::of_usize(self.counts.len())
    }

    /// Bin index a value falls into, clamped to the histogram.
    pub fn bin_of(&self, value: T) -> usize {
        bin_index(value, self.range_min, self.range_max, self.counts.len())
    }
}

fn bin_index<T: Scalar>(value: T, min: T, max: T, bins: usize) -> usize {
    let frac = (value - min) / (max - min);
    let scaled = (frac * T::of_usize(bins)).floor();
    if scaled <= T::zero() {
        0
    } else {
        scaled.to_usize().unwrap_or(bins - 1).min(bins - 1)
    }
}

/// Histogram of the pixels selected by `mask` (all pixels when `None`),
/// spanning exactly their min..max.
///
/// A constant selection puts all mass in bin 0 and records the range as
/// `[v, v + 1]`.
pub fn histogram<T: Scalar>(
    img: &RealImage<T>,
    mask: Option<&BinaryMask>,
    bin_count: usize,
) -> Result<Histogram<T>, ImagingError> {
    if bin_count == 0 {
        return Err(ImagingError::ZeroBins);
    }
    let selected = img.select(mask)?;
    let (min, max) = extrema(selected.iter().copied()).ok_or(ImagingError::EmptySelection)?;
    let mut counts = vec![0u64; bin_count];
    if min == max {
        counts[0] = selected.len() as u64;
        return Ok(Histogram {
            range_min: min,
            range_max: min + T::one(),
            counts,
            total: selected.len() as u64,
        });
    }
    for &v in &selected {
        counts[bin_index(v, min, max, bin_count)] += 1;
    }
    Ok(Histogram {
        range_min: min,
        range_max: max,
        counts,
        total: selected.len() as u64,
    })
}
