//! Foreground masks: the classical threshold + morphology segmenter,
//! external mask ingestion, and DICE evaluation.

mod dice;
pub mod morphology;
mod otsu;
mod regions;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dice::{dice, DiceScore};
pub use morphology::{close, dilate, erode, open, StructuringElement};
pub use otsu::{otsu_cut_value, otsu_threshold};
pub use regions::{components_above, fill_holes, label_components, largest_component};

use crate::imaging::{histogram, ImagingError, RealImage};
use crate::mask::BinaryMask;
use crate::pgm::PgmImage;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuppressionError {
    #[error("image has fewer than two distinct intensity bins")]
    ConstantImage,
    #[error("no foreground pixels remain")]
    EmptyMask,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid suppression parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Imaging(ImagingError),
}

impl From<ImagingError> for SuppressionError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::DimensionMismatch { expected, actual } => {
                SuppressionError::DimensionMismatch { expected, actual }
            }
            other => SuppressionError::Imaging(other),
        }
    }
}

impl SuppressionError {
    pub fn name(&self) -> &'static str {
        match self {
            SuppressionError::ConstantImage => "ConstantImage",
            SuppressionError::EmptyMask => "EmptyMask",
            SuppressionError::DimensionMismatch { .. } => "DimensionMismatch",
            SuppressionError::InvalidParams(_) => "InvalidParams",
            SuppressionError::Imaging(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Otsu over a histogram with this many bins.
    Otsu { bins: usize },
    /// Foreground is strictly above the value.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepRule {
    LargestComponent,
    /// Components with at least this fraction of the image area.
    MinAreaFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionParams {
    pub threshold: ThresholdMode,
    pub close_element: StructuringElement,
    pub fill_holes: bool,
    pub keep: KeepRule,
    pub dilate_margin: Option<StructuringElement>,
}

impl Default for SuppressionParams {
    fn default() -> Self {
        Self {
            threshold: ThresholdMode::Otsu { bins: 4096 },
            close_element: StructuringElement::Disk(2),
            fill_holes: true,
            keep: KeepRule::LargestComponent,
            dilate_margin: None,
        }
    }
}

impl SuppressionParams {
    /// Defaults with the Otsu histogram sized for the source bit depth.
    pub fn for_bits_allocated(bits_allocated: u8) -> Self {
        Self {
            threshold: ThresholdMode::Otsu {
                bins: crate::imaging::default_bin_count(bits_allocated),
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SuppressionError> {
        let bad = |s: &str| Err(SuppressionError::InvalidParams(s.to_string()));
        match self.threshold {
            ThresholdMode::Otsu { bins } if bins < 2 => return bad("otsu needs at least 2 bins"),
            ThresholdMode::Fixed(v) if v.is_nan() => return bad("fixed threshold is NaN"),
            _ => {}
        }
        if let KeepRule::MinAreaFraction(f) = self.keep {
            if !(0.0..=1.0).contains(&f) {
                return bad("area fraction must lie in [0, 1]");
            }
        }
        for se in std::iter::once(&self.close_element).chain(self.dilate_margin.as_ref()) {
            if let StructuringElement::Square(side) = se {
                StructuringElement::square(*side)?;
            }
        }
        Ok(())
    }
}

/// Pixels strictly above the threshold chosen by `mode`.
pub fn threshold_mask<T: Scalar>(
    img: &RealImage<T>,
    mode: &ThresholdMode,
) -> Result<BinaryMask, SuppressionError> {
    let above = |cut: T| {
        BinaryMask::new(
            img.width(),
            img.height(),
            img.values().iter().map(|&v| v > cut).collect(),
        )
        .expect("image dims")
    };
    match *mode {
        ThresholdMode::Otsu { bins } => {
            let h = histogram(img, None, bins)?;
            let t = otsu_threshold(&h)?;
            Ok(above(otsu_cut_value(&h, t)))
        }
        ThresholdMode::Fixed(v) => {
            // compare in f64 so that +/- infinity keep their meaning for any T
            Ok(BinaryMask::new(
                img.width(),
                img.height(),
                img.values().iter().map(|&p| p.to_f64_lossy() > v).collect(),
            )
            .expect("image dims"))
        }
    }
}

/// threshold → close → fill holes → keep rule → optional margin dilation.
pub fn suppress_background<T: Scalar>(
    img: &RealImage<T>,
    params: &SuppressionParams,
) -> Result<BinaryMask, SuppressionError> {
    params.validate()?;
    let raw = threshold_mask(img, &params.threshold)?;
    if !raw.any() {
        return Err(SuppressionError::EmptyMask);
    }
    let mut m = close(&raw, &params.close_element);
    if params.fill_holes {
        m = fill_holes(&m);
    }
    m = match params.keep {
        KeepRule::LargestComponent => largest_component(&m)?,
        KeepRule::MinAreaFraction(f) => components_above(&m, f)?,
    };
    if let Some(se) = &params.dilate_margin {
        m = dilate(&m, se);
    }
    Ok(m)
}

/// Mask from a PGM whose samples above `maxval / 2` are foreground.
pub fn load_external_mask(
    dims: (usize, usize),
    pgm: &PgmImage,
) -> Result<BinaryMask, SuppressionError> {
    if (pgm.width, pgm.height) != dims {
        return Err(SuppressionError::DimensionMismatch {
            expected: dims,
            actual: (pgm.width, pgm.height),
        });
    }
    Ok(pgm.to_mask())
}

/// Replaces background pixels with `background_value` (image minimum when `None`).
pub fn apply_mask<T: Scalar>(
    img: &RealImage<T>,
    mask: &BinaryMask,
    background_value: Option<T>,
) -> Result<RealImage<T>, SuppressionError> {
    mask.ensure_dims(img.width(), img.height())?;
    let fill = background_value.unwrap_or_else(|| img.value_min());
    let values = img
        .values()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &keep)| if keep { v } else { fill })
        .collect();
    Ok(RealImage::new(img.width(), img.height(), values)?)
}
