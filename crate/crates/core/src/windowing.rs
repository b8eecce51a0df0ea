//! Window width/level computation and the linear VOI display transform.
//!
//! Auto strategies look only at the selected pixels; passing a foreground
//! mask is what removes the background from the statistics. The display
//! transform follows the linear VOI function used by clinical viewers:
//! a ramp of `WW - 1` input units centred on `WL - 0.5`, clamped outside.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::imaging::{ImagingError, Photometric, RealImage};
use crate::mask::BinaryMask;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("selection contains no pixels")]
    EmptySelection,
    #[error("mask selects every pixel")]
    DegenerateMask,
    #[error("window width must be finite and >= 1, level finite (got width {width}, level {level})")]
    InvalidSettings { width: f64, level: f64 },
    #[error("invalid auto-window strategy: {0}")]
    InvalidStrategy(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl WindowError {
    pub fn name(&self) -> &'static str {
        match self {
            WindowError::EmptySelection => "EmptySelection",
            WindowError::DegenerateMask => "DegenerateMask",
            WindowError::InvalidSettings { .. } => "InvalidSettings",
            WindowError::InvalidStrategy(_) => "InvalidStrategy",
            WindowError::Imaging(e) => e.name(),
        }
    }
}

/// Window level (centre) and width in modality units. Width is at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSettings<T> {
    level: T,
    width: T,
}

impl<T: Scalar> WindowSettings<T> {
    pub fn new(level: T, width: T) -> Result<Self, WindowError> {
        if !level.is_finite() || !width.is_finite() || width < T::one() {
            return Err(WindowError::InvalidSettings {
                width: width.to_f64_lossy(),
                level: level.to_f64_lossy(),
            });
        }
        Ok(Self { level, width })
    }

    /// Like [`new`](Self::new) but raises a too-narrow width to 1.
    pub fn floored(level: T, width: T) -> Result<Self, WindowError> {
        Self::new(level, if width < T::one() { T::one() } else { width })
    }

    pub fn level(&self) -> T {
        self.level
    }

    pub fn width(&self) -> T {
        self.width
    }
}

/// How a window is derived from a pixel selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoWindowStrategy {
    MinMax,
    /// Nearest-rank percentiles, `0 <= low < high <= 100`.
    Percentile { low: f64, high: f64 },
    /// Mean ± k population standard deviations, `k > 0`.
    MeanStd { k: f64 },
}

impl AutoWindowStrategy {
    pub fn percentile(low: f64, high: f64) -> Result<Self, WindowError> {
        if !(low.is_finite() && high.is_finite() && 0.0 <= low && low < high && high <= 100.0) {
            return Err(WindowError::InvalidStrategy(format!(
                "percentile bounds must satisfy 0 <= low < high <= 100, got {low},{high}"
            )));
        }
        Ok(Self::Percentile { low, high })
    }

    pub fn mean_std(k: f64) -> Result<Self, WindowError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(WindowError::InvalidStrategy(format!("k must be > 0, got {k}")));
        }
        Ok(Self::MeanStd { k })
    }
}

impl Default for AutoWindowStrategy {
    fn default() -> Self {
        Self::Percentile {
            low: 1.0,
            high: 99.0,
        }
    }
}

impl fmt::Display for AutoWindowStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MinMax => write!(f, "minmax"),
            Self::Percentile { low, high } => write!(f, "percentile:{low},{high}"),
            Self::MeanStd { k } => write!(f, "meanstd:{k}"),
        }
    }
}

impl FromStr for AutoWindowStrategy {
    type Err = WindowError;

    /// Accepts `minmax`, `percentile:LO,HI` and `meanstd:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WindowError::InvalidStrategy(s.to_string());
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        match s.trim().split_once(':') {
            None if s.trim() == "minmax" => Ok(Self::MinMax),
            Some(("percentile", args)) => {
                let (lo, hi) = args.split_once(',').ok_or_else(bad)?;
                Self::percentile(num(lo)?, num(hi)?)
            }
            Some(("meanstd", k)) => Self::mean_std(num(k)?),
            _ => Err(bad()),
        }
    }
}

impl Serialize for AutoWindowStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AutoWindowStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Index of the nearest-rank `p`-th percentile in a sorted selection of `n`.
pub fn nearest_rank_index(p: f64, n: usize) -> usize {
    let rank = (p * n as f64 / 100.0).ceil();
    if rank <= 1.0 {
        0
    } else {
        (rank as usize - 1).min(n - 1)
    }
}

/// Window from the pixels selected by `mask` (all pixels when `None`).
///
/// Returns `EmptySelection` for an all-false mask; fallback is the caller's call.
pub fn auto_window<T: Scalar>(
    img: &RealImage<T>,
    mask: Option<&BinaryMask>,
    strategy: &AutoWindowStrategy,
) -> Result<WindowSettings<T>, WindowError> {
    let mut values = img.select(mask)?;
    if values.is_empty() {
        return Err(WindowError::EmptySelection);
    }
    let (level, width) = match *strategy {
        AutoWindowStrategy::MinMax => {
            let (lo, hi) = values
                .iter()
                .fold((values[0], values[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            ((hi + lo) / T::two(), hi - lo)
        }
        AutoWindowStrategy::Percentile { low, high } => {
            values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
            let lo = values[nearest_rank_index(low, values.len())];
            let hi = values[nearest_rank_index(high, values.len())];
            ((hi + lo) / T::two(), hi - lo)
        }
        AutoWindowStrategy::MeanStd { k } => {
            let n = T::of_usize(values.len());
            let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / n;
            let var = values
                .iter()
                .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean))
                / n;
            (mean, T::two() * T::of(k) * var.sqrt())
        }
    };
    WindowSettings::floored(level, width)
}

/// Linear VOI transform from modality values to `[out_min, out_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiLut<T> {
    center: T,
    span: T,
    out_min: T,
    out_max: T,
}

impl<T: Scalar> VoiLut<T> {
    pub fn new(settings: &WindowSettings<T>, out_min: u16, out_max: u16) -> Self {
        Self {
            center: settings.level - T::half(),
            span: settings.width - T::one(),
            out_min: T::of(f64::from(out_min)),
            out_max: T::of(f64::from(out_max)),
        }
    }

    /// The 8-bit display mapping.
    pub fn display(settings: &WindowSettings<T>) -> Self {
        Self::new(settings, 0, 255)
    }

    /// Non-decreasing in `x`.
    pub fn map(&self, x: T) -> u16 {
        let half = self.span / T::two();
        let y = if x <= self.center - half {
            self.out_min
        } else if x > self.center + half {
            self.out_max
        } else {
            let scaled = ((x - self.center) / self.span + T::half()) * (self.out_max - self.out_min)
                + self.out_min;
            (scaled + T::half())
                .floor()
                .max(self.out_min)
                .min(self.out_max)
        };
        y.to_u16().expect("output clamped to u16 range")
    }
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl DisplayImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }
}

/// Renders `img` through the window. MONOCHROME1 is inverted; when a mask
/// is given, background pixels are forced to 0 regardless of photometric.
pub fn apply_window<T: Scalar>(
    img: &RealImage<T>,
    settings: &WindowSettings<T>,
    photometric: Photometric,
    mask: Option<&BinaryMask>,
) -> Result<DisplayImage, WindowError> {
    if let Some(m) = mask {
        m.ensure_dims(img.width(), img.height())?;
    }
    let lut = VoiLut::display(settings);
    let samples = img
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if mask.is_some_and(|m| !m.bits()[i]) {
                return 0;
            }
            let y = lut.map(v) as u8;
            match photometric {
                Photometric::Monochrome2 => y,
                Photometric::Monochrome1 => 255 - y,
            }
        })
        .collect();
    Ok(DisplayImage {
        width: img.width(),
        height: img.height(),
        samples,
    })
}

/// How much the background widens the automatic window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasReport<T> {
    pub full: WindowSettings<T>,
    pub foreground: WindowSettings<T>,
    /// `full.width / foreground.width`.
    pub width_ratio: T,
    pub foreground_fraction: f64,
}

pub fn window_bias<T: Scalar>(
    img: &RealImage<T>,
    mask: &BinaryMask,
    strategy: &AutoWindowStrategy,
) -> Result<BiasReport<T>, WindowError> {
    mask.ensure_dims(img.width(), img.height())?;
    if !mask.any() {
        return Err(WindowError::EmptySelection);
    }
    if mask.all() {
        return Err(WindowError::DegenerateMask);
    }
    let full = auto_window(img, None, strategy)?;
    let foreground = auto_window(img, Some(mask), strategy)?;
    Ok(BiasReport {
        full,
        foreground,
        width_ratio: full.width / foreground.width,
        foreground_fraction: mask.foreground_fraction(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings(level: f64, width: f64) -> WindowSettings<f64> {
        WindowSettings::new(level, width).unwrap()
    }

    /// Per-pixel VOI evaluation written out independently of `VoiLut`.
    fn direct_voi(x: f64, wl: f64, ww: f64) -> u8 {
        if x <= wl - 0.5 - (ww - 1.0) / 2.0 {
            0
        } else if x > wl - 0.5 + (ww - 1.0) / 2.0 {
            255
        } else {
            (((x - (wl - 0.5)) / (ww - 1.0) + 0.5) * 255.0 + 0.5).floor() as u8
        }
    }

    #[test]
    fn min_max_on_ramp() {
        let img = RealImage::from_fn(801, 1, |x, _| 100.0 + x as f64).unwrap();
        let w = auto_window(&img, None, &AutoWindowStrategy::MinMax).unwrap();
        assert_eq!((w.width(), w.level()), (800.0, 500.0));
    }

    #[test]
    fn constant_selection_floors_width() {
        let img = RealImage::new(3, 3, vec![42.0f64; 9]).unwrap();
        for s in [
            AutoWindowStrategy::MinMax,
            AutoWindowStrategy::default(),
            AutoWindowStrategy::mean_std(2.0).unwrap(),
        ] {
            let w = auto_window(&img, None, &s).unwrap();
            assert_eq!((w.width(), w.level()), (1.0, 42.0), "{s}");
        }
    }

    #[test]
    fn percentile_on_thousand_ramp() {
        let img = RealImage::from_fn(1000, 1, |x, _| x as f64).unwrap();
        let s = AutoWindowStrategy::percentile(1.0, 99.0).unwrap();
        let w = auto_window(&img, None, &s).unwrap();
        assert_eq!((w.width(), w.level()), (980.0, 499.0));
    }

    #[test]
    fn mean_std_small() {
        let img = RealImage::new(4, 1, vec![0.0f64, 0.0, 10.0, 10.0]).unwrap();
        let w = auto_window(&img, None, &AutoWindowStrategy::mean_std(2.0).unwrap()).unwrap();
        assert_eq!((w.level(), w.width()), (5.0, 20.0));
    }

    #[test]
    fn empty_mask_is_reported() {
        let img = RealImage::new(2, 1, vec![1.0f64, 2.0]).unwrap();
        let m = BinaryMask::filled(2, 1, false);
        assert_eq!(
            auto_window(&img, Some(&m), &AutoWindowStrategy::MinMax),
            Err(WindowError::EmptySelection)
        );
    }

    #[test]
    fn strategy_strings() {
        assert_eq!("minmax".parse::<AutoWindowStrategy>().unwrap(), AutoWindowStrategy::MinMax);
        assert_eq!(
            "percentile:1,99".parse::<AutoWindowStrategy>().unwrap(),
            AutoWindowStrategy::default()
        );
        assert_eq!(
            "meanstd:2.5".parse::<AutoWindowStrategy>().unwrap(),
            AutoWindowStrategy::MeanStd { k: 2.5 }
        );
        for bad in ["", "median", "percentile:99,1", "percentile:5", "meanstd:0", "meanstd:x"] {
            assert!(bad.parse::<AutoWindowStrategy>().is_err(), "{bad}");
        }
        let s = AutoWindowStrategy::percentile(2.5, 97.5).unwrap();
        assert_eq!(s.to_string().parse::<AutoWindowStrategy>().unwrap(), s);
    }

    #[test]
    fn lut_examples() {
        assert_eq!(VoiLut::display(&settings(100.0, 50.0)).map(50.0), 0);
        assert_eq!(VoiLut::display(&settings(2048.0, 4096.0)).map(2048.0), 128);
        let thresh = VoiLut::display(&settings(100.0, 1.0));
        assert_eq!(thresh.map(99.0), 0);
        assert_eq!(thresh.map(99.5), 0);
        assert_eq!(thresh.map(100.0), 255);
    }

    #[test]
    fn lut_f32_agrees_on_worked_example() {
        let s = WindowSettings::new(2048.0f32, 4096.0).unwrap();
        assert_eq!(VoiLut::display(&s).map(2048.0), 128);
    }

    #[test]
    fn monochrome1_and_mask_forcing() {
        let img = RealImage::new(2, 1, vec![10_000.0f64, 0.0]).unwrap();
        let s = settings(100.0, 50.0);
        let m2 = apply_window(&img, &s, Photometric::Monochrome2, None).unwrap();
        let m1 = apply_window(&img, &s, Photometric::Monochrome1, None).unwrap();
        assert_eq!(m2.samples(), &[255, 0]);
        assert_eq!(m1.samples(), &[0, 255]);
        let off = BinaryMask::filled(2, 1, false);
        for p in [Photometric::Monochrome1, Photometric::Monochrome2] {
            let r = apply_window(&img, &s, p, Some(&off)).unwrap();
            assert_eq!(r.samples(), &[0, 0]);
        }
        let wrong = BinaryMask::filled(1, 1, true);
        assert!(apply_window(&img, &s, Photometric::Monochrome2, Some(&wrong)).is_err());
    }

    #[test]
    fn bias_report_cases() {
        // bright disk-ish block on a near-zero background
        let img = RealImage::from_fn(10, 10, |x, y| {
            if (3..7).contains(&x) && (3..7).contains(&y) {
                800.0 + (x + y) as f64
            } else {
                (x % 3) as f64
            }
        })
        .unwrap();
        let mask = BinaryMask::from_fn(10, 10, |x, y| (3..7).contains(&x) && (3..7).contains(&y));
        let r = window_bias(&img, &mask, &AutoWindowStrategy::MinMax).unwrap();
        assert!(r.width_ratio > 1.0);
        assert_eq!(r.foreground_fraction, 0.16);
        assert_eq!(
            window_bias(&img, &BinaryMask::filled(10, 10, true), &AutoWindowStrategy::MinMax),
            Err(WindowError::DegenerateMask)
        );
        assert_eq!(
            window_bias(&img, &BinaryMask::filled(10, 10, false), &AutoWindowStrategy::MinMax),
            Err(WindowError::EmptySelection)
        );

        // background inside the foreground range: no widening
        let inner = RealImage::from_fn(10, 10, |x, y| {
            if (3..7).contains(&x) && (3..7).contains(&y) {
                (x * 100 + y) as f64
            } else {
                400.0
            }
        })
        .unwrap();
        let r = window_bias(&inner, &mask, &AutoWindowStrategy::MinMax).unwrap();
        assert_eq!(r.width_ratio, 1.0);
    }

    fn random_settings() -> impl Strategy<Value = WindowSettings<f64>> {
        (-5000.0f64..5000.0, 1.0f64..6000.0).prop_map(|(l, w)| settings(l, w))
    }

    proptest! {
        #[test]
        fn lut_is_monotone(s in random_settings(), a in -12000.0f64..12000.0, b in -12000.0f64..12000.0) {
            let lut = VoiLut::display(&s);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(lut.map(lo) <= lut.map(hi));
            prop_assert!(lut.map(hi) <= 255);
        }

        #[test]
        fn apply_window_matches_direct_formula(
            s in random_settings(),
            values in prop::collection::vec(-8000.0f64..8000.0, 1..200),
        ) {
            let img = RealImage::new(values.len(), 1, values.clone()).unwrap();
            let m2 = apply_window(&img, &s, Photometric::Monochrome2, None).unwrap();
            let m1 = apply_window(&img, &s, Photometric::Monochrome1, None).unwrap();
            for (i, &v) in values.iter().enumerate() {
                prop_assert_eq!(m2.samples()[i], direct_voi(v, s.level(), s.width()));
                prop_assert_eq!(m1.samples()[i], 255 - m2.samples()[i]);
            }
        }

        #[test]
        fn affine_covariance(
            values in prop::collection::vec(-2000i32..2000, 1..300),
            a in 1i32..8,
            b in -3000i32..3000,
            minmax in any::<bool>(),
        ) {
            let s = if minmax { AutoWindowStrategy::MinMax } else { AutoWindowStrategy::percentile(5.0, 95.0).unwrap() };
            let img = RealImage::new(values.len(), 1, values.iter().map(|&v| f64::from(v)).collect()).unwrap();
            let moved = RealImage::new(values.len(), 1, values.iter().map(|&v| f64::from(a * v + b)).collect()).unwrap();
            let w = auto_window(&img, None, &s).unwrap();
            let w2 = auto_window(&moved, None, &s).unwrap();
            let (a, b) = (f64::from(a), f64::from(b));
            prop_assert_eq!(w2.level(), a * w.level() + b);
            // the width floor applies to the unfloored width, so compare against it
            let mut sorted = values.clone();
            sorted.sort_unstable();
            let raw = if minmax {
                f64::from(sorted[sorted.len() - 1] - sorted[0])
            } else {
                f64::from(sorted[nearest_rank_index(95.0, sorted.len())] - sorted[nearest_rank_index(5.0, sorted.len())])
            };
            prop_assert_eq!(w.width(), raw.max(1.0));
            prop_assert_eq!(w2.width(), (a * raw).max(1.0));
        }
    }
}
