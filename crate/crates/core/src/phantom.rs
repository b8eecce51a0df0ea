//! Synthetic magnitude-MR-like phantom: a bright disk of Gaussian tissue on
//! a Rayleigh-distributed background, with the exact disk as ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{ImagingError, Photometric, PixelLayout, RealImage, StoredImage};
use crate::mask::BinaryMask;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid phantom spec: {0}")]
pub struct PhantomError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Pixel-coordinate centre; `None` centres the disk in the frame.
    pub center: Option<(f64, f64)>,
    pub radius: f64,
    pub tissue_mean: f64,
    pub tissue_sigma: f64,
    /// Total left-to-right intensity change across the disk diameter.
    pub gradient: Option<f64>,
    pub background_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            center: None,
            radius: 80.0,
            tissue_mean: 800.0,
            tissue_sigma: 50.0,
            gradient: None,
            background_sigma: 30.0,
            seed: 1,
        }
    }
}

impl PhantomSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn center(&self) -> (f64, f64) {
        self.center.unwrap_or((
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        ))
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (cx, cy) = self.center();
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |s: &str| Err(PhantomError(s.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("dimensions must be nonzero");
        }
        let (cx, cy) = self.center();
        let r = self.radius;
        if !(r.is_finite() && r >= 0.0 && cx.is_finite() && cy.is_finite()) {
            return bad("radius and centre must be finite, radius >= 0");
        }
        if cx - r < 0.0
            || cy - r < 0.0
            || cx + r > self.width as f64 - 1.0
            || cy + r > self.height as f64 - 1.0
        {
            return bad("disk must lie inside the frame");
        }
        // zero sigma is accepted as the degenerate limit of each distribution
        for (name, s) in [
            ("tissue_sigma", self.tissue_sigma),
            ("background_sigma", self.background_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(PhantomError(format!("{name} must be finite and >= 0")));
            }
        }
        if !self.tissue_mean.is_finite() || !self.gradient.unwrap_or(0.0).is_finite() {
            return bad("tissue mean and gradient must be finite");
        }
        Ok(())
    }
}

/// Draws the phantom row-major: one normal sample (two uniforms) per disk
/// pixel, one Rayleigh sample (one uniform) per background pixel.
pub fn generate<T: Scalar>(spec: &PhantomSpec) -> Result<(RealImage<T>, BinaryMask), PhantomError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (cx, _) = spec.center();
    let truth = BinaryMask::from_fn(spec.width, spec.height, |x, y| spec.contains(x, y));
    let mut values = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let v = if truth.get(x, y) {
                let shade = match spec.gradient {
                    Some(g) if spec.radius > 0.0 => g * (x as f64 - cx) / (2.0 * spec.radius),
                    _ => 0.0,
                };
                let sample = spec.tissue_mean + spec.tissue_sigma * rng.next_standard_normal();
                sample.max(0.0) + shade
            } else {
                rng.next_rayleigh(spec.background_sigma)
            };
            values.push(T::of(v));
        }
    }
    let img = RealImage::new(spec.width, spec.height, values)
        .map_err(|e: ImagingError| PhantomError(e.to_string()))?;
    Ok((img, truth))
}

/// Rounds to the nearest integer and clamps into 16-bit unsigned samples.
pub fn quantize_u16<T: Scalar>(img: &RealImage<T>) -> StoredImage {
    let values = img
        .values()
        .iter()
        .map(|v| v.to_f64_lossy().round().clamp(0.0, 65535.0) as u16)
        .collect();
    StoredImage::new(
        img.width(),
        img.height(),
        PixelLayout::unsigned(16),
        Photometric::Monochrome2,
        values,
    )
    .expect("valid 16-bit layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::nearest_rank_index;

    #[test]
    fn same_seed_same_image() {
        let a = generate::<f64>(&PhantomSpec::with_seed(7)).unwrap();
        let b = generate::<f64>(&PhantomSpec::with_seed(7)).unwrap();
        assert_eq!(a, b);
        let c = generate::<f64>(&PhantomSpec::with_seed(8)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn zero_background_sigma() {
        let spec = PhantomSpec {
            background_sigma: 0.0,
            ..PhantomSpec::default()
        };
        let (img, truth) = generate::<f64>(&spec).unwrap();
        for (v, &fg) in img.values().iter().zip(truth.bits()) {
            if !fg {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn tissue_mean_seed_one() {
        let (img, truth) = generate::<f64>(&PhantomSpec::with_seed(1)).unwrap();
        let tissue = img.select(Some(&truth)).unwrap();
        assert!(tissue.len() > 19_000);
        let mean = tissue.iter().sum::<f64>() / tissue.len() as f64;
        assert!((mean - 800.0).abs() <= 3.0, "mean {mean}");
    }

    #[test]
    fn truth_is_analytic_disk() {
        let spec = PhantomSpec {
            width: 40,
            height: 30,
            center: Some((20.0, 14.0)),
            radius: 9.5,
            ..PhantomSpec::default()
        };
        let (_, truth) = generate::<f32>(&spec).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let d2 = (x as f64 - 20.0).powi(2) + (y as f64 - 14.0).powi(2);
                assert_eq!(truth.get(x, y), d2 <= 90.25);
            }
        }
    }

    #[test]
    fn classes_are_separated() {
        let (img, truth) = generate::<f64>(&PhantomSpec::with_seed(3)).unwrap();
        let mut fg = img.select(Some(&truth)).unwrap();
        let mut bg = img.select(Some(&truth.complement())).unwrap();
        fg.sort_by(f64::total_cmp);
        bg.sort_by(f64::total_cmp);
        assert!(fg[nearest_rank_index(1.0, fg.len())] > bg[nearest_rank_index(99.0, bg.len())]);
    }

    #[test]
    fn gradient_shades_left_to_right() {
        let spec = PhantomSpec {
            tissue_sigma: 0.0,
            gradient: Some(160.0),
            ..PhantomSpec::default()
        };
        let (img, _) = generate::<f64>(&spec).unwrap();
        let (cx, cy) = spec.center();
        let row = cy.round() as usize;
        assert!(img.get(cx as usize - 60, row) < img.get(cx as usize + 60, row));
    }

    #[test]
    fn rejects_disk_outside_frame() {
        let spec = PhantomSpec {
            radius: 200.0,
            ..PhantomSpec::default()
        };
        assert!(generate::<f64>(&spec).is_err());
    }
}
