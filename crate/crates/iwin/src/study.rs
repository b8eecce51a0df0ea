//! A study: one ingested image plus its mask, cached auto windows and the
//! fallback policies shared by the CLI and the HTTP service.

use std::collections::HashMap;

use iwin_core::imaging::{histogram, ImagingError};
use iwin_core::ingest::{load_image, IngestError, SourceKind};
use iwin_core::pgm::PgmImage;
use iwin_core::suppression::{suppress_background, SuppressionParams};
use iwin_core::windowing::{apply_window, auto_window, AutoWindowStrategy, WindowError};
use iwin_core::{BinaryMask, LoadedImage, WindowSettings};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskProvenance {
    BuiltinPipeline,
    External,
}

/// Window actually used, plus any fallback that was taken to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub settings: WindowSettings,
    pub warnings: Vec<String>,
}

/// Built-in segmentation with defaults sized for the source bit depth.
pub fn builtin_mask(image: &LoadedImage) -> Result<BinaryMask, String> {
    suppress_background(&image.real, &SuppressionParams::for_bits_allocated(image.bits_allocated()))
        .map_err(|e| format!("built-in background suppression failed: {}", e.name()))
}

/// Auto window over the mask when `suppress` is set, else over the whole
/// image. A missing or empty mask falls back to the whole image with a
/// warning instead of failing.
pub fn resolve_auto_window(
    image: &LoadedImage,
    mask: Option<&BinaryMask>,
    suppress: bool,
    strategy: &AutoWindowStrategy,
) -> Result<WindowOutcome, WindowError> {
    let mut warnings = Vec::new();
    if suppress {
        match mask {
            Some(m) => match auto_window(&image.real, Some(m), strategy) {
                Ok(settings) => return Ok(WindowOutcome { settings, warnings }),
                Err(WindowError::EmptySelection) => {
                    warnings.push("mask selects no pixels; window computed over the full image".into())
                }
                Err(e) => return Err(e),
            },
            None => warnings.push("no mask available; window computed over the full image".into()),
        }
    }
    let settings = auto_window(&image.real, None, strategy)?;
    Ok(WindowOutcome { settings, warnings })
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowSummary {
    pub ww: f64,
    pub wl: f64,
}

impl From<WindowSettings> for WindowSummary {
    fn from(s: WindowSettings) -> Self {
        Self {
            ww: s.width(),
            wl: s.level(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub id: String,
    pub source_kind: SourceKind,
    pub width: usize,
    pub height: usize,
    pub bits_allocated: u8,
    pub photometric: &'static str,
    pub value_min: f64,
    pub value_max: f64,
    pub embedded_window: Option<WindowSummary>,
    pub mask_provenance: Option<MaskProvenance>,
    pub foreground_fraction: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct Rendered {
    pub pgm: Vec<u8>,
    pub settings: WindowSettings,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramReport {
    pub range_min: f64,
    pub range_max: f64,
    pub total: u64,
    pub counts: Vec<u64>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct Study {
    pub id: String,
    pub original: Vec<u8>,
    pub image: LoadedImage,
    mask: Option<BinaryMask>,
    provenance: Option<MaskProvenance>,
    warnings: Vec<String>,
    cached_auto: Mutex<HashMap<(String, bool), WindowOutcome>>,
}

impl Study {
    /// Parses the bytes and eagerly computes the built-in mask.
    pub fn ingest(id: String, bytes: Vec<u8>, kind: SourceKind) -> Result<Self, IngestError> {
        let image = load_image::<f64>(&bytes, kind)?;
        let mut warnings = image.warnings.clone();
        let mask = match builtin_mask(&image) {
            Ok(m) => Some(m),
            Err(w) => {
                warnings.push(w);
                None
            }
        };
        let provenance = mask.as_ref().map(|_| MaskProvenance::BuiltinPipeline);
        Ok(Self {
            id,
            original: bytes,
            image,
            mask,
            provenance,
            warnings,
            cached_auto: Mutex::new(HashMap::new()),
        })
    }

    /// Rebuilds a persisted study without recomputing its mask.
    pub fn restore(
        id: String,
        bytes: Vec<u8>,
        kind: SourceKind,
        mask: Option<(BinaryMask, MaskProvenance)>,
        warnings: Vec<String>,
    ) -> Result<Self, IngestError> {
        let image = load_image::<f64>(&bytes, kind)?;
        if let Some((m, _)) = &mask {
            if m.dims() != image.real.dims() {
                return Err(IngestError::Imaging(ImagingError::DimensionMismatch {
                    expected: image.real.dims(),
                    actual: m.dims(),
                }));
            }
        }
        let (mask, provenance) = match mask {
            Some((m, p)) => (Some(m), Some(p)),
            None => (None, None),
        };
        Ok(Self {
            id,
            original: bytes,
            image,
            mask,
            provenance,
            warnings,
            cached_auto: Mutex::new(HashMap::new()),
        })
    }

    pub fn mask(&self) -> Option<&BinaryMask> {
        self.mask.as_ref()
    }

    pub fn provenance(&self) -> Option<MaskProvenance> {
        self.provenance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.real.dims()
    }

    /// Replaces the mask with an externally supplied one and drops cached windows.
    pub fn set_external_mask(&mut self, mask: BinaryMask) -> Result<(), ImagingError> {
        if mask.dims() != self.dims() {
            return Err(ImagingError::DimensionMismatch {
                expected: self.dims(),
                actual: mask.dims(),
            });
        }
        self.mask = Some(mask);
        self.provenance = Some(MaskProvenance::External);
        self.cached_auto.lock().clear();
        Ok(())
    }

    pub fn auto_window(
        &self,
        strategy: &AutoWindowStrategy,
        suppress: bool,
    ) -> Result<WindowOutcome, WindowError> {
        let key = (strategy.to_string(), suppress);
        if let Some(hit) = self.cached_auto.lock().get(&key) {
            return Ok(hit.clone());
        }
        let outcome = resolve_auto_window(&self.image, self.mask.as_ref(), suppress, strategy)?;
        self.cached_auto.lock().insert(key, outcome.clone());
        Ok(outcome)
    }

    /// 8-bit PGM render. Uses the explicit window when given, otherwise the
    /// cached auto window; background is blacked out when `suppress` is set
    /// and a mask exists.
    pub fn render(
        &self,
        explicit: Option<WindowSettings>,
        suppress: bool,
        strategy: &AutoWindowStrategy,
    ) -> Result<Rendered, WindowError> {
        let (settings, mut warnings) = match explicit {
            Some(s) => (s, Vec::new()),
            None => {
                let o = self.auto_window(strategy, suppress)?;
                (o.settings, o.warnings)
            }
        };
        let mask = if suppress { self.mask.as_ref() } else { None };
        if suppress && mask.is_none() && explicit.is_some() {
            warnings.push("no mask available; rendered without suppression".into());
        }
        let display = apply_window(&self.image.real, &settings, self.image.photometric(), mask)?;
        Ok(Rendered {
            pgm: PgmImage::from_display(&display).encode(),
            settings,
            warnings,
        })
    }

    pub fn histogram(&self, suppress: bool, bins: usize) -> Result<HistogramReport, ImagingError> {
        let mut warnings = Vec::new();
        let h = match (suppress, self.mask.as_ref()) {
            (true, Some(m)) => match histogram(&self.image.real, Some(m), bins) {
                Err(ImagingError::EmptySelection) => {
                    warnings.push("mask selects no pixels; histogram over the full image".into());
                    histogram(&self.image.real, None, bins)?
                }
                other => other?,
            },
            (true, None) => {
                warnings.push("no mask available; histogram over the full image".into());
                histogram(&self.image.real, None, bins)?
            }
            (false, _) => histogram(&self.image.real, None, bins)?,
        };
        Ok(HistogramReport {
            range_min: h.range_min(),
            range_max: h.range_max(),
            total: h.total(),
            counts: h.counts().to_vec(),
            warnings,
        })
    }

    pub fn summary(&self) -> StudySummary {
        let img = &self.image;
        StudySummary {
            id: self.id.clone(),
            source_kind: img.source_kind,
            width: img.real.width(),
            height: img.real.height(),
            bits_allocated: img.bits_allocated(),
            photometric: img.photometric().as_str(),
            value_min: img.real.value_min(),
            value_max: img.real.value_max(),
            embedded_window: img.embedded_window.map(Into::into),
            mask_provenance: self.provenance,
            foreground_fraction: self.mask.as_ref().map(BinaryMask::foreground_fraction),
            warnings: self.warnings.clone(),
        }
    }
}
