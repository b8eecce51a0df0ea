//! One entry point for turning file bytes into an image ready for the
//! pipeline, whatever the container.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{extract_image, parse_dicom, DicomError};
use crate::imaging::{rescale_to_real, ImagingError, Photometric, RealImage, RescaleTransform, StoredImage};
use crate::pgm::{read_pgm, PgmError};
use crate::scalar::Scalar;
use crate::windowing::WindowSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Dicom,
    Pgm,
}

impl SourceKind {
    /// `P5` magic means PGM; everything else is handed to the DICOM reader.
    pub fn sniff(bytes: &[u8]) -> Self {
        if bytes.starts_with(b"P5") {
            SourceKind::Pgm
        } else {
            SourceKind::Dicom
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Dicom => "dicom",
            SourceKind::Pgm => "pgm",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dicom" => Ok(SourceKind::Dicom),
            "pgm" => Ok(SourceKind::Pgm),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error(transparent)]
    Dicom(#[from] DicomError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("unknown image format {0:?}")]
    UnknownFormat(String),
}

impl IngestError {
    pub fn name(&self) -> &'static str {
        match self {
            IngestError::Dicom(e) => e.name(),
            IngestError::Pgm(e) => e.name(),
            IngestError::Imaging(e) => e.name(),
            IngestError::UnknownFormat(_) => "UnknownFormat",
        }
    }
}

/// A parsed input: stored samples, rescale, embedded window and the
/// real-valued image derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedImage<T> {
    pub source_kind: SourceKind,
    pub stored: StoredImage,
    pub rescale: RescaleTransform<T>,
    pub embedded_window: Option<WindowSettings<T>>,
    pub real: RealImage<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> LoadedImage<T> {
    pub fn photometric(&self) -> Photometric {
        self.stored.photometric()
    }

    pub fn bits_allocated(&self) -> u8 {
        self.stored.bits_allocated()
    }
}

pub fn load_image<T: Scalar>(bytes: &[u8], kind: SourceKind) -> Result<LoadedImage<T>, IngestError> {
    let (stored, rescale, embedded_window, warnings) = match kind {
        SourceKind::Dicom => {
            let rec = parse_dicom(bytes)?;
            let ex = extract_image::<T>(&rec)?;
            (ex.image, ex.rescale, ex.window, ex.warnings)
        }
        SourceKind::Pgm => (read_pgm(bytes)?, RescaleTransform::default(), None, Vec::new()),
    };
    let real = rescale_to_real(&stored, &rescale)?;
    Ok(LoadedImage {
        source_kind: kind,
        stored,
        rescale,
        embedded_window,
        real,
        warnings,
    })
}
