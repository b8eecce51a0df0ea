//! Binary PGM (P5) reading and writing, 8-bit and 16-bit big-endian.

use thiserror::Error;

use crate::imaging::{ImagingError, Photometric, PixelLayout, PixelRepresentation, StoredImage};
use crate::mask::BinaryMask;
use crate::windowing::DisplayImage;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgmError {
    #[error("not a binary PGM (expected P5 magic)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("PGM sample data truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("image cannot be written as PGM: {0}")]
    Unrepresentable(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl PgmError {
    pub fn name(&self) -> &'static str {
        match self {
            PgmError::BadMagic => "BadMagic",
            PgmError::BadHeader(_) => "BadHeader",
            PgmError::Truncated { .. } => "Truncated",
            PgmError::Unrepresentable(_) => "Unrepresentable",
            PgmError::Imaging(e) => e.name(),
        }
    }
}

/// A decoded P5 image. `maxval` is 255 or 65535.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, maxval: u16, samples: Vec<u16>) -> Result<Self, PgmError> {
        if maxval != 255 && maxval != 65535 {
            return Err(PgmError::BadHeader(format!("unsupported maxval {maxval}")));
        }
        if width == 0 || height == 0 {
            return Err(PgmError::BadHeader("zero dimension".into()));
        }
        if samples.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: samples.len(),
            }
            .into());
        }
        if let Some(&s) = samples.iter().find(|&&s| s > maxval) {
            return Err(PgmError::Unrepresentable(format!("sample {s} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval,
            samples,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PgmError> {
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(PgmError::BadMagic);
        }
        let mut cursor = HeaderCursor { bytes, pos: 2 };
        let width = cursor.field("width")?;
        let height = cursor.field("height")?;
        let maxval = cursor.field("maxval")?;
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(PgmError::BadHeader("missing whitespace after maxval".into())),
        }
        if maxval != 255 && maxval != 65535 {
            return Err(PgmError::BadHeader(format!("unsupported maxval {maxval}")));
        }
        if width == 0 || height == 0 {
            return Err(PgmError::BadHeader("zero dimension".into()));
        }
        let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
        let n = width
            .checked_mul(height)
            .ok_or_else(|| PgmError::BadHeader("dimensions overflow".into()))?;
        let expected = n
            .checked_mul(bytes_per_sample)
            .ok_or_else(|| PgmError::BadHeader("dimensions overflow".into()))?;
        let raster = &bytes[cursor.pos..];
        if raster.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                actual: raster.len(),
            });
        }
        let samples = if bytes_per_sample == 1 {
            raster[..n].iter().map(|&b| u16::from(b)).collect()
        } else {
            raster[..expected]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval == 255 {
            out.extend(self.samples.iter().map(|&s| s as u8));
        } else {
            out.reserve(self.samples.len() * 2);
            for s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
        out
    }

    pub fn to_stored_image(&self) -> Result<StoredImage, PgmError> {
        let bits = if self.maxval == 255 { 8 } else { 16 };
        Ok(StoredImage::new(
            self.width,
            self.height,
            PixelLayout::unsigned(bits),
            Photometric::Monochrome2,
            self.samples.clone(),
        )?)
    }

    /// Samples above `maxval / 2` are foreground.
    pub fn to_mask(&self) -> BinaryMask {
        let cut = self.maxval / 2;
        BinaryMask::new(
            self.width,
            self.height,
            self.samples.iter().map(|&s| s > cut).collect(),
        )
        .expect("validated dimensions")
    }

    /// 8-bit mask file: 0 background, 255 foreground.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            maxval: 255,
            samples: mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn from_display(img: &DisplayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            maxval: 255,
            samples: img.samples().iter().map(|&s| u16::from(s)).collect(),
        }
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn field(&mut self, what: &str) -> Result<usize, PgmError> {
        let before = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == before {
            return Err(PgmError::BadHeader(format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos || self.pos - start > 9 {
            return Err(PgmError::BadHeader(format!("bad {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::BadHeader(format!("bad {what}")))
    }
}

/// Parses a P5 file into a stored image (unsigned, MONOCHROME2).
pub fn read_pgm(bytes: &[u8]) -> Result<StoredImage, PgmError> {
    PgmImage::decode(bytes)?.to_stored_image()
}

/// Writes an unsigned 8- or 16-bit image with full-width samples as P5.
pub fn write_pgm(img: &StoredImage) -> Result<Vec<u8>, PgmError> {
    let layout = img.layout();
    if layout.representation != PixelRepresentation::Unsigned {
        return Err(PgmError::Unrepresentable("signed samples".into()));
    }
    let maxval = if layout.bits_allocated == 8 { 255 } else { 65535 };
    let pgm = PgmImage::new(img.width(), img.height(), maxval, img.stored_values().to_vec())?;
    Ok(pgm.encode())
}
