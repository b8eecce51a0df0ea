//! Minimal DICOM Part-10 reader.
//!
//! Supports uncompressed little-endian transfer syntaxes (implicit and
//! explicit VR), single-frame grayscale images, and defined-length
//! sequences (which are skipped). Anything outside that subset is rejected
//! with a typed error rather than approximated.

use std::fmt;

use thiserror::Error;

use crate::imaging::{
    ImagingError, Photometric, PixelLayout, PixelRepresentation, RescaleTransform, StoredImage,
};
use crate::scalar::Scalar;
use crate::windowing::WindowSettings;

pub const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

const PREAMBLE_LEN: usize = 128;
const MAGIC: &[u8; 4] = b"DICM";
const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl Tag {
    pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
    pub const SAMPLES_PER_PIXEL: Tag = Tag(0x0028, 0x0002);
    pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag(0x0028, 0x0004);
    pub const NUMBER_OF_FRAMES: Tag = Tag(0x0028, 0x0008);
    pub const ROWS: Tag = Tag(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
    pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
    pub const BITS_STORED: Tag = Tag(0x0028, 0x0101);
    pub const HIGH_BIT: Tag = Tag(0x0028, 0x0102);
    pub const PIXEL_REPRESENTATION: Tag = Tag(0x0028, 0x0103);
    pub const WINDOW_CENTER: Tag = Tag(0x0028, 0x1050);
    pub const WINDOW_WIDTH: Tag = Tag(0x0028, 0x1051);
    pub const RESCALE_INTERCEPT: Tag = Tag(0x0028, 0x1052);
    pub const RESCALE_SLOPE: Tag = Tag(0x0028, 0x1053);
    pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

    pub fn group(self) -> u16 {
        self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

/// Two-letter value representation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vr(pub [u8; 2]);

impl Vr {
    pub const UN: Vr = Vr(*b"UN");
    pub const US: Vr = Vr(*b"US");
    pub const CS: Vr = Vr(*b"CS");
    pub const IS: Vr = Vr(*b"IS");
    pub const DS: Vr = Vr(*b"DS");
    pub const OW: Vr = Vr(*b"OW");

    /// VRs encoded with two reserved bytes and a 4-byte length in explicit VR.
    pub fn has_long_length(self) -> bool {
        matches!(&self.0, b"OB" | b"OW" | b"OF" | b"SQ" | b"UT" | b"UN")
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }
}

/// Implicit-VR dictionary, limited to the tags this reader interprets.
fn implicit_vr(tag: Tag) -> Vr {
    match tag {
        Tag::SAMPLES_PER_PIXEL
        | Tag::ROWS
        | Tag::COLUMNS
        | Tag::BITS_ALLOCATED
        | Tag::BITS_STORED
        | Tag::HIGH_BIT
        | Tag::PIXEL_REPRESENTATION => Vr::US,
        Tag::PHOTOMETRIC_INTERPRETATION => Vr::CS,
        Tag::NUMBER_OF_FRAMES => Vr::IS,
        Tag::WINDOW_CENTER | Tag::WINDOW_WIDTH | Tag::RESCALE_INTERCEPT | Tag::RESCALE_SLOPE => {
            Vr::DS
        }
        Tag::PIXEL_DATA => Vr::OW,
        _ => Vr::UN,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DicomError {
    #[error("missing 128-byte preamble and DICM magic")]
    NotDicom,
    #[error("unsupported transfer syntax {0:?}")]
    UnsupportedTransferSyntax(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("required tag {0} is missing")]
    MissingTag(Tag),
    #[error("multi-frame images are not supported ({0} frames)")]
    MultiFrameUnsupported(u32),
    #[error("data ends inside an element at offset {0}")]
    Truncated(usize),
    #[error("tag {found} follows {previous}; top-level tags must ascend")]
    TagOrder { previous: Tag, found: Tag },
    #[error("invalid value for {0}")]
    InvalidValue(Tag),
    #[error("pixel data holds {actual} bytes, {expected} required")]
    InconsistentDimensions { expected: usize, actual: usize },
    #[error("cannot parse decimal string {value:?} in {tag}")]
    BadDecimalString { tag: Tag, value: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl DicomError {
    pub fn name(&self) -> &'static str {
        match self {
            DicomError::NotDicom => "NotDicom",
            DicomError::UnsupportedTransferSyntax(_) => "UnsupportedTransferSyntax",
            DicomError::UnsupportedFeature(_) => "UnsupportedFeature",
            DicomError::MissingTag(_) => "MissingTag",
            DicomError::MultiFrameUnsupported(_) => "MultiFrameUnsupported",
            DicomError::Truncated(_) => "Truncated",
            DicomError::TagOrder { .. } => "TagOrder",
            DicomError::InvalidValue(_) => "InvalidValue",
            DicomError::InconsistentDimensions { .. } => "InconsistentDimensions",
            DicomError::BadDecimalString { .. } => "BadDecimalString",
            DicomError::Imaging(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferSyntax {
    ImplicitVrLittleEndian,
    ExplicitVrLittleEndian,
}

impl TransferSyntax {
    pub fn from_uid(uid: &str) -> Result<Self, DicomError> {
        match uid {
            IMPLICIT_VR_LE => Ok(Self::ImplicitVrLittleEndian),
            EXPLICIT_VR_LE => Ok(Self::ExplicitVrLittleEndian),
            other => Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
        }
    }

    pub fn uid(self) -> &'static str {
        match self {
            Self::ImplicitVrLittleEndian => IMPLICIT_VR_LE,
            Self::ExplicitVrLittleEndian => EXPLICIT_VR_LE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DicomElement {
    pub tag: Tag,
    /// Explicit VR, or the dictionary VR (`UN` if unknown) under implicit VR.
    pub vr: Vr,
    pub value: Vec<u8>,
}

/// Parsed file with the image-related attributes pulled out.
#[derive(Debug, Clone, PartialEq)]
pub struct DicomRecord {
    pub transfer_syntax: TransferSyntax,
    pub elements: Vec<DicomElement>,
    pub rows: u16,
    pub columns: u16,
    pub layout: PixelLayout,
    pub photometric: Photometric,
    pub rescale_slope: Option<String>,
    pub rescale_intercept: Option<String>,
    /// First value of a possibly multi-valued WindowCenter.
    pub window_center: Option<String>,
    /// First value of a possibly multi-valued WindowWidth.
    pub window_width: Option<String>,
    pixel_data_index: usize,
}

impl DicomRecord {
    pub fn pixel_data(&self) -> &[u8] {
        &self.elements[self.pixel_data_index].value
    }

    pub fn element(&self, tag: Tag) -> Option<&DicomElement> {
        self.elements
            .binary_search_by_key(&tag, |e| e.tag)
            .ok()
            .map(|i| &self.elements[i])
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DicomError> {
        if self.remaining() < n {
            return Err(DicomError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn peek_group(&self) -> Option<u16> {
        (self.remaining() >= 2).then(|| u16::from_le_bytes([self.bytes[self.pos], self.bytes[self.pos + 1]]))
    }

    fn element(&mut self, explicit: bool) -> Result<DicomElement, DicomError> {
        let start = self.pos;
        let tag = Tag(self.u16()?, self.u16()?);
        if tag.group() == 0xFFFE {
            return Err(DicomError::UnsupportedFeature(format!(
                "item or delimiter {tag} at top level"
            )));
        }
        let (vr, len) = if explicit {
            let code = self.take(2)?;
            let vr = Vr([code[0], code[1]]);
            if !vr.0.iter().all(u8::is_ascii_uppercase) {
                return Err(DicomError::UnsupportedFeature(format!(
                    "invalid VR bytes {:02X?} for {tag}",
                    vr.0
                )));
            }
            if vr.has_long_length() {
                self.take(2)?;
                (vr, self.u32()?)
            } else {
                (vr, u32::from(self.u16()?))
            }
        } else {
            (implicit_vr(tag), self.u32()?)
        };
        if len == UNDEFINED_LENGTH {
            let what = if tag == Tag::PIXEL_DATA {
                "undefined-length (encapsulated) pixel data".to_string()
            } else if &vr.0 == b"SQ" || vr == Vr::UN {
                format!("undefined-length sequence {tag}")
            } else {
                format!("undefined length in {tag}")
            };
            return Err(DicomError::UnsupportedFeature(what));
        }
        let value = self
            .take(len as usize)
            .map_err(|_| DicomError::Truncated(start))?
            .to_vec();
        Ok(DicomElement { tag, vr, value })
    }
}

fn text(value: &[u8]) -> String {
    String::from_utf8_lossy(value)
        .trim_matches(|c: char| c == '\0' || c.is_ascii_whitespace())
        .to_string()
}

fn first_value(value: &[u8]) -> Option<String> {
    let s = text(value);
    let first = s.split('\\').next().unwrap_or("").trim().to_string();
    (!first.is_empty()).then_some(first)
}

fn read_us(e: &DicomElement) -> Result<u16, DicomError> {
    match e.value.as_slice() {
        [a, b, ..] => Ok(u16::from_le_bytes([*a, *b])),
        _ => Err(DicomError::InvalidValue(e.tag)),
    }
}

/// Parses a Part-10 byte stream. Never reads past the buffer.
pub fn parse_dicom(bytes: &[u8]) -> Result<DicomRecord, DicomError> {
    if bytes.len() < PREAMBLE_LEN + MAGIC.len() || &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] != MAGIC {
        return Err(DicomError::NotDicom);
    }
    let mut reader = Reader {
        bytes,
        pos: PREAMBLE_LEN + MAGIC.len(),
    };
    let mut elements: Vec<DicomElement> = Vec::new();
    let push = |elements: &mut Vec<DicomElement>, e: DicomElement| {
        if let Some(prev) = elements.last() {
            if e.tag <= prev.tag {
                return Err(DicomError::TagOrder {
                    previous: prev.tag,
                    found: e.tag,
                });
            }
        }
        elements.push(e);
        Ok(())
    };

    // file meta group is always explicit VR little endian
    while reader.peek_group() == Some(0x0002) {
        let e = reader.element(true)?;
        push(&mut elements, e)?;
    }
    let uid = elements
        .iter()
        .find(|e| e.tag == Tag::TRANSFER_SYNTAX_UID)
        .map(|e| text(&e.value))
        .ok_or(DicomError::MissingTag(Tag::TRANSFER_SYNTAX_UID))?;
    let transfer_syntax = TransferSyntax::from_uid(&uid)?;
    let explicit = transfer_syntax == TransferSyntax::ExplicitVrLittleEndian;

    while reader.remaining() > 0 {
        let e = reader.element(explicit)?;
        push(&mut elements, e)?;
    }

    let find = |tag: Tag| elements.binary_search_by_key(&tag, |e| e.tag).ok();
    let required = |tag: Tag| find(tag).ok_or(DicomError::MissingTag(tag));

    let rows = read_us(&elements[required(Tag::ROWS)?])?;
    let columns = read_us(&elements[required(Tag::COLUMNS)?])?;
    let bits_allocated = read_us(&elements[required(Tag::BITS_ALLOCATED)?])?;
    let pixel_data_index = required(Tag::PIXEL_DATA)?;
    if rows == 0 || columns == 0 {
        return Err(DicomError::UnsupportedFeature("zero rows or columns".into()));
    }
    if bits_allocated != 8 && bits_allocated != 16 {
        return Err(DicomError::UnsupportedFeature(format!(
            "bits allocated {bits_allocated}"
        )));
    }
    let opt_us = |tag: Tag| find(tag).map(|i| read_us(&elements[i])).transpose();
    let bits_stored = opt_us(Tag::BITS_STORED)?.unwrap_or(bits_allocated);
    let high_bit = opt_us(Tag::HIGH_BIT)?.unwrap_or(bits_stored.saturating_sub(1));
    let representation = match opt_us(Tag::PIXEL_REPRESENTATION)?.unwrap_or(0) {
        0 => PixelRepresentation::Unsigned,
        1 => PixelRepresentation::Signed,
        _ => return Err(DicomError::InvalidValue(Tag::PIXEL_REPRESENTATION)),
    };
    if bits_stored == 0 || bits_stored > bits_allocated || high_bit >= bits_allocated || high_bit + 1 < bits_stored {
        return Err(DicomError::UnsupportedFeature(format!(
            "pixel layout allocated={bits_allocated} stored={bits_stored} high={high_bit}"
        )));
    }
    let layout = PixelLayout {
        bits_allocated: bits_allocated as u8,
        bits_stored: bits_stored as u8,
        high_bit: high_bit as u8,
        representation,
    };
    if let Some(spp) = opt_us(Tag::SAMPLES_PER_PIXEL)? {
        if spp != 1 {
            return Err(DicomError::UnsupportedFeature(format!("{spp} samples per pixel")));
        }
    }
    let photometric = match find(Tag::PHOTOMETRIC_INTERPRETATION).map(|i| text(&elements[i].value)) {
        None => Photometric::Monochrome2,
        Some(p) if p == "MONOCHROME2" => Photometric::Monochrome2,
        Some(p) if p == "MONOCHROME1" => Photometric::Monochrome1,
        Some(p) => {
            return Err(DicomError::UnsupportedFeature(format!(
                "photometric interpretation {p:?}"
            )))
        }
    };
    if let Some(i) = find(Tag::NUMBER_OF_FRAMES) {
        let s = text(&elements[i].value);
        if !s.is_empty() {
            let frames: u32 = s
                .parse()
                .map_err(|_| DicomError::InvalidValue(Tag::NUMBER_OF_FRAMES))?;
            if frames > 1 {
                return Err(DicomError::MultiFrameUnsupported(frames));
            }
        }
    }
    let string_of = |tag: Tag| find(tag).and_then(|i| first_value(&elements[i].value));
    let rescale_slope = string_of(Tag::RESCALE_SLOPE);
    let rescale_intercept = string_of(Tag::RESCALE_INTERCEPT);
    let window_center = string_of(Tag::WINDOW_CENTER);
    let window_width = string_of(Tag::WINDOW_WIDTH);

    Ok(DicomRecord {
        transfer_syntax,
        elements,
        rows,
        columns,
        layout,
        photometric,
        rescale_slope,
        rescale_intercept,
        window_center,
        window_width,
        pixel_data_index,
    })
}

/// Image content of a record: stored samples, modality rescale, and the
/// embedded default window when one is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedImage<T> {
    pub image: StoredImage,
    pub rescale: RescaleTransform<T>,
    pub window: Option<WindowSettings<T>>,
    pub warnings: Vec<String>,
}

fn parse_decimal(tag: Tag, s: &str) -> Result<f64, DicomError> {
    let bad = || DicomError::BadDecimalString {
        tag,
        value: s.to_string(),
    };
    if s.is_empty()
        || !s
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
    {
        return Err(bad());
    }
    s.parse::<f64>().map_err(|_| bad())
}

pub fn extract_image<T: Scalar>(rec: &DicomRecord) -> Result<ExtractedImage<T>, DicomError> {
    let width = usize::from(rec.columns);
    let height = usize::from(rec.rows);
    let bytes_per_sample = usize::from(rec.layout.bits_allocated / 8);
    let expected = width * height * bytes_per_sample;
    let data = rec.pixel_data();
    if data.len() < expected {
        return Err(DicomError::InconsistentDimensions {
            expected,
            actual: data.len(),
        });
    }
    let values: Vec<u16> = if bytes_per_sample == 1 {
        data[..expected].iter().map(|&b| u16::from(b)).collect()
    } else {
        data[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    let image = StoredImage::new(width, height, rec.layout, rec.photometric, values)?;

    let decimal = |tag: Tag, v: &Option<String>| v.as_deref().map(|s| parse_decimal(tag, s)).transpose();
    let slope = decimal(Tag::RESCALE_SLOPE, &rec.rescale_slope)?.unwrap_or(1.0);
    let intercept = decimal(Tag::RESCALE_INTERCEPT, &rec.rescale_intercept)?.unwrap_or(0.0);
    let rescale = RescaleTransform::new(T::of(slope), T::of(intercept))
        .map_err(|_| DicomError::InvalidValue(Tag::RESCALE_SLOPE))?;

    let mut warnings = Vec::new();
    let center = decimal(Tag::WINDOW_CENTER, &rec.window_center)?;
    let width_value = decimal(Tag::WINDOW_WIDTH, &rec.window_width)?;
    let window = match (center, width_value) {
        (Some(c), Some(w)) => match WindowSettings::new(T::of(c), T::of(w)) {
            Ok(s) => Some(s),
            Err(_) => {
                warnings.push(format!(
                    "embedded window center={c} width={w} ignored: width must be finite and >= 1"
                ));
                None
            }
        },
        (None, None) => None,
        _ => {
            warnings.push("embedded window ignored: only one of center/width present".into());
            None
        }
    };
    Ok(ExtractedImage {
        image,
        rescale,
        window,
        warnings,
    })
}

/// Byte-level builder for synthetic Part-10 files.
#[cfg(any(test, feature = "fixtures"))]
pub mod fixtures {
    use super::*;

    #[derive(Debug, Clone)]
    pub struct FixtureBuilder {
        syntax_uid: String,
        explicit: bool,
        meta: bool,
        elements: Vec<(Tag, Vr, Vec<u8>)>,
    }

    impl FixtureBuilder {
        pub fn new(syntax: TransferSyntax) -> Self {
            Self {
                syntax_uid: syntax.uid().to_string(),
                explicit: syntax == TransferSyntax::ExplicitVrLittleEndian,
                meta: true,
                elements: Vec::new(),
            }
        }

        /// Grayscale image with the usual image-pixel module attributes.
        pub fn image(syntax: TransferSyntax, width: u16, height: u16, bits: u16, pixels: &[u16]) -> Self {
            let data: Vec<u8> = if bits == 8 {
                pixels.iter().map(|&p| p as u8).collect()
            } else {
                pixels.iter().flat_map(|p| p.to_le_bytes()).collect()
            };
            Self::new(syntax)
                .us(Tag::SAMPLES_PER_PIXEL, 1)
                .string(Tag::PHOTOMETRIC_INTERPRETATION, "CS", "MONOCHROME2")
                .us(Tag::ROWS, height)
                .us(Tag::COLUMNS, width)
                .us(Tag::BITS_ALLOCATED, bits)
                .us(Tag::BITS_STORED, bits)
                .us(Tag::HIGH_BIT, bits - 1)
                .us(Tag::PIXEL_REPRESENTATION, 0)
                .element(Tag::PIXEL_DATA, if bits == 8 { "OB" } else { "OW" }, data)
        }

        pub fn syntax_uid(mut self, uid: &str) -> Self {
            self.syntax_uid = uid.to_string();
            self
        }

        pub fn without_meta(mut self) -> Self {
            self.meta = false;
            self
        }

        pub fn element(mut self, tag: Tag, vr: &str, value: Vec<u8>) -> Self {
            let code = vr.as_bytes();
            self.elements.retain(|(t, _, _)| *t != tag);
            self.elements.push((tag, Vr([code[0], code[1]]), value));
            self
        }

        pub fn us(self, tag: Tag, v: u16) -> Self {
            self.element(tag, "US", v.to_le_bytes().to_vec())
        }

        /// String value padded to even length with a space.
        pub fn string(self, tag: Tag, vr: &str, s: &str) -> Self {
            let mut v = s.as_bytes().to_vec();
            if v.len() % 2 == 1 {
                v.push(b' ');
            }
            self.element(tag, vr, v)
        }

        pub fn without(mut self, tag: Tag) -> Self {
            self.elements.retain(|(t, _, _)| *t != tag);
            self
        }

        fn encode(out: &mut Vec<u8>, explicit: bool, tag: Tag, vr: Vr, value: &[u8]) {
            out.extend_from_slice(&tag.0.to_le_bytes());
            out.extend_from_slice(&tag.1.to_le_bytes());
            if explicit {
                out.extend_from_slice(&vr.0);
                if vr.has_long_length() {
                    out.extend_from_slice(&[0, 0]);
                    out.extend_from_slice(&(value.len() as u32).to_le_bytes());
                } else {
                    out.extend_from_slice(&(value.len() as u16).to_le_bytes());
                }
            } else {
                out.extend_from_slice(&(value.len() as u32).to_le_bytes());
            }
            out.extend_from_slice(value);
        }

        /// Serializes with dataset elements sorted by tag.
        pub fn build(&self) -> Vec<u8> {
            let mut sorted = self.elements.clone();
            sorted.sort_by_key(|(t, _, _)| *t);
            self.serialize(&sorted)
        }

        /// Serializes dataset elements in insertion order.
        pub fn build_unsorted(&self) -> Vec<u8> {
            self.serialize(&self.elements)
        }

        fn serialize(&self, elements: &[(Tag, Vr, Vec<u8>)]) -> Vec<u8> {
            let mut out = vec![0u8; PREAMBLE_LEN];
            out.extend_from_slice(MAGIC);
            if self.meta {
                let mut meta = Vec::new();
                Self::encode(&mut meta, true, Tag(0x0002, 0x0001), Vr(*b"OB"), &[0, 1]);
                let mut uid = self.syntax_uid.as_bytes().to_vec();
                if uid.len() % 2 == 1 {
                    uid.push(0);
                }
                Self::encode(&mut meta, true, Tag::TRANSFER_SYNTAX_UID, Vr(*b"UI"), &uid);
                Self::encode(
                    &mut out,
                    true,
                    Tag(0x0002, 0x0000),
                    Vr(*b"UL"),
                    &(meta.len() as u32).to_le_bytes(),
                );
                out.extend(meta);
            }
            for (tag, vr, value) in elements {
                Self::encode(&mut out, self.explicit, *tag, *vr, value);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::FixtureBuilder;
    use super::*;
    use proptest::prelude::*;

    fn ramp16() -> Vec<u16> {
        (0..16).collect()
    }

    fn pixels_of(rec: &DicomRecord) -> Vec<u16> {
        extract_image::<f64>(rec).unwrap().image.stored_values().to_vec()
    }

    #[test]
    fn explicit_fixture_round_trips() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::WINDOW_CENTER, "DS", "40\\400")
            .string(Tag::WINDOW_WIDTH, "DS", "80\\2000")
            .build();
        let rec = parse_dicom(&bytes).unwrap();
        assert_eq!(rec.transfer_syntax, TransferSyntax::ExplicitVrLittleEndian);
        assert_eq!((rec.rows, rec.columns), (4, 4));
        assert_eq!(rec.layout, PixelLayout::unsigned(16));
        assert_eq!(pixels_of(&rec), ramp16());
        let ex = extract_image::<f64>(&rec).unwrap();
        let w = ex.window.unwrap();
        assert_eq!((w.level(), w.width()), (40.0, 80.0));
        assert_eq!(ex.rescale, RescaleTransform::default());
    }

    #[test]
    fn implicit_fixture_round_trips() {
        let pixels: Vec<u16> = (0..12).map(|i| i * 1000 + 7).collect();
        let bytes = FixtureBuilder::image(TransferSyntax::ImplicitVrLittleEndian, 3, 4, 16, &pixels)
            .string(Tag::RESCALE_SLOPE, "DS", "2")
            .string(Tag::RESCALE_INTERCEPT, "DS", "-1000")
            .element(Tag(0x0010, 0x0010), "PN", b"DOE^JANE".to_vec())
            .build();
        let rec = parse_dicom(&bytes).unwrap();
        assert_eq!(rec.transfer_syntax, TransferSyntax::ImplicitVrLittleEndian);
        assert_eq!((rec.rows, rec.columns), (4, 3));
        assert_eq!(pixels_of(&rec), pixels);
        assert_eq!(rec.element(Tag(0x0010, 0x0010)).unwrap().vr, Vr::UN);
        let ex = extract_image::<f64>(&rec).unwrap();
        assert_eq!((ex.rescale.slope(), ex.rescale.intercept()), (2.0, -1000.0));
    }

    #[test]
    fn eight_bit_pixels() {
        let pixels: Vec<u16> = (0..6).map(|i| i * 40).collect();
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 3, 2, 8, &pixels).build();
        let rec = parse_dicom(&bytes).unwrap();
        assert_eq!(pixels_of(&rec), pixels);
    }

    #[test]
    fn defined_length_sequence_is_skipped() {
        let mut item = Vec::new();
        item.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0, 4, 0, 0, 0, 1, 2, 3, 4]);
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .element(Tag(0x0008, 0x1140), "SQ", item)
            .build();
        assert_eq!(pixels_of(&parse_dicom(&bytes).unwrap()), ramp16());
    }

    #[test]
    fn not_dicom() {
        assert_eq!(parse_dicom(b"hello"), Err(DicomError::NotDicom));
        let mut bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16()).build();
        bytes[129] = b'X';
        assert_eq!(parse_dicom(&bytes), Err(DicomError::NotDicom));
    }

    #[test]
    fn missing_pixel_data() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .without(Tag::PIXEL_DATA)
            .build();
        assert_eq!(parse_dicom(&bytes), Err(DicomError::MissingTag(Tag::PIXEL_DATA)));
    }

    #[test]
    fn compressed_syntax_is_rejected() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .syntax_uid("1.2.840.10008.1.2.4.50")
            .build();
        assert!(matches!(
            parse_dicom(&bytes),
            Err(DicomError::UnsupportedTransferSyntax(_))
        ));
    }

    #[test]
    fn undefined_length_pixel_data() {
        let mut bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .without(Tag::PIXEL_DATA)
            .build();
        bytes.extend_from_slice(&[0xE0, 0x7F, 0x10, 0x00, b'O', b'B', 0, 0, 0xFF, 0xFF, 0xFF, 0xFF]);
        assert!(matches!(parse_dicom(&bytes), Err(DicomError::UnsupportedFeature(_))));
    }

    #[test]
    fn undefined_length_sequence() {
        let mut bytes = FixtureBuilder::new(TransferSyntax::ExplicitVrLittleEndian).build();
        bytes.extend_from_slice(&[0x08, 0x00, 0x40, 0x11, b'S', b'Q', 0, 0, 0xFF, 0xFF, 0xFF, 0xFF]);
        assert!(matches!(parse_dicom(&bytes), Err(DicomError::UnsupportedFeature(_))));
    }

    #[test]
    fn multi_frame_is_rejected() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::NUMBER_OF_FRAMES, "IS", "3")
            .build();
        assert_eq!(parse_dicom(&bytes), Err(DicomError::MultiFrameUnsupported(3)));
    }

    #[test]
    fn color_photometric_is_rejected() {
        let bytes = FixtureBuilder::image(TransferSyntax::ImplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::PHOTOMETRIC_INTERPRETATION, "CS", "RGB")
            .build();
        assert!(matches!(parse_dicom(&bytes), Err(DicomError::UnsupportedFeature(_))));
    }

    #[test]
    fn truncated_mid_element() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16()).build();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(parse_dicom(cut), Err(DicomError::Truncated(_))));
    }

    #[test]
    fn out_of_order_tags_are_rejected() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .us(Tag::SAMPLES_PER_PIXEL, 1)
            .build_unsorted();
        assert!(matches!(parse_dicom(&bytes), Err(DicomError::TagOrder { .. })));
    }

    #[test]
    fn short_pixel_data_is_inconsistent() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .us(Tag::ROWS, 5)
            .build();
        let rec = parse_dicom(&bytes).unwrap();
        assert!(matches!(
            extract_image::<f64>(&rec),
            Err(DicomError::InconsistentDimensions { expected: 40, actual: 32 })
        ));
    }

    #[test]
    fn window_width_below_one_is_dropped_with_warning() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::WINDOW_CENTER, "DS", "10")
            .string(Tag::WINDOW_WIDTH, "DS", "0.5")
            .build();
        let ex = extract_image::<f64>(&parse_dicom(&bytes).unwrap()).unwrap();
        assert!(ex.window.is_none());
        assert_eq!(ex.warnings.len(), 1);
    }

    #[test]
    fn garbage_decimal_string() {
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::RESCALE_SLOPE, "DS", "abc")
            .build();
        let rec = parse_dicom(&bytes).unwrap();
        assert!(matches!(
            extract_image::<f64>(&rec),
            Err(DicomError::BadDecimalString { .. })
        ));
        let inf = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 4, 4, 16, &ramp16())
            .string(Tag::WINDOW_CENTER, "DS", "inf")
            .string(Tag::WINDOW_WIDTH, "DS", "10")
            .build();
        assert!(matches!(
            extract_image::<f64>(&parse_dicom(&inf).unwrap()),
            Err(DicomError::BadDecimalString { .. })
        ));
    }

    #[test]
    fn signed_twelve_bit_layout_is_carried() {
        let pixels = [0x0FFFu16, 0x0001, 0xF800, 0x07FF];
        let bytes = FixtureBuilder::image(TransferSyntax::ExplicitVrLittleEndian, 2, 2, 16, &pixels)
            .us(Tag::BITS_STORED, 12)
            .us(Tag::HIGH_BIT, 11)
            .us(Tag::PIXEL_REPRESENTATION, 1)
            .build();
        let ex = extract_image::<f64>(&parse_dicom(&bytes).unwrap()).unwrap();
        let values: Vec<i32> = (0..4).map(|i| ex.image.value(i)).collect();
        assert_eq!(values, vec![-1, 1, -2048, 2047]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn parser_is_total_on_mutations(
            implicit in any::<bool>(),
            edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8),
            cut in any::<prop::sample::Index>(),
            do_cut in any::<bool>(),
        ) {
            let syntax = if implicit { TransferSyntax::ImplicitVrLittleEndian } else { TransferSyntax::ExplicitVrLittleEndian };
            let mut bytes = FixtureBuilder::image(syntax, 4, 4, 16, &ramp16()).build();
            for (i, b) in edits {
                let at = i.index(bytes.len());
                bytes[at] = b;
            }
            if do_cut {
                bytes.truncate(cut.index(bytes.len() + 1));
            }
            if let Ok(rec) = parse_dicom(&bytes) {
                let _ = extract_image::<f64>(&rec);
            }
        }
    }
}
