//! Uncompressed image codecs: binary PGM (P5), binary PPM (P6) and 24-bit
//! BI_RGB BMP.
//!
//! Decoders treat their input as untrusted: every declared size is checked
//! against the payload before anything is allocated.

use crate::{ImageError, ImageRecord, PixelMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImageFormat {
    Pgm,
    Ppm,
    Bmp,
}

impl ImageFormat {
    pub fn name(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "PGM",
            ImageFormat::Ppm => "PPM",
            ImageFormat::Bmp => "BMP",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Ppm => "ppm",
            ImageFormat::Bmp => "bmp",
        }
    }

    /// The PNM flavor that stores `mode` without loss.
    pub fn pnm_for(mode: PixelMode) -> Self {
        match mode {
            PixelMode::Gray8 => ImageFormat::Pgm,
            PixelMode::Rgb8 => ImageFormat::Ppm,
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            "bmp" => Some(ImageFormat::Bmp),
            _ => None,
        }
    }
}

/// Identifies the format from the leading magic bytes.
pub fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    match bytes.get(..2)? {
        b"P5" => Some(ImageFormat::Pgm),
        b"P6" => Some(ImageFormat::Ppm),
        b"BM" => Some(ImageFormat::Bmp),
        _ => None,
    }
}

/// Decodes `bytes`. Without a hint the format is sniffed from the magic.
pub fn decode(bytes: &[u8], hint: Option<ImageFormat>) -> Result<ImageRecord, ImageError> {
    let format = match hint {
        Some(f) => f,
        None => sniff_format(bytes)
            .ok_or_else(|| ImageError::UnsupportedFormat("unrecognized magic".into()))?,
    };
    match format {
        ImageFormat::Pgm => decode_pnm(bytes, b"P5", PixelMode::Gray8),
        ImageFormat::Ppm => decode_pnm(bytes, b"P6", PixelMode::Rgb8),
        ImageFormat::Bmp => decode_bmp(bytes),
    }
}

pub fn encode(img: &ImageRecord, format: ImageFormat) -> Result<Vec<u8>, ImageError> {
    match (format, img.mode()) {
        (ImageFormat::Pgm, PixelMode::Gray8) => Ok(encode_pnm(img, "P5")),
        (ImageFormat::Ppm, PixelMode::Rgb8) => Ok(encode_pnm(img, "P6")),
        (ImageFormat::Bmp, PixelMode::Rgb8) => encode_bmp(img),
        (format, mode) => Err(ImageError::ModeMismatch {
            format: format.name(),
            mode: mode.name(),
        }),
    }
}

// Largest side accepted by the decoders; keeps hostile headers from asking
// for absurd allocations.
const MAX_SIDE: usize = 1 << 15;

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        if self.pos - start > 9 {
            return Err(ImageError::MalformedHeader(format!("{what} too large")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        Ok(text.parse().expect("at most nine digits"))
    }
}

fn decode_pnm(bytes: &[u8], magic: &[u8; 2], mode: PixelMode) -> Result<ImageRecord, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        let expected = std::str::from_utf8(magic).unwrap_or("?");
        return Err(match bytes.get(..2) {
            Some(b"P2") | Some(b"P3") | Some(b"P1") | Some(b"P4") => {
                ImageError::UnsupportedFormat("ASCII/bitmap PNM variants".into())
            }
            _ => ImageError::MalformedHeader(format!("expected magic {expected}")),
        });
    }
    let mut cur = PnmCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(ImageError::MalformedHeader(format!(
            "dimensions {width}x{height} out of range"
        )));
    }
    if maxval == 0 {
        return Err(ImageError::MalformedHeader(
            "maxval must be positive".into(),
        ));
    }
    if maxval > 255 {
        return Err(ImageError::UnsupportedFormat(format!(
            "16-bit samples (maxval {maxval})"
        )));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => {
            return Err(ImageError::MalformedHeader(
                "missing separator after maxval".into(),
            ))
        }
        None => {
            return Err(ImageError::TruncatedData {
                expected: width * height * mode.channels(),
                actual: 0,
            })
        }
    }
    let expected = width * height * mode.channels();
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(ImageError::TruncatedData {
            expected,
            actual: payload.len(),
        });
    }
    ImageRecord::new("", width, height, mode, payload[..expected].to_vec())
}

fn encode_pnm(img: &ImageRecord, magic: &str) -> Vec<u8> {
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

const BMP_FILE_HEADER: usize = 14;
const BMP_INFO_HEADER: usize = 40;

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn decode_bmp(bytes: &[u8]) -> Result<ImageRecord, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"BM" {
        return Err(ImageError::MalformedHeader("expected magic BM".into()));
    }
    if bytes.len() < BMP_FILE_HEADER + BMP_INFO_HEADER {
        return Err(ImageError::MalformedHeader("header too short".into()));
    }
    let offset = le_u32(bytes, 10) as usize;
    let info_size = le_u32(bytes, 14) as usize;
    if info_size < BMP_INFO_HEADER {
        return Err(ImageError::UnsupportedFormat(format!(
            "DIB header of {info_size} bytes"
        )));
    }
    let raw_width = le_u32(bytes, 18) as i32;
    let raw_height = le_u32(bytes, 22) as i32;
    let planes = le_u16(bytes, 26);
    let bpp = le_u16(bytes, 28);
    let compression = le_u32(bytes, 30);
    if planes != 1 {
        return Err(ImageError::MalformedHeader(format!("{planes} planes")));
    }
    if bpp != 24 {
        return Err(ImageError::UnsupportedFormat(format!(
            "{bpp} bits per pixel"
        )));
    }
    if compression != 0 {
        return Err(ImageError::UnsupportedFormat(format!(
            "compression method {compression}"
        )));
    }
    let top_down = raw_height < 0;
    let width = usize::try_from(raw_width).unwrap_or(0);
    let height = raw_height.unsigned_abs() as usize;
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(ImageError::MalformedHeader(format!(
            "dimensions {raw_width}x{raw_height} out of range"
        )));
    }
    if offset < BMP_FILE_HEADER + info_size {
        return Err(ImageError::MalformedHeader(format!(
            "pixel offset {offset} overlaps header"
        )));
    }
    let stride = (width * 3 + 3) & !3;
    let expected = stride * height;
    let payload = bytes.get(offset..).unwrap_or(&[]);
    // The final row may omit its padding.
    let needed = expected - (stride - width * 3);
    if payload.len() < needed {
        return Err(ImageError::TruncatedData {
            expected,
            actual: payload.len(),
        });
    }
    let mut data = vec![0u8; width * height * 3];
    for row in 0..height {
        let src_row = if top_down { row } else { height - 1 - row };
        let src = &payload[src_row * stride..src_row * stride + width * 3];
        let dst = &mut data[row * width * 3..(row + 1) * width * 3];
        for (d, s) in dst.chunks_exact_mut(3).zip(src.chunks_exact(3)) {
            d[0] = s[2];
            d[1] = s[1];
            d[2] = s[0];
        }
    }
    ImageRecord::new("", width, height, PixelMode::Rgb8, data)
}

fn encode_bmp(img: &ImageRecord) -> Result<Vec<u8>, ImageError> {
    let (width, height) = (img.width(), img.height());
    if width > i32::MAX as usize || height > i32::MAX as usize {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    let stride = (width * 3 + 3) & !3;
    let offset = BMP_FILE_HEADER + BMP_INFO_HEADER;
    let file_size = offset + stride * height;
    let mut out = Vec::with_capacity(file_size);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(file_size as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(offset as u32).to_le_bytes());
    out.extend_from_slice(&(BMP_INFO_HEADER as u32).to_le_bytes());
    out.extend_from_slice(&(width as i32).to_le_bytes());
    out.extend_from_slice(&(height as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&((stride * height) as u32).to_le_bytes());
    // 72 dpi
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    let data = img.data();
    for row in (0..height).rev() {
        let src = &data[row * width * 3..(row + 1) * width * 3];
        for px in src.chunks_exact(3) {
            out.extend_from_slice(&[px[2], px[1], px[0]]);
        }
        out.resize(out.len() + stride - width * 3, 0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_tiny_pgm() {
        let bytes = b"P5\n2 2\n255\n\x00\x40\x80\xff";
        let img = decode(bytes, Some(ImageFormat::Pgm)).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.mode(), PixelMode::Gray8);
        assert_eq!(img.data(), &[0x00, 0x40, 0x80, 0xff]);
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let bytes = b"P5 # made by hand\n1 # width\n1\n255 \x07";
        assert_eq!(decode(bytes, None).unwrap().data(), &[7]);
    }

    #[test]
    fn ppm_short_payload_is_truncated() {
        // Header promises 2x2 = 4 pixels, payload carries 3.
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1u8; 9]);
        assert_eq!(
            decode(&bytes, Some(ImageFormat::Ppm)),
            Err(ImageError::TruncatedData {
                expected: 12,
                actual: 9
            })
        );
    }

    #[test]
    fn rejects_sixteen_bit_and_ascii() {
        assert!(matches!(
            decode(b"P5 1 1 65535\n\x00\x00", None),
            Err(ImageError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode(b"P2 1 1 255\n0", Some(ImageFormat::Pgm)),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn malformed_headers() {
        for bad in [
            &b"P5\n"[..],
            b"P5 x 1 255\n\x00",
            b"P5 0 1 255\n",
            b"P5 1 1 0\n\x00",
            b"P5 1 1 255x\x00",
            b"BM",
        ] {
            let err = decode(bad, None).unwrap_err();
            assert!(
                matches!(err, ImageError::MalformedHeader(_)),
                "{bad:?} gave {err:?}"
            );
        }
        assert!(matches!(
            decode(b"GIF89a", None),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn bmp_rows_are_padded_and_bottom_up() {
        let img = ImageRecord::new("", 1, 2, PixelMode::Rgb8, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let bytes = encode(&img, ImageFormat::Bmp).unwrap();
        assert_eq!(bytes.len(), 54 + 2 * 4);
        // bottom row first, BGR order, one padding byte
        assert_eq!(&bytes[54..58], &[6, 5, 4, 0]);
        assert_eq!(&bytes[58..62], &[3, 2, 1, 0]);
        assert_eq!(decode(&bytes, None).unwrap().data(), img.data());
    }

    #[test]
    fn bmp_rejects_other_depths() {
        let img = ImageRecord::new("", 2, 2, PixelMode::Rgb8, vec![9; 12]).unwrap();
        let mut bytes = encode(&img, ImageFormat::Bmp).unwrap();
        bytes[28] = 32;
        assert!(matches!(
            decode(&bytes, None),
            Err(ImageError::UnsupportedFormat(_))
        ));
        bytes[28] = 24;
        bytes.truncate(60);
        assert!(matches!(
            decode(&bytes, None),
            Err(ImageError::TruncatedData { .. })
        ));
    }

    #[test]
    fn mode_must_fit_format() {
        let gray = ImageRecord::new("", 1, 1, PixelMode::Gray8, vec![0]).unwrap();
        assert!(matches!(
            encode(&gray, ImageFormat::Ppm),
            Err(ImageError::ModeMismatch { .. })
        ));
        assert!(encode(&gray, ImageFormat::Bmp).is_err());
    }

    fn arb_image(mode: PixelMode) -> impl Strategy<Value = ImageRecord> {
        (1usize..12, 1usize..12).prop_flat_map(move |(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h * mode.channels())
                .prop_map(move |data| ImageRecord::new("", w, h, mode, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trips_are_lossless(
            gray in arb_image(PixelMode::Gray8),
            rgb in arb_image(PixelMode::Rgb8),
        ) {
            let pgm = encode(&gray, ImageFormat::Pgm).unwrap();
            prop_assert_eq!(decode(&pgm, None).unwrap(), gray);
            for format in [ImageFormat::Ppm, ImageFormat::Bmp] {
                let bytes = encode(&rgb, format).unwrap();
                prop_assert_eq!(&decode(&bytes, Some(format)).unwrap(), &rgb);
            }
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..96)) {
            let _ = decode(&bytes, None);
            let _ = decode(&bytes, Some(ImageFormat::Bmp));
        }
    }

    #[test]
    fn round_trip_random_5x7_rgb() {
        let img = ImageRecord::from_fn("", 5, 7, PixelMode::Rgb8, |x, y, c| {
            (x * 37 + y * 11 + c * 101) as u8
        })
        .unwrap();
        let bytes = encode(&img, ImageFormat::Ppm).unwrap();
        assert_eq!(decode(&bytes, None).unwrap().data(), img.data());
    }
}
