//! Binary portable graymap (`P5`) reader and writer.
//!
//! Header tokens are separated by ASCII whitespace and may be interleaved
//! with `#` comments. Exactly one whitespace byte follows the maxval, then
//! the raster starts.

use thiserror::Error;

use super::GrayImage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("unsupported magic {found:?} at byte 0 (only binary P5 graymaps are read)")]
    UnsupportedMagic { found: String },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported maxval {maxval} at byte {offset} (must be 1..=255)")]
    UnsupportedMaxval { offset: usize, maxval: u32 },
    #[error("truncated raster at byte {offset}: expected {expected} pixel bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("pixel value {value} at byte {offset} exceeds maxval {maxval}")]
    PixelAboveMaxval { offset: usize, value: u8, maxval: u32 },
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
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

    fn read_uint(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            let reason = match self.bytes.get(self.pos) {
                None => format!("unexpected end of data while reading {what}"),
                Some(b) => format!("expected decimal {what}, found byte 0x{b:02x}"),
            };
            return Err(PgmError::MalformedHeader {
                offset: self.pos,
                reason,
            });
        }
        // Digits only, so the slice is valid UTF-8.
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u32>().map_err(|_| PgmError::MalformedHeader {
            offset: start,
            reason: format!("{what} {text} does not fit in 32 bits"),
        })
    }
}

/// Parses a binary `P5` graymap with maxval at most 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PgmError::UnsupportedMagic { found });
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => {
            return Err(PgmError::MalformedHeader {
                offset: 2,
                reason: "magic must be followed by whitespace".into(),
            })
        }
    }
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval_offset = {
        cur.skip_whitespace_and_comments();
        cur.pos
    };
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader {
            offset: maxval_offset,
            reason: format!("image dimensions {width}x{height} must be positive"),
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedMaxval {
            offset: maxval_offset,
            maxval,
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(b) => {
            return Err(PgmError::MalformedHeader {
                offset: cur.pos,
                reason: format!("expected single whitespace after maxval, found byte 0x{b:02x}"),
            })
        }
        None => {
            return Err(PgmError::Truncated {
                offset: cur.pos,
                expected: width as usize * height as usize,
                found: 0,
            })
        }
    }

    let expected = width as usize * height as usize;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(PgmError::Truncated {
            offset: cur.pos + raster.len(),
            expected,
            found: raster.len(),
        });
    }
    let pixels = raster[..expected].to_vec();
    if maxval < 255 {
        if let Some(i) = pixels.iter().position(|&p| u32::from(p) > maxval) {
            return Err(PgmError::PixelAboveMaxval {
                offset: cur.pos + i,
                value: pixels[i],
                maxval,
            });
        }
    }
    Ok(GrayImage::new(width as usize, height as usize, pixels).expect("dimensions checked"))
}

/// Serializes an image as `P5` with maxval 255.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_by_two() {
        let mut bytes = b"P5 2 2 255 ".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 7]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 128, 255, 7]);
    }

    #[test]
    fn raster_may_start_with_whitespace_byte_values() {
        // 0x0a and 0x20 are pixel data here, not header whitespace.
        let mut bytes = b"P5\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0x0a, 0x20, 0x09]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[0x0a, 0x20, 0x09]);
    }

    #[test]
    fn comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2]);
        assert_eq!(load_pgm(&bytes).unwrap().pixels(), &[1, 2]);
    }

    #[test]
    fn rejects_color_magic() {
        let err = load_pgm(b"P6 1 1 255 abc").unwrap_err();
        assert!(matches!(err, PgmError::UnsupportedMagic { ref found } if found == "P6"));
    }

    #[test]
    fn rejects_sixteen_bit() {
        let err = load_pgm(b"P5 1 1 65535 ab").unwrap_err();
        assert_eq!(
            err,
            PgmError::UnsupportedMaxval {
                offset: 7,
                maxval: 65535
            }
        );
    }

    #[test]
    fn reports_truncation_offset() {
        let err = load_pgm(b"P5 2 2 255 abc").unwrap_err();
        assert_eq!(
            err,
            PgmError::Truncated {
                offset: 14,
                expected: 4,
                found: 3
            }
        );
    }

    #[test]
    fn reports_garbage_in_header() {
        let err = load_pgm(b"P5 2 x 255 abcd").unwrap_err();
        match err {
            PgmError::MalformedHeader { offset, .. } => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pixel_above_maxval() {
        let err = load_pgm(b"P5 2 1 15 \x03\x10").unwrap_err();
        assert!(matches!(err, PgmError::PixelAboveMaxval { offset: 11, value: 16, .. }));
    }

    #[test]
    fn full_size_round_trip() {
        let pixels: Vec<u8> = (0..512 * 512).map(|i| (i % 251) as u8).collect();
        let img = GrayImage::new(512, 512, pixels).unwrap();
        let back = load_pgm(&write_pgm(&img)).unwrap();
        assert_eq!(back, img);
    }
}
