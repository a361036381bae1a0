//! Binary PPM (P6, maxval 255) reading and writing.

use crate::roi::{FrameDims, PixelFrame};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a binary P6 ppm")]
    BadMagic,
    #[error("malformed ppm header")]
    BadHeader,
    #[error("unsupported maxval {0}, only 255")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
}

pub fn read_ppm(path: &Path) -> Result<PixelFrame, PpmError> {
    parse_ppm(&fs::read(path)?)
}

pub fn parse_ppm(raw: &[u8]) -> Result<PixelFrame, PpmError> {
    if raw.len() < 2 || &raw[..2] != b"P6" {
        return Err(PpmError::BadMagic);
    }
    let mut pos = 2;
    let width = next_header_value(raw, &mut pos)?;
    let height = next_header_value(raw, &mut pos)?;
    let maxval = next_header_value(raw, &mut pos)?;
    if maxval != 255 {
        return Err(PpmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= raw.len() || !raw[pos].is_ascii_whitespace() {
        return Err(PpmError::BadHeader);
    }
    pos += 1;

    let dims = FrameDims::new(width, height).map_err(|_| PpmError::BadHeader)?;
    let expected = width as usize * height as usize * 3;
    let data = &raw[pos..];
    if data.len() < expected {
        return Err(PpmError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    PixelFrame::new(dims, data[..expected].to_vec()).map_err(|_| PpmError::BadHeader)
}

/// Skips whitespace and `#` comments, then reads one decimal value.
fn next_header_value(raw: &[u8], pos: &mut usize) -> Result<u32, PpmError> {
    loop {
        while *pos < raw.len() && raw[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < raw.len() && raw[*pos] == b'#' {
            while *pos < raw.len() && raw[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < raw.len() && raw[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(PpmError::BadHeader);
    }
    std::str::from_utf8(&raw[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PpmError::BadHeader)
}

pub fn encode_ppm(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_ppm(path: &Path, width: u32, height: u32, pixels: &[u8]) -> Result<(), PpmError> {
    debug_assert_eq!(pixels.len(), width as usize * height as usize * 3);
    fs::write(path, encode_ppm(width, height, pixels))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let pixels: Vec<u8> = (0..5 * 4 * 3).map(|i| (i % 256) as u8).collect();
        let bytes = encode_ppm(5, 4, &pixels);
        let frame = parse_ppm(&bytes).unwrap();
        assert_eq!(frame.dims().width, 5);
        assert_eq!(frame.dims().height, 4);
        assert_eq!(frame.pixels(), &pixels[..]);
    }

    #[test]
    fn comments_in_header_are_skipped() {
        let mut bytes = b"P6\n# camera 3\n2 1\n# maxval next\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let frame = parse_ppm(&bytes).unwrap();
        assert_eq!(frame.dims().width, 2);
        assert_eq!(frame.pixels(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(matches!(parse_ppm(b"P3\n1 1\n255\n"), Err(PpmError::BadMagic)));
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"P6\n2 2\n255\n\x01\x02\x03".to_vec();
        assert!(matches!(parse_ppm(&bytes), Err(PpmError::Truncated { .. })));
    }

    #[test]
    fn wide_maxval_is_rejected() {
        assert!(matches!(
            parse_ppm(b"P6\n1 1\n65535\n\x00\x00"),
            Err(PpmError::UnsupportedMaxval(65535))
        ));
    }
}
