use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Binary greymap. `data` is row-major, `height` rows of `width` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl PgmImage {
    pub fn bytes_per_sample(&self) -> usize {
        if self.maxval < 256 {
            1
        } else {
            2
        }
    }
}

pub fn write_pgm_bytes(img: &PgmImage) -> Result<Vec<u8>> {
    if img.maxval == 0 {
        return Err(Error::InvalidInput("PGM maxval must be at least 1".into()));
    }
    if img.data.len() != img.width * img.height {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", img.width, img.height),
            got: img.data.len().to_string(),
        });
    }
    if let Some(v) = img.data.iter().find(|&&v| v > img.maxval) {
        return Err(Error::InvalidInput(format!(
            "sample {v} exceeds maxval {}",
            img.maxval
        )));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.bytes_per_sample() == 1 {
        out.extend(img.data.iter().map(|&v| v as u8));
    } else {
        for &v in &img.data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &PgmImage) -> Result<()> {
    let bytes = write_pgm_bytes(img)?;
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<PgmImage> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    read_pgm_bytes(&bytes)
}

/// Parses a P5 file; `#` comments are allowed between header tokens.
pub fn read_pgm_bytes(bytes: &[u8]) -> Result<PgmImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat(
            "not a binary PGM (P5) file".into(),
        ));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptHeader("PGM header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptHeader(
                "expected a number in PGM header".into(),
            ));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| Error::CorruptHeader(format!("PGM header value `{text}` too large")))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::CorruptHeader(
                "missing separator after maxval".into(),
            ))
        }
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(Error::CorruptHeader("PGM has zero width or height".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptHeader(format!(
            "PGM maxval {maxval} out of range"
        )));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptHeader("PGM dimensions overflow".into()))?;
    let expected = count
        .checked_mul(bps)
        .and_then(|n| n.checked_add(pos))
        .ok_or_else(|| Error::CorruptHeader("PGM dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let raster = &bytes[pos..expected];
    let data: Vec<u16> = if bps == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if data.iter().any(|&v| v as usize > maxval) {
        return Err(Error::CorruptHeader("PGM sample exceeds maxval".into()));
    }
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        data,
    })
}
