//! Readers and writers for the toolkit's file formats.
//!
//! * RF64: `"RF64"`, u32 flags (bit 0 = complex), u32 n_x, u32 n_y, f64 L,
//!   then row-major f64 values (re, im pairs when complex).
//! * WVSG: `"WVSG"`, u32 version (= 1), u32 n_angles, u32 n_y, f64 L,
//!   f64 L/lambda, f64 angles[n_angles], then row-major complex pairs.
//! * PGM: netpbm binary greymap (P5), 8 or 16 bit, big-endian samples.
//!
//! All binary integers and floats are little-endian except PGM samples.

mod config;
mod pgm;

pub use config::{known_keys, parse_config, read_config, ToolConfig};
pub use pgm::{read_pgm, read_pgm_bytes, write_pgm, write_pgm_bytes, PgmImage};

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, RealField};
use crate::paraxial::{Sinogram, WaveParams};

const RF64_MAGIC: &[u8; 4] = b"RF64";
const WVSG_MAGIC: &[u8; 4] = b"WVSG";
const WVSG_VERSION: u32 = 1;

/// Payload of an RF64 file.
#[derive(Debug, Clone, PartialEq)]
pub enum Rf64Field {
    Real(RealField),
    Complex(ComplexField),
}

impl Rf64Field {
    pub fn grid(&self) -> &Grid2D {
        match self {
            Rf64Field::Real(f) => f.grid(),
            Rf64Field::Complex(f) => f.grid(),
        }
    }

    pub fn into_real(self) -> Result<RealField> {
        match self {
            Rf64Field::Real(f) => Ok(f),
            Rf64Field::Complex(_) => Err(Error::UnsupportedFormat(
                "expected a real RF64 field, found complex".into(),
            )),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedPayload {
                expected: self.pos + n,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::CorruptHeader(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn header_err(what: &str) -> Error {
    Error::CorruptHeader(what.to_string())
}

fn payload_len(count: usize, per: usize, header: usize) -> Result<usize> {
    count
        .checked_mul(per)
        .and_then(|b| b.checked_add(header))
        .ok_or_else(|| header_err("dimensions overflow"))
}

pub fn encode_rf64(field: &Rf64Field) -> Result<Vec<u8>> {
    let grid = *field.grid();
    let mut out = Vec::with_capacity(24 + grid.len() * 16);
    out.extend_from_slice(RF64_MAGIC);
    let complex = matches!(field, Rf64Field::Complex(_));
    out.extend_from_slice(&(complex as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_x() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_y() as u32).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    match field {
        Rf64Field::Real(f) => {
            for v in f.values().iter() {
                if !v.is_finite() {
                    return Err(Error::NonFinite("RF64 payload"));
                }
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Rf64Field::Complex(f) => {
            for v in f.values().iter() {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite("RF64 payload"));
                }
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_rf64(bytes: &[u8]) -> Result<Rf64Field> {
    let mut cur = Cursor::new(bytes);
    if cur
        .take(4)
        .map_err(|_| header_err("file shorter than magic"))?
        != RF64_MAGIC
    {
        return Err(header_err("bad RF64 magic"));
    }
    let flags = cur.u32()?;
    if flags & !1 != 0 {
        return Err(Error::CorruptHeader(format!(
            "unknown RF64 flag bits {flags:#x}"
        )));
    }
    let n_x = cur.u32()? as usize;
    let n_y = cur.u32()? as usize;
    let length = cur.f64()?;
    let grid = Grid2D::new(n_x, n_y, length).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let complex = flags & 1 == 1;
    let per = if complex { 16 } else { 8 };
    let expected = payload_len(grid.len(), per, 24)?;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let field = if complex {
        let mut vals = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = cur.f64()?;
            let im = cur.f64()?;
            vals.push(Complex64::new(re, im));
        }
        let arr = Array2::from_shape_vec(grid.shape(), vals).expect("length checked");
        Rf64Field::Complex(ComplexField::new(grid, arr)?)
    } else {
        let mut vals = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            vals.push(cur.f64()?);
        }
        let arr = Array2::from_shape_vec(grid.shape(), vals).expect("length checked");
        Rf64Field::Real(RealField::new(grid, arr)?)
    };
    cur.finish()?;
    Ok(field)
}

pub fn write_rf64(path: impl AsRef<Path>, field: &Rf64Field) -> Result<()> {
    let bytes = encode_rf64(field)?;
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_rf64(path: impl AsRef<Path>) -> Result<Rf64Field> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    decode_rf64(&bytes)
}

pub fn write_real_rf64(path: impl AsRef<Path>, field: &RealField) -> Result<()> {
    write_rf64(path, &Rf64Field::Real(field.clone()))
}

pub fn encode_wvsg(sino: &Sinogram) -> Result<Vec<u8>> {
    let n_a = sino.angles().len();
    let n_y = sino.n_y();
    let mut out = Vec::with_capacity(32 + 8 * n_a + 16 * n_a * n_y);
    out.extend_from_slice(WVSG_MAGIC);
    out.extend_from_slice(&WVSG_VERSION.to_le_bytes());
    out.extend_from_slice(&(n_a as u32).to_le_bytes());
    out.extend_from_slice(&(n_y as u32).to_le_bytes());
    out.extend_from_slice(&sino.params().length().to_le_bytes());
    out.extend_from_slice(&sino.params().l_over_lambda().to_le_bytes());
    for a in sino.angles() {
        out.extend_from_slice(&a.to_le_bytes());
    }
    for v in sino.values().iter() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("WVSG payload"));
        }
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_wvsg(bytes: &[u8]) -> Result<Sinogram> {
    let mut cur = Cursor::new(bytes);
    if cur
        .take(4)
        .map_err(|_| header_err("file shorter than magic"))?
        != WVSG_MAGIC
    {
        return Err(header_err("bad WVSG magic"));
    }
    let version = cur.u32()?;
    if version != WVSG_VERSION {
        return Err(Error::CorruptHeader(format!(
            "unsupported WVSG version {version}"
        )));
    }
    let n_a = cur.u32()? as usize;
    let n_y = cur.u32()? as usize;
    if n_a == 0 {
        return Err(header_err("sinogram has no angles"));
    }
    if n_y < 2 {
        return Err(header_err("sinogram needs at least 2 transverse samples"));
    }
    let length = cur.f64()?;
    let ratio = cur.f64()?;
    let params = WaveParams::new(length, ratio).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let expected = payload_len(n_a, 8 + 16 * n_y, 32)?;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let mut angles = Vec::with_capacity(n_a);
    for _ in 0..n_a {
        angles.push(cur.f64()?);
    }
    let mut vals = Vec::with_capacity(n_a * n_y);
    for _ in 0..n_a * n_y {
        let re = cur.f64()?;
        let im = cur.f64()?;
        vals.push(Complex64::new(re, im));
    }
    cur.finish()?;
    let arr = Array2::from_shape_vec((n_a, n_y), vals).expect("length checked");
    Sinogram::new(angles, arr, params).map_err(|e| Error::CorruptHeader(e.to_string()))
}

pub fn write_wvsg(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    let bytes = encode_wvsg(sino)?;
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_wvsg(path: impl AsRef<Path>) -> Result<Sinogram> {
    let bytes = fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    decode_wvsg(&bytes)
}

/// Renders a field as a 16-bit PGM with the linear window `[min, max]`.
///
/// Row `i` of the image is the grid's `x` index. Returns the window used.
pub fn render_pgm16(field: &RealField) -> (PgmImage, f64, f64) {
    let (lo, hi) = field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let data = field
        .values()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    let (n_x, n_y) = field.grid().shape();
    (
        PgmImage {
            width: n_y,
            height: n_x,
            maxval: 65535,
            data,
        },
        lo,
        hi,
    )
}

/// Writes a 16-bit PGM rendering plus a `<path>.window.txt` sidecar with the window.
pub fn write_pgm_rendering(path: impl AsRef<Path>, field: &RealField) -> Result<()> {
    let path = path.as_ref();
    let (img, lo, hi) = render_pgm16(field);
    write_pgm(path, &img)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".window.txt");
    let text = format!("window_min = {lo:e}\nwindow_max = {hi:e}\n");
    fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))
}
