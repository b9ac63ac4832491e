//! Netpbm grayscale (PGM) reading and writing.
//!
//! Both the ASCII (`P2`) and binary (`P5`) variants are read, with `#`
//! comments allowed in the header and 16-bit big-endian samples when
//! `maxval > 255`. Writing always produces 8-bit `P5`.

use std::fs;
use std::path::Path;

use super::mask::SamplingMask;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    /// Raw sample values.
    pub pixels: Matrix,
    pub maxval: u32,
}

impl Pgm {
    /// Samples divided by `maxval`, so that values lie in `[0, 1]`.
    pub fn normalized(&self) -> Matrix {
        self.pixels.scale(1.0 / self.maxval as f64)
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Pgm> {
    parse_pgm(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("unexpected end of file");
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Parse {
            offset: start,
            message: "non-ASCII token".into(),
        })
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let at = self.pos;
        let tok = self.token()?;
        tok.parse::<u32>().map_err(|_| Error::Parse {
            offset: at,
            message: format!("invalid {what} {tok:?}"),
        })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let binary = match magic {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unsupported magic {other:?}, expected P2 or P5"),
            })
        }
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return cur.err("image dimensions must be positive");
    }
    if maxval == 0 || maxval > 65535 {
        return cur.err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width * height;
    let mut data = Vec::with_capacity(count);

    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return cur.err("missing whitespace after maxval");
        }
        cur.pos += 1;
        let sample = if maxval > 255 { 2 } else { 1 };
        let need = count * sample;
        let have = bytes.len() - cur.pos;
        if have < need {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!(
                    "payload truncated: expected {need} bytes, found {have} (missing {})",
                    need - have
                ),
            });
        }
        let raster = &bytes[cur.pos..cur.pos + need];
        for k in 0..count {
            let v = if sample == 2 {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as u32
            } else {
                raster[k] as u32
            };
            if v > maxval {
                return Err(Error::Parse {
                    offset: cur.pos + k * sample,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            data.push(v as f64);
        }
    } else {
        for k in 0..count {
            cur.skip_space_and_comments();
            if cur.pos >= bytes.len() {
                return cur.err(format!("expected {count} samples, found {k}"));
            }
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::Parse {
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            data.push(v as f64);
        }
    }
    Ok(Pgm {
        pixels: Matrix::from_vec(height, width, data)?,
        maxval,
    })
}

/// Writes `x` as 8-bit binary PGM; entries are clamped to `[0, 255]` and
/// rounded.
pub fn write_pgm(x: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_p5(x))?;
    Ok(())
}

fn encode_p5(x: &Matrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", x.cols(), x.rows()).into_bytes();
    out.extend(x.as_slice().iter().map(|&v| {
        let v = if v.is_nan() { 0.0 } else { v };
        v.clamp(0.0, 255.0).round() as u8
    }));
    out
}

/// Masks are stored as PGM with 0 for missing and 255 for observed entries.
pub fn write_mask_pgm(mask: &SamplingMask, path: impl AsRef<Path>) -> Result<()> {
    let x = Matrix::from_fn(mask.rows(), mask.cols(), |i, j| {
        if mask.is_observed(i, j) {
            255.0
        } else {
            0.0
        }
    });
    write_pgm(&x, path)
}

/// Any nonzero sample counts as observed.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<SamplingMask> {
    let pgm = read_pgm(path)?;
    let (r, c) = pgm.pixels.shape();
    SamplingMask::new(
        r,
        c,
        pgm.pixels.as_slice().iter().map(|&v| v > 0.0).collect(),
    )
}
