//! Raw planar I420 (4:2:0, 8-bit, headerless) video.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum YuvError {
    #[error("file length {len} is not a multiple of the {frame_bytes}-byte frame size")]
    TruncatedFile { len: usize, frame_bytes: usize },
    #[error("bad dimensions {width}x{height}: both must be even and non-zero")]
    BadDimensions { width: usize, height: usize },
    #[error("plane size mismatch in frame {frame}")]
    PlaneSize { frame: usize },
    #[error("sample {value} exceeds {bit_depth}-bit range")]
    SampleOutOfRange { value: u8, bit_depth: u8 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YuvFrame {
    pub width: usize,
    pub height: usize,
    pub y: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
}

impl YuvFrame {
    pub fn filled(width: usize, height: usize, y: u8, u: u8, v: u8) -> Self {
        let c = (width / 2) * (height / 2);
        YuvFrame { width, height, y: vec![y; width * height], u: vec![u; c], v: vec![v; c] }
    }

    /// Black picture (zero luma, neutral chroma).
    pub fn black(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0, 128, 128)
    }

    /// Every plane zero.
    pub fn zero(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0, 0, 0)
    }

    pub fn byte_len(width: usize, height: usize) -> usize {
        width * height + 2 * (width / 2) * (height / 2)
    }

    pub fn is_well_formed(&self) -> bool {
        let c = (self.width / 2) * (self.height / 2);
        self.y.len() == self.width * self.height && self.u.len() == c && self.v.len() == c
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.y)?;
        w.write_all(&self.u)?;
        w.write_all(&self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YuvSequence {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub frames: Vec<YuvFrame>,
}

impl YuvSequence {
    pub fn new(width: usize, height: usize) -> Result<Self, YuvError> {
        check_dims(width, height)?;
        Ok(YuvSequence { width, height, bit_depth: 8, frames: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_bytes(&self) -> usize {
        YuvFrame::byte_len(self.width, self.height)
    }

    pub fn push(&mut self, frame: YuvFrame) -> Result<(), YuvError> {
        if frame.width != self.width || frame.height != self.height || !frame.is_well_formed() {
            return Err(YuvError::PlaneSize { frame: self.frames.len() });
        }
        self.frames.push(frame);
        Ok(())
    }

    /// Keep only the first `n` frames.
    pub fn truncate(&mut self, n: usize) {
        self.frames.truncate(n);
    }

    pub fn from_bytes(bytes: &[u8], width: usize, height: usize) -> Result<Self, YuvError> {
        check_dims(width, height)?;
        let fb = YuvFrame::byte_len(width, height);
        if !bytes.len().is_multiple_of(fb) {
            return Err(YuvError::TruncatedFile { len: bytes.len(), frame_bytes: fb });
        }
        let luma = width * height;
        let chroma = (width / 2) * (height / 2);
        let frames = bytes
            .chunks_exact(fb)
            .map(|c| YuvFrame {
                width,
                height,
                y: c[..luma].to_vec(),
                u: c[luma..luma + chroma].to_vec(),
                v: c[luma + chroma..].to_vec(),
            })
            .collect();
        Ok(YuvSequence { width, height, bit_depth: 8, frames })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * self.frame_bytes());
        for f in &self.frames {
            f.write_to(&mut out).expect("writing to a Vec cannot fail");
        }
        out
    }

    /// Checks that every sample fits in `bit_depth` bits.
    pub fn validate_samples(&self) -> Result<(), YuvError> {
        if self.bit_depth >= 8 {
            return Ok(());
        }
        let max = (1u16 << self.bit_depth) - 1;
        for f in &self.frames {
            for &s in f.y.iter().chain(&f.u).chain(&f.v) {
                if u16::from(s) > max {
                    return Err(YuvError::SampleOutOfRange { value: s, bit_depth: self.bit_depth });
                }
            }
        }
        Ok(())
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), YuvError> {
    if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(YuvError::BadDimensions { width, height });
    }
    Ok(())
}

pub fn load_yuv(path: impl AsRef<Path>, width: usize, height: usize) -> Result<YuvSequence, YuvError> {
    check_dims(width, height)?;
    let bytes = fs::read(path)?;
    YuvSequence::from_bytes(&bytes, width, height)
}

pub fn store_yuv(seq: &YuvSequence, path: impl AsRef<Path>) -> Result<(), YuvError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for f in &seq.frames {
        f.write_to(&mut w)?;
    }
    w.flush()?;
    Ok(())
}
