//! PGM and raw little-endian f32 image files.
//!
//! * PGM: ASCII `P2` or binary `P5`, 2D only. Samples wider than 8 bits are
//!   big-endian 16-bit. The declared range of a loaded image is `(0, maxval)`.
//! * rawf32: a headerless little-endian `f32` payload in row-major order plus a
//!   sidecar `<path>.meta` holding `{"dims": [h, w] | [d, h, w], "dtype": "f32le"}`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    RawF32,
}

impl ImageFormat {
    /// Guesses the format from the file extension (`.pgm` or `.raw`/`.f32`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("raw") | Some("f32") | Some("rawf32") => Ok(ImageFormat::RawF32),
            _ => Err(Error::format(path, "cannot infer image format from extension (use .pgm or .raw)")),
        }
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm" => Ok(ImageFormat::Pgm),
            "rawf32" => Ok(ImageFormat::RawF32),
            other => Err(Error::InvalidParam(format!("unknown image format `{other}`"))),
        }
    }
}

/// Sidecar metadata of a rawf32 file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMeta {
    /// `[h, w]` or `[d, h, w]`.
    pub dims: Vec<usize>,
    pub dtype: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn load_image(path: impl AsRef<Path>, format: ImageFormat) -> Result<Image> {
    let path = path.as_ref();
    match format {
        ImageFormat::Pgm => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_pgm(&bytes).map_err(|msg| Error::format(path, msg))
        }
        ImageFormat::RawF32 => load_rawf32(path),
    }
}

/// Loads using the format implied by the extension.
pub fn load_image_auto(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    load_image(path, ImageFormat::from_path(path)?)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ImageFormat::Pgm => encode_pgm(img).map_err(|msg| Error::format(path, msg))?,
        ImageFormat::RawF32 => {
            let (meta, payload) = encode_rawf32(img).map_err(|msg| Error::format(path, msg))?;
            let mp = meta_path(path);
            fs::write(&mp, serde_json::to_string(&meta)?).map_err(|e| Error::io(&mp, e))?;
            payload
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_image_auto(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_image(img, path, ImageFormat::from_path(path)?)
}

fn load_rawf32(path: &Path) -> Result<Image> {
    let mp = meta_path(path);
    let meta_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: RawMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::format(&mp, format!("bad sidecar: {e}")))?;
    if meta.dtype != "f32le" {
        return Err(Error::format(&mp, format!("unsupported dtype `{}`", meta.dtype)));
    }
    let dims = match *meta.dims.as_slice() {
        [h, w] => Dims::new_2d(w, h),
        [d, h, w] => Dims::new_3d(w, h, d),
        _ => return Err(Error::format(&mp, "dims must have 2 or 3 entries")),
    };
    dims.validate().map_err(|e| Error::format(&mp, e.to_string()))?;
    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    if payload.len() != dims.len() * 4 {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, dims {dims} need {}", payload.len(), dims.len() * 4),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Image::new(dims, data).map_err(|e| Error::format(path, e.to_string()))
}

/// Values are rounded to `f32`; images whose values are all `f32`-representable
/// round-trip bit-exactly.
fn encode_rawf32(img: &Image) -> Result<(RawMeta, Vec<u8>), String> {
    let d = img.dims();
    let dims = match d.depth {
        Some(z) => vec![z, d.height, d.width],
        None => vec![d.height, d.width],
    };
    let mut payload = Vec::with_capacity(img.len() * 4);
    for &v in img.data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(format!("value {v} overflows f32"));
        }
        payload.extend_from_slice(&f.to_le_bytes());
    }
    Ok((
        RawMeta {
            dims,
            dtype: "f32le".into(),
        },
        payload,
    ))
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
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

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.bytes[start..self.pos]).ok())?
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("missing {what}"))?;
        tok.parse().map_err(|_| format!("bad {what} `{tok}`"))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<Image, String> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let binary = match r.token() {
        Some("P2") => false,
        Some("P5") => true,
        other => return Err(format!("bad magic {other:?}, expected P2 or P5")),
    };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero width or height".into());
    }
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let n = width * height;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = r.pos + 1;
        let sample = if maxval < 256 { 1 } else { 2 };
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() != n * sample {
            return Err(format!(
                "raster has {} bytes, {width}x{height} needs {}",
                raster.len(),
                n * sample
            ));
        }
        for c in raster.chunks_exact(sample) {
            let v = if sample == 1 {
                usize::from(c[0])
            } else {
                usize::from(u16::from_be_bytes([c[0], c[1]]))
            };
            data.push(v);
        }
    } else {
        for i in 0..n {
            data.push(r.number(&format!("sample {i}"))?);
        }
        if r.token().is_some() {
            return Err(format!("more than {n} samples"));
        }
    }
    if let Some(v) = data.iter().find(|&&v| v > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    let data = data.into_iter().map(|v| v as f64).collect();
    Image::new_2d(width, height, data)
        .and_then(|img| img.with_declared_range(0.0, maxval as f64))
        .map_err(|e| e.to_string())
}

fn encode_pgm(img: &Image) -> Result<Vec<u8>, String> {
    let d = img.dims();
    if d.is_3d() {
        return Err("PGM holds 2D images only".into());
    }
    for &v in img.data() {
        if v.fract() != 0.0 || !(0.0..=65535.0).contains(&v) {
            return Err(format!("value {v} is not an integer in [0, 65535]"));
        }
    }
    let max = img.stats().max;
    let maxval: u32 = match img.declared_range() {
        Some((lo, hi)) if lo == 0.0 && (hi == 255.0 || hi == 65535.0) && max <= hi => hi as u32,
        _ if max <= 255.0 => 255,
        _ => 65535,
    };
    let mut out = format!("P5\n{} {}\n{}\n", d.width, d.height, maxval).into_bytes();
    for &v in img.data() {
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    }
    Ok(out)
}
