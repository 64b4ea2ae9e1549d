//! Deterministic distortions: intensity transforms, integer translation,
//! mirroring, seeded Gaussian noise, stripes, Gaussian blur and symmetric
//! cropping.
//!
//! A [`DistortionSpec`] serializes as `{"kind": ..., "params": {...}, "seed": n}`
//! and renders compactly as `kind(key=value,...)`; a [`Chain`] is a JSON array
//! applied left to right and renders as its steps joined by `>`.
//!
//! Noise uses ChaCha20 (key = seed as 8 little-endian bytes followed by 24 zero
//! bytes, nonce 0, counter 0). Each 64-bit draw becomes a uniform
//! `u = (draw >> 11) * 2^-53`; consecutive pairs `(u1, u2)` give two standard
//! normals by Box-Muller, `sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)`, used for
//! consecutive pixels in row-major order.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::image::{Dims, Image, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::InvalidParam(format!("unknown axis `{s}` (expected x, y or z)"))),
        }
    }
}

/// One distortion with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum DistortionSpec {
    Gamma { gamma: f64 },
    LinearScale { factor: f64 },
    Translate { dx: i64, dy: i64, dz: i64 },
    MirrorReplace { axis: Axis },
    GaussianNoise { sigma_rel: f64, seed: u64 },
    Stripes { period: usize, amplitude_rel: f64, axis: Axis },
    GaussianBlur { sigma: f64 },
    CropFraction { fraction: f64 },
}

pub const DISTORTION_KINDS: [&str; 8] = [
    "gamma",
    "linear_scale",
    "translate",
    "mirror_replace",
    "gaussian_noise",
    "stripes",
    "gaussian_blur",
    "crop_fraction",
];

impl DistortionSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DistortionSpec::Gamma { .. } => "gamma",
            DistortionSpec::LinearScale { .. } => "linear_scale",
            DistortionSpec::Translate { .. } => "translate",
            DistortionSpec::MirrorReplace { .. } => "mirror_replace",
            DistortionSpec::GaussianNoise { .. } => "gaussian_noise",
            DistortionSpec::Stripes { .. } => "stripes",
            DistortionSpec::GaussianBlur { .. } => "gaussian_blur",
            DistortionSpec::CropFraction { .. } => "crop_fraction",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        match *self {
            DistortionSpec::Gamma { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                bad(format!("gamma must be > 0, got {gamma}"))
            }
            DistortionSpec::LinearScale { factor } if factor == 0.0 || !factor.is_finite() => {
                bad(format!("linear_scale factor must be finite and nonzero, got {factor}"))
            }
            DistortionSpec::GaussianNoise { sigma_rel, .. } if !(sigma_rel >= 0.0 && sigma_rel.is_finite()) => {
                bad(format!("noise sigma_rel must be >= 0, got {sigma_rel}"))
            }
            DistortionSpec::Stripes { period, amplitude_rel, .. } if period < 2 || !amplitude_rel.is_finite() => {
                bad(format!("stripes need period >= 2 and a finite amplitude, got {period}, {amplitude_rel}"))
            }
            DistortionSpec::GaussianBlur { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("blur sigma must be > 0, got {sigma}"))
            }
            DistortionSpec::CropFraction { fraction } if !(fraction > 0.0 && fraction < 0.5) => {
                bad(format!("crop fraction must lie in (0, 0.5), got {fraction}"))
            }
            _ => Ok(()),
        }
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        match *self {
            DistortionSpec::Gamma { gamma } => vec![("gamma", gamma.to_string())],
            DistortionSpec::LinearScale { factor } => vec![("factor", factor.to_string())],
            DistortionSpec::Translate { dx, dy, dz } => {
                let mut v = vec![("dx", dx.to_string()), ("dy", dy.to_string())];
                if dz != 0 {
                    v.push(("dz", dz.to_string()));
                }
                v
            }
            DistortionSpec::MirrorReplace { axis } => vec![("axis", axis.to_string())],
            DistortionSpec::GaussianNoise { sigma_rel, seed } => {
                vec![("sigma_rel", sigma_rel.to_string()), ("seed", seed.to_string())]
            }
            DistortionSpec::Stripes {
                period,
                amplitude_rel,
                axis,
            } => vec![
                ("period", period.to_string()),
                ("amplitude_rel", amplitude_rel.to_string()),
                ("axis", axis.to_string()),
            ],
            DistortionSpec::GaussianBlur { sigma } => vec![("sigma", sigma.to_string())],
            DistortionSpec::CropFraction { fraction } => vec![("fraction", fraction.to_string())],
        }
    }

    fn from_kind(kind: &str, get: &mut dyn FnMut(&str) -> Result<Option<String>>) -> Result<Self> {
        fn need<T: FromStr>(key: &str, v: Option<String>) -> Result<T> {
            let raw = v.ok_or_else(|| Error::InvalidParam(format!("missing parameter `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::InvalidParam(format!("parameter `{key}` has bad value `{raw}`")))
        }
        fn opt<T: FromStr>(key: &str, v: Option<String>, default: T) -> Result<T> {
            match v {
                None => Ok(default),
                v => need(key, v),
            }
        }
        let spec = match kind {
            "gamma" => DistortionSpec::Gamma {
                gamma: need("gamma", get("gamma")?)?,
            },
            "linear_scale" => DistortionSpec::LinearScale {
                factor: need("factor", get("factor")?)?,
            },
            "translate" => DistortionSpec::Translate {
                dx: opt("dx", get("dx")?, 0)?,
                dy: opt("dy", get("dy")?, 0)?,
                dz: opt("dz", get("dz")?, 0)?,
            },
            "mirror_replace" => DistortionSpec::MirrorReplace {
                axis: opt("axis", get("axis")?, Axis::Y)?,
            },
            "gaussian_noise" => DistortionSpec::GaussianNoise {
                sigma_rel: need("sigma_rel", get("sigma_rel")?)?,
                seed: need("seed", get("seed")?)?,
            },
            "stripes" => DistortionSpec::Stripes {
                period: opt("period", get("period")?, 8)?,
                amplitude_rel: opt("amplitude_rel", get("amplitude_rel")?, 0.25)?,
                axis: opt("axis", get("axis")?, Axis::Y)?,
            },
            "gaussian_blur" => DistortionSpec::GaussianBlur {
                sigma: need("sigma", get("sigma")?)?,
            },
            "crop_fraction" => DistortionSpec::CropFraction {
                fraction: need("fraction", get("fraction")?)?,
            },
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown distortion kind `{other}` (expected one of {})",
                    DISTORTION_KINDS.join(", ")
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DistortionSpec {
    /// `kind(key=value,...)`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}({})", self.kind(), params.join(","))
    }
}

impl FromStr for DistortionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("malformed distortion `{s}`, expected kind(key=value,...)"));
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut pairs = Vec::new();
        for part in body.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            pairs.push((k.to_string(), Some(v.to_string())));
        }
        let spec = DistortionSpec::from_kind(kind, &mut |key| {
            Ok(pairs.iter_mut().find(|(k, _)| k == key).and_then(|(_, v)| v.take()))
        })?;
        if let Some((k, _)) = pairs.iter().find(|(_, v)| v.is_some()) {
            return Err(Error::InvalidParam(format!("unknown parameter `{k}` for `{kind}`")));
        }
        Ok(spec)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    #[serde(default)]
    params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl TryFrom<RawSpec> for DistortionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let RawSpec { kind, mut params, seed } = raw;
        if seed.is_some() && kind != "gaussian_noise" {
            return Err(Error::InvalidParam(format!("`{kind}` takes no seed")));
        }
        let mut seed = seed.map(|s| s.to_string());
        let spec = DistortionSpec::from_kind(&kind, &mut |key| {
            if key == "seed" {
                return Ok(seed.take());
            }
            match params.remove(key) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s)),
                Some(Value::Number(n)) => Ok(Some(n.to_string())),
                Some(other) => Err(Error::InvalidParam(format!("parameter `{key}` has bad value {other}"))),
            }
        })?;
        if let Some(k) = params.keys().next() {
            return Err(Error::InvalidParam(format!("unknown parameter `{k}` for `{kind}`")));
        }
        Ok(spec)
    }
}

impl From<DistortionSpec> for RawSpec {
    fn from(spec: DistortionSpec) -> Self {
        let mut params = Map::new();
        let mut seed = None;
        let json = |v: String| -> Value {
            serde_json::from_str::<serde_json::Number>(&v)
                .map(Value::Number)
                .unwrap_or(Value::String(v))
        };
        for (k, v) in spec.params() {
            if k == "seed" {
                seed = v.parse().ok();
            } else {
                params.insert(k.to_string(), json(v));
            }
        }
        RawSpec {
            kind: spec.kind().to_string(),
            params,
            seed,
        }
    }
}

/// Distortions applied left to right.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chain(pub Vec<DistortionSpec>);

impl Chain {
    pub fn new(steps: Vec<DistortionSpec>) -> Self {
        Chain(steps)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[DistortionSpec] {
        &self.0
    }

    pub fn has_blur(&self) -> bool {
        self.0.iter().any(|d| matches!(d, DistortionSpec::GaussianBlur { .. }))
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        let mut out = img.clone();
        for d in &self.0 {
            out = apply(d, &out)?;
        }
        Ok(out)
    }

    /// Accepts a JSON array, a single JSON object, or the compact rendering.
    pub fn parse_any(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('[') {
            Ok(serde_json::from_str(t)?)
        } else if t.starts_with('{') {
            Ok(Chain(vec![serde_json::from_str(t)?]))
        } else {
            t.parse()
        }
    }
}

impl fmt::Display for Chain {
    /// Steps joined by `>`; the empty chain is `none`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(">"))
    }
}

impl FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" || s.is_empty() {
            return Ok(Chain::default());
        }
        s.split('>').map(str::parse).collect::<Result<Vec<_>>>().map(Chain)
    }
}

/// Applies one distortion and records it in the image's provenance.
pub fn apply(spec: &DistortionSpec, img: &Image) -> Result<Image> {
    spec.validate()?;
    let out = match *spec {
        DistortionSpec::Gamma { gamma } => gamma_transform(img, gamma)?,
        DistortionSpec::LinearScale { factor } => linear_scale(img, factor)?,
        DistortionSpec::Translate { dx, dy, dz } => translate(img, &[dx, dy, dz])?,
        DistortionSpec::MirrorReplace { axis } => mirror_replace(img, axis)?,
        DistortionSpec::GaussianNoise { sigma_rel, seed } => add_gaussian_noise(img, sigma_rel, seed)?,
        DistortionSpec::Stripes {
            period,
            amplitude_rel,
            axis,
        } => add_stripes(img, period, amplitude_rel, axis)?,
        DistortionSpec::GaussianBlur { sigma } => gaussian_blur(img, sigma)?,
        DistortionSpec::CropFraction { fraction } => crop_fraction(img, fraction)?,
    };
    Ok(out.push_provenance(spec.to_string()))
}

fn require_range(img: &Image, what: &str) -> Result<(f64, f64)> {
    let s = img.stats();
    if !(s.max > s.min) {
        return Err(Error::Degenerate(format!("{what} needs a non-constant image")));
    }
    Ok((s.min, s.max))
}

/// `min + (max - min) * ((v - min) / (max - min))^gamma`; the extremes are fixed.
pub fn gamma_transform(img: &Image, gamma: f64) -> Result<Image> {
    DistortionSpec::Gamma { gamma }.validate()?;
    let (lo, hi) = require_range(img, "gamma transform")?;
    if gamma == 1.0 {
        return Ok(img.clone());
    }
    let span = hi - lo;
    img.map(|v| if v == hi { hi } else { lo + span * ((v - lo) / span).powf(gamma) })
}

pub fn linear_scale(img: &Image, factor: f64) -> Result<Image> {
    DistortionSpec::LinearScale { factor }.validate()?;
    if factor == 1.0 {
        return Ok(img.clone());
    }
    img.map(|v| factor * v)
}

/// Whole-pixel shift by `(dx, dy[, dz])`; vacated pixels take the image minimum.
pub fn translate(img: &Image, shift: &[i64]) -> Result<Image> {
    let dims = img.dims();
    let ext = dims.extents();
    let mut s = [0i64; 3];
    for (i, &v) in shift.iter().enumerate() {
        if i >= 3 || (i >= ext.len() && v != 0) {
            return Err(Error::InvalidParam(format!("shift {shift:?} has more axes than a {dims} image")));
        }
        s[i] = v;
    }
    let ext3 = [dims.width, dims.height, dims.depth_or_one()];
    for a in 0..3 {
        if s[a].unsigned_abs() as usize >= ext3[a] && s[a] != 0 {
            return Err(Error::OutOfBounds(format!("shift {} along axis {a} of extent {}", s[a], ext3[a])));
        }
    }
    if s == [0, 0, 0] {
        return Ok(img.clone());
    }
    let fill = img.stats().min;
    let src = img.data();
    let mut out = vec![fill; src.len()];
    for z in 0..ext3[2] {
        let sz = z as i64 - s[2];
        if sz < 0 || sz >= ext3[2] as i64 {
            continue;
        }
        for y in 0..ext3[1] {
            let sy = y as i64 - s[1];
            if sy < 0 || sy >= ext3[1] as i64 {
                continue;
            }
            for x in 0..ext3[0] {
                let sx = x as i64 - s[0];
                if sx < 0 || sx >= ext3[0] as i64 {
                    continue;
                }
                out[dims.index(x, y, z)] = src[dims.index(sx as usize, sy as usize, sz as usize)];
            }
        }
    }
    img.with_data(out)
}

fn axis_extent(dims: &Dims, axis: Axis) -> Result<usize> {
    dims.extents()
        .get(axis.index())
        .copied()
        .ok_or_else(|| Error::InvalidParam(format!("axis {axis} does not exist in a {dims} image")))
}

fn coord(dims: &Dims, idx: usize, axis: Axis) -> usize {
    let (x, y, z) = dims.coords(idx);
    [x, y, z][axis.index()]
}

/// Replaces the far half along `axis` with the reflection of the near half.
/// For odd extents the middle line is kept.
pub fn mirror_replace(img: &Image, axis: Axis) -> Result<Image> {
    let dims = img.dims();
    let n = axis_extent(&dims, axis)?;
    if n < 2 {
        return Err(Error::InvalidParam(format!("mirror needs extent >= 2 along {axis}")));
    }
    let src = img.data();
    let out = (0..src.len())
        .map(|i| {
            let mut c = dims.coords(i);
            let a = [c.0, c.1, c.2][axis.index()];
            if a < n.div_ceil(2) {
                return src[i];
            }
            let m = n - 1 - a;
            match axis {
                Axis::X => c.0 = m,
                Axis::Y => c.1 = m,
                Axis::Z => c.2 = m,
            }
            src[dims.index(c.0, c.1, c.2)]
        })
        .collect();
    img.with_data(out)
}

/// Uniform and standard normal draws as described in the module docs.
pub struct RandomStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            rng: seeded_rng(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        // libm keeps the draws bit-identical across build profiles and platforms
        let r = (-2.0 * libm::log(1.0 - u1)).sqrt();
        let (s, c) = libm::sincos(2.0 * std::f64::consts::PI * u2);
        self.spare = Some(r * s);
        r * c
    }
}

/// ChaCha20 keyed by the little-endian seed, zero-padded to 32 bytes.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Adds `N(0, (sigma_rel * (max - min))^2)` noise drawn from the seeded stream.
pub fn add_gaussian_noise(img: &Image, sigma_rel: f64, seed: u64) -> Result<Image> {
    DistortionSpec::GaussianNoise { sigma_rel, seed }.validate()?;
    if sigma_rel == 0.0 {
        return Ok(img.clone());
    }
    let (lo, hi) = require_range(img, "relative gaussian noise")?;
    let sigma = sigma_rel * (hi - lo);
    let mut normals = RandomStream::new(seed);
    img.with_data(img.data().iter().map(|&v| v + sigma * normals.normal()).collect())
}

/// Adds `amplitude_rel * (max - min)` to every line whose coordinate along
/// `axis` is a multiple of `period`.
pub fn add_stripes(img: &Image, period: usize, amplitude_rel: f64, axis: Axis) -> Result<Image> {
    DistortionSpec::Stripes {
        period,
        amplitude_rel,
        axis,
    }
    .validate()?;
    let dims = img.dims();
    axis_extent(&dims, axis)?;
    if amplitude_rel == 0.0 {
        return Ok(img.clone());
    }
    let (lo, hi) = require_range(img, "relative stripes")?;
    let amp = amplitude_rel * (hi - lo);
    let out = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| if coord(&dims, i, axis).is_multiple_of(period) { v + amp } else { v })
        .collect();
    img.with_data(out)
}

/// Normalized Gaussian taps over `[-ceil(3 sigma), ceil(3 sigma)]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r).map(|i| libm::exp(-(i * i) as f64 / (2.0 * sigma * sigma))).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Half-sample symmetric extension: `... b a | a b c ... | c b ...`.
fn reflect(i: i64, n: usize) -> usize {
    let p = 2 * n as i64;
    let m = i.rem_euclid(p);
    if m >= n as i64 {
        (p - 1 - m) as usize
    } else {
        m as usize
    }
}

fn blur_axis(data: &[f64], dims: &Dims, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let ext = [dims.width, dims.height, dims.depth_or_one()];
    let stride = [1, dims.width, dims.width * dims.height][axis];
    let n = ext[axis];
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; data.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let c = [i % ext[0], (i / ext[0]) % ext[1], i / (ext[0] * ext[1])][axis];
        let base = i - c * stride;
        *o = kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * data[base + reflect(c as i64 + k as i64 - r, n) * stride])
            .sum();
    }
    out
}

/// Separable Gaussian blur with half-sample reflecting borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    DistortionSpec::GaussianBlur { sigma }.validate()?;
    let dims = img.dims();
    let kernel = gaussian_kernel(sigma);
    let mut data = img.data().to_vec();
    for axis in 0..dims.ndim() {
        data = blur_axis(&data, &dims, axis, &kernel);
    }
    img.with_data(data)
}

/// Removes `floor(fraction * extent)` pixels from both ends of every axis.
pub fn crop_fraction(img: &Image, fraction: f64) -> Result<Image> {
    DistortionSpec::CropFraction { fraction }.validate()?;
    let rect = crop_fraction_rect(&img.dims(), fraction)?;
    img.crop(&rect)
}

/// The rectangle kept by [`crop_fraction`].
pub fn crop_fraction_rect(dims: &Dims, fraction: f64) -> Result<Rect> {
    let ext = dims.extents();
    let cut: Vec<usize> = ext.iter().map(|&e| (fraction * e as f64).floor() as usize).collect();
    if ext.iter().zip(&cut).any(|(&e, &c)| e <= 2 * c) {
        return Err(Error::Degenerate(format!("cropping {fraction} from each side of {dims} leaves nothing")));
    }
    let extent = ext.iter().zip(&cut).map(|(&e, &c)| e - 2 * c).collect();
    Ok(Rect::new(cut, extent))
}
