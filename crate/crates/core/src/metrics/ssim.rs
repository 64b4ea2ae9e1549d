//! SSIM and MS-SSIM over 2D or 3D images.
//!
//! Local statistics use a separable window (Gaussian or uniform) evaluated at
//! every position where the window fits entirely inside the image ("valid"
//! positions); no padding. Stabilizers are `C1 = (k1 L)^2`, `C2 = (k2 L)^2`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::normalize::DataRangePolicy;

use super::{check_dims, Fingerprint, MetricScore};

/// Published five-scale MS-SSIM exponents, finest scale first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// Gaussian weights `exp(-i^2 / 2 sigma^2)` for `|i| <= radius`, normalized.
    Gaussian { sigma: f64, radius: usize },
    /// Flat window of `side` samples per axis.
    Uniform { side: usize },
}

impl Default for Window {
    fn default() -> Self {
        Window::Gaussian {
            sigma: 1.5,
            radius: 5,
        }
    }
}

impl Window {
    /// Samples per axis.
    pub fn size(&self) -> usize {
        match *self {
            Window::Gaussian { radius, .. } => 2 * radius + 1,
            Window::Uniform { side } => side,
        }
    }

    /// Normalized 1D kernel; the window is its outer product over all axes.
    pub fn kernel(&self) -> Vec<f64> {
        let raw: Vec<f64> = match *self {
            Window::Gaussian { sigma, radius } => {
                let r = radius as isize;
                (-r..=r)
                    .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
                    .collect()
            }
            Window::Uniform { side } => vec![1.0; side],
        };
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Window::Gaussian { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidParam(format!("gaussian window sigma must be > 0, got {sigma}")))
            }
            Window::Uniform { side: 0 } => Err(Error::InvalidParam("uniform window side must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Gaussian { sigma, radius } => write!(f, "gaussian:{sigma}:{radius}"),
            Window::Uniform { side } => write!(f, "uniform:{side}"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("bad window `{s}` (gaussian:<sigma>:<radius> or uniform:<side>)"));
        let parts: Vec<&str> = s.split(':').collect();
        let w = match parts.as_slice() {
            ["gaussian", sigma, radius] => Window::Gaussian {
                sigma: sigma.parse().map_err(|_| bad())?,
                radius: radius.parse().map_err(|_| bad())?,
            },
            ["uniform", side] => Window::Uniform {
                side: side.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub range: DataRangePolicy,
    pub window: Window,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            range: DataRangePolicy::Joint,
            window: Window::default(),
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn with_range(range: DataRangePolicy) -> Self {
        SsimParams {
            range,
            ..SsimParams::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "ssim constants must be positive, got k1={}, k2={}",
                self.k1, self.k2
            )));
        }
        self.window.validate()
    }

    pub(super) fn write_fingerprint(&self, fp: &mut Fingerprint) {
        fp.insert("k1", self.k1);
        fp.insert("k2", self.k2);
        fp.insert("range", self.range);
        fp.insert("window", self.window);
    }

    pub(super) fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        let p = SsimParams {
            range: fp.require("range")?.parse()?,
            window: fp.require("window")?.parse()?,
            k1: fp.parse_key("k1")?,
            k2: fp.parse_key("k2")?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsSsimParams {
    pub base: SsimParams,
    pub scales: usize,
    /// Exponent per scale, finest first.
    pub weights: Vec<f64>,
}

impl Default for MsSsimParams {
    fn default() -> Self {
        MsSsimParams {
            base: SsimParams::default(),
            scales: MS_SSIM_WEIGHTS.len(),
            weights: MS_SSIM_WEIGHTS.to_vec(),
        }
    }
}

impl MsSsimParams {
    /// One scale with weight 1: identical to plain SSIM.
    pub fn single_scale(base: SsimParams) -> Self {
        MsSsimParams {
            base,
            scales: 1,
            weights: vec![1.0],
        }
    }

    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.scales == 0 || self.weights.len() != self.scales {
            return Err(Error::InvalidParam(format!(
                "ms_ssim needs one weight per scale, got {} weights for {} scales",
                self.weights.len(),
                self.scales
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParam("ms_ssim weights must be positive".into()));
        }
        // the published weights sum to 1.0001
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidParam(format!("ms_ssim weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub(super) fn write_fingerprint(&self, fp: &mut Fingerprint) {
        self.base.write_fingerprint(fp);
        fp.insert("downsample", "avgpool2");
        fp.insert("scales", self.scales);
        let w: Vec<String> = self.weights.iter().map(f64::to_string).collect();
        fp.insert("weights", w.join(","));
    }

    pub(super) fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        if fp.require("downsample")? != "avgpool2" {
            return Err(Error::InvalidParam("ms_ssim supports downsample=avgpool2 only".into()));
        }
        let weights = fp
            .require("weights")?
            .split(',')
            .map(|w| w.parse().map_err(|_| Error::InvalidParam(format!("bad ms_ssim weight `{w}`"))))
            .collect::<Result<Vec<f64>>>()?;
        let p = MsSsimParams {
            base: SsimParams::from_fingerprint(fp)?,
            scales: fp.parse_key("scales")?,
            weights,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Valid-mode separable filtering along every axis of `dims`.
fn filter_valid(data: &[f64], dims: Dims, k: &[f64]) -> (Vec<f64>, Dims) {
    let n = k.len();
    let (w, h, d) = (dims.width, dims.height, dims.depth_or_one());
    let ow = w + 1 - n;
    let mut a = Vec::with_capacity(ow * h * d);
    for row in data.chunks_exact(w) {
        for x in 0..ow {
            a.push(k.iter().zip(&row[x..x + n]).map(|(kw, v)| kw * v).sum::<f64>());
        }
    }
    let oh = h + 1 - n;
    let mut b = vec![0.0; ow * oh * d];
    for z in 0..d {
        for y in 0..oh {
            let out = &mut b[(z * oh + y) * ow..(z * oh + y + 1) * ow];
            for (i, kw) in k.iter().enumerate() {
                let src = &a[(z * h + y + i) * ow..(z * h + y + i + 1) * ow];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += kw * s;
                }
            }
        }
    }
    match dims.depth {
        None => (b, Dims::new_2d(ow, oh)),
        Some(_) => {
            let od = d + 1 - n;
            let plane = ow * oh;
            let mut c = vec![0.0; plane * od];
            for z in 0..od {
                let out = &mut c[z * plane..(z + 1) * plane];
                for (i, kw) in k.iter().enumerate() {
                    let src = &b[(z + i) * plane..(z + i + 1) * plane];
                    for (o, s) in out.iter_mut().zip(src) {
                        *o += kw * s;
                    }
                }
            }
            (c, Dims::new_3d(ow, oh, od))
        }
    }
}

fn window_fits(dims: Dims, window: &Window) -> Result<()> {
    let n = window.size();
    if dims.extents().iter().any(|&e| e < n) {
        return Err(Error::InvalidParam(format!(
            "{n}-sample window does not fit inside {dims} image"
        )));
    }
    Ok(())
}

/// Mean SSIM and mean contrast-structure term over all valid window positions.
pub fn ssim_map_means(
    reference: &[f64],
    test: &[f64],
    dims: Dims,
    data_range: f64,
    params: &SsimParams,
) -> Result<(f64, f64)> {
    window_fits(dims, &params.window)?;
    let k = params.window.kernel();
    let c1 = (params.k1 * data_range).powi(2);
    let c2 = (params.k2 * data_range).powi(2);

    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let prod: Vec<f64> = reference.iter().zip(test).map(|(a, b)| a * b).collect();
    let (mu_r, _) = filter_valid(reference, dims, &k);
    let (mu_t, _) = filter_valid(test, dims, &k);
    let (e_rr, _) = filter_valid(&sq(reference), dims, &k);
    let (e_tt, _) = filter_valid(&sq(test), dims, &k);
    let (e_rt, _) = filter_valid(&prod, dims, &k);

    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_r.len() {
        let (mr, mt) = (mu_r[i], mu_t[i]);
        let var_r = e_rr[i] - mr * mr;
        let var_t = e_tt[i] - mt * mt;
        let cov = e_rt[i] - mr * mt;
        let lum = (2.0 * mr * mt + c1) / (mr * mr + mt * mt + c1);
        let cs = (2.0 * cov + c2) / (var_r + var_t + c2);
        ssim_sum += lum * cs;
        cs_sum += cs;
    }
    let n = mu_r.len() as f64;
    Ok((ssim_sum / n, cs_sum / n))
}

pub(super) fn ssim_value(reference: &Image, test: &Image, p: &SsimParams) -> Result<f64> {
    p.validate()?;
    let l = p.range.resolve_values(reference.data(), test.data())?;
    Ok(ssim_map_means(reference.data(), test.data(), reference.dims(), l, p)?.0)
}

/// Factor-2 decimation by averaging 2x2 (2x2x2 in 3D) blocks; odd trailing
/// samples are dropped.
fn downsample(data: &[f64], dims: Dims) -> (Vec<f64>, Dims) {
    let (w, h) = (dims.width / 2, dims.height / 2);
    let d = dims.depth.map(|d| d / 2);
    let zs = if d.is_some() { 2 } else { 1 };
    let nd = d.unwrap_or(1);
    let norm = (4 * zs) as f64;
    let mut out = Vec::with_capacity(w * h * nd);
    for z in 0..nd {
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for dz in 0..zs {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            s += data[dims.index(2 * x + dx, 2 * y + dy, zs * z + dz)];
                        }
                    }
                }
                out.push(s / norm);
            }
        }
    }
    let od = match d {
        Some(d) => Dims::new_3d(w, h, d),
        None => Dims::new_2d(w, h),
    };
    (out, od)
}

pub(super) fn ms_ssim_value(reference: &Image, test: &Image, p: &MsSsimParams) -> Result<f64> {
    p.validate()?;
    let dims = reference.dims();
    let n = p.base.window.size();
    let shrink = 1usize << (p.scales - 1);
    if dims.extents().iter().any(|&e| e / shrink < n) {
        return Err(Error::InvalidParam(format!(
            "{dims} image is too small for {} ms_ssim scales with a {n}-sample window",
            p.scales
        )));
    }
    let l = p.base.range.resolve_values(reference.data(), test.data())?;

    let mut r = reference.data().to_vec();
    let mut t = test.data().to_vec();
    let mut cur = dims;
    let mut terms = Vec::with_capacity(p.scales);
    for scale in 0..p.scales {
        let (s, cs) = ssim_map_means(&r, &t, cur, l, &p.base)?;
        if scale + 1 == p.scales {
            terms.push(s);
        } else {
            terms.push(cs);
            let (nr, nd) = downsample(&r, cur);
            let (nt, _) = downsample(&t, cur);
            r = nr;
            t = nt;
            cur = nd;
        }
    }
    if p.scales == 1 {
        return Ok(terms[0]);
    }
    // negative terms are clamped to zero before taking fractional powers
    Ok(terms
        .iter()
        .zip(&p.weights)
        .map(|(v, w)| v.max(0.0).powf(*w))
        .product())
}

/// Mean SSIM over valid window positions.
pub fn ssim(reference: &Image, test: &Image, p: &SsimParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let mut fp = Fingerprint::new();
    fp.insert("metric", "ssim");
    p.write_fingerprint(&mut fp);
    Ok(MetricScore::new(ssim_value(reference, test, p)?, "ssim", &fp))
}

/// Multi-scale SSIM: contrast-structure terms at the finer scales and the full
/// SSIM at the coarsest, combined as a weighted product.
pub fn ms_ssim(reference: &Image, test: &Image, p: &MsSsimParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let mut fp = Fingerprint::new();
    fp.insert("metric", "ms_ssim");
    p.write_fingerprint(&mut fp);
    Ok(MetricScore::new(ms_ssim_value(reference, test, p)?, "ms_ssim", &fp))
}
