//! Seeded synthetic brain-MR-like phantoms.
//!
//! A phantom is an elliptical "brain" on a zero background, centered
//! vertically so that mirroring about the horizontal midline reproduces its
//! outline. The brain has two darker "ventricles", a smooth low-frequency
//! texture and fine tissue noise. One nearly homogeneous bright elliptical
//! "tumor" sits strictly inside the upper or lower half of the brain, clear of
//! the midline, so mirroring the upper half onto the lower half either removes
//! it or duplicates it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distort::RandomStream;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::metrics::Fingerprint;

pub const MIN_PHANTOM_EXTENT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TumorHalf {
    Upper,
    Lower,
    /// Chosen per phantom from its seed.
    #[default]
    Random,
}

impl fmt::Display for TumorHalf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TumorHalf::Upper => "upper",
            TumorHalf::Lower => "lower",
            TumorHalf::Random => "random",
        })
    }
}

impl FromStr for TumorHalf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(TumorHalf::Upper),
            "lower" => Ok(TumorHalf::Lower),
            "random" => Ok(TumorHalf::Random),
            _ => Err(Error::InvalidParam(format!("unknown tumor half `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    pub tumor_half: TumorHalf,
    pub brain_level: f64,
    /// Standard deviation of the smooth texture.
    pub texture_std: f64,
    pub tissue_noise: f64,
    pub tumor_level: f64,
    pub tumor_noise: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            width: 192,
            height: 192,
            tumor_half: TumorHalf::Random,
            brain_level: 400.0,
            texture_std: 12.0,
            tissue_noise: 15.0,
            tumor_level: 1000.0,
            tumor_noise: 3.0,
        }
    }
}

impl PhantomParams {
    pub fn with_dims(width: usize, height: usize) -> Self {
        PhantomParams {
            width,
            height,
            ..PhantomParams::default()
        }
    }

    pub fn with_half(self, tumor_half: TumorHalf) -> Self {
        PhantomParams { tumor_half, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_PHANTOM_EXTENT || self.height < MIN_PHANTOM_EXTENT {
            return Err(Error::InvalidParam(format!(
                "phantoms need at least {MIN_PHANTOM_EXTENT} pixels per axis to place a tumor, got {}x{}",
                self.width, self.height
            )));
        }
        let levels = [self.brain_level, self.texture_std, self.tissue_noise, self.tumor_level, self.tumor_noise];
        if levels.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(self.tumor_level > self.brain_level) {
            return Err(Error::InvalidParam(format!(
                "phantom levels must be finite, non-negative, and the tumor brighter than the brain: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn write_fingerprint(&self, fp: &mut Fingerprint) {
        fp.insert("phantom_brain", self.brain_level);
        fp.insert("phantom_dims", format!("{}x{}", self.width, self.height));
        fp.insert("phantom_half", self.tumor_half);
        fp.insert("phantom_texture", self.texture_std);
        fp.insert("phantom_tissue_noise", self.tissue_noise);
        fp.insert("phantom_tumor", self.tumor_level);
        fp.insert("phantom_tumor_noise", self.tumor_noise);
    }

    pub fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        let dims = fp.require("phantom_dims")?;
        let (w, h) = dims
            .split_once('x')
            .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
            .ok_or_else(|| Error::InvalidParam(format!("bad phantom_dims `{dims}`")))?;
        let p = PhantomParams {
            width: w,
            height: h,
            tumor_half: fp.require("phantom_half")?.parse()?,
            brain_level: fp.parse_key("phantom_brain")?,
            texture_std: fp.parse_key("phantom_texture")?,
            tissue_noise: fp.parse_key("phantom_tissue_noise")?,
            tumor_level: fp.parse_key("phantom_tumor")?,
            tumor_noise: fp.parse_key("phantom_tumor_noise")?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Image,
    pub tumor_mask: Mask,
    pub foreground_mask: Mask,
    pub seed: u64,
    /// Half that actually holds the tumor (never `Random`).
    pub tumor_half: TumorHalf,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, a: f64, b: f64, angle: f64) -> Self {
        let (sin, cos) = libm::sincos(angle);
        Ellipse { cx, cy, a, b, cos, sin }
    }

    /// Squared normalized radius; `<= 1` inside.
    fn rho2(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.rho2(x, y) <= 1.0
    }
}

/// Builds a phantom; identical `(seed, params)` give bit-identical phantoms.
pub fn generate_phantom(seed: u64, params: &PhantomParams) -> Result<Phantom> {
    params.validate()?;
    let p = params;
    let (w, h) = (p.width, p.height);
    let (wf, hf) = (w as f64, h as f64);
    let mut rng = RandomStream::new(seed);
    let mut uni = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();

    let cy = (hf - 1.0) / 2.0;
    let brain = Ellipse::new((wf - 1.0) / 2.0 + uni(-0.03, 0.03) * wf, cy, uni(0.34, 0.40) * wf, uni(0.40, 0.44) * hf, 0.0);
    let vent_dx = uni(0.05, 0.08) * wf;
    let vent_a = uni(0.03, 0.045) * wf;
    let vent_b = uni(0.08, 0.12) * hf;
    let tilt = uni(0.1, 0.3);
    let ventricles = [
        Ellipse::new(brain.cx - vent_dx, cy, vent_a, vent_b, tilt),
        Ellipse::new(brain.cx + vent_dx, cy, vent_a, vent_b, -tilt),
    ];

    // smooth texture: a few low-frequency plane waves
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let f = uni(0.01, 0.05);
            let dir = uni(0.0, std::f64::consts::TAU);
            (uni(0.5, 1.0), f * libm::cos(dir), f * libm::sin(dir), uni(0.0, std::f64::consts::TAU))
        })
        .collect();
    let wave_norm = (waves.iter().map(|w| w.0 * w.0 / 2.0).sum::<f64>()).sqrt();

    // tumor: rejection-sample a pose fully inside the chosen half of the brain
    let half = match p.tumor_half {
        TumorHalf::Random => {
            if uni(0.0, 1.0) < 0.5 {
                TumorHalf::Upper
            } else {
                TumorHalf::Lower
            }
        }
        other => other,
    };
    let upper_last = (h - 1) / 2; // last row kept by a mirror about the midline
    let margin = 2usize;
    let inner = Ellipse { a: brain.a - 3.0, b: brain.b - 3.0, ..brain };
    let side = wf.min(hf);
    let mut tumor = None;
    for _ in 0..1000 {
        let r1 = uni(0.035, 0.06) * side;
        let r2 = r1 * uni(0.7, 1.0);
        let t = Ellipse::new(
            uni(brain.cx - brain.a, brain.cx + brain.a),
            uni(cy - brain.b, cy + brain.b),
            r1,
            r2,
            uni(0.0, std::f64::consts::PI),
        );
        let (x0, x1) = ((t.cx - r1).floor().max(0.0) as usize, ((t.cx + r1).ceil() as usize).min(w - 1));
        let (y0, y1) = ((t.cy - r1).floor().max(0.0) as usize, ((t.cy + r1).ceil() as usize).min(h - 1));
        let mut ok = true;
        let mut any = false;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !t.contains(x as f64, y as f64) {
                    continue;
                }
                any = true;
                let in_half = match half {
                    TumorHalf::Upper => y + margin <= upper_last,
                    _ => y >= h.div_ceil(2) + margin,
                };
                if !in_half || !inner.contains(x as f64, y as f64) {
                    ok = false;
                }
            }
        }
        if ok && any {
            tumor = Some(t);
            break;
        }
    }
    let tumor = tumor.ok_or_else(|| {
        Error::InvalidParam(format!("could not place a tumor in the {half} half of a {w}x{h} phantom"))
    })?;

    let mut data = vec![0.0; w * h];
    let mut fg = vec![false; w * h];
    let mut tm = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let i = y * w + x;
            if !brain.contains(xf, yf) {
                continue;
            }
            fg[i] = true;
            let texture: f64 = waves
                .iter()
                .map(|&(amp, fx, fy, ph)| amp * libm::cos(std::f64::consts::TAU * (fx * xf + fy * yf) + ph))
                .sum::<f64>()
                / wave_norm;
            let mut base = p.brain_level + p.texture_std * texture;
            if ventricles.iter().any(|v| v.contains(xf, yf)) {
                base *= 0.45;
            }
            if tumor.contains(xf, yf) {
                tm[i] = true;
            }
            data[i] = base;
        }
    }
    // noise is drawn for every foreground pixel in row-major order
    let mut noise = RandomStream::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    for i in 0..w * h {
        if !fg[i] {
            continue;
        }
        let z = noise.normal();
        data[i] = if tm[i] {
            p.tumor_level + p.tumor_noise * z
        } else {
            (data[i] + p.tissue_noise * z).max(1.0)
        };
    }
    Ok(Phantom {
        image: Image::new_2d(w, h, data)?,
        tumor_mask: Mask::new(crate::image::Dims::new_2d(w, h), tm)?,
        foreground_mask: Mask::new(crate::image::Dims::new_2d(w, h), fg)?,
        seed,
        tumor_half: half,
    })
}
