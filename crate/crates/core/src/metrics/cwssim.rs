//! Complex-wavelet SSIM over a steerable pyramid.
//!
//! The pyramid is built in the Fourier domain and kept undecimated, so every
//! subband has the image's size. Radial profiles are raised-cosine octave
//! bands in `log2` frequency: band `j` rises over `[2^-(j+2), 2^-(j+1)]` and
//! falls over the next octave up (frequencies in units of Nyquist). Angular
//! profiles are one-sided `cos^(K-1)` lobes, which makes the subbands complex
//! (analytic). For each subband the local index is
//!
//! ```text
//! (2 |sum c_R conj(c_I)| + k) / (sum |c_R|^2 + sum |c_I|^2 + k)
//! ```
//!
//! with sums over a square neighborhood; the score is its mean over valid
//! neighborhood positions and over all subbands. There is no data-range term.

use std::f64::consts::{FRAC_PI_2, PI};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::Image;

use super::{check_dims, Fingerprint, MetricScore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwSsimParams {
    pub levels: usize,
    pub orientations: usize,
    pub k: f64,
    /// Side of the square summation neighborhood.
    pub neighborhood: usize,
}

impl Default for CwSsimParams {
    fn default() -> Self {
        CwSsimParams {
            levels: 2,
            orientations: 6,
            k: 0.03,
            neighborhood: 7,
        }
    }
}

impl CwSsimParams {
    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.orientations < 2 || self.neighborhood == 0 || !(self.k > 0.0) {
            return Err(Error::InvalidParam(format!(
                "cw_ssim needs levels >= 1, orientations >= 2, neighborhood >= 1, k > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Smallest image extent accepted: `2^levels * neighborhood`.
    pub fn min_extent(&self) -> usize {
        (1usize << self.levels) * self.neighborhood
    }

    pub(super) fn write_fingerprint(&self, fp: &mut Fingerprint) {
        fp.insert("k", self.k);
        fp.insert("levels", self.levels);
        fp.insert("neighborhood", self.neighborhood);
        fp.insert("orientations", self.orientations);
    }

    pub(super) fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        let p = CwSsimParams {
            levels: fp.parse_key("levels")?,
            orientations: fp.parse_key("orientations")?,
            k: fp.parse_key("k")?,
            neighborhood: fp.parse_key("neighborhood")?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Rising raised-cosine edge: 0 for `u <= 0`, 1 for `u >= 1`.
fn rise(u: f64) -> f64 {
    libm::cos(FRAC_PI_2 * (1.0 - u.clamp(0.0, 1.0)))
}

/// Falling edge, power-complementary to `rise`.
fn fall(u: f64) -> f64 {
    libm::sin(FRAC_PI_2 * (1.0 - u.clamp(0.0, 1.0)))
}

/// Signed FFT frequency of bin `i` of `n`, in units of Nyquist (`[-1, 1)`).
fn freq(i: usize, n: usize) -> f64 {
    let f = if 2 * i < n { i as f64 } else { i as f64 - n as f64 };
    2.0 * f / n as f64
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Frequency responses of every oriented subband, `levels * orientations` of
/// them, each `w * h` long in FFT order.
fn subband_filters(w: usize, h: usize, p: &CwSsimParams) -> Vec<Vec<f64>> {
    let order = p.orientations - 1;
    let norm = 2.0
        * (2f64.powi(2 * order as i32) * factorial(order).powi(2)
            / (p.orientations as f64 * factorial(2 * order)))
        .sqrt();
    let mut radial = vec![vec![0.0; w * h]; p.levels];
    let mut angle = vec![0.0; w * h];
    for y in 0..h {
        let fy = freq(y, h);
        for x in 0..w {
            let fx = freq(x, w);
            let i = y * w + x;
            let lr = (fx * fx + fy * fy).sqrt().log2();
            angle[i] = fy.atan2(fx);
            let mut lowpass = fall(lr + 1.0);
            for (j, band) in radial.iter_mut().enumerate() {
                let u = lr + 2.0 + j as f64;
                band[i] = lowpass * rise(u);
                lowpass *= fall(u);
            }
        }
    }
    let mut out = Vec::with_capacity(p.levels * p.orientations);
    for band in &radial {
        for o in 0..p.orientations {
            let center = PI * o as f64 / p.orientations as f64;
            let filt = band
                .iter()
                .zip(&angle)
                .map(|(&r, &a)| {
                    if r == 0.0 {
                        return 0.0;
                    }
                    // wrap the angular offset into (-pi, pi]
                    let mut d = a - center;
                    while d > PI {
                        d -= 2.0 * PI;
                    }
                    while d <= -PI {
                        d += 2.0 * PI;
                    }
                    if d.abs() < FRAC_PI_2 {
                        r * norm * libm::cos(d).powi(order as i32)
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push(filt);
        }
    }
    out
}

struct Fft2 {
    w: usize,
    h: usize,
    planner: FftPlanner<f64>,
}

impl Fft2 {
    fn new(w: usize, h: usize) -> Self {
        Fft2 {
            w,
            h,
            planner: FftPlanner::new(),
        }
    }

    fn run(&mut self, data: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.w, self.h);
        let (row, col) = if inverse {
            (self.planner.plan_fft_inverse(w), self.planner.plan_fft_inverse(h))
        } else {
            (self.planner.plan_fft_forward(w), self.planner.plan_fft_forward(h))
        };
        row.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
        if inverse {
            let s = 1.0 / (w * h) as f64;
            data.iter_mut().for_each(|c| *c *= s);
        }
    }
}

/// Sums over every `n x n` valid neighborhood of a `w x h` grid.
fn box_sums<T>(data: &[T], w: usize, h: usize, n: usize) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let ow = w + 1 - n;
    let oh = h + 1 - n;
    let mut rows = Vec::with_capacity(ow * h);
    for r in data.chunks_exact(w) {
        let mut s = r[..n].iter().fold(T::default(), |a, &b| a + b);
        rows.push(s);
        for x in 1..ow {
            s = s + r[x + n - 1] - r[x - 1];
            rows.push(s);
        }
    }
    let mut out = vec![T::default(); ow * oh];
    for x in 0..ow {
        let mut s = (0..n).fold(T::default(), |a, y| a + rows[y * ow + x]);
        out[x] = s;
        for y in 1..oh {
            s = s + rows[(y + n - 1) * ow + x] - rows[(y - 1) * ow + x];
            out[y * ow + x] = s;
        }
    }
    out
}

pub(super) fn cw_ssim_value(reference: &Image, test: &Image, p: &CwSsimParams) -> Result<f64> {
    p.validate()?;
    let dims = reference.dims();
    if dims.is_3d() {
        return Err(Error::Unsupported("cw_ssim is defined for 2D images only".into()));
    }
    let (w, h) = (dims.width, dims.height);
    if w.min(h) < p.min_extent() {
        return Err(Error::InvalidParam(format!(
            "cw_ssim with {} levels and a {}-pixel neighborhood needs extents >= {}, image is {dims}",
            p.levels,
            p.neighborhood,
            p.min_extent()
        )));
    }
    let mut fft = Fft2::new(w, h);
    let spectrum = |fft: &mut Fft2, img: &Image| {
        let mut buf: Vec<Complex64> = img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.run(&mut buf, false);
        buf
    };
    let fr = spectrum(&mut fft, reference);
    let ft = spectrum(&mut fft, test);

    let n = p.neighborhood;
    let mut total = 0.0;
    let filters = subband_filters(w, h, p);
    for filt in &filters {
        let mut cr: Vec<Complex64> = fr.iter().zip(filt).map(|(c, &g)| c * g).collect();
        let mut ct: Vec<Complex64> = ft.iter().zip(filt).map(|(c, &g)| c * g).collect();
        fft.run(&mut cr, true);
        fft.run(&mut ct, true);
        let cross: Vec<Complex64> = cr.iter().zip(&ct).map(|(a, b)| a * b.conj()).collect();
        let energy: Vec<f64> = cr.iter().zip(&ct).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        let cross = box_sums(&cross, w, h, n);
        let energy = box_sums(&energy, w, h, n);
        let band: f64 = cross
            .iter()
            .zip(&energy)
            .map(|(c, &e)| (2.0 * c.norm() + p.k) / (e + p.k))
            .sum::<f64>()
            / cross.len() as f64;
        total += band;
    }
    Ok(total / filters.len() as f64)
}

/// Complex-wavelet structural similarity (2D only).
pub fn cw_ssim(reference: &Image, test: &Image, p: &CwSsimParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let mut fp = Fingerprint::new();
    fp.insert("metric", "cw_ssim");
    p.write_fingerprint(&mut fp);
    Ok(MetricScore::new(cw_ssim_value(reference, test, p)?, "cw_ssim", &fp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Dims;

    fn texture(w: usize, h: usize) -> Image {
        Image::from_fn_2d(w, h, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            100.0 + 30.0 * (0.3 * xf).sin() * (0.2 * yf).cos() + 10.0 * (0.9 * xf + 0.4 * yf).sin()
        })
        .unwrap()
    }

    #[test]
    fn identical_images_score_one() {
        let a = texture(64, 48);
        let v = cw_ssim(&a, &a, &CwSsimParams::default()).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn gain_change_stays_within_magnitude_bound() {
        // per coefficient (2f|c|^2 + k) / ((1 + f^2)|c|^2 + k) lies in [2f / (1 + f^2), 1]
        let p = crate::harness::PhantomParams::default();
        for seed in 0..3 {
            let r = crate::harness::generate_phantom(seed, &p).unwrap().image;
            for f in [1.1, 1.2, 2.0] {
                let t = r.map(|v| v * f).unwrap();
                let v = cw_ssim(&r, &t, &CwSsimParams::default()).unwrap().value;
                let lo = 2.0 * f / (1.0 + f * f);
                assert!(v >= lo - 1e-12 && v <= 1.0 + 1e-12, "f={f}: {v} vs {lo}");
                if f <= 1.1 {
                    assert!(v >= 0.99, "{v}");
                }
            }
        }
    }

    #[test]
    fn filters_tile_the_spectrum() {
        // hi-pass + oriented bands + residual low-pass are power complementary
        let (w, h) = (32, 32);
        let p = CwSsimParams::default();
        let bands = subband_filters(w, h, &p);
        for y in 0..h {
            for x in 0..w {
                let (fx, fy) = (freq(x, w), freq(y, h));
                let lr = (fx * fx + fy * fy).sqrt().log2();
                let hi0 = rise(lr + 1.0);
                let mut low = fall(lr + 1.0);
                for j in 0..p.levels {
                    low *= fall(lr + 2.0 + j as f64);
                }
                // one-sided lobes: a lobe and its mirror at -w share the power
                let m = ((h - y) % h) * w + (w - x) % w;
                let oriented: f64 = bands
                    .iter()
                    .map(|b| b[y * w + x].powi(2) + b[m].powi(2))
                    .sum::<f64>()
                    / 4.0;
                let total = hi0 * hi0 + oriented + low * low;
                if (x, y) != (0, 0) {
                    assert!((total - 1.0).abs() < 1e-9, "({x},{y}) {total}");
                }
            }
        }
    }

    #[test]
    fn rejects_3d_and_small_inputs() {
        let d3 = Image::constant(Dims::new_3d(32, 32, 32), 1.0).unwrap();
        assert!(matches!(
            cw_ssim(&d3, &d3, &CwSsimParams::default()),
            Err(Error::Unsupported(_))
        ));
        let small = texture(20, 40);
        assert!(cw_ssim(&small, &small, &CwSsimParams::default()).is_err());
    }

    #[test]
    fn box_sums_match_direct() {
        let data: Vec<f64> = (0..30).map(|i| (i * 7 % 11) as f64).collect();
        let s = box_sums(&data, 6, 5, 3);
        assert_eq!(s.len(), 4 * 3);
        let direct: f64 = (0..3).flat_map(|y| (0..3).map(move |x| (y + 1) * 6 + x + 2)).map(|i| data[i]).sum();
        assert_eq!(s[4 + 2], direct);
    }
}
