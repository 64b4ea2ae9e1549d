//! Naive reference implementations used as test oracles. They follow the
//! textbook definitions directly (explicit windows, two-pass moments, hash-map
//! histograms) and share no code with the library.

#![allow(dead_code)]

use std::collections::HashMap;

/// Row-major 2D grid.
#[derive(Clone, Debug)]
pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Grid {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.v[y * self.w + x]
    }

    pub fn from_image(img: &refsim::Image) -> Grid {
        let d = img.dims();
        Grid {
            w: d.width,
            h: d.height,
            v: img.data().to_vec(),
        }
    }
}

fn span(a: &[f64]) -> (f64, f64) {
    a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn joint_range(a: &Grid, b: &Grid) -> f64 {
    let (alo, ahi) = span(&a.v);
    let (blo, bhi) = span(&b.v);
    ahi.max(bhi) - alo.min(blo)
}

/// 11x11 Gaussian weights, sigma 1.5, normalized over the 2D window.
fn window() -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; 11]; 11];
    let mut total = 0.0;
    for (j, row) in w.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            let (dx, dy) = (i as f64 - 5.0, j as f64 - 5.0);
            *cell = (-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp();
            total += *cell;
        }
    }
    for row in &mut w {
        for cell in row.iter_mut() {
            *cell /= total;
        }
    }
    w
}

/// Mean SSIM and mean contrast-structure over every position where the
/// window fits.
pub fn ssim_and_cs(a: &Grid, b: &Grid, l: f64) -> (f64, f64) {
    let win = window();
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);
    let (mut s_sum, mut cs_sum, mut n) = (0.0, 0.0, 0usize);
    for y0 in 0..=a.h - 11 {
        for x0 in 0..=a.w - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    ma += win[j][i] * a.at(x0 + i, y0 + j);
                    mb += win[j][i] * b.at(x0 + i, y0 + j);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let da = a.at(x0 + i, y0 + j) - ma;
                    let db = b.at(x0 + i, y0 + j) - mb;
                    va += win[j][i] * da * da;
                    vb += win[j][i] * db * db;
                    cov += win[j][i] * da * db;
                }
            }
            let lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            s_sum += lum * cs;
            cs_sum += cs;
            n += 1;
        }
    }
    (s_sum / n as f64, cs_sum / n as f64)
}

pub fn ssim(a: &Grid, b: &Grid) -> f64 {
    ssim_and_cs(a, b, joint_range(a, b)).0
}

pub fn ssim_with_range(a: &Grid, b: &Grid, l: f64) -> f64 {
    ssim_and_cs(a, b, l).0
}

fn halve(g: &Grid) -> Grid {
    let (w, h) = (g.w / 2, g.h / 2);
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            v.push((g.at(2 * x, 2 * y) + g.at(2 * x + 1, 2 * y) + g.at(2 * x, 2 * y + 1) + g.at(2 * x + 1, 2 * y + 1)) / 4.0);
        }
    }
    Grid { w, h, v }
}

/// Five-scale MS-SSIM with the data range of the full-resolution pair.
pub fn ms_ssim(a: &Grid, b: &Grid) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let l = joint_range(a, b);
    let (mut a, mut b) = (a.clone(), b.clone());
    let mut out = 1.0;
    for (s, w) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_and_cs(&a, &b, l);
        let term = if s == weights.len() - 1 { ssim } else { cs };
        out *= f64::max(term, 0.0).powf(*w);
        a = halve(&a);
        b = halve(&b);
    }
    out
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn entropy(counts: &HashMap<(usize, usize), usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn bins_of(a: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = span(a);
    a.iter()
        .map(|&v| {
            let k = ((v - lo) / (hi - lo) * bins as f64).floor() as usize;
            k.min(bins - 1)
        })
        .collect()
}

/// `(H(A) + H(B)) / H(A, B)` with per-image histogram edges.
pub fn nmi(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let (ba, bb) = (bins_of(a, bins), bins_of(b, bins));
    let mut ha = HashMap::new();
    let mut hb = HashMap::new();
    let mut hab = HashMap::new();
    for (&i, &j) in ba.iter().zip(&bb) {
        *ha.entry((i, 0)).or_insert(0) += 1;
        *hb.entry((j, 0)).or_insert(0) += 1;
        *hab.entry((i, j)).or_insert(0) += 1;
    }
    let n = a.len() as f64;
    (entropy(&ha, n) + entropy(&hb, n)) / entropy(&hab, n)
}

/// Fixed-seed test data independent of the library's generator (SplitMix64).
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// A smooth random 2D field plus white noise, and a perturbed copy.
pub fn random_pair(seed: u64, w: usize, h: usize) -> (refsim::Image, refsim::Image) {
    let mut r = SplitMix(seed);
    let (fx, fy, ph) = (0.05 + 0.2 * r.unit(), 0.05 + 0.2 * r.unit(), 6.0 * r.unit());
    let base: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            100.0 + 60.0 * (fx * x + ph).sin() * (fy * y).cos() + 20.0 * r.unit()
        })
        .collect();
    let gain = 0.7 + 0.6 * r.unit();
    let test: Vec<f64> = base.iter().map(|v| gain * v + 25.0 * (r.unit() - 0.5)).collect();
    (
        refsim::Image::new_2d(w, h, base).unwrap(),
        refsim::Image::new_2d(w, h, test).unwrap(),
    )
}
