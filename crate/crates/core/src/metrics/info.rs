//! Histogram entropies, mutual information and normalized mutual information.
//!
//! Values are binned with `min(bins - 1, floor((v - lo) / (hi - lo) * bins))`
//! where `(lo, hi)` is each image's own span (`per_image`) or the span of both
//! images together (`joint`). A constant image lands entirely in bin 0.
//! Entropies use natural logarithms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{Image, IntensityStats};
use crate::normalize::bin_index;

use super::{check_dims, Fingerprint, MetricScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistRange {
    #[default]
    PerImage,
    Joint,
}

impl fmt::Display for HistRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HistRange::PerImage => "per_image",
            HistRange::Joint => "joint",
        })
    }
}

impl FromStr for HistRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_image" => Ok(HistRange::PerImage),
            "joint" => Ok(HistRange::Joint),
            _ => Err(Error::InvalidParam(format!("unknown histogram range `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramParams {
    /// Bins per image axis.
    pub bins: usize,
    pub range_policy: HistRange,
}

impl Default for HistogramParams {
    fn default() -> Self {
        HistogramParams {
            bins: 256,
            range_policy: HistRange::PerImage,
        }
    }
}

impl HistogramParams {
    pub fn with_bins(bins: usize) -> Self {
        HistogramParams {
            bins,
            ..HistogramParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParam(format!("histogram needs >= 2 bins, got {}", self.bins)));
        }
        Ok(())
    }

    pub(super) fn write_fingerprint(&self, fp: &mut Fingerprint) {
        fp.insert("bins", self.bins);
        fp.insert("edges", self.range_policy);
        fp.insert("log", "e");
    }

    pub(super) fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        if fp.require("log")? != "e" {
            return Err(Error::InvalidParam("only natural-log entropies are supported".into()));
        }
        let h = HistogramParams {
            bins: fp.parse_key("bins")?,
            range_policy: fp.require("edges")?.parse()?,
        };
        h.validate()?;
        Ok(h)
    }
}

fn bin_all(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    if !(hi > lo) {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|&v| (bin_index(v, lo, hi, bins) as usize).min(bins - 1))
        .collect()
}

/// Entropy of a histogram given by its counts. The counts are summed in sorted
/// order so the result depends only on the multiset of counts.
fn entropy_of_counts(counts: impl IntoIterator<Item = u64>, total: f64) -> f64 {
    let mut nz: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    nz.sort_unstable();
    -nz.iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Marginal entropies `H(R)`, `H(I)` and joint entropy `H(R, I)`.
fn entropies(r: &[f64], t: &[f64], h: &HistogramParams) -> Result<(f64, f64, f64)> {
    h.validate()?;
    let sr = IntensityStats::of(r);
    let st = IntensityStats::of(t);
    let ((rlo, rhi), (tlo, thi)) = match h.range_policy {
        HistRange::PerImage => ((sr.min, sr.max), (st.min, st.max)),
        HistRange::Joint => {
            let span = (sr.min.min(st.min), sr.max.max(st.max));
            (span, span)
        }
    };
    let b = h.bins;
    let br = bin_all(r, rlo, rhi, b);
    let bt = bin_all(t, tlo, thi, b);
    let mut joint = vec![0u64; b * b];
    let mut mr = vec![0u64; b];
    let mut mt = vec![0u64; b];
    for (&i, &j) in br.iter().zip(&bt) {
        joint[i * b + j] += 1;
        mr[i] += 1;
        mt[j] += 1;
    }
    let n = r.len() as f64;
    Ok((
        entropy_of_counts(mr, n),
        entropy_of_counts(mt, n),
        entropy_of_counts(joint, n),
    ))
}

pub(super) fn mi_values(r: &[f64], t: &[f64], h: &HistogramParams) -> Result<f64> {
    let (hr, ht, hrt) = entropies(r, t, h)?;
    Ok(hr + ht - hrt)
}

pub(super) fn nmi_values(r: &[f64], t: &[f64], h: &HistogramParams) -> Result<f64> {
    let (hr, ht, hrt) = entropies(r, t, h)?;
    if hrt == 0.0 {
        return Err(Error::Degenerate(
            "normalized mutual information is undefined when both images are constant".into(),
        ));
    }
    Ok((hr + ht) / hrt)
}

/// Shannon entropy (nats) of an image histogram with `bins` bins over its own span.
pub fn entropy(img: &Image, bins: usize) -> Result<f64> {
    let p = HistogramParams::with_bins(bins);
    p.validate()?;
    let s = img.stats();
    let idx = bin_all(img.data(), s.min, s.max, bins);
    let mut counts = vec![0u64; bins];
    for i in idx {
        counts[i] += 1;
    }
    Ok(entropy_of_counts(counts, img.len() as f64))
}

fn hist_fp(id: &str, h: &HistogramParams) -> Fingerprint {
    let mut fp = Fingerprint::new();
    fp.insert("metric", id);
    h.write_fingerprint(&mut fp);
    fp
}

/// `H(R) + H(I) - H(R, I)`.
pub fn mi(reference: &Image, test: &Image, h: &HistogramParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let v = mi_values(reference.data(), test.data(), h)?;
    Ok(MetricScore::new(v, "mi", &hist_fp("mi", h)))
}

/// `(H(R) + H(I)) / H(R, I)`, in `[1, 2]`.
pub fn nmi(reference: &Image, test: &Image, h: &HistogramParams) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let v = nmi_values(reference.data(), test.data(), h)?;
    Ok(MetricScore::new(v, "nmi", &hist_fp("nmi", h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: &[f64]) -> Image {
        Image::new_2d(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn self_information() {
        let r = img(&[0.0, 1.0, 1.0, 5.0, 9.0, 9.0, 9.0, 2.5]);
        for bins in [2, 4, 16, 256] {
            let h = HistogramParams::with_bins(bins);
            assert_eq!(mi(&r, &r, &h).unwrap().value, entropy(&r, bins).unwrap());
            assert_eq!(nmi(&r, &r, &h).unwrap().value, 2.0);
        }
    }

    #[test]
    fn independent_noise_mi_is_only_histogram_bias() {
        // plug-in estimate of zero information is biased up by about (B-1)^2 / 2N
        let (w, bins) = (256, 64);
        let n = (w * w) as f64;
        let bias = ((bins - 1) * (bins - 1)) as f64 / (2.0 * n);
        for seed in 0..3 {
            let mut s = crate::distort::RandomStream::new(seed);
            let a = Image::from_fn_2d(w, w, |_, _| s.uniform()).unwrap();
            let b = Image::from_fn_2d(w, w, |_, _| s.uniform()).unwrap();
            let v = mi(&a, &b, &HistogramParams::with_bins(bins)).unwrap().value;
            assert!(v > 0.5 * bias && v < 1.5 * bias, "{v} vs {bias}");
            let v = nmi(&a, &b, &HistogramParams::with_bins(bins)).unwrap().value;
            assert!(v > 1.0 && v < 1.01, "{v}");
        }
    }

    #[test]
    fn bin_permutation_gives_ln2() {
        let r = img(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let t = img(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let h = HistogramParams::with_bins(2);
        let v = mi(&r, &t, &h).unwrap().value;
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15, "{v}");
    }

    #[test]
    fn constant_pair_nmi_is_an_error() {
        let c = img(&[4.0; 5]);
        let h = HistogramParams::default();
        assert!(nmi(&c, &c, &h).is_err());
        assert_eq!(mi(&c, &c, &h).unwrap().value, 0.0);
    }

    #[test]
    fn joint_edges_differ_from_per_image() {
        let r = img(&[0.0, 1.0, 2.0, 3.0]);
        let t = img(&[0.0, 2.0, 4.0, 6.0]);
        let per = HistogramParams::with_bins(4);
        let joint = HistogramParams {
            range_policy: HistRange::Joint,
            ..per
        };
        assert!((nmi(&r, &t, &per).unwrap().value - 2.0).abs() < 1e-15);
        assert!(nmi(&r, &t, &joint).unwrap().value < 2.0);
    }

    fn labels() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (4usize..80).prop_flat_map(|n| (prop::collection::vec(0u8..8, n), prop::collection::vec(0u8..8, n)))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded((a, b) in labels()) {
            let a = img(&a.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let b = img(&b.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let h = HistogramParams::with_bins(8);
            let m1 = mi(&a, &b, &h).unwrap().value;
            prop_assert_eq!(m1, mi(&b, &a, &h).unwrap().value);
            prop_assert!(m1 >= -1e-12);
            if let (Ok(x), Ok(y)) = (nmi(&a, &b, &h), nmi(&b, &a, &h)) {
                prop_assert_eq!(x.value, y.value);
                prop_assert!(x.value >= 1.0 - 1e-12 && x.value <= 2.0 + 1e-12);
            }
        }

        #[test]
        fn relabeling_bins_keeps_nmi((a, b) in labels(), perm in Just((0u8..8).collect::<Vec<_>>()).prop_shuffle()) {
            // integer labels 0..8 with both extremes present map one-to-one onto 8 bins
            let mut a = a;
            a[0] = 0;
            a[1] = 7;
            let ai = img(&a.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let pa: Vec<f64> = a.iter().map(|&v| perm[v as usize] as f64).collect();
            let pa = img(&pa);
            let bi = img(&b.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let h = HistogramParams::with_bins(8);
            if let Ok(base) = nmi(&ai, &bi, &h) {
                prop_assert_eq!(base.value, nmi(&pa, &bi, &h).unwrap().value);
            }
        }

        #[test]
        fn monotone_map_preserving_bins_keeps_nmi((a, b) in labels(), offs in prop::collection::vec(0.0f64..1.0, 6)) {
            // labels 1..=6 move anywhere inside their own bin; 0 and 7 stay put,
            // so the map is strictly increasing and keeps every bin assignment
            let mut a = a;
            a[0] = 0;
            a[1] = 7;
            let warp = |k: u8| match k {
                0 | 7 => k as f64,
                k => 7.0 * (k as f64 + offs[k as usize - 1]) / 8.0,
            };
            let base: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            let warped: Vec<f64> = a.iter().map(|&v| warp(v)).collect();
            let bi = img(&b.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let h = HistogramParams::with_bins(8);
            prop_assert_eq!(bin_all(&base, 0.0, 7.0, 8), bin_all(&warped, 0.0, 7.0, 8));
            if let Ok(x) = nmi(&img(&base), &bi, &h) {
                prop_assert_eq!(x.value, nmi(&img(&warped), &bi, &h).unwrap().value);
            }
        }
    }
}
