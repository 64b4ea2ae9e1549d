//! Affine intensity normalization, bin quantization and data-range resolution.
//!
//! Normalization maps `I' = (I - a) / b`; Minmax uses `(min, max - min)`,
//! Zscore uses the population `(mean, std)`. Quantization into `bins` levels
//! uses `min(bins - 1, floor((I - min) / (max - min) * bins))`.
//!
//! Degenerate denominators are errors, never NaN.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{Image, IntensityStats};

/// Affine normalization method.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NormMethod {
    #[default]
    None,
    MinMax,
    ZScore,
    /// User-supplied shift `a` and positive scale `b`.
    Custom { a: f64, b: f64 },
}

impl NormMethod {
    pub fn custom(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite() && a.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "custom normalization needs finite a and b > 0, got a={a}, b={b}"
            )));
        }
        Ok(NormMethod::Custom { a, b })
    }

    /// `(a, b)` this method would use on an image with these statistics.
    pub fn shift_scale(&self, s: &IntensityStats) -> Result<(f64, f64)> {
        match *self {
            NormMethod::None => Ok((0.0, 1.0)),
            NormMethod::MinMax => {
                if s.max > s.min {
                    Ok((s.min, s.max - s.min))
                } else {
                    Err(Error::Degenerate(format!(
                        "minmax normalization of a constant image (value {})",
                        s.min
                    )))
                }
            }
            NormMethod::ZScore => {
                if s.std > 0.0 {
                    Ok((s.mean, s.std))
                } else {
                    Err(Error::Degenerate(format!(
                        "zscore normalization of a constant image (value {})",
                        s.mean
                    )))
                }
            }
            NormMethod::Custom { a, b } => Ok((a, b)),
        }
    }
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMethod::None => f.write_str("none"),
            NormMethod::MinMax => f.write_str("minmax"),
            NormMethod::ZScore => f.write_str("zscore"),
            NormMethod::Custom { a, b } => write!(f, "custom:a={a},b={b}"),
        }
    }
}

impl FromStr for NormMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NormMethod::None),
            "minmax" => Ok(NormMethod::MinMax),
            "zscore" => Ok(NormMethod::ZScore),
            _ => {
                let body = s.strip_prefix("custom:").ok_or_else(|| {
                    Error::InvalidParam(format!(
                        "unknown normalization `{s}` (expected none, minmax, zscore or custom:a=..,b=..)"
                    ))
                })?;
                let kv = parse_kv(body)?;
                let a = kv_get(&kv, "a", s)?;
                let b = kv_get(&kv, "b", s)?;
                if kv.len() != 2 {
                    return Err(Error::InvalidParam(format!("unexpected keys in `{s}`")));
                }
                NormMethod::custom(a, b)
            }
        }
    }
}

/// Rule producing the SSIM/PSNR data range `L`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DataRangePolicy {
    /// `max(I_max, R_max) - min(I_min, R_min)`.
    #[default]
    Joint,
    /// `R_max - R_min`.
    PerReference,
    /// `I_max - I_min`.
    PerTest,
    Fixed(f64),
}

impl DataRangePolicy {
    pub fn fixed(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParam(format!("fixed data range must be finite and > 0, got {l}")));
        }
        Ok(DataRangePolicy::Fixed(l))
    }

    pub fn is_per_image(&self) -> bool {
        matches!(self, DataRangePolicy::PerReference | DataRangePolicy::PerTest)
    }

    /// Resolves `L` from the raw value sets of reference and test.
    pub fn resolve_values(&self, reference: &[f64], test: &[f64]) -> Result<f64> {
        let span = |v: &[f64]| {
            let s = IntensityStats::of(v);
            (s.min, s.max)
        };
        let l = match *self {
            DataRangePolicy::Fixed(l) => l,
            DataRangePolicy::PerReference => {
                let (lo, hi) = span(reference);
                hi - lo
            }
            DataRangePolicy::PerTest => {
                let (lo, hi) = span(test);
                hi - lo
            }
            DataRangePolicy::Joint => {
                let (rlo, rhi) = span(reference);
                let (tlo, thi) = span(test);
                rhi.max(thi) - rlo.min(tlo)
            }
        };
        if l > 0.0 {
            Ok(l)
        } else {
            Err(Error::Degenerate(format!(
                "data range policy `{self}` resolves to L = {l}; the relevant image(s) are constant"
            )))
        }
    }
}

impl fmt::Display for DataRangePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataRangePolicy::Joint => f.write_str("joint"),
            DataRangePolicy::PerReference => f.write_str("ref"),
            DataRangePolicy::PerTest => f.write_str("test"),
            DataRangePolicy::Fixed(l) => write!(f, "fixed:L={l}"),
        }
    }
}

impl FromStr for DataRangePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(DataRangePolicy::Joint),
            "ref" => Ok(DataRangePolicy::PerReference),
            "test" => Ok(DataRangePolicy::PerTest),
            _ => {
                let body = s.strip_prefix("fixed:").ok_or_else(|| {
                    Error::InvalidParam(format!(
                        "unknown data range policy `{s}` (expected joint, ref, test or fixed:L=..)"
                    ))
                })?;
                let kv = parse_kv(body)?;
                if kv.len() != 1 {
                    return Err(Error::InvalidParam(format!("unexpected keys in `{s}`")));
                }
                DataRangePolicy::fixed(kv_get(&kv, "L", s)?)
            }
        }
    }
}

/// Preprocessing applied to both images before evaluation: an affine
/// normalization or a bin quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preprocess {
    Norm(NormMethod),
    Bin(usize),
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess::Norm(NormMethod::None)
    }
}

impl Preprocess {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        match *self {
            Preprocess::Norm(m) => normalize(img, m),
            Preprocess::Bin(bins) => bin_quantize(img, bins),
        }
    }

    pub fn bins(&self) -> Option<usize> {
        match *self {
            Preprocess::Bin(b) => Some(b),
            Preprocess::Norm(_) => None,
        }
    }
}

impl fmt::Display for Preprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preprocess::Norm(m) => m.fmt(f),
            Preprocess::Bin(b) => write!(f, "bin:{b}"),
        }
    }
}

impl FromStr for Preprocess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("bin:") {
            Some(b) => {
                let bins = b
                    .parse()
                    .map_err(|_| Error::InvalidParam(format!("bad bin count in `{s}`")))?;
                if bins < 2 {
                    return Err(Error::InvalidParam(format!("bin count must be >= 2, got {bins}")));
                }
                Ok(Preprocess::Bin(bins))
            }
            None => s.parse().map(Preprocess::Norm),
        }
    }
}

fn parse_kv(body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParam(format!("expected key=value, got `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad number `{v}` for `{k}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn kv_get(kv: &[(String, f64)], key: &str, whole: &str) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::InvalidParam(format!("missing `{key}` in `{whole}`")))
}

/// Applies `I' = (I - a) / b`. `NormMethod::None` returns the input unchanged.
pub fn normalize(img: &Image, method: NormMethod) -> Result<Image> {
    if method == NormMethod::None {
        return Ok(img.clone());
    }
    let (a, b) = method.shift_scale(&img.stats())?;
    img.map(|v| (v - a) / b)
}

/// Quantizes into `bins` integer levels `0..bins`. The result declares the
/// range `(0, bins - 1)`.
pub fn bin_quantize(img: &Image, bins: usize) -> Result<Image> {
    if bins < 2 {
        return Err(Error::InvalidParam(format!("bin count must be >= 2, got {bins}")));
    }
    let s = img.stats();
    if !(s.max > s.min) {
        return Err(Error::Degenerate(format!(
            "cannot bin a constant image (value {})",
            s.min
        )));
    }
    let top = (bins - 1) as f64;
    let out = img.map(|v| bin_index(v, s.min, s.max, bins).min(top))?;
    out.with_declared_range(0.0, top)
}

#[inline]
pub(crate) fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> f64 {
    ((v - lo) / (hi - lo) * bins as f64).floor()
}

/// The data range `L` for a reference/test pair under `policy`.
pub fn resolve_data_range(reference: &Image, test: &Image, policy: DataRangePolicy) -> Result<f64> {
    policy.resolve_values(reference.data(), test.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: &[f64]) -> Image {
        Image::new_2d(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&img(&[0.0, 5.0, 10.0]), NormMethod::MinMax).unwrap().data(), &[0.0, 0.5, 1.0]);
        assert_eq!(normalize(&img(&[0.0, 2.0]), NormMethod::ZScore).unwrap().data(), &[-1.0, 1.0]);
        assert!(matches!(
            normalize(&img(&[3.0, 3.0]), NormMethod::MinMax),
            Err(Error::Degenerate(_))
        ));
        assert!(normalize(&img(&[3.0, 3.0]), NormMethod::ZScore).is_err());
        let c = NormMethod::custom(1.0, 2.0).unwrap();
        assert_eq!(normalize(&img(&[1.0, 5.0]), c).unwrap().data(), &[0.0, 2.0]);
        let i = img(&[1.0, 7.5]);
        assert_eq!(normalize(&i, NormMethod::None).unwrap(), i);
    }

    #[test]
    fn bin_examples() {
        assert_eq!(bin_quantize(&img(&[0.0, 10.0]), 2).unwrap().data(), &[0.0, 1.0]);
        let b = bin_quantize(&img(&[0.0, 3.0, 9.99, 10.0]), 4).unwrap();
        assert_eq!(b.data(), &[0.0, 1.0, 3.0, 3.0]);
        assert_eq!(b.declared_range(), Some((0.0, 3.0)));
        assert!(bin_quantize(&img(&[2.0, 2.0]), 4).is_err());
        assert!(bin_quantize(&img(&[0.0, 1.0]), 1).is_err());
    }

    #[test]
    fn linspace_bins_to_identity_permutation() {
        // brute force: every value i/255 must land in bin i
        let values: Vec<f64> = (0..256).map(|i| i as f64 / 255.0).collect();
        let b = bin_quantize(&img(&values), 256).unwrap();
        for (i, &v) in b.data().iter().enumerate() {
            assert_eq!(v, i as f64, "value index {i}");
        }
    }

    #[test]
    fn data_range_examples() {
        let r = img(&[0.0, 100.0]);
        let t = img(&[-20.0, 80.0]);
        assert_eq!(resolve_data_range(&r, &t, DataRangePolicy::Joint).unwrap(), 120.0);
        assert_eq!(resolve_data_range(&r, &t, DataRangePolicy::PerReference).unwrap(), 100.0);
        assert_eq!(resolve_data_range(&r, &t, DataRangePolicy::PerTest).unwrap(), 100.0);
        assert_eq!(resolve_data_range(&r, &t, DataRangePolicy::fixed(255.0).unwrap()).unwrap(), 255.0);
        let c = img(&[3.0, 3.0]);
        assert!(resolve_data_range(&c, &t, DataRangePolicy::PerReference).is_err());
        assert!(resolve_data_range(&c, &c, DataRangePolicy::Joint).is_err());
        assert!(DataRangePolicy::fixed(0.0).is_err());
    }

    #[test]
    fn string_forms_round_trip() {
        for s in ["none", "minmax", "zscore", "custom:a=1.5,b=2", "bin:256"] {
            assert_eq!(s.parse::<Preprocess>().unwrap().to_string(), s);
        }
        for s in ["joint", "ref", "test", "fixed:L=255"] {
            assert_eq!(s.parse::<DataRangePolicy>().unwrap().to_string(), s);
        }
        assert!("custom:a=1,b=0".parse::<NormMethod>().is_err());
        assert!("custom:a=1".parse::<NormMethod>().is_err());
        assert!("fixed:L=-1".parse::<DataRangePolicy>().is_err());
        assert!("minmaxx".parse::<NormMethod>().is_err());
        assert!("bin:1".parse::<Preprocess>().is_err());
    }

    fn values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 2..64).prop_filter("non-constant", |v| {
            v.iter().any(|&x| x != v[0])
        })
    }

    proptest! {
        #[test]
        fn minmax_spans_unit_interval(v in values()) {
            let s = normalize(&img(&v), NormMethod::MinMax).unwrap().stats();
            prop_assert!(s.min.abs() < 1e-12);
            prop_assert!((s.max - 1.0).abs() < 1e-12);
        }

        #[test]
        fn zscore_is_standardized(v in values()) {
            let s = normalize(&img(&v), NormMethod::ZScore).unwrap().stats();
            prop_assert!(s.mean.abs() < 1e-9);
            prop_assert!((s.std - 1.0).abs() < 1e-9);
        }

        #[test]
        fn binning_is_monotone(v in values(), bins in 2usize..600) {
            let b = bin_quantize(&img(&v), bins).unwrap();
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] <= v[j] {
                        prop_assert!(b.data()[i] <= b.data()[j]);
                    }
                }
            }
        }

        #[test]
        fn binning_ignores_affine_prenormalization(v in values(), bins in 2usize..600,
                                                   a in -50.0f64..50.0, scale_exp in -4i32..5) {
            let scale = 2f64.powi(scale_exp);
            let i = img(&v);
            let direct = bin_quantize(&i, bins).unwrap();
            let shifted = normalize(&i, NormMethod::custom(a, scale).unwrap()).unwrap();
            let pre = bin_quantize(&shifted, bins).unwrap();
            prop_assert_eq!(direct.data(), pre.data());
            for m in [NormMethod::MinMax, NormMethod::ZScore] {
                let pre = bin_quantize(&normalize(&i, m).unwrap(), bins).unwrap();
                prop_assert_eq!(direct.data(), pre.data());
            }
        }

        #[test]
        fn joint_range_dominates(r in values(), t in values()) {
            let (r, t) = (img(&r), img(&t));
            let j = resolve_data_range(&r, &t, DataRangePolicy::Joint).unwrap();
            let lr = resolve_data_range(&r, &t, DataRangePolicy::PerReference).unwrap();
            let lt = resolve_data_range(&r, &t, DataRangePolicy::PerTest).unwrap();
            prop_assert!(j >= lr.max(lt));
        }
    }
}
