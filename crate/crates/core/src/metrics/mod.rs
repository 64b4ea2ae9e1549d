//! Full-reference metrics: error metrics, the SSIM family, statistical
//! dependency metrics and DICE overlap, plus masked evaluation.
//!
//! Every score carries a canonical parameter fingerprint (`key=value` pairs
//! sorted by key, `;`-separated) that is sufficient to reproduce it.
//!
//! Masking: pointwise metrics (`mae`, `mse`, `psnr`, `pcc`, `mi`, `nmi`) are
//! computed over the masked locations only. Windowed metrics (`ssim`,
//! `ms_ssim`, `cw_ssim` and plugins) combine neighboring pixels, so they
//! accept only masks that fill a rectangle and are then evaluated on the crop.

mod cwssim;
mod fingerprint;
mod info;
mod pointwise;
mod registry;
mod ssim;

use std::fmt;
use std::str::FromStr;

pub use cwssim::{cw_ssim, CwSsimParams};
pub use fingerprint::Fingerprint;
pub use info::{entropy, mi, nmi, HistRange, HistogramParams};
pub use pointwise::{mae, mse, pcc, psnr};
pub use registry::{MetricRegistry, ReferenceMetric};
pub use ssim::{ms_ssim, ssim, ssim_map_means, MsSsimParams, SsimParams, Window, MS_SSIM_WEIGHTS};

use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::normalize::DataRangePolicy;

/// Exact metric identifiers.
pub const METRIC_IDS: [&str; 10] = [
    "mae", "mse", "psnr", "ssim", "ms_ssim", "cw_ssim", "pcc", "mi", "nmi", "dice",
];

/// A computed score with its identity and parameters.
///
/// PSNR of identical images is `f64::INFINITY`, rendered as `inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub value: f64,
    pub metric_id: String,
    pub params_fingerprint: String,
}

impl MetricScore {
    pub fn new(value: f64, metric_id: impl Into<String>, fingerprint: &Fingerprint) -> Self {
        MetricScore {
            value,
            metric_id: metric_id.into(),
            params_fingerprint: fingerprint.to_string(),
        }
    }

    pub fn value_string(&self) -> String {
        format_score(self.value)
    }
}

/// Renders a score; the PSNR sentinel becomes `inf`.
pub fn format_score(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn parse_score(s: &str) -> Result<f64> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    s.parse()
        .map_err(|_| Error::InvalidParam(format!("bad score `{s}`")))
}

/// One image metric with all of its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Mae,
    Mse,
    Psnr { range: DataRangePolicy },
    Ssim(SsimParams),
    MsSsim(MsSsimParams),
    CwSsim(CwSsimParams),
    Pcc,
    Mi(HistogramParams),
    Nmi(HistogramParams),
}

/// Shared knobs used when building specs from bare metric ids.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricOptions {
    pub range: DataRangePolicy,
    pub bins: Option<usize>,
}

impl MetricSpec {
    /// Spec with default parameters for `id`, overridden by `opts`.
    pub fn from_id(id: &str, opts: MetricOptions) -> Result<Self> {
        let hist = || {
            let mut h = HistogramParams::default();
            if let Some(b) = opts.bins {
                h.bins = b;
            }
            h.validate().map(|_| h)
        };
        Ok(match id {
            "mae" => MetricSpec::Mae,
            "mse" => MetricSpec::Mse,
            "psnr" => MetricSpec::Psnr { range: opts.range },
            "ssim" => MetricSpec::Ssim(SsimParams {
                range: opts.range,
                ..SsimParams::default()
            }),
            "ms_ssim" => MetricSpec::MsSsim(MsSsimParams {
                base: SsimParams {
                    range: opts.range,
                    ..SsimParams::default()
                },
                ..MsSsimParams::default()
            }),
            "cw_ssim" => MetricSpec::CwSsim(CwSsimParams::default()),
            "pcc" => MetricSpec::Pcc,
            "mi" => MetricSpec::Mi(hist()?),
            "nmi" => MetricSpec::Nmi(hist()?),
            "dice" => {
                return Err(Error::InvalidParam(
                    "`dice` compares masks; use downstream::task_similarity for images".into(),
                ))
            }
            other => return Err(Error::InvalidParam(format!("unknown metric id `{other}`"))),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            MetricSpec::Mae => "mae",
            MetricSpec::Mse => "mse",
            MetricSpec::Psnr { .. } => "psnr",
            MetricSpec::Ssim(_) => "ssim",
            MetricSpec::MsSsim(_) => "ms_ssim",
            MetricSpec::CwSsim(_) => "cw_ssim",
            MetricSpec::Pcc => "pcc",
            MetricSpec::Mi(_) => "mi",
            MetricSpec::Nmi(_) => "nmi",
        }
    }

    /// Metrics that combine neighboring pixels.
    pub fn is_windowed(&self) -> bool {
        matches!(self, MetricSpec::Ssim(_) | MetricSpec::MsSsim(_) | MetricSpec::CwSsim(_))
    }

    /// MAE, MSE and PSNR.
    pub fn is_error_metric(&self) -> bool {
        matches!(self, MetricSpec::Mae | MetricSpec::Mse | MetricSpec::Psnr { .. })
    }

    pub fn data_range(&self) -> Option<DataRangePolicy> {
        match self {
            MetricSpec::Psnr { range } => Some(*range),
            MetricSpec::Ssim(p) => Some(p.range),
            MetricSpec::MsSsim(p) => Some(p.base.range),
            _ => None,
        }
    }

    pub fn histogram(&self) -> Option<&HistogramParams> {
        match self {
            MetricSpec::Mi(h) | MetricSpec::Nmi(h) => Some(h),
            _ => None,
        }
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut fp = Fingerprint::new();
        fp.insert("metric", self.id());
        match self {
            MetricSpec::Mae | MetricSpec::Mse | MetricSpec::Pcc => {}
            MetricSpec::Psnr { range } => fp.insert("range", range),
            MetricSpec::Ssim(p) => p.write_fingerprint(&mut fp),
            MetricSpec::MsSsim(p) => p.write_fingerprint(&mut fp),
            MetricSpec::CwSsim(p) => p.write_fingerprint(&mut fp),
            MetricSpec::Mi(h) | MetricSpec::Nmi(h) => h.write_fingerprint(&mut fp),
        }
        fp
    }

    /// Rebuilds a spec from the metric keys of a fingerprint. Unrelated keys
    /// (added by the harness) are ignored.
    pub fn from_fingerprint(fp: &Fingerprint) -> Result<Self> {
        let id = fp.require("metric")?;
        Ok(match id {
            "mae" => MetricSpec::Mae,
            "mse" => MetricSpec::Mse,
            "pcc" => MetricSpec::Pcc,
            "psnr" => MetricSpec::Psnr {
                range: fp.require("range")?.parse()?,
            },
            "ssim" => MetricSpec::Ssim(SsimParams::from_fingerprint(fp)?),
            "ms_ssim" => MetricSpec::MsSsim(MsSsimParams::from_fingerprint(fp)?),
            "cw_ssim" => MetricSpec::CwSsim(CwSsimParams::from_fingerprint(fp)?),
            "mi" => MetricSpec::Mi(HistogramParams::from_fingerprint(fp)?),
            "nmi" => MetricSpec::Nmi(HistogramParams::from_fingerprint(fp)?),
            other => return Err(Error::InvalidParam(format!("fingerprint names unknown metric `{other}`"))),
        })
    }

    fn eval_values(&self, reference: &[f64], test: &[f64]) -> Result<f64> {
        match self {
            MetricSpec::Mae => Ok(pointwise::mae_values(reference, test)),
            MetricSpec::Mse => Ok(pointwise::mse_values(reference, test)),
            MetricSpec::Psnr { range } => pointwise::psnr_values(reference, test, *range),
            MetricSpec::Pcc => pointwise::pcc_values(reference, test),
            MetricSpec::Mi(h) => info::mi_values(reference, test, h),
            MetricSpec::Nmi(h) => info::nmi_values(reference, test, h),
            _ => unreachable!("windowed metric evaluated pointwise"),
        }
    }

    /// Evaluates the metric on a reference/test pair.
    pub fn evaluate(&self, reference: &Image, test: &Image) -> Result<MetricScore> {
        check_dims(reference, test)?;
        let value = match self {
            MetricSpec::Ssim(p) => ssim::ssim_value(reference, test, p)?,
            MetricSpec::MsSsim(p) => ssim::ms_ssim_value(reference, test, p)?,
            MetricSpec::CwSsim(p) => cwssim::cw_ssim_value(reference, test, p)?,
            _ => self.eval_values(reference.data(), test.data())?,
        };
        Ok(MetricScore::new(value, self.id(), &self.fingerprint()))
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fingerprint().fmt(f)
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    /// Accepts a bare id (defaults) or a full fingerprint.
    fn from_str(s: &str) -> Result<Self> {
        if s.contains('=') {
            MetricSpec::from_fingerprint(&s.parse()?)
        } else {
            MetricSpec::from_id(s, MetricOptions::default())
        }
    }
}

pub(crate) fn check_dims(reference: &Image, test: &Image) -> Result<()> {
    if reference.dims() != test.dims() {
        return Err(Error::DimsMismatch(format!(
            "reference {} vs test {}",
            reference.dims(),
            test.dims()
        )));
    }
    Ok(())
}

/// DICE overlap `2|A ∩ B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<MetricScore> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch(format!("masks {} vs {}", a.dims(), b.dims())));
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += usize::from(x);
        nb += usize::from(y);
        inter += usize::from(x && y);
    }
    let value = if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    };
    let mut fp = Fingerprint::new();
    fp.insert("metric", "dice");
    Ok(MetricScore::new(value, "dice", &fp))
}

/// Evaluates `spec` restricted to the true elements of `mask`.
///
/// The fingerprint gains a `mask=pointwise` or `mask=rect:<origin>:<extent>`
/// entry. For a rectangular mask the score is bit-identical to evaluating on
/// the cropped images.
pub fn masked_evaluate(spec: &MetricSpec, reference: &Image, test: &Image, mask: &Mask) -> Result<MetricScore> {
    check_dims(reference, test)?;
    check_mask(reference, mask)?;
    let mut fp = spec.fingerprint();
    let value = if spec.is_windowed() {
        let rect = mask.as_rect().ok_or_else(|| Error::NonRectangularMask {
            metric: spec.id().to_string(),
        })?;
        fp.insert("mask", fingerprint::rect_string(&rect));
        spec.evaluate(&reference.crop(&rect)?, &test.crop(&rect)?)?.value
    } else {
        fp.insert("mask", "pointwise");
        let r = reference.masked_values(mask)?;
        let t = test.masked_values(mask)?;
        spec.eval_values(&r, &t)?
    };
    Ok(MetricScore::new(value, spec.id(), &fp))
}

/// Masked evaluation of a plugin metric: always treated as windowed.
pub fn masked_evaluate_plugin(
    metric: &dyn ReferenceMetric,
    reference: &Image,
    test: &Image,
    mask: &Mask,
) -> Result<MetricScore> {
    check_dims(reference, test)?;
    check_mask(reference, mask)?;
    let rect = mask.as_rect().ok_or_else(|| Error::NonRectangularMask {
        metric: metric.id().to_string(),
    })?;
    let mut fp = metric.fingerprint();
    fp.insert("mask", fingerprint::rect_string(&rect));
    let value = metric.evaluate(&reference.crop(&rect)?, &test.crop(&rect)?)?;
    Ok(MetricScore::new(value, metric.id(), &fp))
}

fn check_mask(img: &Image, mask: &Mask) -> Result<()> {
    if mask.dims() != img.dims() {
        return Err(Error::DimsMismatch(format!("mask {} vs image {}", mask.dims(), img.dims())));
    }
    if !mask.any() {
        return Err(Error::EmptyMask("evaluation mask has no true element".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Dims, Rect};

    fn pair() -> (Image, Image) {
        let r = Image::from_fn_2d(24, 20, |x, y| ((x * 7 + y * 13) % 17) as f64 + 0.5 * y as f64).unwrap();
        let t = Image::from_fn_2d(24, 20, |x, y| ((x * 5 + y * 11) % 19) as f64 + 0.3 * x as f64).unwrap();
        (r, t)
    }

    fn all_specs() -> Vec<MetricSpec> {
        let opts = MetricOptions::default();
        ["mae", "mse", "psnr", "ssim", "pcc", "mi", "nmi"]
            .iter()
            .map(|id| MetricSpec::from_id(id, opts).unwrap())
            .collect()
    }

    #[test]
    fn dice_examples() {
        let d = Dims::new_2d(4, 2);
        let a = Mask::from_fn_2d(4, 2, |_, y| y == 0);
        assert_eq!(dice(&a, &a).unwrap().value, 1.0);
        let b = Mask::from_fn_2d(4, 2, |_, y| y == 1);
        assert_eq!(dice(&a, &b).unwrap().value, 0.0);
        let c = Mask::from_fn_2d(4, 2, |x, _| x < 2);
        assert_eq!(dice(&a, &c).unwrap().value, 0.5);
        assert_eq!(dice(&Mask::empty(d), &Mask::empty(d)).unwrap().value, 1.0);
        assert_eq!(dice(&a, &Mask::empty(d)).unwrap().value, 0.0);
        assert!(dice(&a, &Mask::empty(Dims::new_2d(2, 2))).is_err());
    }

    #[test]
    fn full_mask_matches_unmasked() {
        let (r, t) = pair();
        let full = Mask::full(r.dims());
        for spec in all_specs() {
            let plain = spec.evaluate(&r, &t).unwrap().value;
            let masked = masked_evaluate(&spec, &r, &t, &full).unwrap().value;
            assert_eq!(plain.to_bits(), masked.to_bits(), "{}", spec.id());
        }
    }

    #[test]
    fn rect_mask_is_bit_equal_to_crop() {
        let (r, t) = pair();
        let rect = Rect::new_2d(3, 2, 15, 14);
        let mask = Mask::from_rect(r.dims(), &rect).unwrap();
        for spec in all_specs() {
            let cropped = spec.evaluate(&r.crop(&rect).unwrap(), &t.crop(&rect).unwrap()).unwrap();
            let masked = masked_evaluate(&spec, &r, &t, &mask).unwrap();
            assert_eq!(cropped.value.to_bits(), masked.value.to_bits(), "{}", spec.id());
        }
    }

    #[test]
    fn checkerboard_mask_rejected_for_windowed() {
        let (r, t) = pair();
        let checker = Mask::from_fn_2d(24, 20, |x, y| (x + y) % 2 == 0);
        let spec = MetricSpec::from_id("ssim", MetricOptions::default()).unwrap();
        let err = masked_evaluate(&spec, &r, &t, &checker).unwrap_err();
        assert!(matches!(err, Error::NonRectangularMask { .. }));
        assert!(err.to_string().contains("filled rectangle"));
        // pointwise metrics accept it
        assert!(masked_evaluate(&MetricSpec::Mae, &r, &t, &checker).is_ok());
        assert!(masked_evaluate(&MetricSpec::Mae, &r, &t, &Mask::empty(r.dims())).is_err());
    }

    #[test]
    fn specs_round_trip_through_fingerprints() {
        for spec in all_specs().into_iter().chain([
            MetricSpec::MsSsim(MsSsimParams::default()),
            MetricSpec::CwSsim(CwSsimParams::default()),
            MetricSpec::Ssim(SsimParams {
                range: DataRangePolicy::Fixed(255.0),
                window: Window::Uniform { side: 7 },
                ..SsimParams::default()
            }),
        ]) {
            let fp = spec.fingerprint().to_string();
            let back: MetricSpec = fp.parse().unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.fingerprint().to_string(), fp);
        }
    }

    #[test]
    fn fingerprint_keys_are_sorted() {
        let fp = MetricSpec::from_id("ssim", MetricOptions::default()).unwrap().fingerprint().to_string();
        let keys: Vec<&str> = fp.split(';').map(|kv| kv.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(fp, "k1=0.01;k2=0.03;metric=ssim;range=joint;window=gaussian:1.5:5");
    }

    #[test]
    fn unknown_ids_rejected() {
        assert!(MetricSpec::from_id("lpips", MetricOptions::default()).is_err());
        assert!(MetricSpec::from_id("dice", MetricOptions::default()).is_err());
    }
}
