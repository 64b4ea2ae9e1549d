//! Configuration lints: machine-checkable warnings about evaluation setups
//! known to distort similarity scores. Lints never change scores.
//!
//! | code | fires when |
//! |------|------------|
//! | W01 | image ranges differ by more than 5% of the larger one and no normalization is applied |
//! | W02 | a per-image data range (`ref`/`test`) is used while the evaluated ranges differ |
//! | W03 | a non-rectangular mask is combined with a windowed metric (error grade) |
//! | W04 | MI/NMI internal bins differ from the pre-binning bin count |
//! | W05 | a blur is configured but the panel holds only error metrics |

use std::fmt;

use serde::Serialize;

use crate::distort::Chain;
use crate::image::{Image, Mask};
use crate::metrics::MetricSpec;
use crate::normalize::{NormMethod, Preprocess};

/// Relative range difference above which two images count as differently scaled.
pub const RANGE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lint {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Lint {
    fn new(severity: Severity, code: &str, message: String) -> Self {
        Lint {
            severity,
            code: code.to_string(),
            message,
        }
    }
}

impl fmt::Display for Lint {
    /// `code<TAB>severity<TAB>message`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.code, self.severity, self.message)
    }
}

/// What is about to be evaluated: metric panel, preprocessing applied to both
/// images, optional mask and the distortion chain that produced the test image.
#[derive(Debug, Clone, Default)]
pub struct EvalSettings {
    pub panel: Vec<MetricSpec>,
    pub preprocess: Preprocess,
    pub mask: Option<Mask>,
    pub chain: Chain,
}

fn ranges_differ(a: f64, b: f64) -> bool {
    (a - b).abs() > RANGE_TOLERANCE * a.max(b)
}

/// Lints for evaluating `test` against `reference` under `settings`.
pub fn lint_configuration(reference: &Image, test: &Image, settings: &EvalSettings) -> Vec<Lint> {
    let mut out = Vec::new();
    let (lr, lt) = (reference.stats().range(), test.stats().range());

    if settings.preprocess == Preprocess::Norm(NormMethod::None) && ranges_differ(lr, lt) {
        out.push(Lint::new(
            Severity::Warning,
            "W01",
            format!("intensity ranges differ ({lr} vs {lt}) and no normalization is applied"),
        ));
    }

    let per_image: Vec<String> = settings
        .panel
        .iter()
        .filter(|m| m.data_range().is_some_and(|r| r.is_per_image()))
        .map(|m| format!("{}[range={}]", m.id(), m.data_range().unwrap()))
        .collect();
    if !per_image.is_empty() {
        let pre = |img: &Image| settings.preprocess.apply(img).map(|i| i.stats().range()).unwrap_or(img.stats().range());
        let (pr, pt) = (pre(reference), pre(test));
        if ranges_differ(pr, pt) {
            out.push(Lint::new(
                Severity::Warning,
                "W02",
                format!(
                    "{} use a single image's data range while the evaluated ranges differ ({pr} vs {pt}); \
                     scores depend on which image is called the reference",
                    per_image.join(", ")
                ),
            ));
        }
    }

    if let Some(mask) = &settings.mask {
        if mask.as_rect().is_none() {
            let windowed: Vec<&str> = settings.panel.iter().filter(|m| m.is_windowed()).map(|m| m.id()).collect();
            if !windowed.is_empty() {
                out.push(Lint::new(
                    Severity::Error,
                    "W03",
                    format!(
                        "mask is not a filled rectangle but {} combine neighboring pixels; \
                         use a rectangular mask (evaluated as a crop) or pointwise metrics",
                        windowed.join(", ")
                    ),
                ));
            }
        }
    }

    if let Some(pre) = settings.preprocess.bins() {
        let clashing: Vec<String> = settings
            .panel
            .iter()
            .filter_map(|m| m.histogram().filter(|h| h.bins != pre).map(|h| format!("{}[bins={}]", m.id(), h.bins)))
            .collect();
        if !clashing.is_empty() {
            out.push(Lint::new(
                Severity::Warning,
                "W04",
                format!(
                    "images are pre-binned to {pre} bins but {} histogram with a different bin count",
                    clashing.join(", ")
                ),
            ));
        }
    }

    if settings.chain.has_blur() && !settings.panel.is_empty() && settings.panel.iter().all(|m| m.is_error_metric()) {
        out.push(Lint::new(
            Severity::Warning,
            "W05",
            "a blur is applied but the panel has only error metrics (mae/mse/psnr), which tend to reward \
             blurring; add nmi or a structural metric"
                .to_string(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{HistogramParams, MetricOptions};
    use crate::normalize::DataRangePolicy;

    fn spec(id: &str) -> MetricSpec {
        MetricSpec::from_id(id, MetricOptions::default()).unwrap()
    }

    fn pair(scale: f64) -> (Image, Image) {
        let r = Image::from_fn_2d(16, 16, |x, y| ((x * 5 + y * 3) % 13) as f64).unwrap();
        let t = r.map(|v| v * scale).unwrap();
        (r, t)
    }

    fn codes(l: &[Lint]) -> Vec<&str> {
        l.iter().map(|l| l.code.as_str()).collect()
    }

    #[test]
    fn clean_setup_is_silent() {
        let (r, t) = pair(1.0);
        let s = EvalSettings {
            panel: vec![spec("ssim"), spec("psnr"), spec("nmi")],
            preprocess: Preprocess::Norm(NormMethod::MinMax),
            ..EvalSettings::default()
        };
        assert!(lint_configuration(&r, &t, &s).is_empty());
    }

    #[test]
    fn mismatched_ranges_without_normalization() {
        let (r, t) = pair(255.0);
        let s = EvalSettings {
            panel: vec![spec("mae")],
            ..EvalSettings::default()
        };
        assert_eq!(codes(&lint_configuration(&r, &t, &s)), ["W01"]);
    }

    #[test]
    fn per_image_range_policy() {
        let (r, t) = pair(1.2);
        let opts = MetricOptions {
            range: DataRangePolicy::PerReference,
            bins: None,
        };
        let s = EvalSettings {
            panel: vec![MetricSpec::from_id("ssim", opts).unwrap()],
            preprocess: Preprocess::Norm(NormMethod::custom(0.0, 2.0).unwrap()),
            ..EvalSettings::default()
        };
        assert_eq!(codes(&lint_configuration(&r, &t, &s)), ["W02"]);
        // minmax equalizes the ranges
        let s = EvalSettings {
            preprocess: Preprocess::Norm(NormMethod::MinMax),
            ..s
        };
        assert!(lint_configuration(&r, &t, &s).is_empty());
    }

    #[test]
    fn checkerboard_mask_with_windowed_metric_is_an_error() {
        let (r, t) = pair(1.0);
        let s = EvalSettings {
            panel: vec![spec("ssim"), spec("mae")],
            mask: Some(Mask::from_fn_2d(16, 16, |x, y| (x + y) % 2 == 0)),
            ..EvalSettings::default()
        };
        let l = lint_configuration(&r, &t, &s);
        assert_eq!(codes(&l), ["W03"]);
        assert_eq!(l[0].severity, Severity::Error);
    }

    #[test]
    fn bin_mismatch_and_blur_only_error_metrics() {
        let (r, t) = pair(1.0);
        let s = EvalSettings {
            panel: vec![MetricSpec::Nmi(HistogramParams::with_bins(128))],
            preprocess: Preprocess::Bin(256),
            ..EvalSettings::default()
        };
        assert_eq!(codes(&lint_configuration(&r, &t, &s)), ["W04"]);
        let s = EvalSettings {
            panel: vec![spec("mse"), spec("psnr")],
            chain: "gaussian_blur(sigma=1)".parse().unwrap(),
            ..EvalSettings::default()
        };
        assert_eq!(codes(&lint_configuration(&r, &t, &s)), ["W05"]);
    }
}
