//! The five built-in pitfall scenarios and the scenario runner.
//!
//! Every report row carries a fingerprint that merges the metric parameters
//! with the harness configuration (phantom knobs and seed, distortion chain,
//! preprocessing, region of interest), so [`reevaluate`] can rebuild the score
//! from the fingerprint alone.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::distort::{crop_fraction_rect, Axis, Chain, DistortionSpec};
use crate::downstream::{task_similarity, SegmenterParams};
use crate::error::{Error, Result};
use crate::image::{bounding_box, Image, Mask};
use crate::metrics::{masked_evaluate, Fingerprint, HistogramParams, MetricOptions, MetricSpec};
use crate::normalize::{DataRangePolicy, NormMethod, Preprocess};

use super::lint::{lint_configuration, EvalSettings};
use super::phantom::{generate_phantom, Phantom, PhantomParams, TumorHalf};
use super::report::{Report, ReportRow, MEAN_CASE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    Pitfall1,
    Pitfall2,
    Pitfall3,
    Pitfall4,
    Pitfall5,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::Pitfall1,
        ScenarioId::Pitfall2,
        ScenarioId::Pitfall3,
        ScenarioId::Pitfall4,
        ScenarioId::Pitfall5,
    ];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as usize + 1;
        write!(f, "pitfall{n}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (expected pitfall1..pitfall5)")))
    }
}

/// Region a variant is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roi {
    Full,
    /// Symmetric crop of both images, as a rectangular mask.
    CropFraction(f64),
    /// Bounding box of the phantom foreground, as a rectangular mask.
    ForegroundBox,
    /// The phantom foreground itself; pointwise metrics only.
    Foreground,
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Roi::Full => f.write_str("full"),
            Roi::CropFraction(c) => write!(f, "crop_fraction:{c}"),
            Roi::ForegroundBox => f.write_str("bbox:foreground"),
            Roi::Foreground => f.write_str("foreground"),
        }
    }
}

impl FromStr for Roi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Roi::Full),
            "bbox:foreground" => Ok(Roi::ForegroundBox),
            "foreground" => Ok(Roi::Foreground),
            _ => s
                .strip_prefix("crop_fraction:")
                .and_then(|c| c.parse().ok())
                .map(Roi::CropFraction)
                .ok_or_else(|| Error::InvalidParam(format!("unknown roi `{s}`"))),
        }
    }
}

impl Roi {
    fn mask(&self, phantom: &Phantom) -> Result<Option<Mask>> {
        let dims = phantom.image.dims();
        Ok(match *self {
            Roi::Full => None,
            Roi::CropFraction(c) => Some(Mask::from_rect(dims, &crop_fraction_rect(&dims, c)?)?),
            Roi::ForegroundBox => Some(Mask::from_rect(dims, &bounding_box(&phantom.foreground_mask)?)?),
            Roi::Foreground => Some(phantom.foreground_mask.clone()),
        })
    }
}

/// An entry of a variant's metric panel.
#[derive(Debug, Clone, PartialEq)]
pub enum PanelMetric {
    Image(MetricSpec),
    /// Proxy-task DICE of threshold segmentations.
    TaskDice(SegmenterParams),
}

impl PanelMetric {
    pub fn id(&self) -> &'static str {
        match self {
            PanelMetric::Image(m) => m.id(),
            PanelMetric::TaskDice(_) => "dice",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    /// Applied to the reference to produce the test image.
    pub chain: Chain,
    /// Applied to both images before evaluation.
    pub preprocess: Preprocess,
    pub panel: Vec<PanelMetric>,
    pub roi: Roi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub variants: Vec<Variant>,
    /// Tumor placement the scenario depends on, if any.
    pub tumor_half: Option<TumorHalf>,
}

/// Knobs shared by the built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub segmenter: SegmenterParams,
    /// Seed of the additive noise in the pitfall4 scenario (the same noise field for every case).
    pub noise_seed: u64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            segmenter: SegmenterParams::default(),
            noise_seed: 1,
        }
    }
}

fn metric(id: &str) -> PanelMetric {
    PanelMetric::Image(MetricSpec::from_id(id, MetricOptions::default()).expect("builtin metric id"))
}

fn ranged(id: &str, range: DataRangePolicy) -> PanelMetric {
    PanelMetric::Image(MetricSpec::from_id(id, MetricOptions { range, bins: None }).expect("builtin metric id"))
}

fn chain(steps: Vec<DistortionSpec>) -> Chain {
    Chain::new(steps)
}

fn variant(label: &str, chain: Chain, preprocess: Preprocess, panel: Vec<PanelMetric>, roi: Roi) -> Variant {
    Variant {
        label: label.to_string(),
        chain,
        preprocess,
        panel,
        roi,
    }
}

impl Scenario {
    pub fn builtin(id: ScenarioId, opts: &ScenarioOptions) -> Scenario {
        let none = Preprocess::Norm(NormMethod::None);
        let mirror = DistortionSpec::MirrorReplace { axis: Axis::Y };
        match id {
            ScenarioId::Pitfall1 => {
                let policies = [DataRangePolicy::Joint, DataRangePolicy::PerReference, DataRangePolicy::PerTest];
                let mut panel = vec![metric("mae"), metric("mse")];
                panel.extend(policies.iter().map(|&p| ranged("psnr", p)));
                panel.extend(policies.iter().map(|&p| ranged("ssim", p)));
                panel.extend([metric("ms_ssim"), metric("pcc"), metric("mi")]);
                panel.extend([128, 256, 512].map(|b| PanelMetric::Image(MetricSpec::Nmi(HistogramParams::with_bins(b)))));
                let transform = chain(vec![
                    DistortionSpec::Gamma { gamma: 0.4 },
                    DistortionSpec::LinearScale { factor: 1.2 },
                ]);
                let variants = [
                    ("none", none),
                    ("minmax", Preprocess::Norm(NormMethod::MinMax)),
                    ("zscore", Preprocess::Norm(NormMethod::ZScore)),
                    ("bin256", Preprocess::Bin(256)),
                ]
                .into_iter()
                .map(|(label, pre)| variant(label, transform.clone(), pre, panel.clone(), Roi::Full))
                .collect();
                Scenario {
                    id,
                    variants,
                    tumor_half: None,
                }
            }
            ScenarioId::Pitfall2 => {
                let panel: Vec<PanelMetric> = ["mae", "mse", "psnr", "ssim", "ms_ssim", "cw_ssim", "pcc", "nmi"]
                    .into_iter()
                    .map(metric)
                    .collect();
                let variants = (1..=4)
                    .map(|dx| {
                        let c = chain(vec![DistortionSpec::Translate { dx, dy: 0, dz: 0 }]);
                        variant(&format!("shift{dx}px"), c, none, panel.clone(), Roi::Full)
                    })
                    .collect();
                Scenario {
                    id,
                    variants,
                    tumor_half: None,
                }
            }
            ScenarioId::Pitfall3 => {
                let pointwise: Vec<PanelMetric> = ["mae", "mse", "psnr", "pcc", "nmi"].into_iter().map(metric).collect();
                let mut windowed = pointwise.clone();
                windowed.insert(3, metric("ssim"));
                let c = chain(vec![mirror]);
                let variants = vec![
                    variant("full", c.clone(), none, windowed.clone(), Roi::Full),
                    variant("crop3%", c.clone(), none, windowed.clone(), Roi::CropFraction(0.03)),
                    variant("bbox", c.clone(), none, windowed, Roi::ForegroundBox),
                    variant("foreground-mask", c, none, pointwise, Roi::Foreground),
                ];
                Scenario {
                    id,
                    variants,
                    tumor_half: Some(TumorHalf::Lower),
                }
            }
            ScenarioId::Pitfall4 => {
                let panel: Vec<PanelMetric> = ["mae", "mse", "psnr", "ssim", "ms_ssim", "cw_ssim", "pcc", "nmi"]
                    .into_iter()
                    .map(metric)
                    .collect();
                let bases: [(&str, Vec<DistortionSpec>); 4] = [
                    ("reference", vec![]),
                    (
                        "stripes",
                        vec![DistortionSpec::Stripes {
                            period: 8,
                            amplitude_rel: 0.25,
                            axis: Axis::Y,
                        }],
                    ),
                    (
                        "noise",
                        vec![DistortionSpec::GaussianNoise {
                            sigma_rel: 0.05,
                            seed: opts.noise_seed,
                        }],
                    ),
                    ("mirror", vec![mirror]),
                ];
                let mut variants = Vec::new();
                for (label, steps) in bases {
                    variants.push(variant(label, chain(steps.clone()), none, panel.clone(), Roi::Full));
                    for sigma in [0.5, 1.0, 2.0] {
                        let mut s = steps.clone();
                        s.push(DistortionSpec::GaussianBlur { sigma });
                        variants.push(variant(&format!("{label}+blur{sigma}"), chain(s), none, panel.clone(), Roi::Full));
                    }
                }
                Scenario {
                    id,
                    variants,
                    tumor_half: None,
                }
            }
            ScenarioId::Pitfall5 => {
                let mut panel: Vec<PanelMetric> = ["mae", "psnr", "ssim", "ms_ssim", "nmi"].into_iter().map(metric).collect();
                panel.push(PanelMetric::TaskDice(opts.segmenter));
                let variants = vec![
                    variant("reference", Chain::default(), none, panel.clone(), Roi::Full),
                    variant("mirror", chain(vec![mirror]), none, panel, Roi::Full),
                ];
                Scenario {
                    id,
                    variants,
                    tumor_half: Some(TumorHalf::Lower),
                }
            }
        }
    }

    pub fn phantom_params(&self, base: &PhantomParams) -> PhantomParams {
        match self.tumor_half {
            Some(h) => base.with_half(h),
            None => *base,
        }
    }
}

/// Phantoms for `scenario` with seeds `seed, seed + 1, ...`.
pub fn phantoms_for(scenario: &Scenario, params: &PhantomParams, seed: u64, count: usize) -> Result<Vec<(Phantom, PhantomParams)>> {
    let p = scenario.phantom_params(params);
    (0..count as u64)
        .into_par_iter()
        .map(|i| Ok((generate_phantom(seed.wrapping_add(i), &p)?, p)))
        .collect()
}

pub fn case_id(seed: u64) -> String {
    format!("case-{seed:04}")
}

fn harness_fingerprint(params: &PhantomParams, seed: u64, v: &Variant) -> Fingerprint {
    let mut fp = Fingerprint::new();
    params.write_fingerprint(&mut fp);
    fp.insert("phantom_seed", seed);
    fp.insert("chain", &v.chain);
    fp.insert("preprocess", v.preprocess);
    fp.insert("roi", v.roi);
    fp
}

/// Scores one panel entry for one phantom; returns the score and its full fingerprint.
fn evaluate_entry(
    phantom: &Phantom,
    params: &PhantomParams,
    v: &Variant,
    images: &(Image, Image),
    entry: &PanelMetric,
) -> Result<(f64, Fingerprint)> {
    let (r, t) = images;
    let mut fp = harness_fingerprint(params, phantom.seed, v);
    match entry {
        PanelMetric::Image(spec) => {
            let score = match v.roi.mask(phantom)? {
                None => spec.evaluate(r, t)?,
                Some(mask) => masked_evaluate(spec, r, t, &mask)?,
            };
            fp.merge(&score.params_fingerprint.parse()?);
            Ok((score.value, fp))
        }
        PanelMetric::TaskDice(seg) => {
            if v.roi != Roi::Full {
                return Err(Error::Config("proxy-task DICE is evaluated on full images only".into()));
            }
            let score = task_similarity(r, t, seg)?;
            fp.merge(&score.params_fingerprint.parse()?);
            Ok((score.value, fp))
        }
    }
}

fn prepare(phantom: &Phantom, v: &Variant) -> Result<(Image, Image)> {
    let test = v.chain.apply(&phantom.image)?;
    Ok((v.preprocess.apply(&phantom.image)?, v.preprocess.apply(&test)?))
}

fn context(scenario: ScenarioId, v: &Variant, seed: u64) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Config(format!("{scenario}/{} on {}: {e}", v.label, case_id(seed)))
}

/// (variant, metric id, fingerprint without the phantom seed)
type GroupKey = (String, String, String);

/// Runs every variant of `scenario` on every phantom and appends per-variant
/// mean rows. The result does not depend on thread scheduling.
pub fn run_scenario(scenario: &Scenario, phantoms: &[(Phantom, PhantomParams)]) -> Result<Report> {
    if phantoms.is_empty() {
        return Err(Error::Config(format!("{}: no phantoms to evaluate", scenario.id)));
    }
    if let Some(half) = scenario.tumor_half {
        if let Some((p, _)) = phantoms.iter().find(|(p, _)| p.tumor_half != half) {
            return Err(Error::Config(format!(
                "{} needs tumors in the {half} half, {} has one in the {} half",
                scenario.id,
                case_id(p.seed),
                p.tumor_half
            )));
        }
    }
    let sid = scenario.id.to_string();
    let per_case: Vec<Vec<ReportRow>> = phantoms
        .par_iter()
        .map(|(phantom, params)| {
            let mut rows = Vec::new();
            for v in &scenario.variants {
                let ctx = context(scenario.id, v, phantom.seed);
                let images = prepare(phantom, v).map_err(&ctx)?;
                for entry in &v.panel {
                    let (score, fp) = evaluate_entry(phantom, params, v, &images, entry).map_err(&ctx)?;
                    rows.push(ReportRow {
                        case_id: case_id(phantom.seed),
                        scenario: sid.clone(),
                        variant: v.label.clone(),
                        metric_id: entry.id().to_string(),
                        params_fingerprint: fp.to_string(),
                        score,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut report = Report {
        rows: per_case.into_iter().flatten().collect(),
        ..Report::default()
    };
    report.sort();

    // mean rows: group on the fingerprint without the case seed
    let mut groups: BTreeMap<GroupKey, (Vec<u64>, Vec<f64>)> = BTreeMap::new();
    for row in &report.rows {
        let mut fp: Fingerprint = row.params_fingerprint.parse()?;
        let seed: u64 = fp.parse_key("phantom_seed")?;
        let mut rest = Fingerprint::new();
        for (k, v) in fp.iter().filter(|(k, _)| *k != "phantom_seed") {
            rest.insert(k, v);
        }
        fp = rest;
        let g = groups
            .entry((row.variant.clone(), row.metric_id.clone(), fp.to_string()))
            .or_default();
        g.0.push(seed);
        g.1.push(row.score);
    }
    for ((variant, metric_id, fp), (seeds, scores)) in groups {
        let mut fp: Fingerprint = fp.parse()?;
        fp.insert("aggregate", "mean");
        fp.insert("phantom_seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        report.rows.push(ReportRow {
            case_id: MEAN_CASE.to_string(),
            scenario: sid.clone(),
            variant,
            metric_id,
            params_fingerprint: fp.to_string(),
            score: scores.iter().sum::<f64>() / scores.len() as f64,
        });
    }
    report.sort();

    let (first, _) = &phantoms[0];
    for v in &scenario.variants {
        let test = v.chain.apply(&first.image).map_err(context(scenario.id, v, first.seed))?;
        let settings = EvalSettings {
            panel: v
                .panel
                .iter()
                .filter_map(|m| match m {
                    PanelMetric::Image(s) => Some(s.clone()),
                    PanelMetric::TaskDice(_) => None,
                })
                .collect(),
            preprocess: v.preprocess,
            mask: v.roi.mask(first)?,
            chain: v.chain.clone(),
        };
        for mut lint in lint_configuration(&first.image, &test, &settings) {
            lint.message = format!("{sid}/{}: {}", v.label, lint.message);
            report.lints.push(lint);
        }
    }
    Ok(report)
}

/// Recomputes a report row's score from its fingerprint alone.
pub fn reevaluate(fingerprint: &str) -> Result<f64> {
    let fp: Fingerprint = fingerprint.parse()?;
    if fp.get("aggregate") == Some("mean") {
        let seeds = fp.require("phantom_seeds")?;
        let mut total = 0.0;
        let mut n = 0usize;
        for s in seeds.split(',') {
            let mut one = fp.clone();
            one.insert("phantom_seed", s);
            let mut stripped = Fingerprint::new();
            for (k, v) in one.iter().filter(|(k, _)| *k != "aggregate" && *k != "phantom_seeds") {
                stripped.insert(k, v);
            }
            total += reevaluate(&stripped.to_string())?;
            n += 1;
        }
        return Ok(total / n as f64);
    }
    let params = PhantomParams::from_fingerprint(&fp)?;
    let seed: u64 = fp.parse_key("phantom_seed")?;
    let phantom = generate_phantom(seed, &params)?;
    let v = Variant {
        label: String::new(),
        chain: fp.require("chain")?.parse()?,
        preprocess: fp.require("preprocess")?.parse()?,
        panel: Vec::new(),
        roi: fp.require("roi")?.parse()?,
    };
    let entry = if fp.get("task").is_some() {
        PanelMetric::TaskDice(SegmenterParams::from_fingerprint(&fp)?)
    } else {
        PanelMetric::Image(MetricSpec::from_fingerprint(&fp)?)
    };
    let images = prepare(&phantom, &v)?;
    Ok(evaluate_entry(&phantom, &params, &v, &images, &entry)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PhantomParams {
        PhantomParams::with_dims(64, 64)
    }

    #[test]
    fn ids_round_trip() {
        for id in ScenarioId::ALL {
            assert_eq!(id.to_string().parse::<ScenarioId>().unwrap(), id);
        }
        assert!("pitfall6".parse::<ScenarioId>().is_err());
        for roi in [Roi::Full, Roi::CropFraction(0.03), Roi::ForegroundBox, Roi::Foreground] {
            assert_eq!(roi.to_string().parse::<Roi>().unwrap(), roi);
        }
    }

    #[test]
    fn variant_labels_are_fixed() {
        let opts = ScenarioOptions::default();
        let labels = |id| -> Vec<String> {
            Scenario::builtin(id, &opts).variants.into_iter().map(|v| v.label).collect()
        };
        assert_eq!(labels(ScenarioId::Pitfall1), ["none", "minmax", "zscore", "bin256"]);
        assert_eq!(labels(ScenarioId::Pitfall2), ["shift1px", "shift2px", "shift3px", "shift4px"]);
        assert_eq!(labels(ScenarioId::Pitfall3), ["full", "crop3%", "bbox", "foreground-mask"]);
        assert_eq!(labels(ScenarioId::Pitfall4).len(), 16);
        assert!(labels(ScenarioId::Pitfall4).contains(&"noise+blur1".to_string()));
        assert_eq!(labels(ScenarioId::Pitfall5), ["reference", "mirror"]);
    }

    #[test]
    fn empty_phantom_list_is_an_error() {
        let s = Scenario::builtin(ScenarioId::Pitfall1, &ScenarioOptions::default());
        assert!(run_scenario(&s, &[]).is_err());
    }

    #[test]
    fn wrong_tumor_half_is_rejected() {
        let s = Scenario::builtin(ScenarioId::Pitfall5, &ScenarioOptions::default());
        let upper = small().with_half(TumorHalf::Upper);
        let ph = vec![(generate_phantom(0, &upper).unwrap(), upper)];
        assert!(run_scenario(&s, &ph).is_err());
    }

    #[test]
    fn pitfall1_fans_out_data_ranges_and_rows_reevaluate() {
        let s = Scenario::builtin(ScenarioId::Pitfall1, &ScenarioOptions::default());
        let ph = phantoms_for(&s, &PhantomParams::default(), 3, 2).unwrap();
        let report = run_scenario(&s, &ph).unwrap();
        let ssim_fps: std::collections::BTreeSet<&str> = report
            .rows
            .iter()
            .filter(|r| r.metric_id == "ssim" && r.variant == "none" && r.case_id == "case-0003")
            .map(|r| r.params_fingerprint.as_str())
            .collect();
        assert_eq!(ssim_fps.len(), 3);
        // 4 variants x 14 metrics x (2 cases + mean)
        assert_eq!(report.rows.len(), 4 * 14 * 3);
        for row in report.rows.iter().step_by(7) {
            let again = reevaluate(&row.params_fingerprint).unwrap();
            assert!((again - row.score).abs() <= 1e-12, "{row:?} -> {again}");
        }
        assert!(report.lints.iter().any(|l| l.code == "W01"));
        assert!(report.lints.iter().any(|l| l.code == "W02"));
    }

    #[test]
    fn runs_are_deterministic() {
        let s = Scenario::builtin(ScenarioId::Pitfall3, &ScenarioOptions::default());
        let ph = phantoms_for(&s, &small(), 10, 3).unwrap();
        let a = run_scenario(&s, &ph).unwrap();
        let b = run_scenario(&s, &ph).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let rows: Vec<_> = a.rows.iter().filter(|r| r.case_id != MEAN_CASE).collect();
        let mut sorted = rows.clone();
        sorted.sort_by(|x, y| (&x.case_id, &x.variant, &x.metric_id).cmp(&(&y.case_id, &y.variant, &y.metric_id)));
        assert_eq!(rows, sorted);
    }
}
