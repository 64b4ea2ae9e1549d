//! The harness JSON configuration and the audit driver.
//!
//! ```json
//! {
//!   "phantoms": {"count": 20, "seed": 0, "dims": [192, 192], "tumor_half": "random"},
//!   "scenarios": ["pitfall1", "pitfall5"],
//!   "segmenter": {"threshold_rel": 0.95, "min_component_size": 20, "connectivity": "face"},
//!   "noise_seed": 1,
//!   "output": {"dir": "report", "formats": ["csv", "markdown"]},
//!   "evaluation": {"metrics": ["mae", "ssim"], "norm": "none", "range": "joint",
//!                  "bins": null, "prebin": null, "mask": null, "distortions": []}
//! }
//! ```
//!
//! Every key is optional. `dims` is `[height, width]`. The `evaluation` section
//! drives `compare` and `lint`; scenarios carry their own panels.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::distort::Chain;
use crate::downstream::SegmenterParams;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::io::load_image_auto;
use crate::metrics::{MetricOptions, MetricSpec};
use crate::normalize::{DataRangePolicy, NormMethod, Preprocess};

use super::lint::EvalSettings;
use super::phantom::{PhantomParams, TumorHalf};
use super::report::{Report, ReportFormat};
use super::scenario::{phantoms_for, run_scenario, Scenario, ScenarioId, ScenarioOptions};

fn parsed<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn parsed_list<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub count: usize,
    pub seed: u64,
    /// `[height, width]`.
    pub dims: [usize; 2],
    pub tumor_half: TumorHalf,
}

impl Default for PhantomSection {
    fn default() -> Self {
        PhantomSection {
            count: 20,
            seed: 0,
            dims: [192, 192],
            tumor_half: TumorHalf::Random,
        }
    }
}

impl PhantomSection {
    pub fn params(&self) -> PhantomParams {
        PhantomParams::with_dims(self.dims[1], self.dims[0]).with_half(self.tumor_half)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(deserialize_with = "parsed_list")]
    pub formats: Vec<ReportFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("report"),
            formats: vec![ReportFormat::Csv, ReportFormat::Markdown],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub metrics: Vec<String>,
    #[serde(deserialize_with = "parsed")]
    pub norm: NormMethod,
    #[serde(deserialize_with = "parsed")]
    pub range: DataRangePolicy,
    /// Internal MI/NMI bins.
    pub bins: Option<usize>,
    /// Bin-quantize both images before evaluation (instead of `norm`).
    pub prebin: Option<usize>,
    pub mask: Option<PathBuf>,
    /// Chain applied to the test image before evaluation.
    pub distortions: Chain,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            metrics: ["mae", "mse", "psnr", "ssim", "pcc", "nmi"].map(String::from).to_vec(),
            norm: NormMethod::None,
            range: DataRangePolicy::Joint,
            bins: None,
            prebin: None,
            mask: None,
            distortions: Chain::default(),
        }
    }
}

impl EvaluationSection {
    pub fn preprocess(&self) -> Result<Preprocess> {
        match (self.prebin, self.norm) {
            (None, n) => Ok(Preprocess::Norm(n)),
            (Some(b), NormMethod::None) => Ok(Preprocess::Bin(b)),
            (Some(_), n) => Err(Error::Config(format!(
                "prebin and norm `{n}` both requested; pick one preprocessing step"
            ))),
        }
    }

    pub fn panel(&self) -> Result<Vec<MetricSpec>> {
        if self.metrics.is_empty() {
            return Err(Error::Config("the metric list is empty".into()));
        }
        let opts = MetricOptions {
            range: self.range,
            bins: self.bins,
        };
        self.metrics.iter().map(|id| MetricSpec::from_id(id.trim(), opts)).collect()
    }

    /// Loads the mask file, if any; nonzero pixels are inside.
    pub fn load_mask(&self) -> Result<Option<Mask>> {
        self.mask
            .as_ref()
            .map(|p| load_image_auto(p).map(|img| Mask::from_image(&img)))
            .transpose()
    }

    pub fn settings(&self) -> Result<EvalSettings> {
        Ok(EvalSettings {
            panel: self.panel()?,
            preprocess: self.preprocess()?,
            mask: self.load_mask()?,
            chain: self.distortions.clone(),
        })
    }

    /// The test image as evaluated: `test` passed through the configured chain.
    pub fn distorted(&self, test: &Image) -> Result<Image> {
        self.distortions.apply(test)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub phantoms: PhantomSection,
    #[serde(deserialize_with = "parsed_list")]
    pub scenarios: Vec<ScenarioId>,
    pub segmenter: SegmenterParams,
    pub noise_seed: u64,
    pub output: OutputSection,
    pub evaluation: EvaluationSection,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            phantoms: PhantomSection::default(),
            scenarios: ScenarioId::ALL.to_vec(),
            segmenter: SegmenterParams::default(),
            noise_seed: ScenarioOptions::default().noise_seed,
            output: OutputSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: HarnessConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        HarnessConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phantoms.count == 0 {
            return Err(Error::Config("phantoms.count must be at least 1".into()));
        }
        self.phantoms.params().validate()?;
        self.segmenter.validate()?;
        if self.scenarios.is_empty() {
            return Err(Error::Config("no scenarios selected".into()));
        }
        self.evaluation.preprocess()?;
        self.evaluation.panel()?;
        Ok(())
    }

    pub fn scenario_options(&self) -> ScenarioOptions {
        ScenarioOptions {
            segmenter: self.segmenter,
            noise_seed: self.noise_seed,
        }
    }

    /// Runs the selected scenarios on `phantoms.count` phantoms each.
    pub fn run_audit(&self) -> Result<Report> {
        self.validate()?;
        let opts = self.scenario_options();
        let params = self.phantoms.params();
        let mut report = Report::default();
        for &id in &self.scenarios {
            let scenario = Scenario::builtin(id, &opts);
            let phantoms = phantoms_for(&scenario, &params, self.phantoms.seed, self.phantoms.count)?;
            report.extend(run_scenario(&scenario, &phantoms)?);
        }
        report.sort();
        Ok(report)
    }
}
