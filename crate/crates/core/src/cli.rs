//! The `refsim` command line: `compare`, `distort`, `phantom`, `audit` and `lint`.
//!
//! Exit codes are 0 on success, 1 on hard errors (including unknown flags) and
//! 2 when lints fire under `--strict` (or at all, for `lint`). Machine-readable
//! output goes to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::distort::Chain;
use crate::error::{Error, Result};
use crate::harness::{
    generate_phantom, lint_configuration, write_report, HarnessConfig, Lint, PhantomParams, Report, ReportFormat,
    ReportRow, ScenarioId, TumorHalf,
};
use crate::image::{Image, Mask};
use crate::io::{load_image_auto, save_image, save_image_auto, ImageFormat};
use crate::metrics::masked_evaluate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LINT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "refsim", version, about = "Full-reference image similarity with explicit evaluation semantics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a test image against a reference.
    Compare(CompareArgs),
    /// Apply a distortion chain to an image.
    Distort(DistortArgs),
    /// Write seeded phantoms with tumor and foreground masks.
    Phantom(PhantomArgs),
    /// Run built-in pitfall scenarios and write report.csv / report.md.
    Audit(AuditArgs),
    /// Check an evaluation setup for known pitfalls.
    Lint(LintArgs),
}

/// Flags mirroring the config `evaluation` section.
#[derive(Debug, Args)]
struct EvalArgs {
    /// Harness JSON config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated metric ids.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// none, minmax, zscore or custom:a=..,b=..
    #[arg(long)]
    norm: Option<String>,
    /// joint, ref, test or fixed:L=..
    #[arg(long)]
    range: Option<String>,
    /// Internal MI/NMI bin count.
    #[arg(long)]
    bins: Option<usize>,
    /// Bin-quantize both images before evaluation.
    #[arg(long)]
    prebin: Option<usize>,
    /// Mask image; nonzero pixels are evaluated.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Chain applied to the test image (JSON or compact form).
    #[arg(long)]
    distortions: Option<String>,
}

impl EvalArgs {
    fn config(&self) -> Result<HarnessConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        let e = &mut cfg.evaluation;
        if let Some(m) = &self.metrics {
            e.metrics = m.clone();
        }
        if let Some(n) = &self.norm {
            e.norm = n.parse()?;
        }
        if let Some(r) = &self.range {
            e.range = r.parse()?;
        }
        if self.bins.is_some() {
            e.bins = self.bins;
        }
        if self.prebin.is_some() {
            e.prebin = self.prebin;
        }
        if self.mask.is_some() {
            e.mask = self.mask.clone();
        }
        if let Some(d) = &self.distortions {
            e.distortions = Chain::parse_any(d)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct CompareArgs {
    reference: PathBuf,
    test: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    /// Also write the scores as report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refuse to evaluate when any lint fires.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct DistortArgs {
    input: PathBuf,
    /// JSON file, inline JSON, or compact chain such as `gamma(gamma=0.4)>linear_scale(factor=1.2)`.
    spec: String,
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PhantomArgs {
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `h,w`
    #[arg(long, value_delimiter = ',', num_args = 1)]
    dims: Option<Vec<usize>>,
    /// upper, lower or random
    #[arg(long)]
    tumor_half: Option<TumorHalf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Scenario id, comma-separated ids, or `all`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default from config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 1)]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Comma-separated: csv, markdown.
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<ReportFormat>>,
    /// Exit 2 when any lint fires.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct LintArgs {
    reference: PathBuf,
    test: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
}

fn load_config(path: Option<&Path>) -> Result<HarnessConfig> {
    match path {
        Some(p) => HarnessConfig::load(p),
        None => Ok(HarnessConfig::default()),
    }
}

fn dims_pair(v: &[usize]) -> Result<[usize; 2]> {
    match *v {
        [h, w] => Ok([h, w]),
        _ => Err(Error::Config(format!("--dims takes `h,w`, got {} values", v.len()))),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                EXIT_OK
            } else {
                let _ = write!(err, "{e}");
                EXIT_ERROR
            };
        }
    };
    let result = match cli.command {
        Command::Compare(a) => compare(a, out, err),
        Command::Distort(a) => distort(a, out),
        Command::Phantom(a) => phantom(a, out),
        Command::Audit(a) => audit(a, out, err),
        Command::Lint(a) => lint(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn print_lints(lints: &[Lint], w: &mut dyn Write) -> Result<()> {
    for l in lints {
        writeln!(w, "{l}").map_err(io_err)?;
    }
    Ok(())
}

fn check_dims(reference: &Image, test: &Image) -> Result<()> {
    crate::metrics::check_dims(reference, test)
}

fn compare(a: CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = a.eval.config()?;
    let reference = load_image_auto(&a.reference)?;
    let test = cfg.evaluation.distorted(&load_image_auto(&a.test)?)?;
    check_dims(&reference, &test)?;
    let settings = cfg.evaluation.settings()?;
    let lints = lint_configuration(&reference, &test, &settings);
    if a.strict && !lints.is_empty() {
        print_lints(&lints, out)?;
        return Ok(EXIT_LINT);
    }
    for l in &lints {
        let _ = writeln!(err, "lint: {l}");
    }
    let r = settings.preprocess.apply(&reference)?;
    let t = settings.preprocess.apply(&test)?;
    let mut report = Report::default();
    for spec in &settings.panel {
        let score = match &settings.mask {
            Some(m) => masked_evaluate(spec, &r, &t, m)?,
            None => spec.evaluate(&r, &t)?,
        };
        writeln!(out, "{}\t{}\t{}", score.metric_id, score.value_string(), score.params_fingerprint).map_err(io_err)?;
        report.rows.push(ReportRow {
            case_id: a.test.display().to_string(),
            scenario: "compare".into(),
            variant: settings.chain.to_string(),
            metric_id: score.metric_id.clone(),
            params_fingerprint: format!("{};preprocess={}", score.params_fingerprint, settings.preprocess),
            score: score.value,
        });
    }
    if let Some(p) = &a.out {
        write_report(&report, p, ReportFormat::Csv)?;
    }
    Ok(EXIT_OK)
}

fn distort(a: DistortArgs, out: &mut dyn Write) -> Result<i32> {
    let path = Path::new(&a.spec);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?
    } else {
        a.spec.clone()
    };
    let chain = Chain::parse_any(&text)?;
    let img = load_image_auto(&a.input)?;
    let distorted = chain.apply(&img)?;
    save_image_auto(&distorted, &a.output)?;
    writeln!(out, "{chain}").map_err(io_err)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ManifestCase {
    case_id: String,
    seed: u64,
    tumor_half: TumorHalf,
    image: String,
    tumor_mask: String,
    foreground_mask: String,
}

#[derive(Serialize)]
struct Manifest {
    count: usize,
    seed: u64,
    dims: [usize; 2],
    params: PhantomParams,
    cases: Vec<ManifestCase>,
}

fn mask_image(m: &Mask) -> Result<Image> {
    Image::new(m.dims(), m.data().iter().map(|&b| if b { 255.0 } else { 0.0 }).collect())
}

fn phantom(a: PhantomArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(c) = a.count {
        cfg.phantoms.count = c;
    }
    if let Some(s) = a.seed {
        cfg.phantoms.seed = s;
    }
    if let Some(d) = &a.dims {
        cfg.phantoms.dims = dims_pair(d)?;
    }
    if let Some(h) = a.tumor_half {
        cfg.phantoms.tumor_half = h;
    }
    cfg.validate()?;
    let params = cfg.phantoms.params();
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut cases = Vec::new();
    for i in 0..cfg.phantoms.count as u64 {
        let seed = cfg.phantoms.seed + i;
        let p = generate_phantom(seed, &params)?;
        let id = crate::harness::scenario::case_id(seed);
        let (image, tumor, fg) = (format!("{id}.raw"), format!("{id}_tumor.pgm"), format!("{id}_foreground.pgm"));
        save_image(&p.image, a.out.join(&image), ImageFormat::RawF32)?;
        save_image(&mask_image(&p.tumor_mask)?, a.out.join(&tumor), ImageFormat::Pgm)?;
        save_image(&mask_image(&p.foreground_mask)?, a.out.join(&fg), ImageFormat::Pgm)?;
        cases.push(ManifestCase {
            case_id: id,
            seed,
            tumor_half: p.tumor_half,
            image,
            tumor_mask: tumor,
            foreground_mask: fg,
        });
    }
    let manifest = Manifest {
        count: cfg.phantoms.count,
        seed: cfg.phantoms.seed,
        dims: cfg.phantoms.dims,
        params,
        cases,
    };
    let path = a.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    writeln!(out, "{}", path.display()).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn audit(a: AuditArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = &a.scenario {
        cfg.scenarios = if s == "all" {
            ScenarioId::ALL.to_vec()
        } else {
            s.split(',').map(str::parse).collect::<Result<_>>()?
        };
    }
    if let Some(d) = &a.out {
        cfg.output.dir = d.clone();
    }
    if let Some(c) = a.count {
        cfg.phantoms.count = c;
    }
    if let Some(s) = a.seed {
        cfg.phantoms.seed = s;
    }
    if let Some(d) = &a.dims {
        cfg.phantoms.dims = dims_pair(d)?;
    }
    if let Some(n) = a.noise_seed {
        cfg.noise_seed = n;
    }
    if let Some(f) = &a.formats {
        cfg.output.formats = f.clone();
    }
    let report = cfg.run_audit()?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for &format in &cfg.output.formats {
        let name = match format {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        };
        let path = dir.join(name);
        write_report(&report, &path, format)?;
        writeln!(out, "{}", path.display()).map_err(io_err)?;
    }
    for l in &report.lints {
        let _ = writeln!(err, "lint: {l}");
    }
    Ok(if a.strict && !report.lints.is_empty() { EXIT_LINT } else { EXIT_OK })
}

fn lint(a: LintArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = a.eval.config()?;
    let reference = load_image_auto(&a.reference)?;
    let test = cfg.evaluation.distorted(&load_image_auto(&a.test)?)?;
    check_dims(&reference, &test)?;
    let lints = lint_configuration(&reference, &test, &cfg.evaluation.settings()?);
    print_lints(&lints, out)?;
    Ok(if lints.is_empty() { EXIT_OK } else { EXIT_LINT })
}
