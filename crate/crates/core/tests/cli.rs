use std::path::Path;
use std::process::{Command, Output};

use refsim::io::{save_image, ImageFormat};
use refsim::Image;

fn refsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run refsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Writes `ref.pgm`, a copy scaled into a wider range (`wide.pgm`) and a
/// non-rectangular mask (`disc.pgm`).
fn fixtures(dir: &Path) {
    let r = Image::from_fn_2d(48, 40, |x, y| ((x * 7 + y * 5) % 200) as f64).unwrap();
    save_image(&r, dir.join("ref.pgm"), ImageFormat::Pgm).unwrap();
    save_image(&r.map(|v| v * 3.0).unwrap(), dir.join("wide.pgm"), ImageFormat::Pgm).unwrap();
    let disc = Image::from_fn_2d(48, 40, |x, y| {
        let (dx, dy) = (x as f64 - 24.0, y as f64 - 20.0);
        if dx * dx + dy * dy < 225.0 { 255.0 } else { 0.0 }
    })
    .unwrap();
    save_image(&disc, dir.join("disc.pgm"), ImageFormat::Pgm).unwrap();
}

#[test]
fn compare_self_and_fixed_range() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let o = refsim(&["compare", "ref.pgm", "ref.pgm", "--metrics", "mae,ssim"], d.path());
    assert_eq!(code(&o), 0);
    let lines: Vec<Vec<String>> = stdout(&o)
        .lines()
        .map(|l| l.split('\t').map(String::from).collect())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!((lines[0][0].as_str(), lines[0][1].as_str()), ("mae", "0"));
    assert_eq!((lines[1][0].as_str(), lines[1][1].parse::<f64>().unwrap()), ("ssim", 1.0));

    let o = refsim(&["compare", "ref.pgm", "wide.pgm", "--metrics", "psnr", "--range", "fixed:L=255", "--norm", "minmax"], d.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("range=fixed:L=255"));
}

#[test]
fn compare_writes_csv() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let o = refsim(&["compare", "ref.pgm", "wide.pgm", "--norm", "zscore", "--out", "s.csv"], d.path());
    assert_eq!(code(&o), 0);
    let rows = refsim::harness::parse_csv(&std::fs::read_to_string(d.path().join("s.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), stdout(&o).lines().count());
    assert!(rows.iter().all(|r| r.params_fingerprint.contains("preprocess=zscore")));
}

#[test]
fn compare_rejects_disc_mask_with_ssim() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let o = refsim(&["compare", "ref.pgm", "ref.pgm", "--metrics", "ssim", "--mask", "disc.pgm"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rectangle"));
    // pointwise metrics accept it
    let o = refsim(&["compare", "ref.pgm", "wide.pgm", "--metrics", "mae,nmi", "--mask", "disc.pgm"], d.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("mask=pointwise"));
}

#[test]
fn strict_compare_stops_on_lints() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let o = refsim(&["compare", "ref.pgm", "wide.pgm", "--strict"], d.path());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).starts_with("W01\twarning\t"));
    let o = refsim(&["compare", "ref.pgm", "ref.pgm", "--metrics", "ssim", "--mask", "disc.pgm", "--strict"], d.path());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("W03\terror"));
    assert_eq!(code(&refsim(&["compare", "ref.pgm", "ref.pgm", "--strict"], d.path())), 0);
}

#[test]
fn bad_inputs_exit_one() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    for args in [
        vec!["compare", "ref.pgm", "missing.pgm"],
        vec!["compare", "ref.pgm", "ref.pgm", "--metrics", "lpips"],
        vec!["compare", "ref.pgm", "ref.pgm", "--frobnicate"],
        vec!["distort", "ref.pgm", "[{\"kind\": \"gamma\"", "o.pgm"],
        vec!["distort", "ref.pgm", "sharpen(amount=2)", "o.pgm"],
        vec!["phantom", "ph", "--dims", "32,32"],
        vec!["audit", "--scenario", "pitfall7"],
        vec!["lint", "nope.pgm", "ref.pgm"],
        vec!["frob"],
    ] {
        let o = refsim(&args, d.path());
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn distort_identity_and_chain() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let ident = r#"[{"kind": "gamma", "params": {"gamma": 1}}, {"kind": "linear_scale", "params": {"factor": 1}}]"#;
    let o = refsim(&["distort", "ref.pgm", ident, "same.pgm"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(d.path().join("same.pgm")).unwrap(), std::fs::read(d.path().join("ref.pgm")).unwrap());

    std::fs::write(
        d.path().join("chain.json"),
        r#"[{"kind": "gamma", "params": {"gamma": 0.4}}, {"kind": "linear_scale", "params": {"factor": 1.2}}]"#,
    )
    .unwrap();
    let o = refsim(&["distort", "ref.pgm", "chain.json", "out.raw"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "gamma(gamma=0.4)>linear_scale(factor=1.2)\n");
    assert!(d.path().join("out.raw.meta").exists());
}

#[test]
fn phantom_writes_images_masks_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let o = refsim(&["phantom", "a", "--count", "3", "--seed", "9", "--dims", "96,80"], d.path());
    assert_eq!(code(&o), 0);
    let names: Vec<String> = std::fs::read_dir(d.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".raw")).count(), 3);
    assert_eq!(names.iter().filter(|n| n.ends_with(".pgm")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.ends_with(".json")).count(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dims"], serde_json::json!([96, 80]));
    assert_eq!(manifest["cases"][2]["seed"], 11);
    let img = refsim::io::load_image_auto(d.path().join("a/case-0009.raw")).unwrap();
    assert_eq!((img.dims().width, img.dims().height), (80, 96));
}

#[test]
fn lint_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let o = refsim(&["lint", "ref.pgm", "ref.pgm"], d.path());
    assert_eq!((code(&o), stdout(&o).as_str()), (0, ""));
    let o = refsim(&["lint", "ref.pgm", "wide.pgm"], d.path());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).starts_with("W01\t"));
    std::fs::write(d.path().join("cfg.json"), r#"{"evaluation": {"norm": "minmax"}}"#).unwrap();
    assert_eq!(code(&refsim(&["lint", "ref.pgm", "wide.pgm", "--config", "cfg.json"], d.path())), 0);
    // flag overrides file
    assert_eq!(code(&refsim(&["lint", "ref.pgm", "wide.pgm", "--config", "cfg.json", "--norm", "none"], d.path())), 2);
}

#[test]
fn audit_writes_reports() {
    let d = tempfile::tempdir().unwrap();
    let o = refsim(&["audit", "--scenario", "pitfall1", "--count", "2", "--out", "r"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), format!("{}\n{}\n", Path::new("r").join("report.csv").display(), Path::new("r").join("report.md").display()));
    let csv = std::fs::read_to_string(d.path().join("r/report.csv")).unwrap();
    for policy in ["range=joint", "range=ref", "range=test"] {
        assert!(csv.lines().any(|l| l.contains(",ssim,") && l.contains(policy)), "{policy}");
    }
    // the pitfall1 setup triggers lints, so strict mode fails
    let o = refsim(&["audit", "--scenario", "pitfall1", "--count", "2", "--out", "r2", "--strict"], d.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn audit_all_has_five_tables() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("cfg.json"), r#"{"phantoms": {"count": 2, "seed": 3}, "output": {"dir": "rep", "formats": ["markdown"]}}"#).unwrap();
    let o = refsim(&["audit", "--scenario", "all", "--config", "cfg.json"], d.path());
    assert_eq!(code(&o), 0);
    let md = std::fs::read_to_string(d.path().join("rep/report.md")).unwrap();
    assert_eq!(md.matches("\n## pitfall").count() + usize::from(md.starts_with("## pitfall")), 5);
    assert!(!d.path().join("rep/report.csv").exists());
}

#[test]
fn every_command_is_byte_deterministic() {
    let d = tempfile::tempdir().unwrap();
    fixtures(d.path());
    let runs: [(&[&str], &[&str]); 5] = [
        (&["compare", "ref.pgm", "wide.pgm", "--metrics", "mae,ssim,cw_ssim,nmi", "--out", "c{}.csv"], &["c{}.csv"]),
        (&["distort", "ref.pgm", "gaussian_noise(sigma_rel=0.1,seed=4)>gaussian_blur(sigma=1)", "d{}.raw"], &["d{}.raw"]),
        (&["phantom", "p{}", "--count", "2", "--seed", "1"], &["p{}/case-0001.raw", "p{}/case-0002_tumor.pgm", "p{}/manifest.json"]),
        (&["audit", "--scenario", "pitfall2,pitfall5", "--count", "2", "--out", "a{}"], &["a{}/report.csv", "a{}/report.md"]),
        (&["lint", "ref.pgm", "wide.pgm"], &[]),
    ];
    for (args, files) in runs {
        let mut outs = Vec::new();
        for run in ["1", "2"] {
            let a: Vec<String> = args.iter().map(|s| s.replace("{}", run)).collect();
            let a: Vec<&str> = a.iter().map(String::as_str).collect();
            let o = refsim(&a, d.path());
            assert!(code(&o) == 0 || a[0] == "lint", "{a:?}: {}", String::from_utf8_lossy(&o.stderr));
            let blobs: Vec<Vec<u8>> = files
                .iter()
                .map(|f| std::fs::read(d.path().join(f.replace("{}", run))).unwrap())
                .collect();
            // output paths in stdout differ between the runs by design
            let mut text = stdout(&o);
            for t in args.iter().filter(|t| t.contains("{}")) {
                text = text.replace(&t.replace("{}", run), t);
            }
            outs.push((text, code(&o), blobs));
        }
        assert_eq!(outs[0], outs[1], "{args:?}");
    }
}
