//! Runs two pitfall scenarios on a handful of phantoms and prints the Markdown
//! report.

use refsim::harness::HarnessConfig;

fn main() -> refsim::Result<()> {
    let cfg = HarnessConfig::from_json(r#"{"phantoms": {"count": 4, "seed": 100}, "scenarios": ["pitfall2", "pitfall5"]}"#)?;
    let report = cfg.run_audit()?;
    print!("{}", report.to_markdown());
    println!("{} rows, {} lints", report.rows.len(), report.lints.len());
    Ok(())
}
