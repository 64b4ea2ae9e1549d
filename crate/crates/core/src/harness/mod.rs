//! Phantoms, the five pitfall scenarios, configuration lints and reports.

pub mod config;
pub mod lint;
pub mod phantom;
pub mod report;
pub mod scenario;

pub use config::HarnessConfig;
pub use lint::{lint_configuration, EvalSettings, Lint, Severity};
pub use phantom::{generate_phantom, Phantom, PhantomParams, TumorHalf};
pub use report::{parse_csv, write_report, Report, ReportFormat, ReportRow};
pub use scenario::{phantoms_for, reevaluate, run_scenario, PanelMetric, Roi, Scenario, ScenarioId, ScenarioOptions, Variant};
