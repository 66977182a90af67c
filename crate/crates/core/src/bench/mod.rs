//! Experiment harness: configuration, CSV and SVG artifacts, and the
//! experiment suites.

pub mod experiments;
pub mod order;
pub mod report;
pub mod settings;
pub mod svg;

pub use experiments::{run_experiment, run_series, ExperimentKind, ExperimentOutcome, RunSummary};
pub use order::{fit_order, ORDER_PAIRS};
pub use report::{CsvReport, STEP_COLUMNS};
pub use settings::{BenchSettings, TuningGrid, KEYS};
pub use svg::{bar_plot, emit_svg, line_plot, render_files, PlotKind, Series};
