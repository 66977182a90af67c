use std::fs;

use cardio_core::bench::{
    emit_svg, line_plot, render_files, run_experiment, BenchSettings, CsvReport, ExperimentKind, PlotKind, Series, STEP_COLUMNS,
};
use cardio_core::nsolve::NonlinearMethod;
use cardio_core::Error;

fn tiny() -> BenchSettings {
    let mut s = BenchSettings::default();
    s.set("grid.n", "4").unwrap();
    s.set("t_end", "0.15").unwrap();
    s.set("methods", "newton,qn_preonly").unwrap();
    s.set("sizes", "4").unwrap();
    s.set("threads", "1,2").unwrap();
    s
}

#[test]
fn step_csv_schema_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(ExperimentKind::RobustnessSize, &tiny(), dir.path()).unwrap();
    assert!(outcome.all_converged());
    assert_eq!(outcome.runs.len(), 2);
    for run in &outcome.runs {
        let text = fs::read_to_string(&run.file).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "Time,snesIts,innerIts,SNEStime,resNorm");
        assert_eq!(body.len(), 1 + 3);
        let report = CsvReport::parse(&text).unwrap();
        assert_eq!(report.columns, STEP_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        for key in ["run_id", "experiment", "dt_bound", "grid", "solver.method", "converged"] {
            assert!(report.header_value(key).is_some(), "missing header key {key}");
        }
        let bound: f64 = report.header_value("dt_bound").unwrap().parse().unwrap();
        assert!((bound - 0.412_087_912).abs() < 1e-6);
        let times = report.numeric_column("Time").unwrap();
        assert!((times[2] - 0.15).abs() < 1e-12);
    }
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("iterations_vs_time_4.svg").exists());
}

#[test]
fn thread_scaling_baseline_has_unit_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = tiny();
    s.set("methods", "newton").unwrap();
    let outcome = run_experiment(ExperimentKind::ThreadScaling, &s, dir.path()).unwrap();
    assert!(outcome.all_converged());
    let report = CsvReport::read(&dir.path().join("scaling.csv")).unwrap();
    let threads = report.numeric_column("threads").unwrap();
    let speedup = report.numeric_column("speedup").unwrap();
    assert_eq!(threads, vec![1.0, 2.0]);
    assert_eq!(speedup[0], 1.0);
    assert!(speedup[1] > 0.0);
    assert!(dir.path().join("cpu_bars.svg").exists());
}

#[test]
fn non_convergence_is_reported_not_hidden() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = tiny();
    s.set("methods", "ncg").unwrap();
    s.set("solver.max_it", "3").unwrap();
    let outcome = run_experiment(ExperimentKind::RobustnessSize, &s, dir.path()).unwrap();
    assert!(!outcome.all_converged());
    assert_eq!(outcome.runs[0].failure_step, Some(1));
    let report = CsvReport::read(&outcome.runs[0].file).unwrap();
    assert_eq!(report.header_value("converged"), Some("false"));
}

#[test]
fn run_ids_depend_on_settings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut s = tiny();
    s.set("methods", "newton").unwrap();
    run_experiment(ExperimentKind::RobustnessSize, &s, a.path()).unwrap();
    s.set("ksp.rtol", "1e-6").unwrap();
    run_experiment(ExperimentKind::RobustnessSize, &s, b.path()).unwrap();
    let id = |d: &std::path::Path| CsvReport::read(&d.join("summary.csv")).unwrap().header_value("run_id").unwrap().to_string();
    assert_eq!(id(a.path()).len(), 12);
    assert_ne!(id(a.path()), id(b.path()));
}

#[test]
fn plots_handle_empty_and_multiple_series() {
    let empty = line_plot("t", "x", "y", &[], false);
    assert!(empty.contains("no data"));
    let two = line_plot(
        "t",
        "x",
        "y",
        &[
            Series { label: "newton".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] },
            Series { label: "ncg".into(), points: vec![(0.0, 3.0), (1.0, 1.0)] },
        ],
        false,
    );
    assert_eq!(two.matches("class=\"legend\"").count(), 2);
    assert!(two.contains(">newton<") && two.contains(">ncg<"));
}

#[test]
fn plotting_a_file_without_the_column_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "# label=x\nTime,other\n0.05,1\n").unwrap();
    match render_files(&[path.clone()], PlotKind::IterationsVsTime) {
        Err(Error::MissingColumn(c)) => assert_eq!(c, "snesIts"),
        other => panic!("expected a missing-column error, got {other:?}"),
    }
    let svg = dir.path().join("out.svg");
    assert!(emit_svg(&[path], PlotKind::IterationsVsTime, &svg).is_err());
}

#[test]
fn settings_reject_unknown_keys() {
    let mut s = BenchSettings::default();
    assert!(matches!(s.set("grid.m", "3"), Err(Error::Usage(_))));
    assert!(matches!(s.set_pair("novalue"), Err(Error::Usage(_))));
    s.set("solver.method", "ngmres").unwrap();
    assert_eq!(s.methods, vec![NonlinearMethod::Ngmres]);
    assert!("warp_drive".parse::<ExperimentKind>().is_err());
}
