//! Self-contained SVG plots of harness CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bench::report::CsvReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `snesIts` against `Time`, one polyline per file.
    IterationsVsTime,
    /// `resNorm` against `its + 1` on log-log axes, one polyline per file.
    ResidualLogLog,
    /// One bar per row: `SNEStime` labelled by `label`.
    CpuBars,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [Self::IterationsVsTime, Self::ResidualLogLog, Self::CpuBars];

    pub fn name(self) -> &'static str {
        match self {
            Self::IterationsVsTime => "iterations_vs_time",
            Self::ResidualLogLog => "residual_loglog",
            Self::CpuBars => "cpu_bars",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown plot kind `{s}` (iterations_vs_time, residual_loglog, cpu_bars)")))
    }
}

/// A labelled polyline in data coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f1f1f", "#c49a00", "#8e3b8e", "#2f5fa7", "#2e8b57", "#d9534f", "#7f7f7f", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Series label: the `label` header entry, else the file stem.
fn label_of(report: &CsvReport, path: &Path) -> String {
    report
        .header_value("label")
        .map(str::to_string)
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let t = if log { v.log10() } else { v };
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        if !log && lo > 0.0 {
            lo = 0.0;
        }
        Self { lo, hi, log }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> Option<f64> {
        let t = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        t.is_finite().then(|| from + (t - self.lo) / (self.hi - self.lo) * (to - from))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32).map(|e| (10f64.powi(e), format!("1e{e}"))).collect()
        } else {
            (0..=5).map(|i| {
                let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                (v, format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string())
            })
            .collect()
        }
    }
}

fn frame(svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(svg, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn no_data(svg: &mut String) {
    let _ = writeln!(
        svg,
        r#"<text class="no-data" x="{}" y="{}" text-anchor="middle" fill="gray">no data</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );
}

/// Line plot of `series`.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log: bool) -> String {
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel);
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().next().is_none() {
        no_data(&mut svg);
        svg.push_str("</svg>\n");
        return svg;
    }
    let xa = Axis::fit(all().map(|p| p.0), log);
    let ya = Axis::fit(all().map(|p| p.1), log);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    for (v, text) in xa.ticks() {
        if let Some(x) = xa.map(v, x0, x1) {
            let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{text}</text>"#, y0 + 15.0);
        }
    }
    for (v, text) in ya.ticks() {
        if let Some(y) = ya.map(v, y0, y1) {
            let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{text}</text>"#, x0 - 5.0, y + 4.0);
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", xa.map(x, x0, x1)?, ya.map(y, y0, y1)?)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            pts.join(" ")
        );
        let ly = TOP + 14.0 * i as f64 + 8.0;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, x1 + 10.0, x1 + 30.0);
        let _ = writeln!(svg, r#"<text class="legend" x="{}" y="{}">{}</text>"#, x1 + 35.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bar chart of `(label, value)` pairs.
pub fn bar_plot(title: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let mut svg = String::new();
    frame(&mut svg, title, "", ylabel);
    if bars.is_empty() {
        no_data(&mut svg);
        svg.push_str("</svg>\n");
        return svg;
    }
    let ya = Axis::fit(bars.iter().map(|b| b.1), false);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    for (v, text) in ya.ticks() {
        if let Some(y) = ya.map(v, y0, y1) {
            let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{text}</text>"#, x0 - 5.0, y + 4.0);
        }
    }
    let slot = (x1 - x0) / bars.len() as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let top = ya.map(*v, y0, y1).unwrap_or(y0).clamp(y1, y0);
        let x = x0 + slot * (i as f64 + 0.15);
        let _ = writeln!(
            svg,
            r#"<rect data-label="{}" x="{x:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
            escape(label),
            slot * 0.7,
            y0 - top,
            PALETTE[i % PALETTE.len()]
        );
        let cx = x + slot * 0.35;
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.1}" y="{}" text-anchor="end" transform="rotate(-30 {cx:.1} {})" font-size="9">{}</text>"#,
            y0 + 12.0,
            y0 + 12.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders `kind` from CSV files. Schema violations name the missing column.
pub fn render_files(paths: &[PathBuf], kind: PlotKind) -> Result<String> {
    let reports: Vec<(CsvReport, &PathBuf)> = paths.iter().map(|p| Ok((CsvReport::read(p)?, p))).collect::<Result<_>>()?;
    match kind {
        PlotKind::IterationsVsTime | PlotKind::ResidualLogLog => {
            let (xcol, ycol, log) = match kind {
                PlotKind::IterationsVsTime => ("Time", "snesIts", false),
                _ => ("its", "resNorm", true),
            };
            let mut series = Vec::new();
            for (r, p) in &reports {
                let xs = r.numeric_column(xcol)?;
                let ys = r.numeric_column(ycol)?;
                let shift = if log { 1.0 } else { 0.0 };
                series.push(Series { label: label_of(r, p), points: xs.into_iter().map(|x| x + shift).zip(ys).collect() });
            }
            Ok(if log {
                line_plot("Residual norm", "iteration + 1", "||F||", &series, true)
            } else {
                line_plot("Nonlinear iterations", "Time (ms)", "iterations", &series, false)
            })
        }
        PlotKind::CpuBars => {
            let mut bars = Vec::new();
            for (r, _) in &reports {
                let labels = r.text_column("label")?;
                let values = r.numeric_column("SNEStime")?;
                bars.extend(labels.into_iter().zip(values));
            }
            Ok(bar_plot("Solve time", "seconds", &bars))
        }
    }
}

/// Writes the plot of `kind` for `paths` to `out`.
pub fn emit_svg(paths: &[PathBuf], kind: PlotKind, out: &Path) -> Result<()> {
    fs::write(out, render_files(paths, kind)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_is_annotated() {
        let s = line_plot("t", "x", "y", &[], false);
        assert!(s.contains("no data") && s.contains("class=\"axis\""));
        assert!(bar_plot("t", "y", &[]).contains("no data"));
    }

    #[test]
    fn log_axis_skips_non_positive() {
        let s = line_plot("t", "x", "y", &[Series { label: "a".into(), points: vec![(1.0, 1.0), (2.0, 0.0), (3.0, 1e-3)] }], true);
        let line = s.lines().find(|l| l.contains("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }
}
