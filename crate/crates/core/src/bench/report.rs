//! Self-describing CSV files: `# key=value` header lines, a column row and
//! data rows.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::timeloop::StepRecord;

/// Columns of every per-timestep file.
pub const STEP_COLUMNS: [&str; 5] = ["Time", "snesIts", "innerIts", "SNEStime", "resNorm"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvReport {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

impl CsvReport {
    pub fn new(header: Vec<(String, String)>, columns: &[&str]) -> Self {
        Self { header, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Per-timestep report of a run.
    pub fn from_steps(header: Vec<(String, String)>, records: &[StepRecord]) -> Self {
        let mut out = Self::new(header, &STEP_COLUMNS);
        for r in records {
            out.push([
                format!("{}", r.time),
                r.nonlinear_iterations.to_string(),
                r.inner_iterations.to_string(),
                format!("{:e}", r.solve_seconds),
                format!("{:e}", r.residual_norm),
            ]);
        }
        out
    }

    pub fn render(&self) -> Result<String> {
        let mut text = String::new();
        for (k, v) in &self.header {
            text.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        text.push_str(&String::from_utf8_lossy(&body));
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()?)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    header.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else if !line.trim().is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>().map_err(csv_error)?;
        Ok(Self { header, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Index of a column, or the schema error naming it.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Numeric values of a column.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = r.get(j).map(String::as_str).unwrap_or("");
                cell.trim().parse().map_err(|_| Error::InvalidConfig(format!("column `{name}`: `{cell}` is not a number")))
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.get(j).cloned().unwrap_or_default()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut r = CsvReport::new(vec![("tau".into(), "0.05".into()), ("label".into(), "a b".into())], &["x", "y"]);
        r.push([1.5, 2.0]);
        r.push([3.0, 4.25]);
        let text = r.render().unwrap();
        assert!(text.starts_with("# tau=0.05\n# label=a b\nx,y\n"));
        let back = CsvReport::parse(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.numeric_column("y").unwrap(), vec![2.0, 4.25]);
        assert!(matches!(back.numeric_column("z"), Err(Error::MissingColumn(c)) if c == "z"));
    }
}
