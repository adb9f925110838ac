// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::error::Result;

/// One tidy observation. `agent_id` is an agent index or `"mean"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub epsilon: Option<f64>,
    pub method: String,
    pub agent_id: String,
    pub x_axis_name: String,
    pub x_value: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

impl ExperimentOutput {
    /// Rows matching `method` and `metric`.
    pub fn select<'a>(&'a self, method: &'a str, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method && r.metric == metric)
    }

    /// Mean value of `method`/`metric` rows over `agent_id == "mean"`,
    /// grouped by `x_value` in ascending order.
    pub fn mean_by_x(&self, method: &str, metric: &str) -> Vec<(f64, f64)> {
        let mut groups: Vec<(f64, f64, usize)> = Vec::new();
        for r in self.select(method, metric).filter(|r| r.agent_id == "mean") {
            match groups.iter_mut().find(|g| g.0 == r.x_value) {
                Some(g) => {
                    g.1 += r.value;
                    g.2 += 1;
                }
                None => groups.push((r.x_value, r.value, 1)),
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        groups.into_iter().map(|(x, s, c)| (x, s / c as f64)).collect()
    }

    /// CSV text: a `#`-prefixed JSON config line, then the header and rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        writeln!(buf, "# {}", serde_json::to_string(&self.config)?)?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in &self.rows {
                w.serialize(row)?;
            }
            if self.rows.is_empty() {
                w.write_record(HEADER)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

const HEADER: [&str; 11] = ["experiment", "seed", "n", "p", "epsilon", "method", "agent_id", "x_axis_name", "x_value", "metric", "value"];

/// Write `output` to `path` in `format`.
pub fn write_output(output: &ExperimentOutput, format: OutputFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, output.render(format)?)?;
    Ok(())
}

/// Parse rows back from CSV text produced by [`ExperimentOutput::to_csv`].
pub fn read_csv_rows(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(Into::into)).collect()
}
