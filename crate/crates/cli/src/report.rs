// SPDX-License-Identifier: Apache-2.0

//! Report rendering: aligned text, CSV or JSON.

use std::io::Write;

use clap::ValueEnum;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// Rows under a label. Reports with one section leave the label empty.
#[derive(Debug, Clone)]
pub struct Section {
    pub label: String,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub title: String,
    /// Precision, ports, batch and whatever else the numbers depend on.
    pub assumptions: Vec<(String, Value)>,
    pub columns: Vec<String>,
    pub sections: Vec<Section>,
    pub summary: Vec<(String, Value)>,
    /// Structured payload appended to JSON output only.
    pub extra: Option<(String, Value)>,
}

impl Report {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Report {
            title: title.into(),
            assumptions: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            sections: Vec::new(),
            summary: Vec::new(),
            extra: None,
        }
    }

    pub fn assume(&mut self, key: &str, value: impl Into<Value>) {
        self.assumptions.push((key.into(), value.into()));
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn section(&mut self, label: impl Into<String>, rows: Vec<Vec<Value>>) {
        self.sections.push(Section { label: label.into(), rows });
    }

    pub fn render<W: Write>(&self, format: Format, out: W) -> anyhow::Result<()> {
        match format {
            Format::Table => self.table(out),
            Format::Csv => self.csv(out),
            Format::Json => self.json(out),
        }
    }

    fn table<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        writeln!(out, "{}", self.title)?;
        for (k, v) in &self.assumptions {
            writeln!(out, "  {k}: {}", text(v))?;
        }
        let mut widths: Vec<usize> = self.columns.iter().map(String::len).collect();
        for row in self.sections.iter().flat_map(|s| &s.rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(text(cell).len());
            }
        }
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        for s in &self.sections {
            writeln!(out)?;
            if !s.label.is_empty() {
                writeln!(out, "{}", s.label)?;
            }
            writeln!(out, "{}", line(self.columns.clone()))?;
            for row in &s.rows {
                writeln!(out, "{}", line(row.iter().map(text).collect()))?;
            }
        }
        if !self.summary.is_empty() {
            writeln!(out)?;
        }
        for (k, v) in &self.summary {
            writeln!(out, "{k}: {}", text(v))?;
        }
        Ok(())
    }

    /// Assumptions and section labels go in `#` comment lines; the header
    /// row is the first uncommented line.
    fn csv<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        for (k, v) in &self.assumptions {
            writeln!(out, "# {k}: {}", text(v))?;
        }
        let mut header_written = false;
        for s in &self.sections {
            if !s.label.is_empty() {
                writeln!(out, "# {}", s.label)?;
            }
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            if !header_written {
                w.write_record(&self.columns)?;
                header_written = true;
            }
            for row in &s.rows {
                w.write_record(row.iter().map(text))?;
            }
            w.flush()?;
        }
        if !header_written {
            csv::Writer::from_writer(&mut out).write_record(&self.columns)?;
        }
        for (k, v) in &self.summary {
            writeln!(out, "# {k}: {}", text(v))?;
        }
        Ok(())
    }

    fn json<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        let object = |pairs: &[(String, Value)]| Value::Object(pairs.iter().cloned().collect::<Map<_, _>>());
        let rows = |rows: &[Vec<Value>]| {
            rows.iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect::<Vec<_>>()
        };
        let mut doc = json!({
            "title": self.title,
            "assumptions": object(&self.assumptions),
            "summary": object(&self.summary),
        });
        match self.sections.as_slice() {
            [only] if only.label.is_empty() => doc["rows"] = Value::Array(rows(&only.rows)),
            sections => {
                doc["sections"] = sections
                    .iter()
                    .map(|s| json!({"label": s.label, "rows": rows(&s.rows)}))
                    .collect();
            }
        }
        if let Some((k, v)) = &self.extra {
            doc[k] = v.clone();
        }
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        Ok(())
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => {
                let s = format!("{f:.4}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            }
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}
