//! CSV emission for plot data: stable column ordering, floats at 17
//! significant digits, a `#`-prefixed metadata header, and byte-identical
//! output for identical inputs.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Int(i64),
    UInt(u64),
    Float(f64),
    Text(String),
}

impl fmt::Display for CsvValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsvValue::Int(v) => write!(f, "{v}"),
            CsvValue::UInt(v) => write!(f, "{v}"),
            // 17 significant digits round-trip any f64
            CsvValue::Float(v) => write!(f, "{v:.16e}"),
            CsvValue::Text(v) => write!(f, "{v}"),
        }
    }
}

impl CsvValue {
    fn parse(token: &str) -> CsvValue {
        if let Ok(v) = token.parse::<i64>() {
            return CsvValue::Int(v);
        }
        if let Ok(v) = token.parse::<u64>() {
            return CsvValue::UInt(v);
        }
        if let Ok(v) = token.parse::<f64>() {
            return CsvValue::Float(v);
        }
        CsvValue::Text(token.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CsvValue>>,
}

impl PlotTable {
    pub fn new(columns: &[&str]) -> Self {
        PlotTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<CsvValue>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Write the table with a metadata header. Metadata lines come first as
/// `# key = value`, then the column header, then the rows.
pub fn emit_plot_data(table: &PlotTable, metadata: &[(&str, String)], path: &Path) -> Result<()> {
    for row in &table.rows {
        if row.len() != table.columns.len() {
            return Err(Error::invalid(
                "rows",
                format!(
                    "row width {} does not match {} columns",
                    row.len(),
                    table.columns.len()
                ),
            ));
        }
    }
    let mut out = String::new();
    for (key, value) in metadata {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a table previously written by [`emit_plot_data`], skipping metadata
/// lines.
pub fn read_plot_data(path: &Path) -> Result<PlotTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::EmptyCsv {
        path: path.display().to_string(),
    })?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        rows.push(line.split(',').map(|t| CsvValue::parse(t.trim())).collect());
    }
    Ok(PlotTable {
        columns: columns.clone(),
        rows,
    })
}
