//! Report serialization: full-precision CSV and JSON, and a paper-style
//! markdown table rounded to two decimals.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{CurvePoint, ReportRow};
use crate::metrics::SliceBin;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            other => Err(Error::invalid(format!(
                "unknown format `{other}` (expected csv, json, or md)"
            ))),
        }
    }
}

impl OutputFormat {
    /// Infer from a path's extension; defaults to CSV.
    pub fn from_path(path: &Path) -> OutputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => OutputFormat::Json,
            Some("md") => OutputFormat::Markdown,
            _ => OutputFormat::Csv,
        }
    }
}

/// Column order of the CSV header and of each row; frozen.
pub const REPORT_COLUMNS: [&str; 16] = [
    "preset",
    "sigma_f",
    "sigma_eps",
    "bias_sq_bag",
    "bias_sq_forest",
    "var_bag",
    "var_forest",
    "tree_var_bag",
    "tree_var_forest",
    "corr_bag",
    "corr_forest",
    "irreducible",
    "mse_bag",
    "mse_forest",
    "t_statistic",
    "delta_r_percent",
];

fn row_values(row: &ReportRow) -> [f64; 15] {
    [
        row.sigma_f,
        row.sigma_eps,
        row.bias_sq_bag,
        row.bias_sq_forest,
        row.var_bag,
        row.var_forest,
        row.tree_var_bag,
        row.tree_var_forest,
        row.corr_bag,
        row.corr_forest,
        row.irreducible,
        row.mse_bag,
        row.mse_forest,
        row.t_statistic,
        row.delta_r_percent,
    ]
}

/// Full-precision CSV (shortest round-trip float formatting).
pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = REPORT_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.preset);
        for v in row_values(row) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// JSON mirror of the CSV: an array of objects keyed by the column names.
pub fn rows_to_json(rows: &[ReportRow]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::Runtime(format!("json: {e}")))
}

/// Paper-style table: metrics as rows, one column per experiment, rounded to
/// two decimals.
pub fn rows_to_markdown(rows: &[ReportRow]) -> String {
    let metric_names = &REPORT_COLUMNS[1..];
    let mut out = String::new();
    out.push_str("| metric |");
    for row in rows {
        out.push_str(&format!(" {} |", row.preset));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in rows {
        out.push_str("---|");
    }
    out.push('\n');
    for (k, name) in metric_names.iter().enumerate() {
        out.push_str(&format!("| {name} |"));
        for row in rows {
            out.push_str(&format!(" {:.2} |", row_values(row)[k]));
        }
        out.push('\n');
    }
    out
}

pub fn render_rows(rows: &[ReportRow], format: OutputFormat) -> Result<String> {
    Ok(match format {
        OutputFormat::Csv => rows_to_csv(rows),
        OutputFormat::Json => rows_to_json(rows)?,
        OutputFormat::Markdown => rows_to_markdown(rows),
    })
}

/// Figure data: one line per bin of conditional differences.
pub fn slice_to_csv(bins: &[SliceBin]) -> String {
    let mut out = String::from("bin_low,bin_high,bin_mid,d_mse,d_bias_sq,d_var,count\n");
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.bin_low, b.bin_high, b.bin_mid, b.d_mse, b.d_bias_sq, b.d_var, b.count
        ));
    }
    out
}

/// Sweep curves: the swept value against the headline quantities.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(
        "value,delta_r_percent,bias_sq_bag,bias_sq_forest,var_bag,var_forest\n",
    );
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.value, p.delta_r_percent, p.bias_sq_bag, p.bias_sq_forest, p.var_bag, p.var_forest
        ));
    }
    out
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ReportRow {
        ReportRow {
            preset: "demo".into(),
            sigma_f: 1.0,
            sigma_eps: 1.0,
            bias_sq_bag: 0.13,
            bias_sq_forest: 0.23,
            var_bag: 0.22,
            var_forest: 0.11,
            tree_var_bag: 1.42,
            tree_var_forest: 1.43,
            corr_bag: 0.15,
            corr_forest: 0.07,
            irreducible: 1.01,
            mse_bag: 1.35,
            mse_forest: 1.33,
            t_statistic: 7.12,
            delta_r_percent: 1.40,
        }
    }

    #[test]
    fn csv_header_matches_frozen_columns() {
        let csv = rows_to_csv(&[sample_row()]);
        let header = csv.lines().next().unwrap();
        assert_eq!(header, REPORT_COLUMNS.join(","));
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("demo,1,1,0.13,"));
    }

    #[test]
    fn json_mirrors_the_field_names() {
        let json = rows_to_json(&[sample_row()]).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        let obj = &parsed.as_array().unwrap()[0];
        for key in REPORT_COLUMNS {
            assert!(obj.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(obj["mse_bag"], 1.35);
        assert_eq!(obj["preset"], "demo");
    }

    #[test]
    fn nan_serializes_as_null_in_json() {
        let mut row = sample_row();
        row.t_statistic = f64::NAN;
        let json = rows_to_json(&[row]).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(parsed.as_array().unwrap()[0]["t_statistic"].is_null());
    }

    #[test]
    fn markdown_rounds_to_two_decimals() {
        let md = rows_to_markdown(&[sample_row()]);
        assert!(md.contains("| mse_bag | 1.35 |"));
        assert!(md.contains("| delta_r_percent | 1.40 |"));
    }

    #[test]
    fn format_parsing_and_inference() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("JSON".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert_eq!("md".parse::<OutputFormat>().unwrap(), OutputFormat::Markdown);
        assert!("xml".parse::<OutputFormat>().is_err());
        assert_eq!(
            OutputFormat::from_path(Path::new("a/b.json")),
            OutputFormat::Json
        );
        assert_eq!(OutputFormat::from_path(Path::new("b.csv")), OutputFormat::Csv);
        assert_eq!(OutputFormat::from_path(Path::new("b")), OutputFormat::Csv);
    }
}
