//! Report rows and their serialized forms.
//!
//! A report is a list of rows with a fixed column order. Two formats are
//! supported: JSON lines (one object per row) and CSV (header plus one line
//! per row). Rational quantities are emitted twice, as exact `p/q` text and
//! as a decimal, and both formats round-trip losslessly.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::qubit_efficiency;

use super::runner::VerdictAggregate;
use super::scenario::Scenario;

/// One row of a sweep or scenario report. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub n: usize,
    pub t: usize,
    pub kappa: String,
    pub kappa_decimal: f64,
    pub repetitions: usize,
    pub honest_agreement_rate: f64,
    pub coalition_success_rate: Option<f64>,
    pub coincidental_success_rate: Option<f64>,
    pub mean_detection_events: f64,
    pub qubit_efficiency: String,
    pub qubit_efficiency_decimal: f64,
    pub seed: u64,
}

pub const COLUMNS: [&str; 13] = [
    "label",
    "n",
    "t",
    "kappa",
    "kappa_decimal",
    "repetitions",
    "honest_agreement_rate",
    "coalition_success_rate",
    "coincidental_success_rate",
    "mean_detection_events",
    "qubit_efficiency",
    "qubit_efficiency_decimal",
    "seed",
];

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    JsonLines,
    Csv,
}

impl ReportFormat {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "json" | "jsonl" | "json-lines" => Ok(ReportFormat::JsonLines),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Usage(format!("unknown report format `{other}`"))),
        }
    }
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl ReportRow {
    /// Assemble the row for one scenario's aggregate.
    pub fn from_aggregate(scenario: &Scenario, aggregate: &VerdictAggregate) -> Self {
        let cfg = &scenario.config;
        let kappa = cfg.detection_rate();
        let eta = qubit_efficiency(cfg.n_parties, cfg.resistance, kappa);
        ReportRow {
            label: scenario.label.clone(),
            n: cfg.n_parties,
            t: cfg.resistance,
            kappa: kappa.to_string(),
            kappa_decimal: ratio_to_f64(kappa),
            repetitions: aggregate.repetitions,
            honest_agreement_rate: aggregate.honest_agreement_rate,
            coalition_success_rate: aggregate.coalition_success_rate,
            coincidental_success_rate: aggregate.coincidental_success_rate,
            mean_detection_events: aggregate.mean_detection_events,
            qubit_efficiency: eta.to_string(),
            qubit_efficiency_decimal: ratio_to_f64(eta),
            seed: cfg.seed,
        }
    }
}

/// Serialize rows in the requested format. Records are newline-terminated
/// UTF-8 with a stable column order.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::JsonLines => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, row)
                    .map_err(|e| Error::Usage(format!("serialization failed: {e}")))?;
                out.push(b'\n');
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for row in rows {
                let fields = [
                    csv_escape(&row.label),
                    row.n.to_string(),
                    row.t.to_string(),
                    row.kappa.clone(),
                    row.kappa_decimal.to_string(),
                    row.repetitions.to_string(),
                    row.honest_agreement_rate.to_string(),
                    opt_to_string(row.coalition_success_rate),
                    opt_to_string(row.coincidental_success_rate),
                    row.mean_detection_events.to_string(),
                    row.qubit_efficiency.clone(),
                    row.qubit_efficiency_decimal.to_string(),
                    row.seed.to_string(),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
    }
}

fn opt_to_string(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Parse a JSON-lines report back into rows.
pub fn parse_json_lines(bytes: &[u8]) -> Result<Vec<ReportRow>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Usage("report is not valid UTF-8".into()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str(line).map_err(|e| Error::Usage(format!("bad report line: {e}")))
        })
        .collect()
}

/// Parse a CSV report back into rows.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<ReportRow>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Usage("report is not valid UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Usage("empty CSV report".into()))?;
    if header != COLUMNS.join(",") {
        return Err(Error::Usage("unexpected CSV header".into()));
    }
    lines
        .map(|line| {
            let fields = split_csv_line(line)?;
            if fields.len() != COLUMNS.len() {
                return Err(Error::Usage(format!(
                    "expected {} fields, got {}",
                    COLUMNS.len(),
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad number `{}`", fields[i])))
            };
            let opt_num = |i: usize| -> Result<Option<f64>> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let int = |i: usize| -> Result<u64> {
                fields[i]
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad integer `{}`", fields[i])))
            };
            Ok(ReportRow {
                label: fields[0].clone(),
                n: int(1)? as usize,
                t: int(2)? as usize,
                kappa: fields[3].clone(),
                kappa_decimal: num(4)?,
                repetitions: int(5)? as usize,
                honest_agreement_rate: num(6)?,
                coalition_success_rate: opt_num(7)?,
                coincidental_success_rate: opt_num(8)?,
                mean_detection_events: num(9)?,
                qubit_efficiency: fields[10].clone(),
                qubit_efficiency_decimal: num(11)?,
                seed: int(12)?,
            })
        })
        .collect()
}

fn split_csv_line(line: &str) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    current.push('"');
                }
                '"' => quoted = false,
                _ => current.push(c),
            }
        } else {
            match c {
                '"' => quoted = true,
                ',' => fields.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
    }
    if quoted {
        return Err(Error::Usage("unterminated quote in CSV line".into()));
    }
    fields.push(current);
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_row() -> ReportRow {
        ReportRow {
            label: "demo".into(),
            n: 4,
            t: 3,
            kappa: "1".into(),
            kappa_decimal: 1.0,
            repetitions: 100,
            honest_agreement_rate: 1.0,
            coalition_success_rate: Some(0.0),
            coincidental_success_rate: Some(0.0),
            mean_detection_events: 0.0,
            qubit_efficiency: "1/24".into(),
            qubit_efficiency_decimal: 1.0 / 24.0,
            seed: 42,
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let bytes = emit_report(&[sample_row()], ReportFormat::Csv).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("label,n,t,kappa"));
        assert!(lines[1].contains("1/24"));
        assert!(lines[1].contains("0.041666666666666664"));
    }

    #[test]
    fn json_lines_round_trip() {
        let rows = vec![
            sample_row(),
            ReportRow {
                label: "honest".into(),
                coalition_success_rate: None,
                coincidental_success_rate: None,
                ..sample_row()
            },
        ];
        let bytes = emit_report(&rows, ReportFormat::JsonLines).unwrap();
        assert_eq!(parse_json_lines(&bytes).unwrap(), rows);
    }

    #[test]
    fn csv_round_trip_with_awkward_label() {
        let mut row = sample_row();
        row.label = "a,b \"quoted\"".into();
        let bytes = emit_report(&[row.clone()], ReportFormat::Csv).unwrap();
        assert_eq!(parse_csv(&bytes).unwrap(), vec![row]);
    }

    #[test]
    fn unknown_format_is_a_usage_error() {
        assert!(matches!(ReportFormat::parse("xml"), Err(Error::Usage(_))));
        assert_eq!(ReportFormat::parse("csv").unwrap(), ReportFormat::Csv);
        assert_eq!(
            ReportFormat::parse("json").unwrap(),
            ReportFormat::JsonLines
        );
    }

    proptest! {
        #[test]
        fn round_trips_are_lossless(
            label in "[a-zA-Z0-9 ,\"_-]{0,20}",
            n in 2usize..20,
            t in 1usize..8,
            rate in 0.0f64..=1.0,
            success in proptest::option::of(0.0f64..=1.0),
            seed in any::<u64>(),
        ) {
            let row = ReportRow {
                label,
                n,
                t,
                kappa: "1/4".into(),
                kappa_decimal: 0.25,
                repetitions: 10,
                honest_agreement_rate: rate,
                coalition_success_rate: success,
                coincidental_success_rate: success.map(|s| 1.0 - s),
                mean_detection_events: rate * 3.0,
                qubit_efficiency: "1/30".into(),
                qubit_efficiency_decimal: 1.0 / 30.0,
                seed,
            };
            let json = emit_report(std::slice::from_ref(&row), ReportFormat::JsonLines).unwrap();
            prop_assert_eq!(&parse_json_lines(&json).unwrap()[0], &row);
            let csv = emit_report(std::slice::from_ref(&row), ReportFormat::Csv).unwrap();
            prop_assert_eq!(&parse_csv(&csv).unwrap()[0], &row);
        }
    }
}
