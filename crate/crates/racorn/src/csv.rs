//! Strict CSV ingestion and emission for price panels.
//!
//! Schema: UTF-8, comma separator, '.' decimal, no thousands separators, no
//! quoting. The first row holds asset tickers; each following row is one
//! trading period. The first column may hold an opaque period label (a date,
//! typically), detected by a non-numeric first cell on the first data row.
//! Input mode (prices vs relatives) is always explicit, never inferred: a
//! relatives file of values near 1.0 is indistinguishable from a prices file
//! by inspection.
//!
//! Missing data is a hard error; there is no imputation. Reproduction quality
//! on public OLPS panels depends on using the distributed files as-is; the
//! loader is agnostic about dividend/split adjustment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::market::{PriceRelativeSeries, PriceSeries};

/// How the body of a CSV file is to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Rows are closing prices; relatives are derived downstream.
    Prices,
    /// Rows are already price relatives.
    Relatives,
}

impl InputMode {
    pub fn parse(s: &str) -> Result<InputMode> {
        match s.to_ascii_lowercase().as_str() {
            "prices" => Ok(InputMode::Prices),
            "relatives" => Ok(InputMode::Relatives),
            other => Err(Error::InvalidConfig(format!(
                "unknown input mode `{other}` (expected `prices` or `relatives`)"
            ))),
        }
    }
}

impl std::fmt::Display for InputMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputMode::Prices => "prices",
            InputMode::Relatives => "relatives",
        })
    }
}

struct RawTable {
    asset_names: Vec<String>,
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
    /// 1-based file line of each data row, for diagnostics.
    row_lines: Vec<usize>,
}

fn is_numeric_cell(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

fn parse_table(text: &str) -> Result<RawTable> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or(Error::Csv {
        line: 1,
        message: "empty file: expected a header row of asset names".into(),
    })?;
    let header_cells: Vec<&str> = header.split(',').map(str::trim).collect();
    let width = header_cells.len();

    let mut labeled = false;
    let mut asset_names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    let mut row_lines = Vec::new();

    for (line, raw) in lines {
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(Error::Csv {
                line,
                message: format!("expected {width} cells, found {}", cells.len()),
            });
        }
        if rows.is_empty() {
            // Label column is detected once, on the first data row.
            labeled = !is_numeric_cell(cells[0]);
            if labeled && width < 2 {
                return Err(Error::Csv {
                    line,
                    message: "no numeric columns after the label column".into(),
                });
            }
            asset_names = if labeled {
                header_cells[1..].iter().map(|s| s.to_string()).collect()
            } else {
                header_cells.iter().map(|s| s.to_string()).collect()
            };
        }
        let start = usize::from(labeled);
        let mut row = Vec::with_capacity(width - start);
        for (col, cell) in cells.iter().enumerate().skip(start) {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    return Err(Error::Csv {
                        line,
                        message: format!("column {} is not finite: `{v}`", col + 1),
                    })
                }
                Err(_) => {
                    return Err(Error::Csv {
                        line,
                        message: format!("column {} is not a number: `{cell}`", col + 1),
                    })
                }
            }
        }
        labels.push(if labeled {
            cells[0].to_string()
        } else {
            (rows.len() + 1).to_string()
        });
        rows.push(row);
        row_lines.push(line);
    }

    if rows.is_empty() {
        return Err(Error::Csv {
            line: 1,
            message: "no data rows after the header".into(),
        });
    }
    if asset_names.is_empty() || asset_names.iter().any(|n| n.is_empty()) {
        return Err(Error::Csv {
            line: 1,
            message: "header must name every asset column".into(),
        });
    }

    Ok(RawTable {
        asset_names,
        labels,
        rows,
        row_lines,
    })
}

/// Check positivity cell by cell so the diagnostic can cite the file line.
fn check_positive(table: &RawTable, what: &str) -> Result<()> {
    for (r, row) in table.rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v <= 0.0 {
                return Err(Error::Csv {
                    line: table.row_lines[r],
                    message: format!(
                        "{what} for `{}` must be positive, got {v}",
                        table.asset_names[c]
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Parse a prices-mode CSV body.
pub fn parse_prices_csv(text: &str) -> Result<PriceSeries> {
    let table = parse_table(text)?;
    check_positive(&table, "price")?;
    if table.rows.len() < 2 {
        return Err(Error::Csv {
            line: table.row_lines[0],
            message: "prices mode needs at least 2 rows to form one relative".into(),
        });
    }
    PriceSeries::new(table.rows, table.asset_names, table.labels)
}

/// Parse a relatives-mode CSV body.
pub fn parse_relatives_csv(text: &str) -> Result<PriceRelativeSeries> {
    let table = parse_table(text)?;
    check_positive(&table, "price relative")?;
    PriceRelativeSeries::new(table.rows, table.asset_names, table.labels)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_prices_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    parse_prices_csv(&read(path)?).map_err(|e| e.in_file(path.display().to_string()))
}

pub fn load_relatives_csv(path: impl AsRef<Path>) -> Result<PriceRelativeSeries> {
    let path = path.as_ref();
    parse_relatives_csv(&read(path)?).map_err(|e| e.in_file(path.display().to_string()))
}

/// Load a dataset in either mode and return price relatives, deriving them
/// when the file holds closing prices.
pub fn load_market_csv(path: impl AsRef<Path>, mode: InputMode) -> Result<PriceRelativeSeries> {
    match mode {
        InputMode::Prices => {
            let prices = load_prices_csv(&path)?;
            crate::market::derive_relatives(&prices)
        }
        InputMode::Relatives => load_relatives_csv(&path),
    }
}

/// True when the label column must be emitted so the loader will re-detect it.
fn labels_emittable(labels: &[String]) -> bool {
    labels.first().is_some_and(|l| !is_numeric_cell(l))
}

fn write_table(
    asset_names: &[String],
    labels: &[String],
    rows: &[Vec<f64>],
    label_header: &str,
) -> String {
    let with_labels = labels_emittable(labels);
    let mut out = String::new();
    if with_labels {
        out.push_str(label_header);
        out.push(',');
    }
    out.push_str(&asset_names.join(","));
    out.push('\n');
    for (t, row) in rows.iter().enumerate() {
        if with_labels {
            out.push_str(&labels[t]);
            out.push(',');
        }
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Emit the loader's schema for a price panel. Numeric period labels are not
/// representable in the label column (the loader would mistake them for data)
/// and are dropped; the loader resynthesizes "1".."n" on read.
pub fn write_prices_csv(series: &PriceSeries) -> String {
    write_table(
        series.asset_names(),
        series.period_labels(),
        series.closes(),
        "date",
    )
}

/// Emit the loader's schema for a relatives panel.
pub fn write_relatives_csv(series: &PriceRelativeSeries) -> String {
    write_table(
        series.asset_names(),
        series.period_labels(),
        series.relatives(),
        "date",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_prices_roundtrip() {
        let text = "AAA,BBB\n100,50\n110,49\n99,51\n";
        let ps = parse_prices_csv(text).unwrap();
        assert_eq!(ps.num_periods(), 3);
        assert_eq!(ps.num_assets(), 2);
        assert_eq!(ps.asset_names(), &["AAA".to_string(), "BBB".to_string()]);
        assert_eq!(ps.closes()[1], vec![110.0, 49.0]);
    }

    #[test]
    fn missing_cell_cites_file_line() {
        // data row 2 is file line 3 (header counted)
        let text = "AAA,BBB\n100,50\n110\n99,51\n";
        let err = parse_prices_csv(text).unwrap_err();
        match err {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_cites_line_and_column() {
        let text = "AAA,BBB\n100,abc\n110,50\n";
        let err = parse_prices_csv(text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("abc"), "{err}");
    }

    #[test]
    fn negative_relative_rejected() {
        let text = "AAA,BBB\n1.01,-0.5\n";
        let err = parse_relatives_csv(text).unwrap_err().to_string();
        assert!(err.contains("positive"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn empty_file_rejected() {
        let err = parse_prices_csv("").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(err.contains("empty"), "{err}");
    }

    #[test]
    fn date_column_detected_and_preserved() {
        let text = "date,AAA,BBB\n2001-01-14,100,50\n2001-01-15,101,49\n";
        let ps = parse_prices_csv(text).unwrap();
        assert_eq!(ps.num_assets(), 2);
        assert_eq!(ps.period_labels(), &["2001-01-14", "2001-01-15"]);
    }

    #[test]
    fn writer_roundtrips_labeled_relatives() {
        let text = "date,AAA,BBB\n2001-01-14,1.01,0.97\n2001-01-15,0.99,1.03\n";
        let rel = parse_relatives_csv(text).unwrap();
        let emitted = write_relatives_csv(&rel);
        let back = parse_relatives_csv(&emitted).unwrap();
        assert_eq!(rel, back);
    }

    #[test]
    fn writer_roundtrips_unlabeled_prices() {
        let ps = PriceSeries::from_rows(
            vec![vec![100.0, 50.0], vec![103.0, 49.5]],
            vec!["AAA".into(), "BBB".into()],
        )
        .unwrap();
        let back = parse_prices_csv(&write_prices_csv(&ps)).unwrap();
        assert_eq!(ps, back);
    }

    #[test]
    fn nonfinite_cell_rejected() {
        let text = "AAA\ninf\n1.0\n";
        let err = parse_prices_csv(text).unwrap_err().to_string();
        assert!(err.contains("finite"), "{err}");
    }

    #[test]
    fn explicit_mode_controls_interpretation() {
        // Near-1.0 values parse fine in both modes; only the caller's mode
        // decides the meaning.
        let text = "AAA,BBB\n1.01,0.99\n1.02,0.98\n";
        assert!(parse_prices_csv(text).is_ok());
        assert!(parse_relatives_csv(text).is_ok());
    }
}
