//! CSV ingestion: comma-delimited, decimal point, optional header row.

use std::fs;
use std::path::Path;

use crate::{CliError, Result};

/// Numeric rows of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn header(&self) -> Option<&[String]> {
        self.header.as_deref()
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    // `f64::from_str` also accepts inf/nan spellings
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
        return None;
    }
    t.parse().ok().filter(|v: &f64| v.is_finite())
}

pub fn parse_csv(path: &Path) -> Result<DataTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_csv_text(&text, &path.display().to_string())
}

/// Parse CSV text; `origin` names the source in errors. Rows and columns in
/// errors are 1-based and count the header row.
pub fn parse_csv_text(text: &str, origin: &str) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |row: usize, column: usize, message: String| CliError::Parse {
        path: origin.to_string(),
        row,
        column,
        message,
    };
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| err(row, 0, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && record.iter().all(|c| parse_cell(c).is_none()) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let width = rows.first().map(Vec::len).or(header.as_ref().map(Vec::len));
        if let Some(w) = width {
            if record.len() != w {
                return Err(err(row, record.len().min(w) + 1, format!("expected {w} columns, found {}", record.len())));
            }
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(c).ok_or_else(|| err(row, j + 1, format!("'{c}' is not a finite number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{origin}: no data rows")));
    }
    Ok(DataTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let t = parse_csv_text("x,y\n1,2\n3,4.5\n", "t").unwrap();
        assert_eq!(t.header().unwrap(), ["x", "y"]);
        assert_eq!(t.data(), [vec![1.0, 2.0], vec![3.0, 4.5]]);
        let t = parse_csv_text("1\n-2e-1\n", "t").unwrap();
        assert!(t.header().is_none());
        assert_eq!(t.column(0), [1.0, -0.2]);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        match parse_csv_text("a,b\n1,2\n3,oops\n", "t") {
            Err(CliError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        match parse_csv_text("1\n2\nNaN\n", "t") {
            Err(CliError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv_text("1,2\n3\n", "t"), Err(CliError::Parse { row: 2, .. })));
        assert!(matches!(parse_csv_text("x\n", "t"), Err(CliError::Input(_))));
    }

    proptest::proptest! {
        #[test]
        fn written_values_parse_back(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let text: String = rows
                .iter()
                .map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",") + "\n")
                .collect();
            let t = parse_csv_text(&format!("a,b,c\n{text}"), "t").unwrap();
            proptest::prop_assert_eq!(t.data(), rows.as_slice());
        }
    }
}
