//! CSV tables: header row, LF line endings, floats at 17 significant digits.

use super::HarnessError;
use crate::model::fmt17;

/// A cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt17(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Parsed CSV: header and string records.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvData {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        if text.trim().is_empty() {
            return Ok(CsvData { header: Vec::new(), records: Vec::new() });
        }
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| HarnessError::Schema(e.to_string()))?.iter().map(String::from).collect();
        let mut records = Vec::new();
        for rec in r.records() {
            records.push(rec.map_err(|e| HarnessError::Schema(e.to_string()))?.iter().map(String::from).collect());
        }
        Ok(CsvData { header, records })
    }

    pub fn column(&self, name: &str) -> Result<usize, HarnessError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Schema(format!("missing column '{name}'")))
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let c = self.column(name)?;
        self.records
            .iter()
            .map(|r| r[c].parse::<f64>().map_err(|_| HarnessError::Schema(format!("column '{name}': '{}'", r[c]))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format() {
        let mut t = Table::new(&["n", "x", "label"]);
        t.push(vec![3usize.into(), 0.1.into(), "a".into()]);
        let s = t.to_csv();
        assert_eq!(s, "n,x,label\n3,1.0000000000000001e-1,a\n");
        let back = CsvData::parse(&s).unwrap();
        assert_eq!(back.floats("x").unwrap(), vec![0.1]);
        assert!(back.column("y").is_err());
        assert!(CsvData::parse("").unwrap().records.is_empty());
    }
}
