//! CSV emission and reading.

use crate::error::{CliError, CliResult};

/// 17 significant digits, round-trip exact.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Field {
    F(f64),
    U(usize),
    S(&'static str),
    B(bool),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::F(x) => float(*x),
            Field::U(n) => n.to_string(),
            Field::S(s) => s.to_string(),
            Field::B(b) => b.to_string(),
        }
    }
}

/// In-memory CSV with a fixed header.
pub struct Table {
    width: usize,
    text: String,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            width: columns.len(),
            text: format!("{}\n", columns.join(",")),
        }
    }

    pub fn with_header(header: String) -> Self {
        Table {
            width: header.split(',').count(),
            text: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.width, "row width differs from header");
        let cells: Vec<String> = fields.iter().map(Field::render).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Header and numeric rows of a CSV file.
pub struct NumericCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericCsv {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::usage("empty CSV"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for l in lines {
            let row = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| CliError::usage(format!("non-numeric CSV row {l:?}")))?;
            if row.len() != header.len() {
                return Err(CliError::usage(format!(
                    "CSV row {l:?} has the wrong width"
                )));
            }
            rows.push(row);
        }
        Ok(NumericCsv { header, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::usage(format!("CSV has no column {name}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for x in [5.783185962946784, 1.0 / 3.0, -2.5e-300, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn table_and_reader_agree() {
        let mut t = Table::new(&["a", "b"]);
        t.row(&[Field::F(0.5), Field::U(3)]);
        let csv = NumericCsv::parse(std::str::from_utf8(&t.into_bytes()).unwrap()).unwrap();
        assert_eq!(csv.column("b").unwrap(), vec![3.0]);
        assert!(csv.column("c").is_err());
    }
}
