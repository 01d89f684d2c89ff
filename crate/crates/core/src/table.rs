//! Small versioned CSV tables used for every report file.
//!
//! Layout: a `# xsplit-<kind> v1` line, a column line, then data rows. Floats
//! are written with `Display`, which round-trips exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Table {
            kind: kind.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> String {
        format!("# xsplit-{} v{TABLE_VERSION}", self.kind)
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        buf
    }

    /// Read a table, requiring kind `kind` and the current version.
    pub fn read<R: BufRead>(input: R, kind: &str) -> Result<Self> {
        let mut lines = input.lines();
        let expected = format!("# xsplit-{kind} v{TABLE_VERSION}");
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim_end() != expected {
            return Err(Error::Format { expected, found: first });
        }
        let columns: Vec<String> = lines
            .next()
            .transpose()?
            .ok_or(Error::Parse {
                line: 2,
                msg: "missing column line".into(),
            })?
            .trim_end()
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.trim_end().split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    line: n + 3,
                    msg: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Table {
            kind: kind.to_string(),
            columns,
            rows,
        })
    }

    /// Require the given column names, in order.
    pub fn expect_columns(&self, columns: &[&str]) -> Result<()> {
        if self.columns.iter().map(String::as_str).eq(columns.iter().copied()) {
            Ok(())
        } else {
            Err(Error::Format {
                expected: columns.join(","),
                found: self.columns.join(","),
            })
        }
    }

    /// Parse cell `col` of row `row`; `row` counts data rows from 0.
    pub fn get<T>(&self, row: usize, col: usize) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = &self.rows[row][col];
        raw.parse().map_err(|e: T::Err| Error::Parse {
            line: row + 3,
            msg: format!("column `{}`: `{raw}`: {e}", self.columns[col]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_floats() {
        let mut t = Table::new("demo", &["x", "label"]);
        t.push(vec![(0.1f64 + 0.2).to_string(), "a".into()]);
        t.push(vec![1e-300f64.to_string(), "b".into()]);
        let back = Table::read(t.to_bytes().as_slice(), "demo").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get::<f64>(0, 0).unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn wrong_kind_is_a_format_error() {
        let t = Table::new("demo", &["x"]);
        assert!(matches!(Table::read(t.to_bytes().as_slice(), "other"), Err(Error::Format { .. })));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = "# xsplit-demo v1\nx,y\n1\n";
        assert!(matches!(Table::read(text.as_bytes(), "demo"), Err(Error::Parse { line: 3, .. })));
    }
}
