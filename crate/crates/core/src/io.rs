//! CSV and JSON output: comma-separated, `.` decimal, LF endings, one
//! `#`-prefixed provenance line followed by the header row.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Renders the table; `provenance` becomes the leading comment line.
    pub fn render(&self, provenance: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(p) = provenance {
            out.push_str("# ");
            out.push_str(p);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, provenance: Option<&str>) -> Result<()> {
        write_atomic(path, self.render(provenance).as_bytes())
    }

    /// Parses the output of [`CsvTable::render`]; comment lines are skipped.
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let columns: Vec<String> = lines.next()?.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            let row: Option<Vec<f64>> = line.split(',').map(|c| parse_number(c.trim())).collect();
            let row = row?;
            if row.len() != columns.len() {
                return None;
            }
            rows.push(row);
        }
        Some(Self { columns, rows })
    }
}

fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn render_has_provenance_header_and_lf() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec![1.0, 0.1]);
        t.push(vec![f64::INFINITY, -2.5e-12]);
        let s = t.render(Some("slowfast 0.1.0 seed=1"));
        assert_eq!(s, "# slowfast 0.1.0 seed=1\na,b\n1,0.1\ninf,-0.0000000000025\n");
        assert!(!s.contains('\r'));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e12f64..1e12, 3), 0..20)) {
            let mut t = CsvTable::new(["x", "y", "z"]);
            for r in rows { t.push(r); }
            let back = CsvTable::parse(&t.render(Some("p"))).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
