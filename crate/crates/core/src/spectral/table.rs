//! Plain-text numeric tables: `#` comments, whitespace- or comma-separated
//! columns, optional single header line before the first data row.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    /// `(1-based source line, values)`; every row has the same width.
    pub rows: Vec<(usize, Vec<f64>)>,
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty())
}

impl NumericTable {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut header = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut width = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = split_fields(line).collect();
            if fields.is_empty() {
                return Err(Error::parse(source_name, line_no, "separators without values"));
            }
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(values) => {
                    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                        return Err(Error::parse(source_name, line_no, format!("non-finite value in column {}", bad + 1)));
                    }
                    let w = *width.get_or_insert(values.len());
                    if values.len() != w {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            format!("expected {w} columns, found {}", values.len()),
                        ));
                    }
                    rows.push((line_no, values));
                }
                Err(_) if header.is_none() && rows.is_empty() => {
                    header = Some(fields.iter().map(|s| s.to_string()).collect::<Vec<_>>());
                    width = Some(fields.len());
                }
                Err(_) => {
                    let bad = fields.iter().find(|f| f.parse::<f64>().is_err()).copied().unwrap_or("");
                    return Err(Error::parse(source_name, line_no, format!("not a number: {bad:?}")));
                }
            }
        }
        if rows.len() < 2 {
            return Err(Error::parse(source_name, 0, format!("need at least 2 data rows, found {}", rows.len())));
        }
        Ok(Self { header, rows })
    }

    pub fn width(&self) -> usize {
        self.rows[0].1.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|(_, r)| r[j]).collect()
    }

    /// Fails unless the first column strictly increases.
    pub fn check_ascending(&self, source_name: &str) -> Result<()> {
        for pair in self.rows.windows(2) {
            if pair[1].1[0] <= pair[0].1[0] {
                return Err(Error::parse(
                    source_name,
                    pair[1].0,
                    format!("non-monotonic grid: wavelength {} follows {}", pair[1].1[0], pair[0].1[0]),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_header_and_separators() {
        let t = NumericTable::parse("# c\nwl,a b\n400, 1 2\n\n401 3,4\n", "t").unwrap();
        assert_eq!(t.header.as_deref(), Some(&["wl".to_string(), "a".into(), "b".into()][..]));
        assert_eq!(t.rows, vec![(3, vec![400.0, 1.0, 2.0]), (5, vec![401.0, 3.0, 4.0])]);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = NumericTable::parse("1 2\n3 4\n5\n", "t").unwrap_err();
        assert_eq!(err.to_string(), "t: line 3: expected 2 columns, found 1");
    }

    #[test]
    fn text_after_data_is_rejected() {
        let err = NumericTable::parse("1 2\n3 x\n", "t").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn descending_grid_rejected() {
        let t = NumericTable::parse("2 0\n1 0\n", "t").unwrap();
        let err = t.check_ascending("t").unwrap_err();
        assert!(err.to_string().contains("non-monotonic grid"));
    }

    #[test]
    fn separator_only_line_rejected() {
        let err = NumericTable::parse("1 2\n,\n3 4\n", "t").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(NumericTable::parse(",\n,\n", "t").is_err());
    }

    #[test]
    fn nan_rejected() {
        assert!(NumericTable::parse("1 NaN\n2 3\n", "t").is_err());
    }
}
