//! Reading a single numeric series out of a CSV file.

use std::path::Path;

use crate::CliError;

/// Which column holds the series.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSelector {
    /// 1-based position.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl ColumnSelector {
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        }
    }
}

/// Reads one column of numbers. Lines starting with `#` are comments; a
/// first row whose selected cell is not a number is taken as a header.
/// Without a selector the last column is used, so a leading date column is
/// skipped.
pub fn read_series(path: &Path, column: Option<&ColumnSelector>) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;

    let mut values = Vec::new();
    let mut index: Option<usize> = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let looks_like_header = match column {
                Some(ColumnSelector::Name(_)) => true,
                _ => {
                    let i = resolve_index(column, record.len(), line)?;
                    record.get(i).is_some_and(|c| c.parse::<f64>().is_err())
                }
            };
            if looks_like_header {
                index = Some(match column {
                    Some(ColumnSelector::Name(name)) => record.iter().position(|c| c == name).ok_or_else(|| {
                        CliError::Data(format!("line {line}: no column named '{name}' in the header"))
                    })?,
                    _ => resolve_index(column, record.len(), line)?,
                });
                continue;
            }
        }
        let i = match index {
            Some(i) => i,
            None => resolve_index(column, record.len(), line)?,
        };
        let cell = record
            .get(i)
            .ok_or_else(|| CliError::Data(format!("line {line}: missing column {}", i + 1)))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| CliError::Data(format!("line {line}: cannot parse '{cell}' as a number")))?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("line {line}: non-finite value '{cell}'")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Data(format!("{} contains no observations", path.display())));
    }
    Ok(values)
}

fn resolve_index(column: Option<&ColumnSelector>, width: usize, line: u64) -> Result<usize, CliError> {
    match column {
        Some(ColumnSelector::Index(0)) => Err(CliError::Usage("column indices start at 1".into())),
        Some(ColumnSelector::Index(i)) if *i > width => {
            Err(CliError::Data(format!("line {line}: column {i} requested but the row has {width}")))
        }
        Some(ColumnSelector::Index(i)) => Ok(i - 1),
        _ => Ok(width.saturating_sub(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_column_with_comments() {
        let f = file("# generated\n1.5\n-2\n\n3e-1\n");
        assert_eq!(read_series(f.path(), None).unwrap(), vec![1.5, -2.0, 0.3]);
    }

    #[test]
    fn header_and_date_column() {
        let f = file("date,price\n2020-01,10\n2020-02,11.5\n");
        assert_eq!(read_series(f.path(), None).unwrap(), vec![10.0, 11.5]);
        let by_name = ColumnSelector::parse("price");
        assert_eq!(read_series(f.path(), Some(&by_name)).unwrap(), vec![10.0, 11.5]);
        let f = file("1,10\n2,20\n");
        assert_eq!(read_series(f.path(), Some(&ColumnSelector::Index(1))).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = file("y\n1\n2\nabc\n");
        let err = read_series(f.path(), None).unwrap_err();
        assert!(matches!(&err, CliError::Data(m) if m.contains("line 4") && m.contains("abc")), "{err:?}");
        let f = file("");
        assert!(matches!(read_series(f.path(), None), Err(CliError::Data(_))));
        let f = file("y\n");
        assert!(matches!(read_series(f.path(), None), Err(CliError::Data(_))));
        let f = file("a,b\n1,2\n");
        assert!(matches!(read_series(f.path(), Some(&ColumnSelector::parse("c"))), Err(CliError::Data(_))));
    }
}
