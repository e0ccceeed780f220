use std::fs::File;
use std::path::Path;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Column named in the header line (a header is then required).
    Name(String),
    /// Zero-based column index.
    Index(usize),
}

/// Loads a comma-separated feature file.
///
/// The first line is treated as a header when the label column is given by
/// name, or when any of its cells fails to parse as a number. Row numbers in
/// parse errors are 1-based file line numbers.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut records = reader.records();
    let mut line = 0usize;
    let mut pending = None;
    let mut label_idx = match label_column {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(_) => None,
    };

    if let Some(first) = records.next() {
        line += 1;
        let first = first.map_err(|e| parse_err(line, e.to_string()))?;
        let numeric = first.iter().all(|c| c.trim().parse::<f64>().is_ok());
        match label_column {
            LabelColumn::Name(name) => {
                let pos = first
                    .iter()
                    .position(|c| c.trim() == name)
                    .ok_or_else(|| parse_err(1, format!("header has no column named {name:?}")))?;
                label_idx = Some(pos);
            }
            LabelColumn::Index(_) if numeric => pending = Some(first),
            LabelColumn::Index(_) => {}
        }
    }
    let label_idx = label_idx.expect("label column resolved");

    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut push = |rec: csv::StringRecord, line: usize| -> Result<()> {
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_err(
                line,
                format!("expected {w} fields, found {}", rec.len()),
            ));
        }
        if label_idx >= w {
            return Err(parse_err(
                line,
                format!("label column {label_idx} out of range"),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                let l: i64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("label {cell:?} is not an integer")))?;
                let l = i8::try_from(l)
                    .map_err(|_| parse_err(line, format!("label {l} out of range")))?;
                labels.push(l);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    parse_err(line, format!("column {j}: {cell:?} is not a number"))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {j}: non-finite value")));
                }
                values.push(v);
            }
        }
        Ok(())
    };

    if let Some(rec) = pending {
        push(rec, 1)?;
    }
    for rec in records {
        line += 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        push(rec, line)?;
    }

    let d = width.map_or(0, |w| w - 1);
    let n = labels.len();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, Matrix::new(n, d, values)?, labels)
}

/// Writes `f0..f{d-1},label` with features stored at 32-bit precision.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut header: Vec<String> = (0..ds.feature_dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for (row, label) in ds.features().iter_rows().zip(ds.labels()) {
        let mut rec: Vec<String> = row.iter().map(|&v| (v as f32).to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_err(row: usize, message: String) -> Error {
    Error::Parse { row, message }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;
    use std::io::Write;

    fn file_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_in_order() {
        let f = file_with("a,b,label\n0.1,0.2,0\n0.3,0.4,1\n0.5,0.6,0\n");
        let ds = load_csv(f.path(), &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.features().row(1), &[0.3, 0.4]);
    }

    #[test]
    fn headerless_with_index() {
        let f = file_with("1,0.5,2\n0,0.25,3\n");
        let ds = load_csv(f.path(), &LabelColumn::Index(0)).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.features().row(0), &[0.5, 2.0]);
    }

    #[test]
    fn bad_cell_names_row() {
        let f = file_with("a,b,label\n0.1,0.2,0\n0.3,abc,1\n");
        let err = load_csv(f.path(), &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn ragged_row() {
        let f = file_with("0.1,0.2,0\n0.3,1\n");
        let err = load_csv(f.path(), &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/definitely/not/here.csv", &LabelColumn::Index(0)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn round_trip_at_single_precision() {
        let mut rng = RngState::new(5);
        let data: Vec<f64> = (0..100 * 6).map(|_| rng.uniform() * 10.0 - 5.0).collect();
        let labels = (0..100).map(|i| (i % 2) as i8).collect();
        let ds = Dataset::new("rt", Matrix::new(100, 6, data).unwrap(), labels).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let back = load_csv(f.path(), &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(back.labels(), ds.labels());
        for (a, b) in back
            .features()
            .as_slice()
            .iter()
            .zip(ds.features().as_slice())
        {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
