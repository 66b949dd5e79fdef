//! CSV ingestion and emission.
//!
//! Labeled files carry columns `x0,x1,...,x{d-1},a,y`; unlabeled files carry
//! `x0,...,x{d-1}` with an optional trailing `a`. A header row is required,
//! `x0` must be the constant intercept column, and floats are written with
//! Rust's shortest round-trip formatting so files are byte-reproducible.

use std::path::Path;

use ndarray::Array2;

use super::CliError;

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

/// Checks that headers start with x0..x{d-1} and returns d plus the indices
/// of trailing special columns in order.
fn split_header(headers: &csv::StringRecord) -> (usize, Vec<String>) {
    let mut d = 0;
    for field in headers.iter() {
        if field == format!("x{d}") {
            d += 1;
        } else {
            break;
        }
    }
    let trailing = headers.iter().skip(d).map(str::to_string).collect();
    (d, trailing)
}

fn parse_value(field: &str, path: &Path, line: usize, col: &str) -> Result<f64, CliError> {
    field.parse::<f64>().map_err(|_| {
        CliError::validation(format!(
            "{}: row {line}, column \"{col}\": cannot parse '{field}' as a number",
            path.display()
        ))
    })
}

fn parse_indicator(field: &str, path: &Path, line: usize) -> Result<u8, CliError> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(CliError::validation(format!(
            "{}: row {line}, column \"a\": treatment must be 0 or 1, got '{other}'",
            path.display()
        ))),
    }
}

/// Reads a labeled file into (design, treatments, outcomes).
pub fn read_labeled_csv(path: &Path) -> Result<(Array2<f64>, Vec<u8>, Vec<f64>), CliError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        .clone();
    let (d, trailing) = split_header(&headers);
    if d == 0 {
        return Err(CliError::validation(format!(
            "{}: header must start with column \"x0\"",
            path.display()
        )));
    }
    if trailing != ["a", "y"] {
        for required in ["a", "y"] {
            if !trailing.iter().any(|c| c == required) {
                return Err(CliError::validation(format!(
                    "{}: missing column \"{required}\" (labeled schema is x0..x{},a,y)",
                    path.display(),
                    d - 1
                )));
            }
        }
        return Err(CliError::validation(format!(
            "{}: labeled schema is x0..x{},a,y; found trailing columns {trailing:?}",
            path.display(),
            d - 1
        )));
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let line = idx + 2;
        if record.len() != d + 2 {
            return Err(CliError::validation(format!(
                "{}: row {line} has {} fields, expected {}",
                path.display(),
                record.len(),
                d + 2
            )));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            rows.push(parse_value(field, path, line, &format!("x{j}"))?);
        }
        a.push(parse_indicator(&record[d], path, line)?);
        y.push(parse_value(&record[d + 1], path, line, "y")?);
    }
    let n = a.len();
    let x = Array2::from_shape_vec((n, d), rows)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok((x, a, y))
}

/// Reads an unlabeled file into (design, optional treatments). A header-only
/// file yields zero rows.
pub fn read_unlabeled_csv(path: &Path) -> Result<(Array2<f64>, Option<Vec<u8>>), CliError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
        .clone();
    let (d, trailing) = split_header(&headers);
    if d == 0 {
        return Err(CliError::validation(format!(
            "{}: header must start with column \"x0\"",
            path.display()
        )));
    }
    let has_a = match trailing.as_slice() {
        [] => false,
        [col] if col == "a" => true,
        other => {
            return Err(CliError::validation(format!(
                "{}: unlabeled schema is x0..x{}[,a]; found trailing columns {other:?}",
                path.display(),
                d - 1
            )))
        }
    };

    let mut rows: Vec<f64> = Vec::new();
    let mut a = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let line = idx + 2;
        let expected = d + usize::from(has_a);
        if record.len() != expected {
            return Err(CliError::validation(format!(
                "{}: row {line} has {} fields, expected {expected}",
                path.display(),
                record.len()
            )));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            rows.push(parse_value(field, path, line, &format!("x{j}"))?);
        }
        if has_a {
            a.push(parse_indicator(&record[d], path, line)?);
        }
    }
    let m = rows.len() / d;
    let x = Array2::from_shape_vec((m, d), rows)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    Ok((x, if has_a { Some(a) } else { None }))
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::unwritable(format!("cannot write {}: {e}", path.display())))
}

/// Writes a labeled file in the x0..x{d-1},a,y schema.
pub fn write_labeled_csv(
    path: &Path,
    x: &Array2<f64>,
    a: &[u8],
    y: &[f64],
) -> Result<(), CliError> {
    let mut writer = open_writer(path)?;
    let d = x.ncols();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("a".into());
    header.push("y".into());
    writer
        .write_record(&header)
        .map_err(|e| CliError::unwritable(e.to_string()))?;
    for i in 0..x.nrows() {
        let mut record: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        record.push(format!("{}", a[i]));
        record.push(format!("{}", y[i]));
        writer
            .write_record(&record)
            .map_err(|e| CliError::unwritable(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::unwritable(e.to_string()))
}

/// Writes an unlabeled file; the `a` column is included when provided.
pub fn write_unlabeled_csv(
    path: &Path,
    x: &Array2<f64>,
    a: Option<&[u8]>,
) -> Result<(), CliError> {
    let mut writer = open_writer(path)?;
    let d = x.ncols();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if a.is_some() {
        header.push("a".into());
    }
    writer
        .write_record(&header)
        .map_err(|e| CliError::unwritable(e.to_string()))?;
    for i in 0..x.nrows() {
        let mut record: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(arms) = a {
            record.push(format!("{}", arms[i]));
        }
        writer
            .write_record(&record)
            .map_err(|e| CliError::unwritable(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::unwritable(e.to_string()))
}
