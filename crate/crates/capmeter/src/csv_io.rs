//! Uploaded datasets: UTF-8, comma separated, header row with exactly the
//! columns `x1`, `x2` and `label` (any order). Labels are `-1`/`+1` or
//! `0`/`1`, with `0` meaning the negative class. Coordinates are rescaled so
//! each axis spans `[-6, 6]`.

use capmeter_core::{Dataset, Label, RawPoint};

use crate::error::{Error, Result};

pub const MIN_ROWS: usize = 4;
const COLUMNS: [&str; 3] = ["x1", "x2", "label"];

pub fn parse_csv(bytes: &[u8]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| Error::csv(1, e.to_string()))?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<&str> = COLUMNS.into_iter().filter(|c| index_of(c).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::csv(1, format!("missing column(s): {}", missing.join(", "))));
    }
    if let Some(extra) = headers.iter().find(|h| !COLUMNS.contains(h)) {
        return Err(Error::csv(
            1,
            format!("unexpected column `{extra}`; only two input columns (x1, x2) plus label are supported"),
        ));
    }
    let (ix1, ix2, ilabel) = (index_of("x1").unwrap(), index_of("x2").unwrap(), index_of("label").unwrap());

    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::csv(line, e.to_string()))?;
        let number = |i: usize, name: &str| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::csv(line, format!("{name} value `{cell}` is not a finite number")))
        };
        let x1 = number(ix1, "x1")?;
        let x2 = number(ix2, "x2")?;
        let raw_label = number(ilabel, "label")?;
        let label = match raw_label {
            1.0 => Label::Positive,
            -1.0 | 0.0 => Label::Negative,
            _ => {
                return Err(Error::csv(
                    line,
                    format!("label `{}` must be one of -1, 0, 1", record.get(ilabel).unwrap_or("")),
                ))
            }
        };
        points.push(RawPoint::new(x1, x2, label));
    }
    if points.len() < MIN_ROWS {
        return Err(Error::csv(points.len() + 1, format!("need at least {MIN_ROWS} data rows, found {}", points.len())));
    }
    if points.iter().all(|p| p.label == points[0].label) {
        return Err(Error::csv(points.len() + 1, "all rows have the same label; two classes are required"));
    }
    Ok(Dataset::uploaded(points)?)
}

/// Writes `x1,x2,label` with `-1`/`1` labels and round-trip float formatting.
pub fn serialize_csv(dataset: &Dataset) -> String {
    let mut out = String::from("x1,x2,label\n");
    for p in dataset.points() {
        out.push_str(&format!("{},{},{}\n", p.x1, p.x2, i8::from(p.label)));
    }
    out
}
