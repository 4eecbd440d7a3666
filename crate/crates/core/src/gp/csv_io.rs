//! Transition datasets as CSV: header `z0..z{D-1},u0..u{n-D-1},y0..y{D-1}`, one
//! transition per row.

use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};
use crate::Scalar;

fn header(state_dim: usize, input_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..state_dim).map(|i| format!("z{i}")).collect();
    h.extend((0..input_dim).map(|i| format!("u{i}")));
    h.extend((0..state_dim).map(|i| format!("y{i}")));
    h
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        field: format!("line {line}"),
        message: e.to_string(),
    }
}

pub fn dataset_to_csv<T: Scalar>(data: &Dataset<T>) -> Result<String> {
    let nz = data.output_dim();
    let nu = data.input_dim().checked_sub(nz).ok_or_else(|| {
        Error::invalid("transition data needs at least as many inputs as outputs")
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(nz, nu)).map_err(csv_error)?;
    for i in 0..data.len() {
        let row = data
            .inputs()
            .row(i)
            .iter()
            .chain(data.outputs().row(i).iter())
            .map(|v| v.to_f64_lossy().to_string())
            .collect::<Vec<_>>();
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Parses a dataset whose header matches the transition layout exactly.
pub fn dataset_from_csv<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let names: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_owned)
        .collect();
    let nz = names.iter().filter(|c| c.starts_with('y')).count();
    let nu = names.len().saturating_sub(2 * nz);
    let want = header(nz, nu);
    if nz == 0 || names.len() != want.len() {
        return Err(Error::Parse {
            field: "header".into(),
            message: format!(
                "expected columns z0..,u0..,y0.. with one y column per state, got {} columns",
                names.len()
            ),
        });
    }
    if let Some((got, expected)) = names.iter().zip(want.iter()).find(|(g, w)| g != w) {
        return Err(Error::Parse {
            field: format!("column `{got}`"),
            message: format!("expected column `{expected}`"),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in r.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                field: format!("line {line}, column `{}`", want[j]),
                message: format!("`{cell}` is not a number"),
            })?;
            values.push(T::lit(v));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::invalid("dataset size must be positive"));
    }
    let all = DMatrix::from_row_slice(rows, want.len(), &values);
    Dataset::new(
        all.columns(0, nz + nu).into_owned(),
        all.columns(nz + nu, nz).into_owned(),
    )
}

pub fn dataset_save<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data)?)?;
    Ok(())
}

pub fn dataset_load<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let x = DMatrix::from_row_slice(
            2,
            3,
            &[0.1, 1.0 / 3.0, -2.5, 1e-300, 7.0, std::f64::consts::PI],
        );
        let y = DMatrix::from_row_slice(2, 2, &[0.2, -0.0, 5e10, 1.0 / 7.0]);
        let data = Dataset::new(x, y).unwrap();
        let text = dataset_to_csv(&data).unwrap();
        assert!(text.starts_with("z0,z1,u0,y0,y1\n"));
        assert_eq!(dataset_from_csv::<f64>(&text).unwrap(), data);
    }

    #[test]
    fn wrong_column_is_named() {
        let err = dataset_from_csv::<f64>("z0,z1,v0,y0,y1\n1,2,3,4,5\n").unwrap_err();
        assert!(err.to_string().contains("v0"), "{err}");
        let err = dataset_from_csv::<f64>("z0,u0,y0\n1,x,3\n").unwrap_err();
        assert!(
            err.to_string().contains("line 2") && err.to_string().contains("u0"),
            "{err}"
        );
    }
}
