//! JSON problem dumps for reproducing solver failures.
//!
//! ```json
//! {
//!   "format": "lmi-qp",
//!   "version": 1,
//!   "dim": 2,
//!   "lmi_size": 3,
//!   "q": [..dim², row-major..],
//!   "q_lin": [..dim..],
//!   "constant": 0.0,
//!   "f0": [..lmi_size², row-major..],
//!   "f": [[[i, j, v], ...], ...],
//!   "eq": [..rows·dim, row-major..],
//!   "eq_rhs": [..rows..]
//! }
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LmiQpProblem, SymSparse};
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

pub const FORMAT: &str = "lmi-qp";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    format: String,
    version: u32,
    dim: usize,
    lmi_size: usize,
    q: Vec<f64>,
    q_lin: Vec<f64>,
    constant: f64,
    f0: Vec<f64>,
    f: Vec<Vec<(usize, usize, f64)>>,
    eq: Vec<f64>,
    eq_rhs: Vec<f64>,
}

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn to_f64s<T: Scalar>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.to_f64_lossy()).collect()
}

pub fn problem_to_string<T: Scalar>(prob: &LmiQpProblem<T>) -> String {
    let file = ProblemFile {
        format: FORMAT.to_string(),
        version: VERSION,
        dim: prob.dim(),
        lmi_size: prob.lmi_size(),
        q: to_f64s(linalg::flatten_row_major(&prob.hessian)),
        q_lin: to_f64s(prob.linear.iter().copied()),
        constant: prob.constant.to_f64_lossy(),
        f0: to_f64s(linalg::flatten_row_major(&prob.lmi_constant)),
        f: prob
            .lmi_terms
            .iter()
            .map(|t| {
                t.entries()
                    .iter()
                    .map(|&(i, j, v)| (i, j, v.to_f64_lossy()))
                    .collect()
            })
            .collect(),
        eq: to_f64s(linalg::flatten_row_major(&prob.eq_matrix)),
        eq_rhs: to_f64s(prob.eq_rhs.iter().copied()),
    };
    let mut s = serde_json::to_string(&file).expect("problem serializes");
    s.push('\n');
    s
}

pub fn problem_from_str<T: Scalar>(text: &str) -> Result<LmiQpProblem<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        parse_err(path, e.into_inner().to_string())
    })?;
    if file.format != FORMAT {
        return Err(parse_err(
            "format",
            format!("expected \"{FORMAT}\", got \"{}\"", file.format),
        ));
    }
    if file.version != VERSION {
        return Err(parse_err(
            "version",
            format!("unsupported version {}", file.version),
        ));
    }
    let (p, s) = (file.dim, file.lmi_size);
    let expect = |field: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(parse_err(
                field,
                format!("expected {want} values, got {got}"),
            ))
        }
    };
    expect("q", file.q.len(), p * p)?;
    expect("q_lin", file.q_lin.len(), p)?;
    expect("f0", file.f0.len(), s * s)?;
    expect("f", file.f.len(), p)?;
    if p == 0 {
        if !file.eq.is_empty() {
            return Err(parse_err("eq", "must be empty when dim is 0"));
        }
    } else if file.eq.len() % p != 0 {
        return Err(parse_err(
            "eq",
            format!("length {} is not a multiple of dim {p}", file.eq.len()),
        ));
    }
    let rows = if p == 0 {
        file.eq_rhs.len()
    } else {
        file.eq.len() / p
    };
    expect("eq_rhs", file.eq_rhs.len(), rows)?;
    let conv = |v: &[f64]| v.iter().map(|x| T::lit(*x)).collect::<Vec<T>>();
    let mut terms = Vec::with_capacity(p);
    for (k, entries) in file.f.iter().enumerate() {
        let mut term = SymSparse::new(s);
        for (e, &(i, j, v)) in entries.iter().enumerate() {
            if i >= s || j >= s {
                return Err(parse_err(
                    format!("f[{k}][{e}]"),
                    format!("index ({i}, {j}) outside {s}×{s}"),
                ));
            }
            term.push(i, j, T::lit(v));
        }
        terms.push(term);
    }
    let prob = LmiQpProblem::new(
        DMatrix::from_row_slice(p, p, &conv(&file.q)),
        DVector::from_vec(conv(&file.q_lin)),
        T::lit(file.constant),
        DMatrix::from_row_slice(s, s, &conv(&file.f0)),
        terms,
    )?;
    if rows == 0 {
        Ok(prob)
    } else {
        prob.with_equalities(
            DMatrix::from_row_slice(rows, p, &conv(&file.eq)),
            DVector::from_vec(conv(&file.eq_rhs)),
        )
    }
}

pub fn problem_save<T: Scalar>(prob: &LmiQpProblem<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, problem_to_string(prob))?;
    Ok(())
}

pub fn problem_load<T: Scalar>(path: impl AsRef<Path>) -> Result<LmiQpProblem<T>> {
    problem_from_str(&std::fs::read_to_string(path)?)
}
