//! JSON model files.
//!
//! ```json
//! {
//!   "format": "svgp-model",
//!   "version": 1,
//!   "input_dim": 6,
//!   "output_dim": 4,
//!   "jitter": 1e-6,
//!   "outputs": [
//!     {
//!       "num_inducing": 256,
//!       "log_signal_variance": 0.1,
//!       "log_lengthscales": [..n..],
//!       "log_noise_variance": -7.8,
//!       "inducing_locations": [..M·n, row-major..],
//!       "variational_mean": [..M..],
//!       "variational_chol": [..M(M+1)/2, lower triangle row by row..]
//!     }
//!   ]
//! }
//! ```
//!
//! Numbers are written with the shortest decimal that parses back to the same
//! binary64 value, so save → load → save is byte-identical.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{KernelParams, SparseGp, SvgpModel, VariationalParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

pub const FORMAT: &str = "svgp-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    output_dim: usize,
    jitter: f64,
    outputs: Vec<OutputFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    num_inducing: usize,
    log_signal_variance: f64,
    log_lengthscales: Vec<f64>,
    log_noise_variance: f64,
    inducing_locations: Vec<f64>,
    variational_mean: Vec<f64>,
    variational_chol: Vec<f64>,
}

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64_lossy()
}

fn from_f64<T: Scalar>(v: f64) -> T {
    T::lit(v)
}

pub fn model_to_string<T: Scalar>(model: &SvgpModel<T>) -> String {
    let outputs = model
        .outputs()
        .iter()
        .map(|gp| {
            let c = &gp.variational.chol;
            let mut tri = Vec::new();
            for i in 0..c.nrows() {
                for j in 0..=i {
                    tri.push(to_f64(c[(i, j)]));
                }
            }
            OutputFile {
                num_inducing: gp.variational.num_inducing(),
                log_signal_variance: to_f64(gp.kernel.log_signal_variance),
                log_lengthscales: gp
                    .kernel
                    .log_lengthscales
                    .iter()
                    .map(|v| to_f64(*v))
                    .collect(),
                log_noise_variance: to_f64(gp.kernel.log_noise_variance),
                inducing_locations: linalg::flatten_row_major(&gp.variational.inducing)
                    .into_iter()
                    .map(to_f64)
                    .collect(),
                variational_mean: gp.variational.mean.iter().map(|v| to_f64(*v)).collect(),
                variational_chol: tri,
            }
        })
        .collect();
    let file = ModelFile {
        format: FORMAT.to_string(),
        version: VERSION,
        input_dim: model.input_dim(),
        output_dim: model.output_dim(),
        jitter: to_f64(model.jitter()),
        outputs,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_str<T: Scalar>(text: &str) -> Result<SvgpModel<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
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
    if file.outputs.len() != file.output_dim {
        return Err(parse_err(
            "outputs",
            format!(
                "expected {} entries, got {}",
                file.output_dim,
                file.outputs.len()
            ),
        ));
    }
    let n = file.input_dim;
    let mut outputs = Vec::with_capacity(file.outputs.len());
    for (d, o) in file.outputs.iter().enumerate() {
        let m = o.num_inducing;
        let field = |name: &str| format!("outputs[{d}].{name}");
        if m == 0 {
            return Err(parse_err(field("num_inducing"), "must be positive"));
        }
        if o.log_lengthscales.len() != n {
            return Err(parse_err(
                field("log_lengthscales"),
                format!("expected {n} values, got {}", o.log_lengthscales.len()),
            ));
        }
        if o.inducing_locations.len() != m * n {
            return Err(parse_err(
                field("inducing_locations"),
                format!(
                    "expected {} values, got {}",
                    m * n,
                    o.inducing_locations.len()
                ),
            ));
        }
        if o.variational_mean.len() != m {
            return Err(parse_err(
                field("variational_mean"),
                format!("expected {m} values, got {}", o.variational_mean.len()),
            ));
        }
        if o.variational_chol.len() != m * (m + 1) / 2 {
            return Err(parse_err(
                field("variational_chol"),
                format!(
                    "expected {} values, got {}",
                    m * (m + 1) / 2,
                    o.variational_chol.len()
                ),
            ));
        }
        let z: Vec<T> = o.inducing_locations.iter().map(|v| from_f64(*v)).collect();
        let mut c = DMatrix::zeros(m, m);
        let mut t = 0;
        for i in 0..m {
            for j in 0..=i {
                c[(i, j)] = from_f64(o.variational_chol[t]);
                t += 1;
            }
        }
        outputs.push(SparseGp {
            kernel: KernelParams {
                log_signal_variance: from_f64(o.log_signal_variance),
                log_lengthscales: DVector::from_iterator(
                    n,
                    o.log_lengthscales.iter().map(|v| from_f64(*v)),
                ),
                log_noise_variance: from_f64(o.log_noise_variance),
            },
            variational: VariationalParams {
                inducing: DMatrix::from_row_slice(m, n, &z),
                mean: DVector::from_iterator(m, o.variational_mean.iter().map(|v| from_f64(*v))),
                chol: c,
            },
        });
    }
    SvgpModel::new(n, from_f64(file.jitter), outputs)
}

pub fn model_save<T: Scalar>(model: &SvgpModel<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn model_load<T: Scalar>(path: impl AsRef<Path>) -> Result<SvgpModel<T>> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}
