//! Steering traces as CSV. State rows carry `(μ̂_t, Σ̂_t)`; law rows carry the
//! nominal input, the applied law `u = υ + K z`, and the solver summary. The file
//! is also the policy consumed by `evaluate`.

use std::path::Path;

use gpcs::greedy::{SolveSummary, StepRecord};
use gpcs::sdp::{KktResiduals, SolveStatus};
use gpcs::{AffineLaw, GaussianState, SteeringTrace};
use nalgebra::{DMatrix, DVector};

use crate::Failure;

const SOLVE_COLUMNS: [&str; 7] = [
    "status",
    "iterations",
    "objective",
    "stationarity",
    "min_eig",
    "equality",
    "complementarity",
];

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["kind".to_owned(), "t".to_owned()];
    h.extend((0..n).map(|i| format!("mu{i}")));
    h.extend((0..n).flat_map(|i| (0..n).map(move |j| format!("sigma_{i}_{j}"))));
    h.extend((0..m).map(|i| format!("nu{i}")));
    h.extend((0..m).map(|i| format!("upsilon{i}")));
    h.extend((0..m).flat_map(|i| (0..n).map(move |j| format!("k_{i}_{j}"))));
    h.extend(SOLVE_COLUMNS.iter().map(|s| (*s).to_owned()));
    h
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn to_csv(trace: &SteeringTrace) -> String {
    let n = trace.states[0].dim();
    let m = trace.steps.first().map_or(0, |s| s.law.feedforward.len());
    let width = header(n, m).len();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(n, m)).expect("in-memory write");
    for (t, state) in trace.states.iter().enumerate() {
        let mut row = vec!["state".to_owned(), t.to_string()];
        row.extend(state.mean.iter().map(|v| num(*v)));
        row.extend(state.cov.transpose().iter().map(|v| num(*v)));
        row.resize(width, String::new());
        w.write_record(&row).expect("in-memory write");
        if let Some(step) = trace.steps.get(t) {
            let mut row = vec!["law".to_owned(), t.to_string()];
            row.resize(2 + n + n * n, String::new());
            row.extend(step.nominal_input.iter().map(|v| num(*v)));
            row.extend(step.law.feedforward.iter().map(|v| num(*v)));
            row.extend(step.law.gain.transpose().iter().map(|v| num(*v)));
            let s = &step.solve;
            row.push(s.status.as_str().to_owned());
            row.push(s.iterations.to_string());
            row.extend(
                [
                    s.objective,
                    s.residuals.stationarity,
                    s.residuals.min_eig,
                    s.residuals.equality,
                    s.residuals.complementarity,
                ]
                .iter()
                .map(|v| num(*v)),
            );
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

pub fn save(trace: &SteeringTrace, path: &Path) -> Result<(), Failure> {
    std::fs::write(path, to_csv(trace))
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<SteeringTrace, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("trace not found: {}: {e}", path.display())))?;
    from_csv(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Reader over a CSV with a fixed header that reports cell errors by line and column.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| format!("line 1: {e}"))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record.map_err(|e| match e.position() {
                Some(p) => format!("line {}: {e}", p.line()),
                None => e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record.iter().map(str::to_owned).collect()));
        }
        Ok(Self { header, rows })
    }
}

pub fn cell_f64(line: u64, column: &str, cell: &str) -> Result<f64, String> {
    cell.trim()
        .parse()
        .map_err(|_| format!("line {line}, column `{column}`: `{cell}` is not a number"))
}

fn dims(names: &[String]) -> Result<(usize, usize), String> {
    let n = names.iter().filter(|c| c.starts_with("mu")).count();
    let m = names.iter().filter(|c| c.starts_with("nu")).count();
    let want = header(n, m);
    if n == 0 || m == 0 || names.len() != want.len() {
        return Err(format!(
            "line 1: expected {} trace columns, got {}",
            want.len(),
            names.len()
        ));
    }
    if let Some((got, expected)) = names.iter().zip(want.iter()).find(|(g, w)| g != w) {
        return Err(format!(
            "line 1: unexpected column `{got}`, expected `{expected}`"
        ));
    }
    Ok((n, m))
}

pub fn from_csv(text: &str) -> Result<SteeringTrace, String> {
    let table = Table::parse(text)?;
    let (n, m) = dims(&table.header)?;
    let names = header(n, m);
    let mut states = Vec::new();
    let mut steps = Vec::new();
    for (line, cells) in &table.rows {
        let line = *line;
        let floats = |from: usize, count: usize| -> Result<Vec<f64>, String> {
            (from..from + count)
                .map(|j| cell_f64(line, &names[j], &cells[j]))
                .collect()
        };
        let t: usize = cells[1].trim().parse().map_err(|_| {
            format!(
                "line {line}, column `t`: `{}` is not a step index",
                cells[1]
            )
        })?;
        match cells[0].as_str() {
            "state" => {
                if t != states.len() || states.len() != steps.len() {
                    return Err(format!(
                        "line {line}: state row for step {t} is out of order"
                    ));
                }
                let mean = DVector::from_vec(floats(2, n)?);
                let cov = DMatrix::from_row_slice(n, n, &floats(2 + n, n * n)?);
                let state =
                    GaussianState::new(mean, cov).map_err(|e| format!("line {line}: {e}"))?;
                states.push(state);
            }
            "law" => {
                if t != steps.len() || states.len() != steps.len() + 1 {
                    return Err(format!("line {line}: law row for step {t} is out of order"));
                }
                let base = 2 + n + n * n;
                let nominal_input = DVector::from_vec(floats(base, m)?);
                let feedforward = DVector::from_vec(floats(base + m, m)?);
                let gain = DMatrix::from_row_slice(m, n, &floats(base + 2 * m, m * n)?);
                let law =
                    AffineLaw::new(feedforward, gain).map_err(|e| format!("line {line}: {e}"))?;
                let s = base + 2 * m + m * n;
                let status = SolveStatus::from_name(cells[s].trim()).ok_or_else(|| {
                    format!(
                        "line {line}, column `status`: unknown status `{}`",
                        cells[s]
                    )
                })?;
                let iterations = cells[s + 1].trim().parse().map_err(|_| {
                    format!(
                        "line {line}, column `iterations`: `{}` is not a count",
                        cells[s + 1]
                    )
                })?;
                let r = floats(s + 2, 5)?;
                steps.push(StepRecord {
                    nominal_input,
                    law,
                    solve: SolveSummary {
                        status,
                        iterations,
                        objective: r[0],
                        residuals: KktResiduals {
                            stationarity: r[1],
                            min_eig: r[2],
                            equality: r[3],
                            complementarity: r[4],
                        },
                    },
                });
            }
            other => {
                return Err(format!(
                    "line {line}, column `kind`: unknown row kind `{other}`"
                ))
            }
        }
    }
    if states.is_empty() || states.len() != steps.len() + 1 {
        return Err(format!(
            "trace length mismatch: {} state rows for {} laws",
            states.len(),
            steps.len()
        ));
    }
    Ok(SteeringTrace { states, steps })
}
