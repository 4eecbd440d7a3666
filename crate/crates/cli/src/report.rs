//! Monte Carlo rollout files and the terminal summary written by `evaluate`.

use gpcs::greedy::loewner_gap;
use gpcs::linalg;
use gpcs::RolloutReport;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::trace::{cell_f64, Table};

pub fn rollouts_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["rollout".to_owned(), "t".to_owned()];
    h.extend((0..n).map(|i| format!("z{i}")));
    h.extend((0..m).map(|i| format!("u{i}")));
    h
}

/// One row per rollout and time step; the input cells of the terminal row are empty.
pub fn rollouts_to_csv(report: &RolloutReport) -> String {
    let (n, m) = report
        .rollouts
        .first()
        .map_or((0, 0), |r| (r.states.ncols(), r.inputs.ncols()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(rollouts_header(n, m))
        .expect("in-memory write");
    for (k, r) in report.rollouts.iter().enumerate() {
        for t in 0..r.states.nrows() {
            let mut row = vec![k.to_string(), t.to_string()];
            row.extend(r.states.row(t).iter().map(|v| v.to_string()));
            if t < r.inputs.nrows() {
                row.extend(r.inputs.row(t).iter().map(|v| v.to_string()));
            } else {
                row.resize(2 + n + m, String::new());
            }
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

/// Terminal states of every rollout, one row each.
pub fn terminal_particles(text: &str) -> Result<DMatrix<f64>, String> {
    let table = Table::parse(text)?;
    let n = table.header.iter().filter(|c| c.starts_with('z')).count();
    let m = table.header.iter().filter(|c| c.starts_with('u')).count();
    let want = rollouts_header(n, m);
    if n == 0 || table.header != want {
        return Err(format!(
            "line 1: expected rollout columns {}",
            want.join(",")
        ));
    }
    let mut last: Vec<(u64, u64, Vec<f64>)> = Vec::new();
    for (line, cells) in &table.rows {
        let k: u64 = cells[0].trim().parse().map_err(|_| {
            format!(
                "line {line}, column `rollout`: `{}` is not an index",
                cells[0]
            )
        })?;
        let t: u64 = cells[1].trim().parse().map_err(|_| {
            format!(
                "line {line}, column `t`: `{}` is not a step index",
                cells[1]
            )
        })?;
        let z = (0..n)
            .map(|j| cell_f64(*line, &want[2 + j], &cells[2 + j]))
            .collect::<Result<Vec<_>, _>>()?;
        match last.last_mut() {
            Some(entry) if entry.0 == k => {
                if t <= entry.1 {
                    return Err(format!(
                        "line {line}: step {t} of rollout {k} is out of order"
                    ));
                }
                *entry = (k, t, z);
            }
            _ => last.push((k, t, z)),
        }
    }
    let flat: Vec<f64> = last
        .iter()
        .flat_map(|(_, _, z)| z.iter().copied())
        .collect();
    Ok(DMatrix::from_row_slice(last.len(), n, &flat))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(linalg::symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

pub struct Summary {
    pub rollouts: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Eigenvalues of `Σ_sample - Σ_goal`.
    pub gap_eigenvalues: Vec<f64>,
    /// Largest eigenvalue of `Σ_sample - 1.5 Σ_goal`.
    pub slack_gap: f64,
    pub mean_error: f64,
}

impl Summary {
    pub fn new(report: &RolloutReport, goal_mean: &DVector<f64>, goal_cov: &DMatrix<f64>) -> Self {
        Self {
            rollouts: report.rollouts.len(),
            mean: report.terminal_mean.clone(),
            cov: report.terminal_cov.clone(),
            gap_eigenvalues: sorted_eigenvalues(&(&report.terminal_cov - goal_cov)),
            slack_gap: loewner_gap(&report.terminal_cov, goal_cov, 1.5),
            mean_error: (&report.terminal_mean - goal_mean).amax(),
        }
    }

    /// `quantity,i,j,value` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "i", "j", "value"])
            .expect("in-memory write");
        let mut put = |q: &str, i: Option<usize>, j: Option<usize>, v: String| {
            let idx = |x: Option<usize>| x.map_or(String::new(), |x| x.to_string());
            w.write_record([q.to_owned(), idx(i), idx(j), v])
                .expect("in-memory write");
        };
        put("rollouts", None, None, self.rollouts.to_string());
        for (i, v) in self.mean.iter().enumerate() {
            put("terminal_mean", Some(i), None, v.to_string());
        }
        let n = self.mean.len();
        for i in 0..n {
            for j in 0..n {
                put(
                    "terminal_cov",
                    Some(i),
                    Some(j),
                    self.cov[(i, j)].to_string(),
                );
            }
        }
        for (i, v) in self.gap_eigenvalues.iter().enumerate() {
            put("gap_eigenvalue", Some(i), None, v.to_string());
        }
        put("max_gap_scaled_1.5", None, None, self.slack_gap.to_string());
        put("mean_error_inf", None, None, self.mean_error.to_string());
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpcs::greedy::Rollout;

    fn report() -> RolloutReport {
        let r = |base: f64| Rollout {
            states: DMatrix::from_row_slice(3, 2, &[0.0, 0.0, base, 1.0, base + 1.0, 2.0]),
            inputs: DMatrix::from_row_slice(2, 1, &[0.5, -0.5]),
        };
        RolloutReport {
            rollouts: vec![r(0.0), r(1.0)],
            terminal_mean: DVector::from_vec(vec![1.5, 2.0]),
            terminal_cov: DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn terminal_rows_are_the_particles() {
        let text = rollouts_to_csv(&report());
        assert!(text.starts_with("rollout,t,z0,z1,u0\n0,0,0,0,0.5\n"));
        assert!(text.contains("\n0,2,1,2,\n"));
        let p = terminal_particles(&text).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 2.0]));
    }

    #[test]
    fn malformed_rollout_cell_names_the_line() {
        let text = rollouts_to_csv(&report()).replacen("\n1,2,2,2,", "\n1,2,oops,2,", 1);
        let err = terminal_particles(&text).unwrap_err();
        assert!(err.contains("line 7") && err.contains("z0"), "{err}");
    }

    #[test]
    fn summary_gap_is_against_the_goal() {
        let s = Summary::new(
            &report(),
            &DVector::from_vec(vec![1.0, 2.0]),
            &(DMatrix::identity(2, 2) * 0.25),
        );
        assert_eq!(s.gap_eigenvalues, vec![-0.25, 0.25]);
        assert!((s.slack_gap - 0.125).abs() < 1e-15);
        assert_eq!(s.mean_error, 0.5);
        assert!(s.to_csv().starts_with("quantity,i,j,value\nrollouts,,,2\n"));
    }
}
