//! Self-contained dense linear-program maximizer.
//!
//! Two-phase primal simplex on a dense tableau with Bland's anti-cycling rule.
//! The instances solved here are tiny (variables = demand-support size), so
//! simplicity and determinism matter more than sparsity.

use thiserror::Error;

/// Pivots smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-10;
/// Slack allowed when re-checking feasibility of a returned point.
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver lost feasibility (numerical instability)")]
    NumericalInstability,
}

/// Maximize `c . x` subject to `A x <= b` and `lower <= x <= upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// Program with default bounds `x >= 0`.
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, rows, rhs, lower: vec![0.0; n], upper: vec![None; n] }
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension("bounds length != variable count".into()));
        }
        if self.rows.len() != self.rhs.len() {
            return Err(LpError::Dimension("row count != rhs count".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Dimension(format!("row {i} has wrong length")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

/// Solves the program. Infeasible/unbounded cases are reported via `status`.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.objective.len();

    // Shift to y = x - lower so all variables are >= 0; upper bounds become rows.
    let mut rows: Vec<Vec<f64>> = lp.rows.clone();
    let mut rhs: Vec<f64> = Vec::with_capacity(lp.rhs.len());
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let shift: f64 = row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
        rhs.push(b - shift);
    }
    for (j, ub) in lp.upper.iter().enumerate() {
        if let Some(u) = ub {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push(row);
            rhs.push(u - lp.lower[j]);
        }
    }
    let mut tableau = Tableau::new(&lp.objective, &rows, &rhs);
    let status = tableau.solve();
    match status {
        LpStatus::Optimal => {
            let y = tableau.extract(n);
            let x: Vec<f64> = y.iter().zip(&lp.lower).map(|(y, l)| y + l).collect();
            check_feasible(lp, &x)?;
            let objective_value = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
            Ok(LpSolution { x, objective_value, status })
        }
        _ => Ok(LpSolution { x: vec![], objective_value: f64::NAN, status }),
    }
}

fn check_feasible(lp: &LinearProgram, x: &[f64]) -> Result<(), LpError> {
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let lhs: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
        let scale = 1.0 + b.abs();
        if lhs > b + FEAS_TOL * scale {
            return Err(LpError::NumericalInstability);
        }
    }
    for ((&xi, &lo), up) in x.iter().zip(&lp.lower).zip(&lp.upper) {
        if xi < lo - FEAS_TOL {
            return Err(LpError::NumericalInstability);
        }
        if let Some(u) = up {
            if xi > u + FEAS_TOL {
                return Err(LpError::NumericalInstability);
            }
        }
    }
    Ok(())
}

/// Dense simplex tableau over `A y = b`, `y >= 0` after adding slacks and
/// (for negative rhs rows) artificial variables.
struct Tableau {
    /// rows x cols; one constraint per row, last column is the rhs.
    t: Vec<Vec<f64>>,
    /// Objective row for phase 2 (reduced costs of -c).
    obj: Vec<f64>,
    /// Phase-1 objective row (sum of artificials), present during phase 1.
    phase1: Vec<f64>,
    basis: Vec<usize>,
    n_structural: usize,
    n_slack: usize,
    n_artificial: usize,
}

impl Tableau {
    fn new(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Self {
        let n = c.len();
        let m = rows.len();
        let artificial_rows: Vec<usize> =
            (0..m).filter(|&i| rhs[i] < 0.0).collect();
        let n_art = artificial_rows.len();
        let cols = n + m + n_art + 1;
        let mut t = vec![vec![0.0; cols]; m];
        let mut basis = vec![0usize; m];
        let mut art_idx = 0usize;
        for i in 0..m {
            let neg = rhs[i] < 0.0;
            let sign = if neg { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i][j] = sign * rows[i][j];
            }
            // Slack keeps its row's original orientation.
            t[i][n + i] = sign;
            t[i][cols - 1] = sign * rhs[i];
            if neg {
                let a_col = n + m + art_idx;
                t[i][a_col] = 1.0;
                basis[i] = a_col;
                art_idx += 1;
            } else {
                basis[i] = n + i;
            }
        }
        let mut obj = vec![0.0; cols];
        for j in 0..n {
            obj[j] = -c[j];
        }
        // Phase-1 objective: minimize sum of artificials, expressed in terms of
        // the current (artificial) basis.
        let mut phase1 = vec![0.0; cols];
        if n_art > 0 {
            for &i in &artificial_rows {
                for j in 0..cols {
                    phase1[j] -= t[i][j];
                }
            }
            for k in 0..n_art {
                phase1[n + m + k] = 0.0;
            }
        }
        Tableau { t, obj, phase1, basis, n_structural: n, n_slack: m, n_artificial: n_art }
    }

    fn solve(&mut self) -> LpStatus {
        let cols = self.cols();
        if self.n_artificial > 0 {
            match self.run_simplex(true) {
                LpStatus::Optimal => {}
                s => return s,
            }
            if -self.phase1[cols - 1] > 1e-7 {
                return LpStatus::Infeasible;
            }
            // Drive any artificial variables out of the basis.
            let art_start = self.n_structural + self.n_slack;
            for i in 0..self.t.len() {
                if self.basis[i] >= art_start {
                    let pivot_col = (0..art_start).find(|&j| self.t[i][j].abs() > PIVOT_TOL);
                    match pivot_col {
                        Some(j) => self.pivot(i, j),
                        // Redundant row: harmless to leave, artificial stays
                        // basic at value 0.
                        None => {}
                    }
                }
            }
            // Forbid artificial columns from re-entering.
            for row in self.t.iter_mut() {
                for j in art_start..cols - 1 {
                    row[j] = 0.0;
                }
            }
            for j in art_start..cols - 1 {
                self.obj[j] = 0.0;
            }
        }
        self.run_simplex(false)
    }

    fn cols(&self) -> usize {
        self.n_structural + self.n_slack + self.n_artificial + 1
    }

    /// Bland's rule: entering = lowest-index improving column; leaving = min
    /// ratio with lowest basis index on ties. Deterministic and cycle-free.
    fn run_simplex(&mut self, phase1: bool) -> LpStatus {
        let cols = self.cols();
        let art_start = self.n_structural + self.n_slack;
        loop {
            let limit = if phase1 { cols - 1 } else { art_start };
            let mut entering = None;
            for j in 0..limit {
                let rc = if phase1 { self.phase1[j] } else { self.obj[j] };
                if rc < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return LpStatus::Optimal;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][cols - 1] / a;
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_TOL
                                || ((ratio - br).abs() <= PIVOT_TOL
                                    && self.basis[i] < self.basis[bi])
                            {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return LpStatus::Unbounded;
            };
            self.pivot(row, col);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let cols = self.cols();
        let p = self.t[row][col];
        for j in 0..cols {
            self.t[row][j] /= p;
        }
        for i in 0..self.t.len() {
            if i != row {
                let f = self.t[i][col];
                if f != 0.0 {
                    for j in 0..cols {
                        self.t[i][j] -= f * self.t[row][j];
                    }
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for j in 0..cols {
                self.obj[j] -= f * self.t[row][j];
            }
        }
        let f = self.phase1[col];
        if f != 0.0 {
            for j in 0..cols {
                self.phase1[j] -= f * self.t[row][j];
            }
        }
        self.basis[row] = col;
    }

    fn extract(&self, n: usize) -> Vec<f64> {
        let cols = self.cols();
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.t[i][cols - 1];
            }
        }
        // Clip the tiny negatives simplex round-off can leave behind.
        for v in x.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_cap() {
        let lp = LinearProgram::new(vec![1.0], vec![vec![1.0]], vec![3.0]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_vertex() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6: optimum (1.6, 1.2), value 2.8.
        let lp = LinearProgram::new(
            vec![1.0, 1.0],
            vec![vec![1.0, 2.0], vec![3.0, 1.0]],
            vec![4.0, 6.0],
        );
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.6).abs() < 1e-9);
        assert!((s.x[1] - 1.2).abs() < 1e-9);
        assert!((s.objective_value - 2.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x <= -1 with x >= 0 has empty interior.
        let lp = LinearProgram::new(vec![0.0], vec![vec![1.0]], vec![-1.0]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram::new(vec![1.0], vec![], vec![]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_feasible() {
        // -x <= -2 means x >= 2; maximize -x gives x = 2.
        let lp = LinearProgram::new(vec![-1.0], vec![vec![-1.0], vec![1.0]], vec![-2.0, 5.0]);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn respects_upper_bounds_and_shifted_lower() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![10.0],
            lower: vec![1.0, 0.0],
            upper: vec![Some(2.0), Some(3.0)],
        };
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 5.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9);
        assert!((s.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_output() {
        let lp = LinearProgram::new(
            vec![1.0, 1.0, 0.5],
            vec![vec![1.0, 1.0, 1.0], vec![2.0, 0.5, 1.0]],
            vec![2.0, 3.0],
        );
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective_value, b.objective_value);
    }
}
