//! Dense two-phase primal simplex with Bland's rule.
//!
//! Sized for the desk-scale programs used here (tens of variables and
//! rows); the final basic solution is recomputed from the original data by
//! an LU solve so that optimal points are accurate to roundoff.

use nalgebra::{DMatrix, DVector};

use super::{Polyhedron, ToleranceConfig};
use crate::error::{check_dim, Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point (empty unless `status == Optimal`).
    pub x: Vec<f64>,
    /// Objective value; `±inf` when unbounded, NaN when infeasible.
    pub value: f64,
}

/// `min/max c′x` subject to linear rows and per-variable bounds.
/// Variables are free unless bounds are set.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    sense: Sense,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            sense,
            rows: Vec::new(),
            lower: vec![None; num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, c: Vec<f64>) -> Result<()> {
        check_dim(self.num_vars, c.len())?;
        self.objective = c;
        Ok(())
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> Result<()> {
        check_dim(self.num_vars, coeffs.len())?;
        self.rows.push((coeffs, cmp, rhs));
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn solve(&self, tol: &ToleranceConfig) -> Result<LpSolution> {
        StandardForm::build(self).solve(self, tol)
    }
}

/// Maximize / minimize `objective′x` over a polyhedron, optionally inside a box.
pub fn solve_lp(
    objective: &[f64],
    sense: Sense,
    constraints: &Polyhedron,
    bounds: Option<&[(f64, f64)]>,
    tol: &ToleranceConfig,
) -> Result<LpSolution> {
    let n = constraints.dim();
    check_dim(n, objective.len())?;
    let mut lp = LinearProgram::new(n, sense);
    lp.set_objective(objective.to_vec())?;
    for h in constraints.rows() {
        lp.add_row(h.a.clone(), Cmp::Le, h.b)?;
    }
    if let Some(b) = bounds {
        check_dim(n, b.len())?;
        for (j, &(lo, hi)) in b.iter().enumerate() {
            if lo > hi {
                return Err(Error::Invalid(format!("empty bound interval for variable {j}")));
            }
            lp.set_bounds(j, Some(lo), Some(hi));
        }
    }
    lp.solve(tol)
}

/// How an original variable is expressed through nonnegative columns.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    vars: Vec<VarMap>,
    /// Row-major equality system `A y = b`, `y ≥ 0`, with `b ≥ 0`.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> StandardForm {
        let mut vars = Vec::with_capacity(lp.num_vars);
        let mut ncols = 0usize;
        // (column, upper bound) rows generated by two-sided bounds
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..lp.num_vars {
            let map = match (lp.lower[j], lp.upper[j]) {
                (Some(l), u) => {
                    let c = ncols;
                    ncols += 1;
                    if let Some(u) = u {
                        bound_rows.push((c, u - l));
                    }
                    VarMap { offset: l, cols: vec![(c, 1.0)] }
                }
                (None, Some(u)) => {
                    let c = ncols;
                    ncols += 1;
                    VarMap { offset: u, cols: vec![(c, -1.0)] }
                }
                (None, None) => {
                    let c = ncols;
                    ncols += 2;
                    VarMap { offset: 0.0, cols: vec![(c, 1.0), (c + 1, -1.0)] }
                }
            };
            vars.push(map);
        }

        let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::new();
        for (coeffs, cmp, rhs) in &lp.rows {
            let mut r = vec![0.0; ncols];
            let mut shift = 0.0;
            for (j, &aj) in coeffs.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                shift += aj * vars[j].offset;
                for &(c, s) in &vars[j].cols {
                    r[c] += aj * s;
                }
            }
            rows.push((r, *cmp, rhs - shift));
        }
        for (c, ub) in bound_rows {
            let mut r = vec![0.0; ncols];
            r[c] = 1.0;
            rows.push((r, Cmp::Le, ub));
        }

        let nslack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let total = ncols + nslack;
        let mut a = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        let mut s = ncols;
        for (r, cmp, rhs) in rows {
            let mut full = r;
            full.resize(total, 0.0);
            match cmp {
                Cmp::Le => {
                    full[s] = 1.0;
                    s += 1;
                }
                Cmp::Ge => {
                    full[s] = -1.0;
                    s += 1;
                }
                Cmp::Eq => {}
            }
            if rhs < 0.0 {
                full.iter_mut().for_each(|v| *v = -*v);
                b.push(-rhs);
            } else {
                b.push(rhs);
            }
            a.push(full);
        }

        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; total];
        for (j, &cj) in lp.objective.iter().enumerate() {
            for &(c, s) in &vars[j].cols {
                cost[c] += sign * cj * s;
            }
        }
        StandardForm { vars, a, b, cost }
    }

    fn solve(&self, lp: &LinearProgram, tol: &ToleranceConfig) -> Result<LpSolution> {
        let m = self.a.len();
        let n = self.cost.len();
        if m == 0 {
            // unconstrained nonnegative columns: optimal at 0 unless some cost is negative
            if self.cost.iter().any(|&c| c < -COST_EPS) {
                return Ok(unbounded(lp.sense));
            }
            return Ok(self.finish(lp, &vec![0.0; n]));
        }

        let width = n + m + 1;
        let mut t: Vec<Vec<f64>> = self
            .a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.resize(width, 0.0);
                r[n + i] = 1.0;
                r[width - 1] = self.b[i];
                r
            })
            .collect();
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut budget = tol.max_iter;

        // phase 1
        let mut c1 = vec![0.0; n + m];
        c1[n..].iter_mut().for_each(|c| *c = 1.0);
        let phase1 = run_simplex(&mut t, &mut basis, &c1, n + m, &mut budget)?;
        debug_assert!(matches!(phase1, Outcome::Optimal));
        let infeas: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &bv)| bv >= n)
            .map(|(i, _)| t[i][width - 1])
            .sum();
        let bscale = 1.0 + self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if infeas > tol.feas_tol * bscale {
            return Ok(LpSolution { status: LpStatus::Infeasible, x: Vec::new(), value: f64::NAN });
        }

        // drive artificials out of the basis where possible
        for i in 0..m {
            if basis[i] < n {
                continue;
            }
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }

        // phase 2, artificial columns may not enter
        let mut c2 = self.cost.clone();
        c2.resize(n + m, 0.0);
        match run_simplex(&mut t, &mut basis, &c2, n, &mut budget)? {
            Outcome::Unbounded => return Ok(unbounded(lp.sense)),
            Outcome::Optimal => {}
        }

        let mut y = vec![0.0; n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                y[bv] = t[i][width - 1].max(0.0);
            }
        }
        self.polish(&basis, &mut y);
        Ok(self.finish(lp, &y))
    }

    /// Recompute the basic values from the original equality system.
    fn polish(&self, basis: &[usize], y: &mut [f64]) {
        let m = self.a.len();
        let n = self.cost.len();
        let bm = DMatrix::from_fn(m, m, |i, k| {
            let col = basis[k];
            if col < n {
                self.a[i][col]
            } else if col - n == i {
                1.0
            } else {
                0.0
            }
        });
        let rhs = DVector::from_column_slice(&self.b);
        let Some(sol) = bm.lu().solve(&rhs) else {
            return;
        };
        if sol.iter().any(|v| !v.is_finite() || *v < -1e-7) {
            return;
        }
        let resid: f64 = (0..m)
            .map(|i| {
                let mut s = -self.b[i];
                for (k, &col) in basis.iter().enumerate() {
                    s += if col < n { self.a[i][col] } else if col - n == i { 1.0 } else { 0.0 } * sol[k];
                }
                s.abs()
            })
            .fold(0.0, f64::max);
        if resid > 1e-9 * (1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            return;
        }
        for (k, &col) in basis.iter().enumerate() {
            if col < n {
                y[col] = sol[k].max(0.0);
            }
        }
    }

    fn finish(&self, lp: &LinearProgram, y: &[f64]) -> LpSolution {
        let x: Vec<f64> = self
            .vars
            .iter()
            .map(|v| v.offset + v.cols.iter().map(|&(c, s)| s * y[c]).sum::<f64>())
            .collect();
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution { status: LpStatus::Optimal, x, value }
    }
}

fn unbounded(sense: Sense) -> LpSolution {
    LpSolution {
        status: LpStatus::Unbounded,
        x: Vec::new(),
        value: match sense {
            Sense::Minimize => f64::NEG_INFINITY,
            Sense::Maximize => f64::INFINITY,
        },
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    let prow = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
    }
    basis[row] = col;
}

/// Minimizes `cost′y` from the current basic feasible tableau. Only columns
/// `< allowed` may enter.
fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    allowed: usize,
    budget: &mut usize,
) -> Result<Outcome> {
    let width = t[0].len();
    let rhs = width - 1;
    loop {
        // reduced costs, Bland: first improving column
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let z: f64 = basis.iter().enumerate().map(|(i, &bv)| cost[bv] * t[i][j]).sum();
            cost[j] - z < -COST_EPS * (1.0 + cost[j].abs())
        });
        let Some(j) = entering else {
            return Ok(Outcome::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[j] > PIVOT_EPS {
                let ratio = r[rhs].max(0.0) / r[j];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leave else {
            return Ok(Outcome::Unbounded);
        };
        if *budget == 0 {
            return Err(Error::Solver("simplex iteration limit reached (cycling guard)".into()));
        }
        *budget -= 1;
        pivot(t, basis, i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hulls::Halfspace;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn symmetric_margin() {
        // max eps s.t. x + eps <= 1, -x + eps <= 1
        let p = Polyhedron::new(
            2,
            vec![Halfspace::new(vec![1.0, 1.0], 1.0), Halfspace::new(vec![-1.0, 1.0], 1.0)],
        )
        .unwrap();
        let s = solve_lp(&[0.0, 1.0], Sense::Maximize, &p, None, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.x[0].abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let p = Polyhedron::new(
            1,
            vec![Halfspace::new(vec![1.0], -1.0), Halfspace::new(vec![-1.0], -2.0)],
        )
        .unwrap();
        let s = solve_lp(&[0.0], Sense::Minimize, &p, None, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let p = Polyhedron::new(1, vec![]).unwrap();
        let s = solve_lp(&[1.0], Sense::Maximize, &p, None, &tol()).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        assert_eq!(s.value, f64::INFINITY);
    }

    #[test]
    fn boxed_and_equality_rows() {
        // min x + 2y s.t. x + y = 3, x <= 2, y in [0, 5]
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.set_objective(vec![1.0, 2.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], Cmp::Eq, 3.0).unwrap();
        lp.add_row(vec![1.0, 0.0], Cmp::Le, 2.0).unwrap();
        lp.set_bounds(1, Some(0.0), Some(5.0));
        let s = lp.solve(&tol()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_vertex_does_not_cycle() {
        // Beale's classic cycling example (cycles under Dantzig's rule).
        let mut lp = LinearProgram::new(4, Sense::Minimize);
        lp.set_objective(vec![-0.75, 150.0, -0.02, 6.0]).unwrap();
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Cmp::Le, 0.0).unwrap();
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Cmp::Le, 0.0).unwrap();
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Cmp::Le, 1.0).unwrap();
        for j in 0..4 {
            lp.set_bounds(j, Some(0.0), None);
        }
        let s = lp.solve(&tol()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 0.05).abs() < 1e-12);
    }

    #[test]
    fn ge_rows_and_negative_rhs() {
        // max x s.t. x >= -3, x <= -1
        let mut lp = LinearProgram::new(1, Sense::Maximize);
        lp.set_objective(vec![1.0]).unwrap();
        lp.add_row(vec![1.0], Cmp::Ge, -3.0).unwrap();
        lp.add_row(vec![1.0], Cmp::Le, -1.0).unwrap();
        let s = lp.solve(&tol()).unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
    }
}
