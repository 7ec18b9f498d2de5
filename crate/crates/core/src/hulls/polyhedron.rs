//! Polyhedra `{x : a′x ≤ b}` and the metric projection onto them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lp::{Cmp, LinearProgram, LpStatus, Sense};
use super::ToleranceConfig;
use crate::error::{check_dim, Error, Result};
use crate::norms::{dot, Norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Halfspace { a, b }
    }

    /// `a′x - b`; positive when violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    n: usize,
    rows: Vec<Halfspace>,
}

impl Polyhedron {
    pub fn new(n: usize, rows: Vec<Halfspace>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        for r in &rows {
            check_dim(n, r.a.len())?;
        }
        Ok(Polyhedron { n, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|h| h.violation(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], feas_tol: f64) -> bool {
        self.rows.is_empty() || self.max_violation(x) <= feas_tol
    }

    /// Phase-1 feasibility; returns a feasible point when one exists.
    pub fn feasible_point(&self, tol: &ToleranceConfig) -> Result<Option<Vec<f64>>> {
        let mut lp = LinearProgram::new(self.n, Sense::Minimize);
        for h in &self.rows {
            lp.add_row(h.a.clone(), Cmp::Le, h.b)?;
        }
        let s = lp.solve(tol)?;
        Ok((s.status == LpStatus::Optimal).then_some(s.x))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub point: Vec<f64>,
    pub dist: f64,
}

/// Nearest point of `p` to `x` in the primal norm of `spec`.
///
/// Euclidean: Hildreth's dual coordinate ascent followed by an exact solve on
/// the identified active rows. ℓ1 / ℓ∞: LP with epigraph variables.
pub fn project_polyhedron(
    x: &[f64],
    p: &Polyhedron,
    spec: Norm,
    tol: &ToleranceConfig,
) -> Result<Projection> {
    check_dim(p.n, x.len())?;
    if p.contains(x, tol.feas_tol) {
        return Ok(Projection { point: x.to_vec(), dist: 0.0 });
    }
    if p.feasible_point(tol)?.is_none() {
        return Err(Error::Infeasible("polyhedron is empty".into()));
    }
    match spec {
        Norm::L2 => hildreth(x, p, tol),
        _ => polyhedral_projection(x, p, spec, tol),
    }
}

fn hildreth(x: &[f64], p: &Polyhedron, tol: &ToleranceConfig) -> Result<Projection> {
    let rows: Vec<&Halfspace> = p.rows.iter().filter(|h| dot(&h.a, &h.a) > 0.0).collect();
    let sq: Vec<f64> = rows.iter().map(|h| dot(&h.a, &h.a)).collect();
    let mut mu = vec![0.0; rows.len()];
    let mut y = x.to_vec();
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut converged = false;
    for _ in 0..tol.max_iter {
        let mut moved = 0.0f64;
        for (i, h) in rows.iter().enumerate() {
            let viol = h.violation(&y);
            let new_mu = (mu[i] + viol / sq[i]).max(0.0);
            let step = new_mu - mu[i];
            if step != 0.0 {
                for (yk, ak) in y.iter_mut().zip(&h.a) {
                    *yk -= step * ak;
                }
                moved = moved.max(step.abs() * sq[i].sqrt());
                mu[i] = new_mu;
            }
        }
        let viol = rows.iter().map(|h| h.violation(&y)).fold(f64::NEG_INFINITY, f64::max);
        if moved < tol.solver_tol * scale && viol <= tol.feas_tol {
            converged = true;
            break;
        }
    }

    let polished = polish(x, &rows, &mu, tol);
    match polished {
        Some(pt) => Ok(projection_of(x, pt)),
        None if converged || p.max_violation(&y) <= tol.feas_tol => Ok(projection_of(x, y)),
        None => Err(Error::NonConvergence {
            iterations: tol.max_iter,
            best_bound: p.max_violation(&y).max(0.0),
        }),
    }
}

fn projection_of(x: &[f64], y: Vec<f64>) -> Projection {
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    Projection { dist: Norm::L2.eval(&d), point: y }
}

/// Exact projection onto the affine set of the rows with positive multiplier;
/// accepted only if it satisfies the KKT conditions.
fn polish(x: &[f64], rows: &[&Halfspace], mu: &[f64], tol: &ToleranceConfig) -> Option<Vec<f64>> {
    let act: Vec<usize> = (0..rows.len()).filter(|&i| mu[i] > 0.0).collect();
    if act.is_empty() {
        return None;
    }
    let k = act.len();
    let g = DMatrix::from_fn(k, k, |r, c| dot(&rows[act[r]].a, &rows[act[c]].a));
    let rhs = DVector::from_iterator(k, act.iter().map(|&i| rows[i].violation(x)));
    let nu = g.svd(true, true).solve(&rhs, 1e-13).ok()?;
    if nu.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return None;
    }
    let mut y = x.to_vec();
    for (j, &i) in act.iter().enumerate() {
        for (yk, ak) in y.iter_mut().zip(&rows[i].a) {
            *yk -= nu[j] * ak;
        }
    }
    let ok = rows.iter().all(|h| h.violation(&y) <= tol.feas_tol);
    ok.then_some(y)
}

fn polyhedral_projection(x: &[f64], p: &Polyhedron, spec: Norm, tol: &ToleranceConfig) -> Result<Projection> {
    let n = p.n;
    // variables: y (n, free), t (1 for ℓ∞, n for ℓ1)
    let nt = if spec == Norm::Linf { 1 } else { n };
    let mut lp = LinearProgram::new(n + nt, Sense::Minimize);
    let mut c = vec![0.0; n + nt];
    c[n..].iter_mut().for_each(|v| *v = 1.0);
    lp.set_objective(c)?;
    for h in &p.rows {
        let mut row = h.a.clone();
        row.resize(n + nt, 0.0);
        lp.add_row(row, Cmp::Le, h.b)?;
    }
    for k in 0..n {
        let tcol = if nt == 1 { n } else { n + k };
        // y_k - x_k <= t, x_k - y_k <= t
        let mut r = vec![0.0; n + nt];
        r[k] = 1.0;
        r[tcol] = -1.0;
        lp.add_row(r, Cmp::Le, x[k])?;
        let mut r = vec![0.0; n + nt];
        r[k] = -1.0;
        r[tcol] = -1.0;
        lp.add_row(r, Cmp::Le, -x[k])?;
    }
    let s = lp.solve(tol)?;
    if s.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("projection LP ended with {:?}", s.status)));
    }
    let y = s.x[..n].to_vec();
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    Ok(Projection { dist: spec.eval(&d), point: y })
}

/// Vertices of a polyhedron by brute-force enumeration of `n`-row subsets.
/// Meant for small instances (used to compare feasible sets).
pub fn polyhedron_vertices(p: &Polyhedron, tol: &ToleranceConfig) -> Vec<Vec<f64>> {
    let n = p.n;
    let rows: Vec<&Halfspace> = p.rows.iter().filter(|h| h.a.iter().any(|v| *v != 0.0)).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if rows.len() < n {
        return out;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].a[c]);
        let b = DVector::from_iterator(n, idx.iter().map(|&i| rows[i].b));
        if a.determinant().abs() > 1e-12 {
            if let Some(v) = a.lu().solve(&b) {
                let v: Vec<f64> = v.iter().copied().collect();
                let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if p.contains(&v, tol.feas_tol.max(1e-9) * scale)
                    && !out.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-9 * scale))
                {
                    out.push(v);
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < rows.len() - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn one_dimensional() {
        let p = Polyhedron::new(1, vec![Halfspace::new(vec![1.0], 1.0)]).unwrap();
        let r = project_polyhedron(&[3.0], &p, Norm::L2, &tol()).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-12);
        assert!((r.dist - 2.0).abs() < 1e-12);
        let r = project_polyhedron(&[0.5], &p, Norm::L2, &tol()).unwrap();
        assert_eq!(r.dist, 0.0);
    }

    #[test]
    fn separable_box_corner() {
        let p = Polyhedron::new(
            2,
            vec![Halfspace::new(vec![1.0, 0.0], 1.0), Halfspace::new(vec![0.0, 1.0], 1.0)],
        )
        .unwrap();
        let r = project_polyhedron(&[2.0, 2.0], &p, Norm::L2, &tol()).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-12 && (r.point[1] - 1.0).abs() < 1e-12);
        assert!((r.dist - 2f64.sqrt()).abs() < 1e-12);
        // ℓ∞ and ℓ1 distances to the same corner region
        assert!((project_polyhedron(&[2.0, 2.0], &p, Norm::Linf, &tol()).unwrap().dist - 1.0).abs() < 1e-12);
        assert!((project_polyhedron(&[2.0, 2.0], &p, Norm::L1, &tol()).unwrap().dist - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_polyhedron_is_an_error() {
        let p = Polyhedron::new(
            1,
            vec![Halfspace::new(vec![1.0], -1.0), Halfspace::new(vec![-1.0], -2.0)],
        )
        .unwrap();
        assert!(matches!(project_polyhedron(&[0.0], &p, Norm::L2, &tol()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn vertices_of_square() {
        let p = Polyhedron::new(
            2,
            vec![
                Halfspace::new(vec![1.0, 0.0], 1.0),
                Halfspace::new(vec![-1.0, 0.0], 1.0),
                Halfspace::new(vec![0.0, 1.0], 1.0),
                Halfspace::new(vec![0.0, -1.0], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(polyhedron_vertices(&p, &tol()).len(), 4);
    }
}
