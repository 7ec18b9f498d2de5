//! Nearest point to the origin in the convex hull of finitely many points.
//!
//! Euclidean case: Wolfe's corral method with an exact affine-minimizer
//! solve in every minor cycle. Polyhedral duals (ℓ1, ℓ∞) go through the LP.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lp::{Cmp, LinearProgram, LpStatus, Sense};
use super::{PointCloud, ToleranceConfig};
use crate::error::{Error, Result};
use crate::norms::Norm;

#[derive(Debug, Clone, Serialize)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Dual-norm size of `point`.
    pub dist: f64,
    /// Convex weights over the generators, `Σ wᵢ gᵢ = point`.
    pub weights: Vec<f64>,
}

/// `min { ‖u‖_* : u ∈ conv(generators) }` where `‖·‖_*` is the dual of `spec`.
pub fn min_norm_point(
    generators: &PointCloud,
    spec: Norm,
    tol: &ToleranceConfig,
) -> Result<MinNormPoint> {
    match spec.dual() {
        Norm::L2 => wolfe(generators.points(), tol),
        dual => polyhedral(generators.points(), dual, tol),
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn combine(pts: &[Vec<f64>], idx: &[usize], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; pts[0].len()];
    for (&i, &wi) in idx.iter().zip(w) {
        for (xk, pk) in x.iter_mut().zip(&pts[i]) {
            *xk += wi * pk;
        }
    }
    x
}

/// Weights of the nearest point to 0 in the affine hull of `pts[idx]`.
fn affine_minimizer(pts: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let k = idx.len();
    let m = DMatrix::from_fn(k + 1, k + 1, |r, c| match (r < k, c < k) {
        (true, true) => dot(&pts[idx[r]], &pts[idx[c]]),
        (true, false) | (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let w: Vec<f64> = sol.iter().take(k).copied().collect();
    w.iter().all(|v| v.is_finite()).then_some(w)
}

fn wolfe(pts: &[Vec<f64>], tol: &ToleranceConfig) -> Result<MinNormPoint> {
    let n_pts = pts.len();
    let scale = pts.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12;

    let start = (0..n_pts)
        .min_by(|&i, &j| dot(&pts[i], &pts[i]).total_cmp(&dot(&pts[j], &pts[j])))
        .expect("nonempty cloud");
    let mut corral = vec![start];
    let mut lam = vec![1.0];
    let mut x = pts[start].clone();

    let mut iters = 0usize;
    loop {
        iters += 1;
        if iters > tol.max_iter {
            return Err(Error::NonConvergence { iterations: iters, best_bound: dot(&x, &x).sqrt() });
        }
        let xx = dot(&x, &x);
        let (j, best) = (0..n_pts)
            .map(|k| (k, dot(&x, &pts[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty cloud");
        if xx - best <= tol.solver_tol * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lam.push(0.0);

        let mut minor = 0usize;
        loop {
            minor += 1;
            if minor > corral.len() + 2 {
                return Err(Error::Solver("Wolfe minor cycle did not terminate".into()));
            }
            let Some(alpha) = affine_minimizer(pts, &corral) else {
                // affinely dependent corral: drop the newcomer and stop
                corral.pop();
                lam.pop();
                return Ok(finish(n_pts, &corral, &lam, combine(pts, &corral, &lam)));
            };
            if alpha.iter().all(|&a| a > eps) {
                lam = alpha;
                x = combine(pts, &corral, &lam);
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= eps {
                    let denom = l - a;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            // remove at least one point that hit zero
            let drop_at = (0..lam.len())
                .min_by(|&a, &b| lam[a].total_cmp(&lam[b]))
                .expect("corral nonempty");
            let mut keep_c = Vec::new();
            let mut keep_l = Vec::new();
            for (i, (&c, &l)) in corral.iter().zip(&lam).enumerate() {
                if l > eps && i != drop_at {
                    keep_c.push(c);
                    keep_l.push(l);
                }
            }
            if keep_c.is_empty() {
                keep_c.push(corral[(drop_at + 1) % corral.len()]);
                keep_l.push(1.0);
            }
            let s: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= s);
            corral = keep_c;
            lam = keep_l;
        }
    }
    Ok(finish(n_pts, &corral, &lam, x))
}

fn finish(n_pts: usize, corral: &[usize], lam: &[f64], x: Vec<f64>) -> MinNormPoint {
    let mut weights = vec![0.0; n_pts];
    for (&c, &l) in corral.iter().zip(lam) {
        weights[c] = l;
    }
    let dist = dot(&x, &x).sqrt();
    MinNormPoint { point: x, dist, weights }
}

/// LP over the simplex weights with epigraph variables for ℓ1 / ℓ∞.
fn polyhedral(pts: &[Vec<f64>], dual: Norm, tol: &ToleranceConfig) -> Result<MinNormPoint> {
    let k = pts.len();
    let n = pts[0].len();
    // variables: weights (k), then t (1 for ℓ∞, n for ℓ1)
    let nt = if dual == Norm::Linf { 1 } else { n };
    let mut lp = LinearProgram::new(k + nt, Sense::Minimize);
    let mut c = vec![0.0; k + nt];
    c[k..].iter_mut().for_each(|v| *v = 1.0);
    lp.set_objective(c)?;
    for j in 0..k {
        lp.set_bounds(j, Some(0.0), None);
    }
    let mut simplex_row = vec![0.0; k + nt];
    simplex_row[..k].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(simplex_row, Cmp::Eq, 1.0)?;
    for coord in 0..n {
        let tcol = if nt == 1 { k } else { k + coord };
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; k + nt];
            for (j, p) in pts.iter().enumerate() {
                row[j] = sign * p[coord];
            }
            row[tcol] = -1.0;
            lp.add_row(row, Cmp::Le, 0.0)?;
        }
    }
    let sol = lp.solve(tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("min-norm LP ended with {:?}", sol.status)));
    }
    let mut weights: Vec<f64> = sol.x[..k].iter().map(|w| w.max(0.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let idx: Vec<usize> = (0..k).collect();
    let point = combine(pts, &idx, &weights);
    let dist = dual.eval(&point);
    Ok(MinNormPoint { point, dist, weights })
}
