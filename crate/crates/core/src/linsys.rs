//! Linear systems `a′x ≤ b, (a, b) ∈ U` with `U` a finite coefficient set,
//! their feasible sets, the C-set at a feasible point and the Lipschitz
//! modulus `(‖x₀‖ + 1) / d_*(0, C)` of the feasible-set mapping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::extreal::ExtReal;
use crate::hulls::{
    min_norm_point, project_polyhedron, Cmp, Halfspace, LinearProgram, LpStatus, PointCloud,
    Polyhedron, Sense, ToleranceConfig,
};
use crate::norms::{dot, Norm};

/// Default half-width of the box that keeps the strong Slater LP bounded.
pub const DEFAULT_SSC_BOX: f64 = 1e6;

/// Violation up to which a nominal point is projected back (with a warning)
/// instead of rejected.
const REPAIR_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRepr", into = "SystemRepr")]
pub struct LinearSystem {
    n: usize,
    coeffs: PointCloud,
    spec: Norm,
}

#[derive(Serialize, Deserialize)]
struct SystemRepr {
    n: usize,
    #[serde(default)]
    norm: Norm,
    points: Vec<Vec<f64>>,
}

impl TryFrom<SystemRepr> for LinearSystem {
    type Error = Error;

    fn try_from(r: SystemRepr) -> Result<Self> {
        LinearSystem::new(r.n, PointCloud::new(r.points)?, r.norm)
    }
}

impl From<LinearSystem> for SystemRepr {
    fn from(s: LinearSystem) -> Self {
        SystemRepr { n: s.n, norm: s.spec, points: s.coeffs.into_points() }
    }
}

impl LinearSystem {
    /// Rows are the points of `coeffs`, split as `(a, b)` with `b` last.
    ///
    /// A finite coefficient set always has a bounded gradient part, which is
    /// what the modulus formula needs.
    pub fn new(n: usize, coeffs: PointCloud, spec: Norm) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        check_dim(n + 1, coeffs.dim())?;
        Ok(LinearSystem { n, coeffs, spec })
    }

    pub fn from_rows(rows: &[(Vec<f64>, f64)], spec: Norm) -> Result<Self> {
        let n = rows.first().ok_or(Error::Empty("linear system"))?.0.len();
        let pts = rows
            .iter()
            .map(|(a, b)| {
                let mut p = a.clone();
                p.push(*b);
                p
            })
            .collect();
        LinearSystem::new(n, PointCloud::new(pts)?, spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> Norm {
        self.spec
    }

    pub fn coeffs(&self) -> &PointCloud {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.coeffs.get(i)[..self.n]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.coeffs.get(i)[self.n]
    }

    /// `bᵢ - aᵢ′x` for every row.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.rhs(i) - dot(self.gradient(i), x)).collect()
    }

    pub fn polyhedron(&self) -> Polyhedron {
        let rows = (0..self.len())
            .map(|i| Halfspace::new(self.gradient(i).to_vec(), self.rhs(i)))
            .collect();
        Polyhedron::new(self.n, rows).expect("dimensions checked on construction")
    }

    pub fn with_spec(&self, spec: Norm) -> LinearSystem {
        LinearSystem { spec, ..self.clone() }
    }
}

/// `d(x, F(U))` in the primal norm of the system.
pub fn dist_to_feasible(x: &[f64], sys: &LinearSystem, tol: &ToleranceConfig) -> Result<f64> {
    check_dim(sys.n, x.len())?;
    let p = sys.polyhedron();
    if p.feasible_point(tol)?.is_none() {
        return Err(Error::Infeasible("the system has no solution".into()));
    }
    Ok(project_polyhedron(x, &p, sys.spec, tol)?.dist)
}

fn check_feasible(x0: &[f64], sys: &LinearSystem, tol: &ToleranceConfig) -> Result<()> {
    check_dim(sys.n, x0.len())?;
    let worst = sys.slacks(x0).into_iter().fold(f64::INFINITY, f64::min);
    if worst < -tol.feas_tol {
        return Err(Error::Precondition(format!(
            "x0 violates the system by {:e}",
            -worst
        )));
    }
    Ok(())
}

/// Indices with `|bᵢ - aᵢ′x₀| ≤ active_tol`.
pub fn active_set(x0: &[f64], sys: &LinearSystem, tol: &ToleranceConfig) -> Result<Vec<usize>> {
    check_feasible(x0, sys, tol)?;
    Ok(sys
        .slacks(x0)
        .iter()
        .enumerate()
        .filter(|(_, s)| s.abs() <= tol.active_tol)
        .map(|(i, _)| i)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CSetDistance {
    /// `d_*(0, C)`, `+inf` when `C` is empty.
    pub dist: ExtReal,
    pub empty: bool,
    pub zero_in: bool,
    /// Convex weights over all rows of the system realizing the distance.
    pub witness: Option<Vec<f64>>,
}

impl CSetDistance {
    fn empty() -> Self {
        CSetDistance { dist: ExtReal::INFINITY, empty: true, zero_in: false, witness: None }
    }

    fn found(dist: f64, witness: Vec<f64>, tol: &ToleranceConfig) -> Self {
        CSetDistance { dist: ExtReal(dist), empty: false, zero_in: dist <= tol.solver_tol, witness: Some(witness) }
    }
}

/// Distance from the origin to `C = {u : (u, u′x₀) ∈ conv U}`.
///
/// Since every slack `sᵢ = bᵢ - aᵢ′x₀` is nonnegative, `Σλᵢsᵢ = 0` forces the
/// weights onto the active rows, so `C` is the hull of the active gradients.
pub fn c_set_distance(sys: &LinearSystem, x0: &[f64], tol: &ToleranceConfig) -> Result<CSetDistance> {
    let active = active_set(x0, sys, tol)?;
    if active.is_empty() {
        return Ok(CSetDistance::empty());
    }
    let grads = PointCloud::new(active.iter().map(|&i| sys.gradient(i).to_vec()).collect())?;
    let mnp = min_norm_point(&grads, sys.spec, tol)?;
    // map weights of the deduplicated gradient cloud back onto row indices
    let mut witness = vec![0.0; sys.len()];
    for (k, w) in mnp.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let g = grads.get(k);
        let row = active
            .iter()
            .copied()
            .find(|&i| sys.gradient(i) == g)
            .expect("gradient comes from an active row");
        witness[row] += w;
    }
    Ok(CSetDistance::found(mnp.dist, witness, tol))
}

/// Reference computation of [`c_set_distance`] that does not use the
/// active-row reduction: `min ‖Σλᵢaᵢ‖_*` over the whole simplex subject to
/// `Σλᵢ(bᵢ - aᵢ′x₀) = 0`.
pub fn c_set_distance_full(sys: &LinearSystem, x0: &[f64], tol: &ToleranceConfig) -> Result<CSetDistance> {
    check_feasible(x0, sys, tol)?;
    // exact zeros up to roundoff only; no activity threshold here
    let slack: Vec<f64> = sys
        .slacks(x0)
        .into_iter()
        .map(|s| if s.abs() <= tol.feas_tol { 0.0 } else { s })
        .collect();
    let grads: Vec<&[f64]> = (0..sys.len()).map(|i| sys.gradient(i)).collect();
    match sys.spec.dual() {
        Norm::L2 => full_program_l2(&grads, &slack, tol),
        dual => full_program_lp(&grads, &slack, dual, tol),
    }
}

fn full_program_lp(grads: &[&[f64]], slack: &[f64], dual: Norm, tol: &ToleranceConfig) -> Result<CSetDistance> {
    let m = grads.len();
    let n = grads[0].len();
    let nt = if dual == Norm::Linf { 1 } else { n };
    let mut lp = LinearProgram::new(m + nt, Sense::Minimize);
    let mut c = vec![0.0; m + nt];
    c[m..].iter_mut().for_each(|v| *v = 1.0);
    lp.set_objective(c)?;
    for j in 0..m {
        lp.set_bounds(j, Some(0.0), None);
    }
    let mut row = vec![0.0; m + nt];
    row[..m].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(row, Cmp::Eq, 1.0)?;
    let mut row = vec![0.0; m + nt];
    row[..m].copy_from_slice(slack);
    lp.add_row(row, Cmp::Eq, 0.0)?;
    for k in 0..n {
        let tcol = if nt == 1 { m } else { m + k };
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; m + nt];
            for (j, g) in grads.iter().enumerate() {
                row[j] = sign * g[k];
            }
            row[tcol] = -1.0;
            lp.add_row(row, Cmp::Le, 0.0)?;
        }
    }
    let sol = lp.solve(tol)?;
    match sol.status {
        LpStatus::Infeasible => Ok(CSetDistance::empty()),
        LpStatus::Unbounded => Err(Error::Solver("C-set LP unbounded".into())),
        LpStatus::Optimal => {
            let w: Vec<f64> = sol.x[..m].iter().map(|v| v.max(0.0)).collect();
            let mut u = vec![0.0; n];
            for (wj, g) in w.iter().zip(grads) {
                for (uk, gk) in u.iter_mut().zip(g.iter()) {
                    *uk += wj * gk;
                }
            }
            Ok(CSetDistance::found(dual.eval(&u), w, tol))
        }
    }
}

/// Exact convex QP by support enumeration: the optimum of
/// `min ‖Mλ‖² s.t. 1′λ = 1, s′λ = 0, λ ≥ 0` is the unique equality-constrained
/// minimizer on its minimal support, which has at most `n + 2` elements.
fn full_program_l2(grads: &[&[f64]], slack: &[f64], _tol: &ToleranceConfig) -> Result<CSetDistance> {
    let m = grads.len();
    let n = grads[0].len();
    let max_support = (n + 2).min(m);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = Vec::with_capacity(max_support);

    fn visit(
        start: usize,
        max_support: usize,
        subset: &mut Vec<usize>,
        eval: &mut dyn FnMut(&[usize]),
        m: usize,
    ) {
        for i in start..m {
            subset.push(i);
            eval(subset);
            if subset.len() < max_support {
                visit(i + 1, max_support, subset, eval, m);
            }
            subset.pop();
        }
    }

    let mut eval = |s: &[usize]| {
        let k = s.len();
        let ss: Vec<f64> = s.iter().map(|&i| slack[i]).collect();
        let s_scale = ss.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let s_const = ss.iter().all(|v| (v - ss[0]).abs() <= 1e-14 * (1.0 + s_scale));
        let with_slack_row = if s_const {
            if ss[0].abs() > 0.0 {
                return; // s′λ = s₀ ≠ 0 on this support
            }
            false
        } else {
            true
        };
        let nc = if with_slack_row { 2 } else { 1 };
        let dim = k + nc;
        let mut kkt = DMatrix::zeros(dim, dim);
        for r in 0..k {
            for c in 0..k {
                kkt[(r, c)] = dot(grads[s[r]], grads[s[c]]);
            }
            kkt[(r, k)] = 1.0;
            kkt[(k, r)] = 1.0;
            if with_slack_row {
                kkt[(r, k + 1)] = ss[r];
                kkt[(k + 1, r)] = ss[r];
            }
        }
        let mut rhs = DVector::zeros(dim);
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { return };
        let lam: Vec<f64> = (0..k).map(|i| sol[i]).collect();
        if lam.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return;
        }
        let mut u = vec![0.0; n];
        for (l, &i) in lam.iter().zip(s) {
            for (uk, gk) in u.iter_mut().zip(grads[i]) {
                *uk += l.max(0.0) * gk;
            }
        }
        let d = Norm::L2.eval(&u);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            let mut w = vec![0.0; m];
            for (l, &i) in lam.iter().zip(s) {
                w[i] = l.max(0.0);
            }
            best = Some((d, w));
        }
    };
    visit(0, max_support, &mut subset, &mut eval, m);

    Ok(match best {
        None => CSetDistance::empty(),
        Some((d, w)) => CSetDistance::found(d, w, _tol),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SscMargin {
    /// `max ε` s.t. `aᵢ′x + ε ≤ bᵢ` for all rows, `‖x‖∞ ≤ box_radius`.
    pub margin: f64,
    pub slater_point: Vec<f64>,
    pub box_radius: f64,
    /// Whether the optimal point touches the box (the margin may then be
    /// an underestimate of the unboxed one).
    pub box_binding: bool,
}

impl SscMargin {
    pub fn holds(&self) -> bool {
        self.margin > 0.0
    }
}

pub fn ssc_margin(sys: &LinearSystem, box_radius: f64, tol: &ToleranceConfig) -> Result<SscMargin> {
    if !(box_radius > 0.0) {
        return Err(Error::Invalid("box radius must be positive".into()));
    }
    let n = sys.n;
    let mut lp = LinearProgram::new(n + 1, Sense::Maximize);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    lp.set_objective(c)?;
    for i in 0..sys.len() {
        let mut row = sys.gradient(i).to_vec();
        row.push(1.0);
        lp.add_row(row, Cmp::Le, sys.rhs(i))?;
    }
    for j in 0..n {
        lp.set_bounds(j, Some(-box_radius), Some(box_radius));
    }
    let sol = lp.solve(tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("strong Slater LP ended with {:?}", sol.status)));
    }
    let x = sol.x[..n].to_vec();
    let binding = x.iter().any(|v| (v.abs() - box_radius).abs() <= 1e-9 * box_radius);
    // snap roundoff-level margins to zero
    let margin = if sol.value.abs() <= tol.feas_tol { 0.0 } else { sol.value };
    Ok(SscMargin { margin, slater_point: x, box_radius, box_binding: binding })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Zero,
    Finite,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub modulus: ExtReal,
    pub classification: Classification,
    pub c_distance: ExtReal,
    pub c_empty: bool,
    pub zero_in_c: bool,
    pub active_indices: Vec<usize>,
    pub witness: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    pub x0_norm: f64,
    pub ssc_margin: f64,
    pub strong_slater_point: Vec<f64>,
    pub ssc_box_radius: f64,
    pub ssc_box_binding: bool,
    pub warnings: Vec<String>,
}

/// `lip F(U, x₀) = (‖x₀‖ + 1) / d_*(0, C)`, with `1/0 = +inf`, `1/+inf = 0`.
pub fn lipschitz_modulus(sys: &LinearSystem, x0: &[f64], tol: &ToleranceConfig) -> Result<ModulusReport> {
    lipschitz_modulus_with_box(sys, x0, DEFAULT_SSC_BOX, tol)
}

pub fn lipschitz_modulus_with_box(
    sys: &LinearSystem,
    x0: &[f64],
    box_radius: f64,
    tol: &ToleranceConfig,
) -> Result<ModulusReport> {
    check_dim(sys.n, x0.len())?;
    let mut warnings = Vec::new();
    let worst = sys.slacks(x0).into_iter().fold(f64::INFINITY, f64::min);
    let x0: Vec<f64> = if worst >= -tol.feas_tol {
        x0.to_vec()
    } else if worst >= -REPAIR_LIMIT {
        let p = project_polyhedron(x0, &sys.polyhedron(), Norm::L2, tol)?;
        warnings.push(format!(
            "x0 violated the system by {:e}; replaced by its projection onto F(U)",
            -worst
        ));
        p.point
    } else {
        return Err(Error::Precondition(format!("x0 violates the system by {:e}", -worst)));
    };

    let active = active_set(&x0, sys, tol)?;
    let c = c_set_distance(sys, &x0, tol)?;
    let ssc = ssc_margin(sys, box_radius, tol)?;
    if ssc.box_binding {
        warnings.push(format!("strong Slater LP is bound by the box of radius {box_radius}"));
    }
    let x0_norm = sys.spec.eval(&x0);
    let (modulus, classification) = if c.empty {
        (ExtReal::ZERO, Classification::Zero)
    } else if c.zero_in {
        (ExtReal::INFINITY, Classification::Infinite)
    } else {
        (ExtReal::ratio(x0_norm + 1.0, c.dist), Classification::Finite)
    };
    Ok(ModulusReport {
        modulus,
        classification,
        c_distance: c.dist,
        c_empty: c.empty,
        zero_in_c: c.zero_in,
        active_indices: active,
        witness: c.witness,
        x0,
        x0_norm,
        ssc_margin: ssc.margin,
        strong_slater_point: ssc.slater_point,
        ssc_box_radius: box_radius,
        ssc_box_binding: ssc.box_binding,
        warnings,
    })
}
