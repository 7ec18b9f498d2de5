//! Linear representations of convex inequalities `f(x) ≤ 0` and the
//! Lipschitz estimates built on them.
//!
//! The enlargement `E₀ = L(f₀) + α₀𝔹` is replaced throughout by the bounding
//! box of `L(f₀)` grown by `α₀`, and balls by boxes of the same radius. Both
//! are supersets, which the linearization tolerates.

use serde::{Deserialize, Serialize};

use crate::convexfn::{
    dk_distance, eval_subgrad, pieces_active_in_box, subdiff_generators, subdiff_image, BoxRegion, ConvexFunction,
    DkMeasure,
};
use crate::error::{check_dim, Error, Result};
use crate::extreal::ExtReal;
use crate::hulls::{
    hausdorff, project_polyhedron, Cmp, Halfspace, LinearProgram, LpStatus, Polyhedron, Sense,
    ToleranceConfig,
};
use crate::linsys::{lipschitz_modulus, LinearSystem, ModulusReport};
use crate::norms::{dot, Metric, Norm};

/// Default half-width of the box assumed to contain `L(f₀)`.
pub const DEFAULT_SEARCH_RADIUS: f64 = 100.0;

const CUT_LIMIT: usize = 2000;

fn default_search_radius() -> f64 {
    DEFAULT_SEARCH_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexInstance {
    pub f0: ConvexFunction,
    pub x0: Vec<f64>,
    pub alpha0: f64,
    pub alpha: f64,
    #[serde(rename = "grid")]
    pub grid_per_axis: usize,
    #[serde(default = "default_search_radius")]
    pub search_radius: f64,
}

impl ConvexInstance {
    pub fn new(f0: ConvexFunction, x0: Vec<f64>, alpha0: f64, alpha: f64, grid_per_axis: usize) -> Result<Self> {
        let inst = ConvexInstance { f0, x0, alpha0, alpha, grid_per_axis, search_radius: DEFAULT_SEARCH_RADIUS };
        inst.check_fields()?;
        Ok(inst)
    }

    fn check_fields(&self) -> Result<()> {
        check_dim(self.f0.dim(), self.x0.len())?;
        for (name, v) in [("alpha0", self.alpha0), ("alpha", self.alpha), ("search_radius", self.search_radius)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.grid_per_axis < 2 {
            return Err(Error::Invalid("grid needs at least 2 nodes per axis".into()));
        }
        Ok(())
    }

    /// Checks the field ranges, `f₀(x₀) ≤ feas_tol` and boundedness of
    /// `L(f₀)` inside the search box; returns the bounding box of `L(f₀)`.
    pub fn validate(&self, tol: &ToleranceConfig) -> Result<SublevelBounds> {
        self.check_fields()?;
        let v = self.f0.eval(&self.x0);
        if v > tol.feas_tol {
            return Err(Error::Precondition(format!("f0(x0) = {v} > 0")));
        }
        sublevel_bounds(&self.f0, self.search_radius, tol)
    }
}

/// Coordinate-wise bounds of `L(f)` (outer, tight to solver tolerance).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SublevelBounds {
    /// The box `[lower - r, upper + r]`.
    pub fn enlarged(&self, r: f64) -> Result<BoxRegion> {
        let lo: Vec<f64> = self.lower.iter().map(|v| v - r).collect();
        let hi: Vec<f64> = self.upper.iter().map(|v| v + r).collect();
        BoxRegion::from_bounds(&lo, &hi)
    }

    pub fn diameter(&self) -> f64 {
        let d: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).collect();
        Norm::L2.eval(&d)
    }
}

/// `{x : cⱼ′x + dⱼ ≤ 0 ∀j}`, exactly `L(f)` for max-affine `f`.
pub fn sublevel_polyhedron(f: &ConvexFunction) -> Result<Polyhedron> {
    let pieces = f
        .as_max_affine()
        .ok_or_else(|| Error::Invalid("sublevel polyhedron needs a max-affine function".into()))?;
    Polyhedron::new(f.dim(), pieces.iter().map(|p| Halfspace::new(p.c.clone(), -p.d)).collect())
}

/// Outer polyhedral model of `L(f)` inside `[-R, R]ⁿ`, grown by cutting
/// planes `f(p) + g′(y - p) ≤ 0`.
struct CutModel<'a> {
    f: &'a ConvexFunction,
    rows: Vec<Halfspace>,
}

impl<'a> CutModel<'a> {
    fn new(f: &'a ConvexFunction, radius: f64) -> Self {
        let n = f.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            rows.push(Halfspace::new(e.clone(), radius));
            e[k] = -1.0;
            rows.push(Halfspace::new(e, radius));
        }
        CutModel { f, rows }
    }

    /// Adds the cut at `p`; false when `p` already satisfies `f(p) ≤ eps`.
    fn cut(&mut self, p: &[f64], eps: f64) -> Result<bool> {
        let (v, g) = eval_subgrad(self.f, p)?;
        if v <= eps {
            return Ok(false);
        }
        if g.iter().all(|x| *x == 0.0) {
            return Err(Error::Precondition("the sublevel set is empty".into()));
        }
        let b = dot(&g, p) - v;
        self.rows.push(Halfspace::new(g, b));
        Ok(true)
    }

    fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::new(self.f.dim(), self.rows.clone())
    }
}

/// Bounding box of `L(f)`. Max-affine: one LP per bound. Otherwise
/// Kelley's cutting planes, whose models always contain `L(f)`, so the
/// result is an outer box even when the cut budget runs out. Bounds
/// reaching the search box mean `L(f)` is not certified bounded.
pub fn sublevel_bounds(f: &ConvexFunction, search_radius: f64, tol: &ToleranceConfig) -> Result<SublevelBounds> {
    let n = f.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut model = CutModel::new(f, search_radius);
    let exact = sublevel_polyhedron(f).ok();
    for k in 0..n {
        for sense in [Sense::Minimize, Sense::Maximize] {
            let mut obj = vec![0.0; n];
            obj[k] = 1.0;
            let mut value;
            let mut cuts = 0;
            loop {
                let rows = match &exact {
                    Some(p) => {
                        let mut r = p.rows().to_vec();
                        r.extend(model.rows[..2 * n].iter().cloned());
                        r
                    }
                    None => model.rows.clone(),
                };
                let mut lp = LinearProgram::new(n, sense);
                lp.set_objective(obj.clone())?;
                for h in rows {
                    lp.add_row(h.a, Cmp::Le, h.b)?;
                }
                let s = lp.solve(tol)?;
                match s.status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible => return Err(Error::Precondition("the sublevel set is empty".into())),
                    st => return Err(Error::Solver(format!("bounding LP ended with {st:?}"))),
                }
                value = s.value;
                if exact.is_some() || cuts >= CUT_LIMIT || !model.cut(&s.x, tol.feas_tol)? {
                    break;
                }
                cuts += 1;
            }
            if value.abs() >= search_radius * (1.0 - 1e-9) {
                return Err(Error::Precondition(format!(
                    "sublevel set is not bounded inside the search box of radius {search_radius}"
                )));
            }
            match sense {
                Sense::Minimize => lower[k] = value,
                Sense::Maximize => upper[k] = value,
            }
        }
    }
    Ok(SublevelBounds { lower, upper })
}

/// `d(x, L(f))` in the Euclidean norm with the nearest point. Max-affine:
/// polyhedral projection. Otherwise the projection onto a cutting-plane
/// model, refined at the projected point until it satisfies `f ≤ feas_tol`.
pub fn dist_to_sublevel(
    x: &[f64],
    f: &ConvexFunction,
    search_radius: f64,
    tol: &ToleranceConfig,
) -> Result<(f64, Vec<f64>)> {
    check_dim(f.dim(), x.len())?;
    if f.eval(x) <= tol.feas_tol {
        return Ok((0.0, x.to_vec()));
    }
    if let Ok(p) = sublevel_polyhedron(f) {
        let pr = project_polyhedron(x, &p, Norm::L2, tol)?;
        return Ok((pr.dist, pr.point));
    }
    let radius = search_radius.max(2.0 * Norm::Linf.eval(x));
    let mut model = CutModel::new(f, radius);
    model.cut(x, tol.feas_tol)?;
    for _ in 0..CUT_LIMIT {
        let pr = project_polyhedron(x, &model.polyhedron()?, Norm::L2, tol)?;
        if !model.cut(&pr.point, tol.feas_tol)? {
            return Ok((pr.dist, pr.point));
        }
    }
    Err(Error::NonConvergence { iterations: CUT_LIMIT, best_bound: f64::NAN })
}

/// Coefficient points `(a, a′z - f(z))`, `a` a generator of `∂f(z)`, over
/// the given points `z`.
pub fn linearize_at_points(f: &ConvexFunction, pts: &[Vec<f64>], tol: &ToleranceConfig) -> Result<LinearSystem> {
    if pts.is_empty() {
        return Err(Error::Empty("linearization grid"));
    }
    let mut rows = Vec::new();
    for z in pts {
        check_dim(f.dim(), z.len())?;
        if let Some(pieces) = f.as_max_affine() {
            let top = f.eval(z);
            for p in pieces.iter().filter(|p| top - p.eval(z) <= tol.active_tol) {
                rows.push((p.c.clone(), -p.d));
            }
        } else {
            let v = f.eval(z);
            for a in subdiff_generators(f, z, tol)?.into_points() {
                let b = dot(&a, z) - v;
                rows.push((a, b));
            }
        }
    }
    LinearSystem::from_rows(&rows, Norm::L2)
}

/// Linearization of `f ≤ 0` over `region`. For max-affine `f` the points
/// are `(cⱼ, -dⱼ)` for the pieces maximal somewhere in the region (exact);
/// otherwise the region's grid is sampled.
pub fn linearize(
    f: &ConvexFunction,
    region: &BoxRegion,
    grid_per_axis: usize,
    tol: &ToleranceConfig,
) -> Result<LinearSystem> {
    check_dim(f.dim(), region.dim())?;
    if grid_per_axis == 0 {
        return Err(Error::Empty("linearization grid"));
    }
    if let Some(pieces) = f.as_max_affine() {
        let rows: Vec<(Vec<f64>, f64)> = pieces_active_in_box(pieces, region, tol)?
            .into_iter()
            .map(|j| (pieces[j].c.clone(), -pieces[j].d))
            .collect();
        return LinearSystem::from_rows(&rows, Norm::L2);
    }
    linearize_at_points(f, &region.grid(grid_per_axis), tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct Kappa0Report {
    pub kappa0: ExtReal,
    pub e0: BoxRegion,
    pub system: LinearSystem,
    pub report: ModulusReport,
}

/// `κ₀ = (‖x₀‖ + 1) / d(0, C_{U₀})` with `U₀` the linearization of `f₀` over
/// `E₀` (grid nodes plus `x₀`), Euclidean norm.
pub fn kappa0(inst: &ConvexInstance, tol: &ToleranceConfig) -> Result<Kappa0Report> {
    let bounds = inst.validate(tol)?;
    let e0 = bounds.enlarged(inst.alpha0)?;
    let system = if inst.f0.as_max_affine().is_some() {
        linearize(&inst.f0, &e0, inst.grid_per_axis, tol)?
    } else {
        let mut pts = e0.grid(inst.grid_per_axis);
        pts.push(inst.x0.clone());
        linearize_at_points(&inst.f0, &pts, tol)?
    };
    let report = lipschitz_modulus(&system, &inst.x0, tol)?;
    Ok(Kappa0Report { kappa0: report.modulus, e0, system, report })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlaterMargin {
    /// Minimum of `f₀` over the grid; negative certifies a Slater point.
    pub margin: f64,
    pub witness: Vec<f64>,
}

pub fn slater_margin(f0: &ConvexFunction, search_box: &BoxRegion, grid_per_axis: usize) -> Result<SlaterMargin> {
    check_dim(f0.dim(), search_box.dim())?;
    let mut best = (f64::INFINITY, Vec::new());
    for z in search_box.grid(grid_per_axis) {
        let v = f0.eval(&z);
        if v < best.0 {
            best = (v, z);
        }
    }
    Ok(SlaterMargin { margin: best.0, witness: best.1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct SafeRadius {
    /// `min f₀` on the boundary of `L(f₀) + ½α₀𝔹`.
    pub m: f64,
    pub eta: f64,
    pub argmin: Vec<f64>,
}

/// `η = m/4`. The boundary of `L(f₀) + ½α₀𝔹` is traced along rays from
/// `x₀` by bisection on `d(·, L(f₀)) = α₀/2`; in one dimension the two
/// endpoints are exact.
pub fn safe_radius(inst: &ConvexInstance, tol: &ToleranceConfig) -> Result<SafeRadius> {
    let bounds = inst.validate(tol)?;
    let r = 0.5 * inst.alpha0;
    let n = inst.x0.len();
    let candidates: Vec<Vec<f64>> = if n == 1 {
        vec![vec![bounds.lower[0] - r], vec![bounds.upper[0] + r]]
    } else {
        boundary_trace(inst, &bounds, r, tol)?
    };
    let mut best = (f64::INFINITY, Vec::new());
    for z in candidates {
        let v = inst.f0.eval(&z);
        if v < best.0 {
            best = (v, z);
        }
    }
    if best.0 <= tol.solver_tol {
        return Err(Error::Degenerate(format!("boundary minimum m = {} is not positive", best.0)));
    }
    Ok(SafeRadius { m: best.0, eta: best.0 / 4.0, argmin: best.1 })
}

fn boundary_trace(inst: &ConvexInstance, bounds: &SublevelBounds, r: f64, tol: &ToleranceConfig) -> Result<Vec<Vec<f64>>> {
    let n = inst.x0.len();
    let reach = bounds.diameter() + 2.0 * r + 1.0;
    let hit = |u: &[f64]| -> Result<Vec<f64>> {
        let at = |t: f64| -> Vec<f64> { inst.x0.iter().zip(u).map(|(x, d)| x + t * d).collect() };
        let (mut lo, mut hi) = (0.0, reach);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let d = dist_to_sublevel(&at(mid), &inst.f0, inst.search_radius, tol)?.0;
            if d < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(at(0.5 * (lo + hi)))
    };
    let mut out = Vec::new();
    if n == 2 {
        let m = 720;
        let dir = |th: f64| vec![th.cos(), th.sin()];
        let step = std::f64::consts::TAU / m as f64;
        let mut vals = Vec::with_capacity(m);
        for i in 0..m {
            let p = hit(&dir(step * i as f64))?;
            vals.push(inst.f0.eval(&p));
            out.push(p);
        }
        // golden-section refinement around the best direction
        let i0 = (0..m).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
        let (mut a, mut b) = (step * (i0 as f64 - 1.0), step * (i0 as f64 + 1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            let (pc, pd) = (hit(&dir(c))?, hit(&dir(d))?);
            if inst.f0.eval(&pc) < inst.f0.eval(&pd) {
                b = d;
                out.push(pc);
            } else {
                a = c;
                out.push(pd);
            }
        }
    } else {
        let cube = BoxRegion::cube(vec![0.0; n], 1.0)?;
        for p in cube.grid(9) {
            if p.iter().any(|v| v.abs() == 1.0) {
                let norm = Norm::L2.eval(&p);
                let u: Vec<f64> = p.iter().map(|v| v / norm).collect();
                out.push(hit(&u)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapBound {
    pub lhs: f64,
    pub rhs: f64,
    pub rho: f64,
    pub subdiff_distance: f64,
    pub function_distance: DkMeasure,
    pub holds: bool,
}

/// `d_H(U₁, U₂) ≤ ρ·d_H(∂f₁(K₁), ∂f₂(K₂)) + d_{K₁∪K₂}(f₁, f₂)` with `Uᵢ`
/// the linearization of `fᵢ` over `Kᵢ`.
pub fn gap_bound_check(
    f1: &ConvexFunction,
    f2: &ConvexFunction,
    k1: &BoxRegion,
    k2: &BoxRegion,
    grid_per_axis: usize,
    tol: &ToleranceConfig,
) -> Result<GapBound> {
    check_dim(f1.dim(), f2.dim())?;
    let u1 = linearize(f1, k1, grid_per_axis, tol)?;
    let u2 = linearize(f2, k2, grid_per_axis, tol)?;
    let lhs = hausdorff(u1.coeffs(), u2.coeffs(), Metric::Coeff(Norm::L2))?;
    let s1 = subdiff_image(f1, k1, grid_per_axis, tol)?;
    let s2 = subdiff_image(f2, k2, grid_per_axis, tol)?;
    let xi = hausdorff(&s1, &s2, Metric::Dual(Norm::L2))?;
    let cover = k1.hull(k2)?;
    let rho = cover.rho();
    let dk = if f1.as_max_affine().is_some() && f2.as_max_affine().is_some() {
        dk_distance(f1, f2, &cover, grid_per_axis, tol)?
    } else {
        // the sampled sets only see the two grids
        let mut pts = k1.grid(grid_per_axis);
        pts.extend(k2.grid(grid_per_axis));
        DkMeasure { value: crate::convexfn::sup_distance_on_points(f1, f2, &pts), exact: false }
    };
    let rhs = rho * xi + dk.value;
    let holds = lhs <= rhs + tol.active_tol * rho + tol.feas_tol;
    Ok(GapBound { lhs, rhs, rho, subdiff_distance: xi, function_distance: dk, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Holds,
    Violated,
    HypothesisNotMet,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexCheck {
    pub status: CheckStatus,
    pub lhs: ExtReal,
    pub rhs: f64,
    pub rho: f64,
    pub kappa: f64,
    pub kappa0: ExtReal,
    pub delta: f64,
    /// `min(η, α²)`, the gate used for `δ`.
    pub delta0: f64,
    pub subdiff_distance: f64,
    pub function_distance: DkMeasure,
    pub violations: Vec<String>,
}

/// Quantities of an instance shared by every Lipschitz check on it.
#[derive(Debug, Clone)]
pub struct ConvexContext {
    pub inst: ConvexInstance,
    pub bounds: SublevelBounds,
    pub kappa0: ExtReal,
    pub eta: f64,
    /// `E = E₀ + α𝔹` as a box.
    pub e: BoxRegion,
    pub rho: f64,
}

impl ConvexContext {
    pub fn new(inst: &ConvexInstance, tol: &ToleranceConfig) -> Result<Self> {
        let bounds = inst.validate(tol)?;
        let k0 = kappa0(inst, tol)?;
        let eta = safe_radius(inst, tol)?.eta;
        let e = bounds.enlarged(inst.alpha0 + inst.alpha)?;
        let rho = e.rho();
        Ok(ConvexContext { inst: inst.clone(), bounds, kappa0: k0.kappa0, eta, e, rho })
    }

    pub fn delta0(&self) -> f64 {
        self.eta.min(self.inst.alpha * self.inst.alpha)
    }

    /// Checks `d(x₁, L(f₂)) ≤ κ(ρ·d_H(∂f₁(E₀+√δ𝔹), ∂f₂(E₀+√δ𝔹)) + d_E(f₁, f₂))`.
    /// With `differentiable` (allowed for differentiable `f₀`) the images are
    /// taken over `E₀` itself.
    #[allow(clippy::too_many_arguments)]
    pub fn lipschitz_check(
        &self,
        kappa: f64,
        f1: &ConvexFunction,
        f2: &ConvexFunction,
        x1: &[f64],
        delta: f64,
        differentiable: bool,
        tol: &ToleranceConfig,
    ) -> Result<ConvexCheck> {
        let n = self.inst.x0.len();
        check_dim(n, f1.dim())?;
        check_dim(n, f2.dim())?;
        check_dim(n, x1.len())?;
        let g = self.inst.grid_per_axis;
        let mut violations = Vec::new();
        if !(ExtReal(kappa) > self.kappa0) {
            violations.push(format!("kappa {kappa} does not exceed kappa0 {}", self.kappa0.0));
        }
        if !(delta > 0.0) {
            violations.push("delta must be positive".into());
        } else if delta > self.delta0() {
            violations.push(format!("delta {delta} exceeds the gate min(eta, alpha^2) = {}", self.delta0()));
        }
        for (name, f) in [("f1", f1), ("f2", f2)] {
            let d = dk_distance(f, &self.inst.f0, &self.e, g, tol)?;
            if !d.certifies(delta) {
                violations.push(format!("d_E({name}, f0) = {} not certified <= {delta}", d.value));
            }
        }
        let moved = Norm::L2.eval(&x1.iter().zip(&self.inst.x0).map(|(a, b)| a - b).collect::<Vec<_>>());
        if moved > delta * (1.0 + 1e-12) {
            violations.push(format!("|x1 - x0| = {moved} exceeds delta"));
        }
        let v1 = f1.eval(x1);
        if v1 > tol.feas_tol {
            violations.push(format!("f1(x1) = {v1} > 0"));
        }
        if differentiable && !self.inst.f0.is_differentiable() {
            violations.push("the differentiable variant needs a differentiable f0".into());
        }

        let image_box = if differentiable {
            self.bounds.enlarged(self.inst.alpha0)?
        } else {
            self.bounds.enlarged(self.inst.alpha0 + delta.max(0.0).sqrt())?
        };
        let s1 = subdiff_image(f1, &image_box, g, tol)?;
        let s2 = subdiff_image(f2, &image_box, g, tol)?;
        let xi = hausdorff(&s1, &s2, Metric::Dual(Norm::L2))?;
        let de = dk_distance(f1, f2, &self.e, g, tol)?;
        let rhs = kappa * (self.rho * xi + de.value);
        let lhs = match dist_to_sublevel(x1, f2, self.inst.search_radius, tol) {
            Ok((d, _)) => d,
            Err(Error::Infeasible(_)) | Err(Error::Precondition(_)) => {
                violations.push("L(f2) is empty".into());
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        let status = if !violations.is_empty() {
            CheckStatus::HypothesisNotMet
        } else if lhs <= rhs + tol.feas_tol + tol.solver_tol {
            CheckStatus::Holds
        } else {
            CheckStatus::Violated
        };
        Ok(ConvexCheck {
            status,
            lhs: ExtReal(lhs),
            rhs,
            rho: self.rho,
            kappa,
            kappa0: self.kappa0,
            delta,
            delta0: self.delta0(),
            subdiff_distance: xi,
            function_distance: de,
            violations,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn convex_lipschitz_check(
    inst: &ConvexInstance,
    kappa: f64,
    f1: &ConvexFunction,
    f2: &ConvexFunction,
    x1: &[f64],
    delta: f64,
    differentiable: bool,
    tol: &ToleranceConfig,
) -> Result<ConvexCheck> {
    ConvexContext::new(inst, tol)?.lipschitz_check(kappa, f1, f2, x1, delta, differentiable, tol)
}
