//! Finite convex functions with subgradient oracles: pointwise maxima of
//! affine pieces, convex quadratics and sums of these.
//!
//! Also hosts the sampled subdifferential images `∂f(K)` over boxes, the
//! uniform distance `d_K(f₁, f₂) = sup_K |f₁ - f₂|`, and the lower Hölder
//! stability check of subdifferentials.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hulls::{inclusion_within, Cmp, LinearProgram, LpStatus, PointCloud, Sense, ToleranceConfig};
use crate::norms::{dot, Norm};

/// Default number of grid nodes per axis for sampled sups and images.
pub const DEFAULT_GRID: usize = 41;

/// Relative slack demanded of a grid-measured `d_K` before it is accepted as
/// evidence for `d_K ≤ δ` (the grid only bounds the sup from below).
pub const GRID_MARGIN: f64 = 0.1;

const MAX_DEPTH: usize = 4;
const MAX_MINKOWSKI: usize = 10_000;

/// One affine piece `x ↦ c′x + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub c: Vec<f64>,
    pub d: f64,
}

impl Piece {
    pub fn new(c: Vec<f64>, d: f64) -> Self {
        Piece { c, d }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) + self.d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRepr", into = "FunctionRepr")]
pub enum ConvexFunction {
    MaxAffine { pieces: Vec<Piece> },
    /// `½ x′Qx + q′x + r` with `Q` symmetric positive semidefinite.
    Quadratic { q_mat: Vec<Vec<f64>>, q: Vec<f64>, r: f64 },
    Sum { terms: Vec<ConvexFunction> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum FunctionRepr {
    MaxAffine {
        pieces: Vec<Vec<f64>>,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q_mat: Vec<Vec<f64>>,
        q: Vec<f64>,
        #[serde(default)]
        r: f64,
    },
    Sum {
        terms: Vec<ConvexFunction>,
    },
}

impl TryFrom<FunctionRepr> for ConvexFunction {
    type Error = Error;

    fn try_from(r: FunctionRepr) -> Result<Self> {
        match r {
            FunctionRepr::MaxAffine { pieces } => {
                let pieces = pieces
                    .into_iter()
                    .map(|mut p| {
                        let d = p.pop().ok_or(Error::Empty("affine piece"))?;
                        Ok(Piece::new(p, d))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConvexFunction::max_affine(pieces)
            }
            FunctionRepr::Quadratic { q_mat, q, r } => ConvexFunction::quadratic(q_mat, q, r),
            FunctionRepr::Sum { terms } => ConvexFunction::sum(terms),
        }
    }
}

impl From<ConvexFunction> for FunctionRepr {
    fn from(f: ConvexFunction) -> Self {
        match f {
            ConvexFunction::MaxAffine { pieces } => FunctionRepr::MaxAffine {
                pieces: pieces
                    .into_iter()
                    .map(|p| {
                        let mut v = p.c;
                        v.push(p.d);
                        v
                    })
                    .collect(),
            },
            ConvexFunction::Quadratic { q_mat, q, r } => FunctionRepr::Quadratic { q_mat, q, r },
            ConvexFunction::Sum { terms } => FunctionRepr::Sum { terms },
        }
    }
}

impl ConvexFunction {
    pub fn max_affine(pieces: Vec<Piece>) -> Result<Self> {
        let n = pieces.first().ok_or(Error::Empty("max-affine function"))?.c.len();
        if n == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        for p in &pieces {
            check_dim(n, p.c.len())?;
            if !p.d.is_finite() || p.c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("non-finite affine piece".into()));
            }
        }
        Ok(ConvexFunction::MaxAffine { pieces })
    }

    /// Convenience for one-dimensional pieces `(slope, intercept)`.
    pub fn max_affine_1d(pieces: &[(f64, f64)]) -> Result<Self> {
        ConvexFunction::max_affine(pieces.iter().map(|&(c, d)| Piece::new(vec![c], d)).collect())
    }

    pub fn quadratic(q_mat: Vec<Vec<f64>>, q: Vec<f64>, r: f64) -> Result<Self> {
        let n = q.len();
        if n == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        check_dim(n, q_mat.len())?;
        for row in &q_mat {
            check_dim(n, row.len())?;
        }
        let m = DMatrix::from_fn(n, n, |i, j| q_mat[i][j]);
        if (&m - m.transpose()).amax() > 1e-12 {
            return Err(Error::Invalid("quadratic term is not symmetric".into()));
        }
        let min_eig = m.symmetric_eigenvalues().min();
        if min_eig < -1e-9 {
            return Err(Error::Invalid(format!("quadratic term is not PSD (eigenvalue {min_eig})")));
        }
        Ok(ConvexFunction::Quadratic { q_mat, q, r })
    }

    pub fn sum(terms: Vec<ConvexFunction>) -> Result<Self> {
        let n = terms.first().ok_or(Error::Empty("sum of functions"))?.dim();
        for t in &terms {
            check_dim(n, t.dim())?;
        }
        Ok(ConvexFunction::Sum { terms })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFunction::MaxAffine { pieces } => pieces[0].c.len(),
            ConvexFunction::Quadratic { q, .. } => q.len(),
            ConvexFunction::Sum { terms } => terms[0].dim(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ConvexFunction::Sum { terms } => 1 + terms.iter().map(|t| t.depth()).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        match self {
            ConvexFunction::MaxAffine { pieces } => pieces.len() == 1,
            ConvexFunction::Quadratic { .. } => true,
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_differentiable()),
        }
    }

    pub fn as_max_affine(&self) -> Option<&[Piece]> {
        match self {
            ConvexFunction::MaxAffine { pieces } => Some(pieces),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunction::MaxAffine { pieces } => {
                pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
            }
            ConvexFunction::Quadratic { q_mat, q, r } => {
                let qx: f64 = q_mat.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
                0.5 * qx + dot(q, x) + r
            }
            ConvexFunction::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    /// Adds a constant to the function.
    pub fn shifted(&self, delta: f64) -> ConvexFunction {
        match self {
            ConvexFunction::MaxAffine { pieces } => ConvexFunction::MaxAffine {
                pieces: pieces.iter().map(|p| Piece::new(p.c.clone(), p.d + delta)).collect(),
            },
            ConvexFunction::Quadratic { q_mat, q, r } => {
                ConvexFunction::Quadratic { q_mat: q_mat.clone(), q: q.clone(), r: r + delta }
            }
            ConvexFunction::Sum { terms } => {
                let mut terms = terms.clone();
                terms[0] = terms[0].shifted(delta);
                ConvexFunction::Sum { terms }
            }
        }
    }
}

/// Value and one subgradient at `x`. For max-affine functions the gradient
/// of the first maximal piece is returned.
pub fn eval_subgrad(f: &ConvexFunction, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim(f.dim(), x.len())?;
    Ok(subgrad_unchecked(f, x))
}

fn subgrad_unchecked(f: &ConvexFunction, x: &[f64]) -> (f64, Vec<f64>) {
    match f {
        ConvexFunction::MaxAffine { pieces } => {
            let mut best = 0;
            let mut val = f64::NEG_INFINITY;
            for (i, p) in pieces.iter().enumerate() {
                let v = p.eval(x);
                if v > val {
                    val = v;
                    best = i;
                }
            }
            (val, pieces[best].c.clone())
        }
        ConvexFunction::Quadratic { q_mat, q, .. } => {
            let g = q_mat.iter().zip(q).map(|(row, qi)| dot(row, x) + qi).collect();
            (f.eval(x), g)
        }
        ConvexFunction::Sum { terms } => {
            let mut g = vec![0.0; x.len()];
            let mut v = 0.0;
            for t in terms {
                let (tv, tg) = subgrad_unchecked(t, x);
                v += tv;
                g.iter_mut().zip(&tg).for_each(|(a, b)| *a += b);
            }
            (v, g)
        }
    }
}

/// Points whose convex hull is `∂f(x)`: the gradients of pieces within
/// `active_tol` of the max, `Qx + q` for quadratics, Minkowski sums for sums.
pub fn subdiff_generators(f: &ConvexFunction, x: &[f64], tol: &ToleranceConfig) -> Result<PointCloud> {
    check_dim(f.dim(), x.len())?;
    if f.depth() > MAX_DEPTH {
        return Err(Error::Invalid(format!("sum nesting deeper than {MAX_DEPTH}")));
    }
    PointCloud::new(generators(f, x, tol))
}

fn generators(f: &ConvexFunction, x: &[f64], tol: &ToleranceConfig) -> Vec<Vec<f64>> {
    match f {
        ConvexFunction::MaxAffine { pieces } => {
            let vals: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
            let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            pieces
                .iter()
                .zip(&vals)
                .filter(|(_, v)| top - **v <= tol.active_tol)
                .map(|(p, _)| p.c.clone())
                .collect()
        }
        ConvexFunction::Quadratic { .. } => vec![subgrad_unchecked(f, x).1],
        ConvexFunction::Sum { terms } => {
            let mut acc: Vec<Vec<f64>> = vec![vec![0.0; x.len()]];
            for t in terms {
                let g = generators(t, x, tol);
                let mut next = Vec::with_capacity(acc.len() * g.len());
                'outer: for a in &acc {
                    for b in &g {
                        let s: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + v).collect();
                        if !next.contains(&s) {
                            next.push(s);
                        }
                        if next.len() >= MAX_MINKOWSKI {
                            break 'outer;
                        }
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Axis-aligned box `center ± half_widths`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl BoxRegion {
    pub fn new(center: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), half_widths.len())?;
        if center.is_empty() {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        if half_widths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Invalid("box half-widths must be positive".into()));
        }
        Ok(BoxRegion { center, half_widths })
    }

    pub fn cube(center: Vec<f64>, half_width: f64) -> Result<Self> {
        let n = center.len();
        BoxRegion::new(center, vec![half_width; n])
    }

    /// Box with the given lower / upper corners.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let center = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        BoxRegion::new(center, half)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_widths).map(|(c, h)| c - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.half_widths).map(|(c, h)| c + h).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lower().into_iter().zip(self.upper()).collect()
    }

    /// The box grown by `r` in every direction (contains the Euclidean
    /// `r`-enlargement).
    pub fn inflate(&self, r: f64) -> BoxRegion {
        BoxRegion {
            center: self.center.clone(),
            half_widths: self.half_widths.iter().map(|h| h + r).collect(),
        }
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &BoxRegion) -> Result<BoxRegion> {
        check_dim(self.dim(), other.dim())?;
        let lo: Vec<f64> = self.lower().iter().zip(other.lower()).map(|(a, b)| a.min(b)).collect();
        let hi: Vec<f64> = self.upper().iter().zip(other.upper()).map(|(a, b)| a.max(b)).collect();
        BoxRegion::from_bounds(&lo, &hi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower().iter().zip(self.upper()))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= hi)
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| {
                        let s = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
                        self.center[k] + s * self.half_widths[k]
                    })
                    .collect()
            })
            .collect()
    }

    /// `per_axis` equally spaced nodes per coordinate, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| {
                let lo = self.center[k] - self.half_widths[k];
                let step = 2.0 * self.half_widths[k] / (per_axis - 1) as f64;
                (0..per_axis)
                    .map(|i| if i == per_axis - 1 { self.center[k] + self.half_widths[k] } else { lo + step * i as f64 })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for p in &out {
                for v in axis {
                    let mut q: Vec<f64> = p.clone();
                    q.push(*v);
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// `max {1 + ‖x‖₂ : x ∈ box}`, attained at a corner.
    pub fn rho(&self) -> f64 {
        self.corners().iter().map(|c| 1.0 + Norm::L2.eval(c)).fold(0.0, f64::max)
    }
}

/// `max |f₁ - f₂|` over the grid of `k` (a lower bound of `d_K`).
pub fn sup_distance_on_box(f1: &ConvexFunction, f2: &ConvexFunction, k: &BoxRegion, grid_per_axis: usize) -> f64 {
    sup_distance_on_points(f1, f2, &k.grid(grid_per_axis))
}

pub fn sup_distance_on_points(f1: &ConvexFunction, f2: &ConvexFunction, pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|z| (f1.eval(z) - f2.eval(z)).abs()).fold(0.0, f64::max)
}

/// A measured value of `d_K(f₁, f₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DkMeasure {
    pub value: f64,
    /// True when computed exactly (max-affine pairs), false for a grid
    /// lower bound.
    pub exact: bool,
}

impl DkMeasure {
    /// Whether this measurement certifies `d_K ≤ delta`. Grid values must
    /// clear the bound with relative margin [`GRID_MARGIN`].
    pub fn certifies(&self, delta: f64) -> bool {
        if self.exact {
            self.value <= delta * (1.0 + 1e-12) + 1e-15
        } else {
            self.value <= delta * (1.0 - GRID_MARGIN)
        }
    }
}

/// `d_K(f₁, f₂)`: exact by LP when both functions are max-affine, otherwise
/// the grid maximum.
pub fn dk_distance(
    f1: &ConvexFunction,
    f2: &ConvexFunction,
    k: &BoxRegion,
    grid_per_axis: usize,
    tol: &ToleranceConfig,
) -> Result<DkMeasure> {
    check_dim(f1.dim(), f2.dim())?;
    check_dim(f1.dim(), k.dim())?;
    if let (Some(p1), Some(p2)) = (f1.as_max_affine(), f2.as_max_affine()) {
        let a = sup_difference(p1, p2, k, tol)?;
        let b = sup_difference(p2, p1, k, tol)?;
        let grid = sup_distance_on_box(f1, f2, k, grid_per_axis);
        return Ok(DkMeasure { value: a.max(b).max(grid), exact: true });
    }
    Ok(DkMeasure { value: sup_distance_on_box(f1, f2, k, grid_per_axis), exact: false })
}

/// `sup_{z∈K} (max_j pⱼ(z) - max_k qₖ(z))`, one LP per piece of `p`.
fn sup_difference(p: &[Piece], q: &[Piece], k: &BoxRegion, tol: &ToleranceConfig) -> Result<f64> {
    let n = k.dim();
    let mut best = f64::NEG_INFINITY;
    for pj in p {
        // variables z (n), t; maximize cⱼ′z + dⱼ - t, t ≥ qₖ(z)
        let mut lp = LinearProgram::new(n + 1, Sense::Maximize);
        let mut obj = pj.c.clone();
        obj.push(-1.0);
        lp.set_objective(obj)?;
        for qk in q {
            let mut row = qk.c.clone();
            row.push(-1.0);
            lp.add_row(row, Cmp::Le, -qk.d)?;
        }
        for (i, (lo, hi)) in k.bounds().into_iter().enumerate() {
            lp.set_bounds(i, Some(lo), Some(hi));
        }
        let s = lp.solve(tol)?;
        if s.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("d_K LP ended with {:?}", s.status)));
        }
        best = best.max(s.value + pj.d);
    }
    Ok(best)
}

/// Generators of `∂f(K)`. Exact for max-affine functions (gradients of the
/// pieces that are maximal somewhere in `K`), otherwise the union of
/// generator sets at the grid nodes.
pub fn subdiff_image(f: &ConvexFunction, k: &BoxRegion, grid_per_axis: usize, tol: &ToleranceConfig) -> Result<PointCloud> {
    check_dim(f.dim(), k.dim())?;
    if let Some(pieces) = f.as_max_affine() {
        let idx = pieces_active_in_box(pieces, k, tol)?;
        return PointCloud::new(idx.into_iter().map(|j| pieces[j].c.clone()).collect());
    }
    subdiff_image_on_points(f, &k.grid(grid_per_axis), tol)
}

/// Indices of the pieces attaining the max at some point of `k`.
pub fn pieces_active_in_box(pieces: &[Piece], k: &BoxRegion, tol: &ToleranceConfig) -> Result<Vec<usize>> {
    check_dim(pieces[0].c.len(), k.dim())?;
    let n = k.dim();
    let mut out = Vec::new();
    for (j, pj) in pieces.iter().enumerate() {
        let mut lp = LinearProgram::new(n, Sense::Minimize);
        for (i, pk) in pieces.iter().enumerate() {
            if i == j {
                continue;
            }
            let row: Vec<f64> = pk.c.iter().zip(&pj.c).map(|(a, b)| a - b).collect();
            lp.add_row(row, Cmp::Le, pj.d - pk.d)?;
        }
        for (i, (lo, hi)) in k.bounds().into_iter().enumerate() {
            lp.set_bounds(i, Some(lo), Some(hi));
        }
        if lp.solve(tol)?.status == LpStatus::Optimal {
            out.push(j);
        }
    }
    Ok(out)
}

pub fn subdiff_image_on_points(f: &ConvexFunction, pts: &[Vec<f64>], tol: &ToleranceConfig) -> Result<PointCloud> {
    let mut all = Vec::new();
    for z in pts {
        all.extend(subdiff_generators(f, z, tol)?.into_points());
    }
    PointCloud::new(all)
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderCheck {
    pub holds: bool,
    /// `max_{a ∈ ∂f₁(x₀)} d(a, conv ∂f₂(x₀ + √δ·box))`.
    pub worst: f64,
    /// The allowed enlargement `4√δ`.
    pub eps: f64,
    pub margin: f64,
    pub dk: DkMeasure,
}

/// Checks `∂f₁(x₀) ⊂ ∂f₂(x₀ + √δ𝔹) + 4√δ𝔹` for `0 < δ ≤ α²` and
/// `d_K(f₁, f₂) ≤ δ` on `K = x₀ + α𝔹`.
///
/// Balls are replaced by boxes of the same half-width, which enlarges the
/// sampled image of `f₂` (conservative for the inclusion). Hypothesis
/// failures are returned as [`Error::Precondition`].
pub fn holder_stability_check(
    f1: &ConvexFunction,
    f2: &ConvexFunction,
    x0: &[f64],
    alpha: f64,
    delta: f64,
    grid_per_axis: usize,
    tol: &ToleranceConfig,
) -> Result<HolderCheck> {
    check_dim(f1.dim(), x0.len())?;
    check_dim(f2.dim(), x0.len())?;
    if !(alpha > 0.0) || !(delta > 0.0) {
        return Err(Error::Invalid("alpha and delta must be positive".into()));
    }
    if delta > alpha * alpha {
        return Err(Error::Precondition(format!("delta {delta} exceeds alpha^2 = {}", alpha * alpha)));
    }
    let k = BoxRegion::cube(x0.to_vec(), alpha)?;
    let dk = dk_distance(f1, f2, &k, grid_per_axis, tol)?;
    if !dk.certifies(delta) {
        return Err(Error::Precondition(format!(
            "d_K(f1, f2) = {} ({}) does not certify d_K <= {delta}",
            dk.value,
            if dk.exact { "exact" } else { "grid" }
        )));
    }
    let root = delta.sqrt();
    let a = subdiff_generators(f1, x0, tol)?;
    let bgen = subdiff_image(f2, &BoxRegion::cube(x0.to_vec(), root)?, grid_per_axis, tol)?;
    let eps = 4.0 * root;
    let inc = inclusion_within(&a, &bgen, eps, Norm::L2, tol)?;
    Ok(HolderCheck { holds: inc.holds, worst: inc.worst, eps, margin: inc.margin, dk })
}
