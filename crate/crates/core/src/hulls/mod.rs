//! Finite-set geometry and the small solvers everything else rests on:
//! excess / Hausdorff distance between clouds, metric projection onto a
//! cloud, nearest point of a polytope, a dense simplex LP solver and
//! projection onto polyhedra.

mod cloud;
mod lp;
mod mnp;
mod polyhedron;

use serde::{Deserialize, Serialize};

pub use cloud::{excess, hausdorff, inclusion_within, project_to_cloud, InclusionCheck, PointCloud};
pub use lp::{solve_lp, Cmp, LinearProgram, LpSolution, LpStatus, Sense};
pub use mnp::{min_norm_point, MinNormPoint};
pub use polyhedron::{
    polyhedron_vertices, project_polyhedron, Halfspace, Polyhedron, Projection,
};

/// Working thresholds shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Largest constraint violation still counted as feasible.
    pub feas_tol: f64,
    /// Slack below which a constraint (or max-affine piece) is active.
    pub active_tol: f64,
    /// Convergence threshold of the iterative solvers.
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            feas_tol: 1e-9,
            active_tol: 1e-7,
            solver_tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.feas_tol > 0.0
            && self.active_tol > 0.0
            && self.solver_tol > 0.0
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Invalid("tolerances must be positive".into()))
        }
    }
}
