use serde::{Deserialize, Serialize};

use super::{min_norm_point, ToleranceConfig};
use crate::error::{check_dim, Error, Result};
use crate::norms::{Metric, Norm};

/// A nonempty finite set of points of a common dimension.
///
/// Exact duplicates are dropped on construction; the first occurrence keeps
/// its position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("point cloud"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            check_dim(dim, p.len())?;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("non-finite coordinate in point cloud".into()));
            }
            if !kept.contains(&p) {
                kept.push(p);
            }
        }
        Ok(PointCloud { dim, points: kept })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.points.iter().any(|q| q.as_slice() == p)
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    /// Union with `other`, keeping this cloud's order first.
    pub fn union(&self, other: &PointCloud) -> Result<PointCloud> {
        check_dim(self.dim, other.dim)?;
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        PointCloud::new(pts)
    }

    /// Distance from `t` to the cloud and the index of the selected nearest
    /// point (lexicographically smallest among exact ties).
    pub fn nearest(&self, t: &[f64], metric: Metric) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = metric.dist(t, p);
            let better = d < best_d
                || (d == best_d && lex_cmp(p, &self.points[best]) == std::cmp::Ordering::Less);
            if better {
                best = i;
                best_d = d;
            }
        }
        (best, best_d)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bare(Vec<Vec<f64>>),
            Tagged { points: Vec<Vec<f64>> },
        }
        let pts = match Repr::deserialize(d)? {
            Repr::Bare(p) => p,
            Repr::Tagged { points } => points,
        };
        PointCloud::new(pts).map_err(serde::de::Error::custom)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// `e(A, B) = max_{p∈A} min_{q∈B} d(p, q)`.
pub fn excess(a: &PointCloud, b: &PointCloud, metric: Metric) -> Result<f64> {
    check_dim(a.dim, b.dim)?;
    Ok(a.points
        .iter()
        .map(|p| b.nearest(p, metric).1)
        .fold(0.0, f64::max))
}

pub fn hausdorff(a: &PointCloud, b: &PointCloud, metric: Metric) -> Result<f64> {
    Ok(excess(a, b, metric)?.max(excess(b, a, metric)?))
}

/// Metric projection of `t` onto the cloud with lexicographic tie-breaking.
pub fn project_to_cloud(t: &[f64], u: &PointCloud, metric: Metric) -> Result<Vec<f64>> {
    check_dim(u.dim, t.len())?;
    let (i, _) = u.nearest(t, metric);
    Ok(u.points[i].clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionCheck {
    pub holds: bool,
    /// `max_{a∈A} d(a, conv B)`.
    pub worst: f64,
    /// `worst - eps`; nonpositive when the inclusion holds.
    pub margin: f64,
}

/// Checks `A ⊆ conv(B) + eps·𝔹`, distances measured in the dual of `spec`
/// (the sets are gradients).
pub fn inclusion_within(
    a: &PointCloud,
    bgen: &PointCloud,
    eps: f64,
    spec: Norm,
    tol: &ToleranceConfig,
) -> Result<InclusionCheck> {
    check_dim(a.dim, bgen.dim)?;
    let mut worst: f64 = 0.0;
    for p in &a.points {
        let shifted: Vec<Vec<f64>> = bgen
            .points
            .iter()
            .map(|q| q.iter().zip(p).map(|(x, y)| x - y).collect())
            .collect();
        let res = min_norm_point(&PointCloud::new(shifted)?, spec, tol)?;
        worst = worst.max(res.dist);
    }
    Ok(InclusionCheck {
        holds: worst <= eps + tol.solver_tol,
        worst,
        margin: worst - eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(p: &[&[f64]]) -> PointCloud {
        PointCloud::new(p.iter().map(|x| x.to_vec()).collect()).unwrap()
    }

    const C2: Metric = Metric::Coeff(Norm::L2);

    #[test]
    fn excess_examples() {
        let a = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = cloud(&[&[0.0, 0.0]]);
        assert_eq!(excess(&a, &b, C2).unwrap(), 1.0);
        assert_eq!(excess(&b, &a, C2).unwrap(), 0.0);
        assert_eq!(excess(&cloud(&[&[1.0, 2.0]]), &b, C2).unwrap(), 2.0);
        assert!(excess(&a, &cloud(&[&[0.0, 0.0, 1.0]]), C2).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let a = cloud(&[&[0.0, 0.0]]);
        let b = cloud(&[&[1.0, 2.0]]);
        assert_eq!(hausdorff(&a, &b, C2).unwrap(), 2.0);
        assert_eq!(hausdorff(&b, &b, C2).unwrap(), 0.0);
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(hausdorff(&c, &a, C2).unwrap(), 1.0);
    }

    #[test]
    fn projection_examples() {
        // both candidates at coeff distance 1; (0,1) is lexicographically smaller
        let u = cloud(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d: Vec<f64> = u.points().iter().map(|p| C2.dist(&[0.0, 0.0], p)).collect();
        assert_eq!(d, vec![1.0, 1.0]);
        assert_eq!(project_to_cloud(&[0.0, 0.0], &u, C2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(project_to_cloud(&[1.0, 0.0], &u, C2).unwrap(), vec![1.0, 0.0]);
        let v = cloud(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(project_to_cloud(&[5.0, 0.0], &v, C2).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn dedup_and_validation() {
        let u = cloud(&[&[1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        assert_eq!(u.len(), 2);
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![vec![f64::NAN, 0.0]]).is_err());
        assert!(PointCloud::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn inclusion_examples() {
        let tol = ToleranceConfig::default();
        let bgen = cloud(&[&[0.0], &[1.0]]);
        let r = inclusion_within(&cloud(&[&[0.5]]), &bgen, 0.0, Norm::L2, &tol).unwrap();
        assert!(r.holds);
        assert!(r.worst.abs() < 1e-12);
        let r = inclusion_within(&cloud(&[&[2.0]]), &bgen, 0.5, Norm::L2, &tol).unwrap();
        assert!(!r.holds);
        assert!((r.worst - 1.0).abs() < 1e-12);
        let r = inclusion_within(&bgen, &bgen, 0.0, Norm::L2, &tol).unwrap();
        assert!(r.holds);
    }

    fn cloud_strategy(dim: usize) -> impl Strategy<Value = PointCloud> {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..6)
            .prop_map(|p| PointCloud::new(p).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn hausdorff_is_a_metric(a in cloud_strategy(3), b in cloud_strategy(3), c in cloud_strategy(3)) {
            let ab = hausdorff(&a, &b, C2).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a, C2).unwrap());
            let bc = hausdorff(&b, &c, C2).unwrap();
            let ac = hausdorff(&a, &c, C2).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(hausdorff(&a, &a, C2).unwrap(), 0.0);
        }

        #[test]
        fn projection_attains_brute_force(u in cloud_strategy(3), t in prop::collection::vec(-4.0..4.0f64, 3)) {
            let p = project_to_cloud(&t, &u, C2).unwrap();
            let brute = u.points().iter().map(|q| C2.dist(&t, q)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(C2.dist(&t, &p), brute);
        }

        #[test]
        fn zero_excess_iff_subset(a in cloud_strategy(2), b in cloud_strategy(2), take in 0usize..6) {
            let e = excess(&a, &b, C2).unwrap();
            let subset = a.points().iter().all(|p| b.contains(p));
            prop_assert_eq!(e == 0.0, subset);
            // a genuine sub-cloud always has zero excess
            let k = take.min(a.len() - 1) + 1;
            let sub = PointCloud::new(a.points()[..k].to_vec()).unwrap();
            prop_assert_eq!(excess(&sub, &a, C2).unwrap(), 0.0);
        }
    }
}
