//! Indexations of coefficient sets by a sampled index set `T′ ⊂ ℝⁿ⁺¹`.
//!
//! An indexation `σ` of `U` maps each index `t` to a point of `U`. Two
//! constructions are provided: the calmness indexation `I_U`, which pins the
//! second set at the nominal one, and the pair indexation `(σ₁, σ₂)` whose
//! supremum distance equals the Hausdorff distance of the two sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::hulls::{hausdorff, project_to_cloud, PointCloud};
use crate::norms::{Metric, Norm};

/// Values of an indexation on a finite index sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexedFamily {
    pub index_sample: PointCloud,
    pub values: Vec<Vec<f64>>,
}

impl IndexedFamily {
    /// The set of values taken on the sample.
    pub fn range(&self) -> PointCloud {
        PointCloud::new(self.values.clone()).expect("values of a nonempty sample")
    }
}

fn same_dim(clouds: &[&PointCloud]) -> Result<()> {
    let d = clouds[0].dim();
    clouds.iter().try_for_each(|c| check_dim(d, c.dim()))
}

/// `I_U(t) = t` if `t ∈ U`, otherwise `P_U(P_{U₀}(t))`.
pub fn calmness_indexation(
    u: &PointCloud,
    u0: &PointCloud,
    sample: &PointCloud,
    spec: Norm,
) -> Result<IndexedFamily> {
    same_dim(&[u, u0, sample])?;
    let metric = Metric::Coeff(spec);
    let values = sample
        .points()
        .iter()
        .map(|t| {
            if u.contains(t) {
                Ok(t.clone())
            } else {
                project_to_cloud(&project_to_cloud(t, u0, metric)?, u, metric)
            }
        })
        .collect::<Result<_>>()?;
    Ok(IndexedFamily { index_sample: sample.clone(), values })
}

/// The nominal indexation `σ₀ = P_{U₀}`.
pub fn projection_family(u0: &PointCloud, sample: &PointCloud, spec: Norm) -> Result<IndexedFamily> {
    same_dim(&[u0, sample])?;
    let values = sample
        .points()
        .iter()
        .map(|t| project_to_cloud(t, u0, Metric::Coeff(spec)))
        .collect::<Result<_>>()?;
    Ok(IndexedFamily { index_sample: sample.clone(), values })
}

/// Distance-preserving pair of indexations of `U₁` and `U₂`:
///
/// * on `U₁ ∪ U₂`: `σ₁ = P₁`, `σ₂ = P₂` (each fixes its own set);
/// * elsewhere: `σ₁ = P₁∘P₀`, `σ₂ = P₂∘P₁∘P₀`.
pub fn pair_indexation(
    u1: &PointCloud,
    u2: &PointCloud,
    u0: &PointCloud,
    sample: &PointCloud,
    spec: Norm,
) -> Result<(IndexedFamily, IndexedFamily)> {
    same_dim(&[u1, u2, u0, sample])?;
    let covered = u1
        .points()
        .iter()
        .chain(u2.points())
        .all(|p| sample.contains(p));
    if !covered {
        return Err(Error::Precondition("index sample must contain U1 ∪ U2".into()));
    }
    let m = Metric::Coeff(spec);
    let mut v1 = Vec::with_capacity(sample.len());
    let mut v2 = Vec::with_capacity(sample.len());
    for t in sample.points() {
        if u1.contains(t) || u2.contains(t) {
            v1.push(project_to_cloud(t, u1, m)?);
            v2.push(project_to_cloud(t, u2, m)?);
        } else {
            let s1 = project_to_cloud(&project_to_cloud(t, u0, m)?, u1, m)?;
            v2.push(project_to_cloud(&s1, u2, m)?);
            v1.push(s1);
        }
    }
    Ok((
        IndexedFamily { index_sample: sample.clone(), values: v1 },
        IndexedFamily { index_sample: sample.clone(), values: v2 },
    ))
}

/// Chebyshev distance `max_t ‖σ₁(t) - σ₂(t)‖` over the shared sample.
pub fn sup_distance(f1: &IndexedFamily, f2: &IndexedFamily, spec: Norm) -> Result<f64> {
    if f1.index_sample != f2.index_sample {
        return Err(Error::Invalid("indexed families use different index samples".into()));
    }
    let m = Metric::Coeff(spec);
    Ok(f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(a, b)| m.dist(a, b))
        .fold(0.0, f64::max))
}

/// `count` points drawn uniformly from the box twice the size of the
/// clouds' joint bounding box (same center).
pub fn exterior_samples(clouds: &[&PointCloud], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    same_dim(clouds)?;
    let d = clouds[0].dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in clouds.iter().flat_map(|c| c.points()) {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            (0..d)
                .map(|k| {
                    let c = 0.5 * (lo[k] + hi[k]);
                    let h = (hi[k] - lo[k]).max(1.0);
                    c + h * rng.random_range(-1.0..=1.0)
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexationCheck {
    /// `d∞(σ₁, σ₂)` of the pair indexation.
    pub pair_sup: f64,
    pub d_h_12: f64,
    /// `max(d∞(σ₁, σ₀), d∞(σ₂, σ₀))`.
    pub nominal_sup: f64,
    /// `3·max(d_H(U₁, U₀), d_H(U₂, U₀))`.
    pub nominal_bound: f64,
    /// `d∞(I_{U₁}, I_{U₀})`.
    pub calm_sup: f64,
    pub d_h_10: f64,
    /// `d_H` of the value ranges of `σ₁, σ₂`.
    pub range_distance: f64,
    pub pair_identity: bool,
    pub nominal_bound_holds: bool,
    pub calm_identity: bool,
    pub range_dominated: bool,
}

impl IndexationCheck {
    pub fn holds(&self) -> bool {
        self.pair_identity && self.nominal_bound_holds && self.calm_identity && self.range_dominated
    }
}

/// Evaluates the indexation identities on `T′ = U₀ ∪ U₁ ∪ U₂` plus
/// `exterior` seeded exterior points.
pub fn indexation_check(
    u0: &PointCloud,
    u1: &PointCloud,
    u2: &PointCloud,
    exterior: usize,
    seed: u64,
    spec: Norm,
    tol: f64,
) -> Result<IndexationCheck> {
    same_dim(&[u0, u1, u2])?;
    let mut t = u0.union(u1)?.union(u2)?.into_points();
    t.extend(exterior_samples(&[u0, u1, u2], exterior, seed)?);
    let sample = PointCloud::new(t)?;
    let m = Metric::Coeff(spec);
    let (s1, s2) = pair_indexation(u1, u2, u0, &sample, spec)?;
    let s0 = projection_family(u0, &sample, spec)?;
    let pair_sup = sup_distance(&s1, &s2, spec)?;
    let d_h_12 = hausdorff(u1, u2, m)?;
    let nominal_sup = sup_distance(&s1, &s0, spec)?.max(sup_distance(&s2, &s0, spec)?);
    let nominal_bound = 3.0 * hausdorff(u1, u0, m)?.max(hausdorff(u2, u0, m)?);
    let calm_sup = sup_distance(
        &calmness_indexation(u1, u0, &sample, spec)?,
        &calmness_indexation(u0, u0, &sample, spec)?,
        spec,
    )?;
    let d_h_10 = hausdorff(u1, u0, m)?;
    let range_distance = hausdorff(&s1.range(), &s2.range(), m)?;
    Ok(IndexationCheck {
        pair_sup,
        d_h_12,
        nominal_sup,
        nominal_bound,
        calm_sup,
        d_h_10,
        range_distance,
        pair_identity: (pair_sup - d_h_12).abs() <= tol,
        nominal_bound_holds: nominal_sup <= nominal_bound + tol,
        calm_identity: (calm_sup - d_h_10).abs() <= tol,
        range_dominated: range_distance <= pair_sup + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(p: &[&[f64]]) -> PointCloud {
        PointCloud::new(p.iter().map(|x| x.to_vec()).collect()).unwrap()
    }

    #[test]
    fn calmness_examples() {
        let u = cloud(&[&[1.0, 0.0]]);
        let u0 = cloud(&[&[0.0, 0.0]]);
        let s = cloud(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let f = calmness_indexation(&u, &u0, &s, Norm::L2).unwrap();
        assert_eq!(f.values, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let f = calmness_indexation(&u0, &u0, &cloud(&[&[5.0, 5.0]]), Norm::L2).unwrap();
        assert_eq!(f.values, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn pair_example_preserves_distance() {
        let u0 = cloud(&[&[0.0, 0.0]]);
        let u1 = cloud(&[&[1.0, 0.0]]);
        let u2 = cloud(&[&[0.0, 1.0]]);
        let s = u1.union(&u2).unwrap();
        let (s1, s2) = pair_indexation(&u1, &u2, &u0, &s, Norm::L2).unwrap();
        assert_eq!(s1.values[1], vec![1.0, 0.0]);
        assert_eq!(s2.values[0], vec![0.0, 1.0]);
        assert_eq!(sup_distance(&s1, &s2, Norm::L2).unwrap(), 1.0);
        assert_eq!(hausdorff(&u1, &u2, Metric::Coeff(Norm::L2)).unwrap(), 1.0);
    }

    #[test]
    fn identical_sets_give_identical_families() {
        let u0 = cloud(&[&[0.0, 0.0]]);
        let u = cloud(&[&[1.0, 0.5], &[-1.0, 2.0]]);
        let s = u.union(&cloud(&[&[3.0, 3.0], &[1.0, 0.5]])).unwrap();
        let (s1, s2) = pair_indexation(&u, &u, &u0, &s, Norm::L2).unwrap();
        assert_eq!(s1.values, s2.values);
        assert_eq!(sup_distance(&s1, &s2, Norm::L2).unwrap(), 0.0);
        // members of U1 ∩ U2 are fixed by both
        assert_eq!(s1.values[0], vec![1.0, 0.5]);
    }

    #[test]
    fn sup_distance_examples_and_errors() {
        let s = cloud(&[&[0.0, 0.0]]);
        let a = IndexedFamily { index_sample: s.clone(), values: vec![vec![0.0, 0.0]] };
        let b = IndexedFamily { index_sample: s, values: vec![vec![1.0, 2.0]] };
        assert_eq!(sup_distance(&a, &a, Norm::L2).unwrap(), 0.0);
        assert_eq!(sup_distance(&a, &b, Norm::L2).unwrap(), 2.0);
        let c = IndexedFamily { index_sample: cloud(&[&[1.0, 1.0]]), values: vec![vec![0.0, 0.0]] };
        assert!(sup_distance(&a, &c, Norm::L2).is_err());
    }

    #[test]
    fn pair_requires_covering_sample() {
        let u0 = cloud(&[&[0.0, 0.0]]);
        let u1 = cloud(&[&[1.0, 0.0]]);
        let u2 = cloud(&[&[0.0, 1.0]]);
        assert!(pair_indexation(&u1, &u2, &u0, &u1, Norm::L2).is_err());
    }

    #[test]
    fn check_on_a_small_triple() {
        let u0 = cloud(&[&[0.0, 0.0]]);
        let u1 = cloud(&[&[1.0, 0.0]]);
        let u2 = cloud(&[&[0.0, 1.0], &[0.5, 0.5]]);
        let c = indexation_check(&u0, &u1, &u2, 20, 3, Norm::L2, 1e-12).unwrap();
        assert!(c.holds(), "{c:?}");
        assert_eq!(c.pair_sup, 1.0);
    }
}
