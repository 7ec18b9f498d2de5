mod common;

use common::*;
use lipmod::convexfn::{
    dk_distance, eval_subgrad, holder_stability_check, subdiff_generators, subdiff_image, BoxRegion, ConvexFunction,
};
use lipmod::hulls::{excess, hausdorff};
use lipmod::norms::{Metric, Norm};
use proptest::prelude::*;
use rand::Rng;

fn random_quadratic(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> ConvexFunction {
    let b: Vec<Vec<f64>> = (0..n).map(|_| uniform(r, n, 1.0)).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum()).collect())
        .collect();
    ConvexFunction::quadratic(q, uniform(r, n, 1.0), r.random_range(-1.0..1.0)).unwrap()
}

fn random_function(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> ConvexFunction {
    match r.random_range(0..3) {
        0 => random_max_affine(r, n),
        1 => random_quadratic(r, n),
        _ => ConvexFunction::sum(vec![random_max_affine(r, n), random_quadratic(r, n)]).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn subgradient_inequality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let f = random_function(&mut r, n);
        let (x, z) = (uniform(&mut r, n, 3.0), uniform(&mut r, n, 3.0));
        let (fz, a) = eval_subgrad(&f, &z).unwrap();
        let diff: Vec<f64> = x.iter().zip(&z).map(|(p, q)| p - q).collect();
        prop_assert!(f.eval(&x) >= fz + dot(&a, &diff) - 1e-9 * (1.0 + fz.abs()));
        for g in subdiff_generators(&f, &z, &tol()).unwrap().points() {
            prop_assert!(f.eval(&x) >= fz + dot(g, &diff) - 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn holder_inclusion_on_random_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=2);
        let f1 = random_max_affine(&mut r, n);
        let eps = 10f64.powf(r.random_range(-4.0..-2.0));
        let f2 = perturb_max_affine(&mut r, &f1, eps);
        let x0 = uniform(&mut r, n, 1.0);
        let alpha = 1.0;
        let k = BoxRegion::cube(x0.clone(), alpha).unwrap();
        let delta = dk_distance(&f1, &f2, &k, 21, &tol()).unwrap().value;
        prop_assume!(delta > 0.0 && delta <= alpha * alpha);
        let c = holder_stability_check(&f1, &f2, &x0, alpha, delta, 21, &tol()).unwrap();
        prop_assert!(c.holds && c.margin <= 0.0, "{:?}", c);
    }
}

/// Excess of `∂f_k(x0 + δ_k box)` over `∂f0(x0)` for `f_k = f0 + δ_k·(fixed
/// direction)`, at a point where a single piece of `f0` is active.
#[test]
fn upper_semicontinuity_family_shrinks_monotonically() {
    let t = tol();
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let n = r.random_range(1..=2);
        let f0 = random_max_affine(&mut r, n);
        let pieces = f0.as_max_affine().unwrap().to_vec();
        let x0 = uniform(&mut r, n, 1.0);
        let vals: Vec<f64> = pieces.iter().map(|p| p.eval(&x0)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gap = vals.iter().filter(|v| **v < top).map(|v| top - v).fold(f64::INFINITY, f64::min);
        if vals.iter().filter(|v| **v == top).count() != 1 || gap < 0.05 {
            continue;
        }
        let dir: Vec<(Vec<f64>, f64)> = pieces.iter().map(|_| (uniform(&mut r, n, 1.0), r.random_range(-1.0..1.0))).collect();
        let base = subdiff_generators(&f0, &x0, &t).unwrap();
        let mut last = f64::INFINITY;
        for k in 2..=6 {
            let d = 10f64.powi(-k);
            let fk = max_affine(
                &pieces
                    .iter()
                    .zip(&dir)
                    .map(|(p, (u, v))| (p.c.iter().zip(u).map(|(c, w)| c + d * w).collect(), p.d + d * v))
                    .collect::<Vec<_>>(),
            );
            let img = subdiff_image(&fk, &BoxRegion::cube(x0.clone(), d).unwrap(), 5, &t).unwrap();
            let worst = excess(&img, &base, Metric::Dual(Norm::L2)).unwrap();
            assert!(worst <= last + 1e-15, "seed {seed}: {worst} after {last}");
            last = worst;
        }
        assert!(last <= 1e-5);
    }
}

#[test]
fn enlarged_images_converge_to_the_nominal_image() {
    let t = tol();
    let f0 = abs_minus_one();
    let k0 = BoxRegion::cube(vec![0.0], 1.0).unwrap();
    let nominal = subdiff_image(&f0, &k0, 41, &t).unwrap();
    let mut last = f64::INFINITY;
    for delta in [1e-1f64, 1e-2, 1e-3, 1e-4] {
        let f = ConvexFunction::max_affine_1d(&[(1.0 + delta / 4.0, -1.0 + delta / 4.0), (-(1.0 - delta / 4.0), -1.0)]).unwrap();
        assert!(dk_distance(&f, &f0, &k0.inflate(delta.sqrt()), 41, &t).unwrap().value <= delta);
        let img = subdiff_image(&f, &k0.inflate(delta.sqrt()), 41, &t).unwrap();
        let d = hausdorff(&img, &nominal, Metric::Dual(Norm::L2)).unwrap();
        assert!(d <= last);
        last = d;
    }
    assert!(last < 0.05);
}

/// Tangent-line envelopes of `x²/2` approach it uniformly; their slope sets
/// on `K₀` approach `∇f₀(K₀)` without enlarging `K₀`.
#[test]
fn differentiable_nominal_needs_no_enlargement() {
    let t = tol();
    let f0 = ConvexFunction::quadratic(vec![vec![1.0]], vec![0.0], 0.0).unwrap();
    let k0 = BoxRegion::cube(vec![0.0], 1.0).unwrap();
    let nominal = subdiff_image(&f0, &k0, 2001, &t).unwrap();
    let mut last = f64::INFINITY;
    for delta in [1e-2f64, 1e-3, 1e-4] {
        let h = (8.0 * delta).sqrt();
        let m = (3.0 / h).ceil() as i64;
        let tangents: Vec<(f64, f64)> = (-m..=m).map(|i| {
            let s = i as f64 * h;
            (s, -0.5 * s * s)
        }).collect();
        let f = ConvexFunction::max_affine_1d(&tangents).unwrap();
        let dk = dk_distance(&f, &f0, &k0.inflate(0.5), 2001, &t).unwrap().value;
        assert!(dk <= delta * 1.01, "{dk}");
        let img = subdiff_image(&f, &k0, 2001, &t).unwrap();
        let d = hausdorff(&img, &nominal, Metric::Dual(Norm::L2)).unwrap();
        assert!(d < last);
        last = d;
    }
    assert!(last < 0.05, "{last}");
}
