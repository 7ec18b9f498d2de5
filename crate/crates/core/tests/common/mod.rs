#![allow(dead_code)]

use lipmod::convexfn::{ConvexFunction, Piece};
use lipmod::hulls::{Halfspace, Polyhedron, ToleranceConfig};
use lipmod::linearize::ConvexInstance;
use lipmod::linsys::LinearSystem;
use lipmod::norms::Norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NORMS: [Norm; 3] = [Norm::L1, Norm::L2, Norm::Linf];

pub fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, k: usize, r: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-r..=r)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(spec: Norm, v: &[f64]) -> f64 {
    match spec {
        Norm::L1 => v.iter().map(|x| x.abs()).sum(),
        Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

pub fn dual(spec: Norm) -> Norm {
    match spec {
        Norm::L1 => Norm::Linf,
        Norm::L2 => Norm::L2,
        Norm::Linf => Norm::L1,
    }
}

/// `max(‖a‖_*, |b|)` for a coefficient point `(a, b)`.
pub fn coeff_dist(p: &[f64], q: &[f64], spec: Norm) -> f64 {
    let n = p.len() - 1;
    let da: Vec<f64> = (0..n).map(|i| p[i] - q[i]).collect();
    norm(dual(spec), &da).max((p[n] - q[n]).abs())
}

/// Brute-force Hausdorff distance in the coefficient norm.
pub fn brute_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], spec: Norm) -> f64 {
    let e = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| coeff_dist(p, q, spec)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    e(a, b).max(e(b, a))
}

/// A feasible system with `x0` in its solution set: rows `(a, a′x0 + s)`,
/// roughly 40% of them active (`s = 0`).
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, spec: Norm) -> (LinearSystem, Vec<f64>) {
    let x0 = uniform(rng, n, 2.0);
    let rows: Vec<(Vec<f64>, f64)> = (0..m)
        .map(|_| {
            let a = uniform(rng, n, 2.0);
            let s = if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.0..2.0) };
            let b = dot(&a, &x0) + s;
            (a, b)
        })
        .collect();
    (LinearSystem::from_rows(&rows, spec).unwrap(), x0)
}

/// Minimizes a convex function over `[center ± half]` restricted to
/// `feasible` by repeatedly refining a uniform grid around the incumbent
/// (the window shrinks by a factor 3 per level).
pub fn zoom_grid_min(
    f: impl Fn(&[f64]) -> f64,
    feasible: impl Fn(&[f64]) -> bool,
    center: &[f64],
    half: f64,
    levels: usize,
) -> Option<(f64, Vec<f64>)> {
    let d = center.len();
    let per = 61usize;
    let mut c = center.to_vec();
    let mut h = half;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..levels {
        let step = 2.0 * h / (per - 1) as f64;
        let total = per.pow(d as u32);
        for idx in 0..total {
            let mut k = idx;
            let p: Vec<f64> = (0..d)
                .map(|j| {
                    let i = k % per;
                    k /= per;
                    c[j] - h + step * i as f64
                })
                .collect();
            if !feasible(&p) {
                continue;
            }
            let v = f(&p);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, p));
            }
        }
        match &best {
            Some((_, p)) => c = p.clone(),
            None => return None,
        }
        h = 10.0 * step;
    }
    best
}

/// Brute-force distance from the origin to `conv g` in the `dual(spec)`
/// norm over convex weights (at most 3 generators).
pub fn brute_min_norm(g: &[Vec<f64>], spec: Norm) -> f64 {
    let dn = dual(spec);
    let combine = |w: &[f64]| -> Vec<f64> {
        let mut ws = w.to_vec();
        ws.push(1.0 - w.iter().sum::<f64>());
        let mut p = vec![0.0; g[0].len()];
        for (gi, wi) in g.iter().zip(&ws) {
            for (pk, gk) in p.iter_mut().zip(gi) {
                *pk += wi * gk;
            }
        }
        p
    };
    if g.len() == 1 {
        return norm(dn, &g[0]);
    }
    let k = g.len() - 1;
    let feasible = |w: &[f64]| w.iter().all(|x| *x >= 0.0) && w.iter().sum::<f64>() <= 1.0;
    zoom_grid_min(|w| norm(dn, &combine(w)), feasible, &vec![0.5; k], 0.5, 24).unwrap().0
}

/// Random bounded 2-D polyhedron containing a known point.
pub fn random_polyhedron_2d(rng: &mut ChaCha8Rng) -> (Polyhedron, Vec<f64>) {
    let inside = uniform(rng, 2, 1.0);
    let m = rng.random_range(3..=6);
    let rows: Vec<Halfspace> = (0..m)
        .map(|_| {
            let a = uniform(rng, 2, 1.0);
            let b = dot(&a, &inside) + rng.random_range(0.0..1.0);
            Halfspace::new(a, b)
        })
        .collect();
    (Polyhedron::new(2, rows).unwrap(), inside)
}

pub fn max_affine(pieces: &[(Vec<f64>, f64)]) -> ConvexFunction {
    ConvexFunction::max_affine(pieces.iter().map(|(c, d)| Piece::new(c.clone(), *d)).collect()).unwrap()
}

pub fn random_max_affine(rng: &mut ChaCha8Rng, n: usize) -> ConvexFunction {
    let k = rng.random_range(2..=5);
    let pieces: Vec<(Vec<f64>, f64)> = (0..k).map(|_| (uniform(rng, n, 2.0), rng.random_range(-1.0..1.0))).collect();
    max_affine(&pieces)
}

/// Each piece's slope and intercept moved by at most `eps` (coordinatewise).
pub fn perturb_max_affine(rng: &mut ChaCha8Rng, f: &ConvexFunction, eps: f64) -> ConvexFunction {
    let pieces: Vec<(Vec<f64>, f64)> = f
        .as_max_affine()
        .unwrap()
        .iter()
        .map(|p| {
            let c = p.c.iter().map(|v| v + rng.random_range(-eps..=eps)).collect();
            (c, p.d + rng.random_range(-eps..=eps))
        })
        .collect();
    max_affine(&pieces)
}

/// `|x| - 1` as `max(x - 1, -x - 1)`.
pub fn abs_minus_one() -> ConvexFunction {
    ConvexFunction::max_affine_1d(&[(1.0, -1.0), (-1.0, -1.0)]).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_instance(name: &str) -> ConvexInstance {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// `max((1+u)x - 1 + v, -(1+w)x - 1 + s)` with `|u|, |w| ≤ δ/(2R)` and
/// `|v|, |s| ≤ δ/2`, so that `sup_{|x|≤R} |f - (|x| - 1)| < δ`.
pub fn perturbed_abs(rng: &mut ChaCha8Rng, delta: f64, radius: f64) -> ConvexFunction {
    let su = delta / (2.0 * radius);
    let sv = delta / 2.0;
    let u = rng.random_range(-su..su);
    let w = rng.random_range(-su..su);
    let v = rng.random_range(-sv..sv);
    let s = rng.random_range(-sv..sv);
    ConvexFunction::max_affine_1d(&[(1.0 + u, -1.0 + v), (-(1.0 + w), -1.0 + s)]).unwrap()
}

/// Euclidean projection onto a 2-D polyhedron by enumerating the candidate
/// points: `x` itself, its projections onto every boundary line and every
/// pairwise intersection of boundary lines.
pub fn brute_project_2d(x: &[f64], p: &Polyhedron) -> f64 {
    let rows = p.rows();
    let mut cands = vec![x.to_vec()];
    for h in rows {
        let aa = dot(&h.a, &h.a);
        if aa > 0.0 {
            let t = (dot(&h.a, x) - h.b) / aa;
            cands.push(vec![x[0] - t * h.a[0], x[1] - t * h.a[1]]);
        }
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i], &rows[j]);
            let det = a.a[0] * b.a[1] - a.a[1] * b.a[0];
            if det.abs() > 1e-14 {
                cands.push(vec![(a.b * b.a[1] - a.a[1] * b.b) / det, (a.a[0] * b.b - a.b * b.a[0]) / det]);
            }
        }
    }
    cands
        .iter()
        .filter(|y| p.contains(y, 1e-10))
        .map(|y| ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}
