//! Monte Carlo estimates of the Lipschitz (Aubin) and calmness moduli of
//! `U ↦ F(U)` at `(U₀, x₀)`, by sampling pairs of Hausdorff-close
//! perturbations of `U₀`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hulls::{hausdorff, project_polyhedron, PointCloud, ToleranceConfig};
use crate::linsys::{active_set, dist_to_feasible, LinearSystem};
use crate::norms::{coeff_norm_unchecked, Metric, Norm};

/// Ratios whose Hausdorff denominator falls below this are skipped.
pub const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Jitter,
    AddPoint,
    DropPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub samples_per_delta: usize,
    pub seed: u64,
    pub perturbation_kinds: Vec<PerturbationKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            deltas: vec![1e-1, 1e-2, 1e-3],
            samples_per_delta: 1000,
            seed: 42,
            perturbation_kinds: vec![PerturbationKind::Jitter, PerturbationKind::AddPoint, PerturbationKind::DropPoint],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::Empty("delta schedule"));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Invalid("deltas must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid("deltas must be strictly decreasing".into()));
        }
        if self.samples_per_delta == 0 {
            return Err(Error::Invalid("samples_per_delta must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random stream for sample `index` at schedule position `delta_index`.
pub fn sample_rng(seed: u64, delta_index: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((delta_index as u64) << 32) | index as u64);
    rng
}

/// Uniform draw in `[-1, 1]^k` pulled into the unit ball of `size`.
fn ball_draw<R: Rng>(rng: &mut R, k: usize, size: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let s = size(&v);
    if s > 1.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

fn jittered<R: Rng>(p: &[f64], delta: f64, spec: Norm, rng: &mut R) -> Vec<f64> {
    let v = ball_draw(rng, p.len(), |v| coeff_norm_unchecked(v, spec));
    p.iter().zip(v).map(|(a, b)| a + delta * b).collect()
}

/// A cloud `U` with `d_H(U, U₀) ≤ δ` in the coefficient norm of `spec`.
pub fn perturb_cloud<R: Rng>(
    u0: &PointCloud,
    delta: f64,
    rng: &mut R,
    kinds: &[PerturbationKind],
    spec: Norm,
) -> Result<PointCloud> {
    if !(delta >= 0.0) {
        return Err(Error::Invalid("delta must be nonnegative".into()));
    }
    if delta == 0.0 {
        return Ok(u0.clone());
    }
    let metric = Metric::Coeff(spec);
    let mut pts: Vec<Vec<f64>> = if kinds.contains(&PerturbationKind::Jitter) {
        u0.points().iter().map(|p| jittered(p, delta, spec, rng)).collect()
    } else {
        u0.points().to_vec()
    };
    if kinds.contains(&PerturbationKind::AddPoint) && rng.random_bool(0.5) {
        let k = rng.random_range(0..u0.len());
        pts.push(jittered(u0.get(k), delta, spec, rng));
    }
    let mut u = PointCloud::new(pts)?;
    if kinds.contains(&PerturbationKind::DropPoint) && u.len() > 1 && rng.random_bool(0.5) {
        let k = rng.random_range(0..u.len());
        let mut rest = u.points().to_vec();
        rest.remove(k);
        let cand = PointCloud::new(rest)?;
        if hausdorff(&cand, u0, metric)? <= delta {
            u = cand;
        }
    }
    let d = hausdorff(&u, u0, metric)?;
    if d > delta * (1.0 + 1e-12) {
        return Err(Error::Solver(format!("perturbation left the delta-ball: {d} > {delta}")));
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub max_ratio: f64,
    pub samples_used: usize,
    pub discarded: usize,
    pub skipped: usize,
    /// Ratio of the deterministic adversarial pair (`None` when it is
    /// infeasible or degenerate).
    pub adversarial_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub calmness: bool,
    /// Max ratio at the smallest δ.
    pub estimate: f64,
    pub per_delta: Vec<DeltaResult>,
    /// Max ratios grow steadily as δ shrinks (the infinite-modulus signature).
    pub diverging: bool,
}

enum Outcome {
    Ratio(f64),
    Skipped,
    Discarded,
}

struct Setup<'a> {
    sys0: &'a LinearSystem,
    x0: &'a [f64],
    cfg: &'a SweepConfig,
    tol: &'a ToleranceConfig,
    calmness: bool,
}

/// `d(x₁, F(U₂)) / d_H(U₁, U₂)`.
fn ratio(x1: &[f64], u1: &PointCloud, u2: &PointCloud, setup: &Setup) -> Result<Outcome> {
    let spec = setup.sys0.spec();
    let den = hausdorff(u1, u2, Metric::Coeff(spec))?;
    if den < MIN_DENOMINATOR {
        return Ok(Outcome::Skipped);
    }
    let s2 = LinearSystem::new(setup.sys0.n(), u2.clone(), spec)?;
    match dist_to_feasible(x1, &s2, setup.tol) {
        Ok(d) => Ok(Outcome::Ratio(d / den)),
        Err(Error::Infeasible(_)) => Ok(Outcome::Discarded),
        Err(e) => Err(e),
    }
}

fn best(a: Outcome, b: Outcome) -> Outcome {
    match (a, b) {
        (Outcome::Ratio(x), Outcome::Ratio(y)) => Outcome::Ratio(x.max(y)),
        (Outcome::Ratio(x), _) | (_, Outcome::Ratio(x)) => Outcome::Ratio(x),
        (Outcome::Skipped, _) | (_, Outcome::Skipped) => Outcome::Skipped,
        _ => Outcome::Discarded,
    }
}

fn run_sample(setup: &Setup, delta_index: usize, index: usize) -> Result<Outcome> {
    let spec = setup.sys0.spec();
    let delta = setup.cfg.deltas[delta_index];
    let u0 = setup.sys0.coeffs();
    let mut rng = sample_rng(setup.cfg.seed, delta_index, index);
    let kinds = &setup.cfg.perturbation_kinds;

    let u1 = perturb_cloud(u0, delta, &mut rng, kinds, spec)?;
    let s1 = LinearSystem::new(setup.sys0.n(), u1.clone(), spec)?;
    let w = ball_draw(&mut rng, setup.x0.len(), |v| spec.eval(v));
    let target: Vec<f64> = setup.x0.iter().zip(&w).map(|(x, d)| x + delta * d).collect();
    let x1 = match project_polyhedron(&target, &s1.polyhedron(), spec, setup.tol) {
        Ok(p) => p.point,
        Err(Error::Infeasible(_)) => return Ok(Outcome::Discarded),
        Err(e) => return Err(e),
    };
    let moved: Vec<f64> = x1.iter().zip(setup.x0).map(|(a, b)| a - b).collect();
    if spec.eval(&moved) > delta * (1.0 + 1e-12) {
        return Ok(Outcome::Discarded);
    }
    // calmness pins U₂ = U₀; the Lipschitz sweep scores that pair too
    let pinned = ratio(&x1, &u1, u0, setup)?;
    if setup.calmness {
        return Ok(pinned);
    }
    let u2 = perturb_cloud(u0, delta, &mut rng, kinds, spec)?;
    Ok(best(ratio(&x1, &u1, &u2, setup)?, pinned))
}

/// Rows of `U₀` active at `x₀` moved by `δ·(sign·g, -sign)`, `g` the dual
/// witness of `x₀`. `sign = 1` tightens, `-1` loosens.
fn tilted(setup: &Setup, delta: f64, sign: f64) -> Result<PointCloud> {
    let sys = setup.sys0;
    let g = sys.spec().dual_witness(setup.x0);
    let active = active_set(setup.x0, sys, setup.tol)?;
    let pts = (0..sys.len())
        .map(|i| {
            let mut p = sys.coeffs().get(i).to_vec();
            if active.contains(&i) {
                let n = p.len() - 1;
                for k in 0..n {
                    p[k] += sign * delta * g[k];
                }
                p[n] -= sign * delta;
            }
            p
        })
        .collect();
    PointCloud::new(pts)
}

fn adversarial(setup: &Setup, delta: f64) -> Result<Outcome> {
    let spec = setup.sys0.spec();
    let u0 = setup.sys0.coeffs();
    // loosened U₁, x₁ pushed out along the witness direction, U₂ = U₀
    let loose = tilted(setup, delta, -1.0)?;
    let g = spec.dual_witness(setup.x0);
    let e = spec.dual().dual_witness(&g);
    let target: Vec<f64> = setup.x0.iter().zip(&e).map(|(x, d)| x + delta * d).collect();
    let s1 = LinearSystem::new(setup.sys0.n(), loose.clone(), spec)?;
    let calm = match project_polyhedron(&target, &s1.polyhedron(), spec, setup.tol) {
        Ok(p) => ratio(&p.point, &loose, u0, setup)?,
        Err(Error::Infeasible(_)) => Outcome::Discarded,
        Err(e) => return Err(e),
    };
    if setup.calmness {
        return Ok(calm);
    }
    // U₁ = U₀, x₁ = x₀, tightened U₂
    let tight = tilted(setup, delta, 1.0)?;
    Ok(best(ratio(setup.x0, u0, &tight, setup)?, calm))
}

fn sweep(setup: &Setup) -> Result<Sweep> {
    setup.cfg.validate()?;
    check_dim(setup.sys0.n(), setup.x0.len())?;
    active_set(setup.x0, setup.sys0, setup.tol)?;
    let mut per_delta = Vec::with_capacity(setup.cfg.deltas.len());
    for (di, &delta) in setup.cfg.deltas.iter().enumerate() {
        let outcomes: Vec<Outcome> = (0..setup.cfg.samples_per_delta)
            .into_par_iter()
            .map(|i| run_sample(setup, di, i))
            .collect::<Result<_>>()?;
        let mut r = DeltaResult {
            delta,
            max_ratio: 0.0,
            samples_used: 0,
            discarded: 0,
            skipped: 0,
            adversarial_ratio: None,
        };
        for o in outcomes {
            match o {
                Outcome::Ratio(x) => {
                    r.samples_used += 1;
                    r.max_ratio = r.max_ratio.max(x);
                }
                Outcome::Skipped => r.skipped += 1,
                Outcome::Discarded => r.discarded += 1,
            }
        }
        if let Outcome::Ratio(x) = adversarial(setup, delta)? {
            r.adversarial_ratio = Some(x);
            r.max_ratio = r.max_ratio.max(x);
        }
        log::debug!("delta {delta}: max ratio {} over {} samples", r.max_ratio, r.samples_used);
        per_delta.push(r);
    }
    let ratios: Vec<f64> = per_delta.iter().map(|r| r.max_ratio).collect();
    let diverging = ratios.len() >= 2
        && ratios.windows(2).all(|w| w[1] > w[0])
        && ratios[ratios.len() - 1] >= 10.0 * ratios[0].max(MIN_DENOMINATOR);
    Ok(Sweep { calmness: setup.calmness, estimate: *ratios.last().unwrap_or(&0.0), per_delta, diverging })
}

/// Empirical Lipschitz modulus: the largest sampled
/// `d(x₁, F(U₂)) / d_H(U₁, U₂)` at the smallest δ, with `d_H(Uᵢ, U₀) ≤ δ`,
/// `x₁ ∈ F(U₁)` and `‖x₁ - x₀‖ ≤ δ`. Always a lower bound of the modulus
/// up to the finite-δ effects.
pub fn empirical_lip(sys0: &LinearSystem, x0: &[f64], cfg: &SweepConfig, tol: &ToleranceConfig) -> Result<Sweep> {
    sweep(&Setup { sys0, x0, cfg, tol, calmness: false })
}

/// As [`empirical_lip`] with `U₂ = U₀`.
pub fn empirical_calm(sys0: &LinearSystem, x0: &[f64], cfg: &SweepConfig, tol: &ToleranceConfig) -> Result<Sweep> {
    sweep(&Setup { sys0, x0, cfg, tol, calmness: true })
}

/// Writes `delta,max_ratio,samples_used,discarded`.
pub fn write_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invalid(format!("csv output: {e}"));
    w.write_record(["delta", "max_ratio", "samples_used", "discarded"]).map_err(io)?;
    for r in &sweep.per_delta {
        w.write_record([
            r.delta.to_string(),
            r.max_ratio.to_string(),
            r.samples_used.to_string(),
            r.discarded.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("csv output: {e}")))?;
    Ok(())
}
