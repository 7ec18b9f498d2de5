//! Command-line front end. Every subcommand reads JSON inputs, runs one
//! operation and writes a JSON report (stdout or `--out`).
//!
//! Exit codes: 0 success, 1 check violated, 2 input error, 3 numerical
//! failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::convexfn::{holder_stability_check, BoxRegion, ConvexFunction, DEFAULT_GRID};
use crate::error::Error;
use crate::estimate::{empirical_calm, empirical_lip, write_csv, SweepConfig};
use crate::hulls::{excess, hausdorff, PointCloud, ToleranceConfig};
use crate::indexation::indexation_check;
use crate::linearize::{
    convex_lipschitz_check, gap_bound_check, kappa0, linearize, safe_radius, CheckStatus, ConvexInstance,
};
use crate::linsys::{lipschitz_modulus_with_box, ssc_margin, LinearSystem, DEFAULT_SSC_BOX};
use crate::norms::{Metric, Norm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lipmod", version, about = "Lipschitz moduli of linear and convex feasible-set mappings")]
pub struct Cli {
    /// JSON file with `tolerances` and `sweep` sections (a report's
    /// `manifest` is accepted too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report destination (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lipschitz modulus of F at (U, x0).
    Modulus {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        x0: Option<String>,
        /// Half-width of the box in the strong Slater LP.
        #[arg(long = "box", default_value_t = DEFAULT_SSC_BOX)]
        box_radius: f64,
    },
    /// Hausdorff distance and excesses between two clouds.
    Hausdorff {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "l2")]
        norm: Norm,
    },
    /// Strong Slater margin of a system.
    Ssc {
        #[arg(long)]
        system: PathBuf,
        #[arg(long = "box", default_value_t = DEFAULT_SSC_BOX)]
        box_radius: f64,
    },
    /// Indexation identities for U0 (--system), U1 (--a), U2 (--b).
    IndexationCheck {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Number of exterior index samples.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Linearization of f0 over E0.
    Linearize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// kappa0 of a convex instance.
    Kappa0 {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Safe radius eta of a convex instance.
    SafeRadius {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Linearization-gap bound for f1 (--a) and f2 (--b).
    GapCheck {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// K1 as `[[lo, hi], ...]`.
        #[arg(long = "box")]
        box1: String,
        /// K2 (default: K1).
        #[arg(long)]
        box2: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Convex Lipschitz estimate for f1 (--a), f2 (--b) at x1.
    ConvexCheck {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        x1: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        kappa: f64,
        /// Images over E0 itself (differentiable f0).
        #[arg(long)]
        differentiable: bool,
    },
    /// Monte Carlo estimate of the Lipschitz (or calmness) modulus.
    Estimate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        calmness: bool,
        /// Also write the per-delta table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lower Hölder inclusion of subdifferentials for f1 (--a), f2 (--b).
    SubdiffCheck {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        x0: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tolerances: ToleranceConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub tolerances: ToleranceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub version: String,
}

enum Failure {
    Input(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok((report, code)) => match emit(&report, cli.out.as_deref()) {
            Ok(()) => code,
            Err(msg) => {
                eprintln!("error: {msg}");
                EXIT_INPUT
            }
        },
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("LIPMOD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(report: &Value, out: Option<&Path>) -> std::result::Result<(), String> {
    let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())? + "\n";
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_value(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Reads `path`, descending into `key` when the file is a report that
/// embeds the input under that key.
fn load<T: DeserializeOwned>(path: &Path, key: &str) -> CliResult<T> {
    let mut v = read_value(path)?;
    if let Some(inner) = v.get_mut(key) {
        v = inner.take();
    }
    serde_json::from_value(v).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_inline<T: DeserializeOwned>(flag: &str, s: &str) -> CliResult<T> {
    serde_json::from_str(s).map_err(|e| Failure::Input(format!("--{flag}: {e}")))
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg: RunConfig = match path {
        Some(p) => load(p, "manifest")?,
        None => RunConfig::default(),
    };
    cfg.tolerances.validate()?;
    Ok(cfg)
}

/// `--x0` when given, otherwise the `x0` stored next to the system.
fn resolve_x0(flag: Option<&str>, system_path: &Path) -> CliResult<Vec<f64>> {
    match flag {
        Some(s) => parse_inline("x0", s),
        None => {
            let v = read_value(system_path)?;
            let x0 = v.get("x0").ok_or_else(|| Failure::Input("--x0 is required".into()))?;
            serde_json::from_value(x0.clone()).map_err(|e| Failure::Input(format!("x0: {e}")))
        }
    }
}

fn parse_box(flag: &str, s: &str) -> CliResult<BoxRegion> {
    let bounds: Vec<[f64; 2]> = parse_inline(flag, s)?;
    let lo: Vec<f64> = bounds.iter().map(|b| b[0]).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b[1]).collect();
    Ok(BoxRegion::from_bounds(&lo, &hi)?)
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| Failure::Input(e.to_string()))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn execute(cli: &Cli) -> CliResult<(Value, i32)> {
    let cfg = load_config(cli.config.as_deref())?;
    let tol = &cfg.tolerances;
    let mut inputs: Vec<String> = cli.config.iter().map(|p| path_str(p)).collect();
    let mut sweep_used = None;
    let (name, theorem, mut body, code) = match &cli.command {
        Command::Modulus { system, x0, box_radius } => {
            inputs.push(path_str(system));
            let sys: LinearSystem = load(system, "system")?;
            let x0 = resolve_x0(x0.as_deref(), system)?;
            let r = lipschitz_modulus_with_box(&sys, &x0, *box_radius, tol)?;
            let mut v = to_value(&r)?;
            v["system"] = to_value(&sys)?;
            ("modulus", "lip-formula", v, EXIT_OK)
        }
        Command::Hausdorff { a, b, norm } => {
            inputs.extend([path_str(a), path_str(b)]);
            let ca: PointCloud = load(a, "a")?;
            let cb: PointCloud = load(b, "b")?;
            let m = Metric::Coeff(*norm);
            let v = json!({
                "d_h": hausdorff(&ca, &cb, m)?,
                "excess_ab": excess(&ca, &cb, m)?,
                "excess_ba": excess(&cb, &ca, m)?,
                "norm": norm,
                "a": ca,
                "b": cb,
            });
            ("hausdorff", "hausdorff-distance", v, EXIT_OK)
        }
        Command::Ssc { system, box_radius } => {
            inputs.push(path_str(system));
            let sys: LinearSystem = load(system, "system")?;
            let r = ssc_margin(&sys, *box_radius, tol)?;
            let mut v = to_value(&r)?;
            v["holds"] = json!(r.holds());
            v["system"] = to_value(&sys)?;
            let code = if r.holds() { EXIT_OK } else { EXIT_VIOLATED };
            ("ssc", "strong-slater", v, code)
        }
        Command::IndexationCheck { system, a, b, samples, seed } => {
            inputs.extend([path_str(system), path_str(a), path_str(b)]);
            let sys: LinearSystem = load(system, "system")?;
            let u1: LinearSystem = load(a, "system")?;
            let u2: LinearSystem = load(b, "system")?;
            let r = indexation_check(sys.coeffs(), u1.coeffs(), u2.coeffs(), *samples, *seed, sys.spec(), 1e-12)?;
            let code = if r.holds() { EXIT_OK } else { EXIT_VIOLATED };
            let mut v = to_value(&r)?;
            v["holds"] = json!(r.holds());
            ("indexation-check", "indexation-identities", v, code)
        }
        Command::Linearize { instance, grid } => {
            inputs.push(path_str(instance));
            let inst = with_grid(load(instance, "instance")?, *grid);
            let bounds = inst.validate(tol)?;
            let e0 = bounds.enlarged(inst.alpha0)?;
            let sys = linearize(&inst.f0, &e0, inst.grid_per_axis, tol)?;
            let v = json!({ "e0": e0, "system": sys, "instance": inst });
            ("linearize", "convex-linearization", v, EXIT_OK)
        }
        Command::Kappa0 { instance, grid } => {
            inputs.push(path_str(instance));
            let inst = with_grid(load(instance, "instance")?, *grid);
            let r = kappa0(&inst, tol)?;
            let mut v = to_value(&r)?;
            v["instance"] = to_value(&inst)?;
            ("kappa0", "kappa0", v, EXIT_OK)
        }
        Command::SafeRadius { instance } => {
            inputs.push(path_str(instance));
            let inst: ConvexInstance = load(instance, "instance")?;
            let r = safe_radius(&inst, tol)?;
            let mut v = to_value(&r)?;
            v["instance"] = to_value(&inst)?;
            ("safe-radius", "safe-radius", v, EXIT_OK)
        }
        Command::GapCheck { a, b, box1, box2, grid } => {
            inputs.extend([path_str(a), path_str(b)]);
            let f1: ConvexFunction = load(a, "f1")?;
            let f2: ConvexFunction = load(b, "f2")?;
            let k1 = parse_box("box", box1)?;
            let k2 = match box2 {
                Some(s) => parse_box("box2", s)?,
                None => k1.clone(),
            };
            let r = gap_bound_check(&f1, &f2, &k1, &k2, *grid, tol)?;
            let code = if r.holds { EXIT_OK } else { EXIT_VIOLATED };
            let mut v = to_value(&r)?;
            v["f1"] = to_value(&f1)?;
            v["f2"] = to_value(&f2)?;
            ("gap-check", "linearization-gap", v, code)
        }
        Command::ConvexCheck { instance, a, b, x1, delta, kappa, differentiable } => {
            inputs.extend([path_str(instance), path_str(a), path_str(b)]);
            let inst: ConvexInstance = load(instance, "instance")?;
            let f1: ConvexFunction = load(a, "f1")?;
            let f2: ConvexFunction = load(b, "f2")?;
            let x1: Vec<f64> = parse_inline("x1", x1)?;
            let r = convex_lipschitz_check(&inst, *kappa, &f1, &f2, &x1, *delta, *differentiable, tol)?;
            let code = match r.status {
                CheckStatus::Holds => EXIT_OK,
                CheckStatus::Violated => EXIT_VIOLATED,
                CheckStatus::HypothesisNotMet => EXIT_INPUT,
            };
            let theorem = if *differentiable { "convex-lipschitz-differentiable" } else { "convex-lipschitz" };
            let mut v = to_value(&r)?;
            v["instance"] = to_value(&inst)?;
            ("convex-check", theorem, v, code)
        }
        Command::Estimate { system, x0, deltas, samples, seed, calmness, csv } => {
            inputs.push(path_str(system));
            let sys: LinearSystem = load(system, "system")?;
            let x0 = resolve_x0(x0.as_deref(), system)?;
            let mut sweep = cfg.sweep.clone();
            if let Some(d) = deltas {
                sweep.deltas = parse_inline("deltas", d)?;
            }
            if let Some(n) = samples {
                sweep.samples_per_delta = *n;
            }
            if let Some(s) = seed {
                sweep.seed = *s;
            }
            let r = if *calmness {
                empirical_calm(&sys, &x0, &sweep, tol)?
            } else {
                empirical_lip(&sys, &x0, &sweep, tol)?
            };
            if let Some(p) = csv {
                let f = fs::File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
                write_csv(&r, f)?;
            }
            sweep_used = Some(sweep);
            let mut v = to_value(&r)?;
            v["system"] = to_value(&sys)?;
            v["x0"] = json!(x0);
            ("estimate", if *calmness { "empirical-calm" } else { "empirical-lip" }, v, EXIT_OK)
        }
        Command::SubdiffCheck { a, b, x0, alpha, delta, grid } => {
            inputs.extend([path_str(a), path_str(b)]);
            let f1: ConvexFunction = load(a, "f1")?;
            let f2: ConvexFunction = load(b, "f2")?;
            let x0: Vec<f64> = parse_inline("x0", x0)?;
            let r = holder_stability_check(&f1, &f2, &x0, *alpha, *delta, *grid, tol)?;
            let code = if r.holds { EXIT_OK } else { EXIT_VIOLATED };
            let mut v = to_value(&r)?;
            v["f1"] = to_value(&f1)?;
            v["f2"] = to_value(&f2)?;
            ("subdiff-check", "subdifferential-stability", v, code)
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        inputs,
        tolerances: *tol,
        sweep: sweep_used,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    body["command"] = json!(name);
    body["theorem"] = json!(theorem);
    body["manifest"] = to_value(&manifest)?;
    Ok((body, code))
}

fn with_grid(mut inst: ConvexInstance, grid: Option<usize>) -> ConvexInstance {
    if let Some(g) = grid {
        inst.grid_per_axis = g;
    }
    inst
}
