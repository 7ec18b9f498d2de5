//! ℓ1 / ℓ2 / ℓ∞ norms on the variable space and the product norm on the
//! coefficient space `(a, b) ∈ ℝⁿ × ℝ`, `‖(a, b)‖ = max(‖a‖_*, |b|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The norm put on the variable space ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Norm {
    #[serde(rename = "l1")]
    L1,
    #[default]
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    Linf,
}

/// Whether a vector is measured with the chosen norm or its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Primal,
    Dual,
}

impl Norm {
    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Linf,
            Norm::L2 => Norm::L2,
            Norm::Linf => Norm::L1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }

    /// Norm of `v` without any dimension check.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// A vector `g` with `‖g‖_* = 1` and `g′x = ‖x‖` (the dual-norm maximizer
    /// of `x`). For `x = 0` the first unit vector is returned.
    pub fn dual_witness(self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let nx = self.eval(x);
        let mut g = vec![0.0; n];
        if nx == 0.0 {
            if n > 0 {
                g[0] = 1.0;
            }
            return g;
        }
        match self {
            Norm::L2 => {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = xi / nx;
                }
            }
            // dual is ℓ∞: sign vector
            Norm::L1 => {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = if *xi > 0.0 {
                        1.0
                    } else if *xi < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            // dual is ℓ1: put all mass on the largest coordinate
            Norm::Linf => {
                let k = (0..n)
                    .max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()).then(j.cmp(&i)))
                    .unwrap_or(0);
                g[k] = x[k].signum();
            }
        }
        g
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => Err(Error::Invalid(format!("unknown norm {other:?}"))),
        }
    }
}

pub fn norm_value(v: &[f64], spec: Norm, mode: Mode) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Dimension { expected: 1, found: 0 });
    }
    Ok(match mode {
        Mode::Primal => spec.eval(v),
        Mode::Dual => spec.dual().eval(v),
    })
}

/// Product norm on ℝⁿ⁺¹: the last coordinate is the right-hand side `b`.
pub fn coeff_norm(pt: &[f64], spec: Norm) -> Result<f64> {
    if pt.len() < 2 {
        return Err(Error::Dimension { expected: 2, found: pt.len() });
    }
    Ok(coeff_norm_unchecked(pt, spec))
}

pub(crate) fn coeff_norm_unchecked(pt: &[f64], spec: Norm) -> f64 {
    let (a, b) = pt.split_at(pt.len() - 1);
    spec.dual().eval(a).max(b[0].abs())
}

/// How distances between points of a cloud are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// The chosen norm on ℝⁿ.
    Primal(Norm),
    /// Its dual, used for gradients / subgradients.
    Dual(Norm),
    /// The product norm on coefficient vectors `(a, b)`.
    Coeff(Norm),
}

impl Metric {
    pub fn size(self, v: &[f64]) -> f64 {
        match self {
            Metric::Primal(p) => p.eval(v),
            Metric::Dual(p) => p.dual().eval(v),
            Metric::Coeff(p) => coeff_norm_unchecked(v, p),
        }
    }

    pub fn dist(self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.size(&diff)
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
