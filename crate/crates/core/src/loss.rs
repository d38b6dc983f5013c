//! The three-part removal loss, its matrix form, and the equivalent
//! quadratic program.
//!
//! With `A` the adjacency matrix, `μ`/`Σ` the configuration moments and
//! `s̄ = 1 - s`:
//!
//! ```text
//! B = diag(1 - μ)
//! P = A ⊙ E[π̄ π̄ᵀ] = A ⊙ (J - 1μᵀ - μ1ᵀ + Σ + μμᵀ)
//! M = A ⊙ E[π π̄ᵀ] = A ⊙ (μ1ᵀ - Σ - μμᵀ)
//! L(s) = α₁ 1ᵀBs + α₂ (sᵀP1 - sᵀPs) + α₃ s̄ᵀMs̄
//! ```

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{Matrix, Vector};
use crate::uncertainty::{Configuration, MaliciousnessModel};

/// Trade-off weights `(α₁, α₂, α₃)`, nonnegative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl LossWeights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let w = Self {
            alpha1,
            alpha2,
            alpha3,
        };
        w.validate()?;
        Ok(w)
    }

    /// Scales nonnegative weights so they sum to one.
    pub fn normalized(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let sum = alpha1 + alpha2 + alpha3;
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::invalid("weights must have a positive finite sum"));
        }
        Self::new(alpha1 / sum, alpha2 / sum, alpha3 / sum)
    }

    pub fn equal() -> Self {
        Self {
            alpha1: 1.0 / 3.0,
            alpha2: 1.0 / 3.0,
            alpha3: 1.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = [self.alpha1, self.alpha2, self.alpha3];
        if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!("weights {a:?} must be finite and >= 0")));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights {a:?} sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// The four trade-off settings used in the benchmark grid.
    pub fn default_grid() -> Vec<LossWeights> {
        vec![
            Self { alpha1: 0.1, alpha2: 0.2, alpha3: 0.7 },
            Self { alpha1: 0.2, alpha2: 0.7, alpha3: 0.1 },
            Self { alpha1: 0.7, alpha2: 0.2, alpha3: 0.1 },
            Self::equal(),
        ]
    }
}

impl fmt::Display for LossWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |x: f64| -> String {
            if (x - 1.0 / 3.0).abs() < 1e-15 {
                "1/3".to_string()
            } else {
                format!("{x}")
            }
        };
        write!(f, "({},{},{})", show(self.alpha1), show(self.alpha2), show(self.alpha3))
    }
}

fn parse_weight(s: &str) -> Result<f64> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| Error::invalid(format!("bad weight {s:?}")))?;
            let den: f64 = den.trim().parse().map_err(|_| Error::invalid(format!("bad weight {s:?}")))?;
            num / den
        }
        None => s.parse().map_err(|_| Error::invalid(format!("bad weight {s:?}")))?,
    };
    Ok(value)
}

/// Parses `"a1,a2,a3"`; entries may be decimals or fractions like `1/3`.
/// Surrounding parentheses are accepted.
impl FromStr for LossWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("expected three weights, got {s:?}")));
        }
        Self::new(
            parse_weight(parts[0])?,
            parse_weight(parts[1])?,
            parse_weight(parts[2])?,
        )
    }
}

/// `B` (stored as its diagonal), `P` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrices {
    pub b: Vector,
    pub p: Matrix,
    pub m: Matrix,
}

impl LossMatrices {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn b_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.b)
    }
}

pub fn build_matrices(g: &Graph, model: &MaliciousnessModel) -> Result<LossMatrices> {
    let n = g.n();
    if model.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: model.n(),
        });
    }
    let mu = model.mu();
    let b = mu.map(|x| 1.0 - x);
    let mut p = Matrix::zeros(n, n);
    let mut m = Matrix::zeros(n, n);
    for &(u, v) in g.edges() {
        for (i, j) in [(u, v), (v, u)] {
            let e_ij = model.expected_product(i, j);
            p[(i, j)] = 1.0 - mu[i] - mu[j] + e_ij;
            m[(i, j)] = mu[i] - e_ij;
        }
    }
    Ok(LossMatrices { b, p, m })
}

/// Realized loss of a binary decision under a known configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedLoss {
    pub total: f64,
    /// Benign nodes removed.
    pub l1: u64,
    /// Links cut between removed and kept benign nodes.
    pub l2: u64,
    /// Links from kept malicious to kept benign nodes.
    pub l3: u64,
}

pub(crate) fn check_binary(s: &[u8], n: usize) -> Result<()> {
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.len(),
        });
    }
    if let Some(bad) = s.iter().find(|&&x| x > 1) {
        return Err(Error::Domain(format!("decision entry {bad} not in {{0, 1}}")));
    }
    Ok(())
}

pub fn realized_loss(g: &Graph, pi: &Configuration, s: &[u8], w: &LossWeights) -> Result<RealizedLoss> {
    let n = g.n();
    check_binary(s, n)?;
    check_binary(pi.as_slice(), n)?;
    let pi = pi.as_slice();
    let l1 = (0..n).filter(|&i| s[i] == 1 && pi[i] == 0).count() as u64;
    let (mut l2, mut l3) = (0u64, 0u64);
    for &(u, v) in g.edges() {
        for (i, j) in [(u, v), (v, u)] {
            if s[i] == 1 && s[j] == 0 && pi[i] == 0 && pi[j] == 0 {
                l2 += 1;
            }
            if s[i] == 0 && s[j] == 0 && pi[i] == 1 && pi[j] == 0 {
                l3 += 1;
            }
        }
    }
    let total = w.alpha1 * l1 as f64 + w.alpha2 * l2 as f64 + w.alpha3 * l3 as f64;
    Ok(RealizedLoss { total, l1, l2, l3 })
}

/// Unweighted expected components `(E[ℒ₁], E[ℒ₂], E[ℒ₃])`.
pub fn expected_components(mats: &LossMatrices, s: &Vector) -> Result<[f64; 3]> {
    let n = mats.n();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.len(),
        });
    }
    if let Some(bad) = s.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("removal entry {bad} outside [0, 1]")));
    }
    let keep = s.map(|x| 1.0 - x);
    let l1 = mats.b.dot(s);
    // sᵀP(1 - s)
    let l2 = s.dot(&(&mats.p * &keep));
    let l3 = keep.dot(&(&mats.m * &keep));
    Ok([l1, l2, l3])
}

/// `α₁ 1ᵀBs + α₂ (sᵀP1 - sᵀPs) + α₃ s̄ᵀMs̄` for `s ∈ [0, 1]^N`.
pub fn expected_loss(mats: &LossMatrices, w: &LossWeights, s: &Vector) -> Result<f64> {
    let [l1, l2, l3] = expected_components(mats, s)?;
    Ok(w.alpha1 * l1 + w.alpha2 * l2 + w.alpha3 * l3)
}

pub fn decision_vector(s: &[u8]) -> Vector {
    Vector::from_iterator(s.len(), s.iter().map(|&x| x as f64))
}

/// Convenience for binary decisions.
pub fn decision_loss(mats: &LossMatrices, w: &LossWeights, s: &[u8]) -> Result<f64> {
    check_binary(s, mats.n())?;
    expected_loss(mats, w, &decision_vector(s))
}

/// Quadratic program coefficients.
///
/// `sᵀA₁s + sᵀb₁ + c₁` reproduces the expected loss on every binary `s`;
/// `Q` and `b` are its symmetrized form `sᵀQs + 2sᵀb + c₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpForm {
    pub a1: Matrix,
    pub b1: Vector,
    pub c1: f64,
    pub q: Matrix,
    pub b: Vector,
}

impl QpForm {
    /// Builds a form directly from a symmetric `Q`, linear term `b` and
    /// constant; `a1`/`b1` are set to the matching values.
    pub fn from_symmetric(q: Matrix, b: Vector, c1: f64) -> Result<Self> {
        crate::numerics::check_symmetric(&q)?;
        if b.len() != q.nrows() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                found: b.len(),
            });
        }
        Ok(Self {
            a1: q.clone(),
            b1: &b * 2.0,
            c1,
            q,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// `sᵀQs + 2sᵀb + c₁`
    pub fn objective(&self, s: &Vector) -> f64 {
        s.dot(&(&self.q * s)) + 2.0 * s.dot(&self.b) + self.c1
    }

    /// `sᵀA₁s + sᵀb₁ + c₁`
    pub fn objective_unsymmetrized(&self, s: &Vector) -> f64 {
        s.dot(&(&self.a1 * s)) + s.dot(&self.b1) + self.c1
    }
}

pub fn qp_form(mats: &LossMatrices, w: &LossWeights) -> QpForm {
    let n = mats.n();
    let ones = Vector::from_element(n, 1.0);
    let a1 = &mats.m * w.alpha3 - &mats.p * w.alpha2;
    let m_rows = &mats.m * &ones;
    let m_cols = mats.m.tr_mul(&ones);
    let b1 = &mats.b * w.alpha1 + (&mats.p * &ones) * w.alpha2 - (m_rows.clone() + m_cols) * w.alpha3;
    let c1 = w.alpha3 * m_rows.sum();
    let q = (&a1 + a1.transpose()) * 0.5;
    let b = &b1 * 0.5;
    QpForm { a1, b1, c1, q, b }
}

/// Outcome of the trade-off check on adjacent pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCondition {
    pub holds: bool,
    /// Smallest `q_ij` over edges; `+∞` for a graph without edges.
    pub min_offdiag_q: f64,
}

/// Evaluates `q_ij = (α₂+α₃)((μ_i+μ_j)/2 - E[π_iπ_j]) - α₂` on every edge.
pub fn bound_condition(g: &Graph, model: &MaliciousnessModel, w: &LossWeights) -> Result<BoundCondition> {
    if model.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: model.n(),
        });
    }
    let mu = model.mu();
    let min = g
        .edges()
        .iter()
        .map(|&(i, j)| {
            (w.alpha2 + w.alpha3) * (0.5 * (mu[i] + mu[j]) - model.expected_product(i, j)) - w.alpha2
        })
        .fold(f64::INFINITY, f64::min);
    Ok(BoundCondition {
        holds: min >= 0.0,
        min_offdiag_q: min,
    })
}

/// Sparse debug dump: `i,j,value` per nonzero entry in row-major order.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::from("i,j,value\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{i},{j},{v:e}");
            }
        }
    }
    out
}
