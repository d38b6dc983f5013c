//! Projected gradient descent over the hypercube `C = [0, 1]^N`.
//!
//! Each iteration computes the three loss-term gradients, compresses each
//! with a sign-preserving `log₂(|g| + 1)` transform so the first-order term
//! is not swamped by the two second-order ones, takes a step of length
//! `η(t) = η₀ / 2ᵗ` and projects back onto `C`. The loop stops once a step
//! moves the iterate by at most `ε`. Several uniformly random starts are
//! run and the relaxed iterate with the smallest expected loss is kept.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossMatrices, LossWeights};
use crate::numerics::{Matrix, RngStream, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// `∇ℒ₃ = α₃(2Ms - (M + Mᵀ)1)`, exact only when `M` is symmetric.
    #[default]
    Paper,
    /// `∇ℒ₃ = α₃((M + Mᵀ)s - (M + Mᵀ)1)`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdConfig {
    /// Scale applied to every balanced gradient term.
    pub gamma: f64,
    /// Stop once `‖s⁽ᵗ⁺¹⁾ - s⁽ᵗ⁾‖₂ <= epsilon`.
    pub epsilon: f64,
    /// Initial learning rate; step `t` uses `eta0 / 2ᵗ`.
    pub eta0: f64,
    pub restarts: usize,
    /// Rounding threshold: remove iff the relaxed value is `>= theta`.
    pub theta: f64,
    pub max_iters: usize,
    pub gradient_mode: GradientMode,
    /// Known bound on the balanced gradient norm over the box. When set,
    /// iterations are additionally capped at the count it guarantees.
    pub lipschitz_bound: Option<f64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon: 1e-7,
            eta0: 1.0,
            restarts: 50,
            theta: 0.5,
            max_iters: 200,
            gradient_mode: GradientMode::Paper,
            lipschitz_bound: None,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid(format!("theta {} must be in (0, 1]", self.theta)));
        }
        if self.restarts < 1 {
            return Err(Error::invalid("at least one restart is required"));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid(format!("eta0 {} must be > 0", self.eta0)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be finite"));
        }
        if let Some(m) = self.lipschitz_bound {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("lipschitz bound {m} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn learning_rate(&self, t: usize) -> f64 {
        self.eta0 * 0.5f64.powi(t as i32)
    }

    /// Iterations after which the step bound `η(t)·g_max` drops below `ε`:
    /// `⌈log₂(η₀ g_max / ε)⌉ + 1`.
    pub fn iteration_bound(&self, g_max: f64) -> usize {
        let ratio = self.eta0 * g_max / self.epsilon;
        if ratio <= 1.0 {
            1
        } else {
            ratio.log2().ceil() as usize + 1
        }
    }
}

/// Per-term gradients `(∇ℒ₁, ∇ℒ₂, ∇ℒ₃)`, each already weighted by its `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientParts {
    pub g1: Vector,
    pub g2: Vector,
    pub g3: Vector,
}

impl GradientParts {
    pub fn total(&self) -> Vector {
        &self.g1 + &self.g2 + &self.g3
    }
}

/// Precomputed row/column sums so one iteration costs two matrix-vector
/// products.
struct Evaluator<'a> {
    mats: &'a LossMatrices,
    w: LossWeights,
    mode: GradientMode,
    p_ones: Vector,
    m_rows_cols: Vector,
    m_total: f64,
    m_sym: Option<Matrix>,
}

impl<'a> Evaluator<'a> {
    fn new(mats: &'a LossMatrices, w: &LossWeights, mode: GradientMode) -> Self {
        let n = mats.n();
        let ones = Vector::from_element(n, 1.0);
        let m_rows = &mats.m * &ones;
        let m_cols = mats.m.tr_mul(&ones);
        Self {
            mats,
            w: *w,
            mode,
            p_ones: &mats.p * &ones,
            m_total: m_rows.sum(),
            m_rows_cols: m_rows + m_cols,
            m_sym: (mode == GradientMode::Exact).then(|| &mats.m + mats.m.transpose()),
        }
    }

    /// `(P s, M s)` in paper mode or `(P s, (M + Mᵀ) s)` in exact mode.
    fn products(&self, s: &Vector, ps: &mut Vector, ms: &mut Vector) {
        ps.gemv(1.0, &self.mats.p, s, 0.0);
        match &self.m_sym {
            Some(sym) => ms.gemv(1.0, sym, s, 0.0),
            None => ms.gemv(1.0, &self.mats.m, s, 0.0),
        }
    }

    fn loss(&self, s: &Vector, ps: &Vector, ms: &Vector) -> f64 {
        let l1 = self.mats.b.dot(s);
        let l2 = s.dot(&self.p_ones) - s.dot(ps);
        let s_m_s = match self.mode {
            GradientMode::Paper => s.dot(ms),
            GradientMode::Exact => 0.5 * s.dot(ms),
        };
        let l3 = self.m_total - s.dot(&self.m_rows_cols) + s_m_s;
        self.w.alpha1 * l1 + self.w.alpha2 * l2 + self.w.alpha3 * l3
    }

    fn gradient(&self, ps: &Vector, ms: &Vector) -> GradientParts {
        let w = &self.w;
        let g1 = &self.mats.b * w.alpha1;
        let g2 = (&self.p_ones - ps * 2.0) * w.alpha2;
        let g3 = match self.mode {
            GradientMode::Paper => (ms * 2.0 - &self.m_rows_cols) * w.alpha3,
            GradientMode::Exact => (ms - &self.m_rows_cols) * w.alpha3,
        };
        GradientParts { g1, g2, g3 }
    }
}

fn check_len(mats: &LossMatrices, s: &Vector) -> Result<()> {
    if s.len() != mats.n() {
        return Err(Error::DimensionMismatch {
            expected: mats.n(),
            found: s.len(),
        });
    }
    Ok(())
}

pub fn gradient(mats: &LossMatrices, w: &LossWeights, s: &Vector, mode: GradientMode) -> Result<GradientParts> {
    check_len(mats, s)?;
    let ev = Evaluator::new(mats, w, mode);
    let n = mats.n();
    let (mut ps, mut ms) = (Vector::zeros(n), Vector::zeros(n));
    ev.products(s, &mut ps, &mut ms);
    Ok(ev.gradient(&ps, &ms))
}

/// `Σᵢ γ · sign(gᵢ) ⊙ log₂(|gᵢ| + 1)`
pub fn balance(g1: &Vector, g2: &Vector, g3: &Vector, gamma: f64) -> Vector {
    let squash = |x: f64| {
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        sign * (x.abs() + 1.0).log2()
    };
    Vector::from_iterator(
        g1.len(),
        (0..g1.len()).map(|i| gamma * (squash(g1[i]) + squash(g2[i]) + squash(g3[i]))),
    )
}

/// Euclidean projection onto `[0, 1]^N`.
pub fn project_box(s: &Vector) -> Vector {
    s.map(|x| x.clamp(0.0, 1.0))
}

pub fn round_threshold(s: &Vector, theta: f64) -> Vec<u8> {
    s.iter().map(|&x| u8::from(x >= theta)).collect()
}

/// One restart's path.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    /// `s⁽⁰⁾, s⁽¹⁾, …`; every entry lies in `C`.
    pub iterates: Vec<Vector>,
    /// `‖s⁽ᵗ⁺¹⁾ - s⁽ᵗ⁾‖₂` for each step taken.
    pub step_norms: Vec<f64>,
    /// Norm of the balanced gradient at `s⁽ᵗ⁾`.
    pub balanced_grad_norms: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Expected loss at `s⁽ᵗ⁺¹⁾`.
    pub losses: Vec<f64>,
    pub converged: bool,
}

impl RestartTrace {
    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }

    pub fn final_iterate(&self) -> &Vector {
        self.iterates.last().expect("a trace always holds its start")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("a trace always holds one step")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdTrace {
    pub restarts: Vec<RestartTrace>,
    pub best_restart: usize,
    /// Expected loss of the best restart's final relaxed iterate.
    pub final_loss: f64,
}

impl PgdTrace {
    pub fn total_iterations(&self) -> usize {
        self.restarts.iter().map(RestartTrace::iterations).sum()
    }

    /// Largest balanced gradient norm seen in any restart.
    pub fn g_max(&self) -> f64 {
        self.restarts
            .iter()
            .flat_map(|r| r.balanced_grad_norms.iter().copied())
            .fold(0.0, f64::max)
    }

    /// `restart,iter,step_norm,loss`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("restart,iter,step_norm,loss\n");
        for (r, tr) in self.restarts.iter().enumerate() {
            for (t, (step, loss)) in tr.step_norms.iter().zip(&tr.losses).enumerate() {
                let _ = writeln!(out, "{r},{t},{step:e},{loss:e}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub best_relaxed: Vector,
    pub trace: PgdTrace,
}

fn descend(ev: &Evaluator<'_>, cfg: &PgdConfig, start: Vector, cap: usize) -> Result<RestartTrace> {
    let n = start.len();
    let (mut ps, mut ms) = (Vector::zeros(n), Vector::zeros(n));
    ev.products(&start, &mut ps, &mut ms);
    let mut s = start;
    let mut tr = RestartTrace {
        iterates: vec![s.clone()],
        step_norms: Vec::new(),
        balanced_grad_norms: Vec::new(),
        learning_rates: Vec::new(),
        losses: Vec::new(),
        converged: false,
    };
    for t in 0..cap.max(1) {
        let parts = ev.gradient(&ps, &ms);
        let g = balance(&parts.g1, &parts.g2, &parts.g3, cfg.gamma);
        let eta = cfg.learning_rate(t);
        let next = project_box(&(&s - &g * eta));
        let step = (&next - &s).norm();
        ev.products(&next, &mut ps, &mut ms);
        let loss = ev.loss(&next, &ps, &ms);
        if !loss.is_finite() || !step.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss} at iteration {t}")));
        }
        tr.balanced_grad_norms.push(g.norm());
        tr.learning_rates.push(eta);
        tr.step_norms.push(step);
        tr.losses.push(loss);
        tr.iterates.push(next.clone());
        s = next;
        if step <= cfg.epsilon {
            tr.converged = true;
            break;
        }
    }
    Ok(tr)
}

/// Runs every restart and returns the best relaxed iterate with the full
/// trace. Restart `r` starts from a point drawn by stream `seed / r`.
pub fn run(mats: &LossMatrices, w: &LossWeights, cfg: &PgdConfig, seed: u64) -> Result<PgdOutcome> {
    cfg.validate()?;
    w.validate()?;
    let n = mats.n();
    let ev = Evaluator::new(mats, w, cfg.gradient_mode);
    let cap = match cfg.lipschitz_bound {
        Some(m) => cfg.max_iters.min(cfg.iteration_bound(m)),
        None => cfg.max_iters,
    };
    let root = RngStream::new(seed);
    let mut restarts = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = root.split(r as u64);
        let start = Vector::from_iterator(n, (0..n).map(|_| rng.random::<f64>()));
        restarts.push(descend(&ev, cfg, start, cap)?);
    }
    let (best_restart, final_loss) = restarts
        .iter()
        .enumerate()
        .map(|(i, tr)| (i, tr.final_loss()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(PgdOutcome {
        best_relaxed: restarts[best_restart].final_iterate().clone(),
        trace: PgdTrace {
            restarts,
            best_restart,
            final_loss,
        },
    })
}

/// Relaxed optimum plus its thresholded decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdSolution {
    pub relaxed: Vector,
    pub decision: Vec<u8>,
    /// Expected loss of `decision`.
    pub loss: f64,
    pub iterations: usize,
}

pub fn solve(mats: &LossMatrices, w: &LossWeights, cfg: &PgdConfig, seed: u64) -> Result<PgdSolution> {
    let out = run(mats, w, cfg, seed)?;
    let decision = round_threshold(&out.best_relaxed, cfg.theta);
    let loss = crate::loss::decision_loss(mats, w, &decision)?;
    Ok(PgdSolution {
        relaxed: out.best_relaxed,
        decision,
        loss,
        iterations: out.trace.total_iterations(),
    })
}
