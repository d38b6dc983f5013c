//! Exact solution of the ball-constrained relaxation and its rounding.
//!
//! The relaxation replaces `s ∈ {0,1}^N` by the circumscribed ball
//! `‖s - ½1‖² <= N/4`. Its Lagrangian dual is a semidefinite program with
//! zero duality gap, so the global optimum of this trust-region subproblem
//! is the semidefinite lower bound on the integer optimum.
//!
//! The solver works in `u = s - ½1`, where the problem reads
//! `min uᵀQu + 2gᵀu + k` over `‖u‖ <= r` with `g = ½Q1 + b`, `r² = N/4`.
//! With `Q = V Λ Vᵀ` and `ĝ = Vᵀg` the boundary multiplier is the root of
//! `Σ ĝᵢ² / (λᵢ + λ)² = r²` to the right of `max(0, -λ_min)`.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::loss::{expected_loss, LossMatrices, LossWeights, QpForm};
use crate::numerics::{cholesky, gaussian_vector, sym_eig, Matrix, RngStream, SymmetricEigen, Vector};

/// `|⟨g, v⟩| <= HARD_CASE_TOL · ‖g‖` marks `g` orthogonal to an eigenvector.
pub const HARD_CASE_TOL: f64 = 1e-10;
/// PSD and column-space tolerance used by [`dual_value`].
pub const DUAL_TOL: f64 = 1e-9;
pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const COMPLEMENTARITY_TOL: f64 = 1e-7;
/// Stationarity tolerance relative to `1 + ‖Q‖₂ r + ‖g‖`.
pub const STATIONARITY_TOL: f64 = 1e-8;

const SECULAR_MAX_ITERS: usize = 500;

fn serialize_vector<S: Serializer>(v: &Vector, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Qs + b + λ(s - ½1)‖₂`
    pub stationarity: f64,
    /// `λ(‖s - ½1‖² - N/4)`
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrsSolution {
    #[serde(serialize_with = "serialize_vector")]
    pub s_star: Vector,
    pub lambda_star: f64,
    pub lower_bound: f64,
    pub hard_case: bool,
    pub kkt: KktResiduals,
}

impl TrsSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution fields are serializable")
    }

    /// Checks feasibility, dual feasibility, complementarity and
    /// stationarity against the module tolerances.
    pub fn verify(&self, qp: &QpForm) -> Result<()> {
        let n = qp.n();
        let r2 = n as f64 / 4.0;
        let u = self.s_star.add_scalar(-0.5);
        if u.norm_squared() > r2 + FEASIBILITY_TOL {
            return Err(Error::Domain(format!(
                "‖s* - ½1‖² = {} exceeds N/4 = {r2}",
                u.norm_squared()
            )));
        }
        if self.lambda_star < 0.0 {
            return Err(Error::Domain(format!("negative multiplier {}", self.lambda_star)));
        }
        let shifted = &qp.q + Matrix::identity(n, n) * self.lambda_star;
        let min_eig = sym_eig(&shifted)?.min_value();
        if min_eig < -DUAL_TOL * (1.0 + self.lambda_star) {
            return Err(Error::Domain(format!("Q + λI has eigenvalue {min_eig:e}")));
        }
        if self.kkt.complementarity.abs() > COMPLEMENTARITY_TOL {
            return Err(Error::Domain(format!(
                "complementarity residual {:e}",
                self.kkt.complementarity
            )));
        }
        let g = &qp.q * Vector::from_element(n, 0.5) + &qp.b;
        let q_norm = sym_eig(&qp.q)?.max_abs_value();
        let scale = 1.0 + q_norm * r2.sqrt() + g.norm();
        if self.kkt.stationarity > STATIONARITY_TOL * scale {
            return Err(Error::Domain(format!(
                "stationarity residual {:e} exceeds {:e}",
                self.kkt.stationarity,
                STATIONARITY_TOL * scale
            )));
        }
        Ok(())
    }
}

pub fn kkt_residuals(qp: &QpForm, s: &Vector, lambda: f64) -> KktResiduals {
    let u = s.add_scalar(-0.5);
    let grad = &qp.q * s + &qp.b + &u * lambda;
    KktResiduals {
        stationarity: grad.norm(),
        complementarity: lambda * (u.norm_squared() - qp.n() as f64 / 4.0),
    }
}

/// `‖u(λ)‖²` and its derivative, `u(λ) = -Σ ĝᵢ/(λᵢ + λ) vᵢ`.
fn secular(values: &Vector, gh: &Vector, lambda: f64) -> (f64, f64) {
    let mut phi = 0.0;
    let mut dphi = 0.0;
    for (&l, &c) in values.iter().zip(gh.iter()) {
        let d = l + lambda;
        let t = c * c / (d * d);
        phi += t;
        dphi -= 2.0 * t / d;
    }
    (phi, dphi)
}

/// Root of `‖u(λ)‖ = r` on `(lo, ∞)`, where `‖u(lo⁺)‖ > r`.
fn secular_root(values: &Vector, gh: &Vector, r: f64, lo: f64) -> Result<f64> {
    let g_norm = gh.norm();
    let mut lo = lo;
    let mut hi = lo.max(g_norm / r - values[0]).max(lo + f64::EPSILON * (1.0 + lo.abs()));
    while secular(values, gh, hi).0 > r * r {
        hi = 2.0 * hi + 1.0;
    }
    // Newton on 1/‖u(λ)‖ - 1/r, which is nearly linear in λ, kept inside the bracket.
    let mut lambda = hi;
    for _ in 0..SECULAR_MAX_ITERS {
        let (phi, dphi) = secular(values, gh, lambda);
        let norm = phi.sqrt();
        if (norm - r).abs() <= 1e-14 * r {
            return Ok(lambda);
        }
        if norm > r {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let psi = 1.0 / norm - 1.0 / r;
        let dpsi = -0.5 * dphi / (phi * norm);
        let newton = lambda - psi / dpsi;
        lambda = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            return Ok(lambda);
        }
    }
    Err(Error::SecularNoConvergence(format!(
        "bracket [{lo:e}, {hi:e}] after {SECULAR_MAX_ITERS} iterations"
    )))
}

/// Global minimizer of `sᵀQs + 2bᵀs + c₁` over `‖s - ½1‖² <= N/4`.
pub fn solve_qcqp(qp: &QpForm) -> Result<TrsSolution> {
    let n = qp.n();
    if n == 0 {
        return Err(Error::invalid("empty problem"));
    }
    let eig = sym_eig(&qp.q)?;
    let half = Vector::from_element(n, 0.5);
    let g = &qp.q * &half + &qp.b;
    let r = (n as f64 / 4.0).sqrt();
    let gh = eig.vectors.tr_mul(&g);
    let g_norm = g.norm();
    let eig_tol = 1e-12 * eig.max_abs_value().max(1.0);
    let lam_min = eig.values[0];
    let in_min_space = |i: usize| eig.values[i] <= lam_min + eig_tol;
    let orthogonal = |i: usize| gh[i].abs() <= HARD_CASE_TOL * g_norm;

    let (u, lambda, hard_case) = 'solve: {
        if lam_min >= -eig_tol {
            // Unconstrained minimum-norm stationary point, if one exists.
            let singular_ok = (0..n).all(|i| eig.values[i] > eig_tol || orthogonal(i));
            if singular_ok {
                let coeffs = Vector::from_iterator(
                    n,
                    (0..n).map(|i| if eig.values[i] > eig_tol { -gh[i] / eig.values[i] } else { 0.0 }),
                );
                if coeffs.norm() <= r {
                    break 'solve (&eig.vectors * coeffs, 0.0, false);
                }
            }
        }
        let lo = (-lam_min).max(0.0);
        if (0..n).filter(|&i| in_min_space(i)).all(orthogonal) {
            let rest = Vector::from_iterator(
                n,
                (0..n).map(|i| if in_min_space(i) { 0.0 } else { -gh[i] / (eig.values[i] + lo) }),
            );
            let rest_norm2 = rest.norm_squared();
            if rest_norm2 <= r * r {
                let tau = (r * r - rest_norm2).max(0.0).sqrt();
                let u = &eig.vectors * rest + eig.vectors.column(0) * tau;
                break 'solve (u, lo, true);
            }
        }
        let lambda = secular_root(&eig.values, &gh, r, lo)?;
        let coeffs = Vector::from_iterator(n, (0..n).map(|i| -gh[i] / (eig.values[i] + lambda)));
        (&eig.vectors * coeffs, lambda, false)
    };

    let u_norm = u.norm();
    let u = if u_norm > r { u * (r / u_norm) } else { u };
    let s_star = u + half;
    let lower_bound = qp.objective(&s_star);
    if !lower_bound.is_finite() {
        return Err(Error::NonFinite("relaxation objective".into()));
    }
    let kkt = kkt_residuals(qp, &s_star, lambda);
    Ok(TrsSolution {
        s_star,
        lambda_star: lambda,
        lower_bound,
        hard_case,
        kkt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualValue {
    Finite(f64),
    /// `Q + λI` is not PSD or `b - (λ/2)1` leaves its column space.
    Unbounded,
}

impl DualValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            DualValue::Finite(v) => Some(v),
            DualValue::Unbounded => None,
        }
    }
}

/// Evaluates the dual function at many multipliers from one
/// eigendecomposition of `Q`.
#[derive(Debug, Clone)]
pub struct DualEvaluator {
    eig: SymmetricEigen,
    b_hat: Vector,
    ones_hat: Vector,
    c1: f64,
}

impl DualEvaluator {
    pub fn new(qp: &QpForm) -> Result<Self> {
        let eig = sym_eig(&qp.q)?;
        let ones = Vector::from_element(qp.n(), 1.0);
        Ok(Self {
            b_hat: eig.vectors.tr_mul(&qp.b),
            ones_hat: eig.vectors.tr_mul(&ones),
            c1: qp.c1,
            eig,
        })
    }

    pub fn eigenvalues(&self) -> &Vector {
        &self.eig.values
    }

    /// `c₁ - hᵀ(Q + λI)†h` with `h = b - (λ/2)1`.
    pub fn value(&self, lambda: f64) -> Result<DualValue> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("multiplier {lambda} must be >= 0")));
        }
        let shifted = self.eig.values.add_scalar(lambda);
        let scale = shifted.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if shifted.iter().any(|&d| d < -DUAL_TOL * scale) {
            return Ok(DualValue::Unbounded);
        }
        let h_hat = &self.b_hat - &self.ones_hat * (0.5 * lambda);
        let h_scale = 1.0 + h_hat.norm();
        let mut quad = 0.0;
        for (&d, &h) in shifted.iter().zip(h_hat.iter()) {
            if d.abs() <= DUAL_TOL * scale {
                if h.abs() > DUAL_TOL * h_scale {
                    return Ok(DualValue::Unbounded);
                }
            } else {
                quad += h * h / d;
            }
        }
        Ok(DualValue::Finite(self.c1 - quad))
    }
}

pub fn dual_value(qp: &QpForm, lambda: f64) -> Result<DualValue> {
    DualEvaluator::new(qp)?.value(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMethod {
    ProjectionThreshold,
    Randomized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedDecision {
    pub s: Vec<u8>,
    pub method: RoundingMethod,
    pub expected_loss: f64,
}

/// Clamp to `[0, 1]^N`, then remove iff the clamped value is `>= ½`.
pub fn projection_decision(s_star: &Vector) -> Vec<u8> {
    s_star.iter().map(|&x| u8::from(x.clamp(0.0, 1.0) >= 0.5)).collect()
}

pub fn round_projection(s_star: &Vector, mats: &LossMatrices, w: &LossWeights) -> Result<RoundedDecision> {
    let s = projection_decision(s_star);
    let expected_loss = crate::loss::decision_loss(mats, w, &s)?;
    Ok(RoundedDecision {
        s,
        method: RoundingMethod::ProjectionThreshold,
        expected_loss,
    })
}

/// Unit vectors `vᵢ` with `s*s*ᵀ + I = VᵀV`, returned as the rows of the
/// result.
pub fn hyperplane_vectors(s_star: &Vector) -> Result<Matrix> {
    let n = s_star.len();
    let gram = s_star * s_star.transpose() + Matrix::identity(n, n);
    let mut l = cholesky(&gram)?;
    for mut row in l.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    Ok(l)
}

/// `sᵢ = 1` iff `vᵢᵀz > 0`.
pub fn hyperplane_sample(vectors: &Matrix, z: &Vector) -> Vec<u8> {
    (vectors * z).iter().map(|&x| u8::from(x > 0.0)).collect()
}

/// Best of `samples` hyperplane draws with `z ~ N(½1, I)`; sample `k` uses
/// stream `seed / k`. Ties keep the earliest sample.
pub fn randomized_round(
    s_star: &Vector,
    mats: &LossMatrices,
    w: &LossWeights,
    samples: usize,
    seed: u64,
) -> Result<RoundedDecision> {
    if samples == 0 {
        return Err(Error::invalid("at least one rounding sample is required"));
    }
    if s_star.len() != mats.n() {
        return Err(Error::DimensionMismatch {
            expected: mats.n(),
            found: s_star.len(),
        });
    }
    let vectors = hyperplane_vectors(s_star)?;
    let mean = Vector::from_element(s_star.len(), 0.5);
    let root = RngStream::new(seed);
    let mut best: Option<(Vec<u8>, f64)> = None;
    for k in 0..samples {
        let z = gaussian_vector(&mut root.split(k as u64), &mean);
        let s = hyperplane_sample(&vectors, &z);
        let loss = expected_loss(mats, w, &crate::loss::decision_vector(&s))?;
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((s, loss));
        }
    }
    let (s, expected_loss) = best.expect("samples >= 1");
    Ok(RoundedDecision {
        s,
        method: RoundingMethod::Randomized,
        expected_loss,
    })
}

/// `max(0, 1ᵀb + ¼·1ᵀQ1 - 2bᵀs*)`
pub fn bound_beta(qp: &QpForm, s_star: &Vector) -> f64 {
    let ones = Vector::from_element(qp.n(), 1.0);
    let beta = qp.b.sum() + 0.25 * ones.dot(&(&qp.q * &ones)) - 2.0 * qp.b.dot(s_star);
    beta.max(0.0)
}
