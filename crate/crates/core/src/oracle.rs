//! Exhaustive ground truth for small instances.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::loss::{decision_loss, LossMatrices, LossWeights};
use crate::numerics::{Matrix, Vector};
use crate::uncertainty::MaliciousnessModel;

pub const ORACLE_LIMIT: usize = 22;

/// Two losses within `TIE_TOL · (1 + |v|)` count as equal.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub s_opt: Vec<u8>,
    pub v_star: f64,
    pub tie_count: u64,
}

fn check_capacity(n: usize) -> Result<()> {
    if n > ORACLE_LIMIT {
        return Err(Error::Capacity { n, limit: ORACLE_LIMIT });
    }
    Ok(())
}

/// Maps a bitmask (bit `i` is `sᵢ`) to a key whose numeric order is the
/// lexicographic order of `(s₀, s₁, …)`.
fn lex_key(mask: u32, n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        mask.reverse_bits() >> (32 - n)
    }
}

fn mask_to_vec(mask: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
}

/// Running products for Gray-code enumeration: with `t = 1 - s`,
/// `Ps`, `Pᵀs`, `Mt`, `Mᵀt` and the loss itself.
struct State<'a> {
    mats: &'a LossMatrices,
    w: LossWeights,
    s: Vector,
    ps: Vector,
    pts: Vector,
    mt: Vector,
    mtt: Vector,
    value: f64,
}

impl<'a> State<'a> {
    fn new(mats: &'a LossMatrices, w: &LossWeights, mask: u32) -> Self {
        let n = mats.n();
        let mut st = Self {
            mats,
            w: *w,
            s: Vector::zeros(n),
            ps: Vector::zeros(n),
            pts: Vector::zeros(n),
            mt: Vector::zeros(n),
            mtt: Vector::zeros(n),
            value: 0.0,
        };
        st.resync(mask);
        st
    }

    fn resync(&mut self, mask: u32) {
        let n = self.mats.n();
        self.s = Vector::from_iterator(n, (0..n).map(|i| f64::from((mask >> i) & 1)));
        let t = self.s.map(|x| 1.0 - x);
        self.ps = &self.mats.p * &self.s;
        self.pts = self.mats.p.tr_mul(&self.s);
        self.mt = &self.mats.m * &t;
        self.mtt = self.mats.m.tr_mul(&t);
        let l1 = self.mats.b.dot(&self.s);
        let l2 = self.pts.sum() - self.s.dot(&self.ps);
        let l3 = t.dot(&self.mt);
        self.value = self.w.alpha1 * l1 + self.w.alpha2 * l2 + self.w.alpha3 * l3;
    }

    fn flip(&mut self, i: usize) {
        let (p, m): (&Matrix, &Matrix) = (&self.mats.p, &self.mats.m);
        let d = if self.s[i] == 0.0 { 1.0 } else { -1.0 };
        let p_row_sum: f64 = p.row(i).sum();
        let d_l1 = d * self.mats.b[i];
        let d_quad_p = d * (self.ps[i] + self.pts[i]) + p[(i, i)];
        let d_l2 = d * p_row_sum - d_quad_p;
        // t changes by -d at i.
        let d_l3 = -d * (self.mt[i] + self.mtt[i]) + m[(i, i)];
        self.value += self.w.alpha1 * d_l1 + self.w.alpha2 * d_l2 + self.w.alpha3 * d_l3;
        self.s[i] += d;
        self.ps.axpy(d, &p.column(i), 1.0);
        self.pts.axpy(d, &p.row(i).transpose(), 1.0);
        self.mt.axpy(-d, &m.column(i), 1.0);
        self.mtt.axpy(-d, &m.row(i).transpose(), 1.0);
    }
}

const RESYNC_PERIOD: u64 = 1 << 10;

/// Exact minimizer of the expected loss over all `2^N` decisions. Ties
/// resolve to the lexicographically smallest decision.
pub fn brute_force(mats: &LossMatrices, w: &LossWeights) -> Result<OracleResult> {
    let n = mats.n();
    check_capacity(n)?;
    w.validate()?;
    let mut st = State::new(mats, w, 0);
    let mut best_mask = 0u32;
    let mut best = st.value;
    let mut ties = 1u64;
    let total = 1u64 << n;
    let mut mask = 0u32;
    for k in 1..total {
        let bit = k.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if k % RESYNC_PERIOD == 0 {
            st.resync(mask);
        } else {
            st.flip(bit);
        }
        let v = st.value;
        let tol = TIE_TOL * (1.0 + best.abs().max(v.abs()));
        if v < best - tol {
            best = v;
            best_mask = mask;
            ties = 1;
        } else if (v - best).abs() <= tol {
            ties += 1;
            if lex_key(mask, n) < lex_key(best_mask, n) {
                best_mask = mask;
            }
            best = best.min(v);
        }
    }
    let s_opt = mask_to_vec(best_mask, n);
    let v_star = decision_loss(mats, w, &s_opt)?;
    Ok(OracleResult {
        s_opt,
        v_star,
        tie_count: ties,
    })
}

/// Maximum independent set by enumeration; among maximum sets, the one
/// whose sorted node list is lexicographically smallest.
pub fn max_independent_set(g: &Graph) -> Result<(Vec<usize>, usize)> {
    let n = g.n();
    check_capacity(n)?;
    let nbr: Vec<u32> = (0..n)
        .map(|u| g.neighbors(u).fold(0u32, |acc, v| acc | (1 << v)))
        .collect();
    let mut best: Vec<usize> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size < best.len() {
            continue;
        }
        let independent = (0..n).all(|u| (mask >> u) & 1 == 0 || nbr[u] & mask == 0);
        if !independent {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|&u| (mask >> u) & 1 == 1).collect();
        if size > best.len() || set < best {
            best = set;
        }
    }
    let size = best.len();
    Ok((best, size))
}

/// The special case used for the hardness reduction: no indirect loss,
/// every node malicious with probability ½ independently, and `α₃`
/// exceeding `2α₁K` with `K = n · max degree`.
pub fn hardness_instance(g: &Graph) -> Result<(MaliciousnessModel, LossWeights)> {
    let n = g.n();
    let max_deg = (0..n).map(|u| g.degree(u)).max().unwrap_or(0);
    let k = (n * max_deg) as f64;
    let model = MaliciousnessModel::independent(Vector::from_element(n, 0.5))?;
    let denom = 2.0 * k + 2.0;
    let w = LossWeights::normalized(1.0 / denom, 0.0, (2.0 * k + 1.0) / denom)?;
    Ok((model, w))
}
