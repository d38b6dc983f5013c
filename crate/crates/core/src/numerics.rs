//! Dense symmetric linear algebra and seeded random streams.
//!
//! Everything random in the crate is drawn from an [`RngStream`]. Streams
//! are identified by a master seed plus a path of split indices, so a
//! restart or a trial can derive its own stream without depending on the
//! order in which siblings were consumed.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative symmetry tolerance accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below `PINV_CUTOFF * max|λ|` are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-15;

/// Spectral decomposition `A = V diag(values) Vᵀ` with ascending values.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vector,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn reconstruct(&self) -> Matrix {
        let scaled = &self.vectors * Matrix::from_diagonal(&self.values);
        scaled * self.vectors.transpose()
    }

    /// Moore–Penrose pseudo-inverse, dropping eigenvalues below the
    /// [`PINV_CUTOFF`] relative threshold.
    pub fn pseudo_inverse(&self) -> Matrix {
        let n = self.values.len();
        let cutoff = PINV_CUTOFF * self.max_abs_value();
        let inv = Vector::from_iterator(
            n,
            self.values
                .iter()
                .map(|&v| if v.abs() > cutoff { 1.0 / v } else { 0.0 }),
        );
        let scaled = &self.vectors * Matrix::from_diagonal(&inv);
        scaled * self.vectors.transpose()
    }
}

fn max_asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_symmetric(a: &Matrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let scale = a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(a: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.nrows();

    // Row-major working copies; symmetrize away the tolerated asymmetry.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += w[i * n + j] * w[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = frob == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        if off_norm(&w) <= JACOBI_TOL * frob {
            converged = true;
            break;
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                // Skip entries already negligible next to both diagonals.
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    w[p * n + q] = 0.0;
                    w[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    w[k * n + p] = c * akp - s * akq;
                    w[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = w[p * n + k];
                    let aqk = w[q * n + k];
                    w[p * n + k] = c * apk - s * aqk;
                    w[q * n + k] = s * apk + c * aqk;
                }
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        let off = off_norm(&w);
        // Accept a stalled sweep if it is already far inside the residual budget.
        if off > 1e-11 * frob {
            return Err(Error::EigenNoConvergence {
                sweeps,
                off_norm: off,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].total_cmp(&w[j * n + j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| w[i * n + i]));
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[row * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Lower-triangular `L` with `L Lᵀ = A`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j + 1,
                value: d,
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut x = a[(i, j)];
            for k in 0..j {
                x -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = x / ljj;
        }
    }
    Ok(l)
}

pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    Ok(sym_eig(a)?.pseudo_inverse())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(master: u64, path: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(master);
    for (depth, &idx) in path.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(idx.wrapping_add((depth as u64) << 48)));
    }
    let mut seed = [0u8; 32];
    let mut x = h;
    for chunk in seed.chunks_mut(8) {
        x = splitmix64(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    seed
}

/// A deterministic random stream with recorded provenance.
///
/// Two streams with the same master seed and split path produce the same
/// sequence, regardless of how many other streams were split or consumed.
#[derive(Debug, Clone)]
pub struct RngStream {
    master: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self::at(master_seed, Vec::new())
    }

    fn at(master: u64, path: Vec<u64>) -> Self {
        let rng = ChaCha8Rng::from_seed(derive_seed(master, &path));
        Self { master, path, rng }
    }

    /// Child stream at `path ++ [index]`. Does not advance `self`.
    pub fn split(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self::at(self.master, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Draws `mean.len()` independent unit-variance normals (ziggurat) shifted
/// by `mean`.
pub fn gaussian_vector(stream: &mut RngStream, mean: &Vector) -> Vector {
    Vector::from_iterator(
        mean.len(),
        mean.iter().map(|&m| {
            let z: f64 = StandardNormal.sample(stream);
            m + z
        }),
    )
}
