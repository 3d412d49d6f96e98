//! Compression of a perturbation against `H₁ = a + b|H|` and the relative
//! bound constants `(a, b)` of `|ψᵀAψ| ≤ a‖ψ‖² + b·ψᵀ|H|ψ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    eigendecompose, shifted_absolute_weights, EigenSystem, SymmetricOperator, TINY,
};

/// Constants of the relative bound. `b < 1` is enforced only by the
/// operations that need it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub a: f64,
    pub b: f64,
}

impl BoundPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || b < 0.0 {
            return Err(Error::Precondition(format!(
                "bound pair needs finite a and finite b >= 0, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// `a + b|λ|`, infinite for infinite `λ` unless `a + b|λ|` collapses to
    /// `a` (when `b = 0`).
    pub fn radius(&self, lambda: f64) -> f64 {
        if lambda.is_infinite() {
            if self.b > 0.0 {
                f64::INFINITY
            } else {
                self.a
            }
        } else {
            self.a + self.b * lambda.abs()
        }
    }

    pub(crate) fn require_b_below_one(&self) -> Result<()> {
        if self.b >= 1.0 {
            return Err(Error::Precondition(format!("need b < 1, got b = {}", self.b)));
        }
        Ok(())
    }
}

/// `C = H₁^{-1/2}·A·H₁^{-1/2}` with its norm and spectral range.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPerturbation {
    pub c: SymmetricOperator,
    pub norm: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

/// The JSON summary emitted by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionSummary {
    pub norm: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl CompressedPerturbation {
    pub fn summary(&self) -> CompressionSummary {
        CompressionSummary {
            norm: self.norm,
            c_minus: self.c_minus,
            c_plus: self.c_plus,
        }
    }
}

/// `H` diagonalized once, with `H₁` represented by its weights in the
/// eigenbasis. Everything that needs `H₁^{±1/2}` goes through here.
#[derive(Debug, Clone)]
pub struct RelativeFrame {
    pub eig: EigenSystem,
    pub bounds: BoundPair,
    weights: Vec<f64>,
}

impl RelativeFrame {
    pub fn new(h: &SymmetricOperator, bounds: BoundPair) -> Result<Self> {
        Self::from_eigensystem(eigendecompose(h)?, bounds)
    }

    pub fn from_eigensystem(eig: EigenSystem, bounds: BoundPair) -> Result<Self> {
        let weights = shifted_absolute_weights(&eig, bounds)?;
        Ok(Self {
            eig,
            bounds,
            weights,
        })
    }

    /// Eigenvalues of `H₁` in the order of the spectrum of `H`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn h1(&self) -> DMatrix<f64> {
        self.eig.weighted(&self.weights)
    }

    pub fn h1_pow(&self, p: f64) -> DMatrix<f64> {
        let w: Vec<f64> = self.weights.iter().map(|x| x.powf(p)).collect();
        self.eig.weighted(&w)
    }

    pub fn h1_sqrt(&self) -> DMatrix<f64> {
        let w: Vec<f64> = self.weights.iter().map(|x| x.sqrt()).collect();
        self.eig.weighted(&w)
    }

    pub fn h1_inv_sqrt(&self) -> DMatrix<f64> {
        let w: Vec<f64> = self.weights.iter().map(|x| 1.0 / x.sqrt()).collect();
        self.eig.weighted(&w)
    }

    /// `H₁^{-1/2}·A·H₁^{-1/2}`, computed in the eigenbasis of `H`.
    pub fn compress_matrix(&self, a: &SymmetricOperator) -> SymmetricOperator {
        let mut local = self.eig.to_eigenbasis(a.matrix());
        let n = self.weights.len();
        for i in 0..n {
            for j in 0..n {
                local[(i, j)] /= (self.weights[i] * self.weights[j]).sqrt();
            }
        }
        let v = &self.eig.vectors;
        SymmetricOperator::symmetrized(v * local * v.transpose())
    }

    pub fn compress(&self, a: &SymmetricOperator) -> Result<CompressedPerturbation> {
        if a.dim() != self.eig.dim() {
            return Err(Error::Dimension(format!(
                "H is {0}x{0} but A is {1}x{1}",
                self.eig.dim(),
                a.dim()
            )));
        }
        let c = self.compress_matrix(a);
        let spec = eigendecompose(&c)?;
        Ok(CompressedPerturbation {
            norm: spec.norm(),
            c_minus: spec.min(),
            c_plus: spec.max(),
            c,
        })
    }
}

pub fn compress(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
) -> Result<CompressedPerturbation> {
    RelativeFrame::new(h, bounds)?.compress(a)
}

const MINIMAL_B_REL_TOL: f64 = 1e-10;
const MINIMAL_B_CEILING: f64 = 18446744073709551616.0; // 2^64

/// Smallest `b ≥ 0` with `‖compress(H, A, (a, b))‖ ≤ 1`, or `+∞` when no
/// finite `b` works.
pub fn minimal_b(h: &SymmetricOperator, a: &SymmetricOperator, a_const: f64) -> Result<f64> {
    if !(a_const >= 0.0) || !a_const.is_finite() {
        return Err(Error::Precondition(format!("need finite a >= 0, got {a_const}")));
    }
    if a.dim() != h.dim() {
        return Err(Error::Dimension(format!("H is {}, A is {}", h.dim(), a.dim())));
    }
    let eig = eigendecompose(h)?;
    let scale = h.norm_max().max(TINY);
    let a_local = eig.to_eigenbasis(a.matrix());
    if a_local.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }

    // With a = 0 the kernel of |H| carries no weight at all; A must vanish on it.
    let mut keep: Vec<usize> = (0..eig.dim()).collect();
    if a_const == 0.0 {
        let kernel: Vec<usize> = (0..eig.dim())
            .filter(|&i| eig.values[i].abs() <= 1e-12 * scale)
            .collect();
        if !kernel.is_empty() {
            let mut worst = 0.0_f64;
            for &k in &kernel {
                for j in 0..eig.dim() {
                    worst = worst.max(a_local[(j, k)].abs());
                }
            }
            if worst > 1e-12 * a.norm_max() {
                return Err(Error::UnboundedRatio { kernel_norm: worst });
            }
            keep.retain(|i| !kernel.contains(i));
        }
    }
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| a_local[(keep[i], keep[j])]);
    let abs_vals: Vec<f64> = keep.iter().map(|&i| eig.values[i].abs()).collect();

    let feasible = |b: f64| -> Result<bool> {
        let w: Vec<f64> = abs_vals.iter().map(|l| a_const + b * l).collect();
        if w.iter().any(|x| !(*x > 0.0)) {
            return Ok(false);
        }
        let c = DMatrix::from_fn(keep.len(), keep.len(), |i, j| sub[(i, j)] / (w[i] * w[j]).sqrt());
        Ok(eigendecompose(&SymmetricOperator::symmetrized(c))?.norm() <= 1.0)
    };

    if a_const > 0.0 && feasible(0.0)? {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !feasible(hi)? {
        hi *= 2.0;
        if hi > MINIMAL_B_CEILING {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > MINIMAL_B_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Splits a semidefinite `A` into `A₀ + e₀·I` with the spectrum of `A₀`
/// touching zero: `e₀ = min σ(A)` for `A ⪰ 0`, `e₀ = max σ(A)` for `A ⪯ 0`.
pub fn extract_scalar_part(a: &SymmetricOperator) -> Result<(SymmetricOperator, f64)> {
    let eig = eigendecompose(a)?;
    let tol = 1e-12 * a.norm_max();
    let e0 = if eig.min() >= -tol {
        eig.min()
    } else if eig.max() <= tol {
        eig.max()
    } else {
        return Err(Error::Precondition(format!(
            "A is indefinite (spectrum [{}, {}]); the scalar part is defined for semidefinite A only",
            eig.min(),
            eig.max()
        )));
    };
    Ok((a.shifted(-e0), e0))
}

/// `C = Z₂ᵀ·Z₁` with `k×n` factors, `k` the numerical rank of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPerturbation {
    pub z1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
}

impl FactoredPerturbation {
    pub fn rank(&self) -> usize {
        self.z1.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z1.ncols()
    }

    pub fn product(&self) -> DMatrix<f64> {
        self.z2.transpose() * &self.z1
    }
}

pub const DEFAULT_RANK_CUTOFF: f64 = 1e-12;

pub fn factor_perturbation(c: &SymmetricOperator) -> Result<FactoredPerturbation> {
    factor_perturbation_with_cutoff(c, DEFAULT_RANK_CUTOFF)
}

/// Rows are `√|μ|·vᵀ` and `sign(μ)·√|μ|·vᵀ` over eigenpairs with
/// `|μ| > rel_cutoff·‖C‖`, in descending order of `μ`.
pub fn factor_perturbation_with_cutoff(
    c: &SymmetricOperator,
    rel_cutoff: f64,
) -> Result<FactoredPerturbation> {
    let eig = eigendecompose(c)?;
    let n = c.dim();
    let cut = rel_cutoff * eig.norm();
    let kept: Vec<usize> = (0..n).rev().filter(|&i| eig.values[i].abs() > cut).collect();
    let mut z1 = DMatrix::zeros(kept.len(), n);
    let mut z2 = DMatrix::zeros(kept.len(), n);
    for (row, &i) in kept.iter().enumerate() {
        let mu = eig.values[i];
        let r = mu.abs().sqrt();
        let s = mu.signum();
        for col in 0..n {
            let v = eig.vectors[(col, i)];
            z1[(row, col)] = r * v;
            z2[(row, col)] = s * r * v;
        }
    }
    Ok(FactoredPerturbation { z1, z2 })
}
