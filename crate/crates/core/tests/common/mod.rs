#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use relspec_core::relative_form::{compress, BoundPair};
use relspec_core::SymmetricOperator;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricOperator {
    let g = gaussian(rng, n, n);
    SymmetricOperator::new((&g + g.transpose()) * 0.5).unwrap()
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian(rng, n, n).qr().q()
}

pub fn with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> SymmetricOperator {
    let q = random_orthogonal(rng, values.len());
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
    SymmetricOperator::new(&q * d * q.transpose()).unwrap()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Random symmetric `A` with `‖H₁^{-1/2}AH₁^{-1/2}‖ = u`.
pub fn admissible(rng: &mut ChaCha8Rng, h: &SymmetricOperator, bounds: BoundPair, u: f64) -> SymmetricOperator {
    let s = random_symmetric(rng, h.dim());
    let norm = compress(h, &s, bounds).unwrap().norm;
    s.scaled(u / norm)
}

/// Random positive semidefinite matrix of the given rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymmetricOperator {
    let g = gaussian(rng, n, rank);
    SymmetricOperator::new(&g * g.transpose()).unwrap()
}

/// Independent oracle: eigenvalues from nalgebra's symmetric solver.
pub fn reference_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}
