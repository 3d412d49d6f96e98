//! Dense real symmetric matrices as models of selfadjoint operators.
//!
//! Everything spectral in this crate goes through [`eigendecompose`], a
//! Householder tridiagonalization followed by implicit QL iterations. It is
//! deterministic for a fixed input and is the oracle for all other checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relative_form::BoundPair;

/// Floor used when a relative tolerance is taken against a zero matrix.
pub(crate) const TINY: f64 = f64::MIN_POSITIVE;

/// A real symmetric matrix. Symmetry is exact: construction replaces the
/// input by `(M + Mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    m: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("dimension must be at least 1".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Callers guarantee a square, nonempty,
    /// finite matrix.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        let m = (m + t) * 0.5;
        Self { m }
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: &self.m * s }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m * s,
        }
    }

    pub fn shifted(&self, s: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += s;
        }
        Self { m }
    }

    /// Congruence `X·self·Xᵀ`, symmetrized.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Self {
        Self::symmetrized(x * &self.m * x.transpose())
    }

    /// Max-norm distance to `other`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    assert_eq!(x.shape(), y.shape(), "shape mismatch");
    x.iter()
        .zip(y.iter())
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
}

/// Largest absolute deviation from symmetry, `max |M_ij - M_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n.min(m.ncols()) {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Spectral norm, `max |λ|`.
    pub fn norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `V·diag(w)·Vᵀ` for arbitrary weights `w`.
    pub fn weighted(&self, w: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, wj) in w.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*wj);
        }
        scaled * self.vectors.transpose()
    }

    /// `f(H)` on the stored spectrum.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> Result<SymmetricOperator> {
        let mut w = Vec::with_capacity(self.values.len());
        for &lambda in &self.values {
            let v = f(lambda);
            if !v.is_finite() {
                return Err(Error::FunctionDomain { eigenvalue: lambda });
            }
            w.push(v);
        }
        Ok(SymmetricOperator::symmetrized(self.weighted(&w)))
    }

    /// Orthogonal projection onto the span of eigenvectors `idx`.
    pub fn projection(&self, idx: &[usize]) -> DMatrix<f64> {
        let n = self.dim();
        let mut p = DMatrix::zeros(n, n);
        for &k in idx {
            let v = self.vectors.column(k);
            p += v * v.transpose();
        }
        p
    }

    /// `Vᵀ·M·V`, the representation of `M` in this eigenbasis.
    pub fn to_eigenbasis(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.vectors.transpose() * m * &self.vectors
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn eigendecompose(h: &SymmetricOperator) -> Result<EigenSystem> {
    let n = h.dim();
    let mut v: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            v.push(h.m[(i, j)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    implicit_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        // Sign convention: the largest-magnitude component is positive.
        let mut pivot = 0;
        for r in 0..n {
            if v[r * n + src].abs() > v[pivot * n + src].abs() {
                pivot = r;
            }
        }
        let s = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = s * v[r * n + src];
        }
    }
    Ok(EigenSystem { values, vectors })
}

/// Householder reduction to tridiagonal form (Martin/Reinsch/Wilkinson,
/// tred2). On exit `v` holds the accumulated orthogonal transform, `d` the
/// diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

const MAX_QL_SWEEPS: usize = 60;

/// Implicit QL with Wilkinson-type shifts on the tridiagonal (d, e)
/// (tql2), accumulating rotations into `v`.
fn implicit_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence {
                        dim: n,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `f(H) = V·diag(f(λ))·Vᵀ`.
pub fn matrix_function<F: Fn(f64) -> f64>(h: &SymmetricOperator, f: F) -> Result<SymmetricOperator> {
    eigendecompose(h)?.apply(f)
}

/// `H₁ = a·I + b·|H|`; fails when some `a + b|λ| ≤ 0`.
pub fn shifted_absolute(h: &SymmetricOperator, bounds: BoundPair) -> Result<SymmetricOperator> {
    let eig = eigendecompose(h)?;
    shifted_absolute_weights(&eig, bounds)?;
    eig.apply(|l| bounds.a + bounds.b * l.abs())
}

/// The diagonal of `H₁` in the eigenbasis of `H`, after checking positivity.
pub(crate) fn shifted_absolute_weights(eig: &EigenSystem, bounds: BoundPair) -> Result<Vec<f64>> {
    let mut w = Vec::with_capacity(eig.dim());
    for &lambda in &eig.values {
        let x = bounds.a + bounds.b * lambda.abs();
        if !(x > 0.0) {
            return Err(Error::NotPositiveDefinite {
                what: format!("H1 = {} + {}|H|", bounds.a, bounds.b),
                eigenvalue: lambda,
            });
        }
        w.push(x);
    }
    Ok(w)
}

/// An open interval of the resolvent set; finite ends are eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lower: f64,
    pub upper: f64,
}

impl SpectralGap {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::Precondition(format!(
                "gap needs lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

/// Default cluster merge tolerance, `1e-12·‖H‖_max`.
pub fn default_merge_tol(h: &SymmetricOperator) -> f64 {
    1e-12 * h.norm_max()
}

/// Maximal gaps between eigenvalue clusters, including the two unbounded ones.
pub fn spectral_gaps(h: &SymmetricOperator, merge_tol: f64) -> Result<Vec<SpectralGap>> {
    if !(merge_tol >= 0.0) {
        return Err(Error::Precondition(format!("merge_tol must be >= 0, got {merge_tol}")));
    }
    let eig = eigendecompose(h)?;
    Ok(gaps_of_sorted(&eig.values, merge_tol))
}

/// Gaps of an ascending list of spectral points.
pub fn gaps_of_sorted(values: &[f64], merge_tol: f64) -> Vec<SpectralGap> {
    let mut gaps = Vec::new();
    if values.is_empty() {
        gaps.push(SpectralGap {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
        return gaps;
    }
    gaps.push(SpectralGap {
        lower: f64::NEG_INFINITY,
        upper: values[0],
    });
    for w in values.windows(2) {
        if w[1] - w[0] > merge_tol {
            gaps.push(SpectralGap {
                lower: w[0],
                upper: w[1],
            });
        }
    }
    gaps.push(SpectralGap {
        lower: values[values.len() - 1],
        upper: f64::INFINITY,
    });
    gaps
}

/// How `sign(0)` is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroPolicy {
    Plus,
    Minus,
    #[default]
    Error,
}

/// `J = sign(H)` together with the spectral projections `P± = (1 ± J)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSplit {
    pub j: SymmetricOperator,
    pub p_plus: SymmetricOperator,
    pub p_minus: SymmetricOperator,
    /// Eigen-indices (ascending order of `H`) assigned to `P+`.
    pub plus_indices: Vec<usize>,
    pub minus_indices: Vec<usize>,
}

pub fn sign_split(h: &SymmetricOperator, zero_policy: ZeroPolicy) -> Result<SignSplit> {
    let eig = eigendecompose(h)?;
    sign_split_from(&eig, h.norm_max(), zero_policy)
}

pub(crate) fn sign_split_from(eig: &EigenSystem, scale: f64, zero_policy: ZeroPolicy) -> Result<SignSplit> {
    let zero_tol = 1e-12 * scale;
    let mut signs = Vec::with_capacity(eig.dim());
    let mut plus_indices = Vec::new();
    let mut minus_indices = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        let s = if lambda.abs() <= zero_tol {
            match zero_policy {
                ZeroPolicy::Plus => 1.0,
                ZeroPolicy::Minus => -1.0,
                ZeroPolicy::Error => return Err(Error::SingularSign { eigenvalue: lambda }),
            }
        } else if lambda > 0.0 {
            1.0
        } else {
            -1.0
        };
        if s > 0.0 {
            plus_indices.push(k);
        } else {
            minus_indices.push(k);
        }
        signs.push(s);
    }
    let j = SymmetricOperator::symmetrized(eig.weighted(&signs));
    let plus: Vec<f64> = signs.iter().map(|&s| if s > 0.0 { 1.0 } else { 0.0 }).collect();
    let minus: Vec<f64> = signs.iter().map(|&s| if s < 0.0 { 1.0 } else { 0.0 }).collect();
    Ok(SignSplit {
        j,
        p_plus: SymmetricOperator::symmetrized(eig.weighted(&plus)),
        p_minus: SymmetricOperator::symmetrized(eig.weighted(&minus)),
        plus_indices,
        minus_indices,
    })
}

/// Counts of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn as_array(&self) -> [usize; 3] {
        [self.positive, self.negative, self.zero]
    }
}

/// Inertia with eigenvalues of magnitude `<= zero_tol` counted as zero.
pub fn inertia(h: &SymmetricOperator, zero_tol: f64) -> Result<Inertia> {
    let eig = eigendecompose(h)?;
    Ok(inertia_of(&eig.values, zero_tol))
}

pub fn inertia_of(values: &[f64], zero_tol: f64) -> Inertia {
    let mut out = Inertia {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for &v in values {
        if v > zero_tol {
            out.positive += 1;
        } else if v < -zero_tol {
            out.negative += 1;
        } else {
            out.zero += 1;
        }
    }
    out
}

/// Smallest eigenvalue; used for semidefiniteness checks.
pub fn min_eigenvalue(h: &SymmetricOperator) -> Result<f64> {
    Ok(eigendecompose(h)?.min())
}

/// `true` if `min σ(H) >= -slack`.
pub fn is_psd(h: &SymmetricOperator, slack: f64) -> Result<bool> {
    Ok(min_eigenvalue(h)? >= -slack)
}
