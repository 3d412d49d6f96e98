//! Explicit constructions of `T = H + A` through the compressed perturbation,
//! resolvent formulas, and block factorizations of indefinite symmetric
//! matrices.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{
    eigendecompose, max_abs_diff, sign_split_from, SignSplit, SymmetricOperator, ZeroPolicy, TINY,
};
use crate::relative_form::{BoundPair, FactoredPerturbation, RelativeFrame};

pub type C64 = Complex<f64>;

/// Above this condition estimate a matrix is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with the 1-norm condition estimate `‖M‖₁·‖M⁻¹‖₁`.
/// A singular LU reports an infinite condition.
pub fn inverse_with_condition(m: &DMatrix<C64>) -> (Option<DMatrix<C64>>, f64) {
    if m.nrows() == 0 {
        return (Some(m.clone()), 1.0);
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => {
            let cond = norm1(m) * norm1(&inv);
            let cond = if cond.is_finite() { cond } else { f64::INFINITY };
            (Some(inv), cond)
        }
        None => (None, f64::INFINITY),
    }
}

/// Largest entrywise modulus of a complex matrix.
pub fn complex_max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Result of the form-sum construction at a given `ζ`.
#[derive(Debug, Clone)]
pub struct FormSum {
    pub t: SymmetricOperator,
    pub c_zeta: DMatrix<C64>,
}

/// `C_ζ = (H − ζ)·H₁⁻¹ + C`, all in the eigenbasis of `H` and then mapped back.
fn c_zeta(frame: &RelativeFrame, c: &DMatrix<f64>, zeta: C64) -> DMatrix<C64> {
    let w: Vec<C64> = frame
        .eig
        .values
        .iter()
        .zip(frame.weights())
        .map(|(&l, &h1)| (C64::new(l, 0.0) - zeta) / h1)
        .collect();
    let v = to_complex(&frame.eig.vectors);
    let mut scaled = v.clone();
    for (mut col, wj) in scaled.column_iter_mut().zip(&w) {
        col *= *wj;
    }
    scaled * v.transpose() + to_complex(c)
}

/// `T = H₁^{1/2}·C_ζ·H₁^{1/2} + ζ`. At matrix scale this is `H + A` for every
/// admissible `(a, b)` and `ζ`.
pub fn form_sum(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    zeta: C64,
) -> Result<FormSum> {
    let frame = RelativeFrame::new(h, bounds)?;
    let c = frame.compress(a)?;
    let cz = c_zeta(&frame, c.c.matrix(), zeta);
    let s = to_complex(&frame.h1_sqrt());
    let mut t = &s * &cz * &s;
    for i in 0..t.nrows() {
        t[(i, i)] += zeta;
    }
    Ok(FormSum {
        t: SymmetricOperator::symmetrized(t.map(|z| z.re)),
        c_zeta: cz,
    })
}

/// `(H + A − ζ)⁻¹ = H₁^{-1/2}·C_ζ⁻¹·H₁^{-1/2}`.
pub fn resolvent(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    zeta: C64,
) -> Result<DMatrix<C64>> {
    let frame = RelativeFrame::new(h, bounds)?;
    resolvent_in(&frame, a, zeta)
}

pub(crate) fn resolvent_in(frame: &RelativeFrame, a: &SymmetricOperator, zeta: C64) -> Result<DMatrix<C64>> {
    let c = frame.compress_matrix(a);
    let cz = c_zeta(frame, c.matrix(), zeta);
    let (inv, condition) = inverse_with_condition(&cz);
    let inv = match inv {
        Some(inv) if condition <= CONDITION_LIMIT => inv,
        _ => return Err(Error::NearSingular { condition }),
    };
    let s = to_complex(&frame.h1_inv_sqrt());
    Ok(&s * inv * &s)
}

/// Output of [`factored_resolvent`].
#[derive(Debug, Clone)]
pub struct FactoredResolvent {
    pub resolvent: DMatrix<C64>,
    /// Condition estimate of `F_ζ = I + Z₁H₁(H − ζ)⁻¹Z₂ᵀ`.
    pub f_condition: f64,
    /// Condition estimate of `C_ζ`.
    pub c_condition: f64,
}

impl FactoredResolvent {
    /// `F_ζ` and `C_ζ` agree on invertibility.
    pub fn invertibility_agrees(&self) -> bool {
        (self.f_condition <= CONDITION_LIMIT) == (self.c_condition <= CONDITION_LIMIT)
    }
}

/// Resolvent via the low-rank factors `C = Z₂ᵀZ₁`:
/// `R − H₁^{1/2}R·Z₂ᵀ·F_ζ⁻¹·Z₁·H₁^{1/2}R` with `R = (H − ζ)⁻¹`.
pub fn factored_resolvent(
    h: &SymmetricOperator,
    factors: &FactoredPerturbation,
    bounds: BoundPair,
    zeta: C64,
) -> Result<FactoredResolvent> {
    let n = h.dim();
    if factors.dim() != n {
        return Err(Error::Dimension(format!(
            "factors act on dimension {}, H has {n}",
            factors.dim()
        )));
    }
    let frame = RelativeFrame::new(h, bounds)?;
    let scale = h.norm_max().max(zeta.norm()).max(TINY);
    let dist = frame
        .eig
        .values
        .iter()
        .map(|&l| (C64::new(l, 0.0) - zeta).norm())
        .fold(f64::INFINITY, f64::min);
    if dist <= 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "zeta = {zeta} lies on the spectrum of H (distance {dist:e})"
        )));
    }

    let v = to_complex(&frame.eig.vectors);
    let diag_apply = |f: &dyn Fn(f64, f64) -> C64| -> DMatrix<C64> {
        let mut scaled = v.clone();
        for (j, (&l, &w)) in frame.eig.values.iter().zip(frame.weights()).enumerate() {
            let s = f(l, w);
            for x in scaled.column_mut(j).iter_mut() {
                *x *= s;
            }
        }
        &scaled * v.transpose()
    };
    let r = diag_apply(&|l, _| C64::new(1.0, 0.0) / (C64::new(l, 0.0) - zeta));
    let h1_r = diag_apply(&|l, w| C64::new(w, 0.0) / (C64::new(l, 0.0) - zeta));
    let sqrt_h1_r = diag_apply(&|l, w| C64::new(w.sqrt(), 0.0) / (C64::new(l, 0.0) - zeta));

    let z1 = to_complex(&factors.z1);
    let z2t = to_complex(&factors.z2.transpose());
    let k = factors.rank();
    let f = DMatrix::<C64>::identity(k, k) + &z1 * &h1_r * &z2t;
    let (f_inv, f_condition) = inverse_with_condition(&f);

    let cz = c_zeta(&frame, &factors.product(), zeta);
    let (_, c_condition) = inverse_with_condition(&cz);

    let f_inv = match f_inv {
        Some(inv) if f_condition <= CONDITION_LIMIT => inv,
        _ => {
            return Err(Error::FactoredSingular {
                f_condition,
                c_condition,
            })
        }
    };
    let resolvent = if k == 0 {
        r
    } else {
        &r - &sqrt_h1_r * &z2t * f_inv * &z1 * &sqrt_h1_r
    };
    Ok(FactoredResolvent {
        resolvent,
        f_condition,
        c_condition,
    })
}

/// `T = H₁^{1/2}(J + C)H₁^{1/2} − a·J` with `H₁ = a + |H|`.
pub fn nenciu_form(
    h: &SymmetricOperator,
    c: &SymmetricOperator,
    a: f64,
    zero_policy: ZeroPolicy,
) -> Result<SymmetricOperator> {
    if c.dim() != h.dim() {
        return Err(Error::Dimension(format!("H is {}, C is {}", h.dim(), c.dim())));
    }
    let frame = RelativeFrame::new(h, BoundPair::new(a, 1.0)?)?;
    let split = sign_split_from(&frame.eig, h.norm_max(), zero_policy)?;
    let jc = split.j.add(c);
    let (_, condition) = inverse_with_condition(&to_complex(jc.matrix()));
    if condition > CONDITION_LIMIT {
        return Err(Error::Construction(format!(
            "J + C is not invertible (condition estimate {condition:e})"
        )));
    }
    let s = frame.h1_sqrt();
    let t = &s * jc.matrix() * &s - split.j.matrix() * a;
    Ok(SymmetricOperator::symmetrized(t))
}

/// Blocks of `[[H₊, B], [Bᵀ, −H₋]]` with `H±` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasidefiniteBlocks {
    pub hp: SymmetricOperator,
    pub hm: SymmetricOperator,
    pub b: DMatrix<f64>,
}

impl QuasidefiniteBlocks {
    pub fn new(hp: SymmetricOperator, hm: SymmetricOperator, b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != hp.dim() || b.ncols() != hm.dim() {
            return Err(Error::Dimension(format!(
                "B is {}x{}, expected {}x{}",
                b.nrows(),
                b.ncols(),
                hp.dim(),
                hm.dim()
            )));
        }
        require_positive_definite(&hp, "H+")?;
        require_positive_definite(&hm, "H-")?;
        Ok(Self { hp, hm, b })
    }

    pub fn p(&self) -> usize {
        self.hp.dim()
    }

    pub fn q(&self) -> usize {
        self.hm.dim()
    }

    pub fn assemble(&self) -> SymmetricOperator {
        let (p, q) = (self.p(), self.q());
        let mut t = DMatrix::zeros(p + q, p + q);
        t.view_mut((0, 0), (p, p)).copy_from(self.hp.matrix());
        t.view_mut((p, p), (q, q)).copy_from(&(-self.hm.matrix()));
        t.view_mut((0, p), (p, q)).copy_from(&self.b);
        t.view_mut((p, 0), (q, p)).copy_from(&self.b.transpose());
        SymmetricOperator::symmetrized(t)
    }
}

fn require_positive_definite(m: &SymmetricOperator, what: &str) -> Result<()> {
    let low = eigendecompose(m)?.min();
    if !(low > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            eigenvalue: low,
        });
    }
    Ok(())
}

/// `target = W·D·Wᵀ` with `W` invertible and `D` block diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceFactorization {
    pub w: DMatrix<f64>,
    pub d: SymmetricOperator,
}

impl CongruenceFactorization {
    pub fn reconstruct(&self) -> SymmetricOperator {
        self.d.congruence(&self.w)
    }
}

/// Block elimination of a quasidefinite matrix.
#[derive(Debug, Clone)]
pub struct QuasidefiniteFactorization {
    pub congruence: CongruenceFactorization,
    /// `−H₋ − BᵀH₊⁻¹B`, negative definite.
    pub schur: SymmetricOperator,
    /// `‖H₊^{-1/2}·B·H₋^{-1/2}‖`; the factorization exists for any value.
    pub f_norm: f64,
}

/// `T = W·diag(H₊, −H₋ − BᵀH₊⁻¹B)·Wᵀ`, `W = [[I, 0], [BᵀH₊⁻¹, I]]`.
pub fn quasidefinite_factor(blocks: &QuasidefiniteBlocks) -> Result<QuasidefiniteFactorization> {
    let (p, q) = (blocks.p(), blocks.q());
    let chol = cholesky(&blocks.hp, "H+")?;
    let hp_inv_b = chol.solve(&blocks.b);
    let schur = SymmetricOperator::symmetrized(-blocks.hm.matrix() - blocks.b.transpose() * &hp_inv_b);

    let mut w = DMatrix::identity(p + q, p + q);
    w.view_mut((p, 0), (q, p)).copy_from(&hp_inv_b.transpose());
    let mut d = DMatrix::zeros(p + q, p + q);
    d.view_mut((0, 0), (p, p)).copy_from(blocks.hp.matrix());
    d.view_mut((p, p), (q, q)).copy_from(schur.matrix());

    let hp_is = eigendecompose(&blocks.hp)?.apply(|x| 1.0 / x.sqrt())?;
    let hm_is = eigendecompose(&blocks.hm)?.apply(|x| 1.0 / x.sqrt())?;
    let f = hp_is.matrix() * &blocks.b * hm_is.matrix();
    let f_norm = spectral_norm(&f)?;

    Ok(QuasidefiniteFactorization {
        congruence: CongruenceFactorization {
            w,
            d: SymmetricOperator::symmetrized(d),
        },
        schur,
        f_norm,
    })
}

/// Largest singular value, from the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let g = SymmetricOperator::symmetrized(m.transpose() * m);
    Ok(eigendecompose(&g)?.max().max(0.0).sqrt())
}

fn cholesky(m: &SymmetricOperator, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.matrix().clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what: what.to_string(),
        eigenvalue: eigendecompose(m).map(|e| e.min()).unwrap_or(f64::NAN),
    })
}

/// Reusable solver for `T·x = r` with `T` quasidefinite: Cholesky of `H₊`
/// and of the negated Schur complement, then three triangular stages.
#[derive(Debug, Clone)]
pub struct QuasidefiniteSolver {
    p: usize,
    q: usize,
    b: DMatrix<f64>,
    hp: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    neg_schur: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl QuasidefiniteSolver {
    pub fn new(blocks: &QuasidefiniteBlocks) -> Result<Self> {
        let hp = cholesky(&blocks.hp, "H+")?;
        let hp_inv_b = hp.solve(&blocks.b);
        let s = SymmetricOperator::symmetrized(blocks.hm.matrix() + blocks.b.transpose() * &hp_inv_b);
        let neg_schur = cholesky(&s, "H- + B'H+^-1 B")?;
        Ok(Self {
            p: blocks.p(),
            q: blocks.q(),
            b: blocks.b.clone(),
            hp,
            neg_schur,
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let (p, q) = (self.p, self.q);
        if rhs.len() != p + q {
            return Err(Error::Dimension(format!("rhs has length {}, expected {}", rhs.len(), p + q)));
        }
        let r1 = rhs.rows(0, p).into_owned();
        let r2 = rhs.rows(p, q).into_owned();
        // y = W⁻¹r, z = D⁻¹y, x = W⁻ᵀz
        let hp_inv_r1 = self.hp.solve(&r1);
        let y2 = &r2 - self.b.transpose() * &hp_inv_r1;
        let x2 = -self.neg_schur.solve(&y2);
        let x1 = self.hp.solve(&(&r1 - &self.b * &x2));
        let mut x = DVector::zeros(p + q);
        x.rows_mut(0, p).copy_from(&x1);
        x.rows_mut(p, q).copy_from(&x2);
        Ok(x)
    }
}

pub fn quasidefinite_solve(blocks: &QuasidefiniteBlocks, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    QuasidefiniteSolver::new(blocks)?.solve(rhs)
}

/// The three factors of `J + D = L·M·R` for an off-diagonally dominant
/// operator, with `J = [[0, U], [Uᵀ, 0]]` and `D = diag(D₊, −D₋)`.
#[derive(Debug, Clone)]
pub struct OffDiagonalFactorization {
    pub u: DMatrix<f64>,
    pub j_plus_d: DMatrix<f64>,
    pub left: DMatrix<f64>,
    pub middle: DMatrix<f64>,
    pub right: DMatrix<f64>,
    /// Smallest eigenvalue of `D₊^{1/2}·U·D₋·Uᵀ·D₊^{1/2}`; the spectrum of
    /// `U·D₋·Uᵀ·D₊` is real and nonnegative, so `I + U·D₋·Uᵀ·D₊` is invertible.
    pub product_spectrum_min: f64,
}

impl OffDiagonalFactorization {
    pub fn product(&self) -> DMatrix<f64> {
        &self.left * &self.middle * &self.right
    }
}

pub fn offdiagonal_factor(
    b: &DMatrix<f64>,
    dp: &SymmetricOperator,
    dm: &SymmetricOperator,
) -> Result<OffDiagonalFactorization> {
    let p = b.nrows();
    if b.ncols() != p {
        return Err(Error::Precondition(format!(
            "B must be square for U to be an isometry onto, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if dp.dim() != p || dm.dim() != p {
        return Err(Error::Dimension("D+ and D- must match B".into()));
    }
    let gram = eigendecompose(&SymmetricOperator::symmetrized(b.transpose() * b))?;
    if !(gram.min() > 1e-24 * gram.max()) {
        return Err(Error::Precondition(format!(
            "B is rank deficient (smallest singular value {:e})",
            gram.min().max(0.0).sqrt()
        )));
    }
    let psd_slack = 1e-12 * dp.norm_max().max(dm.norm_max()).max(TINY);
    let dp_eig = eigendecompose(dp)?;
    let dm_eig = eigendecompose(dm)?;
    if dp_eig.min() < -psd_slack || dm_eig.min() < -psd_slack {
        return Err(Error::Precondition("D+ and D- must be positive semidefinite".into()));
    }

    let u = b * gram.apply(|x| 1.0 / x.sqrt())?.matrix();
    let ut = u.transpose();
    let i = DMatrix::<f64>::identity(p, p);
    let z = DMatrix::<f64>::zeros(p, p);
    let block = |a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(2 * p, 2 * p);
        m.view_mut((0, 0), (p, p)).copy_from(a);
        m.view_mut((0, p), (p, p)).copy_from(b);
        m.view_mut((p, 0), (p, p)).copy_from(c);
        m.view_mut((p, p), (p, p)).copy_from(d);
        m
    };
    let j_plus_d = block(dp.matrix(), &u, &ut, &(-dm.matrix()));
    let left = block(&i, &z, &(-(dm.matrix() * &ut)), &i);
    let middle = block(&u, &z, &z, &(&ut + dm.matrix() * &ut * dp.matrix()));
    let right = block(&(&ut * dp.matrix()), &i, &i, &z);

    let dp_sqrt = dp_eig.apply(|x| x.max(0.0).sqrt())?;
    let sym = SymmetricOperator::symmetrized(dp_sqrt.matrix() * &u * dm.matrix() * &ut * dp_sqrt.matrix());
    let product_spectrum_min = eigendecompose(&sym)?.min();

    Ok(OffDiagonalFactorization {
        u,
        j_plus_d,
        left,
        middle,
        right,
        product_spectrum_min,
    })
}

/// Schur-complement construction of `T` from a symmetric `τ` whose leading
/// block is positive definite.
#[derive(Debug, Clone)]
pub struct SchurConstruction {
    pub congruence: CongruenceFactorization,
    /// `N = H₊^{-1/2}·τ₁₂`.
    pub n: DMatrix<f64>,
    /// `H̃₋ = −τ₂₂ + NᵀN`, positive definite.
    pub h_tilde_minus: SymmetricOperator,
}

/// `τ = W·diag(H₊, −H̃₋)·Wᵀ` with `W = [[I, 0], [Nᵀ·H₊^{-1/2}, I]]`.
pub fn schur_construct(tau: &SymmetricOperator, p: usize) -> Result<SchurConstruction> {
    let n_total = tau.dim();
    if p == 0 || p >= n_total {
        return Err(Error::Precondition(format!(
            "split p = {p} must satisfy 0 < p < {n_total}"
        )));
    }
    let q = n_total - p;
    let m = tau.matrix();
    let hp = SymmetricOperator::symmetrized(m.view((0, 0), (p, p)).into_owned());
    let t12 = m.view((0, p), (p, q)).into_owned();
    let t22 = m.view((p, p), (q, q)).into_owned();

    let hp_eig = eigendecompose(&hp)?;
    if !(hp_eig.min() > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "leading block H+".into(),
            eigenvalue: hp_eig.min(),
        });
    }
    let hp_is = hp_eig.apply(|x| 1.0 / x.sqrt())?;
    let n = hp_is.matrix() * &t12;
    let h_tilde_minus = SymmetricOperator::symmetrized(-t22 + n.transpose() * &n);
    let low = eigendecompose(&h_tilde_minus)?.min();
    if !(low > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "trailing block -tau22 + N'N".into(),
            eigenvalue: low,
        });
    }

    let mut w = DMatrix::identity(n_total, n_total);
    w.view_mut((p, 0), (q, p)).copy_from(&(n.transpose() * hp_is.matrix()));
    let mut d = DMatrix::zeros(n_total, n_total);
    d.view_mut((0, 0), (p, p)).copy_from(hp.matrix());
    d.view_mut((p, p), (q, q)).copy_from(&(-h_tilde_minus.matrix()));
    Ok(SchurConstruction {
        congruence: CongruenceFactorization {
            w,
            d: SymmetricOperator::symmetrized(d),
        },
        n,
        h_tilde_minus,
    })
}

/// Splits `A = χ + χ'` with `χ = P₊AP₊ + P₋AP₋` block diagonal with respect
/// to the sign split and `χ'` purely off-diagonal.
pub fn diagonal_split(a: &SymmetricOperator, split: &SignSplit) -> Result<(SymmetricOperator, SymmetricOperator)> {
    if a.dim() != split.j.dim() {
        return Err(Error::Dimension(format!("A is {}, split is {}", a.dim(), split.j.dim())));
    }
    let pp = split.p_plus.matrix();
    let pm = split.p_minus.matrix();
    let chi = SymmetricOperator::symmetrized(pp * a.matrix() * pp + pm * a.matrix() * pm);
    let chi_prime = a.sub(&chi);
    Ok((chi, chi_prime))
}

/// `max(|P₊χ'P₊|, |P₋χ'P₋|)`, zero up to rounding for the output of
/// [`diagonal_split`].
pub fn diagonal_residual(chi_prime: &SymmetricOperator, split: &SignSplit) -> f64 {
    let pp = split.p_plus.matrix();
    let pm = split.p_minus.matrix();
    let z = DMatrix::zeros(chi_prime.dim(), chi_prime.dim());
    max_abs_diff(&(pp * chi_prime.matrix() * pp), &z).max(max_abs_diff(&(pm * chi_prime.matrix() * pm), &z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{inertia, sign_split};
    use crate::relative_form::{compress, factor_perturbation};

    fn sym(n: usize, data: &[f64]) -> SymmetricOperator {
        SymmetricOperator::from_row_slice(n, data).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn form_sum_scalar() {
        let fs = form_sum(
            &sym(1, &[2.0]),
            &sym(1, &[0.5]),
            BoundPair::new(1.0, 0.0).unwrap(),
            c(0.0, 0.0),
        )
        .unwrap();
        assert!((fs.c_zeta[(0, 0)] - c(2.5, 0.0)).norm() < 1e-15);
        assert!((fs.t.get(0, 0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn form_sum_zero_perturbation_is_h() {
        let h = sym(2, &[1.0, 2.0, 2.0, -3.0]);
        let fs = form_sum(&h, &SymmetricOperator::zeros(2), BoundPair::new(0.3, 0.7).unwrap(), c(1.0, 2.0)).unwrap();
        assert!(fs.t.max_diff(&h) < 1e-13);
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent(
            &SymmetricOperator::diagonal(&[0.0, 1.0]).unwrap(),
            &SymmetricOperator::zeros(2),
            BoundPair::new(1.0, 1.0).unwrap(),
            c(0.0, 1.0),
        )
        .unwrap();
        assert!((r[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((r[(1, 1)] - c(0.5, 0.5)).norm() < 1e-15);
        assert!(r[(0, 1)].norm() < 1e-15);

        let r = resolvent(&sym(1, &[2.0]), &sym(1, &[0.5]), BoundPair::new(1.0, 0.0).unwrap(), c(1.0, 0.0)).unwrap();
        assert!((r[(0, 0)].re - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn resolvent_on_spectrum_is_near_singular() {
        let r = resolvent(&sym(1, &[2.0]), &sym(1, &[0.5]), BoundPair::new(1.0, 0.0).unwrap(), c(2.5, 0.0));
        assert!(matches!(r, Err(Error::NearSingular { .. })));
    }

    #[test]
    fn factored_resolvent_examples() {
        let h = SymmetricOperator::diagonal(&[0.0, 1.0]).unwrap();
        let bounds = BoundPair::new(1.0, 0.5).unwrap();
        let empty = factor_perturbation(&SymmetricOperator::zeros(2)).unwrap();
        let z = c(0.3, 0.7);
        let fr = factored_resolvent(&h, &empty, bounds, z).unwrap();
        assert!((fr.resolvent[(0, 0)] - c(1.0, 0.0) / (c(0.0, 0.0) - z)).norm() < 1e-15);
        assert!((fr.resolvent[(1, 1)] - c(1.0, 0.0) / (c(1.0, 0.0) - z)).norm() < 1e-15);

        // rank-one perturbation, compared with the C_ζ route
        let a = sym(2, &[0.25, 0.25, 0.25, 0.25]);
        let cp = compress(&h, &a, bounds).unwrap();
        let f = factor_perturbation(&cp.c).unwrap();
        assert_eq!(f.rank(), 1);
        let fr = factored_resolvent(&h, &f, bounds, z).unwrap();
        let direct = resolvent(&h, &a, bounds, z).unwrap();
        let diff = complex_max_abs(&(&fr.resolvent - &direct));
        assert!(diff <= 1e-12 * complex_max_abs(&direct), "{diff}");
        assert!(fr.invertibility_agrees());

        assert!(matches!(
            factored_resolvent(&h, &f, bounds, c(1.0, 0.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn nenciu_examples() {
        let h = sym(2, &[1.0, 0.5, 0.5, -2.0]);
        let t = nenciu_form(&h, &SymmetricOperator::zeros(2), 0.0, ZeroPolicy::Error).unwrap();
        assert!(t.max_diff(&h) < 1e-14);

        let h = SymmetricOperator::diagonal(&[1.0, -2.0]).unwrap();
        let t = nenciu_form(&h, &SymmetricOperator::zeros(2), 1.0, ZeroPolicy::Error).unwrap();
        assert!(t.max_diff(&h) < 1e-14);
    }

    #[test]
    fn nenciu_rejects_singular_j_plus_c() {
        let h = SymmetricOperator::diagonal(&[1.0, -2.0]).unwrap();
        // J = diag(1, -1); C = diag(-1, 0) kills the first entry
        let c = SymmetricOperator::diagonal(&[-1.0, 0.0]).unwrap();
        assert!(matches!(nenciu_form(&h, &c, 0.5, ZeroPolicy::Error), Err(Error::Construction(_))));
    }

    fn two_by_two_blocks() -> QuasidefiniteBlocks {
        QuasidefiniteBlocks::new(sym(1, &[2.0]), sym(1, &[1.0]), DMatrix::from_element(1, 1, 3.0)).unwrap()
    }

    #[test]
    fn quasidefinite_two_by_two() {
        let blocks = two_by_two_blocks();
        let f = quasidefinite_factor(&blocks).unwrap();
        assert!((f.schur.get(0, 0) + 5.5).abs() < 1e-15);
        assert!(f.congruence.d.max_diff(&SymmetricOperator::diagonal(&[2.0, -5.5]).unwrap()) < 1e-14);
        assert!((f.f_norm - 3.0 / 2f64.sqrt()).abs() < 1e-14);
        let t = f.congruence.reconstruct();
        assert!(t.max_diff(&sym(2, &[2.0, 3.0, 3.0, -1.0])) < 1e-14);

        // characteristic polynomial λ² − λ − 11 = 0 → (1 ± √45)/2
        let eig = eigendecompose(&t).unwrap();
        assert!((eig.values[0] - (1.0 - 45f64.sqrt()) / 2.0).abs() < 1e-13);
        assert!((eig.values[1] - (1.0 + 45f64.sqrt()) / 2.0).abs() < 1e-13);
        assert_eq!(inertia(&t, 1e-12).unwrap(), inertia(&f.congruence.d, 1e-12).unwrap());
    }

    #[test]
    fn quasidefinite_solve_examples() {
        let blocks = two_by_two_blocks();
        let x = quasidefinite_solve(&blocks, &DVector::from_vec(vec![2.0, 3.0])).unwrap();
        // direct 2x2 inverse: det = -11, T⁻¹ = [[-1,-3],[-3,2]]/(-11)
        let expect = [(-2.0 - 9.0) / -11.0, (-6.0 + 6.0) / -11.0];
        assert!((x[0] - expect[0]).abs() < 1e-12 && (x[1] - expect[1]).abs() < 1e-12);

        let x = quasidefinite_solve(&blocks, &DVector::zeros(2)).unwrap();
        assert_eq!(x, DVector::zeros(2));

        let decoupled = QuasidefiniteBlocks::new(
            sym(2, &[4.0, 0.0, 0.0, 2.0]),
            sym(1, &[5.0]),
            DMatrix::zeros(2, 1),
        )
        .unwrap();
        let x = quasidefinite_solve(&decoupled, &DVector::from_vec(vec![4.0, 2.0, 10.0])).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0, -2.0])).norm() < 1e-14);
    }

    #[test]
    fn quasidefinite_rejects_indefinite_blocks() {
        let err = QuasidefiniteBlocks::new(sym(1, &[-1.0]), sym(1, &[1.0]), DMatrix::zeros(1, 1));
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
        let err = QuasidefiniteBlocks::new(sym(1, &[1.0]), sym(1, &[1.0]), DMatrix::zeros(2, 1));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn offdiagonal_examples() {
        let b = DMatrix::from_element(1, 1, 1.0);
        let z = SymmetricOperator::zeros(1);
        let f = offdiagonal_factor(&b, &z, &z).unwrap();
        assert_eq!(f.j_plus_d, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(max_abs_diff(&f.product(), &f.j_plus_d) < 1e-15);

        let d = 0.7;
        let dd = SymmetricOperator::identity(1).scaled(d);
        let f = offdiagonal_factor(&b, &dd, &dd).unwrap();
        // 1 + U·D₋·Uᵀ·D₊ = 1 + d² > 0
        assert!((f.product_spectrum_min - d * d).abs() < 1e-15);
        assert!(max_abs_diff(&f.product(), &f.j_plus_d) < 1e-15);
    }

    #[test]
    fn offdiagonal_rejects_bad_b() {
        let z = SymmetricOperator::zeros(2);
        assert!(offdiagonal_factor(&DMatrix::zeros(2, 2), &z, &z).is_err());
        let z1 = SymmetricOperator::zeros(1);
        assert!(offdiagonal_factor(&DMatrix::from_element(1, 2, 1.0), &z1, &z).is_err());
    }

    #[test]
    fn schur_construct_examples() {
        let tau = sym(2, &[2.0, 3.0, 3.0, -1.0]);
        let s = schur_construct(&tau, 1).unwrap();
        assert!((s.n[(0, 0)] - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((s.h_tilde_minus.get(0, 0) - 5.5).abs() < 1e-14);
        assert!(s.congruence.d.max_diff(&SymmetricOperator::diagonal(&[2.0, -5.5]).unwrap()) < 1e-14);
        assert!(s.congruence.reconstruct().max_diff(&tau) < 1e-14);

        let q = quasidefinite_factor(&two_by_two_blocks()).unwrap();
        assert!(max_abs_diff(&q.congruence.w, &s.congruence.w) < 1e-14);

        let tau = SymmetricOperator::diagonal(&[1.0, 2.0, -3.0]).unwrap();
        let s = schur_construct(&tau, 2).unwrap();
        assert_eq!(s.congruence.w, DMatrix::identity(3, 3));
        assert_eq!(s.congruence.d, tau);
    }

    #[test]
    fn schur_construct_names_failing_block() {
        let tau = sym(2, &[-1.0, 0.0, 0.0, -1.0]);
        match schur_construct(&tau, 1) {
            Err(Error::NotPositiveDefinite { what, .. }) => assert!(what.contains("H+")),
            other => panic!("{other:?}"),
        }
        // -tau22 + N'N = -1 + 0 < 0
        let tau = sym(2, &[1.0, 0.0, 0.0, 1.0]);
        match schur_construct(&tau, 1) {
            Err(Error::NotPositiveDefinite { what, .. }) => assert!(what.contains("trailing")),
            other => panic!("{other:?}"),
        }
        assert!(schur_construct(&tau, 0).is_err());
    }

    #[test]
    fn diagonal_split_examples() {
        let h = SymmetricOperator::diagonal(&[-1.0, 2.0, 3.0]).unwrap();
        let split = sign_split(&h, ZeroPolicy::Error).unwrap();

        let block = sym(3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.5, 3.0]);
        let (chi, chi_p) = diagonal_split(&block, &split).unwrap();
        assert!(chi.max_diff(&block) < 1e-15);
        assert!(chi_p.norm_max() < 1e-15);

        let off = sym(3, &[0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let (chi, chi_p) = diagonal_split(&off, &split).unwrap();
        assert!(chi.norm_max() < 1e-15);
        assert!(chi_p.max_diff(&off) < 1e-15);
        assert!(diagonal_residual(&chi_p, &split) < 1e-15);
    }
}
