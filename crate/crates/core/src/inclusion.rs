//! Spectral inclusion windows: subintervals of a gap of `H` that stay in the
//! resolvent set of `T = H + A` for every perturbation obeying the relative
//! bound, plus the scalar formulas behind the resolvent strip.
//!
//! Endpoints are extended reals. An infinite end of a gap stays infinite in
//! every window built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SpectralGap;
use crate::relative_form::BoundPair;

/// Which construction produced a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSource {
    Strip,
    Window0,
    Window,
    Window0Ess,
    WindowEss,
    DiagonalbUnshifted,
    DiagonalbShifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapWindow {
    pub lower: f64,
    pub upper: f64,
    pub source: WindowSource,
    pub empty: bool,
}

impl GapWindow {
    pub fn new(lower: f64, upper: f64, source: WindowSource) -> Self {
        Self {
            lower,
            upper,
            source,
            empty: !(lower < upper),
        }
    }

    /// Open-interval membership; always false for an empty window.
    pub fn contains(&self, x: f64) -> bool {
        !self.empty && self.lower < x && x < self.upper
    }

    /// `self ⊆ other` as sets (empty windows are contained in anything).
    pub fn is_within(&self, other: &GapWindow) -> bool {
        self.empty || (!other.empty && other.lower <= self.lower && self.upper <= other.upper)
    }
}

/// Moves a finite end by `coef·(a + b|x|)`; infinite ends pass through.
fn move_end(x: f64, coef: f64, bounds: &BoundPair) -> f64 {
    if x.is_infinite() {
        x
    } else {
        x + coef * (bounds.a + bounds.b * x.abs())
    }
}

fn check_range(c_minus: f64, c_plus: f64) -> Result<()> {
    const SLACK: f64 = 1e-12;
    if !(c_minus <= c_plus) || c_minus < -1.0 - SLACK || c_plus > 1.0 + SLACK {
        return Err(Error::Precondition(format!(
            "need -1 <= c_minus <= c_plus <= 1, got ({c_minus}, {c_plus})"
        )));
    }
    Ok(())
}

/// `η* = (a + |λ|b)/√(1 − b²)`: every `λ + iη` with `|η| > η*` is in the
/// resolvent set of `H + A`.
pub fn resolvent_strip_threshold(bounds: BoundPair, lambda: f64) -> Result<f64> {
    bounds.require_b_below_one()?;
    Ok((bounds.a + lambda.abs() * bounds.b) / (1.0 - bounds.b * bounds.b).sqrt())
}

/// The band of imaginary parts `(−η*, η*)` above a real point `λ`; outside
/// it `λ + iη` is a resolvent point.
pub fn strip_window(bounds: BoundPair, lambda: f64) -> Result<GapWindow> {
    let eta = resolvent_strip_threshold(bounds, lambda)?;
    Ok(GapWindow::new(-eta, eta, WindowSource::Strip))
}

/// Closed form of `sup_ξ (b|ξ| + a)/√((ξ − λ)² + η²)`.
pub fn sup_psi(bounds: BoundPair, lambda: f64, eta: f64) -> Result<f64> {
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be finite and nonzero, got {eta}")));
    }
    if bounds.a < 0.0 {
        return Err(Error::Precondition(format!("need a >= 0, got {}", bounds.a)));
    }
    let s = bounds.a + lambda.abs() * bounds.b;
    Ok((s * s + bounds.b * bounds.b * eta * eta).sqrt() / eta.abs())
}

/// `(λ₋ + a + b|λ₋|, λ₊ − a − b|λ₊|)`.
pub fn window0(gap: SpectralGap, bounds: BoundPair) -> Result<GapWindow> {
    bounds.require_b_below_one()?;
    Ok(GapWindow::new(
        move_end(gap.lower, 1.0, &bounds),
        move_end(gap.upper, -1.0, &bounds),
        WindowSource::Window0,
    ))
}

/// `(λ₋ + c₊(a + b|λ₋|), λ₊ + c₋(a + b|λ₊|))` with `c± = extreme points of
/// σ(C)`. The caller normalizes a semidefinite `A` beforehand.
pub fn window_refined(gap: SpectralGap, bounds: BoundPair, c_minus: f64, c_plus: f64) -> Result<GapWindow> {
    bounds.require_b_below_one()?;
    check_range(c_minus, c_plus)?;
    Ok(GapWindow::new(
        move_end(gap.lower, c_plus, &bounds),
        move_end(gap.upper, c_minus, &bounds),
        WindowSource::Window,
    ))
}

/// Desk-scale stand-in for the essential spectrum: a designated part of the
/// spectrum of `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssentialDesignation {
    /// Indices into the ascending spectrum.
    Indices(Vec<usize>),
    /// Eigenvalues with `|λ| ≥ m`.
    Threshold(f64),
}

impl EssentialDesignation {
    /// The designated eigenvalues, ascending.
    pub fn resolve(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        let out: Vec<f64> = match self {
            Self::Indices(idx) => {
                let mut idx = idx.clone();
                idx.sort_unstable();
                idx.dedup();
                if let Some(&bad) = idx.iter().find(|&&i| i >= spectrum.len()) {
                    return Err(Error::Precondition(format!(
                        "designated index {bad} out of range for {} eigenvalues",
                        spectrum.len()
                    )));
                }
                idx.iter().map(|&i| spectrum[i]).collect()
            }
            Self::Threshold(m) => {
                if !(*m > 0.0) {
                    return Err(Error::Precondition(format!("threshold must be positive, got {m}")));
                }
                spectrum.iter().copied().filter(|l| l.abs() >= *m).collect()
            }
        };
        if out.is_empty() {
            return Err(Error::Precondition("essential designation selects no eigenvalues".into()));
        }
        Ok(out)
    }

    /// Ascending indices of the designated eigenvalues.
    pub fn indices(&self, spectrum: &[f64]) -> Vec<usize> {
        match self {
            Self::Indices(idx) => {
                let mut idx: Vec<usize> = idx.iter().copied().filter(|&i| i < spectrum.len()).collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            }
            Self::Threshold(m) => (0..spectrum.len()).filter(|&i| spectrum[i].abs() >= *m).collect(),
        }
    }
}

/// Window for a gap of the designated essential sub-spectrum. With `range`
/// absent this is the `window0` arithmetic, otherwise the refined one.
pub fn window_essential(
    gap: SpectralGap,
    bounds: BoundPair,
    range: Option<(f64, f64)>,
    designated: &[f64],
) -> Result<GapWindow> {
    if designated.is_empty() {
        return Err(Error::Precondition("essential designation is empty".into()));
    }
    let scale = designated.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    if let Some(x) = designated.iter().find(|&&x| gap.lower + tol < x && x < gap.upper - tol) {
        return Err(Error::Precondition(format!(
            "designated eigenvalue {x} lies inside ({}, {})",
            gap.lower, gap.upper
        )));
    }
    for end in [gap.lower, gap.upper] {
        if end.is_finite() && !designated.iter().any(|x| (x - end).abs() <= tol) {
            return Err(Error::Precondition(format!(
                "gap end {end} is not a designated eigenvalue"
            )));
        }
    }
    let mut w = match range {
        None => window0(gap, bounds)?,
        Some((c_minus, c_plus)) => window_refined(gap, bounds, c_minus, c_plus)?,
    };
    w.source = if range.is_some() {
        WindowSource::WindowEss
    } else {
        WindowSource::Window0Ess
    };
    Ok(w)
}

/// Formula variant for [`diagonalb_window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalbVariant {
    /// `(λ₋ + b₋|λ₋|, λ₊ − b₊|λ₊|)`.
    Unshifted,
    /// `(λ₋ + b₋|λ₋| + a₋, λ₊ − b₊|λ₊| − a₊)`; sound for every perturbation
    /// meeting the block bounds.
    Shifted,
}

/// Window for perturbations controlled only on the diagonal blocks of the
/// sign split of `H`; the off-diagonal coupling is unrestricted.
pub fn diagonalb_window(
    gap: SpectralGap,
    a_plus: f64,
    a_minus: f64,
    b_plus: f64,
    b_minus: f64,
    variant: DiagonalbVariant,
) -> Result<GapWindow> {
    if !gap.contains(0.0) {
        return Err(Error::Precondition(format!(
            "gap ({}, {}) must contain 0",
            gap.lower, gap.upper
        )));
    }
    for (name, b) in [("b+", b_plus), ("b-", b_minus)] {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::Precondition(format!("{name} must lie in [0, 1), got {b}")));
        }
    }
    for (name, a) in [("a+", a_plus), ("a-", a_minus)] {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Precondition(format!("{name} must be finite and >= 0, got {a}")));
        }
    }
    let (shift_minus, shift_plus, source) = match variant {
        DiagonalbVariant::Unshifted => (0.0, 0.0, WindowSource::DiagonalbUnshifted),
        DiagonalbVariant::Shifted => (a_minus, a_plus, WindowSource::DiagonalbShifted),
    };
    let lower = if gap.lower.is_infinite() {
        gap.lower
    } else {
        gap.lower + b_minus * gap.lower.abs() + shift_minus
    };
    let upper = if gap.upper.is_infinite() {
        gap.upper
    } else {
        gap.upper - b_plus * gap.upper.abs() - shift_plus
    };
    Ok(GapWindow::new(lower, upper, source))
}

/// Both sides of `|λ| ≤ εa/(1 − bε) + |λ + ε(a + b|λ|)|/(1 − bε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn shift_inequality_check(lambda: f64, epsilon: f64, bounds: BoundPair) -> Result<ShiftInequality> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let denom = 1.0 - bounds.b * epsilon;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "need epsilon*b < 1, got {}",
            bounds.b * epsilon
        )));
    }
    let lhs = lambda.abs();
    let rhs = epsilon * bounds.a / denom + (lambda + epsilon * (bounds.a + bounds.b * lambda.abs())).abs() / denom;
    Ok(ShiftInequality {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-14 * lhs.max(1.0),
    })
}
