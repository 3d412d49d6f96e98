//! Eigenvalues along the family `T_ε = H + εA`: analytic derivatives,
//! order-matched tracking through a window with a certified guard end,
//! two-sided enclosures, and comparison bounds for non-positive
//! perturbations.
//!
//! Tolerances are relative to `scale = ‖H‖_max + ‖A‖_max` (1 when both
//! vanish).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inclusion::GapWindow;
use crate::operator::{eigendecompose, EigenSystem, SymmetricOperator};
use crate::relative_form::{BoundPair, RelativeFrame};

/// Eigenvalues closer than this (relative) form one cluster.
const CLUSTER_TOL: f64 = 1e-10;
/// A cluster must be this far (relative) from the rest to be isolated.
const ISOLATION_TOL: f64 = 1e-8;
const CERTIFICATE_RADIUS: f64 = 1e-10;
const MONOTONE_SLACK: f64 = 1e-10;
const MAX_REFINEMENT_DEPTH: usize = 10;

pub fn scale_of(ops: &[&SymmetricOperator]) -> f64 {
    let s: f64 = ops.iter().map(|o| o.norm_max()).sum();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Indices `[lo, hi)` of the cluster around `index`, chaining neighbours
/// within `tol`.
fn cluster_around(values: &[f64], index: usize, tol: f64) -> (usize, usize) {
    let mut lo = index;
    while lo > 0 && values[lo] - values[lo - 1] <= tol {
        lo -= 1;
    }
    let mut hi = index + 1;
    while hi < values.len() && values[hi] - values[hi - 1] <= tol {
        hi += 1;
    }
    (lo, hi)
}

/// Distance from the cluster `[lo, hi)` to the rest of the spectrum.
fn isolation(values: &[f64], lo: usize, hi: usize) -> f64 {
    let below = if lo > 0 { values[lo] - values[lo - 1] } else { f64::INFINITY };
    let above = if hi < values.len() { values[hi] - values[hi - 1] } else { f64::INFINITY };
    below.min(above)
}

fn cluster_basis(eig: &EigenSystem, lo: usize, hi: usize) -> DMatrix<f64> {
    eig.vectors.columns(lo, hi - lo).into_owned()
}

/// Derivative of an isolated eigenvalue cluster of `T_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDerivative {
    pub eigenvalue: f64,
    /// `(1/m)·Tr((H₁^{1/2}P)ᵀ·C′·H₁^{1/2}P)`, `C′ = H₁^{-1/2}AH₁^{-1/2}`.
    pub value: f64,
    /// `(1/m)·Tr(P·A·P)`; equal to `value` at matrix scale.
    pub projected_trace: f64,
    pub multiplicity: usize,
    pub isolation: f64,
}

/// `B(ε)` and `B′(ε)` of a bounded symmetric family at one `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedTerm {
    pub value: SymmetricOperator,
    pub derivative: SymmetricOperator,
}

fn derivative_at(
    frame: &RelativeFrame,
    t: &SymmetricOperator,
    a: &SymmetricOperator,
    extra: Option<&SymmetricOperator>,
    index: usize,
    scale: f64,
) -> Result<EigenDerivative> {
    let eig = eigendecompose(t)?;
    if index >= eig.dim() {
        return Err(Error::Precondition(format!(
            "eigen-index {index} out of range for dimension {}",
            eig.dim()
        )));
    }
    let (lo, hi) = cluster_around(&eig.values, index, CLUSTER_TOL * scale);
    let gap = isolation(&eig.values, lo, hi);
    if gap <= ISOLATION_TOL * scale {
        return Err(Error::Degenerate {
            eigenvalue: eig.values[index],
            gap,
        });
    }
    let m = (hi - lo) as f64;
    let basis = cluster_basis(&eig, lo, hi);
    let p = &basis * basis.transpose();
    let c_prime = frame.compress_matrix(a);
    let x = frame.h1_sqrt() * &p;
    let mut value = (x.transpose() * c_prime.matrix() * &x).trace() / m;
    let mut projected_trace = (basis.transpose() * a.matrix() * &basis).trace() / m;
    if let Some(bp) = extra {
        let add = (basis.transpose() * bp.matrix() * &basis).trace() / m;
        value += add;
        projected_trace += add;
    }
    Ok(EigenDerivative {
        eigenvalue: eig.values[index],
        value,
        projected_trace,
        multiplicity: hi - lo,
        isolation: gap,
    })
}

/// `λ′(ε)` for the eigenvalue of `H + εA` with ascending index `index`
/// (its whole cluster is used).
pub fn eigenvalue_derivative(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    epsilon: f64,
    index: usize,
) -> Result<EigenDerivative> {
    check_dims(h, a)?;
    let frame = RelativeFrame::new(h, bounds)?;
    let t = h.axpy(epsilon, a);
    derivative_at(&frame, &t, a, None, index, scale_of(&[h, a]))
}

/// `λ′(ε)` for `H + εA + B(ε)`: the analytic term plus `(1/m)Tr(P·B′(ε)·P)`.
pub fn eigenvalue_derivative_with_bounded(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    b: &BoundedTerm,
    bounds: BoundPair,
    epsilon: f64,
    index: usize,
) -> Result<EigenDerivative> {
    check_dims(h, a)?;
    check_dims(h, &b.value)?;
    check_dims(h, &b.derivative)?;
    let frame = RelativeFrame::new(h, bounds)?;
    let t = h.axpy(epsilon, a).add(&b.value);
    derivative_at(&frame, &t, a, Some(&b.derivative), index, scale_of(&[h, a, &b.value]))
}

fn check_dims(h: &SymmetricOperator, a: &SymmetricOperator) -> Result<()> {
    if h.dim() != a.dim() {
        return Err(Error::Dimension(format!("H is {}, other operand is {}", h.dim(), a.dim())));
    }
    Ok(())
}

/// Which window ends carry an impenetrability certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guard {
    Lower,
    Upper,
    Both,
}

impl Guard {
    /// Lower end if finite, else upper end if finite, else none needed.
    pub fn default_for(window: &GapWindow) -> Option<Guard> {
        if window.lower.is_finite() {
            Some(Guard::Lower)
        } else if window.upper.is_finite() {
            Some(Guard::Upper)
        } else {
            None
        }
    }

    fn lower(self) -> bool {
        matches!(self, Guard::Lower | Guard::Both)
    }

    fn upper(self) -> bool {
        matches!(self, Guard::Upper | Guard::Both)
    }
}

/// Per-index comparison of the first and last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointComparison {
    pub k: usize,
    pub start: f64,
    pub end: f64,
    pub holds: bool,
}

/// In-window eigenvalue curves of `H + εA` over an `ε` grid. Curve `k` is
/// the `k`-th eigenvalue counted from the guarded end (from below when the
/// lower end is guarded or both are).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub curves: Vec<Vec<Option<f64>>>,
    pub derivatives: Vec<Vec<Option<f64>>>,
    pub multiplicities: Vec<Vec<Option<usize>>>,
    pub counts: Vec<usize>,
    pub window: GapWindow,
    pub guard: Option<Guard>,
    pub from_top: bool,
    pub psd_perturbation: bool,
    /// `λ_k(ε₀) ≤ λ_k(ε₁)` per index; present when `A ⪰ 0`.
    pub endpoint_order: Option<Vec<EndpointComparison>>,
    /// Every step obeys `|Δλ_k| ≤ 1.1·‖A‖·Δε`.
    pub lipschitz_ok: bool,
}

impl Trajectory {
    /// Every curve is nondecreasing up to the monotone slack.
    pub fn nondecreasing(&self, slack: f64) -> bool {
        self.curves.iter().all(|c| {
            let pts: Vec<f64> = c.iter().flatten().copied().collect();
            pts.windows(2).all(|w| w[1] >= w[0] - slack)
        })
    }
}

struct Node {
    epsilon: f64,
    eig: EigenSystem,
    in_window: Vec<usize>,
}

fn make_node(h: &SymmetricOperator, a: &SymmetricOperator, epsilon: f64, window: &GapWindow, from_top: bool) -> Result<Node> {
    let eig = eigendecompose(&h.axpy(epsilon, a))?;
    let mut in_window: Vec<usize> = (0..eig.dim()).filter(|&i| window.contains(eig.values[i])).collect();
    if from_top {
        in_window.reverse();
    }
    Ok(Node {
        epsilon,
        eig,
        in_window,
    })
}

fn certify(node: &Node, window: &GapWindow, guard: Guard, radius: f64, below_ref: &mut Option<usize>, above_ref: &mut Option<usize>) -> Result<()> {
    let vals = &node.eig.values;
    let check = |d: f64, reference: &mut Option<usize>, count: usize| -> Result<()> {
        let (nearest, dist) = vals
            .iter()
            .map(|&v| (v, (v - d).abs()))
            .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if dist <= radius {
            return Err(Error::Certificate {
                epsilon: node.epsilon,
                eigenvalue: nearest,
                guard: d,
                distance: dist,
            });
        }
        match reference {
            None => *reference = Some(count),
            Some(c) if *c != count => {
                // an eigenvalue crossed the guard between two nodes
                return Err(Error::Certificate {
                    epsilon: node.epsilon,
                    eigenvalue: nearest,
                    guard: d,
                    distance: dist,
                });
            }
            _ => {}
        }
        Ok(())
    };
    if guard.lower() && window.lower.is_finite() {
        let below = vals.iter().filter(|&&v| v < window.lower).count();
        check(window.lower, below_ref, below)?;
    }
    if guard.upper() && window.upper.is_finite() {
        let above = vals.iter().filter(|&&v| v > window.upper).count();
        check(window.upper, above_ref, above)?;
    }
    Ok(())
}

/// Tracks the in-window eigenvalues of `H + εA` over `[ε₀, ε₁]` with the
/// default guard (see [`Guard::default_for`]).
pub fn track(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    eps_range: (f64, f64),
    window: GapWindow,
    steps: usize,
) -> Result<Trajectory> {
    track_with_guard(h, a, bounds, eps_range, window, steps, Guard::default_for(&window))
}

pub fn track_with_guard(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    eps_range: (f64, f64),
    window: GapWindow,
    steps: usize,
    guard: Option<Guard>,
) -> Result<Trajectory> {
    check_dims(h, a)?;
    if window.empty {
        return Err(Error::Precondition("tracking window is empty".into()));
    }
    let (eps0, eps1) = eps_range;
    if !(eps0 < eps1) || !eps0.is_finite() || !eps1.is_finite() {
        return Err(Error::Precondition(format!("need eps0 < eps1, got ({eps0}, {eps1})")));
    }
    if steps == 0 {
        return Err(Error::Precondition("steps must be positive".into()));
    }
    if let Some(g) = guard {
        if (g.lower() && !window.lower.is_finite()) || (g.upper() && !window.upper.is_finite()) {
            return Err(Error::Precondition("a guarded window end must be finite".into()));
        }
    }
    let scale = scale_of(&[h, a]);
    let radius = CERTIFICATE_RADIUS * scale;
    let from_top = guard == Some(Guard::Upper);
    let frame = RelativeFrame::new(h, bounds)?;
    let a_eig = eigendecompose(a)?;
    let a_norm = a_eig.norm();
    let psd = a_eig.min() >= -1e-12 * scale;

    // adaptive refinement of a uniform grid
    let h_step = (eps1 - eps0) / steps as f64;
    let mut pending: Vec<(f64, usize)> = (0..=steps)
        .rev()
        .map(|j| (if j == steps { eps1 } else { eps0 + h_step * j as f64 }, 0))
        .collect();
    let mut nodes: Vec<Node> = Vec::new();
    let mut depths: Vec<usize> = Vec::new();
    let (mut below_ref, mut above_ref) = (None, None);
    while let Some((eps, depth)) = pending.pop() {
        let node = make_node(h, a, eps, &window, from_top)?;
        if let Some(g) = guard {
            certify(&node, &window, g, radius, &mut below_ref, &mut above_ref)?;
        }
        if let Some(prev) = nodes.last() {
            let prev_depth = *depths.last().unwrap();
            let d = depth.max(prev_depth);
            if d < MAX_REFINEMENT_DEPTH && needs_refinement(prev, &node) {
                let mid = 0.5 * (prev.epsilon + node.epsilon);
                pending.push((eps, d + 1));
                pending.push((mid, d + 1));
                continue;
            }
        }
        nodes.push(node);
        depths.push(depth);
    }

    let ncurves = nodes.iter().map(|n| n.in_window.len()).max().unwrap_or(0);
    let mut curves = vec![Vec::with_capacity(nodes.len()); ncurves];
    let mut derivatives = vec![Vec::with_capacity(nodes.len()); ncurves];
    let mut multiplicities = vec![Vec::with_capacity(nodes.len()); ncurves];
    let c_prime = frame.compress_matrix(a);
    let s = frame.h1_sqrt();
    for node in &nodes {
        for k in 0..ncurves {
            match node.in_window.get(k) {
                Some(&idx) => {
                    let (lo, hi) = cluster_around(&node.eig.values, idx, ISOLATION_TOL * scale);
                    let basis = cluster_basis(&node.eig, lo, hi);
                    let x = &s * (&basis * basis.transpose());
                    let m = hi - lo;
                    curves[k].push(Some(node.eig.values[idx]));
                    derivatives[k].push(Some((x.transpose() * c_prime.matrix() * &x).trace() / m as f64));
                    multiplicities[k].push(Some(m));
                }
                None => {
                    curves[k].push(None);
                    derivatives[k].push(None);
                    multiplicities[k].push(None);
                }
            }
        }
    }

    let mut lipschitz_ok = true;
    for w in nodes.windows(2) {
        let de = w[1].epsilon - w[0].epsilon;
        let limit = 1.1 * a_norm * de + 1e-12 * scale;
        for (i0, i1) in w[0].in_window.iter().zip(&w[1].in_window) {
            if (w[1].eig.values[*i1] - w[0].eig.values[*i0]).abs() > limit {
                lipschitz_ok = false;
            }
        }
    }

    let endpoint_order = psd.then(|| {
        let first = &nodes[0];
        let last = &nodes[nodes.len() - 1];
        first
            .in_window
            .iter()
            .zip(&last.in_window)
            .enumerate()
            .map(|(k, (&i0, &i1))| {
                let start = first.eig.values[i0];
                let end = last.eig.values[i1];
                EndpointComparison {
                    k,
                    start,
                    end,
                    holds: start <= end + MONOTONE_SLACK * scale,
                }
            })
            .collect()
    });

    Ok(Trajectory {
        grid: nodes.iter().map(|n| n.epsilon).collect(),
        counts: nodes.iter().map(|n| n.in_window.len()).collect(),
        curves,
        derivatives,
        multiplicities,
        window,
        guard,
        from_top,
        psd_perturbation: psd,
        endpoint_order,
        lipschitz_ok,
    })
}

/// A matched eigenvalue moved more than a quarter of its distance to the
/// nearest other eigenvalue.
fn needs_refinement(prev: &Node, next: &Node) -> bool {
    let vals = &prev.eig.values;
    prev.in_window.iter().zip(&next.in_window).any(|(&i0, &i1)| {
        let moved = (next.eig.values[i1] - vals[i0]).abs();
        let mut nearest = f64::INFINITY;
        if i0 > 0 {
            nearest = nearest.min(vals[i0] - vals[i0 - 1]);
        }
        if i0 + 1 < vals.len() {
            nearest = nearest.min(vals[i0 + 1] - vals[i0]);
        }
        moved > 0.25 * nearest
    })
}

/// The gap `(λ₋₋, λ₊₊)` of the (designated) essential spectrum around the
/// eigenvalues being enclosed; ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialGap {
    pub lower: f64,
    pub upper: f64,
}

impl EssentialGap {
    /// The gap of the designated points that contains `point`.
    pub fn around(designated: &[f64], point: f64) -> Result<Self> {
        let lower = designated.iter().copied().filter(|&x| x <= point).fold(f64::NEG_INFINITY, f64::max);
        let upper = designated.iter().copied().filter(|&x| x > point).fold(f64::INFINITY, f64::min);
        if lower == point {
            return Err(Error::Precondition(format!("{point} is itself a designated point")));
        }
        Ok(Self { lower, upper })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnclosureRow {
    /// 1-based position among the eigenvalues of `H` in the gap.
    pub k: usize,
    pub lambda_k: f64,
    pub lower: f64,
    pub upper: f64,
    pub mu_k: f64,
    pub within: bool,
}

impl EnclosureRow {
    /// Distance from `μ_k` to the nearer end (negative when outside).
    pub fn margin(&self) -> f64 {
        (self.mu_k - self.lower).min(self.upper - self.mu_k)
    }
}

/// Whether the upper impenetrability interval was available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnclosureCase {
    /// Both separation intervals are nonempty; every in-gap eigenvalue gets a row.
    TwoSided,
    /// Only the lower one; rows are emitted up to the cutoff.
    LowerOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosureReport {
    pub rows: Vec<EnclosureRow>,
    pub case: EnclosureCase,
    /// The right end of the window in which the `μ`'s are counted.
    pub cutoff: f64,
    pub separation_lower: (f64, f64),
    pub separation_upper: (f64, f64),
}

impl EnclosureReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(|r| r.within)
    }

    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(EnclosureRow::margin).fold(f64::INFINITY, f64::min)
    }
}

/// `x + coef·(a + b|x|)` with infinite `x` passing through.
fn moved(x: f64, coef: f64, bounds: &BoundPair) -> f64 {
    if x.is_infinite() {
        x
    } else {
        x + coef * (bounds.a + bounds.b * x.abs())
    }
}

/// The shared enclosure driver: rows `[λ_k + lo_coef·r_k, λ_k + hi_coef·r_k]`
/// with `r_k = a + b|λ_k|`; separations use `hi_coef` on the left end of an
/// interval and `lo_coef` on the right end.
fn enclose(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    lo_coef: f64,
    hi_coef: f64,
    gap: EssentialGap,
) -> Result<EnclosureReport> {
    check_dims(h, a)?;
    bounds.require_b_below_one()?;
    if !(gap.lower < gap.upper) {
        return Err(Error::Precondition(format!("empty essential gap ({}, {})", gap.lower, gap.upper)));
    }
    let scale = scale_of(&[h, a]);
    let tol = 1e-12 * scale;
    let h_eig = eigendecompose(h)?;
    let t_eig = eigendecompose(&h.add(a))?;
    let inside: Vec<usize> = (0..h_eig.dim())
        .filter(|&i| h_eig.values[i] > gap.lower + tol && h_eig.values[i] < gap.upper - tol)
        .collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return Ok(EnclosureReport {
            rows: Vec::new(),
            case: EnclosureCase::TwoSided,
            cutoff: moved(gap.upper, lo_coef, &bounds),
            separation_lower: (moved(gap.lower, hi_coef, &bounds), moved(gap.upper, lo_coef, &bounds)),
            separation_upper: (moved(gap.lower, hi_coef, &bounds), moved(gap.upper, lo_coef, &bounds)),
        });
    };
    let lam_first = h_eig.values[first];
    let lam_last = h_eig.values[last];
    let sep_lower = (moved(gap.lower, hi_coef, &bounds), moved(lam_first, lo_coef, &bounds));
    if !(sep_lower.0 < sep_lower.1) {
        return Err(Error::EmptySeparation {
            lower: sep_lower.0,
            upper: sep_lower.1,
        });
    }
    let sep_upper = (moved(lam_last, hi_coef, &bounds), moved(gap.upper, lo_coef, &bounds));
    let (case, cutoff) = if sep_upper.0 < sep_upper.1 {
        (EnclosureCase::TwoSided, moved(gap.upper, lo_coef, &bounds))
    } else {
        (EnclosureCase::LowerOnly, gap.upper)
    };

    let row_tol = 1e-10 * scale;
    let mut rows = Vec::new();
    for (pos, &i) in inside.iter().enumerate() {
        let lambda = h_eig.values[i];
        let lower = moved(lambda, lo_coef, &bounds);
        let upper = moved(lambda, hi_coef, &bounds);
        if case == EnclosureCase::LowerOnly && !(upper < gap.upper) {
            continue;
        }
        let mu = t_eig.values[i];
        rows.push(EnclosureRow {
            k: pos + 1,
            lambda_k: lambda,
            lower,
            upper,
            mu_k: mu,
            within: lower - row_tol <= mu && mu <= upper + row_tol,
        });
    }
    Ok(EnclosureReport {
        rows,
        case,
        cutoff,
        separation_lower: sep_lower,
        separation_upper: sep_upper,
    })
}

/// `λ_k − (a + b|λ_k|) ≤ μ_k ≤ λ_k + (a + b|λ_k|)` for the eigenvalues of `H`
/// inside an essential gap. `μ_k` is matched by order, counted from the
/// certified lower separation interval.
pub fn enclosure_bound0(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    gap: EssentialGap,
) -> Result<EnclosureReport> {
    enclose(h, a, bounds, -1.0, 1.0, gap)
}

/// `λ_k + c₋(a + b|λ_k|) ≤ μ_k ≤ λ_k + c₊(a + b|λ_k|)`.
pub fn enclosure_refined(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    bounds: BoundPair,
    c_minus: f64,
    c_plus: f64,
    gap: EssentialGap,
) -> Result<EnclosureReport> {
    if !(c_minus <= c_plus) || c_minus < -1.0 - 1e-12 || c_plus > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "need -1 <= c_minus <= c_plus <= 1, got ({c_minus}, {c_plus})"
        )));
    }
    enclose(h, a, bounds, c_minus, c_plus, gap)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EqualityDiagnosis {
    /// A common eigenvector of `T_{ε₀}` and `T_{ε₁}` in the kernel of `A₁`.
    CommonEigenvector {
        psi: DVector<f64>,
        eigenvalue: f64,
        residual_start: f64,
        residual_end: f64,
        /// `‖A₁ψ‖`.
        kernel_residual: f64,
        /// `‖C₁H₁^{1/2}ψ‖ = ‖H₁^{-1/2}A₁ψ‖`.
        compressed_residual: f64,
    },
    /// No eigenvector of the cluster is annihilated by `A₁` to tolerance.
    Refuted { eigenvalue: f64, smallest_kernel_residual: f64 },
}

/// Explains `λ_k(ε₀) = λ_k(ε₁)` for `T_ε = H + A₀ + εA₁` with `A₁ ⪰ 0`.
#[allow(clippy::too_many_arguments)]
pub fn equality_diagnose(
    h: &SymmetricOperator,
    a0: &SymmetricOperator,
    a1: &SymmetricOperator,
    bounds: BoundPair,
    k: usize,
    eps0: f64,
    eps1: f64,
) -> Result<EqualityDiagnosis> {
    check_dims(h, a0)?;
    check_dims(h, a1)?;
    let scale = scale_of(&[h, a0, a1]);
    let a1_eig = eigendecompose(a1)?;
    if a1_eig.min() < -1e-12 * scale {
        return Err(Error::Precondition(format!(
            "A1 must be positive semidefinite (min eigenvalue {})",
            a1_eig.min()
        )));
    }
    let base = h.add(a0);
    let t0 = base.axpy(eps0, a1);
    let t1 = base.axpy(eps1, a1);
    let e0 = eigendecompose(&t0)?;
    let e1 = eigendecompose(&t1)?;
    if k >= e0.dim() {
        return Err(Error::Precondition(format!("index {k} out of range")));
    }
    let (l0, l1) = (e0.values[k], e1.values[k]);
    if (l0 - l1).abs() > 1e-10 * scale {
        return Err(Error::Precondition(format!(
            "eigenvalues differ: lambda_k(eps0) = {l0}, lambda_k(eps1) = {l1}"
        )));
    }
    let (lo, hi) = cluster_around(&e0.values, k, ISOLATION_TOL * scale);
    let basis = cluster_basis(&e0, lo, hi);
    let restricted = SymmetricOperator::symmetrized(basis.transpose() * a1.matrix() * &basis);
    let r_eig = eigendecompose(&restricted)?;
    let y = r_eig.vectors.column(0).into_owned();
    let mut psi = &basis * y;
    psi /= psi.norm();

    let tol = 1e-8 * scale;
    let kernel_residual = (a1.matrix() * &psi).norm();
    let residual_start = (t0.matrix() * &psi - &psi * l0).norm();
    let residual_end = (t1.matrix() * &psi - &psi * l0).norm();
    if kernel_residual <= tol && residual_start <= tol && residual_end <= tol {
        let frame = RelativeFrame::new(h, bounds)?;
        let compressed_residual = (frame.h1_inv_sqrt() * (a1.matrix() * &psi)).norm();
        Ok(EqualityDiagnosis::CommonEigenvector {
            psi,
            eigenvalue: l0,
            residual_start,
            residual_end,
            kernel_residual,
            compressed_residual,
        })
    } else {
        Ok(EqualityDiagnosis::Refuted {
            eigenvalue: l0,
            smallest_kernel_residual: kernel_residual,
        })
    }
}

/// A grid node of the comparison family where the protected interval was hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanViolation {
    pub eta: f64,
    pub epsilon: f64,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCertificate {
    pub granted: bool,
    pub violation: Option<ScanViolation>,
    pub nodes_checked: usize,
    /// `max σ(A₀) = 0`, the normalization of the reference perturbation.
    pub reference_normalized: bool,
    /// Largest `‖α_{ε,η} − α_{ε′,η′}‖` between grid neighbours.
    pub max_step: f64,
    pub protected: (f64, f64),
}

/// Scans `H + α_{ε,η}`, `α_{ε,η} = (1 − ε)ηcA₀ + εηA`, over the grid and
/// certifies that `(−m, −m + δ]` stays free of eigenvalues.
#[allow(clippy::too_many_arguments)]
pub fn comparison_scan(
    h: &SymmetricOperator,
    a0: &SymmetricOperator,
    a: &SymmetricOperator,
    c: f64,
    m: f64,
    delta: f64,
    eta_grid: &[f64],
    eps_grid: &[f64],
) -> Result<ComparisonCertificate> {
    check_dims(h, a0)?;
    check_dims(h, a)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Precondition(format!("need 0 < c < 1, got {c}")));
    }
    if !(m > 0.0) || !(delta > 0.0) {
        return Err(Error::Precondition(format!("need m > 0 and delta > 0, got ({m}, {delta})")));
    }
    if eta_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::Precondition("scan grids must be nonempty".into()));
    }
    let scale = scale_of(&[h, a0, a]);
    let slack = 1e-12 * scale;
    let a0_eig = eigendecompose(a0)?;
    if a0_eig.max() > slack {
        return Err(Error::Precondition("reference A0 must be non-positive".into()));
    }
    if eigendecompose(a)?.max() > slack {
        return Err(Error::Precondition("A must be non-positive".into()));
    }
    if eigendecompose(&a.axpy(-c, a0))?.min() < -slack {
        return Err(Error::Precondition("A is not dominated by c*A0 (A - c*A0 is not PSD)".into()));
    }
    let reference_normalized = a0_eig.max() >= -1e-10 * scale;
    let protected = (-m, -m + delta);
    let hit = |vals: &[f64]| vals.iter().copied().find(|&v| v > protected.0 && v <= protected.1);

    for &eta in eta_grid.iter().filter(|&&e| (0.0..1.0).contains(&e)) {
        let e = eigendecompose(&h.axpy(eta, a0))?;
        if let Some(v) = hit(&e.values) {
            return Err(Error::Hypothesis { eta, eigenvalue: v });
        }
    }

    let alpha = |eps: f64, eta: f64| a0.scaled((1.0 - eps) * eta * c).axpy(eps * eta, a);
    let mut nodes_checked = 0;
    let mut violation = None;
    'scan: for &eta in eta_grid {
        for &eps in eps_grid {
            nodes_checked += 1;
            let e = eigendecompose(&h.add(&alpha(eps, eta)))?;
            if let Some(v) = hit(&e.values) {
                violation = Some(ScanViolation { eta, epsilon: eps, eigenvalue: v });
                break 'scan;
            }
        }
    }

    let mut max_step = 0.0_f64;
    for w in eta_grid.windows(2) {
        for &eps in eps_grid {
            max_step = max_step.max(alpha(eps, w[1]).max_diff(&alpha(eps, w[0])));
        }
    }
    for &eta in eta_grid {
        for w in eps_grid.windows(2) {
            max_step = max_step.max(alpha(w[1], eta).max_diff(&alpha(w[0], eta)));
        }
    }

    Ok(ComparisonCertificate {
        granted: violation.is_none(),
        violation,
        nodes_checked,
        reference_normalized,
        max_step,
        protected,
    })
}

fn in_window(values: &[f64], m: f64) -> Vec<f64> {
    values.iter().copied().filter(|&v| -m < v && v < m).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedComparison {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    /// `λ_k ≤ μ_k` per matched index.
    pub holds: Vec<bool>,
}

impl OrderedComparison {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&x| x)
    }
}

/// In-window eigenvalues of `H + A` and `H + B` for `A ⪯ B ⪯ 0`, matched by
/// ascending order.
pub fn ordered_comparison(
    h: &SymmetricOperator,
    a: &SymmetricOperator,
    b: &SymmetricOperator,
    m: f64,
) -> Result<OrderedComparison> {
    check_dims(h, a)?;
    check_dims(h, b)?;
    if !(m > 0.0) {
        return Err(Error::Precondition(format!("need m > 0, got {m}")));
    }
    let scale = scale_of(&[h, a, b]);
    if eigendecompose(&b.sub(a))?.min() < -1e-12 * scale {
        return Err(Error::Precondition("B - A is not positive semidefinite".into()));
    }
    if eigendecompose(b)?.max() > 1e-12 * scale {
        return Err(Error::Precondition("B must be non-positive".into()));
    }
    let lambdas = in_window(&eigendecompose(&h.add(a))?.values, m);
    let mus = in_window(&eigendecompose(&h.add(b))?.values, m);
    let tol = 1e-10 * scale;
    let holds = lambdas.iter().zip(&mus).map(|(l, u)| *l <= u + tol).collect();
    Ok(OrderedComparison { lambdas, mus, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub k: usize,
    /// `λ_k((1 + ε)c)`.
    pub lower: f64,
    pub mu: f64,
    /// `λ_k((1 − ε)c)`.
    pub upper: f64,
    pub holds: bool,
}

/// `λ_k((1+ε)c) ≤ μ_k ≤ λ_k((1−ε)c)` with `λ_k(η)` the in-window eigenvalues
/// of `H + ηA₀` and `μ_k` those of `H + A`.
pub fn sandwich_bound(
    h: &SymmetricOperator,
    a0: &SymmetricOperator,
    c: f64,
    eps: f64,
    a: &SymmetricOperator,
    m: f64,
) -> Result<Vec<SandwichRow>> {
    check_dims(h, a0)?;
    check_dims(h, a)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Precondition(format!("need 0 < c < 1, got {c}")));
    }
    if !(eps >= 0.0 && eps < 1.0_f64.min(1.0 / c - 1.0)) {
        return Err(Error::Precondition(format!("need 0 <= eps < min(1, 1/c - 1), got {eps}")));
    }
    if !(m > 0.0) {
        return Err(Error::Precondition(format!("need m > 0, got {m}")));
    }
    let scale = scale_of(&[h, a0, a]);
    let slack = 1e-12 * scale;
    let low_op = a0.scaled((1.0 + eps) * c);
    let high_op = a0.scaled((1.0 - eps) * c);
    if eigendecompose(&a.sub(&low_op))?.min() < -slack {
        return Err(Error::Precondition("lower side fails: A - (1+eps)c*A0 is not PSD".into()));
    }
    if eigendecompose(&high_op.sub(a))?.min() < -slack {
        return Err(Error::Precondition("upper side fails: (1-eps)c*A0 - A is not PSD".into()));
    }
    let lows = in_window(&eigendecompose(&h.add(&low_op))?.values, m);
    let mus = in_window(&eigendecompose(&h.add(a))?.values, m);
    let highs = in_window(&eigendecompose(&h.add(&high_op))?.values, m);
    let tol = 1e-10 * scale;
    Ok(lows
        .iter()
        .zip(&mus)
        .zip(&highs)
        .enumerate()
        .map(|(k, ((&lower, &mu), &upper))| SandwichRow {
            k,
            lower,
            mu,
            upper,
            holds: lower <= mu + tol && mu <= upper + tol,
        })
        .collect())
}
