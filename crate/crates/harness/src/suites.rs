//! The verification suites. Each check receives one instance plus the rest
//! of its trial's random stream for auxiliary data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relspec_core::constructions::{
    complex_max_abs, factored_resolvent, offdiagonal_factor, quasidefinite_factor, resolvent, schur_construct,
    spectral_norm, QuasidefiniteBlocks, QuasidefiniteSolver, C64,
};
use relspec_core::inclusion::{
    diagonalb_window, resolvent_strip_threshold, shift_inequality_check, sup_psi, window0, window_essential,
    window_refined, DiagonalbVariant, GapWindow,
};
use relspec_core::operator::{eigendecompose, inertia_of, max_abs_diff, spectral_gaps, SpectralGap};
use relspec_core::relative_form::{compress, factor_perturbation, BoundPair};
use relspec_core::tracker::{
    comparison_scan, enclosure_bound0, enclosure_refined, eigenvalue_derivative,
    eigenvalue_derivative_with_bounded, equality_diagnose, ordered_comparison, sandwich_bound, scale_of,
    track_with_guard, BoundedTerm, EqualityDiagnosis, EssentialGap, Guard,
};
use relspec_core::SymmetricOperator;
use serde::{Deserialize, Serialize};

use crate::ensemble::{gaussian, random_orthogonal, random_psd, wigner, Generator, Instance, Sign};
use crate::error::{HarnessError, Result};
use crate::report::Check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    EvBound,
    EvBoundPm,
    Windows,
    Strips,
    Factorizations,
    Derivatives,
    Sandwich,
    Comparison,
    Appendix,
    Tracking,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::EvBound => "ev_bound",
            Suite::EvBoundPm => "ev_bound_pm",
            Suite::Windows => "windows",
            Suite::Strips => "strips",
            Suite::Factorizations => "factorizations",
            Suite::Derivatives => "derivatives",
            Suite::Sandwich => "sandwich",
            Suite::Comparison => "comparison",
            Suite::Appendix => "appendix",
            Suite::Tracking => "tracking",
        }
    }

    /// Rejects generators whose instances lack what the suite needs.
    pub fn check_compatible(self, generator: &Generator) -> Result<()> {
        use Generator as G;
        let ok = match self {
            Suite::EvBound => matches!(generator, G::Gapped { .. }),
            Suite::EvBoundPm | Suite::Tracking => matches!(generator, G::SemidefiniteSign { .. }),
            Suite::Windows | Suite::Strips => {
                matches!(generator, G::Gapped { .. } | G::Admissible { .. } | G::SemidefiniteSign { .. })
            }
            Suite::Factorizations => matches!(generator, G::Quasidefinite { .. }),
            Suite::Derivatives => !matches!(generator, G::Quasidefinite { .. }),
            Suite::Sandwich | Suite::Comparison => matches!(generator, G::Gapped { .. } | G::SemidefiniteSign { .. }),
            Suite::Appendix => true,
        };
        if !ok {
            return Err(HarnessError::Spec(format!("suite {} cannot run on this generator", self.name())));
        }
        let b = match generator {
            G::Gapped { b, .. } | G::Admissible { b, .. } | G::SemidefiniteSign { b, .. } => *b,
            _ => 0.0,
        };
        if matches!(self, Suite::Windows | Suite::Strips) && b >= 1.0 {
            return Err(HarnessError::Spec(format!("suite {} needs b < 1, got {b}", self.name())));
        }
        Ok(())
    }

    pub fn run(self, inst: &Instance, rng: &mut ChaCha8Rng, tol: f64) -> Vec<Check> {
        let mut out = Checks::default();
        let result = match self {
            Suite::EvBound => ev_bound(inst, tol, &mut out),
            Suite::EvBoundPm => ev_bound_pm(inst, tol, &mut out),
            Suite::Windows => windows(inst, rng, tol, &mut out),
            Suite::Strips => strips(inst, rng, &mut out),
            Suite::Factorizations => factorizations(inst, rng, &mut out),
            Suite::Derivatives => derivatives(inst, rng, &mut out),
            Suite::Sandwich => sandwich(inst, rng, tol, &mut out),
            Suite::Comparison => comparison(inst, rng, &mut out),
            Suite::Appendix => appendix(rng, &mut out),
            Suite::Tracking => tracking(inst, rng, &mut out),
        };
        // a failing library call is a failed trial, not a harness error
        if let Err(e) = result {
            out.fail("library_call", e.to_string());
        }
        out.0
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: &str, passed: bool, margin: Option<f64>, detail: Option<String>) {
        self.0.push(Check {
            name: name.to_string(),
            passed,
            margin: margin.filter(|m| m.is_finite()),
            detail,
        });
    }

    /// Passes when `margin ≥ 0`.
    fn margin(&mut self, name: &str, margin: f64) {
        self.push(name, margin >= 0.0, Some(margin), None);
    }

    /// Passes when `value ≤ limit`; the margin is `limit − value`.
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        let ok = value <= limit;
        self.push(name, ok, Some(limit - value), (!ok).then(|| format!("{value:e} > {limit:e}")));
    }

    fn flag(&mut self, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        let detail = (!ok).then(detail);
        self.push(name, ok, None, detail);
    }

    fn fail(&mut self, name: &str, detail: String) {
        self.push(name, false, None, Some(detail));
    }
}

fn require<T: Copy>(x: Option<T>, what: &str) -> relspec_core::Result<T> {
    x.ok_or_else(|| relspec_core::Error::Precondition(format!("instance carries no {what}")))
}

fn ev_bound(inst: &Instance, tol: f64, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = require(inst.meta.bounds, "bounds")?;
    let gap = require(inst.meta.gap, "essential gap")?;
    let scale = scale_of(&[&inst.h, &inst.a]);
    let rep = enclosure_bound0(&inst.h, &inst.a, bounds, gap)?;
    out.flag("rows_present", !rep.rows.is_empty(), || "no eigenvalue of H in the gap".into());
    out.margin("enclosure", rep.worst_margin() + tol * scale);
    Ok(())
}

fn ev_bound_pm(inst: &Instance, tol: f64, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = require(inst.meta.bounds, "bounds")?;
    let gap = require(inst.meta.gap, "essential gap")?;
    let scale = scale_of(&[&inst.h, &inst.a]);
    let c = compress(&inst.h, &inst.a, bounds)?;
    let touching = match inst.meta.normalized {
        Some(Sign::Positive) => c.c_minus,
        Some(Sign::Negative) => c.c_plus,
        None => 0.0,
    };
    out.at_most("normalized", touching.abs(), 1e-10);
    let coarse = enclosure_bound0(&inst.h, &inst.a, bounds, gap)?;
    let fine = enclosure_refined(&inst.h, &inst.a, bounds, c.c_minus, c.c_plus, gap)?;
    out.flag("rows_present", !fine.rows.is_empty(), || "no eigenvalue of H in the gap".into());
    out.margin("refined_enclosure", fine.worst_margin() + tol * scale);
    out.flag("rows_match", coarse.rows.len() == fine.rows.len(), || {
        format!("{} coarse rows vs {} refined", coarse.rows.len(), fine.rows.len())
    });
    let nest = coarse
        .rows
        .iter()
        .zip(&fine.rows)
        .map(|(x, y)| (y.lower - x.lower).min(x.upper - y.upper))
        .fold(f64::INFINITY, f64::min);
    out.margin("refined_within_bound0", nest + tol * scale);
    if bounds.b == 0.0 {
        let eig = eigendecompose(&inst.a)?;
        let dev = fine
            .rows
            .iter()
            .map(|r| (r.lower - (r.lambda_k + eig.min())).abs().max((r.upper - (r.lambda_k + eig.max())).abs()))
            .fold(0.0, f64::max);
        out.at_most("b_zero_exact_shift", dev, 1e-10);
    }
    Ok(())
}

/// Signed distance from `spectrum` to `window`: positive when every point
/// lies outside the open interval.
fn clearance(window: &GapWindow, spectrum: &[f64]) -> f64 {
    if window.empty {
        return f64::INFINITY;
    }
    spectrum
        .iter()
        .map(|&x| (window.lower - x).max(x - window.upper))
        .fold(f64::INFINITY, f64::min)
}

/// Operator with `0` in a spectral gap and a perturbation controlled only on
/// the diagonal blocks of its sign split: `P₊AP₊ ⪰ −(a₊ + b₊|H|)` and
/// `P₋AP₋ ⪯ a₋ + b₋|H|`, with unrestricted coupling between the blocks.
pub struct BlockControlled {
    pub h: SymmetricOperator,
    pub a: SymmetricOperator,
    pub gap: SpectralGap,
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
}

pub fn block_controlled(rng: &mut ChaCha8Rng, n: usize) -> relspec_core::Result<BlockControlled> {
    let q = (n / 2).max(1);
    let p = n.saturating_sub(q).max(1);
    let n = p + q;
    let mut values: Vec<f64> = (0..q).map(|_| rng.random_range(-6.0..-1.0)).collect();
    values.extend((0..p).map(|_| rng.random_range(1.0..6.0)));
    values.sort_by(f64::total_cmp);
    let (a_plus, a_minus) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
    let (b_plus, b_minus) = (rng.random_range(0.0..0.9), rng.random_range(0.0..0.9));
    let coupling: f64 = rng.random_range(0.0..5.0);

    // D^{1/2}·K·D^{1/2} with ‖K‖ ≤ 1 is dominated by D
    let block = |d: &[f64], rng: &mut ChaCha8Rng| -> relspec_core::Result<DMatrix<f64>> {
        let k = wigner(rng, d.len());
        let norm = eigendecompose(&k)?.norm().max(f64::MIN_POSITIVE);
        let s = DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|x| x.sqrt())));
        let t: f64 = rng.random_range(-1.0..1.0);
        Ok(&s * (k.matrix() * (t / norm)) * &s)
    };
    let dm: Vec<f64> = values[..q].iter().map(|l| a_minus + b_minus * l.abs()).collect();
    let dp: Vec<f64> = values[q..].iter().map(|l| a_plus + b_plus * l.abs()).collect();
    let mut local = DMatrix::zeros(n, n);
    local.view_mut((0, 0), (q, q)).copy_from(&block(&dm, rng)?);
    local.view_mut((q, q), (p, p)).copy_from(&block(&dp, rng)?);
    let off = gaussian(rng, q, p) * coupling;
    local.view_mut((0, q), (q, p)).copy_from(&off);
    local.view_mut((q, 0), (p, q)).copy_from(&off.transpose());

    let basis = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&values));
    Ok(BlockControlled {
        h: SymmetricOperator::new(&basis * d * basis.transpose())?,
        a: SymmetricOperator::new(&basis * local * basis.transpose())?,
        gap: SpectralGap::new(values[q - 1], values[q])?,
        a_plus,
        a_minus,
        b_plus,
        b_minus,
    })
}

const LADDER: [f64; 5] = [1.0, 1.25, 1.5, 1.75, 2.0];

fn windows(inst: &Instance, rng: &mut ChaCha8Rng, tol: f64, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = require(inst.meta.bounds, "bounds")?;
    let scale = scale_of(&[&inst.h, &inst.a]);
    let slack = tol * scale;
    let h_eig = eigendecompose(&inst.h)?;
    let t_vals = eigendecompose(&inst.h.add(&inst.a))?.values;
    let c = compress(&inst.h, &inst.a, bounds)?;
    let gaps = spectral_gaps(&inst.h, 1e-12 * inst.h.norm_max())?;

    let (mut m0, mut m1) = (f64::INFINITY, f64::INFINITY);
    let mut nonempty = 0;
    for gap in &gaps {
        let w0 = window0(*gap, bounds)?;
        let w = window_refined(*gap, bounds, c.c_minus, c.c_plus)?;
        nonempty += usize::from(!w0.empty);
        m0 = m0.min(clearance(&w0, &t_vals));
        m1 = m1.min(clearance(&w, &t_vals));
    }
    out.margin("window0", m0 + slack);
    out.margin("window", m1 + slack);
    out.push("window0_nonempty_count", true, Some(nonempty as f64), None);

    // growing (a, b) along the ladder never enlarges a window, and A stays
    // admissible for every rung
    let mut monotone = true;
    let mut ladder_margin = f64::INFINITY;
    for gap in &gaps {
        let mut previous: Option<GapWindow> = None;
        for s in LADDER {
            if bounds.b * s >= 1.0 {
                break;
            }
            let w = window0(*gap, BoundPair::new(bounds.a * s, bounds.b * s)?)?;
            ladder_margin = ladder_margin.min(clearance(&w, &t_vals));
            if let Some(p) = previous {
                monotone &= w.lower >= p.lower && w.upper <= p.upper;
            }
            previous = Some(w);
        }
    }
    out.flag("ladder_monotone", monotone, || "a window grew along the (a, b) ladder".into());
    out.margin("ladder_window0", ladder_margin + slack);

    if let Some(ess) = inst.meta.gap {
        let inner = in_gap(&h_eig.values, &ess, scale);
        let designated_idx: Vec<usize> = (0..h_eig.dim()).filter(|i| !inner.contains(i)).collect();
        let designated: Vec<f64> = designated_idx.iter().map(|&i| h_eig.values[i]).collect();
        // ends recomputed from this eigensolve, not the generator's values
        let lo = designated.iter().copied().filter(|&x| x < 0.5 * (ess.lower + ess.upper)).fold(f64::NEG_INFINITY, f64::max);
        let hi = designated.iter().copied().filter(|&x| x > 0.5 * (ess.lower + ess.upper)).fold(f64::INFINITY, f64::min);
        let gap = SpectralGap::new(lo, hi)?;
        let w = window_essential(gap, bounds, Some((c.c_minus, c.c_plus)), &designated)?;
        let t_designated: Vec<f64> = designated_idx.iter().map(|&i| t_vals[i]).collect();
        out.margin("window_ess", clearance(&w, &t_designated) + slack);
    }

    let block = block_controlled(rng, inst.h.dim().max(2))?;
    let w = diagonalb_window(
        block.gap,
        block.a_plus,
        block.a_minus,
        block.b_plus,
        block.b_minus,
        DiagonalbVariant::Shifted,
    )?;
    let vals = eigendecompose(&block.h.add(&block.a))?.values;
    let s = scale_of(&[&block.h, &block.a]);
    out.margin("diagonalb_shifted", clearance(&w, &vals) + tol * s);
    Ok(())
}

fn direct_inverse(t: &SymmetricOperator, zeta: C64) -> relspec_core::Result<DMatrix<C64>> {
    let n = t.dim();
    let m = t.matrix().map(|x| C64::new(x, 0.0)) - DMatrix::<C64>::identity(n, n) * zeta;
    m.lu()
        .try_inverse()
        .ok_or_else(|| relspec_core::Error::Construction("H + A - zeta is singular".into()))
}

fn strips(inst: &Instance, rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = require(inst.meta.bounds, "bounds")?;
    let t = inst.h.add(&inst.a);
    let n = t.dim();
    let h_vals = eigendecompose(&inst.h)?.values;
    let t_vals = eigendecompose(&t)?.values;
    let reach = 1.2 * h_vals.iter().fold(1.0_f64, |m, x| m.max(x.abs()));

    let (mut smin, mut neumann_margin) = (f64::INFINITY, f64::INFINITY);
    for i in 0..10 {
        let lambda = -reach + 2.0 * reach * i as f64 / 9.0;
        let eta = 1.01 * resolvent_strip_threshold(bounds, lambda)?;
        for z in [C64::new(lambda, eta), C64::new(lambda, -eta)] {
            let shifted = t.matrix().map(|x| C64::new(x, 0.0)) - DMatrix::<C64>::identity(n, n) * z;
            smin = smin.min(shifted.singular_values().min());
            let neumann = h_vals
                .iter()
                .map(|&l| bounds.radius(l) / (C64::new(l, 0.0) - z).norm())
                .fold(0.0, f64::max);
            neumann_margin = neumann_margin.min(1.0 - neumann);
        }
    }
    out.push("strip_smallest_singular_value", smin > 0.0, Some(smin), None);
    out.push("strip_neumann", neumann_margin > 0.0, Some(neumann_margin), None);

    // resolvent routes at a point at least 1e-3·scale off both spectra
    let scale = scale_of(&[&inst.h, &inst.a]);
    let off = |z: C64| h_vals.iter().chain(&t_vals).all(|&l| (C64::new(l, 0.0) - z).norm() >= 1e-3 * scale);
    let mut draw = || loop {
        let z = C64::new(rng.random_range(-reach..reach), rng.random_range(-2.0..2.0));
        if off(z) {
            return z;
        }
    };
    let (z1, z2) = (draw(), draw());
    let oracle = direct_inverse(&t, z1)?;
    let size = complex_max_abs(&oracle);
    let r1 = resolvent(&inst.h, &inst.a, bounds, z1)?;
    out.at_most("resolvent_direct", complex_max_abs(&(&r1 - &oracle)) / size, 1e-8);
    let factors = factor_perturbation(&compress(&inst.h, &inst.a, bounds)?.c)?;
    let fr = factored_resolvent(&inst.h, &factors, bounds, z1)?;
    out.at_most("resolvent_factored", complex_max_abs(&(&fr.resolvent - &oracle)) / size, 1e-8);
    out.flag("resolvent_invertibility_agrees", fr.invertibility_agrees(), || {
        format!("cond(F) = {:e}, cond(C) = {:e}", fr.f_condition, fr.c_condition)
    });
    let r2 = resolvent(&inst.h, &inst.a, bounds, z2)?;
    let residual = &r1 - &r2 - (&r1 * &r2) * (z1 - z2);
    let norm = complex_max_abs(&r1).max(complex_max_abs(&r2));
    out.at_most(
        "resolvent_identity",
        complex_max_abs(&residual) / norm.max(norm * norm * (z1 - z2).norm()),
        1e-8,
    );
    Ok(())
}

fn factorizations(inst: &Instance, rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let p = require(inst.meta.p, "block split")?;
    let n = inst.h.dim();
    let q = n - p;
    let m = inst.h.matrix();
    let blocks = QuasidefiniteBlocks::new(
        SymmetricOperator::new(m.view((0, 0), (p, p)).into_owned())?,
        SymmetricOperator::new(-m.view((p, p), (q, q)).into_owned())?,
        m.view((0, p), (p, q)).into_owned(),
    )?;
    let scale = inst.h.norm_max();
    let fac = quasidefinite_factor(&blocks)?;
    out.at_most("quasidefinite_reconstruction", fac.congruence.reconstruct().max_diff(&inst.h) / scale, 1e-9);
    if let Some(f) = inst.meta.f_norm {
        out.at_most("coupling_norm", (fac.f_norm - f).abs() / f.max(1.0), 1e-9);
    }

    let rhs = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let x = QuasidefiniteSolver::new(&blocks)?.solve(&rhs)?;
    let residual = (m * &x - &rhs).amax() / (scale * x.amax()).max(rhs.amax());
    out.at_most("quasidefinite_solve", residual, 1e-10);

    let zero_tol = 1e-9 * scale;
    let in_t = inertia_of(&eigendecompose(&inst.h)?.values, zero_tol);
    let in_d = inertia_of(&eigendecompose(&fac.congruence.d)?.values, zero_tol);
    out.flag("inertia", in_t.as_array() == [p, q, 0], || format!("{:?}", in_t.as_array()));
    out.flag("sylvester", in_t == in_d, || format!("{:?} vs {:?}", in_t.as_array(), in_d.as_array()));

    let schur = schur_construct(&inst.h, p)?;
    let diff = max_abs_diff(&schur.congruence.w, &fac.congruence.w).max(schur.congruence.d.max_diff(&fac.congruence.d));
    out.at_most("schur_agreement", diff / scale.max(1.0), 1e-9);

    let b = gaussian(rng, p, p) + DMatrix::identity(p, p);
    let dp = random_psd(rng, p, (p / 2).max(1));
    let dm = random_psd(rng, p, p);
    let od = offdiagonal_factor(&b, &dp, &dm)?;
    let s = od.j_plus_d.amax().max(1.0);
    out.at_most("offdiagonal_product", max_abs_diff(&od.product(), &od.j_plus_d) / (s * s), 1e-10);
    out.margin("offdiagonal_product_spectrum", od.product_spectrum_min + 1e-10 * s * s);
    Ok(())
}

/// Order-test step in units of `isolation/‖dT/dε‖`: well inside the
/// analytic regime, yet far above the rounding floor whatever `‖A‖` is.
pub const RATIO_STEP: f64 = 1e-1;
/// Halvings tried by the order test.
const RATIO_LADDER: usize = 16;
/// Eigenvalue rounding per unit of `scale`.
const ROUNDING: f64 = 16.0 * f64::EPSILON;
/// Accuracy-test step in units of `scale`.
pub const DERIVATIVE_STEP: f64 = 1e-5;

fn derivatives(inst: &Instance, rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = inst.meta.bounds.unwrap_or(BoundPair { a: 1.0, b: 0.0 });
    let h = &inst.h;
    let a = &inst.a;
    let scale = scale_of(&[h, a]);
    let eps: f64 = rng.random_range(-0.5..0.5);
    let vals = eigendecompose(&h.axpy(eps, a))?.values;
    // the best isolated eigenvalue
    let k = (0..vals.len())
        .max_by(|&i, &j| isolation_at(&vals, i).total_cmp(&isolation_at(&vals, j)))
        .unwrap_or(0);
    let d = eigenvalue_derivative(h, a, bounds, eps, k)?;
    let a_norm = eigendecompose(a)?.norm();
    out.at_most("trace_form", (d.value - d.projected_trace).abs() / a_norm.max(f64::MIN_POSITIVE), 1e-10);

    let curve = |e: f64| eigendecompose(&h.axpy(e, a)).map(|s| s.values[k]);
    let probe = Probe {
        analytic: d.value,
        speed: a_norm,
        isolation: isolation_at(&vals, k),
        scale,
    };
    check_difference(out, "lambdaprime", &probe, &curve, eps)?;

    let b0 = wigner(rng, h.dim()).scaled(0.5);
    let term = BoundedTerm {
        value: b0.scaled(eps * eps),
        derivative: b0.scaled(2.0 * eps),
    };
    let vals = eigendecompose(&h.axpy(eps, a).add(&term.value))?.values;
    let k = (0..vals.len())
        .max_by(|&i, &j| isolation_at(&vals, i).total_cmp(&isolation_at(&vals, j)))
        .unwrap_or(0);
    let d = eigenvalue_derivative_with_bounded(h, a, &term, bounds, eps, k)?;
    let curve = |e: f64| eigendecompose(&h.axpy(e, a).axpy(e * e, &b0)).map(|s| s.values[k]);
    let probe = Probe {
        analytic: d.value,
        speed: eigendecompose(&a.add(&term.derivative))?.norm(),
        isolation: isolation_at(&vals, k),
        scale,
    };
    check_difference(out, "lambdaprime_bounded", &probe, &curve, eps)?;
    Ok(())
}

/// Indices of eigenvalues strictly inside `gap`, with the ends' rounding
/// (`1e-12·scale`) counted as outside.
fn in_gap(values: &[f64], gap: &EssentialGap, scale: f64) -> Vec<usize> {
    let tol = 1e-12 * scale;
    (0..values.len())
        .filter(|&i| gap.lower + tol < values[i] && values[i] < gap.upper - tol)
        .collect()
}

fn isolation_at(values: &[f64], i: usize) -> f64 {
    let below = if i > 0 { values[i] - values[i - 1] } else { f64::INFINITY };
    let above = if i + 1 < values.len() { values[i + 1] - values[i] } else { f64::INFINITY };
    below.min(above)
}

fn central(curve: &dyn Fn(f64) -> relspec_core::Result<f64>, at: f64, step: f64) -> relspec_core::Result<f64> {
    Ok((curve(at + step)? - curve(at - step)?) / (2.0 * step))
}

struct Probe {
    analytic: f64,
    /// `‖dT/dε‖`, which bounds `|λ′|`.
    speed: f64,
    isolation: f64,
    scale: f64,
}

/// Error at `h = 1e-5·scale` relative to `‖dT/dε‖`, and the error ratio
/// between `h` and `h/2` at the order-test step.
fn check_difference(
    out: &mut Checks,
    name: &str,
    probe: &Probe,
    curve: &dyn Fn(f64) -> relspec_core::Result<f64>,
    at: f64,
) -> relspec_core::Result<()> {
    let analytic = probe.analytic;
    let speed = probe.speed.max(f64::MIN_POSITIVE);
    let fd = central(curve, at, DERIVATIVE_STEP * probe.scale)?;
    out.at_most(&format!("{name}_relative_error"), (fd - analytic).abs() / speed, 1e-6);

    // halve until two consecutive ratios read second order; near a zero of
    // λ‴ the h⁴ term dominates coarse steps. The rounding floor ends the search.
    let mut step = RATIO_STEP * probe.isolation.min(probe.scale) / speed;
    let mut errs = vec![(central(curve, at, step)? - analytic).abs()];
    let mut ratios: Vec<f64> = Vec::new();
    let in_band = |r: f64| (3.5..=4.5).contains(&r);
    let mut ok = false;
    for _ in 0..RATIO_LADDER {
        step *= 0.5;
        let err = (central(curve, at, step)? - analytic).abs();
        if err < 4.0 * ROUNDING * probe.scale / step {
            break;
        }
        ratios.push(errs[errs.len() - 1] / err);
        errs.push(err);
        if ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(|&r| in_band(r)) {
            ok = true;
            break;
        }
    }
    let ratio = ratios.last().copied().unwrap_or(f64::NAN);
    out.push(
        &format!("{name}_order_ratio"),
        ok,
        Some((ratio - 3.5).min(4.5 - ratio)),
        (!ok).then(|| format!("ratios {ratios:?}")),
    );
    Ok(())
}

/// Window half-width and non-positive reference perturbation shared by the
/// sandwich and comparison suites.
struct ComparisonSetup {
    m: f64,
    /// Largest |λ| over the eigenvalues of `H` inside the essential gap.
    inner: f64,
    /// `G = LLᵀ ⪰ 0` of half rank, so `max σ(−G) = 0`; `A₀ = −G`.
    g: SymmetricOperator,
    factor: DMatrix<f64>,
}

fn comparison_setup(inst: &Instance, rng: &mut ChaCha8Rng, room: f64) -> relspec_core::Result<ComparisonSetup> {
    let gap = require(inst.meta.gap, "essential gap")?;
    let m = 0.75 * gap.lower.abs().min(gap.upper);
    let vals = eigendecompose(&inst.h)?.values;
    let inner = in_gap(&vals, &gap, scale_of(&[&inst.h]))
        .iter()
        .fold(0.0_f64, |x, &i| x.max(vals[i].abs()));
    if !(inner < m) {
        return Err(relspec_core::Error::Precondition(format!(
            "in-gap eigenvalues reach {inner}, beyond the window half-width {m}"
        )));
    }
    let n = inst.h.dim();
    let raw = gaussian(rng, n, (n / 2).max(1));
    let norm = spectral_norm(&raw)?;
    // room: how far A₀ may move eigenvalues without crossing ±m
    let target = room * (gap.upper - m).min(m - inner);
    let factor = raw * (target.sqrt() / norm);
    let g = SymmetricOperator::new(&factor * factor.transpose())?;
    Ok(ComparisonSetup { m, inner, g, factor })
}

fn sandwich(inst: &Instance, rng: &mut ChaCha8Rng, tol: f64, out: &mut Checks) -> relspec_core::Result<()> {
    let c: f64 = rng.random_range(0.3..0.7);
    let eps = rng.random_range(0.0..0.5 * (1.0_f64).min(1.0 / c - 1.0));
    let setup = comparison_setup(inst, rng, 0.9 / ((1.0 + eps) * c))?;
    let a0 = setup.g.scaled(-1.0);
    // A = c·A₀ + εc·L·K·Lᵀ with ‖K‖ ≤ 1
    let k = wigner(rng, setup.factor.ncols());
    let k_norm = eigendecompose(&k)?.norm();
    let t: f64 = rng.random_range(0.0..1.0);
    let wiggle = k.scaled(t / k_norm).congruence(&setup.factor);
    let a = a0.scaled(c).axpy(eps * c, &wiggle);
    let m = setup.m;
    let slack = tol * scale_of(&[&inst.h, &a0]);

    let rows = sandwich_bound(&inst.h, &a0, c, eps, &a, m)?;
    out.flag("sandwich_rows_present", !rows.is_empty(), || "no in-window eigenvalues".into());
    let margin = rows.iter().map(|r| (r.mu - r.lower).min(r.upper - r.mu)).fold(f64::INFINITY, f64::min);
    out.margin("sandwich", margin + slack);

    let low = ordered_comparison(&inst.h, &a0.scaled((1.0 + eps) * c), &a, m)?;
    let high = ordered_comparison(&inst.h, &a, &a0.scaled((1.0 - eps) * c), m)?;
    for (name, cmp) in [("ordered_comparison_lower", &low), ("ordered_comparison_upper", &high)] {
        let margin = cmp.lambdas.iter().zip(&cmp.mus).map(|(l, u)| u - l).fold(f64::INFINITY, f64::min);
        out.margin(name, margin + slack);
        out.flag(&format!("{name}_counts"), cmp.lambdas.len() == cmp.mus.len(), || {
            format!("{} vs {} in-window eigenvalues", cmp.lambdas.len(), cmp.mus.len())
        });
    }

    // the two extreme admissible perturbations attain the ends
    let top = sandwich_bound(&inst.h, &a0, c, eps, &a0.scaled((1.0 - eps) * c), m)?;
    let bottom = sandwich_bound(&inst.h, &a0, c, eps, &a0.scaled((1.0 + eps) * c), m)?;
    let dev = top
        .iter()
        .map(|r| (r.mu - r.upper).abs())
        .chain(bottom.iter().map(|r| (r.mu - r.lower).abs()))
        .fold(0.0, f64::max);
    out.at_most("sandwich_sharp", dev, 1e-12 * scale_of(&[&inst.h, &a0]).max(1.0));
    Ok(())
}

fn grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

fn comparison(inst: &Instance, rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let c: f64 = rng.random_range(0.3..0.7);
    let setup = comparison_setup(inst, rng, 0.9)?;
    let m = setup.m;
    let g_norm = eigendecompose(&setup.g)?.norm();
    let delta = 0.5 * (m - setup.inner - g_norm);
    let a0 = setup.g.scaled(-1.0);
    let r = setup.factor.ncols();
    let mixer = random_psd(rng, r, r);
    let mixer = mixer.scaled(rng.random_range(0.0..1.0) / eigendecompose(&mixer)?.norm());
    // A = −c·L·M·Lᵀ with 0 ⪯ M ⪯ I sits between c·A₀ and 0
    let a = mixer.congruence(&setup.factor).scaled(-c);
    let etas = grid(21);
    let epss = grid(21);

    let cert = comparison_scan(&inst.h, &a0, &a, c, m, delta, &etas, &epss)?;
    out.flag("comparison_granted", cert.granted, || format!("{:?}", cert.violation));
    out.flag("comparison_reference_normalized", cert.reference_normalized, || "max sigma(A0) != 0".into());

    // spoiled: a rank-one reference that drags an in-gap eigenvalue into
    // (−m, −m + δ] at η = 1/2
    let gap = require(inst.meta.gap, "essential gap")?;
    let eig = eigendecompose(&inst.h)?;
    let idx = in_gap(&eig.values, &gap, scale_of(&[&inst.h]))
        .first()
        .copied()
        .ok_or_else(|| relspec_core::Error::Precondition("no in-gap eigenvalue".into()))?;
    let v = eig.vectors.column(idx).into_owned();
    let s = (eig.values[idx] + m - 0.5 * delta) / 0.5;
    let spoiled = SymmetricOperator::new(&v * v.transpose() * -s)?;
    let spoiled_a = spoiled.scaled(0.5 * c);
    let detected = match comparison_scan(&inst.h, &spoiled, &spoiled_a, c, m, delta, &etas, &epss) {
        Err(relspec_core::Error::Hypothesis { eigenvalue, .. }) => -m < eigenvalue && eigenvalue <= -m + delta,
        Ok(cert) => cert.violation.is_some(),
        Err(e) => return Err(e),
    };
    out.flag("comparison_spoiled_detected", detected, || "spoiled instance was certified".into());
    Ok(())
}

/// `sup_ξ (b|ξ| + a)/√((ξ−λ)² + η²)` by grid search over `[−10⁴, 10⁴]`
/// (widened for large data) with golden-section refinement.
pub fn sup_psi_search(a: f64, b: f64, lambda: f64, eta: f64) -> f64 {
    let f = |x: f64| (b * x.abs() + a) / ((x - lambda).powi(2) + eta * eta).sqrt();
    let span = 1e4 * (1.0 + lambda.abs() + eta.abs());
    let n = 200_000;
    let step = 2.0 * span / n as f64;
    let (mut best_x, mut best) = (0.0, f(0.0));
    for i in 0..=n {
        let x = lambda - span + step * i as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (mut lo, mut hi) = (best_x - step, best_x + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-8 * (1.0 + best_x.abs()) {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    // the supremum may only be approached as |ξ| → ∞
    best.max(f(0.5 * (lo + hi))).max(b)
}

fn appendix(rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let a: f64 = rng.random_range(0.0..5.0);
    let b: f64 = rng.random_range(0.0..2.0);
    let bounds = BoundPair::new(a, b)?;
    let eps_max = if b > 0.0 { (0.999 / b).min(5.0) } else { 5.0 };
    let mut margin = f64::INFINITY;
    for i in 0..40 {
        let lambda = -50.0 + 100.0 * i as f64 / 39.0;
        for j in 0..25 {
            let eps = eps_max * j as f64 / 25.0;
            let s = shift_inequality_check(lambda, eps, bounds)?;
            margin = margin.min(if s.holds { (s.rhs - s.lhs).max(0.0) } else { s.rhs - s.lhs });
        }
    }
    out.margin("shift_inequality", margin);

    let lambda: f64 = rng.random_range(-10.0..10.0);
    let eta: f64 = rng.random_range(0.05..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let b_strip: f64 = rng.random_range(0.0..0.99);
    let closed = sup_psi(BoundPair::new(a, b_strip)?, lambda, eta)?;
    let searched = sup_psi_search(a, b_strip, lambda, eta);
    let rel = if closed > 0.0 { ((closed - searched) / closed).abs() } else { (closed - searched).abs() };
    out.at_most("sup_psi", rel, 1e-6);
    Ok(())
}

fn tracking(inst: &Instance, rng: &mut ChaCha8Rng, out: &mut Checks) -> relspec_core::Result<()> {
    let bounds = require(inst.meta.bounds, "bounds")?;
    let gap = require(inst.meta.gap, "essential gap")?;
    let sign = require(inst.meta.normalized, "sign")?;
    let w = window0(SpectralGap::new(gap.lower, gap.upper)?, bounds)?;
    let traj = track_with_guard(&inst.h, &inst.a, bounds, (0.0, 1.0), w, 20, Some(Guard::Both))?;
    let slack = 1e-10;
    let monotone = match sign {
        Sign::Positive => traj.nondecreasing(slack),
        Sign::Negative => traj.curves.iter().all(|c| {
            let pts: Vec<f64> = c.iter().flatten().copied().collect();
            pts.windows(2).all(|x| x[1] <= x[0] + slack)
        }),
    };
    out.flag("monotone", monotone, || "a curve moved against the sign of A".into());
    out.flag("counts_preserved", traj.counts.iter().all(|&c| c == traj.counts[0]), || {
        format!("{:?}", traj.counts)
    });
    out.flag("lipschitz", traj.lipschitz_ok, || "a step exceeded 1.1·‖A‖·Δε".into());

    // planted common eigenvector: the bottom eigenvector of H, annihilated by
    // both perturbations
    let eig = eigendecompose(&inst.h)?;
    let psi = eig.vectors.column(0).into_owned();
    let n = inst.h.dim();
    let proj = DMatrix::identity(n, n) - &psi * psi.transpose();
    let a1 = SymmetricOperator::new(random_psd(rng, n, n).congruence(&proj).into_matrix())?;
    let a0 = SymmetricOperator::new(random_psd(rng, n, n).scaled(0.1).congruence(&proj).into_matrix())?;
    match equality_diagnose(&inst.h, &a0, &a1, bounds, 0, 0.0, 1.0)? {
        EqualityDiagnosis::CommonEigenvector { psi: found, kernel_residual, .. } => {
            out.at_most("planted_kernel_residual", kernel_residual, 1e-8 * scale_of(&[&inst.h, &a0, &a1]));
            out.at_most("planted_alignment", 1.0 - found.dot(&psi).abs(), 1e-8);
        }
        EqualityDiagnosis::Refuted { smallest_kernel_residual, .. } => {
            out.fail("planted_kernel_residual", format!("refuted, residual {smallest_kernel_residual:e}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::trial_rng;
    use relspec_core::inclusion::WindowSource;

    #[test]
    fn search_matches_closed_form() {
        for &(a, b, l, eta) in &[(1.0, 0.5, -1.0, 0.3), (0.2, 0.0, 3.0, -2.0), (0.0, 0.9, 0.0, 1.0), (4.0, 0.3, 7.0, 0.05)] {
            let closed = sup_psi(BoundPair::new(a, b).unwrap(), l, eta).unwrap();
            let found = sup_psi_search(a, b, l, eta);
            assert!(((closed - found) / closed).abs() < 1e-6, "{a} {b} {l} {eta}: {closed} vs {found}");
        }
    }

    #[test]
    fn clearance_is_signed() {
        let w = GapWindow::new(-1.0, 1.0, WindowSource::Window0);
        assert_eq!(clearance(&w, &[-3.0, 2.0]), 1.0);
        assert_eq!(clearance(&w, &[0.5]), -0.5);
        let empty = GapWindow::new(1.0, -1.0, WindowSource::Window0);
        assert_eq!(clearance(&empty, &[0.0]), f64::INFINITY);
    }

    #[test]
    fn compatibility() {
        let gapped = Generator::Gapped {
            layout: Default::default(),
            a: 0.2,
            b: 0.3,
            fill: 1.0,
        };
        assert!(Suite::EvBound.check_compatible(&gapped).is_ok());
        assert!(Suite::Factorizations.check_compatible(&gapped).is_err());
        assert!(Suite::Tracking.check_compatible(&gapped).is_err());
        let wide = Generator::Admissible { a: 0.1, b: 1.5, fill: 1.0 };
        assert!(matches!(Suite::Strips.check_compatible(&wide), Err(HarnessError::Spec(_))));
        assert!(Suite::Derivatives.check_compatible(&wide).is_ok());
    }

    #[test]
    fn block_controlled_meets_its_block_bounds() {
        for trial in 0..20 {
            let mut rng = trial_rng(3, trial);
            let inst = block_controlled(&mut rng, 9).unwrap();
            let eig = eigendecompose(&inst.h).unwrap();
            let (neg, pos): (Vec<usize>, Vec<usize>) = (0..9).partition(|&i| eig.values[i] < 0.0);
            let sub = |idx: &[usize]| {
                let v = eig.vectors.select_columns(idx);
                let block = v.transpose() * inst.a.matrix() * &v;
                SymmetricOperator::new(block).unwrap()
            };
            // block + (a + b|λ|) ⪰ 0 on the positive part, ⪯ 0 on the negative part
            let r_pos: Vec<f64> = pos.iter().map(|&i| inst.a_plus + inst.b_plus * eig.values[i].abs()).collect();
            let r_neg: Vec<f64> = neg.iter().map(|&i| inst.a_minus + inst.b_minus * eig.values[i].abs()).collect();
            let lower = sub(&pos).add(&SymmetricOperator::diagonal(&r_pos).unwrap());
            let upper = SymmetricOperator::diagonal(&r_neg).unwrap().sub(&sub(&neg));
            assert!(eigendecompose(&lower).unwrap().min() >= -1e-12);
            assert!(eigendecompose(&upper).unwrap().min() >= -1e-12);
        }
    }
}
