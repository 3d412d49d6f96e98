mod common;

use common::*;
use proptest::prelude::*;
use relspec_core::inclusion::{window0, GapWindow, WindowSource};
use relspec_core::operator::{eigendecompose, SpectralGap};
use relspec_core::relative_form::{compress, extract_scalar_part, BoundPair};
use relspec_core::tracker::{
    eigenvalue_derivative, enclosure_bound0, enclosure_refined, track_with_guard, EssentialGap, Guard,
};
use relspec_core::SymmetricOperator;

/// Two outer clusters and `inner` eigenvalues in `[-0.5, 0.5]`.
fn gapped(r: &mut rand_chacha::ChaCha8Rng, n: usize, inner: usize) -> (SymmetricOperator, EssentialGap) {
    let outer = n - inner;
    let mut values: Vec<f64> = (0..outer / 2).map(|_| uniform(r, -10.0, -4.0)).collect();
    values.extend((outer / 2..outer).map(|_| uniform(r, 4.0, 10.0)));
    values.extend((0..inner).map(|_| uniform(r, -0.5, 0.5)));
    let below = values[..outer / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let above = values[outer / 2..outer].iter().copied().fold(f64::INFINITY, f64::min);
    (with_spectrum(r, &values), EssentialGap { lower: below, upper: above })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_trace_forms_agree(seed in any::<u64>(), n in 1usize..=15, a in 0.1..2.0f64, b in 0.0..0.9f64, eps in -1.0..1.0f64) {
        let mut r = rng(seed);
        let h = random_symmetric(&mut r, n);
        let pert = random_symmetric(&mut r, n);
        let k = (seed as usize) % n;
        let d = eigenvalue_derivative(&h, &pert, BoundPair::new(a, b).unwrap(), eps, k).unwrap();
        prop_assert!((d.value - d.projected_trace).abs() <= 1e-10 * pert.norm_max().max(1.0));
    }

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>(), n in 2usize..=12, eps in -0.5..0.5f64) {
        let mut r = rng(seed);
        let h = random_symmetric(&mut r, n);
        let pert = random_symmetric(&mut r, n);
        let k = (seed as usize) % n;
        let d = eigenvalue_derivative(&h, &pert, BoundPair::new(1.0, 0.0).unwrap(), eps, k).unwrap();
        // keep to well separated eigenvalues so the curve is smooth on the stencil
        prop_assume!(d.isolation > 1e-2);
        let scale = h.norm_max() + pert.norm_max();
        let step = 1e-5 * scale;
        let at = |e: f64| eigendecompose(&h.axpy(e, &pert)).unwrap().values[k];
        let fd = (at(eps + step) - at(eps - step)) / (2.0 * step);
        prop_assert!((fd - d.value).abs() <= 1e-6 * d.value.abs().max(1.0), "{fd} vs {}", d.value);
    }

    #[test]
    fn ordered_eigenvalues_respect_loewner_order(seed in any::<u64>(), n in 1usize..=20, rank in 1usize..=20) {
        let mut r = rng(seed);
        let h = random_symmetric(&mut r, n);
        let a = random_symmetric(&mut r, n);
        let b = a.add(&random_psd(&mut r, n, rank.min(n)));
        let la = eigendecompose(&h.add(&a)).unwrap().values;
        let lb = eigendecompose(&h.add(&b)).unwrap().values;
        let tol = 1e-12 * (h.norm_max() + b.norm_max());
        for (x, y) in la.iter().zip(&lb) {
            prop_assert!(*x <= y + tol);
        }
    }

    #[test]
    fn enclosures_are_sound(seed in any::<u64>(), n in 4usize..=20, inner in 1usize..=3, u in 0.0..1.0f64) {
        let mut r = rng(seed);
        let (h, gap) = gapped(&mut r, n, inner.min(n - 2));
        let bounds = BoundPair::new(0.2, 0.3).unwrap();
        let pert = admissible(&mut r, &h, bounds, u);
        let rep = enclosure_bound0(&h, &pert, bounds, gap).unwrap();
        prop_assert!(!rep.rows.is_empty());
        prop_assert!(rep.all_within(), "{rep:?}");
    }

    #[test]
    fn refined_enclosures_nest(seed in any::<u64>(), n in 4usize..=20, u in 0.0..1.0f64, negative in any::<bool>()) {
        let mut r = rng(seed);
        let (h, gap) = gapped(&mut r, n, 1);
        let bounds = BoundPair::new(0.2, 0.3).unwrap();
        let psd = random_psd(&mut r, n, n / 2 + 1);
        let (psd, _) = extract_scalar_part(&if negative { psd.scaled(-1.0) } else { psd }).unwrap();
        let norm = compress(&h, &psd, bounds).unwrap().norm;
        let pert = psd.scaled(u / norm);
        let c = compress(&h, &pert, bounds).unwrap();
        let coarse = enclosure_bound0(&h, &pert, bounds, gap).unwrap();
        let fine = enclosure_refined(&h, &pert, bounds, c.c_minus, c.c_plus, gap).unwrap();
        prop_assert!(fine.all_within(), "{fine:?}");
        prop_assert_eq!(coarse.rows.len(), fine.rows.len());
        for (x, y) in coarse.rows.iter().zip(&fine.rows) {
            prop_assert!(x.lower <= y.lower + 1e-12 && y.upper <= x.upper + 1e-12);
        }
    }

    #[test]
    fn two_sided_certificates_preserve_counts(seed in any::<u64>(), n in 4usize..=14, u in 0.0..0.9f64) {
        let mut r = rng(seed);
        let (h, gap) = gapped(&mut r, n, 2);
        let bounds = BoundPair::new(0.2, 0.3).unwrap();
        let pert = admissible(&mut r, &h, bounds, u);
        let w = window0(SpectralGap::new(gap.lower, gap.upper).unwrap(), bounds).unwrap();
        let window = GapWindow::new(w.lower, w.upper, WindowSource::Window0);
        // εA obeys the bound with (εa, εb), so neither end is ever reached
        let t = track_with_guard(&h, &pert, bounds, (0.0, 1.0), window, 20, Some(Guard::Both)).unwrap();
        prop_assert!(t.counts.iter().all(|&c| c == t.counts[0]));
        prop_assert_eq!(t.counts[0], 2);
        prop_assert!(t.lipschitz_ok);
    }
}
