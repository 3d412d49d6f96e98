//! Seeded instance generators. Trial `k` of a spec draws from its own
//! ChaCha8 stream, so instances do not depend on evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use relspec_core::constructions::{spectral_norm, QuasidefiniteBlocks};
use relspec_core::operator::eigendecompose;
use relspec_core::relative_form::{compress, extract_scalar_part, BoundPair};
use relspec_core::tracker::EssentialGap;
use relspec_core::SymmetricOperator;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Spectrum placement for gapped instances: outer clusters stand in for the
/// essential spectrum, `inner_count` eigenvalues sit in the gap between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapLayout {
    pub below: [f64; 2],
    pub above: [f64; 2],
    pub inner: [f64; 2],
    pub inner_count: usize,
}

impl Default for GapLayout {
    fn default() -> Self {
        Self {
            below: [-10.0, -4.0],
            above: [4.0, 10.0],
            inner: [-0.5, 0.5],
            inner_count: 1,
        }
    }
}

impl GapLayout {
    fn validate(&self, n: usize, bounds: BoundPair) -> Result<()> {
        let ordered = |r: &[f64; 2]| r[0] < r[1];
        if !(ordered(&self.below) && ordered(&self.above) && ordered(&self.inner)) {
            return Err(HarnessError::Spec("every layout range needs lo < hi".into()));
        }
        if !(self.below[1] < self.inner[0] && self.inner[1] < self.above[0]) {
            return Err(HarnessError::Spec("inner range must lie strictly between the outer clusters".into()));
        }
        if self.inner_count == 0 || n < self.inner_count + 2 {
            return Err(HarnessError::Spec(format!(
                "need 1 <= inner_count <= n - 2, got inner_count {} for n {n}",
                self.inner_count
            )));
        }
        if bounds.b >= 1.0 {
            return Err(HarnessError::Spec(format!("need b < 1, got {}", bounds.b)));
        }
        // x ± r(x) is increasing for b < 1, so the extreme layout points decide
        let r = |x: f64| bounds.a + bounds.b * x.abs();
        let lower_ok = self.below[1] + r(self.below[1]) < self.inner[0] - r(self.inner[0]);
        let upper_ok = self.inner[1] + r(self.inner[1]) < self.above[0] - r(self.above[0]);
        if !(lower_ok && upper_ok) {
            return Err(HarnessError::Spec(
                "layout and (a, b) leave an impenetrability interval empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

fn default_fill() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Independent real Wigner matrices for `H` and `A`.
    DenseGueLike,
    /// Gapped `H`, `A` with `‖H₁^{-1/2}AH₁^{-1/2}‖ = u`, `u` uniform in `[0, fill)`.
    Gapped {
        #[serde(default)]
        layout: GapLayout,
        a: f64,
        b: f64,
        #[serde(default = "default_fill")]
        fill: f64,
    },
    /// `H = [[H₊, B], [Bᵀ, −H₋]]` with `‖H₊^{-1/2}BH₋^{-1/2}‖ = f_norm`.
    Quasidefinite { p: usize, q: usize, f_norm: f64 },
    /// Gapped `H`, semidefinite `A` normalized so that its spectrum touches 0.
    SemidefiniteSign {
        #[serde(default)]
        layout: GapLayout,
        a: f64,
        b: f64,
        sign: Sign,
        #[serde(default = "default_fill")]
        fill: f64,
    },
    /// Spread-out `H`, `A` admissible for `(a, b)`.
    Admissible {
        a: f64,
        b: f64,
        #[serde(default = "default_fill")]
        fill: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub generator: Generator,
}

/// Everything about an instance except its matrices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub bounds: Option<BoundPair>,
    pub gap: Option<EssentialGap>,
    /// Leading block size of a quasidefinite `H`.
    pub p: Option<usize>,
    pub f_norm: Option<f64>,
    /// `A` is semidefinite with `min σ(A) = 0` (or `max σ(A) = 0`).
    pub normalized: Option<Sign>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub h: SymmetricOperator,
    pub a: SymmetricOperator,
    pub meta: InstanceMeta,
}

/// Independent stream for trial `trial` of `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn wigner(rng: &mut ChaCha8Rng, n: usize) -> SymmetricOperator {
    let g = gaussian(rng, n, n);
    SymmetricOperator::new((&g + g.transpose()) / (2.0 * (n as f64).sqrt())).expect("finite")
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian(rng, n, n).qr().q()
}

pub fn with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> SymmetricOperator {
    let q = random_orthogonal(rng, values.len());
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
    SymmetricOperator::new(&q * d * q.transpose()).expect("finite")
}

/// Rank-deficient PSD matrix `GGᵀ`, so `min σ = 0` up to rounding.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymmetricOperator {
    let g = gaussian(rng, n, rank);
    SymmetricOperator::new(&g * g.transpose()).expect("finite")
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    rng.random_range(r[0]..r[1])
}

pub fn gapped_operator(rng: &mut ChaCha8Rng, n: usize, layout: &GapLayout) -> (SymmetricOperator, EssentialGap) {
    let outer = n - layout.inner_count;
    let n_below = outer / 2;
    let mut values: Vec<f64> = (0..n_below).map(|_| uniform(rng, layout.below)).collect();
    values.extend((n_below..outer).map(|_| uniform(rng, layout.above)));
    let lower = values[..n_below].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let upper = values[n_below..].iter().copied().fold(f64::INFINITY, f64::min);
    values.extend((0..layout.inner_count).map(|_| uniform(rng, layout.inner)));
    (with_spectrum(rng, &values), EssentialGap { lower, upper })
}

/// Rescales `s` to compressed norm `u`.
fn scale_to(h: &SymmetricOperator, s: SymmetricOperator, bounds: BoundPair, u: f64) -> Result<SymmetricOperator> {
    let norm = compress(h, &s, bounds)?.norm;
    Ok(if norm > 0.0 { s.scaled(u / norm) } else { s })
}

fn check_fill(fill: f64) -> Result<()> {
    if !(fill > 0.0 && fill <= 1.0) {
        return Err(HarnessError::Spec(format!("fill must lie in (0, 1], got {fill}")));
    }
    Ok(())
}

fn bounds_of(a: f64, b: f64) -> Result<BoundPair> {
    let bounds = BoundPair::new(a, b).map_err(|e| HarnessError::Spec(e.to_string()))?;
    if !(a > 0.0) {
        return Err(HarnessError::Spec(format!("need a > 0, got {a}")));
    }
    Ok(bounds)
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(HarnessError::Spec("n must be positive".into()));
        }
        match &self.generator {
            Generator::DenseGueLike => {}
            Generator::Gapped { layout, a, b, fill } | Generator::SemidefiniteSign { layout, a, b, fill, .. } => {
                check_fill(*fill)?;
                layout.validate(self.n, bounds_of(*a, *b)?)?;
            }
            Generator::Quasidefinite { p, q, f_norm } => {
                if *p == 0 || *q == 0 || p + q != self.n {
                    return Err(HarnessError::Spec(format!("need p, q >= 1 and p + q = n, got {p} + {q} vs {}", self.n)));
                }
                if !(*f_norm >= 0.0 && f_norm.is_finite()) {
                    return Err(HarnessError::Spec(format!("f_norm must be finite and >= 0, got {f_norm}")));
                }
            }
            Generator::Admissible { a, b, fill } => {
                check_fill(*fill)?;
                bounds_of(*a, *b)?;
            }
        }
        Ok(())
    }

    /// The `(a, b)` every instance of this spec is admissible for.
    pub fn bounds(&self) -> Option<BoundPair> {
        match &self.generator {
            Generator::Gapped { a, b, .. } | Generator::SemidefiniteSign { a, b, .. } | Generator::Admissible { a, b, .. } => {
                BoundPair::new(*a, *b).ok()
            }
            _ => None,
        }
    }

    pub fn instance(&self, trial: u64) -> Result<Instance> {
        self.validate()?;
        let mut rng = trial_rng(self.seed, trial);
        self.draw(&mut rng)
    }

    /// The instance stream; `count = 0` gives an empty stream.
    pub fn generate(&self) -> impl Iterator<Item = Result<Instance>> + '_ {
        (0..self.count as u64).map(move |t| self.instance(t))
    }

    /// Draws the instance from `rng`; suites keep using the same stream for
    /// their auxiliary randomness.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Instance> {
        let n = self.n;
        match &self.generator {
            Generator::DenseGueLike => Ok(Instance {
                h: wigner(rng, n),
                a: wigner(rng, n),
                meta: InstanceMeta::default(),
            }),
            Generator::Gapped { layout, a, b, fill } => {
                let bounds = BoundPair::new(*a, *b)?;
                let (h, gap) = gapped_operator(rng, n, layout);
                let u = rng.random_range(0.0..*fill);
                let s = wigner(rng, n);
                Ok(Instance {
                    a: scale_to(&h, s, bounds, u)?,
                    h,
                    meta: InstanceMeta {
                        bounds: Some(bounds),
                        gap: Some(gap),
                        ..Default::default()
                    },
                })
            }
            Generator::SemidefiniteSign { layout, a, b, sign, fill } => {
                let bounds = BoundPair::new(*a, *b)?;
                let (h, gap) = gapped_operator(rng, n, layout);
                let u = rng.random_range(0.0..*fill);
                let rank = rng.random_range(1..=n.max(2) - 1).min(n);
                let psd = random_psd(rng, n, rank);
                let signed = match sign {
                    Sign::Positive => psd,
                    Sign::Negative => psd.scaled(-1.0),
                };
                let (normalized, _) = extract_scalar_part(&signed)?;
                Ok(Instance {
                    a: scale_to(&h, normalized, bounds, u)?,
                    h,
                    meta: InstanceMeta {
                        bounds: Some(bounds),
                        gap: Some(gap),
                        normalized: Some(*sign),
                        ..Default::default()
                    },
                })
            }
            Generator::Quasidefinite { p, q, f_norm } => {
                let hp = random_psd(rng, *p, *p).shifted(0.5);
                let hm = random_psd(rng, *q, *q).shifted(0.5);
                let raw = gaussian(rng, *p, *q);
                let root = |m: &SymmetricOperator| eigendecompose(m).and_then(|e| e.apply(f64::sqrt));
                let (hp_s, hm_s) = (root(&hp)?, root(&hm)?);
                let f0 = spectral_norm(&raw)?;
                let f = if f0 > 0.0 { raw * (*f_norm / f0) } else { raw };
                let b = hp_s.matrix() * f * hm_s.matrix();
                let blocks = QuasidefiniteBlocks::new(hp, hm, b)?;
                Ok(Instance {
                    h: blocks.assemble(),
                    a: SymmetricOperator::zeros(n),
                    meta: InstanceMeta {
                        p: Some(*p),
                        f_norm: Some(*f_norm),
                        ..Default::default()
                    },
                })
            }
            Generator::Admissible { a, b, fill } => {
                let bounds = BoundPair::new(*a, *b)?;
                let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let h = with_spectrum(rng, &values);
                let u = rng.random_range(0.0..*fill);
                let s = wigner(rng, n);
                Ok(Instance {
                    a: scale_to(&h, s, bounds, u)?,
                    h,
                    meta: InstanceMeta {
                        bounds: Some(bounds),
                        ..Default::default()
                    },
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use relspec_core::relative_form::minimal_b;

    fn spec(generator: Generator, count: usize) -> EnsembleSpec {
        EnsembleSpec {
            n: 8,
            count,
            seed: 42,
            generator,
        }
    }

    #[test]
    fn empty_stream() {
        assert_eq!(spec(Generator::DenseGueLike, 0).generate().count(), 0);
    }

    #[test]
    fn same_seed_same_instance() {
        let s = spec(Generator::Admissible { a: 0.1, b: 0.3, fill: 1.0 }, 2);
        let x = s.instance(1).unwrap();
        let y = s.instance(1).unwrap();
        assert_eq!(x, y);
        assert_ne!(s.instance(0).unwrap(), x);
    }

    #[test]
    fn admissible_respects_b() {
        let s = spec(Generator::Admissible { a: 0.1, b: 0.3, fill: 1.0 }, 5);
        for inst in s.generate() {
            let inst = inst.unwrap();
            assert!(minimal_b(&inst.h, &inst.a, 0.1).unwrap() <= 0.3 + 1e-10);
        }
    }

    #[test]
    fn contradictory_layout_is_rejected() {
        let layout = GapLayout {
            inner: [-3.9, 0.5],
            ..Default::default()
        };
        let s = spec(Generator::Gapped { layout, a: 0.2, b: 0.3, fill: 1.0 }, 1);
        assert!(matches!(s.validate(), Err(HarnessError::Spec(_))));
        let s = spec(Generator::Quasidefinite { p: 3, q: 3, f_norm: 1.0 }, 1);
        assert!(s.validate().is_err());
    }

    #[test]
    fn semidefinite_instances_touch_zero() {
        let s = spec(
            Generator::SemidefiniteSign {
                layout: GapLayout::default(),
                a: 0.2,
                b: 0.3,
                sign: Sign::Negative,
                fill: 1.0,
            },
            3,
        );
        for inst in s.generate() {
            let inst = inst.unwrap();
            let c = compress(&inst.h, &inst.a, inst.meta.bounds.unwrap()).unwrap();
            assert!(c.c_plus.abs() <= 1e-10 && c.norm <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn quasidefinite_has_requested_coupling() {
        let s = EnsembleSpec {
            n: 7,
            count: 1,
            seed: 3,
            generator: Generator::Quasidefinite { p: 3, q: 4, f_norm: 2.0 },
        };
        let inst = s.instance(0).unwrap();
        let blocks = QuasidefiniteBlocks::new(
            SymmetricOperator::new(inst.h.matrix().view((0, 0), (3, 3)).into_owned()).unwrap(),
            SymmetricOperator::new(-inst.h.matrix().view((3, 3), (4, 4)).into_owned()).unwrap(),
            inst.h.matrix().view((0, 3), (3, 4)).into_owned(),
        )
        .unwrap();
        let f = relspec_core::constructions::quasidefinite_factor(&blocks).unwrap();
        assert!((f.f_norm - 2.0).abs() < 1e-10);
    }
}
