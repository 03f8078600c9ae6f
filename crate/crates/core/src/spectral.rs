//! Discrete Fourier analysis on Z/pZ with `f̂(ξ) = (1/p) Σ f(n) e_p(−ξn)`.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::bohr::{BohrSet, WordNorms, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::pmf::{regular_pmf_capped, ExactPmf, FloatPmf};
use crate::rational::rational_to_f64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// In place `x[k] ← Σ_n x[n] e(−kn/len)`, unnormalised.
pub fn fft_forward(x: &mut [Complex64]) {
    plan(x.len(), true).process(x);
}

/// In place `x[k] ← Σ_n x[n] e(kn/len)`, unnormalised.
pub fn fft_inverse(x: &mut [Complex64]) {
    plan(x.len(), false).process(x);
}

/// Reusable forward transform of one fixed length with its own scratch space.
pub struct ForwardFft {
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl ForwardFft {
    pub fn new(len: usize) -> Self {
        let fft = plan(len, true);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        ForwardFft { fft, scratch }
    }

    pub fn process(&mut self, x: &mut [Complex64]) {
        self.fft.process_with_scratch(x, &mut self.scratch);
    }
}

/// `e_p(a) = e^{2πi a/p}`.
pub fn character(p: u64, a: i64) -> Complex64 {
    let r = a.rem_euclid(p as i64) as f64 / p as f64;
    Complex64::from_polar(1.0, TAU * r)
}

/// Table of `e_p(k)` for `k ∈ 0..p`.
pub fn character_table(p: u64) -> Vec<Complex64> {
    (0..p).map(|k| character(p, k as i64)).collect()
}

/// A complex function on Z/pZ stored densely.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFunction {
    group: PrimeGroup,
    values: Vec<Complex64>,
    bound: Option<f64>,
}

impl GroupFunction {
    pub fn new(group: PrimeGroup, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::DimensionMismatch {
                expected: group.order(),
                found: values.len(),
            });
        }
        Ok(GroupFunction {
            group,
            values,
            bound: None,
        })
    }

    pub fn from_real(group: PrimeGroup, values: &[f64]) -> Result<Self> {
        Self::new(
            group,
            values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn from_fn(group: PrimeGroup, f: impl Fn(u64) -> Complex64) -> Self {
        GroupFunction {
            group,
            values: group.elements().map(f).collect(),
            bound: None,
        }
    }

    /// `n ↦ e_p(ξ n)`.
    pub fn linear_phase(group: PrimeGroup, xi: u64) -> Self {
        let t = character_table(group.p());
        Self::from_fn(group, |n| t[group.mul(xi, n) as usize]).with_bound(1.0)
    }

    /// `n ↦ e_p(α n² + β n)`.
    pub fn quadratic_phase(group: PrimeGroup, alpha: u64, beta: u64) -> Self {
        let t = character_table(group.p());
        Self::from_fn(group, |n| {
            let e = group.add(group.mul(alpha, group.mul(n, n)), group.mul(beta, n));
            t[e as usize]
        })
        .with_bound(1.0)
    }

    pub fn zero(group: PrimeGroup) -> Self {
        Self::from_fn(group, |_| Complex64::default())
    }

    /// Attaches a sup-norm claim without checking it; see [`Self::certify_bound`].
    pub fn with_bound(mut self, b: f64) -> Self {
        self.bound = Some(b);
        self
    }

    /// Checks `|f| ≤ b + 1e-12` and records the claim.
    pub fn certify_bound(mut self, b: f64) -> Result<Self> {
        if let Some((n, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| v.norm() > b + 1e-12)
        {
            return Err(Error::invalid(
                "f",
                format!("|f({n})| = {} exceeds bound {b}", v.norm()),
            ));
        }
        self.bound = Some(b);
        Ok(self)
    }

    pub fn is_one_bounded(&self) -> bool {
        self.values.iter().all(|v| v.norm() <= 1.0 + 1e-12)
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, n: u64) -> Complex64 {
        self.values[n as usize]
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Pointwise product with `n ↦ e_p(ξ n)`.
    pub fn modulate(&self, xi: u64) -> Self {
        let g = self.group;
        let t = character_table(g.p());
        GroupFunction {
            group: g,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(n, v)| v * t[g.mul(xi, n as u64) as usize])
                .collect(),
            bound: self.bound,
        }
    }

    /// `n ↦ f(n + h) · conj f(n)`.
    pub fn multiplicative_derivative(&self, h: u64) -> Self {
        let g = self.group;
        GroupFunction {
            group: g,
            values: g
                .elements()
                .map(|n| self.at(g.add(n, h)) * self.at(n).conj())
                .collect(),
            bound: self.bound.map(|b| b * b),
        }
    }
}

/// Fourier coefficients indexed by frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    group: PrimeGroup,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(group: PrimeGroup, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != group.order() {
            return Err(Error::DimensionMismatch {
                expected: group.order(),
                found: coefficients.len(),
            });
        }
        Ok(Spectrum {
            group,
            coefficients,
        })
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn at(&self, xi: u64) -> Complex64 {
        self.coefficients[xi as usize]
    }

    /// `Σ |f̂(ξ)|²`.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// CSV with header `xi,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "xi,re,im")?;
        for (xi, c) in self.coefficients.iter().enumerate() {
            writeln!(
                w,
                "{xi},{},{}",
                crate::report::fmt_f64(c.re),
                crate::report::fmt_f64(c.im)
            )?;
        }
        Ok(())
    }
}

pub fn dft(f: &GroupFunction) -> Spectrum {
    let mut x = f.values.clone();
    fft_forward(&mut x);
    let inv_p = 1.0 / f.group.p() as f64;
    x.iter_mut().for_each(|c| *c *= inv_p);
    Spectrum {
        group: f.group,
        coefficients: x,
    }
}

/// `f(n) = Σ_ξ f̂(ξ) e_p(ξ n)`, inverting [`dft`].
pub fn idft(s: &Spectrum) -> GroupFunction {
    let mut x = s.coefficients.clone();
    fft_inverse(&mut x);
    GroupFunction {
        group: s.group,
        values: x,
        bound: None,
    }
}

/// `E e_p(λ n) = Σ_n P(n) e_p(λ n)`.
pub fn pmf_fourier(pmf: &ExactPmf, lambda: u64) -> Complex64 {
    float_pmf_fourier(&pmf.to_float(), lambda)
}

pub fn float_pmf_fourier(pmf: &FloatPmf, lambda: u64) -> Complex64 {
    let g = pmf.group();
    pmf.atoms()
        .iter()
        .map(|&(n, m)| character(g.p(), g.mul(lambda, n) as i64) * m)
        .sum()
}

/// `E e_p(λ n)` for every `λ` at once.
pub fn pmf_fourier_all(pmf: &FloatPmf) -> Vec<Complex64> {
    let mut x: Vec<Complex64> = pmf
        .dense()
        .into_iter()
        .map(|m| Complex64::new(m, 0.0))
        .collect();
    fft_inverse(&mut x);
    x
}

#[derive(Clone, Debug, Serialize)]
pub struct FdeEntry {
    pub lambda: u64,
    pub word_norm: u32,
    pub magnitude: f64,
    pub ratio: f64,
}

/// Decay of the Fourier coefficients of the regular pmf against the word norm.
#[derive(Clone, Debug, Serialize)]
pub struct FdeReport {
    pub base: BohrSet,
    /// Every `λ` with non-zero word norm.
    pub entries: Vec<FdeEntry>,
    pub max_ratio: f64,
    pub argmax: u64,
}

/// Ratios `|E e_p(λn)| · ρ · ‖λ‖_S / |S|^{5/2}` for `n` regular on `B`.
pub fn fde_report(b: &BohrSet) -> Result<FdeReport> {
    let pmf = regular_pmf_capped(&b.clone().shifted(0), DEFAULT_ENUM_CAP)?;
    let coeffs = pmf_fourier_all(&pmf.to_float());
    let wn = WordNorms::new(b.freqs());
    let rho = rational_to_f64(&b.rho());
    let scale = (b.rank() as f64).powf(2.5);
    let mut entries = Vec::new();
    let (mut max_ratio, mut argmax) = (0.0f64, 0u64);
    for lambda in b.group().elements() {
        let w = wn.get(lambda);
        if w == 0 {
            continue;
        }
        let magnitude = coeffs[lambda as usize].norm();
        let ratio = magnitude * rho * w as f64 / scale;
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = lambda;
        }
        entries.push(FdeEntry {
            lambda,
            word_norm: w,
            magnitude,
            ratio,
        });
    }
    Ok(FdeReport {
        base: b.clone(),
        entries,
        max_ratio,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(f: &GroupFunction) -> Vec<Complex64> {
        let p = f.group().p();
        (0..p)
            .map(|xi| {
                (0..p)
                    .map(|n| f.at(n) * character(p, -((xi * n % p) as i64)))
                    .sum::<Complex64>()
                    / p as f64
            })
            .collect()
    }

    fn random_fn(p: u64, seed: u64) -> GroupFunction {
        let g = PrimeGroup::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..p)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        GroupFunction::new(g, v).unwrap()
    }

    #[test]
    fn characters() {
        assert_eq!(character(7, 0), Complex64::new(1.0, 0.0));
        for a in 0..13 {
            let prod = character(13, a) * character(13, 13 - a);
            assert!((prod - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_matches_direct_sum() {
        for p in [2u64, 3, 7, 31, 101] {
            let f = random_fn(p, p);
            let fast = dft(&f);
            for (a, b) in fast.coefficients().iter().zip(naive_dft(&f)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_and_pure_phase() {
        let g = PrimeGroup::new(17).unwrap();
        let one = GroupFunction::from_real(g, &[1.0; 17]).unwrap();
        let s = dft(&one);
        assert!((s.at(0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(s.coefficients()[1..].iter().all(|c| c.norm() < 1e-12));
        let s = dft(&GroupFunction::linear_phase(g, 5));
        for xi in 0..17 {
            let want = if xi == 5 { 1.0 } else { 0.0 };
            assert!((s.at(xi).norm() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval_large_p() {
        let f = random_fn(4001, 1);
        let s = dft(&f);
        let back = idft(&s);
        let err = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "round trip error {err}");
        let lhs = s.energy();
        let rhs = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / 4001.0;
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn pmf_fourier_examples() {
        let g = PrimeGroup::new(101).unwrap();
        let u = ExactPmf::uniform(g);
        assert!((pmf_fourier(&u, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(pmf_fourier(&u, 3).norm() < 1e-12);
        let b = BohrSet::from_parts(g, &[1], Rational::new(1, 10)).unwrap();
        let pmf = crate::pmf::regular_pmf(&b).unwrap();
        let direct: Complex64 = pmf
            .pmf()
            .iter()
            .map(|(n, m)| {
                let m = num_traits::ToPrimitive::to_f64(m).unwrap();
                Complex64::from_polar(m, TAU * n as f64 / 101.0)
            })
            .sum();
        assert!((pmf_fourier(pmf.pmf(), 1) - direct).norm() < 1e-12);
        let all = pmf_fourier_all(&pmf.to_float());
        assert!((all[1] - direct).norm() < 1e-12);
    }

    #[test]
    fn fde_excludes_zero_word_norm() {
        let g = PrimeGroup::new(101).unwrap();
        let b = BohrSet::from_parts(g, &[1], Rational::new(1, 10)).unwrap();
        let r = fde_report(&b).unwrap();
        assert_eq!(r.entries.len(), 100);
        assert!(r.entries.iter().all(|e| e.lambda != 0));
        assert!(r.max_ratio.is_finite());
    }

    #[test]
    fn csv_export() {
        let g = PrimeGroup::new(3).unwrap();
        let s = dft(&GroupFunction::from_real(g, &[1.0, 1.0, 1.0]).unwrap());
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("xi,re,im\n0,1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
