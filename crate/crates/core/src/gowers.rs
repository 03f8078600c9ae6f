//! The 4-AP form `Λ`, the Cauchy–Schwarz form `x − 3y + 3z − w`, and local
//! U² / U³ box norms, each in exact summation or Monte-Carlo mode.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::pmf::{AliasTable, FloatPmf};
use crate::spectral::{fft_forward, fft_inverse, GroupFunction};

/// Default cap on summands evaluated by exact mode.
pub const DEFAULT_TERM_CAP: u64 = 10_000_000;

/// How an expectation is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Mode {
    /// Exact summation; fails with `SupportTooLarge` above the cap.
    Exact {
        cap: u64,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// Exact below the cap, Monte-Carlo above.
    Auto {
        cap: u64,
        samples: usize,
        seed: u64,
    },
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Auto {
            cap: DEFAULT_TERM_CAP,
            samples: 200_000,
            seed: 0,
        }
    }
}

impl Mode {
    pub fn exact() -> Self {
        Mode::Exact {
            cap: DEFAULT_TERM_CAP,
        }
    }

    fn resolve(self, terms: u64) -> Result<Option<(usize, u64)>> {
        match self {
            Mode::Exact { cap } if terms > cap => Err(Error::SupportTooLarge { terms, cap }),
            Mode::Exact { .. } => Ok(None),
            Mode::MonteCarlo { samples, seed } => Ok(Some((samples, seed))),
            Mode::Auto { cap, samples, seed } => Ok((terms > cap).then_some((samples, seed))),
        }
    }
}

/// An expectation together with its standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
    /// Summands (exact) or samples (Monte-Carlo).
    pub terms: u64,
}

impl Estimate {
    fn exact(value: f64, terms: u64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            exact: true,
            terms,
        }
    }

    fn from_samples(xs: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Estimate {
            value: mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            exact: false,
            terms: n,
        }
    }
}

/// One label of a [`JointSampler`]: its weight and the law of each slot.
#[derive(Clone, Debug)]
pub struct LabelLaw {
    pub weight: f64,
    pub slots: Vec<FloatPmf>,
}

/// A label `c` drawn first, then independent slot variables given `c`.
#[derive(Clone, Debug)]
pub struct JointSampler {
    group: PrimeGroup,
    labels: Vec<LabelLaw>,
}

impl JointSampler {
    /// A single label: the slots are independent.
    pub fn independent(slots: Vec<FloatPmf>) -> Result<Self> {
        Self::labelled(vec![LabelLaw { weight: 1.0, slots }])
    }

    pub fn labelled(labels: Vec<LabelLaw>) -> Result<Self> {
        let first = labels
            .first()
            .ok_or_else(|| Error::invalid("labels", "at least one label required"))?;
        let group = first
            .slots
            .first()
            .ok_or_else(|| Error::invalid("slots", "at least one slot required"))?
            .group();
        let k = first.slots.len();
        for l in &labels {
            if l.slots.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: l.slots.len(),
                });
            }
            if let Some(s) = l.slots.iter().find(|s| s.group() != group) {
                return Err(Error::GroupMismatch {
                    left: group.p(),
                    right: s.group().p(),
                });
            }
        }
        Ok(JointSampler { group, labels })
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn labels(&self) -> &[LabelLaw] {
        &self.labels
    }

    pub fn slot_count(&self) -> usize {
        self.labels[0].slots.len()
    }

    fn expect_slots(&self, k: usize) -> Result<()> {
        if self.slot_count() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: self.slot_count(),
            });
        }
        Ok(())
    }

    /// `Σ_c Π_{i ∈ pattern} |supp slot_i|`, with repeated indices for primed copies.
    fn terms(&self, pattern: &[usize]) -> u64 {
        self.labels
            .iter()
            .map(|l| {
                pattern
                    .iter()
                    .fold(1u64, |acc, &i| acc.saturating_mul(l.slots[i].len() as u64))
            })
            .fold(0u64, |a, b| a.saturating_add(b))
    }

    fn sampler(&self) -> SamplerTables {
        SamplerTables {
            labels: AliasTable::new(&FloatPmf::new(
                self.group,
                self.labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (i as u64, l.weight))
                    .collect(),
            )),
            slots: self
                .labels
                .iter()
                .map(|l| l.slots.iter().map(AliasTable::new).collect())
                .collect(),
        }
    }
}

struct SamplerTables {
    labels: AliasTable,
    slots: Vec<Vec<AliasTable>>,
}

impl SamplerTables {
    fn label<R: Rng>(&self, rng: &mut R) -> usize {
        self.labels.sample(rng) as usize
    }

    fn slot<R: Rng>(&self, rng: &mut R, c: usize, i: usize) -> u64 {
        self.slots[c][i].sample(rng)
    }
}

fn check_len(group: PrimeGroup, f: &[f64]) -> Result<()> {
    if f.len() != group.order() {
        return Err(Error::DimensionMismatch {
            expected: group.order(),
            found: f.len(),
        });
    }
    Ok(())
}

/// `Σ_{a,r} P(a) P(r) f₀(a) f₁(a+r) f₂(a+2r) f₃(a+3r)` for one label.
pub fn lambda4_kernel(group: PrimeGroup, a: &FloatPmf, r: &FloatPmf, fs: [&[f64]; 4]) -> f64 {
    let p = group.p();
    let mut total = 0.0;
    for &(rv, rm) in r.atoms() {
        let (r2, r3) = (group.add(rv, rv), group.mul(3, rv));
        let mut inner = 0.0;
        for &(av, am) in a.atoms() {
            let x0 = fs[0][av as usize];
            if x0 == 0.0 {
                continue;
            }
            let i1 = av + rv;
            let i2 = av + r2;
            let i3 = av + r3;
            let wrap = |i: u64| if i >= p { i - p } else { i };
            inner += am
                * x0
                * fs[1][wrap(i1) as usize]
                * fs[2][wrap(i2) as usize]
                * fs[3][wrap(i3) as usize];
        }
        total += rm * inner;
    }
    total
}

/// `Λ_{a,r}(f₀,f₁,f₂,f₃) = E f₀(a) f₁(a+r) f₂(a+2r) f₃(a+3r)` with slots `[a, r]`.
pub fn lambda4(fs: [&[f64]; 4], j: &JointSampler, mode: Mode) -> Result<Estimate> {
    j.expect_slots(2)?;
    for f in fs {
        check_len(j.group, f)?;
    }
    let terms = j.terms(&[0, 1]);
    let g = j.group;
    match mode.resolve(terms)? {
        None => {
            let value = j
                .labels
                .par_iter()
                .map(|l| l.weight * lambda4_kernel(g, &l.slots[0], &l.slots[1], fs))
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            Ok(Estimate::exact(value, terms))
        }
        Some((samples, seed)) => {
            let t = j.sampler();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Estimate::from_samples((0..samples).map(|_| {
                let c = t.label(&mut rng);
                let a = t.slot(&mut rng, c, 0);
                let r = t.slot(&mut rng, c, 1);
                (0..4u64)
                    .map(|k| fs[k as usize][g.add(a, g.mul(k, r)) as usize])
                    .product()
            })))
        }
    }
}

/// `Λ_{a,r}(f)` with the same function in all four slots.
pub fn lambda4_single(f: &[f64], j: &JointSampler, mode: Mode) -> Result<Estimate> {
    lambda4([f, f, f, f], j, mode)
}

/// `E_{x,y,z} F(x)F(y)F(z)F(x−3y+3z) = E_w (E_y F(w+3y) F(y))²`.
pub fn cauchy_form(f: &[f64], group: PrimeGroup) -> Result<f64> {
    check_len(group, f)?;
    let p = group.p();
    let n = group.order();
    let Some(inv3) = group.inv(3) else {
        // p = 3: w + 3y = w, so the inner average is F(w)·mean(F).
        let mean = f.iter().sum::<f64>() / n as f64;
        return Ok(f.iter().map(|&x| (x * mean).powi(2)).sum::<f64>() / n as f64);
    };
    // c(w) = (1/p) Σ_u F(w+u) G(u) with u = 3y and G(u) = F(u/3): a correlation.
    let mut fa: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut ga: Vec<Complex64> = (0..p)
        .map(|u| Complex64::new(f[group.mul(u, inv3) as usize], 0.0))
        .collect();
    fft_forward(&mut fa);
    fft_forward(&mut ga);
    // Σ_u F(w+u)G(u) has transform F̂(k)·conj Ĝ(k) in the unnormalised convention.
    let mut prod: Vec<Complex64> = fa.iter().zip(&ga).map(|(a, b)| a * b.conj()).collect();
    fft_inverse(&mut prod);
    let scale = 1.0 / (n as f64 * n as f64);
    Ok(prod.iter().map(|c| (c.re * scale).powi(2)).sum::<f64>() / n as f64)
}

/// `Σ_{h₁,h₁'} P₁P₁ |Σ_{h₀} P₀(h₀) f(h₀+h₁) conj f(h₀+h₁')|²` for one label.
pub fn u2_kernel(group: PrimeGroup, f: &[Complex64], p0: &FloatPmf, p1: &FloatPmf) -> f64 {
    let s0 = p0.atoms();
    let s1 = p1.atoms();
    let rows: Vec<Vec<Complex64>> = s1
        .iter()
        .map(|&(h1, _)| {
            s0.iter()
                .map(|&(h0, _)| f[group.add(h0, h1) as usize])
                .collect()
        })
        .collect();
    let w0: Vec<f64> = s0.iter().map(|x| x.1).collect();
    let mut total = 0.0;
    for i in 0..s1.len() {
        for k in i..s1.len() {
            let inner: Complex64 = rows[i]
                .iter()
                .zip(&rows[k])
                .zip(&w0)
                .map(|((a, b), w)| a * b.conj() * w)
                .sum();
            let mult = if i == k { 1.0 } else { 2.0 };
            total += mult * s1[i].1 * s1[k].1 * inner.norm_sqr();
        }
    }
    total
}

fn check_fn(j: &JointSampler, f: &GroupFunction) -> Result<()> {
    if f.group() != j.group {
        return Err(Error::GroupMismatch {
            left: j.group.p(),
            right: f.group().p(),
        });
    }
    Ok(())
}

/// `E f(h₀+h₁) f̄(h₀+h₁') f̄(h₀'+h₁) f(h₀'+h₁')` with slots `[h₀, h₁]`; primed
/// variables are independent copies given the label.
pub fn u2_local(f: &GroupFunction, j: &JointSampler, mode: Mode) -> Result<Estimate> {
    j.expect_slots(2)?;
    check_fn(j, f)?;
    let g = j.group;
    let terms = j.terms(&[0, 1, 1]);
    match mode.resolve(terms)? {
        None => {
            let value = j
                .labels
                .par_iter()
                .map(|l| l.weight * u2_kernel(g, f.values(), &l.slots[0], &l.slots[1]))
                .collect::<Vec<_>>()
                .into_iter()
                .sum();
            Ok(Estimate::exact(value, terms))
        }
        Some((samples, seed)) => {
            let t = j.sampler();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Estimate::from_samples((0..samples).map(|_| {
                let c = t.label(&mut rng);
                let (h0, h0p) = (t.slot(&mut rng, c, 0), t.slot(&mut rng, c, 0));
                let (h1, h1p) = (t.slot(&mut rng, c, 1), t.slot(&mut rng, c, 1));
                let v = f.at(g.add(h0, h1))
                    * f.at(g.add(h0, h1p)).conj()
                    * f.at(g.add(h0p, h1)).conj()
                    * f.at(g.add(h0p, h1p));
                v.re
            })))
        }
    }
}

/// The eight-fold box average with slots `[h₀, h₁, h₂]`.
pub fn u3_local(f: &GroupFunction, j: &JointSampler, mode: Mode) -> Result<Estimate> {
    j.expect_slots(3)?;
    check_fn(j, f)?;
    let g = j.group;
    let terms = j.terms(&[0, 1, 1, 2, 2]);
    match mode.resolve(terms)? {
        None => {
            let value = j
                .labels
                .iter()
                .map(|l| l.weight * u3_kernel(g, f.values(), &l.slots))
                .sum();
            Ok(Estimate::exact(value, terms))
        }
        Some((samples, seed)) => {
            let t = j.sampler();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Estimate::from_samples((0..samples).map(|_| {
                let c = t.label(&mut rng);
                let h: Vec<[u64; 2]> = (0..3)
                    .map(|i| [t.slot(&mut rng, c, i), t.slot(&mut rng, c, i)])
                    .collect();
                let mut acc = Complex64::new(1.0, 0.0);
                for w in 0..8usize {
                    let x = (0..3).fold(0u64, |s, i| g.add(s, h[i][(w >> i) & 1]));
                    let v = f.at(x);
                    acc *= if w.count_ones() % 2 == 0 { v } else { v.conj() };
                }
                acc.re
            })))
        }
    }
}

/// `Σ_{h₂,h₂'} P₂P₂ · u2(x ↦ f(x+h₂) conj f(x+h₂'))` for one label.
pub fn u3_kernel(group: PrimeGroup, f: &[Complex64], slots: &[FloatPmf]) -> f64 {
    let s2 = slots[2].atoms();
    let pairs: Vec<(usize, usize)> = (0..s2.len())
        .flat_map(|i| (i..s2.len()).map(move |k| (i, k)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, k)| {
            let (h2, m2) = s2[i];
            let (h2p, m2p) = s2[k];
            let gf: Vec<Complex64> = group
                .elements()
                .map(|x| f[group.add(x, h2) as usize] * f[group.add(x, h2p) as usize].conj())
                .collect();
            // The (k, i) term is the u2 of conj(g), which has the same value.
            let mult = if i == k { 1.0 } else { 2.0 };
            mult * m2 * m2p * u2_kernel(group, &gf, &slots[0], &slots[1])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::BohrSet;
    use crate::pmf::regular_pmf;
    use crate::rational::Rational;

    fn grp(p: u64) -> PrimeGroup {
        PrimeGroup::new(p).unwrap()
    }

    fn uniform_pair(p: u64) -> JointSampler {
        let g = grp(p);
        JointSampler::independent(vec![FloatPmf::uniform(g), FloatPmf::uniform(g)]).unwrap()
    }

    #[test]
    fn lambda4_constants() {
        let j = uniform_pair(7);
        let one = vec![1.0; 7];
        assert!((lambda4_single(&one, &j, Mode::exact()).unwrap().value - 1.0).abs() < 1e-12);
        let c = vec![0.3; 7];
        let v = lambda4_single(&c, &j, Mode::exact()).unwrap().value;
        assert!((v - 0.3f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn lambda4_indicator_p5() {
        let mut f = vec![0.0; 5];
        f[0] = 1.0;
        f[1] = 1.0;
        let mut count = 0;
        for a in 0..5u64 {
            for r in 0..5u64 {
                if (0..4).all(|k| f[((a + k * r) % 5) as usize] == 1.0) {
                    count += 1;
                }
            }
        }
        let v = lambda4_single(&f, &uniform_pair(5), Mode::exact()).unwrap();
        assert!((v.value - count as f64 / 25.0).abs() < 1e-12);
        assert_eq!(count, 2);
    }

    #[test]
    fn exact_cap_and_monte_carlo() {
        let j = uniform_pair(101);
        let f: Vec<f64> = (0..101).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        assert!(matches!(
            lambda4_single(&f, &j, Mode::Exact { cap: 100 }),
            Err(Error::SupportTooLarge { .. })
        ));
        let exact = lambda4_single(&f, &j, Mode::exact()).unwrap();
        let mc = lambda4_single(
            &f,
            &j,
            Mode::MonteCarlo {
                samples: 200_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!(!mc.exact && mc.std_error > 0.0);
        assert!((mc.value - exact.value).abs() < 4.0 * mc.std_error);
    }

    #[test]
    fn cauchy_matches_brute_force() {
        for p in [3u64, 5, 7, 13] {
            let g = grp(p);
            let f: Vec<f64> = (0..p).map(|i| ((i * i + 1) % 5) as f64 - 2.0).collect();
            let mut brute = 0.0;
            for x in 0..p {
                for y in 0..p {
                    for z in 0..p {
                        let w = g.reduce(x as i64 - 3 * y as i64 + 3 * z as i64);
                        brute += f[x as usize] * f[y as usize] * f[z as usize] * f[w as usize];
                    }
                }
            }
            brute /= (p * p * p) as f64;
            assert!(
                (cauchy_form(&f, g).unwrap() - brute).abs() < 1e-9,
                "p = {p}"
            );
        }
        assert_eq!(cauchy_form(&[0.0; 7], grp(7)).unwrap(), 0.0);
        assert!((cauchy_form(&[1.0; 7], grp(7)).unwrap() - 1.0).abs() < 1e-12);
    }

    fn local_sampler(p: u64, rhos: &[Rational]) -> JointSampler {
        let g = grp(p);
        JointSampler::independent(
            rhos.iter()
                .map(|&r| {
                    regular_pmf(&BohrSet::from_parts(g, &[1], r).unwrap())
                        .unwrap()
                        .to_float()
                })
                .collect(),
        )
        .unwrap()
    }

    fn brute_u2(f: &GroupFunction, j: &JointSampler) -> f64 {
        let g = f.group();
        let l = &j.labels()[0];
        let mut acc = Complex64::default();
        for &(h0, a) in l.slots[0].atoms() {
            for &(h0p, b) in l.slots[0].atoms() {
                for &(h1, c) in l.slots[1].atoms() {
                    for &(h1p, d) in l.slots[1].atoms() {
                        acc += f.at(g.add(h0, h1))
                            * f.at(g.add(h0, h1p)).conj()
                            * f.at(g.add(h0p, h1)).conj()
                            * f.at(g.add(h0p, h1p))
                            * (a * b * c * d);
                    }
                }
            }
        }
        acc.re
    }

    #[test]
    fn u2_phase_zero_and_brute_force() {
        let j = local_sampler(31, &[Rational::new(3, 10), Rational::new(1, 10)]);
        let g = grp(31);
        let phase = GroupFunction::linear_phase(g, 4);
        let v = u2_local(&phase, &j, Mode::exact()).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(
            u2_local(&GroupFunction::zero(g), &j, Mode::exact())
                .unwrap()
                .value,
            0.0
        );
        let f = GroupFunction::from_fn(g, |n| {
            Complex64::new(if (n * n * 7 + n) % 3 == 0 { 1.0 } else { -1.0 }, 0.0)
        });
        let v = u2_local(&f, &j, Mode::exact()).unwrap().value;
        assert!((v - brute_u2(&f, &j)).abs() < 1e-12);
        let m = u2_local(&f.modulate(9), &j, Mode::exact()).unwrap().value;
        assert!((v - m).abs() < 1e-12);
    }

    #[test]
    fn u3_quadratic_is_one() {
        let g = grp(13);
        let j = JointSampler::independent(vec![FloatPmf::uniform(g); 3]).unwrap();
        for f in [
            GroupFunction::quadratic_phase(g, 5, 2),
            GroupFunction::linear_phase(g, 3),
        ] {
            let v = u3_local(&f, &j, Mode::exact()).unwrap().value;
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }
}
