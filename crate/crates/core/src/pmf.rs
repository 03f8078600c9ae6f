//! Probability mass functions on Z/pZ: exact regular distributions on Bohr
//! sets, total variation, sampling, and a float view for summation kernels.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bohr::{BohrSet, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::rational::{format_big, parse_big, to_big};

/// A mass function with exact rational masses; only the support is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPmf {
    group: PrimeGroup,
    masses: BTreeMap<u64, BigRational>,
}

impl ExactPmf {
    /// Drops zero masses; does not insist on normalisation.
    pub fn new(group: PrimeGroup, masses: BTreeMap<u64, BigRational>) -> Self {
        let masses = masses
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(a, m)| (a % group.p(), m))
            .collect();
        ExactPmf { group, masses }
    }

    pub fn uniform(group: PrimeGroup) -> Self {
        let m = BigRational::new(BigInt::one(), BigInt::from(group.p()));
        ExactPmf {
            group,
            masses: group.elements().map(|a| (a, m.clone())).collect(),
        }
    }

    pub fn point(group: PrimeGroup, a: u64) -> Self {
        ExactPmf {
            group,
            masses: [(a % group.p(), BigRational::one())].into(),
        }
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn mass(&self, a: u64) -> BigRational {
        self.masses
            .get(&(a % self.group.p()))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.masses.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.masses.iter().map(|(&a, m)| (a, m))
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn total(&self) -> BigRational {
        self.masses
            .values()
            .fold(BigRational::zero(), |acc, m| acc + m)
    }

    pub fn max_mass(&self) -> BigRational {
        self.masses
            .values()
            .max()
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Law of `X + h`.
    pub fn translate(&self, h: u64) -> Self {
        let g = self.group;
        ExactPmf {
            group: g,
            masses: self
                .masses
                .iter()
                .map(|(&a, m)| (g.add(a, h % g.p()), m.clone()))
                .collect(),
        }
    }

    pub fn to_float(&self) -> FloatPmf {
        FloatPmf {
            group: self.group,
            atoms: self
                .masses
                .iter()
                .map(|(&a, m)| (a, m.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

/// `Σ_a |P(a) − Q(a)|`, without the factor one half.
pub fn tv_distance(p: &ExactPmf, q: &ExactPmf) -> Result<BigRational> {
    if p.group != q.group {
        return Err(Error::GroupMismatch {
            left: p.group.p(),
            right: q.group.p(),
        });
    }
    let mut acc = BigRational::zero();
    for (a, m) in &p.masses {
        match q.masses.get(a) {
            Some(n) => acc += (m - n).abs(),
            None => acc += m,
        }
    }
    for (a, n) in &q.masses {
        if !p.masses.contains_key(a) {
            acc += n;
        }
    }
    Ok(acc)
}

/// The regular distribution `2∫_{1/2}^1 1_{B(S,tρ)}/|B(S,tρ)| dt` on a Bohr set.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularPmf {
    base: BohrSet,
    pmf: ExactPmf,
}

impl RegularPmf {
    pub fn base(&self) -> &BohrSet {
        &self.base
    }

    pub fn pmf(&self) -> &ExactPmf {
        &self.pmf
    }

    pub fn mass(&self, a: u64) -> BigRational {
        self.pmf.mass(a)
    }

    /// `1/((ρ/2)^{|S|} p)`, the crude bound on every mass.
    pub fn crude_mass_bound(&self) -> BigRational {
        let half_rho = to_big(&self.base.rho()) / BigRational::from_integer(BigInt::from(2));
        let mut denom = BigRational::from_integer(BigInt::from(self.base.group().p()));
        for _ in 0..self.base.rank() {
            denom *= &half_rho;
        }
        denom.recip()
    }

    /// Law of the shifted set `h + B`.
    pub fn translate(&self, h: u64) -> Self {
        let s = self.base.shift();
        let g = self.base.group();
        RegularPmf {
            base: self.base.clone().shifted(g.add(s, h % g.p())),
            pmf: self.pmf.translate(h),
        }
    }

    pub fn to_float(&self) -> FloatPmf {
        self.pmf.to_float()
    }
}

impl AsRef<ExactPmf> for RegularPmf {
    fn as_ref(&self) -> &ExactPmf {
        &self.pmf
    }
}

/// Exact regular pmf via breakpoint integration in `t`.
pub fn regular_pmf(b: &BohrSet) -> Result<RegularPmf> {
    regular_pmf_capped(b, DEFAULT_ENUM_CAP)
}

pub fn regular_pmf_capped(b: &BohrSet, cap: u64) -> Result<RegularPmf> {
    b.check_cap(cap)?;
    let g = b.group();
    let p = g.p();
    let freqs = b.freqs();
    // Members grouped by the numerator of their dual norm.
    let mut by_num: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for a in g.elements() {
        let num = freqs.dual_num(a);
        if b.below_rho(num) {
            by_num.entry(num).or_default().push(a);
        }
    }
    // An element with norm num/p lies in B(S, tρ) iff t > num/(pρ) =: β.
    // The cell between consecutive breakpoints u < w contributes
    // 2(w − u)/#{β ≤ u} to every element with β ≤ u.
    let rho = to_big(&b.rho());
    let pb = BigRational::from_integer(BigInt::from(p));
    let beta = |num: u64| BigRational::from_integer(BigInt::from(num)) / (&pb * &rho);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));

    let levels: Vec<(BigRational, usize)> = by_num
        .iter()
        .map(|(&num, v)| (beta(num), v.len()))
        .collect();
    let mut cum = Vec::with_capacity(levels.len());
    let mut running = 0usize;
    for (_, c) in &levels {
        running += c;
        cum.push(running);
    }
    // Cells: [1/2, first β > 1/2), ..., [last β < 1, 1].
    let mut cuts: Vec<BigRational> = vec![half.clone()];
    cuts.extend(
        levels
            .iter()
            .map(|(bt, _)| bt)
            .filter(|bt| **bt > half && **bt < one)
            .cloned(),
    );
    cuts.push(one.clone());
    let mut cell_weight = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (u, v) = (&w[0], &w[1]);
        // #{β ≤ u}
        let idx = levels.partition_point(|(bt, _)| bt <= u);
        let count = cum[idx - 1];
        cell_weight.push(&two * (v - u) / BigRational::from_integer(BigInt::from(count)));
    }
    // Suffix sums: an element with breakpoint β collects every cell whose left end is ≥ β.
    let mut suffix = vec![BigRational::zero(); cell_weight.len() + 1];
    for i in (0..cell_weight.len()).rev() {
        suffix[i] = &suffix[i + 1] + &cell_weight[i];
    }
    let lefts = &cuts[..cuts.len() - 1];
    let shift = b.shift();
    let mut masses = BTreeMap::new();
    for ((bt, _), (_, elems)) in levels.iter().zip(by_num.iter()) {
        let first = lefts.partition_point(|u| u < bt);
        let m = suffix[first].clone();
        if m.is_zero() {
            continue;
        }
        for &a in elems {
            masses.insert(g.add(a, shift), m.clone());
        }
    }
    Ok(RegularPmf {
        base: b.clone(),
        pmf: ExactPmf { group: g, masses },
    })
}

/// Two-stage sampler: `t` uniform on `[1/2, 1]`, then uniform on `shift + B(S, tρ)`.
#[derive(Clone, Debug)]
pub struct RegularSampler {
    group: PrimeGroup,
    shift: u64,
    /// Members sorted by dual-norm numerator.
    sorted: Vec<u64>,
    nums: Vec<u64>,
    rho: f64,
}

impl RegularSampler {
    pub fn new(b: &BohrSet) -> Result<Self> {
        let mut members: Vec<(u64, u64)> = b
            .with_rho(b.rho())?
            .shifted(0)
            .members_capped(DEFAULT_ENUM_CAP)?
            .into_iter()
            .map(|a| (b.freqs().dual_num(a), a))
            .collect();
        members.sort_unstable();
        Ok(RegularSampler {
            group: b.group(),
            shift: b.shift(),
            nums: members.iter().map(|m| m.0).collect(),
            sorted: members.iter().map(|m| m.1).collect(),
            rho: crate::rational::rational_to_f64(&b.rho()),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let t: f64 = rng.gen_range(0.5..1.0);
        let bound = t * self.rho * self.group.p() as f64;
        let count = self.nums.partition_point(|&n| (n as f64) < bound).max(1);
        let i = rng.gen_range(0..count);
        self.group.add(self.sorted[i], self.shift)
    }
}

/// One draw from the regular distribution on `b`.
pub fn sample_regular<R: Rng + ?Sized>(b: &BohrSet, rng: &mut R) -> Result<u64> {
    Ok(RegularSampler::new(b)?.sample(rng))
}

/// Float masses on a sparse support; the working form for summation kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatPmf {
    group: PrimeGroup,
    atoms: Vec<(u64, f64)>,
}

impl FloatPmf {
    pub fn new(group: PrimeGroup, atoms: Vec<(u64, f64)>) -> Self {
        FloatPmf { group, atoms }
    }

    pub fn uniform(group: PrimeGroup) -> Self {
        let m = 1.0 / group.p() as f64;
        FloatPmf {
            group,
            atoms: group.elements().map(|a| (a, m)).collect(),
        }
    }

    pub fn point(group: PrimeGroup, a: u64) -> Self {
        FloatPmf {
            group,
            atoms: vec![(a % group.p(), 1.0)],
        }
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.group.order()];
        for &(a, m) in &self.atoms {
            d[a as usize] += m;
        }
        d
    }

    pub fn translate(&self, h: u64) -> Self {
        let g = self.group;
        FloatPmf {
            group: g,
            atoms: self.atoms.iter().map(|&(a, m)| (g.add(a, h), m)).collect(),
        }
    }

    /// Whether the law is invariant under `x ↦ −x`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.dense();
        let g = self.group;
        g.elements()
            .all(|a| (d[a as usize] - d[g.neg(a) as usize]).abs() <= tol)
    }

    /// Law of `X − X'` for independent copies.
    pub fn difference(&self) -> FloatPmf {
        let g = self.group;
        let mut d = vec![0.0; g.order()];
        for &(a, m) in &self.atoms {
            for &(b, n) in &self.atoms {
                d[g.sub(a, b) as usize] += m * n;
            }
        }
        FloatPmf {
            group: g,
            atoms: d
                .into_iter()
                .enumerate()
                .filter(|&(_, m)| m > 0.0)
                .map(|(a, m)| (a as u64, m))
                .collect(),
        }
    }

    /// Draw by inverse transform; the atoms must sum to one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(a, m) in &self.atoms {
            acc += m;
            if u < acc {
                return a;
            }
        }
        self.atoms.last().map(|x| x.0).unwrap_or(0)
    }
}

/// Cumulative table for repeated O(log n) draws from a [`FloatPmf`].
#[derive(Clone, Debug)]
pub struct AliasTable {
    cum: Vec<f64>,
    elems: Vec<u64>,
}

impl AliasTable {
    pub fn new(pmf: &FloatPmf) -> Self {
        let mut acc = 0.0;
        let mut cum = Vec::with_capacity(pmf.len());
        for &(_, m) in pmf.atoms() {
            acc += m;
            cum.push(acc);
        }
        AliasTable {
            cum,
            elems: pmf.atoms().iter().map(|x| x.0).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = *self.cum.last().unwrap_or(&1.0);
        let u: f64 = rng.gen::<f64>() * total;
        let i = self
            .cum
            .partition_point(|&c| c <= u)
            .min(self.elems.len() - 1);
        self.elems[i]
    }
}

#[derive(Serialize, Deserialize)]
struct RegularPmfJson {
    #[serde(flatten)]
    base: BohrSet,
    masses: BTreeMap<u64, String>,
}

impl Serialize for RegularPmf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RegularPmfJson {
            base: self.base.clone(),
            masses: self.pmf.iter().map(|(a, m)| (a, format_big(m))).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegularPmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = RegularPmfJson::deserialize(d)?;
        let mut masses = BTreeMap::new();
        for (a, m) in j.masses {
            masses.insert(a, parse_big(&m).map_err(serde::de::Error::custom)?);
        }
        Ok(RegularPmf {
            pmf: ExactPmf::new(j.base.group(), masses),
            base: j.base,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn b11() -> BohrSet {
        BohrSet::from_parts(PrimeGroup::new(11).unwrap(), &[1], Rational::new(1, 5)).unwrap()
    }

    #[test]
    fn hand_computed_masses() {
        // Cells [1/2, 10/11) with 3 members and [10/11, 1) with 5 members give
        // 3/11 + 2/55 = 17/55 at the centre and 2/55 at ±2.
        let pmf = regular_pmf(&b11()).unwrap();
        for a in [0, 1, 10] {
            assert_eq!(pmf.mass(a), q(17, 55));
        }
        for a in [2, 9] {
            assert_eq!(pmf.mass(a), q(2, 55));
        }
        assert_eq!(pmf.pmf().total(), BigRational::one());
        assert_eq!(pmf.pmf().support_len(), 5);
    }

    #[test]
    fn masses_match_numerical_integration_in_t() {
        let g = PrimeGroup::new(31).unwrap();
        let b = BohrSet::from_parts(g, &[1, 7], Rational::new(1, 3)).unwrap();
        let pmf = regular_pmf(&b).unwrap();
        let steps = 20_000;
        let mut approx = vec![0.0; 31];
        for i in 0..steps {
            let t = 0.5 + 0.5 * (i as f64 + 0.5) / steps as f64;
            let members: Vec<u64> = g
                .elements()
                .filter(|&a| (b.freqs().dual_num(a) as f64) < t * (1.0 / 3.0) * 31.0)
                .collect();
            for &a in &members {
                approx[a as usize] += 1.0 / members.len() as f64 / steps as f64;
            }
        }
        for a in g.elements() {
            let exact = pmf.mass(a).to_f64().unwrap();
            assert!((exact - approx[a as usize]).abs() < 1e-3, "a = {a}");
        }
    }

    #[test]
    fn shift_translates_masses() {
        let base = regular_pmf(&b11()).unwrap();
        let shifted = regular_pmf(&b11().shifted(4)).unwrap();
        for a in 0..11 {
            assert_eq!(shifted.mass((a + 4) % 11), base.mass(a));
        }
        assert_eq!(base.translate(4), shifted);
    }

    #[test]
    fn tv_conventions() {
        let g = PrimeGroup::new(11).unwrap();
        let p = regular_pmf(&b11()).unwrap();
        assert!(tv_distance(p.as_ref(), p.as_ref()).unwrap().is_zero());
        let a = ExactPmf::point(g, 0);
        let b = ExactPmf::point(g, 5);
        assert_eq!(tv_distance(&a, &b).unwrap(), q(2, 1));
        let other = ExactPmf::point(PrimeGroup::new(13).unwrap(), 0);
        assert!(matches!(
            tv_distance(&a, &other),
            Err(Error::GroupMismatch { .. })
        ));
    }

    #[test]
    fn singleton_sampler_returns_shift() {
        let b = b11().with_rho(Rational::new(1, 22)).unwrap().shifted(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(sample_regular(&b, &mut rng).unwrap(), 7);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = RegularSampler::new(&b11()).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn json_round_trip() {
        let pmf = regular_pmf(&b11()).unwrap();
        let s = serde_json::to_string(&pmf).unwrap();
        assert!(s.contains(r#""0":"17/55""#));
        let back: RegularPmf = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pmf);
    }

    #[test]
    fn float_difference_law() {
        let g = PrimeGroup::new(7).unwrap();
        let f = FloatPmf::new(g, vec![(0, 0.5), (1, 0.5)]);
        let d = f.difference().dense();
        assert_eq!(d[0], 0.5);
        assert_eq!(d[1], 0.25);
        assert_eq!(d[6], 0.25);
    }
}
