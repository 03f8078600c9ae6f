//! Bohr sets in Z/pZ, dual norms and word norms.

use std::collections::VecDeque;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::rational::{as_fraction, Rational};

/// Default bound on the number of group elements an operation may enumerate.
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

/// A non-degenerate frequency set: sorted residues containing a non-zero element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FrequencySet {
    group: PrimeGroup,
    elems: Vec<u64>,
}

impl FrequencySet {
    pub fn new(group: PrimeGroup, freqs: &[i64]) -> Result<Self> {
        let mut elems: Vec<u64> = freqs.iter().map(|&x| group.reduce(x)).collect();
        elems.sort_unstable();
        elems.dedup();
        if elems.iter().all(|&x| x == 0) {
            return Err(Error::DegenerateFrequencySet);
        }
        Ok(FrequencySet { group, elems })
    }

    pub fn from_residues(group: PrimeGroup, freqs: &[u64]) -> Result<Self> {
        let v: Vec<i64> = freqs.iter().map(|&x| (x % group.p()) as i64).collect();
        Self::new(group, &v)
    }

    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.elems
    }

    /// `|S|`, counting every listed residue (including 0 if present).
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    /// Numerator of `‖a‖_{S⊥}` over the denominator `p`.
    #[inline]
    pub fn dual_num(&self, a: u64) -> u64 {
        let g = self.group;
        self.elems
            .iter()
            .map(|&xi| g.circle_num(g.mul(a % g.p(), xi)))
            .max()
            .unwrap_or(0)
    }

    /// `‖a‖_{S⊥} = max_ξ ‖aξ/p‖_{R/Z}` as an exact fraction.
    pub fn dual_norm(&self, a: u64) -> Rational {
        Rational::new(self.dual_num(a) as i64, self.group.p() as i64)
    }
}

/// `‖a‖_{S⊥}` for a raw frequency list.
pub fn dual_norm(a: u64, s: &[u64], group: PrimeGroup) -> Result<Rational> {
    Ok(FrequencySet::from_residues(group, s)?.dual_norm(a))
}

/// Word norms `‖a‖_S` of every element, by breadth-first search on the Cayley
/// graph with generators `±S`.
#[derive(Clone, Debug)]
pub struct WordNorms {
    dist: Vec<u32>,
}

impl WordNorms {
    pub fn new(freqs: &FrequencySet) -> Self {
        let g = freqs.group();
        let p = g.order();
        let mut dist = vec![u32::MAX; p];
        let mut queue = VecDeque::with_capacity(p);
        dist[0] = 0;
        queue.push_back(0u64);
        let gens: Vec<u64> = freqs
            .as_slice()
            .iter()
            .filter(|&&s| s != 0)
            .flat_map(|&s| [s, g.neg(s)])
            .collect();
        while let Some(x) = queue.pop_front() {
            let d = dist[x as usize] + 1;
            for &s in &gens {
                let y = g.add(x, s);
                if dist[y as usize] == u32::MAX {
                    dist[y as usize] = d;
                    queue.push_back(y);
                }
            }
        }
        WordNorms { dist }
    }

    #[inline]
    pub fn get(&self, a: u64) -> u32 {
        self.dist[a as usize % self.dist.len()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }
}

/// `‖a‖_S`, the least `Σ|n_s|` with `a = Σ n_s s`.
pub fn word_norm(a: u64, s: &[u64], group: PrimeGroup) -> Result<u32> {
    let freqs = FrequencySet::from_residues(group, s)?;
    Ok(WordNorms::new(&freqs).get(a))
}

/// The (possibly shifted) Bohr set `shift + B(S, ρ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BohrSet {
    freqs: FrequencySet,
    rho: Rational,
    shift: u64,
}

impl BohrSet {
    pub fn new(freqs: FrequencySet, rho: Rational) -> Result<Self> {
        if rho <= Rational::zero() || rho > Rational::one() {
            return Err(Error::invalid("rho", format!("{rho} is not in (0, 1]")));
        }
        Ok(BohrSet {
            freqs,
            rho,
            shift: 0,
        })
    }

    pub fn from_parts(group: PrimeGroup, s: &[i64], rho: Rational) -> Result<Self> {
        Self::new(FrequencySet::new(group, s)?, rho)
    }

    pub fn shifted(mut self, shift: u64) -> Self {
        self.shift = shift % self.group().p();
        self
    }

    /// Same frequencies and shift, new radius.
    pub fn with_rho(&self, rho: Rational) -> Result<Self> {
        Ok(BohrSet::new(self.freqs.clone(), rho)?.shifted(self.shift))
    }

    pub fn group(&self) -> PrimeGroup {
        self.freqs.group()
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn rho(&self) -> Rational {
        self.rho
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    pub fn rank(&self) -> usize {
        self.freqs.len()
    }

    /// Whether `x < ρ` for `x = num/p`.
    #[inline]
    pub(crate) fn below_rho(&self, num: u64) -> bool {
        (num as i128) * (*self.rho.denom() as i128)
            < (*self.rho.numer() as i128) * (self.group().p() as i128)
    }

    /// `a ∈ shift + B(S, ρ)`.
    pub fn contains(&self, a: u64) -> bool {
        let g = self.group();
        self.below_rho(self.freqs.dual_num(g.sub(a % g.p(), self.shift)))
    }

    pub fn check_cap(&self, cap: u64) -> Result<()> {
        let p = self.group().p();
        if p > cap {
            return Err(Error::EnumerationCapExceeded { size: p, cap });
        }
        Ok(())
    }

    /// Members in increasing order, honouring `cap`.
    pub fn members_capped(&self, cap: u64) -> Result<Vec<u64>> {
        self.check_cap(cap)?;
        Ok(self
            .group()
            .elements()
            .filter(|&a| self.contains(a))
            .collect())
    }

    pub fn size(&self) -> Result<usize> {
        Ok(self.members_capped(DEFAULT_ENUM_CAP)?.len())
    }
}

/// Members of `B` under the default enumeration cap.
pub fn bohr_members(b: &BohrSet) -> Result<Vec<u64>> {
    b.members_capped(DEFAULT_ENUM_CAP)
}

#[derive(Serialize, Deserialize)]
struct BohrSetJson {
    p: u64,
    #[serde(rename = "S")]
    s: Vec<u64>,
    #[serde(with = "as_fraction")]
    rho: Rational,
    shift: u64,
}

impl Serialize for BohrSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BohrSetJson {
            p: self.group().p(),
            s: self.freqs.as_slice().to_vec(),
            rho: self.rho,
            shift: self.shift,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BohrSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = BohrSetJson::deserialize(d)?;
        let build = || -> Result<BohrSet> {
            let g = PrimeGroup::new(j.p)?;
            Ok(BohrSet::new(FrequencySet::from_residues(g, &j.s)?, j.rho)?.shifted(j.shift))
        };
        build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(p: u64) -> PrimeGroup {
        PrimeGroup::new(p).unwrap()
    }

    #[test]
    fn dual_norm_examples() {
        assert_eq!(dual_norm(0, &[3, 5], g(11)).unwrap(), Rational::zero());
        assert_eq!(dual_norm(3, &[1], g(11)).unwrap(), Rational::new(3, 11));
        // ‖8/11‖ = 3/11 and ‖12/11‖ = 1/11, computed by hand.
        assert_eq!(dual_norm(4, &[2, 3], g(11)).unwrap(), Rational::new(3, 11));
        assert_eq!(
            dual_norm(4, &[0], g(11)),
            Err(Error::DegenerateFrequencySet)
        );
    }

    #[test]
    fn word_norm_examples() {
        assert_eq!(word_norm(0, &[1], g(7)).unwrap(), 0);
        assert_eq!(word_norm(5, &[1], g(7)).unwrap(), 2);
        assert_eq!(word_norm(1, &[2, 3], g(7)).unwrap(), 2);
        assert_eq!(
            word_norm(1, &[0, 7], g(7)),
            Err(Error::DegenerateFrequencySet)
        );
    }

    #[test]
    fn word_norm_matches_brute_force_representations() {
        let grp = g(13);
        let s = [3u64, 5];
        let wn = WordNorms::new(&FrequencySet::from_residues(grp, &s).unwrap());
        for a in 0..13u64 {
            let mut best = u32::MAX;
            for n1 in -13i64..=13 {
                for n2 in -13i64..=13 {
                    if grp.reduce(3 * n1 + 5 * n2) == a {
                        best = best.min((n1.abs() + n2.abs()) as u32);
                    }
                }
            }
            assert_eq!(wn.get(a), best, "a = {a}");
        }
    }

    #[test]
    fn members_examples() {
        let b = BohrSet::from_parts(g(11), &[1], Rational::new(1, 5)).unwrap();
        assert_eq!(bohr_members(&b).unwrap(), vec![0, 1, 2, 9, 10]);
        let tiny = b.with_rho(Rational::new(1, 22)).unwrap();
        assert_eq!(bohr_members(&tiny).unwrap(), vec![0]);
        let all = b.with_rho(Rational::new(3, 5)).unwrap();
        assert_eq!(bohr_members(&all).unwrap().len(), 11);
        let shifted = b.clone().shifted(5);
        assert_eq!(bohr_members(&shifted).unwrap(), vec![3, 4, 5, 6, 7]);
        assert!(matches!(
            b.members_capped(10),
            Err(Error::EnumerationCapExceeded { size: 11, cap: 10 })
        ));
        assert!(BohrSet::from_parts(g(11), &[1], Rational::zero()).is_err());
        assert!(BohrSet::from_parts(g(11), &[1], Rational::new(3, 2)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let b = BohrSet::from_parts(g(11), &[1, 4], Rational::new(1, 5))
            .unwrap()
            .shifted(3);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"p":11,"S":[1,4],"rho":"1/5","shift":3}"#);
        let back: BohrSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
