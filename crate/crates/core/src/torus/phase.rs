//! Locally linear, quadratic and bilinear R/Z-valued phases on Bohr sets,
//! with exact validators.

use std::collections::HashMap;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bohr::{BohrSet, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::rational::{as_fraction, Phase, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Linear,
    Quadratic,
    Bilinear,
}

/// How a phase is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseRule {
    /// `a ↦ (Σ cᵢ aⁱ)/p`, a global polynomial restricted to the domain.
    Polynomial(Vec<u64>),
    /// `(n, m) ↦ θ n m / p`.
    BilinearForm(u64),
    /// Values on (part of) the domain; missing points are undefined.
    Table(HashMap<u64, Phase>),
    PairTable(HashMap<(u64, u64), Phase>),
}

impl PhaseRule {
    fn is_pair(&self) -> bool {
        matches!(self, PhaseRule::BilinearForm(_) | PhaseRule::PairTable(_))
    }
}

/// An R/Z-valued map on `shift + B(S, ρ)` (or its square, for bilinear phases).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPhase {
    domain: BohrSet,
    arity: Arity,
    rule: PhaseRule,
}

impl LocalPhase {
    pub fn new(domain: BohrSet, arity: Arity, rule: PhaseRule) -> Result<Self> {
        if rule.is_pair() != (arity == Arity::Bilinear) {
            return Err(Error::invalid(
                "rule",
                "bilinear phases need a two-argument rule and vice versa",
            ));
        }
        Ok(LocalPhase {
            domain,
            arity,
            rule,
        })
    }

    /// `a ↦ (Σ cᵢ aⁱ)/p`.
    pub fn polynomial(domain: BohrSet, arity: Arity, coeffs: &[u64]) -> Result<Self> {
        Self::new(domain, arity, PhaseRule::Polynomial(coeffs.to_vec()))
    }

    /// Tabulates `f` on the domain.
    pub fn tabulate(domain: BohrSet, arity: Arity, f: impl Fn(u64) -> Phase) -> Result<Self> {
        let table = domain
            .members_capped(DEFAULT_ENUM_CAP)?
            .into_iter()
            .map(|a| (a, f(a)))
            .collect();
        Self::new(domain, arity, PhaseRule::Table(table))
    }

    pub fn bilinear_form(domain: BohrSet, theta: u64) -> Result<Self> {
        Self::new(domain, Arity::Bilinear, PhaseRule::BilinearForm(theta))
    }

    pub fn tabulate_pairs(domain: BohrSet, f: impl Fn(u64, u64) -> Phase) -> Result<Self> {
        let members = domain.members_capped(DEFAULT_ENUM_CAP)?;
        let mut table = HashMap::with_capacity(members.len() * members.len());
        for &n in &members {
            for &m in &members {
                table.insert((n, m), f(n, m));
            }
        }
        Self::new(domain, Arity::Bilinear, PhaseRule::PairTable(table))
    }

    pub fn domain(&self) -> &BohrSet {
        &self.domain
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn rule(&self) -> &PhaseRule {
        &self.rule
    }

    pub fn group(&self) -> PrimeGroup {
        self.domain.group()
    }

    /// `φ(a)`, or `None` outside the domain.
    pub fn eval(&self, a: u64) -> Option<Phase> {
        let g = self.group();
        let a = a % g.p();
        if !self.domain.contains(a) {
            return None;
        }
        match &self.rule {
            PhaseRule::Polynomial(c) => {
                let mut acc = 0u64;
                for &ci in c.iter().rev() {
                    acc = g.add(g.mul(acc, a), ci % g.p());
                }
                Some(Phase::from_ratio(acc as i64, g.p() as i64))
            }
            PhaseRule::Table(t) => t.get(&a).copied(),
            _ => None,
        }
    }

    /// `φ(n, m)`, or `None` outside the domain.
    pub fn eval2(&self, n: u64, m: u64) -> Option<Phase> {
        let g = self.group();
        let (n, m) = (n % g.p(), m % g.p());
        if !self.domain.contains(n) || !self.domain.contains(m) {
            return None;
        }
        match &self.rule {
            PhaseRule::BilinearForm(t) => Some(Phase::from_ratio(
                g.mul(g.mul(*t, n), m) as i64,
                g.p() as i64,
            )),
            PhaseRule::PairTable(t) => t.get(&(n, m)).copied(),
            _ => None,
        }
    }
}

/// Which defining identity a certificate checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// Vanishing second difference on admissible squares.
    Linear,
    /// Vanishing eight-point alternating sum on admissible cubes.
    Octuple,
    /// `φ(n) − 3φ(n+h) + 3φ(n+2h) − φ(n+3h) = 0`.
    ApIdentity,
    /// Additivity in each slot.
    Bilinear,
}

/// Outcome of a validation: exact maximal defect and the tuples examined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub identity: Identity,
    pub exhaustive: bool,
    pub tuples: u64,
    /// Largest `‖defect‖_{R/Z}`.
    #[serde(with = "as_fraction")]
    pub max_defect: Rational,
    pub pass: bool,
    /// A tuple attaining the maximal defect, when it is non-zero.
    pub witness: Option<Vec<u64>>,
    /// Points where the evaluator was undefined although the domain contains them.
    pub undefined_points: u64,
}

/// Phases as numerators over one common denominator, for fast exact sums.
struct Dense {
    group: PrimeGroup,
    den: i64,
    /// `Some(numerator)` on the domain.
    vals: Vec<Option<i64>>,
    members: Vec<u64>,
    undefined: u64,
}

impl Dense {
    fn unary(phi: &LocalPhase) -> Result<Self> {
        let g = phi.group();
        let members = phi.domain.members_capped(DEFAULT_ENUM_CAP)?;
        let raw: Vec<(u64, Option<Phase>)> = members.iter().map(|&a| (a, phi.eval(a))).collect();
        let den = common_den(raw.iter().filter_map(|x| x.1))?;
        let mut vals = vec![None; g.order()];
        let mut undefined = 0;
        for (a, v) in raw {
            match v {
                Some(v) => vals[a as usize] = Some(scaled(v, den)),
                None => undefined += 1,
            }
        }
        Ok(Dense {
            group: g,
            den,
            vals,
            members,
            undefined,
        })
    }

    #[inline]
    fn at(&self, a: u64) -> Option<i64> {
        self.vals[a as usize]
    }

    fn norm(&self, x: i64) -> Rational {
        Phase::new(Rational::new(x.rem_euclid(self.den), self.den)).norm()
    }
}

fn common_den(vals: impl Iterator<Item = Phase>) -> Result<i64> {
    let mut den = 1i64;
    for v in vals {
        den = den.lcm(v.value().denom());
        if den > 1 << 40 {
            return Err(Error::invalid("phi", "phase denominators too large"));
        }
    }
    Ok(den)
}

fn scaled(v: Phase, den: i64) -> i64 {
    let r = v.value();
    r.numer() * (den / r.denom())
}

struct Tracker {
    max: i64,
    den: i64,
    witness: Option<Vec<u64>>,
    tuples: u64,
}

impl Tracker {
    fn new(den: i64) -> Self {
        Tracker {
            max: 0,
            den,
            witness: None,
            tuples: 0,
        }
    }

    #[inline]
    fn record(&mut self, defect: i64, tuple: impl FnOnce() -> Vec<u64>) {
        self.tuples += 1;
        let r = defect.rem_euclid(self.den);
        let d = r.min(self.den - r);
        if d > self.max {
            self.max = d;
            self.witness = Some(tuple());
        }
    }

    fn finish(self, identity: Identity, exhaustive: bool, undefined: u64) -> Certificate {
        let max_defect = Rational::new(self.max, self.den);
        Certificate {
            identity,
            exhaustive,
            tuples: self.tuples,
            pass: self.max == 0 && undefined == 0,
            max_defect,
            witness: self.witness,
            undefined_points: undefined,
        }
    }
}

/// Random tuples drawn in lieu of exhaustive enumeration.
#[derive(Clone, Copy, Debug)]
pub struct SampleBudget {
    pub draws: usize,
    pub seed: u64,
}

/// Validates the identity matching the declared arity.
pub fn validate_phase(phi: &LocalPhase, budget: Option<SampleBudget>) -> Result<Certificate> {
    let id = match phi.arity {
        Arity::Linear => Identity::Linear,
        Arity::Quadratic => Identity::Octuple,
        Arity::Bilinear => Identity::Bilinear,
    };
    validate_identity(phi, id, budget)
}

/// Validates a specific identity, e.g. the octuple identity on a linear phase.
pub fn validate_identity(
    phi: &LocalPhase,
    id: Identity,
    budget: Option<SampleBudget>,
) -> Result<Certificate> {
    match id {
        Identity::Bilinear => validate_bilinear(phi, budget),
        _ if phi.arity == Arity::Bilinear => Err(Error::invalid(
            "phi",
            "unary identity requested for a bilinear phase",
        )),
        _ => {
            let d = Dense::unary(phi)?;
            Ok(match budget {
                None => exhaustive_unary(&d, id),
                Some(b) => sampled_unary(&d, id, b),
            })
        }
    }
}

/// Validates `φ(n) − 3φ(n+h) + 3φ(n+2h) − φ(n+3h) = 0`.
pub fn validate_ap_identity(phi: &LocalPhase) -> Result<Certificate> {
    validate_identity(phi, Identity::ApIdentity, None)
}

fn exhaustive_unary(d: &Dense, id: Identity) -> Certificate {
    let g = d.group;
    let mut t = Tracker::new(d.den);
    let m = &d.members;
    match id {
        Identity::Linear => {
            for &n in m {
                let Some(f0) = d.at(n) else { continue };
                for (i, &b1) in m.iter().enumerate() {
                    let h1 = g.sub(b1, n);
                    let Some(f1) = d.at(b1) else { continue };
                    for &b2 in &m[i..] {
                        let h2 = g.sub(b2, n);
                        let (Some(f2), Some(f12)) = (d.at(b2), d.at(g.add(b1, h2))) else {
                            continue;
                        };
                        t.record(f12 - f1 - f2 + f0, || vec![n, h1, h2]);
                    }
                }
            }
        }
        Identity::Octuple => {
            for &n in m {
                let Some(f0) = d.at(n) else { continue };
                for (i, &b1) in m.iter().enumerate() {
                    let h1 = g.sub(b1, n);
                    let Some(f1) = d.at(b1) else { continue };
                    for (j, &b2) in m.iter().enumerate().skip(i) {
                        let h2 = g.sub(b2, n);
                        let (Some(f2), Some(f12)) = (d.at(b2), d.at(g.add(b1, h2))) else {
                            continue;
                        };
                        for &b3 in &m[j..] {
                            let h3 = g.sub(b3, n);
                            let Some(f3) = d.at(b3) else { continue };
                            let (Some(f13), Some(f23), Some(f123)) = (
                                d.at(g.add(b1, h3)),
                                d.at(g.add(b2, h3)),
                                d.at(g.add(g.add(b1, h2), h3)),
                            ) else {
                                continue;
                            };
                            let s = f0 - f1 - f2 - f3 + f12 + f13 + f23 - f123;
                            t.record(s, || vec![n, h1, h2, h3]);
                        }
                    }
                }
            }
        }
        Identity::ApIdentity => {
            for &n in m {
                let Some(f0) = d.at(n) else { continue };
                for h in g.elements() {
                    let (Some(f1), Some(f2), Some(f3)) = (
                        d.at(g.add(n, h)),
                        d.at(g.add(n, g.mul(2, h))),
                        d.at(g.add(n, g.mul(3, h))),
                    ) else {
                        continue;
                    };
                    t.record(f0 - 3 * f1 + 3 * f2 - f3, || vec![n, h]);
                }
            }
        }
        Identity::Bilinear => unreachable!(),
    }
    t.finish(id, true, d.undefined)
}

fn sampled_unary(d: &Dense, id: Identity, b: SampleBudget) -> Certificate {
    let g = d.group;
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let mut t = Tracker::new(d.den);
    let m = &d.members;
    if m.is_empty() {
        return t.finish(id, false, d.undefined);
    }
    let pick = |rng: &mut ChaCha8Rng| m[rng.gen_range(0..m.len())];
    for _ in 0..b.draws {
        let n = pick(&mut rng);
        let hs: Vec<u64> = (0..3).map(|_| g.sub(pick(&mut rng), n)).collect();
        let k = match id {
            Identity::Linear => 2,
            Identity::Octuple => 3,
            _ => 1,
        };
        let mut sum = 0i64;
        let mut ok = true;
        if id == Identity::ApIdentity {
            for (j, c) in [1i64, -3, 3, -1].into_iter().enumerate() {
                match d.at(g.add(n, g.mul(j as u64, hs[0]))) {
                    Some(v) => sum += c * v,
                    None => ok = false,
                }
            }
        } else {
            for w in 0..(1usize << k) {
                let x = (0..k).fold(n, |x, i| if w >> i & 1 == 1 { g.add(x, hs[i]) } else { x });
                match d.at(x) {
                    Some(v) => {
                        let sign = if (k - w.count_ones() as usize) % 2 == 0 {
                            1
                        } else {
                            -1
                        };
                        sum += sign * v;
                    }
                    None => ok = false,
                }
            }
        }
        if ok {
            t.record(sum, || {
                let mut v = vec![n];
                v.extend_from_slice(&hs[..k]);
                v
            });
        }
    }
    t.finish(id, false, d.undefined)
}

fn validate_bilinear(phi: &LocalPhase, budget: Option<SampleBudget>) -> Result<Certificate> {
    if phi.arity != Arity::Bilinear {
        return Err(Error::invalid(
            "phi",
            "bilinear identity needs a bilinear phase",
        ));
    }
    let g = phi.group();
    let members = phi.domain.members_capped(DEFAULT_ENUM_CAP)?;
    let n = members.len();
    let mut index = vec![usize::MAX; g.order()];
    for (i, &a) in members.iter().enumerate() {
        index[a as usize] = i;
    }
    let mut raw = Vec::with_capacity(n * n);
    let mut undefined = 0u64;
    for &a in &members {
        for &b in &members {
            let v = phi.eval2(a, b);
            if v.is_none() {
                undefined += 1;
            }
            raw.push(v);
        }
    }
    let den = common_den(raw.iter().flatten().copied())?;
    let vals: Vec<Option<i64>> = raw.into_iter().map(|v| v.map(|v| scaled(v, den))).collect();
    let at = |a: u64, b: u64| -> Option<i64> {
        let (i, j) = (index[a as usize], index[b as usize]);
        if i == usize::MAX || j == usize::MAX {
            None
        } else {
            vals[i * n + j]
        }
    };
    let mut t = Tracker::new(den);
    let check = |h1: u64, h1p: u64, h2: u64, t: &mut Tracker| {
        let s = g.add(h1, h1p);
        if let (Some(a), Some(b), Some(c)) = (at(s, h2), at(h1, h2), at(h1p, h2)) {
            t.record(a - b - c, || vec![0, h1, h1p, h2]);
        }
        if let (Some(a), Some(b), Some(c)) = (at(h2, s), at(h2, h1), at(h2, h1p)) {
            t.record(a - b - c, || vec![1, h2, h1, h1p]);
        }
    };
    let exhaustive = budget.is_none();
    match budget {
        None => {
            for (i, &h1) in members.iter().enumerate() {
                for &h1p in &members[i..] {
                    for &h2 in &members {
                        check(h1, h1p, h2, &mut t);
                    }
                }
            }
        }
        Some(b) => {
            let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
            for _ in 0..b.draws {
                let pick = |rng: &mut ChaCha8Rng| members[rng.gen_range(0..n)];
                let (h1, h1p, h2) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
                check(h1, h1p, h2, &mut t);
            }
        }
    }
    Ok(t.finish(Identity::Bilinear, exhaustive, undefined))
}

/// `∂²Ξ(h₁,h₂)` with its spread over all admissible base points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondDifference {
    pub value: Phase,
    pub base_points: u64,
    #[serde(with = "as_fraction")]
    pub max_deviation: Rational,
}

/// `Ξ(a+h₁+h₂) − Ξ(a+h₁) − Ξ(a+h₂) + Ξ(a)`, checked over every admissible `a`.
pub fn second_difference(xi: &LocalPhase, h1: u64, h2: u64) -> Result<SecondDifference> {
    if xi.arity == Arity::Bilinear {
        return Err(Error::invalid(
            "xi",
            "second difference of a bilinear phase",
        ));
    }
    let dom = xi.domain();
    let half = BohrSet::new(dom.freqs().clone(), dom.rho() / 2)?;
    for (name, h) in [("h1", h1), ("h2", h2)] {
        if !half.contains(h) {
            return Err(Error::invalid(name, "not in the half-radius Bohr set"));
        }
    }
    let d = Dense::unary(xi)?;
    let g = d.group;
    let mut first: Option<i64> = None;
    let mut worst = 0i64;
    let mut count = 0u64;
    // Start from the centre so the reported value is the canonical one.
    let centre = dom.shift();
    let order = std::iter::once(centre).chain(d.members.iter().copied().filter(|&a| a != centre));
    for a in order {
        let (Some(f0), Some(f1), Some(f2), Some(f12)) = (
            d.at(a),
            d.at(g.add(a, h1)),
            d.at(g.add(a, h2)),
            d.at(g.add(g.add(a, h1), h2)),
        ) else {
            continue;
        };
        let v = (f12 - f1 - f2 + f0).rem_euclid(d.den);
        count += 1;
        match first {
            None => first = Some(v),
            Some(v0) => {
                let r = (v - v0).rem_euclid(d.den);
                worst = worst.max(r.min(d.den - r));
            }
        }
    }
    let v = first.ok_or(Error::NoAdmissibleBasePoint)?;
    Ok(SecondDifference {
        value: Phase::new(Rational::new(v, d.den)),
        base_points: count,
        max_deviation: d.norm(worst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn domain(p: u64, rho: Rational) -> BohrSet {
        BohrSet::from_parts(PrimeGroup::new(p).unwrap(), &[1], rho).unwrap()
    }

    #[test]
    fn global_quadratic_passes_octuple_and_ap() {
        let phi = LocalPhase::polynomial(
            domain(31, Rational::new(3, 10)),
            Arity::Quadratic,
            &[4, 7, 5],
        )
        .unwrap();
        let c = validate_phase(&phi, None).unwrap();
        assert!(c.pass && c.exhaustive && c.tuples > 0);
        assert!(validate_ap_identity(&phi).unwrap().pass);
    }

    #[test]
    fn cubic_fails_with_exact_defect() {
        let phi = LocalPhase::polynomial(
            domain(31, Rational::new(3, 10)),
            Arity::Quadratic,
            &[0, 0, 0, 1],
        )
        .unwrap();
        let c = validate_phase(&phi, None).unwrap();
        assert!(!c.pass);
        assert!(c.max_defect > Rational::zero());
        // Third difference of a³ is 6·h₁h₂h₃; recompute at the witness.
        let w = c.witness.unwrap();
        let s = 6 * w[1] * w[2] * w[3] % 31;
        assert_eq!(
            c.max_defect,
            Phase::from_ratio(s as i64, 31).norm(),
            "witness {w:?}"
        );
    }

    #[test]
    fn linear_is_quadratic() {
        let phi = LocalPhase::polynomial(domain(31, Rational::new(1, 4)), Arity::Linear, &[3, 11])
            .unwrap();
        assert!(validate_phase(&phi, None).unwrap().pass);
        assert!(
            validate_identity(&phi, Identity::Octuple, None)
                .unwrap()
                .pass
        );
        let quad =
            LocalPhase::polynomial(domain(31, Rational::new(1, 4)), Arity::Linear, &[0, 0, 1])
                .unwrap();
        assert!(!validate_phase(&quad, None).unwrap().pass);
    }

    #[test]
    fn sampled_validation_agrees() {
        let phi = LocalPhase::polynomial(
            domain(101, Rational::new(1, 3)),
            Arity::Quadratic,
            &[0, 2, 9],
        )
        .unwrap();
        let c = validate_phase(
            &phi,
            Some(SampleBudget {
                draws: 2000,
                seed: 1,
            }),
        )
        .unwrap();
        assert!(c.pass && !c.exhaustive);
        let cubic = LocalPhase::polynomial(
            domain(101, Rational::new(1, 3)),
            Arity::Quadratic,
            &[0, 0, 0, 1],
        )
        .unwrap();
        let c = validate_phase(
            &cubic,
            Some(SampleBudget {
                draws: 2000,
                seed: 1,
            }),
        )
        .unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn bilinear_validation() {
        let d = domain(31, Rational::new(1, 5));
        assert!(
            validate_phase(&LocalPhase::bilinear_form(d.clone(), 7).unwrap(), None)
                .unwrap()
                .pass
        );
        let bad =
            LocalPhase::tabulate_pairs(d, |n, m| Phase::from_ratio(((n * n * m) % 31) as i64, 31))
                .unwrap();
        assert!(!validate_phase(&bad, None).unwrap().pass);
    }

    #[test]
    fn second_difference_of_quadratic() {
        let xi = LocalPhase::polynomial(
            domain(31, Rational::new(2, 5)).shifted(6),
            Arity::Quadratic,
            &[0, 0, 5],
        )
        .unwrap();
        let sd = second_difference(&xi, 2, 30).unwrap();
        assert_eq!(sd.value, Phase::from_ratio(2 * 5 * 2 * 30, 31));
        assert!(sd.max_deviation.is_zero());
        assert!(sd.base_points > 1);
        let lin = LocalPhase::polynomial(domain(31, Rational::new(2, 5)), Arity::Linear, &[1, 3])
            .unwrap();
        assert!(second_difference(&lin, 1, 2).unwrap().value.is_zero());
        assert!(second_difference(&lin, 10, 2).is_err());
    }

    #[test]
    fn table_with_holes_fails() {
        let d = domain(31, Rational::new(1, 5));
        let mut table = HashMap::new();
        table.insert(0u64, Phase::zero());
        let phi = LocalPhase::new(d, Arity::Linear, PhaseRule::Table(table)).unwrap();
        let c = validate_phase(&phi, None).unwrap();
        assert!(!c.pass);
        assert!(c.undefined_points > 0);
    }
}
