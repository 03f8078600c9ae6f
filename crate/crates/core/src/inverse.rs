//! Inverse theory on Bohr sets: the local U² inverse algorithm, linearisation of
//! locally almost linear phases, rationalisation of bilinear phases, and the
//! derivative frequency map with its additive-quadruple audit.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bohr::{BohrSet, FrequencySet, WordNorms};
use crate::error::{Error, Result};
use crate::gowers::{u2_local, u3_local, JointSampler, Mode};
use crate::group::PrimeGroup;
use crate::pmf::{regular_pmf, AliasTable, FloatPmf};
use crate::rational::{as_fraction, rational_to_f64, to_big, Phase, Rational};
use crate::report::as_decimal;
use crate::spectral::{character_table, dft, float_pmf_fourier, ForwardFft, GroupFunction};
use crate::torus::{Arity, LocalPhase};

/// Default constant `C` in the separation requirement `ρ₀ > C|S|ρ₁/η²`.
pub const DEFAULT_SEPARATION: f64 = 0.25;

/// Correlations within this distance of the maximum count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// How the weighted correlation is maximised over `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One length-`p` transform per atom of the outer distribution.
    Fft,
    /// Direct evaluation of every `ξ`.
    Exhaustive,
}

#[derive(Clone, Copy, Debug)]
pub struct U2Options {
    pub separation: f64,
    pub method: Method,
    /// Evaluation mode of the U² precondition.
    pub mode: Mode,
}

impl Default for U2Options {
    fn default() -> Self {
        U2Options {
            separation: DEFAULT_SEPARATION,
            method: Method::Fft,
            mode: Mode::default(),
        }
    }
}

/// The two regular laws of the local U² theorem.
#[derive(Clone, Debug)]
pub struct U2Setup {
    freqs: FrequencySet,
    rho0: Rational,
    rho1: Rational,
    p0: FloatPmf,
    p1: FloatPmf,
}

impl U2Setup {
    pub fn new(freqs: &FrequencySet, rho0: Rational, rho1: Rational) -> Result<Self> {
        let law = |rho| -> Result<FloatPmf> {
            Ok(regular_pmf(&BohrSet::new(freqs.clone(), rho)?)?.to_float())
        };
        Ok(U2Setup {
            freqs: freqs.clone(),
            rho0,
            rho1,
            p0: law(rho0)?,
            p1: law(rho1)?,
        })
    }

    pub fn group(&self) -> PrimeGroup {
        self.freqs.group()
    }

    pub fn radii(&self) -> (Rational, Rational) {
        (self.rho0, self.rho1)
    }

    pub fn outer(&self) -> &FloatPmf {
        &self.p0
    }

    pub fn inner(&self) -> &FloatPmf {
        &self.p1
    }

    /// Slots `[h₀, h₁]` for [`u2_local`].
    pub fn sampler(&self) -> JointSampler {
        JointSampler::independent(vec![self.p0.clone(), self.p1.clone()])
            .expect("two slots over one group")
    }

    /// `Σ_{n₀} P₀(n₀) |Σ_{n₁} P₁(n₁) f(n₀+n₁) e_p(−ξn₁)|²` at one `ξ`.
    pub fn correlation(&self, f: &[Complex64], xi: u64) -> f64 {
        let g = self.group();
        let chars = character_table(g.p());
        let phases: Vec<(usize, f64, Complex64)> = self
            .p1
            .atoms()
            .iter()
            .map(|&(n1, w)| (n1 as usize, w, chars[g.neg(g.mul(xi, n1)) as usize]))
            .collect();
        self.p0
            .atoms()
            .iter()
            .map(|&(n0, w0)| {
                let inner: Complex64 = phases
                    .iter()
                    .map(|&(n1, w1, e)| f[g.add(n0, n1 as u64) as usize] * e * w1)
                    .sum();
                w0 * inner.norm_sqr()
            })
            .sum()
    }

    /// The correlation at every `ξ`, by one transform per outer atom.
    pub fn correlations_fft(&self, f: &[Complex64]) -> Vec<f64> {
        let g = self.group();
        let n = g.order();
        let atoms = self.p0.atoms();
        let partial: Vec<Vec<f64>> = atoms
            .par_chunks(32)
            .map(|chunk| {
                let mut fft = ForwardFft::new(n);
                let mut buf = vec![Complex64::zero(); n];
                let mut acc = vec![0.0; n];
                for &(n0, w0) in chunk {
                    buf.iter_mut().for_each(|b| *b = Complex64::zero());
                    for &(n1, w1) in self.p1.atoms() {
                        buf[n1 as usize] = f[g.add(n0, n1) as usize] * w1;
                    }
                    fft.process(&mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += w0 * b.norm_sqr();
                    }
                }
                acc
            })
            .collect();
        // Chunks are merged in order so the sum does not depend on the pool size.
        let mut out = vec![0.0; n];
        for part in partial {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }

    /// The correlation at every `ξ`, by direct evaluation.
    pub fn correlations_exhaustive(&self, f: &[Complex64]) -> Vec<f64> {
        let g = self.group();
        g.elements()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&xi| self.correlation(f, xi))
            .collect()
    }

    pub fn correlations(&self, f: &[Complex64], method: Method) -> Vec<f64> {
        match method {
            Method::Fft => self.correlations_fft(f),
            Method::Exhaustive => self.correlations_exhaustive(f),
        }
    }

    /// `p³ Σ_{ξ'} |p̂₁(ξ')|² |f̂₀(ξ+ξ')|²` with `f₀ = f·√P₀`.
    pub fn spectral_objective(&self, f: &[Complex64], xi: u64) -> f64 {
        let g = self.group();
        let dense0 = self.p0.dense();
        let f0 = GroupFunction::from_fn(g, |n| f[n as usize] * dense0[n as usize].sqrt());
        let f0_hat = dft(&f0);
        let p = g.p() as f64;
        g.elements()
            .map(|xp| {
                // p̂₁(ξ') = (1/p) Σ P₁(n) e_p(−ξ'n).
                let p1_hat = float_pmf_fourier(&self.p1, g.neg(xp)) / p;
                p1_hat.norm_sqr() * f0_hat.at(g.add(xi, xp)).norm_sqr()
            })
            .sum::<f64>()
            * p.powi(3)
    }
}

/// Smallest `ξ` whose value is within [`TIE_TOLERANCE`] of the maximum.
fn argmax(values: &[f64]) -> (u64, f64) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i = values
        .iter()
        .position(|&v| v >= max - TIE_TOLERANCE)
        .unwrap_or(0);
    (i as u64, values[i])
}

/// A frequency correlating with `f` on the Bohr geometry.
#[derive(Clone, Debug, Serialize)]
pub struct U2Witness {
    pub p: u64,
    #[serde(rename = "S")]
    pub s: Vec<u64>,
    #[serde(with = "as_fraction")]
    pub rho0: Rational,
    #[serde(with = "as_fraction")]
    pub rho1: Rational,
    #[serde(with = "as_decimal")]
    pub eta: f64,
    pub xi: u64,
    #[serde(with = "as_decimal")]
    pub correlation: f64,
    pub method: Method,
    /// The U² average that was checked against `η`.
    #[serde(with = "as_decimal")]
    pub measured_u2: f64,
    /// The Plancherel-side objective at `ξ`.
    #[serde(with = "as_decimal")]
    pub spectral_objective: f64,
}

impl U2Witness {
    /// Recomputes the stored correlation from scratch.
    pub fn reevaluate(&self, f: &GroupFunction) -> Result<f64> {
        let g = PrimeGroup::new(self.p)?;
        let freqs = FrequencySet::from_residues(g, &self.s)?;
        let setup = U2Setup::new(&freqs, self.rho0, self.rho1)?;
        Ok(setup.correlation(f.values(), self.xi))
    }
}

fn check_radii(
    freqs: &FrequencySet,
    rho0: Rational,
    rho1: Rational,
    eta: f64,
    c: f64,
) -> Result<()> {
    let half = Rational::new(1, 2);
    if !(Rational::zero() < rho1 && rho1 < rho0 && rho0 < half) {
        return Err(Error::invalid("rho", "need 0 < rho1 < rho0 < 1/2"));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::invalid("eta", "need 0 < eta < 1/2"));
    }
    let (r0, r1) = (rational_to_f64(&rho0), rational_to_f64(&rho1));
    let need = c * freqs.len() as f64 * r1 / (eta * eta);
    if r0 <= need {
        return Err(Error::RadiusSeparationViolated(format!(
            "rho0 = {r0} must exceed C|S|rho1/eta^2 = {need} (C = {c})"
        )));
    }
    Ok(())
}

fn check_group(f: &GroupFunction, freqs: &FrequencySet) -> Result<()> {
    if f.group() != freqs.group() {
        return Err(Error::GroupMismatch {
            left: freqs.group().p(),
            right: f.group().p(),
        });
    }
    if !f.is_one_bounded() {
        return Err(Error::invalid("f", "function must be 1-bounded"));
    }
    Ok(())
}

/// Finds `ξ` with `Σ P(n₀)|E f(n₀+n₁)e_p(−ξn₁)|² ≥ η/2`, after checking the
/// radius separation and the U² lower bound.
pub fn inverse_u2_local(
    f: &GroupFunction,
    freqs: &FrequencySet,
    rho0: Rational,
    rho1: Rational,
    eta: f64,
    opts: &U2Options,
) -> Result<U2Witness> {
    check_group(f, freqs)?;
    check_radii(freqs, rho0, rho1, eta, opts.separation)?;
    let setup = U2Setup::new(freqs, rho0, rho1)?;
    let measured = u2_local(f, &setup.sampler(), opts.mode)?.value;
    if measured < eta {
        return Err(Error::InsufficientU2 { measured, eta });
    }
    let corr = setup.correlations(f.values(), opts.method);
    let (xi, correlation) = argmax(&corr);
    Ok(U2Witness {
        p: freqs.group().p(),
        s: freqs.as_slice().to_vec(),
        rho0,
        rho1,
        eta,
        xi,
        correlation,
        method: opts.method,
        measured_u2: measured,
        spectral_objective: setup.spectral_objective(f.values(), xi),
    })
}

/// A linear frequency fitted to a locally almost linear phase.
#[derive(Clone, Debug, Serialize)]
pub struct Linearization {
    pub xi: u64,
    /// `max_h ‖φ(n₀+h)−φ(n₀)−ξh/p‖ · ρ / (A^{1/2}|S|⁴‖h‖_{S⊥})`.
    #[serde(with = "as_decimal")]
    pub defect_ratio: f64,
    /// `max_h ‖φ(n₀+h)−φ(n₀)−ξh/p‖`.
    #[serde(with = "as_fraction")]
    pub max_defect: Rational,
    /// Largest `‖∂²φ(h,k)‖ ρ² / (A‖h‖‖k‖)` seen while validating the hypothesis.
    #[serde(with = "as_decimal")]
    pub hypothesis_ratio: f64,
    /// The frequency from the U² inverse step, when its preconditions held.
    pub u2_frequency: Option<u64>,
    pub candidates: Vec<u64>,
}

const LINEARIZE_CANDIDATES: usize = 8;

fn phase_at(phi: &LocalPhase, a: u64) -> Result<Phase> {
    phi.eval(a)
        .ok_or_else(|| Error::invalid("phi", format!("phase undefined at {a} inside its domain")))
}

/// `max_h ‖φ(n₀+h) − φ(n₀) − ξh/p‖ · ρ/‖h‖_{S⊥}` and the plain maximum.
fn linear_defect(phi: &LocalPhase, members: &[u64], xi: u64) -> Result<(f64, Rational)> {
    let b = phi.domain();
    let g = b.group();
    let n0 = b.shift();
    let base = phase_at(phi, n0)?;
    let rho = rational_to_f64(&b.rho());
    let (mut ratio, mut worst) = (0.0f64, Rational::zero());
    for &h in members {
        if h == 0 {
            continue;
        }
        let lin = Phase::from_ratio(g.mul(xi, h) as i64, g.p() as i64);
        let d = (phase_at(phi, g.add(n0, h))? - base - lin).norm();
        if d > worst {
            worst = d;
        }
        let dual = b.freqs().dual_num(h) as f64 / g.p() as f64;
        ratio = ratio.max(rational_to_f64(&d) * rho / dual);
    }
    Ok((ratio, worst))
}

/// Fits `ξ` to a phase obeying `‖∂²φ(h,k)‖ ≤ A‖h‖‖k‖/ρ²` on the half-radius set.
pub fn linearize_local(phi: &LocalPhase, a: Rational) -> Result<Linearization> {
    if phi.arity() == Arity::Bilinear {
        return Err(Error::invalid("phi", "expected a one-variable phase"));
    }
    if a < Rational::from_integer(1) {
        return Err(Error::invalid("A", "need A >= 1"));
    }
    let b = phi.domain();
    let g = b.group();
    let freqs = b.freqs();
    let n0 = b.shift();
    let rho = b.rho();
    let base = phase_at(phi, n0)?;

    // Exact check of the almost-linearity hypothesis on B(S, ρ/2).
    let half =
        BohrSet::new(freqs.clone(), rho / 2)?.members_capped(crate::bohr::DEFAULT_ENUM_CAP)?;
    let p = BigInt::from(g.p());
    let rho_big = to_big(&rho);
    let a_big = to_big(&a);
    let scale = &a_big / (&rho_big * &rho_big) / BigRational::from_integer(&p * &p);
    let mut hypothesis_ratio = 0.0f64;
    for (i, &h) in half.iter().enumerate() {
        let ph = phase_at(phi, g.add(n0, h))?;
        for &k in &half[i..] {
            let pk = phase_at(phi, g.add(n0, k))?;
            let phk = phase_at(phi, g.add(n0, g.add(h, k)))?;
            let lhs = to_big(&(phk - ph - pk + base).norm());
            let rhs = &scale
                * BigRational::from_integer(BigInt::from(freqs.dual_num(h) * freqs.dual_num(k)));
            if lhs > rhs {
                return Err(Error::AlmostLinearityViolated {
                    h,
                    k,
                    lhs: lhs.to_f64().unwrap_or(f64::NAN),
                    rhs: rhs.to_f64().unwrap_or(f64::NAN),
                });
            }
            if !rhs.is_zero() {
                hypothesis_ratio = hypothesis_ratio.max((lhs / rhs).to_f64().unwrap_or(0.0));
            }
        }
    }

    // f(x) = 1_{B(S,ρ)}(x) e(φ(n₀+x) − φ(n₀)).
    let members = b
        .clone()
        .shifted(0)
        .members_capped(crate::bohr::DEFAULT_ENUM_CAP)?;
    let mut vals = vec![Complex64::zero(); g.order()];
    for &h in &members {
        let t = (phase_at(phi, g.add(n0, h))? - base).to_f64();
        vals[h as usize] = Complex64::from_polar(1.0, std::f64::consts::TAU * t);
    }
    let f = GroupFunction::new(g, vals)?.with_bound(1.0);

    let rho0 = rho / 4;
    let eta = 0.45;
    let c = DEFAULT_SEPARATION;
    let rho1 = Rational::approximate_float(
        rational_to_f64(&rho0) * eta * eta / (2.0 * c * freqs.len() as f64),
    )
    .unwrap_or_else(Rational::zero);
    let mut candidates = Vec::new();
    let mut u2_frequency = None;
    if rho1 > Rational::zero() {
        if let Ok(w) = inverse_u2_local(&f, freqs, rho0, rho1, eta, &U2Options::default()) {
            u2_frequency = Some(w.xi);
            candidates.push(w.xi);
        }
    }
    // Phase comparison: the largest |E e(φ(n₀+n₁) − φ(n₀) − ξn₁/p)| with n₁
    // regular on the half-radius set.
    let law = regular_pmf(&BohrSet::new(freqs.clone(), rho / 2)?)?.to_float();
    let mut dense = vec![Complex64::zero(); g.order()];
    for &(h, w) in law.atoms() {
        dense[h as usize] = f.at(h) * w;
    }
    let spectrum = dft(&GroupFunction::new(g, dense)?);
    let mut order: Vec<(u64, f64)> = spectrum
        .coefficients()
        .iter()
        .enumerate()
        .map(|(x, c)| (x as u64, c.norm()))
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    for (x, _) in order.into_iter().take(LINEARIZE_CANDIDATES) {
        if !candidates.contains(&x) {
            candidates.push(x);
        }
    }

    let norm = rational_to_f64(&a).sqrt() * (freqs.len() as f64).powi(4);
    let mut best: Option<(u64, f64, Rational)> = None;
    for &x in &candidates {
        let (r, d) = linear_defect(phi, &members, x)?;
        let r = r / norm;
        let better = match &best {
            None => true,
            Some((bx, br, _)) => r < *br || (r == *br && x < *bx),
        };
        if better {
            best = Some((x, r, d));
        }
    }
    let (xi, defect_ratio, max_defect) = best.expect("at least one candidate");
    Ok(Linearization {
        xi,
        defect_ratio,
        max_defect,
        hypothesis_ratio,
        u2_frequency,
        candidates,
    })
}

/// The defect ratio of a given `ξ`, for comparison with [`linearize_local`].
pub fn linearization_defect(phi: &LocalPhase, a: Rational, xi: u64) -> Result<f64> {
    let b = phi.domain();
    let members = b
        .clone()
        .shifted(0)
        .members_capped(crate::bohr::DEFAULT_ENUM_CAP)?;
    let norm = rational_to_f64(&a).sqrt() * (b.rank() as f64).powi(4);
    Ok(linear_defect(phi, &members, xi)?.0 / norm)
}

/// Parameters of [`rationalize_bilinear`].
#[derive(Clone, Copy, Debug)]
pub struct RationalizeParams {
    /// Radius of the regular laws of `n` and `m`.
    pub rho: Rational,
    pub delta: f64,
    pub kmax: u64,
    pub threshold: f64,
    /// Toy value of the constant governing the shrunken radius.
    pub c1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Rationalization {
    pub k: u64,
    #[serde(with = "as_decimal")]
    pub exponential_sum: f64,
    #[serde(with = "as_decimal")]
    pub shrunken_radius: f64,
    /// `sup ‖kφ(n,m)‖ ρ² / (‖n‖_S ‖m‖_S)` over the shrunken ball at the returned `k`.
    #[serde(with = "as_decimal")]
    pub achieved: f64,
    pub ball_size: usize,
}

/// Smallest `k ≤ kmax` whose multiple `kφ` is small on the shrunken ball.
pub fn rationalize_bilinear(
    phi: &LocalPhase,
    lambda: Option<&LocalPhase>,
    mu: Option<&LocalPhase>,
    params: &RationalizeParams,
) -> Result<Rationalization> {
    if phi.arity() != Arity::Bilinear {
        return Err(Error::invalid("phi", "expected a bilinear phase"));
    }
    if !(params.delta > 0.0 && params.delta <= 0.5) {
        return Err(Error::invalid("delta", "need 0 < delta <= 1/2"));
    }
    if params.kmax == 0 {
        return Err(Error::invalid("kmax", "need kmax >= 1"));
    }
    let freqs = phi.domain().freqs().clone();
    let law = regular_pmf(&BohrSet::new(freqs.clone(), params.rho)?)?.to_float();
    let lin = |l: Option<&LocalPhase>, x: u64| -> Result<f64> {
        match l {
            None => Ok(0.0),
            Some(l) => Ok(phase_at(l, x)?.to_f64()),
        }
    };
    let mut sum = Complex64::zero();
    for &(n, wn) in law.atoms() {
        let ln = lin(lambda, n)?;
        for &(m, wm) in law.atoms() {
            let v = phi
                .eval2(n, m)
                .ok_or_else(|| Error::invalid("phi", format!("phase undefined at ({n}, {m})")))?;
            let t = v.to_f64() + ln + lin(mu, m)?;
            sum += Complex64::from_polar(wn * wm, std::f64::consts::TAU * t);
        }
    }
    let exponential_sum = sum.norm();
    if exponential_sum < params.delta {
        return Err(Error::ExponentialSumTooSmall {
            measured: exponential_sum,
            delta: params.delta,
        });
    }
    let d = freqs.len() as f64;
    let rho = rational_to_f64(&params.rho);
    let radius = params.delta.powf(params.c1) * rho / (params.c1 * d).powf(3.0 * d);
    let cut = Rational::approximate_float(radius.min(1.0)).unwrap_or_else(Rational::zero);
    let ball: Vec<u64> = if cut > Rational::zero() {
        BohrSet::new(freqs.clone(), cut)?
            .members_capped(crate::bohr::DEFAULT_ENUM_CAP)?
            .into_iter()
            .filter(|&x| x != 0)
            .collect()
    } else {
        Vec::new()
    };
    let words = WordNorms::new(&freqs);
    let pairs: Vec<(Phase, f64)> = ball
        .iter()
        .flat_map(|&n| ball.iter().map(move |&m| (n, m)))
        .map(|(n, m)| {
            let v = phi
                .eval2(n, m)
                .ok_or_else(|| Error::invalid("phi", format!("phase undefined at ({n}, {m})")))?;
            let w = words.get(n) as f64 * words.get(m) as f64;
            Ok((v, rho * rho / w))
        })
        .collect::<Result<_>>()?;
    for k in 1..=params.kmax {
        let achieved = pairs
            .iter()
            .map(|(v, s)| rational_to_f64(&(*v * k as i64).norm()) * s)
            .fold(0.0f64, f64::max);
        if achieved <= params.threshold {
            return Ok(Rationalization {
                k,
                exponential_sum,
                shrunken_radius: radius,
                achieved,
                ball_size: ball.len() + 1,
            });
        }
    }
    Err(Error::NoSmallMultiple { kmax: params.kmax })
}

/// Options of [`derivative_frequency_map`].
#[derive(Clone, Copy, Debug)]
pub struct MapOptions {
    /// Each radius must be at most this multiple of the previous one.
    pub separation: f64,
    pub method: Method,
    pub mode: Mode,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            separation: 0.5,
            method: Method::Fft,
            mode: Mode::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyEntry {
    pub n2: u64,
    pub xi: u64,
    #[serde(with = "as_decimal")]
    pub u2: f64,
    #[serde(with = "as_decimal")]
    pub correlation: f64,
}

/// `Ω` and `ξ: Ω → Z/pZ` for the derivatives `f(·+n₂) conj f`.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyMap {
    pub p: u64,
    #[serde(rename = "S")]
    pub s: Vec<u64>,
    #[serde(with = "as_fraction")]
    pub rho0: Rational,
    #[serde(with = "as_fraction")]
    pub rho1: Rational,
    #[serde(with = "as_fraction")]
    pub rho2: Rational,
    #[serde(with = "as_decimal")]
    pub eta: f64,
    #[serde(with = "as_decimal")]
    pub measured_u3: f64,
    pub omega: Vec<u64>,
    pub entries: Vec<FrequencyEntry>,
    /// `P(h₂ − h₂' ∈ Ω)`.
    #[serde(with = "as_decimal")]
    pub omega_mass: f64,
    /// Derivatives whose U² average reached `η/4` but whose best correlation
    /// fell below `η/8`.
    pub inverse_failures: Vec<u64>,
}

impl FrequencyMap {
    /// `ξ(n₂)`, zero off `Ω`.
    pub fn xi(&self, n2: u64) -> u64 {
        match self.omega.binary_search(&n2) {
            Ok(i) => self.entries[i].xi,
            Err(_) => 0,
        }
    }

    pub fn contains(&self, n2: u64) -> bool {
        self.omega.binary_search(&n2).is_ok()
    }

    pub fn group(&self) -> PrimeGroup {
        PrimeGroup::new(self.p).expect("prime stored at construction")
    }

    /// A map with prescribed values, for audits of arbitrary `ξ`.
    pub fn from_values(
        freqs: &FrequencySet,
        rho2: Rational,
        values: impl IntoIterator<Item = (u64, u64)>,
    ) -> Self {
        let mut entries: Vec<FrequencyEntry> = values
            .into_iter()
            .map(|(n2, xi)| FrequencyEntry {
                n2,
                xi,
                u2: f64::NAN,
                correlation: f64::NAN,
            })
            .collect();
        entries.sort_by_key(|e| e.n2);
        entries.dedup_by_key(|e| e.n2);
        FrequencyMap {
            p: freqs.group().p(),
            s: freqs.as_slice().to_vec(),
            rho0: rho2,
            rho1: rho2,
            rho2,
            eta: f64::NAN,
            measured_u3: f64::NAN,
            omega: entries.iter().map(|e| e.n2).collect(),
            entries,
            omega_mass: f64::NAN,
            inverse_failures: Vec::new(),
        }
    }
}

/// `f_{n₂}(n) = f(n+n₂) conj f(n)`.
fn derivative(f: &GroupFunction, n2: u64) -> GroupFunction {
    let g = f.group();
    GroupFunction::from_fn(g, |n| f.at(g.add(n, n2)) * f.at(n).conj()).with_bound(1.0)
}

/// `(n₂, mass, U², witness)` for one derivative.
type MapRow = (u64, f64, f64, Option<(u64, f64)>);

/// Assigns a frequency to each popular derivative of `f`.
pub fn derivative_frequency_map(
    f: &GroupFunction,
    freqs: &FrequencySet,
    radii: [Rational; 3],
    eta: f64,
    opts: &MapOptions,
) -> Result<FrequencyMap> {
    check_group(f, freqs)?;
    let [rho0, rho1, rho2] = radii;
    if !(Rational::zero() < rho2 && rho2 < rho1 && rho1 < rho0 && rho0 < Rational::new(1, 2)) {
        return Err(Error::invalid("rho", "need 0 < rho2 < rho1 < rho0 < 1/2"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", "need 0 < eta <= 1"));
    }
    for (hi, lo) in [(rho0, rho1), (rho1, rho2)] {
        let (h, l) = (rational_to_f64(&hi), rational_to_f64(&lo));
        if l > opts.separation * h {
            return Err(Error::RadiusSeparationViolated(format!(
                "radius {l} exceeds {} times the previous radius {h}",
                opts.separation
            )));
        }
    }
    let setup = U2Setup::new(freqs, rho0, rho1)?;
    let p2 = regular_pmf(&BohrSet::new(freqs.clone(), rho2)?)?.to_float();
    let j3 = JointSampler::independent(vec![setup.p0.clone(), setup.p1.clone(), p2.clone()])?;
    let measured_u3 = u3_local(f, &j3, opts.mode)?.value;
    if measured_u3 < eta {
        return Err(Error::InsufficientU3 {
            measured: measured_u3,
            eta,
        });
    }
    let diff = p2.difference();
    let j2 = setup.sampler();
    let results: Vec<Result<MapRow>> = diff
        .atoms()
        .par_iter()
        .map(|&(n2, mass)| {
            let fn2 = derivative(f, n2);
            let u2 = u2_local(&fn2, &j2, opts.mode)?.value;
            if u2 < eta / 4.0 {
                return Ok((n2, mass, u2, None));
            }
            let corr = setup.correlations(fn2.values(), opts.method);
            Ok((n2, mass, u2, Some(argmax(&corr))))
        })
        .collect();
    let mut entries = Vec::new();
    let mut inverse_failures = Vec::new();
    let mut omega_mass = 0.0;
    for r in results {
        let (n2, mass, u2, best) = r?;
        let Some((xi, correlation)) = best else {
            continue;
        };
        if correlation >= eta / 8.0 {
            entries.push(FrequencyEntry {
                n2,
                xi,
                u2,
                correlation,
            });
            omega_mass += mass;
        } else {
            inverse_failures.push(n2);
        }
    }
    entries.sort_by_key(|e| e.n2);
    Ok(FrequencyMap {
        p: freqs.group().p(),
        s: freqs.as_slice().to_vec(),
        rho0,
        rho1,
        rho2,
        eta,
        measured_u3,
        omega: entries.iter().map(|e| e.n2).collect(),
        entries,
        omega_mass,
        inverse_failures,
    })
}

/// Outcome of [`quadruple_audit`].
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    /// Word-norm threshold above which a quadruple is bad.
    #[serde(with = "as_decimal")]
    pub threshold: f64,
    pub exact: bool,
    /// Summands (exact) or samples (Monte-Carlo).
    pub quadruples: u64,
    /// `P(all four differences lie in Ω)`.
    #[serde(with = "as_decimal")]
    pub omega4_fraction: f64,
    /// `P(in Ω⁴ and bad)`.
    #[serde(with = "as_decimal")]
    pub bad_fraction: f64,
    /// `P(in Ω⁴ and not bad)`.
    #[serde(with = "as_decimal")]
    pub good_fraction: f64,
    /// Largest word norm of `ξ(a₁)+ξ(a₂)−ξ(a₃)−ξ(a₄)` seen on `Ω⁴`.
    pub max_defect_norm: u32,
}

/// Audits additivity of `ξ` on the quadruples
/// `(h₂−h₂', k₂−k₂', k₂−h₂', h₂−k₂')` with all four variables regular on
/// `B(S, ρ₂)`.
pub fn quadruple_audit(
    map: &FrequencyMap,
    freqs: &FrequencySet,
    threshold: f64,
    mode: Mode,
) -> Result<AuditReport> {
    let g = freqs.group();
    if g.p() != map.p {
        return Err(Error::GroupMismatch {
            left: map.p,
            right: g.p(),
        });
    }
    let law = regular_pmf(&BohrSet::new(freqs.clone(), map.rho2)?)?.to_float();
    let words = WordNorms::new(freqs);
    let in_omega: Vec<bool> = g.elements().map(|x| map.contains(x)).collect();
    let xi: Vec<u64> = g.elements().map(|x| map.xi(x)).collect();
    // (in Ω⁴, defect word norm) for one tuple.
    let judge = |h: u64, hp: u64, k: u64, kp: u64| -> Option<u32> {
        let q = [g.sub(h, hp), g.sub(k, kp), g.sub(k, hp), g.sub(h, kp)];
        if !q.iter().all(|&a| in_omega[a as usize]) {
            return None;
        }
        let x = |i: usize| xi[q[i] as usize];
        let d = g.sub(g.add(x(0), x(1)), g.add(x(2), x(3)));
        Some(words.get(d))
    };
    let atoms = law.atoms();
    let n = atoms.len() as u64;
    let terms = n.saturating_pow(4);
    let exact_cap = match mode {
        Mode::Exact { cap } | Mode::Auto { cap, .. } => Some(cap),
        Mode::MonteCarlo { .. } => None,
    };
    let (mut omega4, mut bad, mut worst) = (0.0f64, 0.0f64, 0u32);
    let exact = exact_cap.is_some_and(|cap| terms <= cap);
    let quadruples;
    if exact {
        let rows: Vec<(f64, f64, u32)> = atoms
            .par_iter()
            .map(|&(h, wh)| {
                let (mut o, mut b, mut w) = (0.0, 0.0, 0u32);
                for &(hp, whp) in atoms {
                    for &(k, wk) in atoms {
                        for &(kp, wkp) in atoms {
                            if let Some(d) = judge(h, hp, k, kp) {
                                let m = wh * whp * wk * wkp;
                                o += m;
                                if d as f64 > threshold {
                                    b += m;
                                }
                                w = w.max(d);
                            }
                        }
                    }
                }
                (o, b, w)
            })
            .collect();
        for (o, b, w) in rows {
            omega4 += o;
            bad += b;
            worst = worst.max(w);
        }
        quadruples = terms;
    } else {
        let (samples, seed) = match mode {
            Mode::Exact { cap } => return Err(Error::SupportTooLarge { terms, cap }),
            Mode::MonteCarlo { samples, seed } | Mode::Auto { samples, seed, .. } => {
                (samples, seed)
            }
        };
        let table = AliasTable::new(&law);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut o, mut b) = (0u64, 0u64);
        for _ in 0..samples {
            let v: [u64; 4] = std::array::from_fn(|_| table.sample(&mut rng));
            if let Some(d) = judge(v[0], v[1], v[2], v[3]) {
                o += 1;
                if d as f64 > threshold {
                    b += 1;
                }
                worst = worst.max(d);
            }
        }
        let s = samples.max(1) as f64;
        omega4 = o as f64 / s;
        bad = b as f64 / s;
        quadruples = samples as u64;
    }
    Ok(AuditReport {
        threshold,
        exact,
        quadruples,
        omega4_fraction: omega4,
        bad_fraction: bad,
        good_fraction: omega4 - bad,
        max_defect_norm: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fs(p: u64, s: &[u64]) -> FrequencySet {
        FrequencySet::from_residues(PrimeGroup::new(p).unwrap(), s).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn fft_matches_direct_correlation() {
        let freqs = fs(31, &[1, 5]);
        let setup = U2Setup::new(&freqs, r(2, 5), r(1, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<Complex64> = (0..31)
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..6.3)))
            .collect();
        let a = setup.correlations_fft(&f);
        let b = setup.correlations_exhaustive(&f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_phase_is_recovered() {
        let freqs = fs(101, &[1]);
        let f = GroupFunction::linear_phase(freqs.group(), 17);
        let w =
            inverse_u2_local(&f, &freqs, r(2, 5), r(1, 20), 0.3, &U2Options::default()).unwrap();
        assert_eq!(w.xi, 17);
        assert!((w.correlation - 1.0).abs() < 1e-9);
        assert!((w.reevaluate(&f).unwrap() - w.correlation).abs() < 1e-12);
    }

    #[test]
    fn separation_and_u2_preconditions() {
        let freqs = fs(101, &[1]);
        let f = GroupFunction::linear_phase(freqs.group(), 3);
        let e = inverse_u2_local(&f, &freqs, r(1, 5), r(1, 10), 0.3, &U2Options::default());
        assert!(matches!(e, Err(Error::RadiusSeparationViolated(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..101)
            .map(|_| if rng.gen() { 1.0 } else { -1.0 })
            .collect();
        let f = GroupFunction::from_real(freqs.group(), &noise)
            .unwrap()
            .with_bound(1.0);
        let e = inverse_u2_local(&f, &freqs, r(2, 5), r(1, 20), 0.45, &U2Options::default());
        assert!(matches!(e, Err(Error::InsufficientU2 { .. })));
    }

    #[test]
    fn linear_phase_linearizes_exactly() {
        let g = PrimeGroup::new(101).unwrap();
        let b = BohrSet::new(FrequencySet::from_residues(g, &[1]).unwrap(), r(2, 5))
            .unwrap()
            .shifted(7);
        let phi = LocalPhase::tabulate(b, Arity::Linear, |a| {
            Phase::from_ratio(g.mul(23, g.sub(a, 7)) as i64, 101)
        })
        .unwrap();
        let l = linearize_local(&phi, r(1, 1)).unwrap();
        assert_eq!(l.xi, 23);
        assert_eq!(l.max_defect, Rational::zero());
        let c =
            LocalPhase::tabulate(phi.domain().clone(), Arity::Linear, |_| Phase::zero()).unwrap();
        assert_eq!(linearize_local(&c, r(1, 1)).unwrap().xi, 0);
    }

    #[test]
    fn almost_linearity_is_checked() {
        let g = PrimeGroup::new(101).unwrap();
        let b = BohrSet::new(FrequencySet::from_residues(g, &[1]).unwrap(), r(2, 5)).unwrap();
        let phi = LocalPhase::polynomial(b, Arity::Quadratic, &[0, 0, 30]).unwrap();
        assert!(matches!(
            linearize_local(&phi, r(1, 1)),
            Err(Error::AlmostLinearityViolated { .. })
        ));
    }

    #[test]
    fn bilinear_multiples() {
        let g = PrimeGroup::new(101).unwrap();
        let b = BohrSet::new(FrequencySet::from_residues(g, &[1]).unwrap(), r(1, 2)).unwrap();
        let params = RationalizeParams {
            rho: r(1, 20),
            delta: 0.5,
            kmax: 10,
            threshold: 0.01,
            c1: 1.0,
        };
        let zero = LocalPhase::bilinear_form(b.clone(), 0).unwrap();
        assert_eq!(
            rationalize_bilinear(&zero, None, None, &params).unwrap().k,
            1
        );
        let half = LocalPhase::bilinear_form(b, g.inv(2).unwrap()).unwrap();
        let k = rationalize_bilinear(&half, None, None, &params).unwrap().k;
        assert!(k <= 2);
    }

    #[test]
    fn quadratic_phase_derivatives() {
        let freqs = fs(101, &[1]);
        let g = freqs.group();
        let f = GroupFunction::quadratic_phase(g, 5, 8);
        let map = derivative_frequency_map(
            &f,
            &freqs,
            [r(2, 5), r(1, 20), r(1, 50)],
            0.5,
            &MapOptions::default(),
        )
        .unwrap();
        assert!(!map.omega.is_empty());
        for e in &map.entries {
            assert_eq!(e.xi, g.mul(10, e.n2));
        }
        assert!(map.omega_mass >= 0.5 / 4.0);
        let audit = quadruple_audit(&map, &freqs, 0.0, Mode::exact()).unwrap();
        assert_eq!(audit.bad_fraction, 0.0);
        assert_eq!(audit.max_defect_norm, 0);
    }
}
