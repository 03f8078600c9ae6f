//! Verification sweeps over the lemma-level invariants.
//!
//! Every suite is deterministic given its options and returns a [`SuiteReport`]
//! listing each check, the calibrated constants it was held to and one row per
//! instance (or per aggregated cell for the large sweeps).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bohr::{BohrSet, FrequencySet, WordNorms};
use crate::error::{Error, Result};
use crate::gowers::{cauchy_form, Mode};
use crate::group::PrimeGroup;
use crate::inverse::{
    derivative_frequency_map, inverse_u2_local, quadruple_audit, MapOptions, U2Options, U2Setup,
    DEFAULT_SEPARATION,
};
use crate::khintchine::{
    greedy_ap_free, iteration_driver, planted_quadratic, r4_harness, ToyParams,
};
use crate::pmf::{regular_pmf, tv_distance};
use crate::rational::{big_to_f64, format_rational, rational_to_f64, Rational};
use crate::report::fmt_f64;
use crate::spectral::{fde_report, GroupFunction};
use crate::torus::bohr_basis::{bohr_basis, MAX_RANK};
use crate::torus::phase::{validate_ap_identity, validate_phase, Arity, LocalPhase};
use crate::torus::{complement_torus, DilatedTorus, DualFrequency};

/// Bound on `‖λ‖_S / (|S|^{3/2} max(1, A(λ)))`.
pub const EDUAL_C: f64 = 1.0;
/// Bound on `d_TV(a, a+h) ρ / (|S| ρ')`.
pub const ATI_C: f64 = 2.0;
/// Bound on `|E e_p(λn)| ρ ‖λ‖_S / |S|^{5/2}`.
pub const FDE_C: f64 = 0.5;
/// Bound on `|nᵢ| / (Nᵢ ‖a‖_{S⊥})` for the canonical representations, indexed by `|S| − 1`.
pub const BASIS_FACTOR: [f64; MAX_RANK] = [1.0, 3.0, 5.0, 8.0];
/// `[lo, hi]` for `Π Nᵢ / p`, indexed by `|S| − 1`.
pub const BASIS_BAND: [(f64, f64); MAX_RANK] =
    [(1.0, 1.0), (0.25, 1.0), (0.03125, 0.5), (0.00390625, 0.125)];
/// `[lo, hi]` for `vol(G') / (|k| vol(G))`, indexed by `d − 1`.
pub const NFOC_BAND: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 1.0), (0.25, 4.0), (0.0625, 16.0)];
/// Allowed relative drift of a calibrated maximum between primes.
pub const STABILITY: f64 = 0.5;

/// Suites accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "size-bohr",
    "edual",
    "edual-exact",
    "ati",
    "fde",
    "cauchy",
    "locu2",
    "bohr-basis",
    "nfoc",
    "omh",
    "dfm",
    "khintchine",
    "r4",
];

/// Knobs shared by the suites; `None` means the suite's default grid.
#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    pub primes: Option<Vec<u64>>,
    /// Ranks `|S|` (the largest one for the exhaustive suites).
    pub ranks: Option<Vec<usize>>,
    pub radii: Option<Vec<Rational>>,
    pub trials: Option<usize>,
    pub seed: u64,
}

impl SuiteOptions {
    fn primes_or(&self, default: &[u64]) -> Vec<u64> {
        self.primes.clone().unwrap_or_else(|| default.to_vec())
    }

    fn ranks_or(&self, default: &[usize]) -> Vec<usize> {
        self.ranks.clone().unwrap_or_else(|| default.to_vec())
    }

    fn radii_or(&self, default: Vec<Rational>) -> Vec<Rational> {
        self.radii.clone().unwrap_or(default)
    }

    fn max_rank_or(&self, default: usize) -> usize {
        self.ranks
            .as_ref()
            .and_then(|r| r.iter().max().copied())
            .unwrap_or(default)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub instances: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl Check {
    fn new(name: &str) -> Self {
        Check {
            name: name.to_string(),
            instances: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn merge(&mut self, other: &Check) {
        self.instances += other.instances;
        self.failures += other.failures;
        if self.first_failure.is_none() {
            self.first_failure.clone_from(&other.first_failure);
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, String>,
    pub instances: Vec<Value>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).and_then(|s| s.parse().ok())
    }

    /// One line per failing check.
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass())
            .map(|c| {
                format!(
                    "{}: {}/{} failed, first: {}",
                    c.name,
                    c.failures,
                    c.instances,
                    c.first_failure.as_deref().unwrap_or("-")
                )
            })
            .collect()
    }
}

/// Named checks in insertion order.
#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn get(&mut self, name: &str) -> &mut Check {
        if let Some(i) = self.0.iter().position(|c| c.name == name) {
            return &mut self.0[i];
        }
        self.0.push(Check::new(name));
        self.0.last_mut().unwrap()
    }

    fn record(&mut self, name: &str, ok: bool, what: impl FnOnce() -> String) {
        self.get(name).record(ok, what);
    }

    fn absorb(&mut self, other: Checks) {
        for c in other.0 {
            self.get(&c.name.clone()).merge(&c);
        }
    }

    fn finish(
        self,
        suite: &str,
        constants: BTreeMap<String, String>,
        instances: Vec<Value>,
    ) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            pass: self.0.iter().all(Check::pass),
            checks: self.0,
            constants,
            instances,
        }
    }
}

fn constants<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs a suite by name.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    match name {
        "size-bohr" => exact_lemmas(
            &opts.primes_or(&EXACT_PRIMES),
            opts.max_rank_or(2),
            &opts.radii_or(exact_radii()),
        ),
        "edual" => edual_calibration(&opts.primes_or(&EXACT_PRIMES), opts.max_rank_or(2)),
        "edual-exact" => edual_exact(&opts.primes_or(&[17]), opts.max_rank_or(2)),
        "ati" => ati(
            &opts.primes_or(&[101, 211]),
            &opts.ranks_or(&[1, 2, 3]),
            &opts.radii_or(vec![Rational::new(3, 10), Rational::new(1, 10)]),
            opts.seed,
        ),
        "fde" => fde(
            &opts.primes_or(&[101, 211, 401]),
            &opts.radii_or(fde_radii()),
        ),
        "cauchy" => cauchy(
            &opts.primes_or(&[31, 101, 401]),
            opts.trials.unwrap_or(200),
            opts.seed,
        ),
        "locu2" => locu2(
            &opts.primes_or(&LOCU2_PRIMES),
            opts.trials.unwrap_or(50),
            opts.seed,
        ),
        "bohr-basis" => bohr_basis_suite(&opts.primes_or(&[7, 11, 31, 101])),
        "nfoc" => nfoc(opts.trials.unwrap_or(100), opts.seed),
        "omh" => omh(
            &opts.primes_or(&[3, 5, 7, 11, 13, 17, 19, 23, 29, 31]),
            opts.seed,
        ),
        "dfm" => dfm(&opts.primes_or(&[101, 211])),
        "khintchine" => khintchine(
            &opts.primes_or(&[101, 211, 499]),
            opts.trials.unwrap_or(20),
            opts.seed,
        ),
        "r4" => r4(50),
        other => Err(Error::invalid(
            "suite",
            format!("unknown suite {other:?}; known: {}", SUITES.join(", ")),
        )),
    }
}

fn groups(primes: &[u64]) -> Result<Vec<PrimeGroup>> {
    primes.iter().map(|&p| PrimeGroup::new(p)).collect()
}

fn check_odd(groups: &[PrimeGroup]) -> Result<()> {
    match groups.iter().find(|g| g.p() < 3) {
        Some(_) => Err(Error::invalid("p", "suite needs odd primes")),
        None => Ok(()),
    }
}

/// All `S ⊆ Z/pZ \ {0}` with `1 ≤ |S| ≤ max`, as sorted residues.
pub fn frequency_sets(g: PrimeGroup, max: usize) -> Vec<Vec<u64>> {
    fn extend(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, next: u64, p: u64, max: usize) {
        for s in next..p {
            cur.push(s);
            out.push(cur.clone());
            if cur.len() < max {
                extend(out, cur, s + 1, p, max);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut out, &mut Vec::new(), 1, g.p(), max);
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn show_s(s: &[u64]) -> String {
    s.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------------------
// Exact lemmas

pub const EXACT_PRIMES: [u64; 4] = [7, 11, 13, 17];

/// Radii of the exact grid.
pub fn exact_radii() -> Vec<Rational> {
    [
        (1, 8),
        (1, 7),
        (1, 6),
        (1, 5),
        (1, 4),
        (1, 3),
        (3, 8),
        (1, 2),
    ]
    .into_iter()
    .map(|(n, d)| Rational::new(n, d))
    .collect()
}

/// Triangle inequalities for both norms and the duality bound, over all pairs.
fn norm_checks(freqs: &FrequencySet, checks: &mut Checks, dual_part: bool) {
    let g = freqs.group();
    let wn = WordNorms::new(freqs);
    let tag = |what: &str, a: u64, b: u64| {
        format!(
            "p={} S={{{}}} {what} a={a} b={b}",
            g.p(),
            show_s(freqs.as_slice())
        )
    };
    let dual: Vec<u64> = g.elements().map(|a| freqs.dual_num(a)).collect();
    let word: Vec<u64> = g.elements().map(|a| wn.get(a) as u64).collect();
    if !dual_part {
        for a in g.elements() {
            for b in g.elements() {
                let c = g.add(a, b) as usize;
                let (a, b) = (a as usize, b as usize);
                checks.record("sperp-tri-add", dual[c] <= dual[a] + dual[b], || {
                    tag("dual(a+b)", a as u64, b as u64)
                });
                checks.record("a-tri-add", word[c] <= word[a] + word[b], || {
                    tag("word(a+b)", a as u64, b as u64)
                });
            }
            for k in -5i64..=5 {
                let ka = g.mul(g.reduce(k), a) as usize;
                let m = k.unsigned_abs();
                checks.record("sperp-tri-mul", dual[ka] <= m * dual[a as usize], || {
                    tag("dual(ka)", a, k as u64)
                });
                checks.record("a-tri-mul", word[ka] <= m * word[a as usize], || {
                    tag("word(ka)", a, k as u64)
                });
            }
        }
    }
    // ‖nλ/p‖ ≤ ‖n‖_{S⊥} ‖λ‖_S, all three scaled by p.
    for n in g.elements() {
        for l in g.elements() {
            let lhs = g.circle_num(g.mul(n, l));
            checks.record(
                "edual-i",
                lhs <= dual[n as usize] * word[l as usize],
                || tag("edual n,λ", n, l),
            );
        }
    }
}

fn size_checks(freqs: &FrequencySet, rho: Rational, checks: &mut Checks) -> Result<Value> {
    let g = freqs.group();
    let d = freqs.len() as u32;
    let b = BohrSet::new(freqs.clone(), rho)?;
    let size = b.size()? as i128;
    let tag = || {
        format!(
            "p={} S={{{}}} rho={}",
            g.p(),
            show_s(freqs.as_slice()),
            format_rational(&rho)
        )
    };
    let (num, den) = (*rho.numer() as i128, *rho.denom() as i128);
    checks.record(
        "size-bohr-lower",
        size * den.pow(d) >= num.pow(d) * g.p() as i128,
        tag,
    );
    let doubled = BohrSet::new(freqs.clone(), rho * 2)?.size()? as i128;
    checks.record("size-bohr-doubling", doubled <= 4i128.pow(d) * size, tag);
    let pmf = regular_pmf(&b)?;
    let exact = pmf.pmf();
    checks.record(
        "pmf-normalized",
        exact.total() == num_rational::BigRational::from_integer(1.into()),
        tag,
    );
    checks.record("pmf-support", exact.support().all(|a| b.contains(a)), tag);
    checks.record(
        "theta-crude",
        exact.max_mass() <= pmf.crude_mass_bound(),
        tag,
    );
    Ok(json!({
        "p": g.p(),
        "S": freqs.as_slice(),
        "rho": format_rational(&rho),
        "size": size as u64,
        "size_2rho": doubled as u64,
        "max_mass": crate::rational::format_big(&exact.max_mass()),
        "crude_bound": crate::rational::format_big(&pmf.crude_mass_bound()),
    }))
}

/// Exhaustive exact-lemma suite: size bounds, triangle inequalities, duality
/// part (i), the crude mass bound and pmf normalization.
pub fn exact_lemmas(primes: &[u64], max_rank: usize, radii: &[Rational]) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let work: Vec<(PrimeGroup, Vec<u64>)> = gs
        .iter()
        .flat_map(|&g| frequency_sets(g, max_rank).into_iter().map(move |s| (g, s)))
        .collect();
    let results: Vec<Result<(Checks, Vec<Value>)>> = work
        .par_iter()
        .map(|(g, s)| {
            let freqs = FrequencySet::from_residues(*g, s)?;
            let mut checks = Checks::default();
            norm_checks(&freqs, &mut checks, false);
            let rows = radii
                .iter()
                .map(|&rho| size_checks(&freqs, rho, &mut checks))
                .collect::<Result<Vec<_>>>()?;
            Ok((checks, rows))
        })
        .collect();
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for r in results {
        let (c, mut rs) = r?;
        checks.absorb(c);
        rows.append(&mut rs);
    }
    let consts = constants([
        ("primes", format!("{primes:?}")),
        ("max_rank", max_rank.to_string()),
        (
            "radii",
            radii
                .iter()
                .map(format_rational)
                .collect::<Vec<_>>()
                .join(","),
        ),
    ]);
    Ok(checks.finish("size-bohr", consts, rows))
}

/// Duality part (i) alone, exhaustive at each prime.
pub fn edual_exact(primes: &[u64], max_rank: usize) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for g in gs {
        let sets = frequency_sets(g, max_rank);
        let parts: Vec<Checks> = sets
            .par_iter()
            .map(|s| {
                let freqs = FrequencySet::from_residues(g, s).expect("non-zero residues");
                let mut c = Checks::default();
                norm_checks(&freqs, &mut c, true);
                c
            })
            .collect();
        for c in parts {
            checks.absorb(c);
        }
        rows.push(
            json!({"p": g.p(), "sets": sets.len(), "pairs": sets.len() as u64 * g.p() * g.p()}),
        );
    }
    Ok(checks.finish(
        "edual-exact",
        constants([("primes", format!("{primes:?}"))]),
        rows,
    ))
}

/// `A(λ) = max_{n≠0} ‖nλ/p‖ / ‖n‖_{S⊥}` and the ratio `‖λ‖_S / (|S|^{3/2} max(1, A))`.
fn edual_ratio(freqs: &FrequencySet, wn: &WordNorms, l: u64) -> (f64, f64) {
    let g = freqs.group();
    let a = (1..g.p())
        .map(|n| g.circle_num(g.mul(n, l)) as f64 / freqs.dual_num(n) as f64)
        .fold(0.0, f64::max);
    let scale = (freqs.len() as f64).powf(1.5) * a.max(1.0);
    (a, wn.get(l) as f64 / scale)
}

/// Calibration of duality part (ii).
pub fn edual_calibration(primes: &[u64], max_rank: usize) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let work: Vec<(PrimeGroup, Vec<u64>)> = gs
        .iter()
        .flat_map(|&g| frequency_sets(g, max_rank).into_iter().map(move |s| (g, s)))
        .collect();
    let cells: Vec<(u64, usize, f64, u64, Vec<u64>)> = work
        .par_iter()
        .map(|(g, s)| {
            let freqs = FrequencySet::from_residues(*g, s).expect("non-zero residues");
            let wn = WordNorms::new(&freqs);
            let (mut best, mut arg) = (0.0f64, 0u64);
            for l in g.elements() {
                let (_, r) = edual_ratio(&freqs, &wn, l);
                if r > best {
                    best = r;
                    arg = l;
                }
            }
            (g.p(), s.len(), best, arg, s.clone())
        })
        .collect();
    let mut checks = Checks::default();
    let mut max_by: BTreeMap<(u64, usize), f64> = BTreeMap::new();
    for (p, d, r, l, s) in &cells {
        checks.record("edual-ii", *r <= EDUAL_C, || {
            format!("p={p} S={{{}}} λ={l} ratio={}", show_s(s), fmt_f64(*r))
        });
        let e = max_by.entry((*p, *d)).or_insert(0.0);
        *e = e.max(*r);
    }
    let overall = cells.iter().map(|c| c.2).fold(0.0, f64::max);
    let rows = max_by
        .iter()
        .map(|(&(p, d), &r)| json!({"p": p, "rank": d, "max_ratio": fmt_f64(r)}))
        .collect();
    let consts = constants([
        ("EDUAL_C", fmt_f64(EDUAL_C)),
        ("max_ratio", fmt_f64(overall)),
        ("primes", format!("{primes:?}")),
    ]);
    Ok(checks.finish("edual", consts, rows))
}

// ---------------------------------------------------------------------------
// Approximate translation invariance

/// `S` of rank `d` used by the sweep: `{1}` plus seeded distinct residues.
pub fn sweep_frequencies(g: PrimeGroup, d: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g.p() << 8) ^ d as u64);
    let mut s = vec![1u64];
    while s.len() < d {
        let x = rng.gen_range(2..g.p());
        if !s.contains(&x) {
            s.push(x);
        }
    }
    s.sort_unstable();
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct AtiRow {
    pub p: u64,
    #[serde(rename = "S")]
    pub s: Vec<u64>,
    pub rho: String,
    pub rho_prime: String,
    pub shifts: usize,
    pub max_tv: String,
    pub max_ratio: f64,
    pub argmax_h: u64,
}

fn ati_cell(g: PrimeGroup, s: &[u64], rho: Rational, rho_p: Rational) -> Result<AtiRow> {
    let freqs = FrequencySet::from_residues(g, s)?;
    let pmf = regular_pmf(&BohrSet::new(freqs.clone(), rho)?)?;
    let shifts = BohrSet::new(freqs, rho_p)?.members_capped(crate::bohr::DEFAULT_ENUM_CAP)?;
    let scale = rational_to_f64(&rho) / (s.len() as f64 * rational_to_f64(&rho_p));
    let tvs: Vec<(u64, num_rational::BigRational)> = shifts
        .par_iter()
        .map(|&h| Ok((h, tv_distance(pmf.pmf(), &pmf.pmf().translate(h))?)))
        .collect::<Result<_>>()?;
    let (argmax_h, max_tv) = tvs.into_iter().fold(
        (0, num_rational::BigRational::from_integer(0.into())),
        |acc, (h, tv)| {
            if tv > acc.1 {
                (h, tv)
            } else {
                acc
            }
        },
    );
    Ok(AtiRow {
        p: g.p(),
        s: s.to_vec(),
        rho: format_rational(&rho),
        rho_prime: format_rational(&rho_p),
        shifts: shifts.len(),
        max_ratio: big_to_f64(&max_tv) * scale,
        max_tv: crate::rational::format_big(&max_tv),
        argmax_h,
    })
}

/// Total-variation drift of the regular pmf under small shifts.
pub fn ati(primes: &[u64], ranks: &[usize], radii: &[Rational], seed: u64) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    check_odd(&gs)?;
    let mut rows = Vec::new();
    for &g in &gs {
        for &d in ranks {
            if d == 0 || d as u64 >= g.p() {
                return Err(Error::invalid(
                    "ranks",
                    format!("rank {d} impossible at p={}", g.p()),
                ));
            }
            let s = sweep_frequencies(g, d, seed);
            for &rho in radii {
                for k in [8, 32, 128] {
                    rows.push(ati_cell(g, &s, rho, rho / k)?);
                }
            }
        }
    }
    let mut checks = Checks::default();
    for r in &rows {
        checks.record("ati-bound", r.max_ratio <= ATI_C, || {
            format!(
                "p={} S={{{}}} rho={} rho'={} ratio={}",
                r.p,
                show_s(&r.s),
                r.rho,
                r.rho_prime,
                fmt_f64(r.max_ratio)
            )
        });
        checks.record("ati-finite", r.max_ratio.is_finite(), || {
            format!("p={}", r.p)
        });
    }
    let per_p: Vec<(u64, f64)> = gs
        .iter()
        .map(|g| {
            let m = rows
                .iter()
                .filter(|r| r.p == g.p())
                .map(|r| r.max_ratio)
                .fold(0.0, f64::max);
            (g.p(), m)
        })
        .collect();
    let mut consts = constants([("ATI_C", fmt_f64(ATI_C)), ("stability", fmt_f64(STABILITY))]);
    for (p, m) in &per_p {
        consts.insert(format!("max_ratio_p{p}"), fmt_f64(*m));
    }
    stability_check(&mut checks, "ati-stability", &per_p);
    let overall = per_p.iter().map(|x| x.1).fold(0.0, f64::max);
    consts.insert("max_ratio".into(), fmt_f64(overall));
    let rows = rows
        .iter()
        .map(|r| serde_json::to_value(r).expect("plain row"))
        .collect();
    Ok(checks.finish("ati", consts, rows))
}

/// Every maximum lies within `STABILITY` of the first prime's maximum.
fn stability_check(checks: &mut Checks, name: &str, per_p: &[(u64, f64)]) {
    let Some(&(p0, base)) = per_p.first() else {
        return;
    };
    for &(p, m) in &per_p[1..] {
        let ok = base > 0.0 && (m / base - 1.0).abs() <= STABILITY;
        checks.record(name, ok, || {
            format!("p={p}: {} vs p={p0}: {}", fmt_f64(m), fmt_f64(base))
        });
    }
}

// ---------------------------------------------------------------------------
// Fourier decay

/// Frequency-set shapes of the decay sweep; only the `fixed` ones are held to
/// the stability check, since `{1, ⌊√p⌋}` changes its arithmetic with `p`.
pub fn fde_shapes(g: PrimeGroup) -> Vec<(&'static str, Vec<u64>, bool)> {
    let r = (g.p() as f64).sqrt().floor() as u64;
    vec![
        ("one", vec![1], true),
        ("one-two", vec![1, 2], true),
        ("one-three", vec![1, 3], true),
        ("one-two-three", vec![1, 2, 3], true),
        ("one-root", vec![1, r], false),
    ]
}

pub fn fde_radii() -> Vec<Rational> {
    vec![
        Rational::new(1, 20),
        Rational::new(1, 10),
        Rational::new(1, 5),
    ]
}

pub fn fde(primes: &[u64], radii: &[Rational]) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    check_odd(&gs)?;
    let mut work = Vec::new();
    for &g in &gs {
        for (name, s, fixed) in fde_shapes(g) {
            for &rho in radii {
                work.push((g, name, s.clone(), rho, fixed));
            }
        }
    }
    type Row<'a> = (u64, &'a str, Rational, Vec<u64>, f64, u64, bool);
    let reports: Vec<Result<Row>> = work
        .par_iter()
        .map(|(g, name, s, rho, fixed)| {
            let b = BohrSet::new(FrequencySet::from_residues(*g, s)?, *rho)?;
            let r = fde_report(&b)?;
            Ok((g.p(), *name, *rho, s.clone(), r.max_ratio, r.argmax, *fixed))
        })
        .collect();
    let reports: Vec<_> = reports.into_iter().collect::<Result<_>>()?;
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for (p, name, rho, s, m, arg, fixed) in &reports {
        checks.record("fde-bound", *m <= FDE_C, || {
            format!(
                "p={p} S={{{}}} rho={} ratio={}",
                show_s(s),
                format_rational(rho),
                fmt_f64(*m)
            )
        });
        rows.push(json!({
            "p": p, "shape": name, "S": s, "rho": format_rational(rho),
            "max_ratio": fmt_f64(*m), "argmax": arg, "stability_checked": fixed,
        }));
    }
    let (mut shapes, mut seen) = (Vec::new(), std::collections::BTreeSet::new());
    for (_, name, rho, .., fixed) in &reports {
        if *fixed && seen.insert((*name, *rho)) {
            shapes.push((*name, *rho));
        }
    }
    for (name, rho) in shapes {
        let per_p: Vec<(u64, f64)> = reports
            .iter()
            .filter(|r| r.1 == name && r.2 == rho)
            .map(|r| (r.0, r.4))
            .collect();
        stability_check(&mut checks, "fde-stability", &per_p);
    }
    let overall = reports.iter().map(|r| r.4).fold(0.0, f64::max);
    let consts = constants([
        ("FDE_C", fmt_f64(FDE_C)),
        ("max_ratio", fmt_f64(overall)),
        ("stability", fmt_f64(STABILITY)),
    ]);
    Ok(checks.finish("fde", consts, rows))
}

// ---------------------------------------------------------------------------
// Cauchy–Schwarz positivity

/// `E_{x,y,z} F(x)F(y)F(z)F(x−3y+3z)` by triple summation.
pub fn cauchy_brute(f: &[f64], g: PrimeGroup) -> f64 {
    let p = g.p();
    let mut total = 0.0;
    for x in 0..p {
        for y in 0..p {
            let w = g.sub(x, g.mul(3, y));
            let fxy = f[x as usize] * f[y as usize];
            let mut inner = 0.0;
            for z in 0..p {
                inner += f[z as usize] * f[g.add(w, g.mul(3, z)) as usize];
            }
            total += fxy * inner;
        }
    }
    total / (p as f64).powi(3)
}

/// A random real `F` with values in `[−1, 1]` and a random mean.
pub fn random_real(g: PrimeGroup, rng: &mut impl Rng) -> Vec<f64> {
    let m: f64 = rng.gen_range(-1.0..=1.0);
    let spread = 1.0 - m.abs();
    g.elements()
        .map(|_| m + spread * rng.gen_range(-1.0..=1.0))
        .collect()
}

pub fn cauchy(primes: &[u64], trials: usize, seed: u64) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    let mut min_slack = f64::INFINITY;
    for g in gs {
        if g.p() % 3 == 0 {
            return Err(Error::invalid("p", "the form needs 3 invertible"));
        }
        let results: Vec<Result<(f64, f64, Option<f64>)>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g.p() << 20) ^ t as u64);
                let f = random_real(g, &mut rng);
                let value = cauchy_form(&f, g)?;
                let mean = f.iter().sum::<f64>() / g.p() as f64;
                let brute = (g.p() <= 31).then(|| cauchy_brute(&f, g));
                Ok((value, mean, brute))
            })
            .collect();
        let mut slack_p = f64::INFINITY;
        let mut max_brute_err = 0.0f64;
        for (t, r) in results.into_iter().enumerate() {
            let (value, mean, brute) = r?;
            let slack = value - mean.powi(4);
            slack_p = slack_p.min(slack);
            checks.record("cauchy-positivity", slack >= -1e-9, || {
                format!(
                    "p={} trial={t} value={} mean^4={}",
                    g.p(),
                    fmt_f64(value),
                    fmt_f64(mean.powi(4))
                )
            });
            if let Some(b) = brute {
                max_brute_err = max_brute_err.max((b - value).abs());
                checks.record("cauchy-brute-force", (b - value).abs() <= 1e-9, || {
                    format!(
                        "p={} trial={t} fast={} brute={}",
                        g.p(),
                        fmt_f64(value),
                        fmt_f64(b)
                    )
                });
            }
        }
        min_slack = min_slack.min(slack_p);
        rows.push(json!({
            "p": g.p(), "trials": trials, "min_slack": fmt_f64(slack_p),
            "max_brute_error": fmt_f64(max_brute_err),
        }));
    }
    let consts = constants([
        ("tolerance", "1e-9".into()),
        ("min_slack", fmt_f64(min_slack)),
    ]);
    Ok(checks.finish("cauchy", consts, rows))
}

// ---------------------------------------------------------------------------
// Local U² inverse

pub const LOCU2_PRIMES: [u64; 3] = [101, 211, 401];
pub const LOCU2_ETA: f64 = 0.1;
/// Largest prime on which the exhaustive-ξ cross-check runs.
pub const LOCU2_EXHAUSTIVE_MAX: u64 = 401;

/// `ρ₀ = 2/5` and `ρ₁ = ¾ ρ₀η²/(C|S|) = 3/250`: inside the separation with room
/// to spare while keeping `B(S, ρ₁)` non-trivial at `p = 101`.
pub fn locu2_radii() -> (Rational, Rational) {
    (Rational::new(2, 5), Rational::new(3, 250))
}

/// `(1−ε) e_p(ξ₀n) + ε z_n` with `z_n` uniform in the unit disc.
pub fn noisy_phase(g: PrimeGroup, xi0: u64, eps: f64, rng: &mut impl Rng) -> GroupFunction {
    let phase = GroupFunction::linear_phase(g, xi0);
    let values: Vec<Complex64> = phase
        .values()
        .iter()
        .map(|&v| {
            let r = rng.gen::<f64>().sqrt();
            let t = rng.gen::<f64>() * std::f64::consts::TAU;
            v * (1.0 - eps) + Complex64::from_polar(r, t) * eps
        })
        .collect();
    GroupFunction::new(g, values)
        .and_then(|f| f.certify_bound(1.0))
        .expect("convex combination of unit-bounded values")
}

#[derive(Clone, Debug, Serialize)]
pub struct Locu2Row {
    pub p: u64,
    pub index: usize,
    pub xi0: u64,
    pub eps: String,
    pub measured_u2: String,
    pub xi: u64,
    pub correlation: f64,
    pub exhaustive_max: Option<f64>,
    pub reevaluated: f64,
}

/// One synthetic instance; the exhaustive cross-check runs when `p ≤ LOCU2_EXHAUSTIVE_MAX`.
pub fn locu2_instance(p: u64, index: usize, seed: u64) -> Result<Locu2Row> {
    let g = PrimeGroup::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p << 24) ^ index as u64);
    let xi0 = rng.gen_range(0..p);
    let eps = rng.gen_range(0.0..=0.3);
    let f = noisy_phase(g, xi0, eps, &mut rng);
    let freqs = FrequencySet::from_residues(g, &[1])?;
    let (rho0, rho1) = locu2_radii();
    let w = inverse_u2_local(&f, &freqs, rho0, rho1, LOCU2_ETA, &U2Options::default())?;
    let exhaustive_max = if p <= LOCU2_EXHAUSTIVE_MAX {
        let setup = U2Setup::new(&freqs, rho0, rho1)?;
        Some(
            setup
                .correlations_exhaustive(f.values())
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        None
    };
    Ok(Locu2Row {
        p,
        index,
        xi0,
        eps: fmt_f64(eps),
        measured_u2: fmt_f64(w.measured_u2),
        xi: w.xi,
        correlation: w.correlation,
        exhaustive_max,
        reevaluated: w.reevaluate(&f)?,
    })
}

pub fn locu2(primes: &[u64], instances: usize, seed: u64) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    check_odd(&gs)?;
    let rows: Vec<Locu2Row> = (0..instances)
        .into_par_iter()
        .map(|i| locu2_instance(gs[i % gs.len()].p(), i, seed))
        .collect::<Result<_>>()?;
    let mut checks = Checks::default();
    for r in &rows {
        let tag = || {
            format!(
                "p={} index={} corr={}",
                r.p,
                r.index,
                fmt_f64(r.correlation)
            )
        };
        checks.record("locu2-half-eta", r.correlation >= LOCU2_ETA / 2.0, tag);
        checks.record(
            "locu2-reevaluation",
            (r.reevaluated - r.correlation).abs() <= 1e-9,
            tag,
        );
        if let Some(m) = r.exhaustive_max {
            checks.record(
                "locu2-exhaustive-max",
                (m - r.correlation).abs() <= 1e-9,
                tag,
            );
        }
    }
    let (rho0, rho1) = locu2_radii();
    let min_corr = rows
        .iter()
        .map(|r| r.correlation)
        .fold(f64::INFINITY, f64::min);
    let consts = constants([
        ("eta", fmt_f64(LOCU2_ETA)),
        ("separation_C", fmt_f64(DEFAULT_SEPARATION)),
        ("rho0", format_rational(&rho0)),
        ("rho1", format_rational(&rho1)),
        ("min_correlation", fmt_f64(min_corr)),
    ]);
    let rows = rows
        .iter()
        .map(|r| serde_json::to_value(r).expect("plain row"))
        .collect();
    Ok(checks.finish("locu2", consts, rows))
}

// ---------------------------------------------------------------------------
// Bohr bases

#[derive(Default)]
struct BasisCell {
    sets: u64,
    max_factor: f64,
    band: (f64, f64),
}

pub fn bohr_basis_suite(primes: &[u64]) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let mut checks = Checks::default();
    let mut cells: BTreeMap<(u64, usize), BasisCell> = BTreeMap::new();
    for g in gs {
        let sets = frequency_sets(g, 3);
        let bases: Vec<Result<(Vec<u64>, crate::torus::bohr_basis::BohrBasis)>> = sets
            .par_iter()
            .map(|s| Ok((s.clone(), bohr_basis(&FrequencySet::from_residues(g, s)?)?)))
            .collect();
        for r in bases {
            let (s, b) = r?;
            let d = s.len();
            let tag = || format!("p={} S={{{}}}", g.p(), show_s(&s));
            checks.record("ain", b.ain_holds, tag);
            checks.record("representation", b.representations_verified, tag);
            checks.record(
                "representation-factor",
                b.representation_factor <= BASIS_FACTOR[d - 1] * (1.0 + 1e-9),
                || format!("{} factor={}", tag(), fmt_f64(b.representation_factor)),
            );
            checks.record("uniqueness", b.unique, tag);
            let (lo, hi) = BASIS_BAND[d - 1];
            let x = b.size_product_over_p;
            checks.record(
                "size-band",
                x >= lo * (1.0 - 1e-9) && x <= hi * (1.0 + 1e-9),
                || format!("{} prod/p={}", tag(), fmt_f64(x)),
            );
            let c = cells.entry((g.p(), d)).or_insert(BasisCell {
                band: (f64::INFINITY, 0.0),
                ..Default::default()
            });
            c.sets += 1;
            c.max_factor = c.max_factor.max(b.representation_factor);
            c.band = (c.band.0.min(x), c.band.1.max(x));
        }
    }
    let rows = cells
        .iter()
        .map(|(&(p, d), c)| {
            json!({
                "p": p, "rank": d, "sets": c.sets, "max_factor": fmt_f64(c.max_factor),
                "min_prod_over_p": fmt_f64(c.band.0), "max_prod_over_p": fmt_f64(c.band.1),
            })
        })
        .collect();
    let mut consts = BTreeMap::new();
    for (d, (lo, hi)) in BASIS_BAND.iter().enumerate().take(3) {
        consts.insert(
            format!("band_d{}", d + 1),
            format!("[{}, {}]", fmt_f64(*lo), fmt_f64(*hi)),
        );
        consts.insert(format!("factor_d{}", d + 1), fmt_f64(BASIS_FACTOR[d]));
    }
    for d in 1..=3 {
        let (lo, hi) = cells
            .iter()
            .filter(|(k, _)| k.1 == d)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, c)| {
                (lo.min(c.band.0), hi.max(c.band.1))
            });
        consts.insert(
            format!("observed_band_d{d}"),
            format!("[{}, {}]", fmt_f64(lo), fmt_f64(hi)),
        );
    }
    Ok(checks.finish("bohr-basis", consts, rows))
}

// ---------------------------------------------------------------------------
// Complement tori

/// A random torus of dimension `d ∈ [1, 4]` with an irreducible dual frequency.
pub fn random_torus(rng: &mut impl Rng) -> (DilatedTorus, Vec<i64>) {
    let d = rng.gen_range(1..=4);
    let lambdas: Vec<f64> = (0..d).map(|_| rng.gen_range(1.0..=10.0)).collect();
    let torus = DilatedTorus::new(lambdas).expect("periods at least 1");
    loop {
        let m: Vec<i64> = (0..d).map(|_| rng.gen_range(-5..=5)).collect();
        let k = DualFrequency::new(torus.clone(), m.clone()).expect("matching dimension");
        if k.is_irreducible() {
            return (torus, m);
        }
    }
}

fn random_rationals(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| {
            let den = rng.gen_range(1..=12);
            Rational::new(rng.gen_range(-3 * den..=3 * den), den)
        })
        .collect()
}

/// Distance from `x` to the nearest multiple of `period`.
fn circle_gap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    r.min(period - r)
}

pub fn nfoc(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    let mut bands: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64) << 16) ^ 0x6e66);
        let (torus, m) = random_torus(&mut rng);
        let d = torus.dim();
        let k = DualFrequency::new(torus.clone(), m.clone())?;
        let ct = complement_torus(&torus, &k)?;
        let tag = || format!("instance={i} d={d} m={m:?}");
        let periods = ct.torus.lambdas().to_vec();
        let (mut max_hom, mut max_trip, mut max_exact) = (0usize, 0.0f64, 0.0f64);
        for _ in 0..8 {
            let q1 = random_rationals(&mut rng, ct.dim());
            let q2 = random_rationals(&mut rng, ct.dim());
            let sum: Vec<Rational> = q1.iter().zip(&q2).map(|(a, b)| a + b).collect();
            let (a, b, c) = (
                ct.psi_rational(&q1)?,
                ct.psi_rational(&q2)?,
                ct.psi_rational(&sum)?,
            );
            let ok = a.iter().zip(&b).zip(&c).all(|((x, y), z)| {
                let s = x + y;
                (s - s.floor()) == *z
            });
            if !ok {
                max_hom += 1;
            }
            checks.record("psi-homomorphism", ok, tag);
            // Float ψ on the same rational point agrees with the exact value.
            let y = ct.psi(&ct.point_from_rational(&q1))?;
            for ((yi, ai), per) in y.iter().zip(&a).zip(&periods) {
                let dev = circle_gap(yi - rational_to_f64(ai) * per, *per);
                max_exact = max_exact.max(dev);
            }
            // ψ∘ψ⁻¹ on a random point of G'.
            let y: Vec<f64> = periods.iter().map(|per| rng.gen::<f64>() * per).collect();
            let x = ct.psi_inv(&y)?;
            let back = ct.psi(&x)?;
            for ((b, y), per) in back.iter().zip(&y).zip(&periods) {
                max_trip = max_trip.max(circle_gap(b - y, *per));
            }
            max_trip = max_trip.max(k.pair(&x).abs());
        }
        checks.record("psi-exact-agreement", max_exact <= 1e-9, || {
            format!("{} dev={}", tag(), fmt_f64(max_exact))
        });
        checks.record("psi-round-trip", max_trip <= 1e-12, || {
            format!("{} dev={}", tag(), fmt_f64(max_trip))
        });
        let x = ct.volume_ratio;
        let (lo, hi) = NFOC_BAND[d - 1];
        checks.record(
            "volume-band",
            x >= lo * (1.0 - 1e-9) && x <= hi * (1.0 + 1e-9),
            || format!("{} ratio={}", tag(), fmt_f64(x)),
        );
        let e = bands.entry(d).or_insert((f64::INFINITY, 0.0));
        *e = (e.0.min(x), e.1.max(x));
        rows.push(json!({
            "instance": i, "d": d, "lambdas": torus.lambdas().iter().map(|l| fmt_f64(*l)).collect::<Vec<_>>(),
            "m": m, "volume_ratio": fmt_f64(x), "round_trip": fmt_f64(max_trip),
            "exact_agreement": fmt_f64(max_exact), "homomorphism_failures": max_hom,
        }));
    }
    let mut consts = constants([("round_trip_tolerance", "1e-12".into())]);
    for (d, (lo, hi)) in NFOC_BAND.iter().enumerate() {
        consts.insert(
            format!("band_d{}", d + 1),
            format!("[{}, {}]", fmt_f64(*lo), fmt_f64(*hi)),
        );
    }
    for (d, (lo, hi)) in &bands {
        consts.insert(
            format!("observed_band_d{d}"),
            format!("[{}, {}]", fmt_f64(*lo), fmt_f64(*hi)),
        );
    }
    Ok(checks.finish("nfoc", consts, rows))
}

// ---------------------------------------------------------------------------
// Quadratic-phase validators

pub fn omh(primes: &[u64], seed: u64) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    let mut work = Vec::new();
    for &g in &gs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g.p() << 12));
        let shapes: Vec<Vec<u64>> = if g.p() > 3 {
            vec![vec![1], vec![1, 2]]
        } else {
            vec![vec![1]]
        };
        for s in shapes {
            for rho in [
                Rational::new(1, 5),
                Rational::new(3, 10),
                Rational::new(1, 2),
            ] {
                let c: Vec<u64> = (0..3).map(|_| rng.gen_range(0..g.p())).collect();
                let shift = rng.gen_range(0..g.p());
                work.push((g, s.clone(), rho, shift, c));
            }
        }
    }
    let results: Vec<Result<(Value, bool, bool)>> = work
        .par_iter()
        .map(|(g, s, rho, shift, c)| {
            let dom = BohrSet::new(FrequencySet::from_residues(*g, s)?, *rho)?.shifted(*shift);
            let phi = LocalPhase::polynomial(dom, Arity::Quadratic, c)?;
            let cert = validate_phase(&phi, None)?;
            let ap = validate_ap_identity(&phi)?;
            let row = json!({
                "p": g.p(), "S": s, "rho": format_rational(rho), "shift": shift, "coeffs": c,
                "octuples": cert.tuples, "octuple_pass": cert.pass, "ap_pass": ap.pass,
                "exhaustive": cert.exhaustive && ap.exhaustive,
            });
            Ok((row, cert.pass && cert.exhaustive, !cert.pass || ap.pass))
        })
        .collect();
    for r in results {
        let (row, pass, implied) = r?;
        let tag = || row.to_string();
        checks.record("omh-planted-quadratic", pass, tag);
        checks.record("omh-ap-implied", implied, tag);
        rows.push(row);
    }
    // The cubic a³/p fails on a genuinely two-sided domain.
    if gs.iter().any(|g| g.p() == 31) {
        let g = PrimeGroup::new(31)?;
        let dom = BohrSet::new(FrequencySet::from_residues(g, &[1])?, Rational::new(3, 10))?;
        let phi = LocalPhase::polynomial(dom, Arity::Quadratic, &[0, 0, 0, 1])?;
        let cert = validate_phase(&phi, None)?;
        checks.record(
            "omh-cubic-fails",
            !cert.pass && cert.max_defect > Rational::new(0, 1),
            || {
                format!(
                    "cubic certificate pass={} defect={}",
                    cert.pass,
                    format_rational(&cert.max_defect)
                )
            },
        );
        rows.push(json!({
            "p": 31, "S": [1], "rho": "3/10", "coeffs": [0, 0, 0, 1], "octuples": cert.tuples,
            "octuple_pass": cert.pass, "max_defect": format_rational(&cert.max_defect),
        }));
    }
    Ok(checks.finish("omh", constants([("primes", format!("{primes:?}"))]), rows))
}

// ---------------------------------------------------------------------------
// Derivative frequency map

/// Radii `(ρ₀, ρ₁, ρ₂)` of the map check.
pub fn dfm_radii() -> [Rational; 3] {
    [
        Rational::new(2, 5),
        Rational::new(1, 20),
        Rational::new(1, 50),
    ]
}

pub const DFM_ETA: f64 = 0.5;
pub const DFM_THRESHOLDS: [f64; 4] = [0.0, 1.0, 8.0, f64::INFINITY];

pub fn dfm(primes: &[u64]) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    check_odd(&gs)?;
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for g in gs {
        for (alpha, beta) in [(1u64, 0u64), (3, 0), (g.p() / 2, 5)] {
            let f = GroupFunction::quadratic_phase(g, alpha, beta);
            let freqs = FrequencySet::from_residues(g, &[1])?;
            let map =
                derivative_frequency_map(&f, &freqs, dfm_radii(), DFM_ETA, &MapOptions::default())?;
            let tag = || format!("p={} alpha={alpha} beta={beta}", g.p());
            let wrong: Vec<u64> = map
                .omega
                .iter()
                .copied()
                .filter(|&n2| map.xi(n2) != g.mul(g.mul(2, alpha), n2))
                .collect();
            checks.record(
                "dfm-recovers-2alpha",
                wrong.is_empty() && !map.omega.is_empty(),
                || format!("{} wrong={wrong:?}", tag()),
            );
            checks.record("dfm-omega-mass", map.omega_mass >= DFM_ETA / 4.0, || {
                format!("{} mass={}", tag(), fmt_f64(map.omega_mass))
            });
            let mut bads = Vec::new();
            for t in DFM_THRESHOLDS {
                let audit = quadruple_audit(&map, &freqs, t, Mode::exact())?;
                checks.record("dfm-audit-bad-zero", audit.bad_fraction == 0.0, || {
                    format!(
                        "{} threshold={} bad={}",
                        tag(),
                        fmt_f64(t),
                        fmt_f64(audit.bad_fraction)
                    )
                });
                bads.push(json!({
                    "threshold": fmt_f64(t), "bad": fmt_f64(audit.bad_fraction),
                    "omega4": fmt_f64(audit.omega4_fraction), "max_defect_norm": audit.max_defect_norm,
                    "exact": audit.exact,
                }));
            }
            rows.push(json!({
                "p": g.p(), "alpha": alpha, "beta": beta, "omega": map.omega.len(),
                "omega_mass": fmt_f64(map.omega_mass), "measured_u3": fmt_f64(map.measured_u3),
                "audits": bads,
            }));
        }
    }
    let rs = dfm_radii();
    let consts = constants([
        ("eta", fmt_f64(DFM_ETA)),
        (
            "radii",
            rs.iter().map(format_rational).collect::<Vec<_>>().join(","),
        ),
    ]);
    Ok(checks.finish("dfm", consts, rows))
}

// ---------------------------------------------------------------------------
// Toy Khintchine driver and the r₄ harness

/// Planted quadratic plus noise, with the plant drawn from `seed`.
pub fn planted_instance(g: PrimeGroup, index: usize, seed: u64) -> (u64, u64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g.p() << 32) ^ index as u64);
    let alpha = rng.gen_range(1..g.p());
    let beta = rng.gen_range(0..g.p());
    let f = planted_quadratic(g, alpha, beta, 0.5, 0.4, 0.1, rng.gen());
    (alpha, beta, f)
}

pub fn khintchine(primes: &[u64], per_prime: usize, seed: u64) -> Result<SuiteReport> {
    let gs = groups(primes)?;
    check_odd(&gs)?;
    let params = ToyParams::default();
    let step_cap = params.max_energy_steps() + 10;
    let work: Vec<(PrimeGroup, usize)> = gs
        .iter()
        .flat_map(|&g| (0..per_prime).map(move |i| (g, i)))
        .collect();
    let runs: Vec<_> = work
        .par_iter()
        .map(|&(g, i)| {
            let (alpha, beta, f) = planted_instance(g, i, seed);
            (g, i, alpha, beta, iteration_driver(&f, g, &params))
        })
        .collect();
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for (g, i, alpha, beta, result) in runs {
        let tag = || format!("p={} index={i} alpha={alpha} beta={beta}", g.p());
        checks.record("driver-terminates", result.is_ok(), || {
            format!(
                "{} error={}",
                tag(),
                result
                    .as_ref()
                    .err()
                    .map(|e| e.to_string())
                    .unwrap_or_default()
            )
        });
        let Ok((cert, trace)) = result else { continue };
        checks.record("steps-within-bound", trace.steps.len() <= step_cap, || {
            format!("{} steps={}", tag(), trace.steps.len())
        });
        checks.record("recurrence", cert.recurrence_holds, || {
            format!(
                "{} lambda={} bound={}",
                tag(),
                fmt_f64(cert.lambda_f),
                fmt_f64(cert.recurrence_bound)
            )
        });
        checks.record("energy-decreases", trace.decrements_hold(), tag);
        checks.record("r-zero-thin", cert.thick_holds, || {
            format!(
                "{} P(r=0)={} threshold={}",
                tag(),
                cert.p_r_zero,
                cert.thickness_threshold
            )
        });
        checks.record("certificate", cert.all_hold(), tag);
        rows.push(json!({
            "p": g.p(), "index": i, "alpha": alpha, "beta": beta, "steps": trace.steps.len(),
            "outcome": cert.outcome, "lambda_f": fmt_f64(cert.lambda_f),
            "recurrence_bound": fmt_f64(cert.recurrence_bound), "p_r_zero": cert.p_r_zero,
            "thickness_threshold": cert.thickness_threshold, "all_hold": cert.all_hold(),
        }));
    }
    let consts = constants([
        ("eta", fmt_f64(params.eta)),
        ("delta_e", fmt_f64(params.delta_e)),
        ("step_cap", step_cap.to_string()),
    ]);
    Ok(checks.finish("khintchine", consts, rows))
}

pub fn r4(n: u64) -> Result<SuiteReport> {
    let a = greedy_ap_free(n);
    let report = r4_harness(n, &a, &ToyParams::default())?;
    let mut checks = Checks::default();
    checks.record("ap-free", report.ap_free, || {
        format!("integer AP {:?}", report.integer_ap)
    });
    checks.record("scans-agree", report.scans_agree, || {
        format!(
            "integer {:?} modular {:?}",
            report.integer_ap, report.modular_ap
        )
    });
    let consistent = report.chain.as_ref().is_some_and(|c| c.consistent);
    checks.record("chain-consistent", consistent, || {
        format!("chain {:?}", report.chain)
    });
    let consts = constants([("N", n.to_string()), ("p", report.p.to_string())]);
    let row = serde_json::to_value(&report).map_err(|e| Error::invalid("report", e.to_string()))?;
    Ok(checks.finish("r4", consts, vec![row]))
}
