//! Structured local approximants, their statistics, a brute-force energy
//! decrement, the iteration driver and the r₄ harness.
//!
//! Every label `c ∈ Z/pZ` carries the cell `c + B({1}, 1)`. Given `c`, `a` is a
//! regular draw from `c + B({1}, 1/2)` and `r` a regular draw from
//! `B({1}, shrink)`. The approximant on cell `c` is `F_c(Ξ_c(a))`, where
//! `F_c` is a clamped cosine sum on a dilated torus `G_c` and `Ξ_c` has one
//! global quadratic coordinate per layer.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bohr::{BohrSet, FrequencySet};
use crate::error::{Error, Result};
use crate::gowers::{lambda4_kernel, JointSampler, LabelLaw};
use crate::group::{find_prime_in, PrimeGroup};
use crate::pmf::{regular_pmf, ExactPmf, FloatPmf, RegularPmf};
use crate::rational::{f64_to_big, format_big, Rational};
use crate::report::as_decimal;
use crate::spectral::{character_table, ForwardFft};
use crate::torus::{torus_norm, validate_phase, Arity, DilatedTorus, LocalPhase, SampleBudget};

/// Ties in the phase search are resolved towards the smallest `(α, β)` within this.
const TIE_TOL: f64 = 1e-12;
/// Each new layer gets a period making its own Lipschitz share at most this.
const LAYER_LIPSCHITZ: f64 = 0.9;
/// Older periods are stretched by this factor whenever a layer is added.
const CONTRACTION: f64 = 100.0;

/// Toy replacements for the constants of the iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyParams {
    pub eta: f64,
    /// Radius factor of the `r` cells.
    #[serde(with = "crate::rational::as_fraction")]
    pub shrink: Rational,
    /// Declared minimum energy drop of one decrement.
    pub delta_e: f64,
    /// Threshold in the loop conditions; `eta` when absent.
    pub loop_eta: Option<f64>,
    /// Maximum number of steps.
    pub budget: usize,
    pub c2: f64,
    pub c3: f64,
    pub c5: f64,
    /// Sampled tuples per quadratic-phase and Lipschitz check.
    pub validation_draws: usize,
    pub seed: u64,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams {
            eta: 0.2,
            shrink: Rational::new(1, 10),
            delta_e: 0.01,
            loop_eta: None,
            budget: 100,
            c2: 1.0,
            c3: 4.0,
            c5: 2.0,
            validation_draws: 256,
            seed: 0,
        }
    }
}

impl ToyParams {
    pub fn loop_threshold(&self) -> f64 {
        self.loop_eta.unwrap_or(self.eta)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid("eta", "must lie in (0, 1)"));
        }
        if !(self.shrink > Rational::zero() && self.shrink < Rational::from_integer(1)) {
            return Err(Error::invalid("shrink", "must lie in (0, 1)"));
        }
        if !(self.delta_e > 0.0 && self.delta_e.is_finite()) {
            return Err(Error::invalid("delta_e", "must be positive"));
        }
        if let Some(l) = self.loop_eta {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid("loop_eta", "must be positive"));
            }
        }
        Ok(())
    }

    /// `⌈4/δ_E⌉`.
    pub fn max_energy_steps(&self) -> usize {
        (4.0 / self.delta_e).ceil() as usize
    }

    /// `⌈4/δ_E⌉ + Σ_{j=0}^{⌈4/δ_E⌉−1} (j+1)`.
    pub fn accounting_bound(&self) -> usize {
        let e = self.max_energy_steps();
        e + e * (e + 1) / 2
    }
}

/// One cosine term `γ cos(2π(x/λ))` of `F_c`, with coordinate `(αa²+βa)/p − θ/2π` of `Ξ_c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Layer {
    pub alpha: u64,
    pub beta: u64,
    #[serde(with = "as_decimal")]
    pub gamma: f64,
    #[serde(with = "as_decimal")]
    pub theta: f64,
    #[serde(with = "as_decimal")]
    pub period: f64,
}

impl Layer {
    /// The coordinate in `R/Z` before dilation.
    fn unit_coordinate(&self, g: PrimeGroup, a: u64) -> f64 {
        let q = g.add(g.mul(self.alpha, g.mul(a, a)), g.mul(self.beta, a));
        (q as f64 / g.p() as f64 - self.theta / TAU).rem_euclid(1.0)
    }

    fn wave(&self, g: PrimeGroup, a: u64) -> f64 {
        (TAU * self.unit_coordinate(g, a)).cos()
    }
}

fn clamp1(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// A shifted Bohr cell with its torus, phase and function.
#[derive(Clone, Debug)]
pub struct Cell {
    base: BohrSet,
    layers: Vec<Layer>,
}

impl Cell {
    pub fn base(&self) -> &BohrSet {
        &self.base
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers.len()
    }

    pub fn torus(&self) -> DilatedTorus {
        DilatedTorus::new(self.layers.iter().map(|l| l.period).collect())
            .expect("periods are at least 1")
    }

    pub fn log_volume(&self) -> f64 {
        self.layers.iter().map(|l| l.period.ln()).sum()
    }

    /// `Ξ_c(a) ∈ G_c`.
    pub fn phase_point(&self, g: PrimeGroup, a: u64) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| l.period * l.unit_coordinate(g, a))
            .collect()
    }

    /// `F_c(x)`, folding the layers as nested clamps.
    pub fn function(&self, x: &[f64]) -> f64 {
        self.layers.iter().zip(x).fold(0.0, |acc, (l, xi)| {
            clamp1(acc + l.gamma * (TAU * xi / l.period).cos())
        })
    }

    /// `F_c(Ξ_c(a))`.
    pub fn value(&self, g: PrimeGroup, a: u64) -> f64 {
        self.layers
            .iter()
            .fold(0.0, |acc, l| clamp1(acc + l.gamma * l.wave(g, a)))
    }

    /// `Σ 2π|γⱼ|/λⱼ`, a Lipschitz constant of `F_c` for the torus metric.
    pub fn lipschitz_certificate(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| TAU * l.gamma.abs() / l.period)
            .sum()
    }

    /// Largest observed `|F(x)−F(y)| / (L·‖x−y‖)` over random nearby pairs; at most 1
    /// when the certificate `L` is valid.
    pub fn sampled_lipschitz_ratio(&self, draws: usize, seed: u64) -> f64 {
        let torus = self.torus();
        let cert = self.lipschitz_certificate();
        if self.layers.is_empty() || cert == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for k in 0..draws {
            let x: Vec<f64> = self
                .layers
                .iter()
                .map(|l| rng.gen::<f64>() * l.period)
                .collect();
            let scale = 10f64.powi(-((k % 6) as i32));
            let y: Vec<f64> = x
                .iter()
                .map(|v| v + scale * (rng.gen::<f64>() - 0.5))
                .collect();
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dist = torus_norm(&torus, &diff).unwrap_or(0.0);
            if dist > 1e-15 {
                let ratio = (self.function(&x) - self.function(&y)).abs() / (cert * dist);
                worst = worst.max(ratio);
            }
        }
        worst
    }

    fn push(&mut self, layer: Layer) {
        for l in &mut self.layers {
            l.period *= CONTRACTION;
        }
        self.layers.push(layer);
    }
}

/// The approximant `v` together with the induced laws of `(a, r)` and the values `f_v`.
#[derive(Clone, Debug)]
pub struct Approximant {
    group: PrimeGroup,
    shrink: Rational,
    cells: Vec<Cell>,
    a_exact: RegularPmf,
    r_exact: RegularPmf,
    a_laws: Vec<FloatPmf>,
    r_law: FloatPmf,
    values: Vec<Vec<f64>>,
    validated: BTreeSet<(u64, u64)>,
}

impl Approximant {
    pub fn group(&self) -> PrimeGroup {
        self.group
    }

    pub fn shrink(&self) -> Rational {
        self.shrink
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn labels(&self) -> usize {
        self.cells.len()
    }

    /// Every label has mass `1/p`.
    pub fn weight(&self) -> f64 {
        1.0 / self.cells.len() as f64
    }

    pub fn a_law(&self, c: usize) -> &FloatPmf {
        &self.a_laws[c]
    }

    pub fn r_law(&self, _c: usize) -> &FloatPmf {
        &self.r_law
    }

    /// `f_v` restricted to label `c`, densely over Z/pZ.
    pub fn values(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    /// `(c, a, r)` as a [`JointSampler`] with slots `[a, r]`.
    pub fn joint_sampler(&self) -> Result<JointSampler> {
        let w = self.weight();
        JointSampler::labelled(
            self.a_laws
                .iter()
                .map(|a| LabelLaw {
                    weight: w,
                    slots: vec![a.clone(), self.r_law.clone()],
                })
                .collect(),
        )
    }

    /// Exact law of `a` with the label marginalised.
    pub fn a_marginal_exact(&self) -> ExactPmf {
        let g = self.group;
        let n = BigRational::from_integer(BigInt::from(self.cells.len()));
        let mut dense = vec![BigRational::zero(); g.order()];
        for cell in &self.cells {
            let c = cell.base.shift();
            for (x, m) in self.a_exact.pmf().iter() {
                dense[g.add(x, c) as usize] += m;
            }
        }
        ExactPmf::new(
            g,
            dense
                .into_iter()
                .enumerate()
                .filter(|(_, m)| !m.is_zero())
                .map(|(x, m)| (x as u64, m / &n))
                .collect(),
        )
    }

    /// Exact `P(r = 0)`.
    pub fn p_r_zero(&self) -> BigRational {
        let n = BigRational::from_integer(BigInt::from(self.cells.len()));
        let total: BigRational = self.cells.iter().map(|_| self.r_exact.mass(0)).sum();
        total / n
    }

    /// `1/((shrink·ρ/2)^{|S|} p)`, the toy thickness threshold.
    pub fn thickness_threshold(&self) -> BigRational {
        self.r_exact.crude_mass_bound()
    }
}

/// Labels `Z/pZ` uniform, cells `c + B({1}, 1)` on the point torus, `F_c ≡ 0`.
///
/// The cell shift is the label itself so that `a` is exactly uniform.
pub fn initial_approximant(group: PrimeGroup, shrink: Rational) -> Result<Approximant> {
    if !(shrink > Rational::zero() && shrink <= Rational::from_integer(1)) {
        return Err(Error::invalid("shrink", "must lie in (0, 1]"));
    }
    let freqs = FrequencySet::from_residues(group, &[1])?;
    let whole = BohrSet::new(freqs.clone(), Rational::from_integer(1))?;
    let a_exact = regular_pmf(&BohrSet::new(freqs.clone(), Rational::new(1, 2))?)?;
    let r_exact = regular_pmf(&BohrSet::new(freqs, shrink)?)?;
    let a_float = a_exact.to_float();
    let cells: Vec<Cell> = group
        .elements()
        .map(|c| Cell {
            base: whole.clone().shifted(c),
            layers: Vec::new(),
        })
        .collect();
    let a_laws = group.elements().map(|c| a_float.translate(c)).collect();
    Ok(Approximant {
        group,
        shrink,
        values: vec![vec![0.0; group.order()]; cells.len()],
        cells,
        r_law: r_exact.to_float(),
        a_exact,
        r_exact,
        a_laws,
        validated: BTreeSet::new(),
    })
}

/// Statistics of `(v, f)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproximantStats {
    #[serde(with = "as_decimal")]
    pub waste: f64,
    #[serde(with = "as_decimal")]
    pub err1: f64,
    #[serde(with = "as_decimal")]
    pub err4: f64,
    #[serde(with = "as_decimal")]
    pub energy: f64,
    pub d1: usize,
    pub d2: usize,
    pub d2poor: usize,
    #[serde(with = "as_decimal")]
    pub rho_min: f64,
    #[serde(with = "as_decimal")]
    pub vol_max: f64,
    #[serde(with = "as_decimal")]
    pub log_vol_max: f64,
    /// Uniform mean of `f`.
    #[serde(with = "as_decimal")]
    pub mean_f: f64,
    /// `E f(a)`.
    #[serde(with = "as_decimal")]
    pub mean_fa: f64,
    /// `E f_v(a)`.
    #[serde(with = "as_decimal")]
    pub mean_fv: f64,
    /// `Λ_{a,r}(f)`.
    #[serde(with = "as_decimal")]
    pub lambda_f: f64,
    /// `Λ_{a,r}(f_v)`.
    #[serde(with = "as_decimal")]
    pub lambda_fv: f64,
}

impl ApproximantStats {
    /// `err1 > t` or `err4 > t`.
    pub fn badly_approximated(&self, t: f64) -> bool {
        self.err1 > t || self.err4 > t
    }

    /// `Λ(f_v) ≤ (E f_v(a))⁴ − t`.
    pub fn lower(&self, t: f64) -> bool {
        self.lambda_fv <= self.mean_fv.powi(4) - t
    }
}

fn check_values(g: PrimeGroup, f: &[f64], lo: f64) -> Result<()> {
    if f.len() != g.order() {
        return Err(Error::DimensionMismatch {
            expected: g.order(),
            found: f.len(),
        });
    }
    if let Some(x) = f.iter().find(|x| !(**x >= lo && **x <= 1.0)) {
        return Err(Error::invalid("f", format!("value {x} outside [{lo}, 1]")));
    }
    Ok(())
}

struct LabelSums {
    f: f64,
    fv: f64,
    energy: f64,
    lambda_f: f64,
    lambda_fv: f64,
}

/// Exhaustive statistics; `eta` enters only the poor-distribution test.
pub fn approximant_stats(v: &Approximant, f: &[f64], eta: f64) -> Result<ApproximantStats> {
    let g = v.group;
    check_values(g, f, -1.0)?;
    let per: Vec<LabelSums> = (0..v.labels())
        .into_par_iter()
        .map(|c| {
            let a = &v.a_laws[c];
            let fv = &v.values[c];
            let (mut sf, mut sfv, mut en) = (0.0, 0.0, 0.0);
            for &(x, m) in a.atoms() {
                let (y, z) = (f[x as usize], fv[x as usize]);
                sf += m * y;
                sfv += m * z;
                en += m * (y - z) * (y - z);
            }
            LabelSums {
                f: sf,
                fv: sfv,
                energy: en,
                lambda_f: lambda4_kernel(g, a, &v.r_law, [f, f, f, f]),
                lambda_fv: lambda4_kernel(g, a, &v.r_law, [fv, fv, fv, fv]),
            }
        })
        .collect();
    let w = v.weight();
    let mut s = LabelSums {
        f: 0.0,
        fv: 0.0,
        energy: 0.0,
        lambda_f: 0.0,
        lambda_fv: 0.0,
    };
    let mut d2poor = 0;
    for (l, cell) in per.iter().zip(&v.cells) {
        s.f += w * l.f;
        s.fv += w * l.fv;
        s.energy += w * l.energy;
        s.lambda_f += w * l.lambda_f;
        s.lambda_fv += w * l.lambda_fv;
        if l.lambda_fv < l.fv.powi(4) - eta / 2.0 {
            d2poor = d2poor.max(cell.dim());
        }
    }
    let mean_f = f.iter().sum::<f64>() / g.order() as f64;
    let log_vol_max = v.cells.iter().map(Cell::log_volume).fold(0.0f64, f64::max);
    Ok(ApproximantStats {
        waste: (s.f - mean_f).abs(),
        err1: (s.fv - s.f).abs(),
        err4: (s.lambda_fv - s.lambda_f).abs(),
        energy: s.energy,
        d1: v.cells.iter().map(|c| c.base.rank()).max().unwrap_or(0),
        d2: v.cells.iter().map(Cell::dim).max().unwrap_or(0),
        d2poor,
        rho_min: v
            .cells
            .iter()
            .map(|c| c.base.rho().to_f64().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min),
        vol_max: log_vol_max.exp(),
        log_vol_max,
        mean_f,
        mean_fa: s.f,
        mean_fv: s.fv,
        lambda_f: s.lambda_f,
        lambda_fv: s.lambda_fv,
    })
}

/// `Λ_{a,r}(f)` with `r` restricted to the event `r = 0`.
pub fn lambda_at_zero_shift(v: &Approximant, f: &[f64]) -> f64 {
    let g = v.group;
    let zero = FloatPmf::new(
        g,
        v.r_law
            .atoms()
            .iter()
            .copied()
            .filter(|(x, _)| *x == 0)
            .collect(),
    );
    let w = v.weight();
    v.a_laws
        .iter()
        .map(|a| w * lambda4_kernel(g, a, &zero, [f, f, f, f]))
        .sum()
}

/// The `(α, β)` maximising `|E(g(a) e_p(αa²+βa))|` under `law`, lexicographically
/// smallest among near-ties, with the correlation itself.
pub fn best_quadratic_phase(law: &FloatPmf, g_vals: &[f64]) -> (u64, u64, Complex64) {
    let group = law.group();
    let p = group.p();
    let n = group.order();
    let chars = character_table(p);
    let sq: Vec<u64> = group.elements().map(|a| group.mul(a, a)).collect();
    let mut fft = ForwardFft::new(n);
    let mut buf = vec![Complex64::default(); n];
    let mut mags = vec![0.0f64; n * n];
    for alpha in 0..p {
        buf.iter_mut().for_each(|z| *z = Complex64::default());
        for &(a, m) in law.atoms() {
            let k = group.mul(alpha, sq[a as usize]);
            buf[a as usize] = chars[k as usize] * (m * g_vals[a as usize]);
        }
        fft.process(&mut buf);
        // buf[k] = Σ_a w(a) e(−ka/p), so β corresponds to k = −β.
        let row = &mut mags[alpha as usize * n..(alpha as usize + 1) * n];
        for (beta, slot) in row.iter_mut().enumerate() {
            *slot = buf[(n - beta) % n].norm();
        }
    }
    let best = mags.iter().copied().fold(0.0f64, f64::max);
    let idx = mags.iter().position(|&m| m >= best - TIE_TOL).unwrap_or(0);
    let (alpha, beta) = ((idx / n) as u64, (idx % n) as u64);
    (alpha, beta, quadratic_correlation(law, g_vals, alpha, beta))
}

/// `E(g(a) e_p(αa²+βa))` by direct summation.
pub fn quadratic_correlation(law: &FloatPmf, g_vals: &[f64], alpha: u64, beta: u64) -> Complex64 {
    let group = law.group();
    let p = group.p() as f64;
    law.atoms()
        .iter()
        .map(|&(a, m)| {
            let q = group.add(group.mul(alpha, group.mul(a, a)), group.mul(beta, a));
            Complex64::from_polar(m * g_vals[a as usize], TAU * q as f64 / p)
        })
        .sum()
}

/// The `γ ∈ [0, 1]` minimising `Σ P(a)(f(a) − clamp(v(a) + γu(a)))²`, with its energy.
///
/// Each point leaves `[−1, 1]` at most once, so the objective is a quadratic
/// between consecutive exit times and the exact minimiser is found by a sweep.
pub fn clamped_line_search(atoms: &[(u64, f64)], f: &[f64], v: &[f64], u: &[f64]) -> (f64, f64) {
    let (mut qa, mut qb, mut qc, mut k) = (0.0, 0.0, 0.0, 0.0);
    let mut events: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for &(x, m) in atoms {
        let i = x as usize;
        let (fi, vi, ui) = (f[i], v[i], u[i]);
        let g = fi - vi;
        if ui == 0.0 {
            qc += m * g * g;
            continue;
        }
        let bound = if ui > 0.0 { 1.0 } else { -1.0 };
        let t = (bound - vi) / ui;
        if t <= 0.0 {
            k += m * (fi - bound) * (fi - bound);
            continue;
        }
        qa += m * ui * ui;
        qb += m * g * ui;
        qc += m * g * g;
        if t < 1.0 {
            events.push((t, m, g, ui, (fi - bound) * (fi - bound)));
        }
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let energy = |gamma: f64, qa: f64, qb: f64, qc: f64, k: f64| {
        (qc - 2.0 * gamma * qb + gamma * gamma * qa + k).max(0.0)
    };
    let mut best = (0.0, energy(0.0, qa, qb, qc, k));
    let mut lo = 0.0;
    let consider = |lo: f64, hi: f64, qa: f64, qb: f64, qc: f64, k: f64, best: &mut (f64, f64)| {
        let cand = if qa > 0.0 {
            (qb / qa).clamp(lo, hi)
        } else if qb > 0.0 {
            hi
        } else {
            lo
        };
        let e = energy(cand, qa, qb, qc, k);
        if e < best.1 {
            *best = (cand, e);
        }
    };
    for &(t, m, g, ui, clamped) in &events {
        consider(lo, t, qa, qb, qc, k, &mut best);
        qa -= m * ui * ui;
        qb -= m * g * ui;
        qc -= m * g * g;
        k += m * clamped;
        lo = t;
    }
    consider(lo, 1.0, qa, qb, qc, k, &mut best);
    best
}

/// The layer added to one label.
#[derive(Clone, Debug, Serialize)]
pub struct LayerRecord {
    pub label: u64,
    pub alpha: u64,
    pub beta: u64,
    #[serde(with = "as_decimal")]
    pub correlation: f64,
    #[serde(with = "as_decimal")]
    pub gamma: f64,
}

/// Result of one energy decrement.
#[derive(Clone, Debug)]
pub struct Decrement {
    pub approximant: Approximant,
    pub layers: Vec<LayerRecord>,
    pub best_correlation: f64,
    pub clamp_monotone: bool,
    pub phases_checked: usize,
    pub phases_valid: bool,
    pub lipschitz_max: f64,
    pub lipschitz_sampled_ok: bool,
}

/// Adds, on every label, the best quadratic cosine of the residual with an
/// exactly line-searched step, clamped into `[−1, 1]`.
///
/// The achieved drop is judged by the driver against `δ_E`.
pub fn toy_energy_decrement(v: &Approximant, f: &[f64], params: &ToyParams) -> Result<Decrement> {
    params.check()?;
    let g = v.group;
    check_values(g, f, -1.0)?;
    let stats = approximant_stats(v, f, params.eta)?;
    let t = params.loop_threshold();
    if !stats.badly_approximated(t) {
        return Err(Error::PreconditionNotMet(format!(
            "err1 = {} and err4 = {} are both at most {t}",
            stats.err1, stats.err4
        )));
    }
    type Found = (u64, u64, Complex64, f64, bool);
    let found: Vec<Found> = (0..v.labels())
        .into_par_iter()
        .map(|c| {
            let law = &v.a_laws[c];
            let fv = &v.values[c];
            let resid: Vec<f64> = f.iter().zip(fv).map(|(x, y)| x - y).collect();
            let (alpha, beta, corr) = best_quadratic_phase(law, &resid);
            let theta = corr.arg();
            let probe = Layer {
                alpha,
                beta,
                gamma: 0.0,
                theta,
                period: 1.0,
            };
            let u: Vec<f64> = g.elements().map(|a| probe.wave(g, a)).collect();
            let (gamma, _) = clamped_line_search(law.atoms(), f, fv, &u);
            let monotone = law.atoms().iter().all(|&(a, _)| {
                let i = a as usize;
                let raw = fv[i] + gamma * u[i];
                (f[i] - clamp1(raw)).abs() <= (f[i] - raw).abs()
            });
            (alpha, beta, corr, gamma, monotone)
        })
        .collect();

    let mut next = v.clone();
    let mut layers = Vec::new();
    let mut best_correlation = 0.0f64;
    let mut clamp_monotone = true;
    for (c, &(alpha, beta, corr, gamma, monotone)) in found.iter().enumerate() {
        best_correlation = best_correlation.max(corr.norm());
        clamp_monotone &= monotone;
        if gamma <= 0.0 {
            continue;
        }
        let layer = Layer {
            alpha,
            beta,
            gamma,
            theta: corr.arg(),
            period: (TAU * gamma / LAYER_LIPSCHITZ).max(1.0),
        };
        let vals = &mut next.values[c];
        for a in g.elements() {
            let i = a as usize;
            vals[i] = clamp1(vals[i] + layer.gamma * layer.wave(g, a));
        }
        next.cells[c].push(layer);
        layers.push(LayerRecord {
            label: c as u64,
            alpha,
            beta,
            correlation: corr.norm(),
            gamma,
        });
    }

    let fresh: BTreeSet<(u64, u64)> = layers
        .iter()
        .map(|l| (l.alpha, l.beta))
        .filter(|k| !next.validated.contains(k))
        .collect();
    let domain = BohrSet::new(
        FrequencySet::from_residues(g, &[1])?,
        Rational::from_integer(1),
    )?;
    let mut phases_valid = true;
    for (i, &(alpha, beta)) in fresh.iter().enumerate() {
        let phi = LocalPhase::polynomial(domain.clone(), Arity::Quadratic, &[0, beta, alpha])?;
        let cert = validate_phase(
            &phi,
            Some(SampleBudget {
                draws: params.validation_draws,
                seed: params.seed.wrapping_add(i as u64),
            }),
        )?;
        phases_valid &= cert.pass;
        next.validated.insert((alpha, beta));
    }

    let touched: BTreeSet<u64> = layers.iter().map(|l| l.label).collect();
    let mut lipschitz_max = 0.0f64;
    let mut lipschitz_sampled_ok = true;
    for cell in &next.cells {
        lipschitz_max = lipschitz_max.max(cell.lipschitz_certificate());
    }
    // Sampling every cell is wasteful; the touched ones with the most layers suffice.
    if let Some(&c) = touched
        .iter()
        .max_by_key(|&&c| (next.cells[c as usize].dim(), std::cmp::Reverse(c)))
    {
        let ratio =
            next.cells[c as usize].sampled_lipschitz_ratio(params.validation_draws, params.seed);
        lipschitz_sampled_ok = ratio <= 1.0 + 1e-9;
    }

    Ok(Decrement {
        approximant: next,
        layers,
        best_correlation,
        clamp_monotone,
        phases_checked: fresh.len(),
        phases_valid,
        lipschitz_max,
        lipschitz_sampled_ok,
    })
}

/// The toy inequalities bounding one edge `v → v'`.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeCheck {
    pub d1_growth: bool,
    pub d2_growth: bool,
    pub rho_shrink: bool,
    pub vol_growth: bool,
    pub waste_drift: bool,
}

impl EdgeCheck {
    pub fn new(before: &ApproximantStats, after: &ApproximantStats, params: &ToyParams) -> Self {
        let eta = params.eta;
        EdgeCheck {
            d1_growth: after.d1 as f64 <= before.d1 as f64 + eta.powf(-params.c2),
            d2_growth: after.d2 <= before.d2 + 1,
            rho_shrink: after.rho_min >= (-eta.powf(-params.c5)).exp() * before.rho_min,
            vol_growth: after.log_vol_max <= before.log_vol_max + eta.powf(-params.c3),
            waste_drift: (after.waste - before.waste).abs() <= eta.powf(params.c3),
        }
    }

    pub fn holds(&self) -> bool {
        self.d1_growth && self.d2_growth && self.rho_shrink && self.vol_growth && self.waste_drift
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    EnergyDecrement,
    DimensionDecrement,
    Terminal,
}

/// One line of the trace.
#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub index: usize,
    pub kind: StepKind,
    pub before: ApproximantStats,
    pub after: Option<ApproximantStats>,
    #[serde(with = "as_decimal")]
    pub delta: f64,
    #[serde(with = "as_decimal")]
    pub declared_delta: f64,
    pub edge: Option<EdgeCheck>,
    pub edge_holds: bool,
    pub layers_added: usize,
    #[serde(with = "as_decimal")]
    pub best_correlation: f64,
    pub clamp_monotone: bool,
    pub phases_valid: bool,
    #[serde(with = "as_decimal")]
    pub lipschitz_max: f64,
    pub lipschitz_sampled_ok: bool,
    pub note: Option<String>,
}

impl TraceStep {
    fn bare(index: usize, kind: StepKind, before: ApproximantStats, params: &ToyParams) -> Self {
        TraceStep {
            index,
            kind,
            before,
            after: None,
            delta: 0.0,
            declared_delta: params.delta_e,
            edge: None,
            edge_holds: true,
            layers_added: 0,
            best_correlation: 0.0,
            clamp_monotone: true,
            phases_valid: true,
            lipschitz_max: 0.0,
            lipschitz_sampled_ok: true,
            note: None,
        }
    }
}

/// Exact telescoping of the recorded energies.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub initial: Option<BigRational>,
    pub deltas: Vec<BigRational>,
    pub after: Vec<BigRational>,
}

impl EnergyLedger {
    fn record(&mut self, before: f64, after: f64) {
        let (b, a) = (f64_to_big(before), f64_to_big(after));
        if self.initial.is_none() {
            self.initial = Some(b.clone());
        }
        self.deltas.push(&b - &a);
        self.after.push(a);
    }

    /// Energy after step `k` equals the initial energy minus the first `k` deltas.
    pub fn holds(&self) -> bool {
        let Some(init) = &self.initial else {
            return true;
        };
        let mut running = init.clone();
        self.deltas.iter().zip(&self.after).all(|(d, a)| {
            running -= d;
            running == *a
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub poor_observed: bool,
    pub dimension_demanded: bool,
    pub ledger: EnergyLedger,
}

impl IterationTrace {
    pub fn energy_steps(&self) -> usize {
        self.count(StepKind::EnergyDecrement)
    }

    pub fn dimension_steps(&self) -> usize {
        self.count(StepKind::DimensionDecrement)
    }

    fn count(&self, k: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == k).count()
    }

    /// One JSON object per step.
    pub fn to_json_lines(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("trace serialises") + "\n")
            .collect()
    }

    /// Every decrement dropped the energy by at least the declared amount.
    pub fn decrements_hold(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| s.kind == StepKind::EnergyDecrement)
            .all(|s| s.delta >= s.declared_delta && s.delta > 0.0)
    }

    pub fn edges_hold(&self) -> bool {
        self.steps.iter().all(|s| s.edge_holds)
    }
}

/// Pluggable energy-decrement step.
pub trait EnergyOracle: Sync {
    fn decrement(&self, v: &Approximant, f: &[f64], params: &ToyParams) -> Result<Decrement>;
}

/// Pluggable dimension-decrement step.
pub trait DimensionOracle: Sync {
    fn decrement(&self, v: &Approximant, f: &[f64], params: &ToyParams) -> Result<Approximant>;
}

/// [`toy_energy_decrement`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyEnergyOracle;

impl EnergyOracle for ToyEnergyOracle {
    fn decrement(&self, v: &Approximant, f: &[f64], params: &ToyParams) -> Result<Decrement> {
        toy_energy_decrement(v, f, params)
    }
}

/// Always [`Error::UnimplementedStep`].
#[derive(Clone, Copy, Debug, Default)]
pub struct NoDimensionOracle;

impl DimensionOracle for NoDimensionOracle {
    fn decrement(&self, _: &Approximant, _: &[f64], _: &ToyParams) -> Result<Approximant> {
        Err(Error::UnimplementedStep)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// No loop condition holds.
    Terminal,
    /// The decrement fell short of `δ_E`; the run stops with a certificate anyway.
    NoCorrelation,
    BudgetExhausted,
    Unimplemented,
}

/// The three numerical conclusions at the final approximant plus the bookkeeping checks.
#[derive(Clone, Debug, Serialize)]
pub struct KhintchineCertificate {
    pub p: u64,
    #[serde(with = "as_decimal")]
    pub eta: f64,
    #[serde(with = "as_decimal")]
    pub loop_eta: f64,
    pub outcome: Outcome,
    #[serde(with = "as_decimal")]
    pub mean_f: f64,
    #[serde(with = "as_decimal")]
    pub mean_fa: f64,
    #[serde(with = "as_decimal")]
    pub waste: f64,
    /// `|E f(a) − mean f| ≤ η`.
    pub near_uniform_holds: bool,
    #[serde(with = "as_decimal")]
    pub lambda_f: f64,
    /// `(E f(a))⁴ − η`.
    #[serde(with = "as_decimal")]
    pub recurrence_bound: f64,
    pub recurrence_holds: bool,
    pub p_r_zero: String,
    pub thickness_threshold: String,
    pub thick_holds: bool,
    pub steps: usize,
    pub energy_steps: usize,
    pub dimension_steps: usize,
    pub accounting_bound: usize,
    pub accounting_holds: bool,
    pub ledger_holds: bool,
    pub decrements_hold: bool,
    pub edges_hold: bool,
    pub clamp_monotone: bool,
    pub phases_valid: bool,
    #[serde(with = "as_decimal")]
    pub lipschitz_max: f64,
    pub poor_observed: bool,
    pub dimension_demanded: bool,
    pub final_stats: ApproximantStats,
}

impl KhintchineCertificate {
    /// The three conclusions hold.
    pub fn conclusions_hold(&self) -> bool {
        self.near_uniform_holds && self.recurrence_holds && self.thick_holds
    }

    /// Conclusions plus every bookkeeping check.
    pub fn all_hold(&self) -> bool {
        self.conclusions_hold()
            && self.accounting_holds
            && self.ledger_holds
            && self.decrements_hold
            && self.edges_hold
            && self.clamp_monotone
            && self.phases_valid
            && self.lipschitz_max <= 1.0
    }
}

pub struct DriverRun {
    pub outcome: Outcome,
    pub trace: IterationTrace,
    pub certificate: Option<KhintchineCertificate>,
    pub approximant: Approximant,
}

fn certify(
    v: &Approximant,
    stats: &ApproximantStats,
    trace: &IterationTrace,
    outcome: Outcome,
    params: &ToyParams,
) -> KhintchineCertificate {
    let p_r_zero = v.p_r_zero();
    let threshold = v.thickness_threshold();
    let energy_steps = trace.energy_steps();
    let dimension_steps = trace.dimension_steps();
    let steps = energy_steps + dimension_steps;
    let bound = stats.mean_fa.powi(4) - params.eta;
    let chain = |s: &TraceStep| s.kind == StepKind::EnergyDecrement;
    KhintchineCertificate {
        p: v.group.p(),
        eta: params.eta,
        loop_eta: params.loop_threshold(),
        outcome,
        mean_f: stats.mean_f,
        mean_fa: stats.mean_fa,
        waste: stats.waste,
        near_uniform_holds: stats.waste <= params.eta,
        lambda_f: stats.lambda_f,
        recurrence_bound: bound,
        recurrence_holds: stats.lambda_f >= bound,
        thick_holds: p_r_zero <= threshold,
        p_r_zero: format_big(&p_r_zero),
        thickness_threshold: format_big(&threshold),
        steps,
        energy_steps,
        dimension_steps,
        accounting_bound: params.accounting_bound(),
        accounting_holds: energy_steps <= params.max_energy_steps()
            && steps <= params.accounting_bound(),
        ledger_holds: trace.ledger.holds(),
        decrements_hold: trace.decrements_hold(),
        edges_hold: trace.edges_hold(),
        clamp_monotone: trace
            .steps
            .iter()
            .filter(|s| chain(s))
            .all(|s| s.clamp_monotone),
        phases_valid: trace
            .steps
            .iter()
            .all(|s| s.phases_valid && s.lipschitz_sampled_ok),
        lipschitz_max: v
            .cells
            .iter()
            .map(Cell::lipschitz_certificate)
            .fold(0.0, f64::max),
        poor_observed: trace.poor_observed,
        dimension_demanded: trace.dimension_demanded,
        final_stats: stats.clone(),
    }
}

/// Runs the loop from the initial approximant; always returns the trace.
pub fn run_driver(
    f: &[f64],
    group: PrimeGroup,
    params: &ToyParams,
    energy: &dyn EnergyOracle,
    dimension: &dyn DimensionOracle,
) -> Result<DriverRun> {
    params.check()?;
    check_values(group, f, 0.0)?;
    let t = params.loop_threshold();
    let mut v = initial_approximant(group, params.shrink)?;
    let mut trace = IterationTrace::default();
    let mut index = 0;
    let outcome = loop {
        let stats = approximant_stats(&v, f, params.eta)?;
        trace.poor_observed |= stats.d2poor > 0;
        let bad = stats.badly_approximated(t);
        let lower = stats.lower(t);
        if !bad && !lower {
            trace
                .steps
                .push(TraceStep::bare(index, StepKind::Terminal, stats, params));
            break Outcome::Terminal;
        }
        if index >= params.budget {
            let mut s = TraceStep::bare(index, StepKind::Terminal, stats, params);
            s.note = Some(format!("budget of {} steps exhausted", params.budget));
            trace.steps.push(s);
            break Outcome::BudgetExhausted;
        }
        if bad {
            let d = energy.decrement(&v, f, params)?;
            let after = approximant_stats(&d.approximant, f, params.eta)?;
            let delta = stats.energy - after.energy;
            if delta < params.delta_e {
                let mut s = TraceStep::bare(index, StepKind::Terminal, stats, params);
                s.best_correlation = d.best_correlation;
                s.note = Some(
                    Error::NoCorrelationFound {
                        best: d.best_correlation,
                        achieved: delta,
                    }
                    .to_string(),
                );
                trace.steps.push(s);
                break Outcome::NoCorrelation;
            }
            let edge = EdgeCheck::new(&stats, &after, params);
            trace.ledger.record(stats.energy, after.energy);
            let mut s = TraceStep::bare(index, StepKind::EnergyDecrement, stats, params);
            s.edge_holds = edge.holds();
            s.edge = Some(edge);
            s.after = Some(after);
            s.delta = delta;
            s.layers_added = d.layers.len();
            s.best_correlation = d.best_correlation;
            s.clamp_monotone = d.clamp_monotone;
            s.phases_valid = d.phases_valid;
            s.lipschitz_max = d.lipschitz_max;
            s.lipschitz_sampled_ok = d.lipschitz_sampled_ok;
            trace.steps.push(s);
            v = d.approximant;
        } else {
            trace.dimension_demanded = true;
            match dimension.decrement(&v, f, params) {
                Ok(next) => {
                    let after = approximant_stats(&next, f, params.eta)?;
                    let edge = EdgeCheck::new(&stats, &after, params);
                    trace.ledger.record(stats.energy, after.energy);
                    let mut s = TraceStep::bare(index, StepKind::DimensionDecrement, stats, params);
                    s.delta = s.before.energy - after.energy;
                    s.edge_holds = edge.holds() && after.d2poor < s.before.d2poor.max(1);
                    s.edge = Some(edge);
                    s.after = Some(after);
                    trace.steps.push(s);
                    v = next;
                }
                Err(Error::UnimplementedStep) => {
                    let mut s = TraceStep::bare(index, StepKind::Terminal, stats, params);
                    s.note = Some("dimension decrement demanded but not implemented".into());
                    trace.steps.push(s);
                    break Outcome::Unimplemented;
                }
                Err(e) => return Err(e),
            }
        }
        index += 1;
    };
    let certificate = match outcome {
        Outcome::Terminal | Outcome::NoCorrelation => {
            let stats = trace.steps.last().expect("non-empty").before.clone();
            Some(certify(&v, &stats, &trace, outcome, params))
        }
        _ => None,
    };
    Ok(DriverRun {
        outcome,
        trace,
        certificate,
        approximant: v,
    })
}

/// [`run_driver`] with the toy oracles, failing on budget exhaustion or a
/// demanded dimension decrement.
pub fn iteration_driver(
    f: &[f64],
    group: PrimeGroup,
    params: &ToyParams,
) -> Result<(KhintchineCertificate, IterationTrace)> {
    let run = run_driver(f, group, params, &ToyEnergyOracle, &NoDimensionOracle)?;
    match run.outcome {
        Outcome::BudgetExhausted => Err(Error::BudgetExhausted {
            budget: params.budget,
        }),
        Outcome::Unimplemented => Err(Error::UnimplementedStep),
        _ => Ok((
            run.certificate.expect("terminal runs carry a certificate"),
            run.trace,
        )),
    }
}

/// Smallest `(a, r)` with `a, a+r, a+2r, a+3r ∈ A ⊆ [1, N]`, `r ≥ 1`.
pub fn integer_four_ap(n: u64, a: &[u64]) -> Option<(u64, u64)> {
    let mut member = vec![false; n as usize + 1];
    for &x in a {
        member[x as usize] = true;
    }
    let mut sorted: Vec<u64> = a.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &x in &sorted {
        for r in 1..=(n.saturating_sub(x)) / 3 {
            if (1..4).all(|k| member[(x + k * r) as usize]) {
                return Some((x, r));
            }
        }
    }
    None
}

/// Smallest `(a, r)` with `r ≠ 0` and `f(a)f(a+r)f(a+2r)f(a+3r) ≠ 0` in Z/pZ.
pub fn modular_four_ap(group: PrimeGroup, f: &[f64]) -> Option<(u64, u64)> {
    for a in group.elements() {
        if f[a as usize] == 0.0 {
            continue;
        }
        for r in 1..group.p() {
            let hit = (1..4).all(|k| f[group.add(a, group.mul(k, r)) as usize] != 0.0);
            if hit {
                return Some((a, r));
            }
        }
    }
    None
}

/// Greedy 4-AP-free subset of `[1, N]`.
pub fn greedy_ap_free(n: u64) -> Vec<u64> {
    let mut member = vec![false; n as usize + 1];
    let mut out = Vec::new();
    for x in 1..=n {
        let closes = (1..=(x - 1) / 3).any(|r| (1..4).all(|k| member[(x - k * r) as usize]));
        if !closes {
            member[x as usize] = true;
            out.push(x);
        }
    }
    out
}

/// Links of `(|A|/p − waste)⁴ − η ≤ (E f(a))⁴ − η ≤ Λ(f) = Λ_{r=0}(f) ≤ P(r=0) ≤ threshold`.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityChain {
    #[serde(with = "as_decimal")]
    pub density_term: f64,
    #[serde(with = "as_decimal")]
    pub recurrence_bound: f64,
    #[serde(with = "as_decimal")]
    pub lambda_f: f64,
    #[serde(with = "as_decimal")]
    pub lambda_zero_shift: f64,
    #[serde(with = "as_decimal")]
    pub p_r_zero: f64,
    #[serde(with = "as_decimal")]
    pub thickness_threshold: f64,
    pub density_link: bool,
    pub recurrence_link: bool,
    /// Only asserted when `A` is AP-free.
    pub zero_shift_link: bool,
    pub mass_link: bool,
    pub thickness_link: bool,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct R4Report {
    pub n: u64,
    pub p: u64,
    pub size: usize,
    #[serde(with = "as_decimal")]
    pub density_n: f64,
    #[serde(with = "as_decimal")]
    pub density_p: f64,
    pub integer_ap: Option<(u64, u64)>,
    pub modular_ap: Option<(u64, u64)>,
    pub scans_agree: bool,
    pub ap_free: bool,
    pub finding: String,
    pub outcome: Outcome,
    pub certificate: Option<KhintchineCertificate>,
    pub chain: Option<InequalityChain>,
}

/// Embeds `1_A` into Z/pZ with `p ∈ [2N, 4N]`, scans for 4-APs and runs the driver.
pub fn r4_harness(n: u64, a: &[u64], params: &ToyParams) -> Result<R4Report> {
    if n == 0 {
        return Err(Error::invalid("N", "must be positive"));
    }
    if let Some(x) = a.iter().find(|&&x| x == 0 || x > n) {
        return Err(Error::invalid("A", format!("{x} is not in [1, {n}]")));
    }
    let group = find_prime_in(2 * n, 4 * n)?;
    let mut f = vec![0.0; group.order()];
    for &x in a {
        f[x as usize] = 1.0;
    }
    let size = f.iter().filter(|&&x| x != 0.0).count();
    let integer_ap = integer_four_ap(n, a);
    let modular_ap = modular_four_ap(group, &f);
    let ap_free = integer_ap.is_none() && modular_ap.is_none();
    let finding = match integer_ap.or(modular_ap) {
        Some((x, r)) => format!("A contains a 4-AP at (a, r) = ({x}, {r})"),
        None => "A is 4-AP-free".into(),
    };
    let run = run_driver(&f, group, params, &ToyEnergyOracle, &NoDimensionOracle)?;
    let density_p = size as f64 / group.p() as f64;
    let chain = run.certificate.as_ref().map(|cert| {
        let lambda_zero_shift = lambda_at_zero_shift(&run.approximant, &f);
        let p_r_zero = run.approximant.p_r_zero().to_f64().unwrap_or(f64::NAN);
        let threshold = run
            .approximant
            .thickness_threshold()
            .to_f64()
            .unwrap_or(f64::NAN);
        let density_term = (density_p - cert.waste).max(0.0).powi(4) - params.eta;
        let density_link = density_term <= cert.recurrence_bound;
        let recurrence_link = cert.recurrence_holds;
        let zero_shift_link = !ap_free || cert.lambda_f == lambda_zero_shift;
        let mass_link = lambda_zero_shift <= p_r_zero;
        let thickness_link = cert.thick_holds;
        InequalityChain {
            density_term,
            recurrence_bound: cert.recurrence_bound,
            lambda_f: cert.lambda_f,
            lambda_zero_shift,
            p_r_zero,
            thickness_threshold: threshold,
            density_link,
            recurrence_link,
            zero_shift_link,
            mass_link,
            thickness_link,
            consistent: density_link
                && recurrence_link
                && zero_shift_link
                && mass_link
                && thickness_link,
        }
    });
    Ok(R4Report {
        n,
        p: group.p(),
        size,
        density_n: size as f64 / n as f64,
        density_p,
        scans_agree: integer_ap.is_some() == modular_ap.is_some(),
        integer_ap,
        modular_ap,
        ap_free,
        finding,
        outcome: run.outcome,
        certificate: run.certificate,
        chain,
    })
}

/// `clamp(c + amp·cos(2π(αa²+βa)/p)) + noise`, clamped into `[0, 1]`.
pub fn planted_quadratic(
    group: PrimeGroup,
    alpha: u64,
    beta: u64,
    center: f64,
    amp: f64,
    noise: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = group.p() as f64;
    group
        .elements()
        .map(|a| {
            let q = group.add(group.mul(alpha, group.mul(a, a)), group.mul(beta, a));
            let x =
                center + amp * (TAU * q as f64 / p).cos() + noise * (rng.gen::<f64>() * 2.0 - 1.0);
            x.clamp(0.0, 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn g(p: u64) -> PrimeGroup {
        PrimeGroup::new(p).unwrap()
    }

    fn signed_wave(group: PrimeGroup, alpha: u64, beta: u64, amp: f64) -> Vec<f64> {
        let p = group.p();
        group
            .elements()
            .map(|a| amp * (TAU * ((alpha * a * a + beta * a) % p) as f64 / p as f64).cos())
            .collect()
    }

    #[test]
    fn initial_stats() {
        let group = g(31);
        let v = initial_approximant(group, Rational::new(1, 10)).unwrap();
        let m = v.a_marginal_exact();
        let third = BigRational::new(BigInt::one(), BigInt::from(31));
        assert!(group.elements().all(|a| m.mass(a) == third));
        let f: Vec<f64> = (0..31).map(|a| ((a * 7) % 5) as f64 / 4.0).collect();
        let s = approximant_stats(&v, &f, 0.2).unwrap();
        assert!(s.waste < 1e-12);
        assert_eq!((s.d1, s.d2, s.d2poor), (1, 0, 0));
        assert_eq!((s.rho_min, s.vol_max), (1.0, 1.0));
        let e2 = f.iter().map(|x| x * x).sum::<f64>() / 31.0;
        assert!((s.energy - e2).abs() < 1e-12);
        assert!((s.err1 - s.mean_f).abs() < 1e-12);
        assert!(v.p_r_zero() <= v.thickness_threshold());
    }

    #[test]
    fn search_matches_direct_correlation() {
        let group = g(13);
        let v = initial_approximant(group, Rational::new(1, 4)).unwrap();
        let f = signed_wave(group, 3, 5, 1.0);
        let law = v.a_law(2);
        let (alpha, beta, corr) = best_quadratic_phase(law, &f);
        assert_eq!((alpha, beta), (group.neg(3), group.neg(5)).min((3, 5)));
        let mut best = 0.0f64;
        for a in 0..13 {
            for b in 0..13 {
                best = best.max(quadratic_correlation(law, &f, a, b).norm());
            }
        }
        assert!((corr.norm() - best).abs() < 1e-12);
    }

    #[test]
    fn line_search_exact_on_grid() {
        let group = g(11);
        let v = initial_approximant(group, Rational::new(1, 4)).unwrap();
        let law = v.a_law(0);
        let f: Vec<f64> = (0..11).map(|a| a as f64 / 10.0).collect();
        let fv: Vec<f64> = (0..11)
            .map(|a| if a % 2 == 0 { 0.9 } else { -0.3 })
            .collect();
        let u: Vec<f64> = (0..11).map(|a| ((a * 3) as f64).cos()).collect();
        let (gamma, e) = clamped_line_search(law.atoms(), &f, &fv, &u);
        let energy = |t: f64| {
            law.atoms()
                .iter()
                .map(|&(a, m)| {
                    let i = a as usize;
                    m * (f[i] - clamp1(fv[i] + t * u[i])).powi(2)
                })
                .sum::<f64>()
        };
        assert!((energy(gamma) - e).abs() < 1e-12);
        for k in 0..=1000 {
            assert!(energy(k as f64 / 1000.0) >= e - 1e-12);
        }
    }

    #[test]
    fn constant_functions() {
        let group = g(31);
        let params = ToyParams::default();
        let (cert, trace) = iteration_driver(&vec![0.1; 31], group, &params).unwrap();
        assert_eq!(trace.energy_steps(), 0);
        assert!(cert.all_hold());
        let (cert, trace) = iteration_driver(&vec![0.7; 31], group, &params).unwrap();
        assert_eq!(trace.energy_steps(), 1);
        assert!(cert.final_stats.err1 < 1e-9 && cert.final_stats.energy < 1e-9);
        assert!(cert.all_hold());
    }

    #[test]
    fn planted_phase_is_found() {
        let group = g(53);
        let mut params = ToyParams::default();
        let f = signed_wave(group, 7, 4, 0.9);
        params.loop_eta = Some(1e-6);
        let v = initial_approximant(group, params.shrink).unwrap();
        let d = toy_energy_decrement(&v, &f, &params).unwrap();
        assert!(d
            .layers
            .iter()
            .all(|l| (l.alpha, l.beta) == (7, 4) || (l.alpha, l.beta) == (46, 49)));
        let before = approximant_stats(&v, &f, params.eta).unwrap();
        let after = approximant_stats(&d.approximant, &f, params.eta).unwrap();
        assert!(after.energy < before.energy);
        assert!(d.clamp_monotone && d.phases_valid && d.lipschitz_sampled_ok);
        assert!(d.lipschitz_max <= 1.0);
        let c = &d.approximant.cells()[5];
        for a in 0..53 {
            let x = c.phase_point(group, a);
            assert!((c.function(&x) - c.value(group, a)).abs() < 1e-9);
            assert_eq!(d.approximant.values(5)[a as usize], c.value(group, a));
        }
    }

    #[test]
    fn planted_driver_certifies() {
        let group = g(101);
        let params = ToyParams::default();
        let f = planted_quadratic(group, 5, 17, 0.5, 0.4, 0.1, 3);
        let (cert, trace) = iteration_driver(&f, group, &params).unwrap();
        assert!(cert.all_hold(), "{cert:?}");
        assert!(trace.decrements_hold() && trace.ledger.holds());
        assert!(trace.to_json_lines().lines().count() == trace.steps.len());
    }

    #[test]
    fn budget_zero() {
        let group = g(31);
        let params = ToyParams {
            budget: 0,
            ..ToyParams::default()
        };
        assert!(matches!(
            iteration_driver(&vec![0.7; 31], group, &params),
            Err(Error::BudgetExhausted { budget: 0 })
        ));
    }

    #[test]
    fn greedy_and_scans() {
        let a = greedy_ap_free(50);
        assert!(integer_four_ap(50, &a).is_none());
        let full: Vec<u64> = (1..=10).collect();
        assert_eq!(integer_four_ap(10, &full), Some((1, 1)));
        let r = r4_harness(
            20,
            &a.iter().copied().filter(|&x| x <= 20).collect::<Vec<_>>(),
            &ToyParams::default(),
        )
        .unwrap();
        assert!(r.ap_free && r.scans_agree);
        assert!(r.chain.unwrap().consistent);
    }
}
