use gblab_core::inverse::{quadruple_audit, MapOptions, Method, U2Setup};
use gblab_core::khintchine::{planted_quadratic, run_driver, NoDimensionOracle, ToyEnergyOracle};
use gblab_core::{
    cauchy_form, complement_torus, derivative_frequency_map, dft, dual_norm, idft, lambda4,
    regular_pmf, u2_local, word_norm, BohrSet, DilatedTorus, DualFrequency, FrequencySet,
    GroupFunction, JointSampler, Mode, PrimeGroup, Rational, ToyParams,
};
use num_complex::Complex64;
use num_traits::{One, Zero};
use proptest::prelude::*;

const SMALL: [u64; 6] = [7, 11, 13, 17, 19, 23];

fn small_prime() -> impl Strategy<Value = u64> {
    proptest::sample::select(SMALL.to_vec())
}

fn setup(p: u64, raw: &[u64]) -> (PrimeGroup, Vec<u64>) {
    let g = PrimeGroup::new(p).unwrap();
    let mut s: Vec<u64> = raw.iter().map(|x| 1 + x % (p - 1)).collect();
    s.sort_unstable();
    s.dedup();
    (g, s)
}

fn radius() -> impl Strategy<Value = Rational> {
    (1i64..=8, 2i64..=16).prop_filter_map("radius in (0, 1/2]", |(n, d)| {
        let r = Rational::new(n, d);
        (r <= Rational::new(1, 2)).then_some(r)
    })
}

fn complex_values(p: u64) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), p as usize)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_are_subadditive(p in small_prime(), raw in proptest::collection::vec(any::<u64>(), 1..=2),
                             a in any::<u64>(), b in any::<u64>(), k in -5i64..=5) {
        let (g, s) = setup(p, &raw);
        let (a, b) = (a % p, b % p);
        let ab = g.add(a, b);
        let ka = g.reduce(k * a as i64);
        let dn = |x| dual_norm(x, &s, g).unwrap();
        let wn = |x| word_norm(x, &s, g).unwrap();
        prop_assert!(dn(ab) <= dn(a) + dn(b));
        prop_assert!(dn(ka) <= Rational::from_integer(k.abs()) * dn(a));
        prop_assert!(wn(ab) <= wn(a) + wn(b));
        prop_assert!(wn(ka) as i64 <= k.abs() * wn(a) as i64);
    }

    #[test]
    fn word_and_dual_norm_duality(p in small_prime(), raw in proptest::collection::vec(any::<u64>(), 1..=2),
                                  n in any::<u64>(), l in any::<u64>()) {
        let (g, s) = setup(p, &raw);
        let (n, l) = (n % p, l % p);
        let nl = g.mul(n, l) as i64;
        let circle = Rational::new(nl.min(p as i64 - nl), p as i64);
        let bound = dual_norm(n, &s, g).unwrap() * Rational::from_integer(word_norm(l, &s, g).unwrap() as i64);
        prop_assert!(circle <= bound);
    }

    #[test]
    fn bohr_membership_is_the_dual_norm(p in small_prime(), raw in proptest::collection::vec(any::<u64>(), 1..=3),
                                        rho in radius(), a in any::<u64>()) {
        let (g, s) = setup(p, &raw);
        let b = BohrSet::new(FrequencySet::from_residues(g, &s).unwrap(), rho).unwrap();
        let a = a % p;
        prop_assert_eq!(b.contains(a), dual_norm(a, &s, g).unwrap() < rho);
        prop_assert!(b.contains(0));
        prop_assert_eq!(b.contains(a), b.contains(g.neg(a)));
    }

    #[test]
    fn regular_pmf_is_a_symmetric_law_on_the_set(p in small_prime(),
                                                 raw in proptest::collection::vec(any::<u64>(), 1..=2),
                                                 rho in radius()) {
        let (g, s) = setup(p, &raw);
        let b = BohrSet::new(FrequencySet::from_residues(g, &s).unwrap(), rho).unwrap();
        let pmf = regular_pmf(&b).unwrap();
        prop_assert!(pmf.pmf().total().is_one());
        for a in g.elements() {
            let m = pmf.mass(a);
            prop_assert_eq!(&m, &pmf.mass(g.neg(a)));
            prop_assert!(m.is_zero() || b.contains(a));
            prop_assert!(m <= pmf.crude_mass_bound());
        }
    }

    #[test]
    fn parseval_and_inversion(p in small_prime(), values in complex_values(23)) {
        let g = PrimeGroup::new(p).unwrap();
        let f = GroupFunction::new(g, values[..p as usize].to_vec()).unwrap();
        let s = dft(&f);
        let energy: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / p as f64;
        let spectral: f64 = s.coefficients().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((energy - spectral).abs() < 1e-9);
        let back = idft(&s);
        for (x, y) in back.values().iter().zip(f.values()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn cauchy_form_dominates_fourth_power_of_mean(p in proptest::sample::select(vec![31u64, 37, 101]),
                                                  vals in proptest::collection::vec(-1.0f64..1.0, 101)) {
        let g = PrimeGroup::new(p).unwrap();
        let f = &vals[..p as usize];
        let mean = f.iter().sum::<f64>() / p as f64;
        prop_assert!(cauchy_form(f, g).unwrap() >= mean.powi(4) - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lambda4_is_multilinear(p in proptest::sample::select(vec![31u64, 37]),
                              vals in proptest::collection::vec(-1.0f64..1.0, 5 * 37),
                              c in -2.0f64..2.0, slot in 0usize..4) {
        let g = PrimeGroup::new(p).unwrap();
        let fs = FrequencySet::new(g, &[1]).unwrap();
        let law = |r| regular_pmf(&BohrSet::new(fs.clone(), r).unwrap()).unwrap().to_float();
        let j = JointSampler::independent(vec![law(Rational::new(2, 5)), law(Rational::new(1, 10))]).unwrap();
        let n = p as usize;
        let part = |k: usize| vals[k * n..(k + 1) * n].to_vec();
        let (x, y) = (part(0), part(4));
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + c * b).collect();
        let rest = [part(1), part(2), part(3)];
        let with = |v: &[f64]| {
            let mut slots: Vec<&[f64]> = rest.iter().map(Vec::as_slice).collect();
            slots.insert(slot, v);
            lambda4([slots[0], slots[1], slots[2], slots[3]], &j, Mode::exact()).unwrap().value
        };
        prop_assert!((with(&mix) - with(&x) - c * with(&y)).abs() < 1e-9);
    }

    #[test]
    fn local_u2_ignores_modulation(p in proptest::sample::select(vec![31u64, 37, 41]),
                                   values in complex_values(41), xi in any::<u64>()) {
        let g = PrimeGroup::new(p).unwrap();
        let f = GroupFunction::new(g, values[..p as usize].to_vec()).unwrap();
        let e = GroupFunction::linear_phase(g, xi % p);
        let fe = GroupFunction::from_fn(g, |n| f.at(n) * e.at(n));
        let setup = U2Setup::new(&FrequencySet::new(g, &[1, 3]).unwrap(), Rational::new(2, 5), Rational::new(1, 10)).unwrap();
        let j = setup.sampler();
        let a = u2_local(&f, &j, Mode::exact()).unwrap().value;
        let b = u2_local(&fe, &j, Mode::exact()).unwrap().value;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn fft_correlations_match_direct_evaluation(p in proptest::sample::select(vec![31u64, 101, 211]),
                                                values in complex_values(211)) {
        let g = PrimeGroup::new(p).unwrap();
        let setup = U2Setup::new(&FrequencySet::new(g, &[1]).unwrap(), Rational::new(2, 5), Rational::new(1, 20)).unwrap();
        let f = &values[..p as usize];
        let fast = setup.correlations(f, Method::Fft);
        let slow = setup.correlations(f, Method::Exhaustive);
        let max = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!((max(&fast) - max(&slow)).abs() < 1e-9);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn complement_map_is_a_homomorphism(lambdas in proptest::collection::vec(1.0f64..10.0, 2..=4),
                                        m in proptest::collection::vec(-5i64..=5, 4),
                                        q in proptest::collection::vec((0i64..64, 0i64..64), 4)) {
        let d = lambdas.len();
        let m = m[..d].to_vec();
        let gcd = m.iter().fold(0i64, |a, &b| num_integer::gcd(a, b));
        prop_assume!(gcd == 1);
        let t = DilatedTorus::new(lambdas).unwrap();
        let k = DualFrequency::new(t.clone(), m).unwrap();
        let c = complement_torus(&t, &k).unwrap();
        let n = c.dim();
        let x: Vec<Rational> = q[..n].iter().map(|&(a, _)| Rational::new(a, 64)).collect();
        let y: Vec<Rational> = q[..n].iter().map(|&(_, b)| Rational::new(b, 64)).collect();
        let sum: Vec<Rational> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (px, py, ps) = (c.psi_rational(&x).unwrap(), c.psi_rational(&y).unwrap(), c.psi_rational(&sum).unwrap());
        for i in 0..n {
            let s = px[i] + py[i];
            prop_assert_eq!(ps[i], s - s.floor());
        }
        // ψ∘ψ⁻¹ = id on G', up to a period.
        let periods = c.torus.lambdas().to_vec();
        let target: Vec<f64> = periods.iter().zip(&px).map(|(l, f)| l * (*f.numer() as f64 / *f.denom() as f64)).collect();
        let back = c.psi(&c.psi_inv(&target).unwrap()).unwrap();
        for ((b, t), l) in back.iter().zip(&target).zip(&periods) {
            let gap = (b - t).rem_euclid(*l);
            prop_assert!(gap.min(l - gap) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn audit_is_monotone_and_exact_on_quadratics(p in proptest::sample::select(vec![101u64, 211]),
                                                 alpha in 1u64..50, beta in 0u64..50) {
        let g = PrimeGroup::new(p).unwrap();
        let fs = FrequencySet::new(g, &[1]).unwrap();
        let f = GroupFunction::quadratic_phase(g, alpha, beta);
        let opts = MapOptions { separation: 0.5, method: Method::Fft, mode: Mode::default() };
        let radii = [Rational::new(2, 5), Rational::new(1, 20), Rational::new(1, 50)];
        let map = derivative_frequency_map(&f, &fs, radii, 0.5, &opts).unwrap();
        for e in &map.entries {
            prop_assert_eq!(e.xi, g.mul(2 * alpha % p, e.n2));
        }
        let mut last = f64::INFINITY;
        for t in [0.0, 1.0, 4.0, 16.0] {
            let a = quadruple_audit(&map, &fs, t, Mode::default()).unwrap();
            prop_assert!(a.bad_fraction <= last);
            prop_assert_eq!(a.bad_fraction, 0.0);
            last = a.bad_fraction;
        }
    }

    #[test]
    fn driver_ledger_and_clamp(p in proptest::sample::select(vec![101u64, 211]), alpha in 1u64..100,
                               seed in any::<u64>()) {
        let g = PrimeGroup::new(p).unwrap();
        let f = planted_quadratic(g, alpha % p, 0, 0.5, 0.4, 0.1, seed);
        let params = ToyParams::default();
        let run = run_driver(&f, g, &params, &ToyEnergyOracle, &NoDimensionOracle).unwrap();
        prop_assert!(run.trace.decrements_hold());
        prop_assert!(run.trace.edges_hold());
        for s in &run.trace.steps {
            prop_assert!(s.clamp_monotone);
        }
        if let Some(c) = run.certificate {
            prop_assert!(c.ledger_holds);
            prop_assert!(c.recurrence_holds);
        }
    }
}
