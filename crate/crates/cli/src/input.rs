//! Function inputs: CSV files and generator specs.

use std::collections::BTreeMap;
use std::path::Path;

use gblab_core::khintchine::planted_quadratic;
use gblab_core::{parse_rational, GroupFunction, PrimeGroup, Rational};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fail::{CliResult, Failure};

pub fn rational(arg: &str, s: &str) -> CliResult<Rational> {
    parse_rational(s).map_err(|e| Failure::from(e).about(arg))
}

/// Comma-separated integers, possibly negative.
pub fn int_list(arg: &str, s: &str) -> CliResult<Vec<i64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Failure::invalid(arg, format!("not an integer: {t:?}")))
        })
        .collect()
}

pub fn real_list(arg: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Failure::invalid(arg, format!("not a number: {t:?}")))
        })
        .collect()
}

/// Reads `index,value` or `index,re,im` rows; every residue must appear once.
pub fn read_csv(path: &Path, group: PrimeGroup) -> CliResult<Vec<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let bad =
        |line: usize, msg: &str| Failure::invalid("f", format!("{}:{line}: {msg}", path.display()));
    let mut values = vec![None; group.order()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && cols[0].parse::<u64>().is_err() {
            continue; // header
        }
        if !(2..=3).contains(&cols.len()) {
            return Err(bad(i + 1, "expected index,value or index,re,im"));
        }
        let idx: u64 = cols[0]
            .parse()
            .map_err(|_| bad(i + 1, "index is not a non-negative integer"))?;
        if idx >= group.p() {
            return Err(bad(i + 1, "index outside Z/pZ"));
        }
        let num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());
        let re = num(cols[1]).ok_or_else(|| bad(i + 1, "value is not a finite number"))?;
        let im = match cols.get(2) {
            Some(s) => num(s).ok_or_else(|| bad(i + 1, "imaginary part is not a finite number"))?,
            None => 0.0,
        };
        if values[idx as usize]
            .replace(Complex64::new(re, im))
            .is_some()
        {
            return Err(bad(i + 1, "duplicate index"));
        }
    }
    let missing = values.iter().position(Option::is_none);
    if let Some(m) = missing {
        return Err(Failure::invalid(
            "f",
            format!("{}: no value for index {m}", path.display()),
        ));
    }
    Ok(values.into_iter().map(Option::unwrap).collect())
}

/// A generator spec `kind[:key=value,...]`.
pub struct Generator {
    kind: String,
    params: BTreeMap<String, String>,
}

impl Generator {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = BTreeMap::new();
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Failure::invalid("gen", format!("expected key=value, got {kv:?}"))
            })?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Generator {
            kind: kind.trim().to_string(),
            params,
        })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> CliResult<T> {
        match self.params.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Failure::invalid("gen", format!("bad value for {key}: {v:?}"))),
            None => default
                .ok_or_else(|| Failure::invalid("gen", format!("{} needs {key}=", self.kind))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Failure::invalid(
                "gen",
                format!("{} does not take {k}=", self.kind),
            )),
            None => Ok(()),
        }
    }

    pub fn generate(&self, group: PrimeGroup, seed: u64) -> CliResult<Vec<Complex64>> {
        let p = group.p();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        Ok(match self.kind.as_str() {
            "planted" => {
                self.check_keys(&["alpha", "beta", "center", "amp", "noise"])?;
                let f = planted_quadratic(
                    group,
                    self.get::<u64>("alpha", None)? % p,
                    self.get::<u64>("beta", Some(0))? % p,
                    self.get("center", Some(0.5))?,
                    self.get("amp", Some(0.4))?,
                    self.get("noise", Some(0.1))?,
                    seed,
                );
                real(f)
            }
            "random" => {
                self.check_keys(&["lo", "hi"])?;
                let (lo, hi): (f64, f64) = (self.get("lo", Some(0.0))?, self.get("hi", Some(1.0))?);
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(Failure::invalid("gen", "need lo <= hi"));
                }
                real(group.elements().map(|_| rng.gen_range(lo..=hi)).collect())
            }
            "indicator" => {
                self.check_keys(&["density", "from", "to"])?;
                if self.params.contains_key("density") {
                    let d: f64 = self.get("density", None)?;
                    real(group.elements().map(|_| f64::from(u8::from(rng.gen::<f64>() < d))).collect())
                } else {
                    let (from, to): (u64, u64) = (self.get("from", None)?, self.get("to", None)?);
                    real(group.elements().map(|a| f64::from(u8::from(a >= from && a <= to))).collect())
                }
            }
            "constant" => {
                self.check_keys(&["value"])?;
                let c: f64 = self.get("value", None)?;
                real(vec![c; group.order()])
            }
            "phase" => {
                self.check_keys(&["xi", "alpha", "eps"])?;
                let alpha = self.get::<u64>("alpha", Some(0))? % p;
                let xi = self.get::<u64>("xi", Some(0))? % p;
                let eps: f64 = self.get("eps", Some(0.0))?;
                GroupFunction::quadratic_phase(group, alpha, xi)
                    .values()
                    .iter()
                    .map(|&v| {
                        let r = rng.gen::<f64>().sqrt();
                        let t = rng.gen::<f64>() * std::f64::consts::TAU;
                        v * (1.0 - eps) + Complex64::from_polar(r, t) * eps
                    })
                    .collect()
            }
            other => {
                return Err(Failure::invalid(
                    "gen",
                    format!("unknown generator {other:?}; known: planted, random, indicator, constant, phase"),
                ))
            }
        })
    }
}

/// `--f` or `--gen`, exactly one of them.
pub fn function(
    f: Option<&Path>,
    generator: Option<&str>,
    group: PrimeGroup,
    seed: u64,
) -> CliResult<Vec<Complex64>> {
    match (f, generator) {
        (Some(path), None) => read_csv(path, group),
        (None, Some(spec)) => Generator::parse(spec)?.generate(group, seed),
        (Some(_), Some(_)) => Err(Failure::invalid("f", "give either --f or --gen, not both")),
        (None, None) => Err(Failure::invalid(
            "f",
            "a function is required: --f FILE or --gen SPEC",
        )),
    }
}

/// Real parts, rejecting values with an imaginary component.
pub fn real_values(values: &[Complex64]) -> CliResult<Vec<f64>> {
    match values.iter().position(|v| v.im != 0.0) {
        Some(i) => Err(Failure::invalid("f", format!("value at {i} is not real"))),
        None => Ok(values.iter().map(|v| v.re).collect()),
    }
}
