mod fail;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gblab_core::gowers::lambda4_single;
use gblab_core::inverse::{MapOptions, Method, U2Options, DEFAULT_SEPARATION};
use gblab_core::khintchine::{
    greedy_ap_free, run_driver, NoDimensionOracle, Outcome, ToyEnergyOracle,
};
use gblab_core::pmf::regular_pmf_capped;
use gblab_core::rational::format_rational;
use gblab_core::torus::{validate_ap_identity, Arity, SampleBudget};
use gblab_core::{
    bohr_basis, cauchy_form, complement_torus, derivative_frequency_map, dft, dual_norm,
    fde_report, inverse_u2_local, quadruple_audit, r4_harness, run_suite, u2_local, u3_local,
    validate_phase, word_norm, BohrSet, DilatedTorus, DualFrequency, FrequencySet, GroupFunction,
    JointSampler, LocalPhase, Mode, PrimeGroup, Rational, RunConfig,
};
use serde::Serialize;
use serde_json::{json, Value};

use fail::{CliResult, Failure, EXIT_ASSERTION, EXIT_BUDGET, EXIT_UNIMPLEMENTED};
use input::{int_list, rational, real_list};

#[derive(Parser)]
#[command(
    name = "gblab",
    version,
    about = "Bohr sets, local Gowers norms and energy decrement on Z/pZ"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed and GBLAB_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bohr sets, regular measures and norms.
    #[command(subcommand)]
    Bohr(BohrCmd),
    /// Fourier transforms and dual-frequency exponential sums.
    #[command(subcommand)]
    Spectral(SpectralCmd),
    /// Local Gowers averages.
    #[command(subcommand)]
    Gowers(GowersCmd),
    /// Local inverse theorems.
    #[command(subcommand)]
    Inverse(InverseCmd),
    /// Dilated tori and local phases.
    #[command(subcommand)]
    Torus(TorusCmd),
    /// The energy-decrement iteration.
    #[command(subcommand)]
    Khintchine(KhintchineCmd),
    /// Runs a verification suite and writes its report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BohrArgs {
    #[arg(long)]
    p: u64,
    /// Frequencies, comma separated.
    #[arg(long = "S", allow_hyphen_values = true)]
    s: String,
    #[arg(long)]
    rho: String,
    #[arg(long, default_value_t = 0)]
    shift: u64,
}

#[derive(Subcommand)]
enum BohrCmd {
    /// Lists the members of B(S, rho) + shift.
    Members(BohrArgs),
    /// The regular probability measure on B(S, rho).
    Pmf(BohrArgs),
    /// Word and dual norms of one element.
    Norms {
        #[arg(long)]
        p: u64,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        a: u64,
    },
    /// A lattice basis adapted to B(S, .).
    Basis {
        #[arg(long)]
        p: u64,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
    },
}

#[derive(Args)]
struct FnArgs {
    #[arg(long)]
    p: u64,
    /// CSV with index,value or index,re,im rows.
    #[arg(long)]
    f: Option<PathBuf>,
    /// Generator spec such as planted:alpha=3 or constant:value=0.5.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Subcommand)]
enum SpectralCmd {
    /// Normalised transform, written as CSV xi,re,im.
    Dft(FnArgs),
    /// Dual-frequency exponential sums over B(S, rho).
    Fde {
        #[arg(long)]
        p: u64,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        rho: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
    Auto,
}

#[derive(Args)]
struct ModeArgs {
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
}

#[derive(Subcommand)]
enum GowersCmd {
    /// The four-term progression form over Z/pZ.
    Cauchy(FnArgs),
    /// The local four-term average with a ~ B(S, rho_a), r ~ B(S, rho_r).
    Lambda4 {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        #[arg(long = "rho-a")]
        rho_a: String,
        #[arg(long = "rho-r")]
        rho_r: String,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Local U² average over B(S, rho0) x B(S, rho1).
    U2 {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        /// Two radii, comma separated.
        #[arg(long)]
        rho: String,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Local U³ average over three nested radii.
    U3 {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        /// Three radii, comma separated.
        #[arg(long)]
        rho: String,
        #[command(flatten)]
        mode: ModeArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fft,
    Exhaustive,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fft => Method::Fft,
            MethodArg::Exhaustive => Method::Exhaustive,
        }
    }
}

#[derive(Subcommand)]
enum InverseCmd {
    /// A correlating frequency for a function with large local U² norm.
    U2 {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        /// Two radii, comma separated.
        #[arg(long)]
        rho: String,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_SEPARATION)]
        separation: f64,
        #[arg(long, value_enum, default_value = "fft")]
        method: MethodArg,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Frequencies of the popular derivatives, with optional quadruple audits.
    Map {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long = "S", allow_hyphen_values = true)]
        s: String,
        /// Three radii, comma separated.
        #[arg(long)]
        rho: String,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        separation: f64,
        #[arg(long, value_enum, default_value = "fft")]
        method: MethodArg,
        /// Audit thresholds on the defect word norm, comma separated.
        #[arg(long)]
        audit: Option<String>,
        #[command(flatten)]
        mode: ModeArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ArityArg {
    Linear,
    Quadratic,
}

#[derive(Subcommand)]
enum TorusCmd {
    /// The subtorus annihilated by a dual frequency, with its parametrisation.
    Complement {
        /// Periods, comma separated.
        #[arg(long)]
        lambdas: String,
        /// Numerators of the dual frequency, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        m: String,
    },
    /// Checks a polynomial phase on B(S, rho) + shift.
    Validate {
        #[command(flatten)]
        bohr: BohrArgs,
        /// Coefficients c0,c1,... of the phase polynomial.
        #[arg(long)]
        coeffs: String,
        #[arg(long, value_enum, default_value = "quadratic")]
        arity: ArityArg,
        /// Sampled tuples instead of exhaustive enumeration.
        #[arg(long)]
        draws: Option<usize>,
    },
}

#[derive(Subcommand)]
enum KhintchineCmd {
    /// Runs the iteration on f and writes trace and certificate.
    Run {
        #[command(flatten)]
        func: FnArgs,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long = "delta-e")]
        delta_e: Option<f64>,
        #[arg(long)]
        shrink: Option<String>,
        #[arg(long = "loop-eta")]
        loop_eta: Option<f64>,
    },
    /// Embeds a subset of [1, N] and runs the iteration on its indicator.
    R4 {
        #[arg(long, default_value_t = 50)]
        n: u64,
        /// The set; a greedy progression-free set when absent.
        #[arg(long = "set")]
        set: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    Default,
    Config,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name.
    suite: String,
    /// Primes, comma separated.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Default grids or those in the configuration file.
    #[arg(long, value_enum, default_value = "default")]
    grid: GridArg,
    #[arg(long)]
    ranks: Option<String>,
    /// Radii, comma separated.
    #[arg(long)]
    rho: Option<String>,
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn mode(&self, m: &ModeArgs) -> Mode {
        let (cap, samples, seed) = (self.cfg.term_cap, m.samples, self.cfg.seed);
        match m.mode {
            ModeArg::Exact => Mode::Exact { cap },
            ModeArg::Mc => Mode::MonteCarlo { samples, seed },
            ModeArg::Auto => Mode::Auto { cap, samples, seed },
        }
    }

    /// Writes `text` to `<out>/<name>`, or to stdout.
    fn write(&self, name: &str, text: &str) -> CliResult<()> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
            }
            None => {
                stdout(text);
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("reports serialise") + "\n";
        self.write(name, &text)
    }

    fn group(&self, p: u64) -> CliResult<PrimeGroup> {
        Ok(PrimeGroup::new(p)?)
    }

    fn function(&self, a: &FnArgs) -> CliResult<(PrimeGroup, Vec<num_complex::Complex64>)> {
        let g = self.group(a.p)?;
        let values = input::function(a.f.as_deref(), a.gen.as_deref(), g, self.cfg.seed)?;
        Ok((g, values))
    }
}

fn freqs(g: PrimeGroup, s: &str) -> CliResult<FrequencySet> {
    Ok(FrequencySet::new(g, &int_list("S", s)?)?)
}

fn radii<const N: usize>(s: &str) -> CliResult<[Rational; N]> {
    let v: Vec<Rational> = s
        .split(',')
        .map(|t| rational("rho", t.trim()))
        .collect::<CliResult<_>>()?;
    v.try_into().map_err(|v: Vec<_>| {
        Failure::invalid("rho", format!("expected {N} radii, got {}", v.len()))
    })
}

fn bohr_set(a: &BohrArgs) -> CliResult<(FrequencySet, BohrSet)> {
    let g = PrimeGroup::new(a.p)?;
    let s = freqs(g, &a.s)?;
    let b = BohrSet::new(s.clone(), rational("rho", &a.rho)?)?.shifted(a.shift % a.p);
    Ok((s, b))
}

fn unsigned(arg: &str, s: &str) -> CliResult<Vec<u64>> {
    int_list(arg, s)?
        .into_iter()
        .map(|x| u64::try_from(x).map_err(|_| Failure::invalid(arg, format!("{x} is negative"))))
        .collect()
}

fn bohr(ctx: &Ctx, cmd: &BohrCmd) -> CliResult<i32> {
    match cmd {
        BohrCmd::Members(a) => {
            let (s, b) = bohr_set(a)?;
            let members = b.members_capped(ctx.cfg.enum_cap)?;
            ctx.json(
                "members.json",
                &json!({
                    "p": a.p,
                    "S": s.as_slice(),
                    "rho": a.rho,
                    "shift": a.shift % a.p,
                    "size": members.len(),
                    "members": members,
                }),
            )?;
        }
        BohrCmd::Pmf(a) => {
            if a.shift != 0 {
                return Err(Failure::invalid(
                    "shift",
                    "the regular measure is centred at 0",
                ));
            }
            let (_, b) = bohr_set(a)?;
            ctx.json("pmf.json", &regular_pmf_capped(&b, ctx.cfg.enum_cap)?)?;
        }
        BohrCmd::Norms { p, s, a } => {
            let g = PrimeGroup::new(*p)?;
            let fs = freqs(g, s)?;
            let a = a % p;
            ctx.json(
                "norms.json",
                &json!({
                    "p": p,
                    "S": fs.as_slice(),
                    "a": a,
                    "word": word_norm(a, fs.as_slice(), g)?,
                    "dual": format_rational(&dual_norm(a, fs.as_slice(), g)?),
                }),
            )?;
        }
        BohrCmd::Basis { p, s } => {
            let g = PrimeGroup::new(*p)?;
            ctx.json("basis.json", &bohr_basis(&freqs(g, s)?)?)?;
        }
    }
    Ok(0)
}

fn spectral(ctx: &Ctx, cmd: &SpectralCmd) -> CliResult<i32> {
    match cmd {
        SpectralCmd::Dft(a) => {
            let (g, values) = ctx.function(a)?;
            let spectrum = dft(&GroupFunction::new(g, values)?);
            let mut buf = Vec::new();
            spectrum.write_csv(&mut buf).expect("writing to memory");
            ctx.write("spectrum.csv", &String::from_utf8(buf).expect("ascii csv"))?;
        }
        SpectralCmd::Fde { p, s, rho } => {
            let (_, b) = bohr_set(&BohrArgs {
                p: *p,
                s: s.clone(),
                rho: rho.clone(),
                shift: 0,
            })?;
            ctx.json("fde.json", &fde_report(&b)?)?;
        }
    }
    Ok(0)
}

fn laws(s: &FrequencySet, radii: &[Rational]) -> CliResult<JointSampler> {
    let pmfs = radii
        .iter()
        .map(|&r| Ok(gblab_core::regular_pmf(&BohrSet::new(s.clone(), r)?)?.to_float()))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(JointSampler::independent(pmfs)?)
}

fn gowers(ctx: &Ctx, cmd: &GowersCmd) -> CliResult<i32> {
    match cmd {
        GowersCmd::Cauchy(a) => {
            let (g, values) = ctx.function(a)?;
            let f = input::real_values(&values)?;
            let value = cauchy_form(&f, g)?;
            ctx.json("cauchy.json", &json!({ "p": a.p, "value": value }))?;
        }
        GowersCmd::Lambda4 {
            func,
            s,
            rho_a,
            rho_r,
            mode,
        } => {
            let (g, values) = ctx.function(func)?;
            let f = input::real_values(&values)?;
            let fs = freqs(g, s)?;
            let j = laws(&fs, &[rational("rho-a", rho_a)?, rational("rho-r", rho_r)?])?;
            let est = lambda4_single(&f, &j, ctx.mode(mode))?;
            ctx.json(
                "lambda4.json",
                &json!({ "p": func.p, "S": fs.as_slice(), "estimate": est }),
            )?;
        }
        GowersCmd::U2 { func, s, rho, mode } => {
            let (g, values) = ctx.function(func)?;
            let fs = freqs(g, s)?;
            let [r0, r1] = radii::<2>(rho)?;
            let est = u2_local(
                &GroupFunction::new(g, values)?,
                &laws(&fs, &[r0, r1])?,
                ctx.mode(mode),
            )?;
            ctx.json(
                "u2.json",
                &json!({ "p": func.p, "S": fs.as_slice(), "estimate": est }),
            )?;
        }
        GowersCmd::U3 { func, s, rho, mode } => {
            let (g, values) = ctx.function(func)?;
            let fs = freqs(g, s)?;
            let rs = radii::<3>(rho)?;
            let est = u3_local(
                &GroupFunction::new(g, values)?,
                &laws(&fs, &rs)?,
                ctx.mode(mode),
            )?;
            ctx.json(
                "u3.json",
                &json!({ "p": func.p, "S": fs.as_slice(), "estimate": est }),
            )?;
        }
    }
    Ok(0)
}

fn inverse(ctx: &Ctx, cmd: &InverseCmd) -> CliResult<i32> {
    match cmd {
        InverseCmd::U2 {
            func,
            s,
            rho,
            eta,
            separation,
            method,
            mode,
        } => {
            let (g, values) = ctx.function(func)?;
            let fs = freqs(g, s)?;
            let [r0, r1] = radii::<2>(rho)?;
            let opts = U2Options {
                separation: *separation,
                method: (*method).into(),
                mode: ctx.mode(mode),
            };
            let f = GroupFunction::new(g, values)?;
            let w = inverse_u2_local(&f, &fs, r0, r1, *eta, &opts)?;
            ctx.json("inverse_u2.json", &w)?;
        }
        InverseCmd::Map {
            func,
            s,
            rho,
            eta,
            separation,
            method,
            audit,
            mode,
        } => {
            let (g, values) = ctx.function(func)?;
            let fs = freqs(g, s)?;
            let opts = MapOptions {
                separation: *separation,
                method: (*method).into(),
                mode: ctx.mode(mode),
            };
            let f = GroupFunction::new(g, values)?;
            let map = derivative_frequency_map(&f, &fs, radii::<3>(rho)?, *eta, &opts)?;
            let audits = match audit {
                Some(t) => real_list("audit", t)?
                    .into_iter()
                    .map(|t| Ok(quadruple_audit(&map, &fs, t, opts.mode)?))
                    .collect::<CliResult<Vec<_>>>()?,
                None => Vec::new(),
            };
            ctx.json(
                "frequency_map.json",
                &json!({ "map": map, "audits": audits }),
            )?;
        }
    }
    Ok(0)
}

fn torus(ctx: &Ctx, cmd: &TorusCmd) -> CliResult<i32> {
    match cmd {
        TorusCmd::Complement { lambdas, m } => {
            let t = DilatedTorus::new(real_list("lambdas", lambdas)?)?;
            let k = DualFrequency::new(t.clone(), int_list("m", m)?)?;
            ctx.json("complement.json", &complement_torus(&t, &k)?)?;
        }
        TorusCmd::Validate {
            bohr,
            coeffs,
            arity,
            draws,
        } => {
            let (_, b) = bohr_set(bohr)?;
            let arity = match arity {
                ArityArg::Linear => Arity::Linear,
                ArityArg::Quadratic => Arity::Quadratic,
            };
            let phi = LocalPhase::polynomial(b, arity, &unsigned("coeffs", coeffs)?)?;
            let budget = draws.map(|draws| SampleBudget {
                draws,
                seed: ctx.cfg.seed,
            });
            let cert = validate_phase(&phi, budget)?;
            let ap = match arity {
                Arity::Quadratic if draws.is_none() => Some(validate_ap_identity(&phi)?),
                _ => None,
            };
            let pass = cert.pass && ap.as_ref().map_or(true, |c| c.pass);
            ctx.json(
                "phase.json",
                &json!({ "pass": pass, "identity": cert, "ap_identity": ap }),
            )?;
            if !pass {
                return Ok(EXIT_ASSERTION);
            }
        }
    }
    Ok(0)
}

fn khintchine(ctx: &Ctx, cmd: &KhintchineCmd) -> CliResult<i32> {
    let mut params = ctx.cfg.toy.clone();
    match cmd {
        KhintchineCmd::Run {
            func,
            eta,
            budget,
            delta_e,
            shrink,
            loop_eta,
        } => {
            params.eta = eta.unwrap_or(params.eta);
            params.budget = budget.unwrap_or(params.budget);
            params.delta_e = delta_e.unwrap_or(params.delta_e);
            params.loop_eta = loop_eta.or(params.loop_eta);
            if let Some(s) = shrink {
                params.shrink = rational("shrink", s)?;
            }
            params.check().map_err(Failure::from)?;
            let (g, values) = ctx.function(func)?;
            let f = input::real_values(&values)?;
            let run = run_driver(&f, g, &params, &ToyEnergyOracle, &NoDimensionOracle)?;
            let steps = run.trace.energy_steps() + run.trace.dimension_steps();
            let summary = json!({
                "outcome": run.outcome,
                "steps": steps,
                "energy_steps": run.trace.energy_steps(),
                "certificate": run.certificate,
            });
            if ctx.out.is_some() {
                ctx.write("trace.jsonl", &run.trace.to_json_lines())?;
                if let Some(c) = &run.certificate {
                    ctx.json("certificate.json", c)?;
                }
                let brief = json!({ "outcome": run.outcome, "steps": steps });
                stdout(&(brief.to_string() + "\n"));
            } else {
                stdout(&run.trace.to_json_lines());
                stdout(&(summary.to_string() + "\n"));
            }
            return Ok(match run.outcome {
                Outcome::BudgetExhausted => {
                    Failure::from(gblab_core::Error::BudgetExhausted {
                        budget: params.budget,
                    })
                    .emit();
                    EXIT_BUDGET
                }
                Outcome::Unimplemented => {
                    Failure::from(gblab_core::Error::UnimplementedStep).emit();
                    EXIT_UNIMPLEMENTED
                }
                _ if run.certificate.as_ref().is_some_and(|c| !c.all_hold()) => EXIT_ASSERTION,
                _ => 0,
            });
        }
        KhintchineCmd::R4 { n, set } => {
            let a = match set {
                Some(s) => unsigned("set", s)?,
                None => greedy_ap_free(*n),
            };
            let report = r4_harness(*n, &a, &params)?;
            ctx.json("r4.json", &report)?;
            if !report.scans_agree {
                return Ok(EXIT_ASSERTION);
            }
        }
    }
    Ok(0)
}

fn verify(ctx: &Ctx, a: &VerifyArgs) -> CliResult<i32> {
    let mut opts = if a.grid == GridArg::Config {
        ctx.cfg.suite_options()?
    } else {
        gblab_core::SuiteOptions {
            seed: ctx.cfg.seed,
            ..Default::default()
        }
    };
    if let Some(p) = &a.p {
        opts.primes = Some(unsigned("p", p)?);
    }
    if let Some(r) = &a.ranks {
        opts.ranks = Some(
            unsigned("ranks", r)?
                .into_iter()
                .map(|x| x as usize)
                .collect(),
        );
    }
    if let Some(r) = &a.rho {
        opts.radii = Some(
            r.split(',')
                .map(|t| rational("rho", t.trim()))
                .collect::<CliResult<_>>()?,
        );
    }
    opts.trials = a.trials.or(opts.trials);
    let report = run_suite(&a.suite, &opts).map_err(|e| Failure::from(e).about("suite"))?;
    ctx.json(&format!("{}.json", a.suite), &report)?;
    if ctx.out.is_some() {
        let summary: Value = json!({
            "suite": report.suite,
            "pass": report.pass,
            "failures": report.failures(),
        });
        stdout(&(summary.to_string() + "\n"));
    }
    Ok(if report.pass { 0 } else { EXIT_ASSERTION })
}

/// Writes to stdout, ignoring a closed pipe.
fn stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg.with_env()?)
}

fn run() -> CliResult<i32> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            stdout(&e.to_string());
            return Ok(0);
        }
        Err(e) => return Err(e.into()),
    };
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::invalid("jobs", "must be positive"));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone());
    let ctx = Ctx { cfg, out };
    match &cli.command {
        Command::Bohr(c) => bohr(&ctx, c),
        Command::Spectral(c) => spectral(&ctx, c),
        Command::Gowers(c) => gowers(&ctx, c),
        Command::Inverse(c) => inverse(&ctx, c),
        Command::Torus(c) => torus(&ctx, c),
        Command::Khintchine(c) => khintchine(&ctx, c),
        Command::Verify(a) => verify(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            f.emit();
            ExitCode::from(f.exit as u8)
        }
    }
}
