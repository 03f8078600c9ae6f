//! End-to-end acceptance gate: one line per criterion on stdout.

use std::io::Write;
use std::time::{Duration, Instant};

use gblab_core::verify::{locu2_instance, LOCU2_ETA};
use gblab_core::{run_suite, SuiteOptions, SuiteReport};

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn say(text: &str) {
    // Bypasses libtest capture so the lines reach the terminal.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn suite(name: &str, opts: &SuiteOptions) -> (SuiteReport, Duration) {
    let t = Instant::now();
    let r = run_suite(name, opts).unwrap_or_else(|e| panic!("suite {name}: {e}"));
    (r, t.elapsed())
}

fn instances(r: &SuiteReport, check: &str) -> u64 {
    r.check(check).map_or(0, |c| c.instances)
}

/// Report passed, ran within `limit`, and each named check saw at least the given count.
fn judge(
    id: usize,
    name: &'static str,
    r: &SuiteReport,
    took: Duration,
    limit: Option<Duration>,
    minimum: &[(&str, u64)],
) -> Line {
    let mut problems = r.failures();
    for &(check, n) in minimum {
        let got = instances(r, check);
        if got < n {
            problems.push(format!("{check}: {got} instances, expected at least {n}"));
        }
    }
    if let Some(l) = limit {
        if took > l {
            problems.push(format!(
                "runtime {:.1} s over {} s",
                took.as_secs_f64(),
                l.as_secs()
            ));
        }
    }
    let total: u64 = r.checks.iter().map(|c| c.instances).sum();
    let limit_text = limit.map_or(String::new(), |l| format!(" (limit {} s)", l.as_secs()));
    let mut detail = format!(
        "{} checks, {total} instances, {:.1} s{limit_text}",
        r.checks.len(),
        took.as_secs_f64()
    );
    if !r.constants.is_empty() {
        let c: Vec<String> = r
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        detail.push_str(&format!("; {}", c.join(" ")));
    }
    if !problems.is_empty() {
        detail.push_str(&format!("; FAILURES: {}", problems.join(" | ")));
    }
    Line {
        id,
        name,
        pass: problems.is_empty(),
        detail,
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn report(line: &Line) {
    let verdict = if line.pass { "PASS" } else { "FAIL" };
    say(&format!(
        "acceptance {:>2} {:<24} {verdict}  {}",
        line.id, line.name, line.detail
    ));
}

/// The large-p inverse run: each instance must finish in under ten seconds.
fn locu2_large(seed: u64) -> Line {
    let mut worst = Duration::ZERO;
    let mut problems = Vec::new();
    for i in 0..3 {
        let t = Instant::now();
        match locu2_instance(4001, i, seed) {
            Ok(row) if row.correlation >= LOCU2_ETA / 2.0 => {}
            Ok(row) => problems.push(format!("index {i}: correlation {}", row.correlation)),
            Err(e) => problems.push(format!("index {i}: {e}")),
        }
        worst = worst.max(t.elapsed());
    }
    if worst > Duration::from_secs(10) {
        problems.push(format!("slowest instance {:.2} s", worst.as_secs_f64()));
    }
    let mut detail = format!(
        "3 instances at p=4001, slowest {:.2} s (limit 10 s)",
        worst.as_secs_f64()
    );
    if !problems.is_empty() {
        detail.push_str(&format!("; FAILURES: {}", problems.join(" | ")));
    }
    Line {
        id: 4,
        name: "locu2-p4001",
        pass: problems.is_empty(),
        detail,
    }
}

#[test]
fn acceptance() {
    let opts = SuiteOptions::default();
    let mut lines = Vec::new();
    let mut run = |line: Line| {
        report(&line);
        lines.push(line);
    };

    let (r, t) = suite("size-bohr", &opts);
    run(judge(
        1,
        "exact-lemmas",
        &r,
        t,
        secs(60),
        &[
            ("size-bohr-lower", 1),
            ("sperp-tri-add", 1),
            ("a-tri-add", 1),
            ("edual-i", 1),
            ("theta-crude", 1),
            ("pmf-normalized", 1),
        ],
    ));

    let (r, t) = suite("cauchy", &opts);
    run(judge(
        2,
        "cauchy-positivity",
        &r,
        t,
        secs(120),
        &[("cauchy-positivity", 600), ("cauchy-brute-force", 1)],
    ));

    let (r, t) = suite("ati", &opts);
    run(judge(
        3,
        "ati-calibration",
        &r,
        t,
        secs(300),
        &[("ati-bound", 1), ("ati-stability", 1)],
    ));

    let (r, t) = suite("locu2", &opts);
    run(judge(
        4,
        "locu2-end-to-end",
        &r,
        t,
        None,
        &[("locu2-half-eta", 50), ("locu2-exhaustive-max", 50)],
    ));
    run(locu2_large(opts.seed));

    let (r, t) = suite("bohr-basis", &opts);
    run(judge(
        5,
        "bohr-basis",
        &r,
        t,
        secs(120),
        &[
            ("ain", 1),
            ("representation", 1),
            ("uniqueness", 1),
            ("size-band", 1),
        ],
    ));

    let (r, t) = suite("nfoc", &opts);
    run(judge(
        6,
        "nfoc",
        &r,
        t,
        secs(60),
        &[
            ("psi-homomorphism", 100),
            ("psi-round-trip", 100),
            ("volume-band", 100),
        ],
    ));

    let (r, t) = suite("omh", &opts);
    run(judge(
        7,
        "quadratic-phase",
        &r,
        t,
        None,
        &[
            ("omh-planted-quadratic", 1),
            ("omh-ap-implied", 1),
            ("omh-cubic-fails", 1),
        ],
    ));

    let (r, t) = suite("dfm", &opts);
    run(judge(
        8,
        "derivative-map",
        &r,
        t,
        secs(120),
        &[("dfm-recovers-2alpha", 1), ("dfm-audit-bad-zero", 1)],
    ));

    let (r, t) = suite("khintchine", &opts);
    run(judge(
        9,
        "khintchine-driver",
        &r,
        t,
        secs(600),
        &[
            ("driver-terminates", 60),
            ("steps-within-bound", 60),
            ("certificate", 60),
        ],
    ));

    let (r, t) = suite("r4", &opts);
    run(judge(
        10,
        "r4-harness",
        &r,
        t,
        secs(30),
        &[("ap-free", 1), ("scans-agree", 1), ("chain-consistent", 1)],
    ));

    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.pass)
        .map(|l| format!("{} {}", l.id, l.name))
        .collect();
    say(&format!(
        "acceptance summary: {}/{} lines pass",
        lines.len() - failed.len(),
        lines.len()
    ));
    assert!(failed.is_empty(), "failed: {failed:?}");
}
