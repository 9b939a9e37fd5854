//! Command-line front end. `run` parses argv, executes one subcommand and
//! returns the process exit code (0 ok, 1 error, 2 undecided).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arith::{factorize, primes_up_to};
use crate::charsum::{bound_corpus, cochrane_sweep, variety_count, weil_sweep};
use crate::congcount::{estimate_check, v_count_brute, v_count_charsum, Regime, VCountQuery};
use crate::criterion::{classification_sweep, wud_membership, Verdict, DEFAULT_PRIME_BUDGET};
use crate::error::{Error, Result};
use crate::intmat::{beta, exponent_matrix, ifh_check, is_mult_independent, smith_normal_form};
use crate::intpoly::IntPoly;
use crate::resring::{admissible_k, alpha_v, r_v_set, unit_group, BeyondRule, MultFnSpec};
use crate::ser::{int_value, to_frac};
use crate::sieve::{
    counterexample_build, counterexample_control, sieve_run, Construction, CounterexampleParams, FilterSpec,
};

pub const SCHEMA_VERSION: &str = "1.0";
const DEFAULT_V: usize = 4;

#[derive(Parser, Debug)]
#[command(name = "equidist", version, about = "Weak equidistribution of multiplicative functions mod q")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Named family: phi, sigma, sigma_r:<r>, phi_sigma_joint.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// TOML spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Levels V for presets.
    #[arg(long)]
    v: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Admissibility, alpha_v(q), R_k(q) and the invariant factor hypothesis.
    AnalyzeModulus {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        q: u64,
        /// Primes l <= b0 are exempt from the IFH check.
        #[arg(long, default_value_t = 0.0)]
        b0: f64,
    },
    /// Decide weak equidistribution mod q.
    CheckCriterion {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = DEFAULT_PRIME_BUDGET)]
        prime_budget: u64,
        #[arg(long)]
        j_max: Option<usize>,
    },
    /// Count v in U_q^N with prod_j W_{i,v}(v_j) = a_i for all i.
    CountCongruences {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        n: usize,
        /// Level v of the polynomials placed in every slot.
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Comma-separated target units a_1,...,a_K.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<u64>,
        /// Compare against the estimate of one regime: LARGE_N, SMALL_N, SQFREE.
        #[arg(long)]
        regime: Option<String>,
    },
    /// Character sum bound sweeps and variety counts.
    VerifyBounds {
        /// weil, cochrane or variety
        #[arg(long, default_value = "weil")]
        kind: String,
        /// Largest prime for weil/variety.
        #[arg(long, default_value_t = 100)]
        ell_max: u64,
        /// Largest prime power l^e (e >= 2) for cochrane.
        #[arg(long, default_value_t = 243)]
        pe_max: u64,
        /// Extra random corpus polynomials drawn from --seed.
        #[arg(long, default_value_t = 0)]
        random: usize,
        /// Polynomials for variety counts, as comma-separated coefficients from the constant term.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        f: Option<Vec<i64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        g: Option<Vec<i64>>,
        /// Also write per-case rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sieve n <= x and tabulate (f_1(n), ..., f_K(n)) mod q.
    SieveEquidist {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        x: u64,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// none, pr:R, pt-nk:T, convenient[:eps], prime-power
        #[arg(long, default_value = "none")]
        filter: String,
        /// Also write the counts as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build and measure an optimality construction.
    Counterexample {
        /// LINEAR_OVERREP, EISENSTEIN_FAMILY or IFH_VIOLATION
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 10_000_000)]
        x: u64,
        #[arg(long, default_value_t = 2)]
        d: u32,
        /// Number of functions K (0 = construction default).
        #[arg(long, default_value_t = 0)]
        kf: usize,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 2)]
        primes: usize,
        /// Also run the d = 1 control.
        #[arg(long)]
        control: bool,
    },
    /// Verdicts for every q <= qmax, checked against the known tables.
    ClassificationSweep {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        qmax: u64,
        #[arg(long, default_value_t = DEFAULT_PRIME_BUDGET)]
        prime_budget: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// A family declared in TOML, either from a preset or explicit coefficients.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub preset: Option<String>,
    /// Number of levels; required for presets only when the default 4 is not wanted.
    #[serde(default, rename = "V")]
    pub v: Option<usize>,
    /// Index k the caller intends to work at; informational.
    #[serde(default)]
    pub k: Option<usize>,
    /// `functions[i].w[v-1]` holds the coefficients of W_{i,v}, constant term first.
    #[serde(default)]
    pub functions: Vec<FunctionDef>,
    #[serde(default)]
    pub beyond: Option<BeyondRule>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDef {
    pub w: Vec<IntPoly>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("spec file: {e}")))
    }

    pub fn to_spec(&self) -> Result<MultFnSpec> {
        if let Some(p) = &self.preset {
            if !self.functions.is_empty() {
                return Err(Error::Invalid("spec file sets both preset and functions".into()));
            }
            let mut spec = preset(p, self.v.unwrap_or(DEFAULT_V))?;
            if let Some(n) = &self.name {
                spec.name = n.clone();
            }
            return Ok(spec);
        }
        if self.functions.is_empty() {
            return Err(Error::Invalid("spec file needs a preset or at least one function".into()));
        }
        let polys: Vec<Vec<IntPoly>> = self.functions.iter().map(|f| f.w.clone()).collect();
        if let Some(v) = self.v {
            if polys.iter().any(|row| row.len() != v) {
                return Err(Error::Invalid(format!("V = {v} but a function lists another number of levels")));
            }
        }
        let spec = MultFnSpec::new(
            self.name.as_deref().unwrap_or("custom"),
            polys,
            self.beyond.clone().unwrap_or(BeyondRule::Undefined),
        )?;
        if let Some(k) = self.k {
            if k == 0 || k > spec.v_max() {
                return Err(Error::Invalid(format!("k = {k} outside 1..={}", spec.v_max())));
            }
        }
        Ok(spec)
    }
}

/// Expand a CLI preset name; `sigma_r:<r>` and `phi_sigma_joint` included.
pub fn preset(name: &str, v: usize) -> Result<MultFnSpec> {
    let key = match name {
        "phi_sigma_joint" => "phi_sigma".to_string(),
        _ => match name.strip_prefix("sigma_r:") {
            Some(r) => format!("sigma_{r}"),
            None => name.to_string(),
        },
    };
    if v == 0 {
        return Err(Error::Invalid("V must be >= 1".into()));
    }
    MultFnSpec::preset(&key, v).ok_or_else(|| {
        Error::Invalid(format!(
            "unknown preset '{name}' (expected phi, sigma, sigma_r:<r>, phi_sigma_joint)"
        ))
    })
}

fn load_family(f: &FamilyArgs) -> Result<MultFnSpec> {
    match (&f.preset, &f.spec) {
        (Some(p), None) => preset(p, f.v.unwrap_or(DEFAULT_V)),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let mut sf = SpecFile::parse(&text)?;
            if f.v.is_some() {
                sf.v = f.v;
            }
            sf.to_spec()
        }
        _ => Err(Error::Invalid("give exactly one of --preset or --spec".into())),
    }
}

struct Outcome {
    report: Value,
    undecided: bool,
}

fn envelope(command: &str, mut report: Value) -> Value {
    if let Value::Object(m) = &mut report {
        let mut out = serde_json::Map::new();
        out.insert("schema_version".into(), SCHEMA_VERSION.into());
        out.insert("command".into(), command.into());
        out.append(m);
        Value::Object(out)
    } else {
        json!({ "schema_version": SCHEMA_VERSION, "command": command, "report": report })
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    serde_json::to_value(t).map_err(|e| Error::Invalid(format!("serialize: {e}")))
}

fn analyze_modulus(spec: &MultFnSpec, q: u64, b0: f64) -> Result<Outcome> {
    let g = unit_group(q)?;
    let alphas: Vec<Value> = (1..=spec.v_max())
        .map(|v| json!({ "v": v, "alpha": to_frac(&alpha_v(spec, q, v)) }))
        .collect();
    let adm = admissible_k(spec, q);
    let mut report = json!({
        "family": spec.name,
        "q": q,
        "factorization": factorize(q),
        "phi": g.phi,
        "unit_group_orders": g.orders,
        "alpha": alphas,
        "k": adm.k,
        "alpha_k": adm.alpha_k.as_ref().map(to_frac),
    });
    if let Some(k) = adm.k {
        let level = spec.level(k);
        let e0 = exponent_matrix(&level)?;
        let snf = smith_normal_form(&e0);
        let (b, _) = beta(&level)?;
        let ifh = ifh_check(q, &level, b0)?;
        let r_k = r_v_set(spec, q, k);
        report["r_k_size"] = json!(r_k.len());
        report["mult_independent"] = json!(is_mult_independent(&level)?);
        report["exponent_matrix"] = json!(e0.to_rows().iter().map(|r| r.iter().map(int_value).collect::<Vec<_>>()).collect::<Vec<_>>());
        report["invariant_factors"] = to_value(&snf)?["invariant_factors"].clone();
        report["beta"] = int_value(&b);
        report["ifh"] = json!(ifh.holds);
        report["ifh_witness"] = json!(ifh.witness);
    }
    Ok(Outcome {
        report,
        undecided: false,
    })
}

fn random_corpus(seed: u64, n: usize) -> Vec<IntPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let deg = rng.gen_range(1..=4);
        let mut c: Vec<i64> = (0..deg).map(|_| rng.gen_range(-5..=5)).collect();
        c.push(rng.gen_range(1..=3));
        let p = IntPoly::from_i64s(&c);
        if p.degree().unwrap_or(0) >= 1 {
            out.push(p);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn verify_bounds(
    kind: &str,
    ell_max: u64,
    pe_max: u64,
    random: usize,
    seed: u64,
    f: Option<Vec<i64>>,
    g: Option<Vec<i64>>,
    csv_path: Option<&Path>,
) -> Result<Outcome> {
    let mut corpus = bound_corpus();
    corpus.extend(random_corpus(seed, random));
    let summary = match kind {
        "weil" => {
            let primes: Vec<u64> = primes_up_to(ell_max).into_iter().filter(|&p| p >= 3).collect();
            weil_sweep(&primes, &corpus, csv_path.is_some())?
        }
        "cochrane" => {
            let mut pes = Vec::new();
            for ell in primes_up_to(isqrt(pe_max)) {
                let mut e = 2;
                while ell.checked_pow(e).is_some_and(|v| v <= pe_max) {
                    pes.push((ell, e));
                    e += 1;
                }
            }
            cochrane_sweep(&pes, &corpus, csv_path.is_some())?
        }
        "variety" => {
            let f = IntPoly::from_i64s(&f.unwrap_or_else(|| vec![1, 1]));
            let g = g.map(|c| IntPoly::from_i64s(&c));
            let rows = primes_up_to(ell_max)
                .into_iter()
                .filter(|&p| p >= 3)
                .map(|ell| variety_count(ell, &f, g.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            let max_v21_excess = rows.iter().map(|r| r.v21_excess_over_sqrt).fold(f64::MIN, f64::max);
            let max_v32_ratio = rows.iter().filter_map(|r| r.v32_ratio).fold(f64::MIN, f64::max);
            return Ok(Outcome {
                report: json!({
                    "kind": "variety",
                    "f": f,
                    "g": g,
                    "max_v21_excess_over_sqrt": max_v21_excess,
                    "max_v32_ratio": if g.is_some() { json!(max_v32_ratio) } else { Value::Null },
                    "rows": rows,
                }),
                undecided: false,
            });
        }
        other => return Err(Error::Invalid(format!("unknown bound kind '{other}' (weil, cochrane, variety)"))),
    };
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        for row in &summary.rows {
            w.serialize(row).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    let mut report = to_value(&summary)?;
    report["kind"] = json!(kind);
    report["seed"] = json!(seed);
    report["random_polys"] = json!(random);
    Ok(Outcome {
        report,
        undecided: false,
    })
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn execute(cli: &Cli) -> Result<(String, Outcome)> {
    let name = |s: &str| s.to_string();
    Ok(match &cli.cmd {
        Command::AnalyzeModulus { family, q, b0 } => {
            (name("analyze-modulus"), analyze_modulus(&load_family(family)?, *q, *b0)?)
        }
        Command::CheckCriterion {
            family,
            q,
            prime_budget,
            j_max,
        } => {
            let v = wud_membership(&load_family(family)?, *q, *prime_budget, *j_max)?;
            let undecided = v.status == Verdict::Unknown;
            (name("check-criterion"), Outcome { report: to_value(&v)?, undecided })
        }
        Command::CountCongruences {
            family,
            q,
            n,
            level,
            targets,
            regime,
        } => {
            let spec = load_family(family)?;
            let query = VCountQuery::from_family(&spec, *level, *q, *n, targets.clone())?;
            let report = match regime {
                Some(r) => to_value(&estimate_check(&query, r.parse::<Regime>()?)?)?,
                None => {
                    let brute = v_count_brute(&query)?;
                    let cs = v_count_charsum(&query)?;
                    json!({
                        "q": q,
                        "n": n,
                        "level": level,
                        "targets": targets,
                        "exact_count": brute,
                        "charsum_count": to_frac(&cs),
                        "agree": cs == num_rational::BigRational::from_integer(brute.into()),
                    })
                }
            };
            (name("count-congruences"), Outcome { report, undecided: false })
        }
        Command::VerifyBounds {
            kind,
            ell_max,
            pe_max,
            random,
            f,
            g,
            csv,
        } => (
            name("verify-bounds"),
            verify_bounds(kind, *ell_max, *pe_max, *random, cli.seed, f.clone(), g.clone(), csv.as_deref())?,
        ),
        Command::SieveEquidist {
            family,
            x,
            q,
            k,
            filter,
            csv,
        } => {
            let spec = load_family(family)?;
            let rep = sieve_run(&spec, *x, *q, *k, filter.parse::<FilterSpec>()?)?;
            if let Some(path) = csv {
                let file = fs::File::create(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
                rep.write_csv(file)?;
            }
            (name("sieve-equidist"), Outcome { report: to_value(&rep)?, undecided: false })
        }
        Command::Counterexample {
            kind,
            x,
            d,
            kf,
            q,
            filter,
            primes,
            control,
        } => {
            let kind: Construction = kind.parse()?;
            let params = CounterexampleParams {
                d: *d,
                kf: *kf,
                q: *q,
                filter: filter.as_deref().map(str::parse).transpose()?,
                primes: *primes,
            };
            let rep = counterexample_build(kind, &params, *x)?;
            let mut report = to_value(&rep)?;
            if *control {
                let c = counterexample_control(kind, &params, *x)?;
                report["control"] = to_value(&c)?;
            }
            (name("counterexample"), Outcome { report, undecided: false })
        }
        Command::ClassificationSweep {
            family,
            qmax,
            prime_budget,
            csv,
        } => {
            let t = classification_sweep(&load_family(family)?, *qmax, *prime_budget)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
                w.write_record(["q", "k", "status", "expected_wud", "contradiction"])
                    .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
                for r in &t.rows {
                    let rec = [
                        r.q.to_string(),
                        r.k.map(|k| k.to_string()).unwrap_or_default(),
                        to_value(&r.status)?.as_str().unwrap_or_default().to_string(),
                        r.expected_wud.map(|b| b.to_string()).unwrap_or_default(),
                        r.contradiction.to_string(),
                    ];
                    w.write_record(&rec).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
                }
                w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
            }
            let undecided = t.unknown > 0;
            (name("classification-sweep"), Outcome { report: to_value(&t)?, undecided })
        }
    })
}

fn error_json(e: &Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "code": e.code(), "message": e.to_string() },
    })
}

/// Run the CLI on `args` (including the program name), writing the report to
/// `--out` or `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok((command, outcome)) => {
            let doc = envelope(&command, outcome.report);
            let text = serde_json::to_string_pretty(&doc).unwrap() + "\n";
            let written = match &cli.out {
                Some(path) => fs::write(path, &text).map_err(|e| e.to_string()),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "cannot write report: {e}");
                return 1;
            }
            if outcome.undecided {
                2
            } else {
                0
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", serde_json::to_string_pretty(&error_json(&e)).unwrap());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("equidist").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn analyze_sigma_mod_4() {
        let (code, out, _) = run_args(&["analyze-modulus", "--preset", "sigma", "--q", "4"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["k"], 2);
        assert_eq!(v["alpha_k"], json!({"num": 1, "den": 1}));
        assert_eq!(v["ifh"], true);
    }

    #[test]
    fn unknown_subcommand_is_error() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn error_codes() {
        let (code, _, err) = run_args(&["analyze-modulus", "--preset", "tau", "--q", "4"]);
        assert_eq!(code, 1);
        assert!(err.contains("INVALID_INPUT"), "{err}");
    }

    #[test]
    fn presets_expand() {
        assert_eq!(preset("sigma_r:3", 2).unwrap().name, "sigma_3");
        assert_eq!(preset("phi_sigma_joint", 2).unwrap().k(), 2);
        assert!(preset("sigma_r:0", 2).is_err());
    }

    #[test]
    fn spec_file_roundtrip() {
        let text = r#"
name = "shifted"
V = 2
[[functions]]
w = [[-1, 1], [0, -1, 1]]
[beyond]
rule = "periodic"
start = 2
period = 1
"#;
        let spec = SpecFile::parse(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.k(), 1);
        assert_eq!(spec.poly(0, 2), &IntPoly::from_i64s(&[0, -1, 1]));
        let p = SpecFile::parse("preset = \"sigma_r:2\"\nV = 3\n").unwrap().to_spec().unwrap();
        assert_eq!(p, MultFnSpec::sigma_r(2, 3));
        assert!(SpecFile::parse("colour = 1").is_err());
    }

    #[test]
    fn seeded_corpus_is_reproducible() {
        assert_eq!(random_corpus(7, 5), random_corpus(7, 5));
        assert_ne!(random_corpus(7, 5), random_corpus(8, 5));
    }
}
