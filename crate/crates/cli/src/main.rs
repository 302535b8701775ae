use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use zndisc::analysis::{
    best_lower_bound_prop, hereditary_upper_bound, lower_bound_main, lower_bound_prime_power,
    run_fourier_suite, upper_bound_main, BoundReport, SuiteReport,
};
use zndisc::ap::Coloring;
use zndisc::constructions::construct_best_coloring;
use zndisc::engine::EngineConfig;
use zndisc::exact::{exact_disc, exact_herdisc, measure, Measurement, Method};
use zndisc::ntheory::{is_prime, ZnContext};
use zndisc::Error;

mod range;

use range::NRange;

#[derive(Parser, Debug)]
#[command(name = "zndisc", version, about = "Discrepancy of arithmetic progressions in Z_n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// RNG seed for every randomized step
    #[arg(long, global = true, env = "ZNDISC_SEED", default_value_t = 0)]
    seed: u64,
    /// Constant in the upper-bound formula
    #[arg(long = "c-hat", global = true, default_value_t = 1.0)]
    c_hat: f64,
    /// Multiplier on every partial-coloring bound
    #[arg(long, global = true, default_value_t = 1.0)]
    kappa: f64,
    /// Restarts per partial coloring before giving up
    #[arg(long, global = true, default_value_t = 64)]
    budget: u32,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Exhaustive,
    BranchAndBound,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Target {
    #[arg(long)]
    n: Option<u64>,
    /// Inclusive range A..B (or A..=B)
    #[arg(long)]
    range: Option<NRange>,
}

impl Target {
    fn values(&self) -> Vec<u64> {
        match (self.n, &self.range) {
            (Some(n), _) => vec![n],
            (None, Some(r)) => r.values().collect(),
            (None, None) => vec![],
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate upper and lower bounds on the discrepancy
    Bounds {
        #[command(flatten)]
        target: Target,
    },
    /// Build a low-discrepancy coloring of Z_n and measure it
    Construct {
        #[arg(long)]
        n: u64,
    },
    /// Measure a coloring read from a JSON file
    Measure {
        #[arg(long)]
        input: PathBuf,
    },
    /// Exact discrepancy by exhaustive search or branch and bound
    Exact {
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::BranchAndBound)]
        method: MethodArg,
        /// Override the largest n the method accepts
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Exact hereditary discrepancy
    Herdisc {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Numerical checks of the Fourier identities and inequalities
    FourierCheck {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
    /// Construct and measure over a range of n, with a log-log slope fit
    Sweep {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        primes_only: bool,
    },
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Common,
}

#[derive(Serialize)]
struct Document<'a> {
    meta: Meta<'a>,
    inputs: &'a Value,
    results: &'a [Value],
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a Value>,
}

/// What a command produced, before formatting.
struct Output {
    command: &'static str,
    inputs: Value,
    results: Vec<Value>,
    summary: Option<Value>,
    csv: String,
    text: String,
    exit: u8,
}

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_SEARCH: u8 = 3;
const EXIT_LIMIT: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SearchFailed { .. } | Error::CellSearchFailed { .. } => EXIT_SEARCH,
        Error::LimitExceeded { .. } => EXIT_LIMIT,
        _ => EXIT_USAGE,
    }
}

fn engine_config(c: &Common) -> EngineConfig {
    EngineConfig { seed: c.seed, budget: c.budget, kappa: c.kappa, ..Default::default() }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn bounds(common: &Common, target: &Target) -> Result<Output, Error> {
    let mut results = Vec::new();
    let mut csv = String::from("n,upper,upper_r,lower_main,lower_main_r,lower_prop,lower_prop_l,lower_prime_power,hereditary_upper\n");
    let mut text = String::new();
    for n in target.values() {
        let ctx = ZnContext::new(n)?;
        let upper = upper_bound_main(&ctx, common.c_hat)?;
        let lower = lower_bound_main(&ctx);
        let prop = best_lower_bound_prop(&ctx);
        let pp = match ctx.prime_power() {
            Some((p, k)) => Some(lower_bound_prime_power(p, k)?),
            None => None,
        };
        let her = hereditary_upper_bound(&ctx, common.c_hat)?;
        let witness_num = |b: &BoundReport| match b.witness {
            zndisc::analysis::Witness::Divisor { r } => r,
            zndisc::analysis::Witness::Split { r, .. } => r,
            zndisc::analysis::Witness::Prop { l, .. } => l,
            _ => 0,
        };
        csv.push_str(&format!(
            "{n},{:.6},{},{:.6},{},{:.6},{},{},{:.6}\n",
            upper.value,
            witness_num(&upper),
            lower.value,
            witness_num(&lower),
            prop.value,
            witness_num(&prop),
            fmt_opt(pp.as_ref().map(|b| b.value)),
            her.value
        ));
        text.push_str(&format!(
            "n={n}: upper {:.4} (r={}), lower {:.4} (r={}), prop {:.4} (l={}), prime power {}, hereditary {:.4}\n",
            upper.value,
            witness_num(&upper),
            lower.value,
            witness_num(&lower),
            prop.value,
            witness_num(&prop),
            pp.as_ref().map(|b| format!("{:.4}", b.value)).unwrap_or_else(|| "-".into()),
            her.value
        ));
        let mut row = vec![upper, lower, prop];
        row.extend(pp);
        row.push(her);
        results.push(json!({ "n": n, "bounds": row }));
    }
    Ok(Output {
        command: "bounds",
        inputs: json!({ "n": target.values() }),
        results,
        summary: None,
        csv,
        text,
        exit: 0,
    })
}

fn measurement_text(m: &Measurement) -> String {
    format!(
        "T = {} (witness a={} d={} len={}), congruence max {}, sum {}\n",
        m.t,
        m.witness.a,
        m.witness.d,
        m.witness.len(),
        m.congruence_max,
        m.sum
    )
}

fn coloring_csv(header: &str, chi: &Coloring) -> String {
    let mut s = format!("{header}value\n");
    for v in chi.values() {
        s.push_str(&format!("{v}\n"));
    }
    s
}

fn construct(common: &Common, n: u64) -> Result<Output, Error> {
    let ctx = ZnContext::new(n)?;
    let (chi, report) = construct_best_coloring(&ctx, common.c_hat, &engine_config(common))?;
    let m = measure(&chi, common.workers);
    let exit = if report.base_congruence_max > 1 { EXIT_INVARIANT } else { 0 };
    let header = format!(
        "# n={n} r_star={} predicted={:.6} t={} base_congruence_max={}\n",
        report.r_star, report.predicted, m.t, report.base_congruence_max
    );
    let text = format!(
        "n={n}: r* = {}, predicted {:.4}, base congruence max {}\n{}",
        report.r_star,
        report.predicted,
        report.base_congruence_max,
        measurement_text(&m)
    );
    Ok(Output {
        command: "construct",
        inputs: json!({ "n": n }),
        results: vec![json!({ "report": report, "measurement": m, "coloring": chi })],
        summary: None,
        csv: coloring_csv(&header, &chi),
        text,
        exit,
    })
}

fn measure_file(common: &Common, path: &PathBuf) -> Result<Output, String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed: Value = serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    // Accept a bare array or the output of `construct`.
    let arr = parsed
        .pointer("/results/0/coloring")
        .cloned()
        .unwrap_or(parsed);
    let values: Vec<i8> = serde_json::from_value(arr).map_err(|e| format!("{}: {e}", path.display()))?;
    let chi = Coloring::new(values).map_err(|e| format!("{}: {e}", path.display()))?;
    if !chi.is_full() {
        return Err(format!("{}: coloring must be ±1 everywhere", path.display()));
    }
    let m = measure(&chi, common.workers);
    Ok(Output {
        command: "measure",
        inputs: json!({ "n": chi.n() }),
        text: measurement_text(&m),
        csv: format!("n,t,congruence_max,sum\n{},{},{},{}\n", m.n, m.t, m.congruence_max, m.sum),
        results: vec![to_value(&m)],
        summary: None,
        exit: 0,
    })
}

fn exact(common: &Common, n: u64, method: MethodArg, limit: Option<u64>) -> Result<Output, Error> {
    let method = match method {
        MethodArg::Exhaustive => Method::Exhaustive,
        MethodArg::BranchAndBound => Method::BranchAndBound,
    };
    let r = exact_disc(&ZnContext::new(n)?, method, limit, common.workers)?;
    Ok(Output {
        command: "exact",
        inputs: json!({ "n": n, "method": method, "limit": limit.unwrap_or(method.default_limit()) }),
        csv: format!("n,value,nodes_explored\n{n},{},{}\n", r.value, r.nodes_explored),
        text: format!("{}\n", r.value),
        results: vec![to_value(&r)],
        summary: None,
        exit: 0,
    })
}

fn herdisc(n: u64, limit: Option<u64>) -> Result<Output, Error> {
    let r = exact_herdisc(&ZnContext::new(n)?, limit)?;
    let subset: Vec<String> = r.subset.iter().map(|x| x.to_string()).collect();
    Ok(Output {
        command: "herdisc",
        inputs: json!({ "n": n }),
        csv: format!("n,value,subset\n{n},{},{}\n", r.value, subset.join(" ")),
        text: format!("{} (X = {{{}}})\n", r.value, subset.join(", ")),
        results: vec![to_value(&r)],
        summary: None,
        exit: 0,
    })
}

fn fourier(common: &Common, n: u64, trials: u64) -> Result<Output, Error> {
    let rep: SuiteReport = run_fourier_suite(n, trials, common.seed)?;
    let mut csv = String::from("check,evaluated,passed,worst_rel\n");
    let mut text = String::new();
    for c in &rep.checks {
        csv.push_str(&format!("{},{},{},{:e}\n", c.name, c.evaluated, c.passed, c.worst_rel));
        text.push_str(&format!("{:<20} {}/{} (worst {:.2e})\n", c.name, c.passed, c.evaluated, c.worst_rel));
    }
    Ok(Output {
        command: "fourier-check",
        inputs: json!({ "n": n, "trials": trials }),
        exit: if rep.all_passed() { 0 } else { EXIT_INVARIANT },
        results: rep.checks.iter().map(to_value).collect(),
        summary: None,
        csv,
        text,
    })
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn sweep(common: &Common, target: &Target, primes_only: bool) -> Result<Output, Error> {
    let ns: Vec<u64> = target.values().into_iter().filter(|&n| !primes_only || is_prime(n)).collect();
    let mut results = Vec::new();
    let mut csv = String::from("n,r_star,predicted,t,ratio,base_congruence_max\n");
    let mut text = String::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut exit = 0;
    for &n in &ns {
        let (_, rep) = construct_best_coloring(&ZnContext::new(n)?, common.c_hat, &engine_config(common))?;
        let t = rep.measured.value;
        let ratio = t as f64 / rep.predicted;
        if rep.base_congruence_max > 1 {
            exit = EXIT_INVARIANT;
        }
        csv.push_str(&format!(
            "{n},{},{:.6},{t},{ratio:.6},{}\n",
            rep.r_star, rep.predicted, rep.base_congruence_max
        ));
        text.push_str(&format!("n={n}: T={t} r*={} predicted {:.3} ratio {ratio:.3}\n", rep.r_star, rep.predicted));
        xs.push((n as f64).ln());
        ys.push((t as f64).ln());
        results.push(to_value(&rep));
    }
    let fit = slope(&xs, &ys);
    match fit {
        Some(s) => {
            csv.push_str(&format!("# slope={s:.6}\n"));
            text.push_str(&format!("slope of log T against log n: {s:.4}\n"));
        }
        None => csv.push_str("# slope=\n"),
    }
    Ok(Output {
        command: "sweep",
        inputs: json!({ "n": ns, "primes_only": primes_only }),
        results,
        summary: Some(json!({ "slope": fit, "points": xs.len() })),
        csv,
        text,
        exit,
    })
}

fn render(common: &Common, out: &Output) -> String {
    match common.format {
        Format::Json => {
            let meta = Meta {
                tool: "zndisc",
                version: env!("CARGO_PKG_VERSION"),
                command: out.command,
                config: common,
            };
            let doc = Document { meta, inputs: &out.inputs, results: &out.results, summary: out.summary.as_ref() };
            let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => format!(
            "# zndisc {} {} seed={} c_hat={} kappa={} budget={}\n{}",
            env!("CARGO_PKG_VERSION"),
            out.command,
            common.seed,
            common.c_hat,
            common.kappa,
            common.budget,
            out.csv
        ),
        Format::Text => out.text.clone(),
    }
}

fn emit(common: &Common, body: &str) -> Result<(), String> {
    match &common.out {
        Some(path) => std::fs::write(path, body).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| format!("stdout: {e}")),
    }
}

fn run(cli: &Cli) -> Result<Output, (u8, String)> {
    let c = &cli.common;
    if !(c.kappa >= 1.0) {
        return Err((EXIT_USAGE, format!("--kappa must be at least 1, got {}", c.kappa)));
    }
    if c.workers == 0 {
        return Err((EXIT_USAGE, "--workers must be at least 1".into()));
    }
    let wrap = |r: Result<Output, Error>| r.map_err(|e| (exit_code(&e), e.to_string()));
    match &cli.command {
        Command::Bounds { target } => wrap(bounds(c, target)),
        Command::Construct { n } => wrap(construct(c, *n)),
        Command::Measure { input } => measure_file(c, input).map_err(|e| (EXIT_USAGE, e)),
        Command::Exact { n, method, limit } => wrap(exact(c, *n, *method, *limit)),
        Command::Herdisc { n, limit } => wrap(herdisc(*n, *limit)),
        Command::FourierCheck { n, trials } => wrap(fourier(c, *n, *trials)),
        Command::Sweep { target, primes_only } => wrap(sweep(c, target, *primes_only)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => match emit(&cli.common, &render(&cli.common, &out)) {
            Ok(()) => ExitCode::from(out.exit),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
