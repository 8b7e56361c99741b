//! Command-line front end: one binary, a subcommand per module, reports as
//! UTF-8 JSON or RFC-4180 CSV. Identical invocations produce identical
//! bytes; every random stream derives from the `--seed` flag.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uirisk::convergence::{
    es_convergence_experiment, lln_experiment, subsequence_extract, SampleGenerator,
};
use uirisk::folding::{counterexample_gallery, empirical_folding_score, SearchConfig};
use uirisk::invest::{prop61_experiment, solve_eps, InvestProblem};
use uirisk::ui::{dyadic_grid, tail_envelope, ui_from_distortion};
use uirisk::{
    seeding, DiscreteDistribution, DistortionFunction, DistributionFamily, Position, RiskMeasure,
};

#[derive(Parser)]
#[command(name = "uirisk", version, about = "Distortion risk measures, folding scores, and uniform-integrability diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate risk measures on distributions or cell vectors
    #[command(subcommand)]
    Risk(RiskCmd),
    /// Folding-score searches and reports
    #[command(subcommand)]
    Fold(FoldCmd),
    /// Uniform-integrability diagnostics on distribution families
    #[command(subcommand)]
    Ui(UiCmd),
    /// Convergence experiments
    #[command(subcommand)]
    Conv(ConvCmd),
    /// Risk- and budget-constrained investment
    #[command(subcommand)]
    Invest(InvestCmd),
    /// Emit the gallery of measures with infinite or stressed folding score
    Gallery(GalleryArgs),
}

#[derive(Subcommand)]
enum RiskCmd {
    /// Evaluate a measure spec on a law or a cell vector
    Eval(RiskEvalArgs),
}

#[derive(Args)]
struct RiskEvalArgs {
    /// Measure spec: inline JSON like '{"kind":"es_clip","p":0.75}' or a path to a JSON file
    #[arg(long)]
    measure: String,
    /// Distribution file (.json with atoms/weights, or .csv)
    #[arg(long, conflicts_with = "cells", required_unless_present = "cells")]
    dist: Option<PathBuf>,
    /// Cell values for scenario/capacity measures, e.g. 1,0,-1
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    cells: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand)]
enum FoldCmd {
    /// Search for a high folding ratio and report ratio, bound, witness
    Score(FoldScoreArgs),
}

#[derive(Args)]
struct FoldScoreArgs {
    /// Measure spec (inline JSON or a path)
    #[arg(long)]
    measure: String,
    /// Search budget, e.g. k=4,iters=1e5,seed=7 (atom count, iterations, seed)
    #[arg(long)]
    search: Option<String>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand)]
enum UiCmd {
    /// Tail envelopes and a UI verdict for a family
    Check(UiCheckArgs),
}

#[derive(Args)]
struct UiCheckArgs {
    /// Builtin family (nbern, shift, bounded, alt, heavy) or a directory of CSV laws
    #[arg(long)]
    family: String,
    /// Members evaluated for generator-backed families
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    horizon: usize,
    /// Level grid: dyadic:K gives p = 1-2^-k for k = 1..K
    #[arg(long, default_value = "dyadic:20")]
    grid: String,
    /// Diagnose through a single distortion envelope instead of the tail grid
    #[arg(long)]
    distortion: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand)]
enum ConvCmd {
    /// Weak-law exceedance trajectories for iid means
    Lln(ConvLlnArgs),
    /// Expected-shortfall stability along a convergent sequence of laws
    Es(ConvEsArgs),
    /// Greedy extraction of a w1-convergent subsequence
    Subseq(ConvSubseqArgs),
}

#[derive(Args)]
struct ConvLlnArgs {
    /// Sample generator: coin, pareto:ALPHA, or const:V
    #[arg(long)]
    gen: String,
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    nmax: usize,
    #[arg(long, default_value = "200", value_parser = parse_count)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Distortion for the positive-part envelope (default ies)
    #[arg(long)]
    rho: Option<String>,
    /// Distortion for the negative-part envelope (default ies)
    #[arg(long = "rho-prime")]
    rho_prime: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ConvEsArgs {
    /// Target law (.json or .csv)
    #[arg(long)]
    target: PathBuf,
    /// How the approximating sequence is built
    #[arg(long, value_enum, default_value_t = EsScheme::Shift)]
    scheme: EsScheme,
    /// Sequence length
    #[arg(long, default_value = "8", value_parser = parse_count)]
    steps: usize,
    /// Shortfall levels
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.9,0.99")]
    ps: Vec<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum EsScheme {
    /// F_n = target shifted by 1/n
    Shift,
    /// F_n = empirical law of 50*2^(n-1) seeded draws from the target
    Empirical,
}

#[derive(Args)]
struct ConvSubseqArgs {
    /// Builtin family (nbern, shift, bounded, alt, heavy) or a directory of CSV laws
    #[arg(long)]
    family: String,
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    horizon: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand)]
enum InvestCmd {
    /// Solve one instance against its own background law
    Solve(InvestSolveArgs),
    /// Run the sample-convergence experiment with shrinking tolerances
    Prop61(InvestProp61Args),
}

#[derive(Args)]
struct InvestSolveArgs {
    /// Problem spec JSON; omitted means the shipped default instance
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct InvestProp61Args {
    /// Problem spec JSON; omitted means the shipped default instance
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "6", value_parser = parse_count)]
    rounds: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct GalleryArgs {
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct OutArg {
    /// Write the report to this path instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print_all(&e.to_string());
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                return fail("missing subcommand (try --help)");
            }
            return fail(first_line(&e.to_string()));
        }
    };
    if let Err(msg) = init_thread_pool() {
        return fail(&msg);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => fail(&msg),
    }
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn first_line(rendered: &str) -> &str {
    let line = rendered
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments");
    line.strip_prefix("error: ").unwrap_or(line)
}

/// UIRISK_THREADS caps the worker count for every parallel stage.
fn init_thread_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var("UIRISK_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| format!("UIRISK_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Risk(RiskCmd::Eval(args)) => risk_eval(args),
        Command::Fold(FoldCmd::Score(args)) => fold_score(args),
        Command::Ui(UiCmd::Check(args)) => ui_check(args),
        Command::Conv(ConvCmd::Lln(args)) => conv_lln(args),
        Command::Conv(ConvCmd::Es(args)) => conv_es(args),
        Command::Conv(ConvCmd::Subseq(args)) => conv_subseq(args),
        Command::Invest(InvestCmd::Solve(args)) => invest_solve(args),
        Command::Invest(InvestCmd::Prop61(args)) => invest_prop61(args),
        Command::Gallery(args) => gallery(args),
    }
}

fn risk_eval(args: RiskEvalArgs) -> Result<(), String> {
    let measure: RiskMeasure = load_spec(&args.measure, "measure")?;
    let position = match (&args.dist, args.cells) {
        (Some(path), None) => Position::Law(load_dist(path)?),
        (None, Some(cells)) => Position::Cells(cells),
        _ => unreachable!("clap enforces exactly one input"),
    };
    let value = measure.evaluate(&position).map_err(stringify)?;
    let report = serde_json::json!({ "measure": measure, "value": value });
    emit(&args.out, &to_json(&report))
}

fn fold_score(args: FoldScoreArgs) -> Result<(), String> {
    let measure: RiskMeasure = load_spec(&args.measure, "measure")?;
    let config = match &args.search {
        Some(s) => parse_search(s)?,
        None => SearchConfig::default(),
    };
    let report = empirical_folding_score(&measure, &config).map_err(stringify)?;
    emit(&args.out, &to_json(&report))
}

fn ui_check(args: UiCheckArgs) -> Result<(), String> {
    let family = resolve_family(&args.family, args.horizon)?;
    if let Some(spec) = &args.distortion {
        let h: DistortionFunction = load_spec(spec, "distortion")?;
        let report = ui_from_distortion(&family, &h).map_err(stringify)?;
        let text = match args.format {
            Format::Json => to_json(&report),
            Format::Csv => {
                let rows = report
                    .checkpoints
                    .iter()
                    .zip(&report.sups)
                    .map(|(n, s)| vec![n.to_string(), s.to_string()])
                    .collect();
                to_csv(&["n", "sup"], rows)
            }
        };
        return emit(&args.out, &text);
    }
    let grid = parse_grid(&args.grid)?;
    let report = tail_envelope(&family, &grid).map_err(stringify)?;
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let rows = (0..report.p_grid.len())
                .map(|i| {
                    vec![
                        report.p_grid[i].to_string(),
                        report.env_abs[i].to_string(),
                        report.env_plus[i].to_string(),
                        report.env_minus[i].to_string(),
                    ]
                })
                .collect();
            to_csv(&["p", "env_abs", "env_pos", "env_neg"], rows)
        }
    };
    emit(&args.out, &text)
}

fn conv_lln(args: ConvLlnArgs) -> Result<(), String> {
    let generator: SampleGenerator = args.gen.parse().map_err(stringify)?;
    let rho = match &args.rho {
        Some(s) => load_spec(s, "distortion")?,
        None => DistortionFunction::ies(),
    };
    let rho_prime = match &args.rho_prime {
        Some(s) => load_spec(s, "distortion")?,
        None => DistortionFunction::ies(),
    };
    let report = lln_experiment(&generator, args.nmax, args.reps, args.seed, &rho, &rho_prime)
        .map_err(stringify)?;
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.exceed_01.to_string(),
                        r.exceed_005.to_string(),
                        r.rho_env.to_string(),
                        r.rho_prime_env.to_string(),
                    ]
                })
                .collect();
            to_csv(
                &["n", "exceed_0.1", "exceed_0.05", "rho_env", "rhoprime_env"],
                rows,
            )
        }
    };
    emit(&args.out, &text)
}

fn conv_es(args: ConvEsArgs) -> Result<(), String> {
    let target = load_dist(&args.target)?;
    let seq: Vec<DiscreteDistribution> = match args.scheme {
        EsScheme::Shift => (1..=args.steps)
            .map(|n| target.shift(1.0 / n as f64))
            .collect::<Result<_, _>>()
            .map_err(stringify)?,
        EsScheme::Empirical => (0..args.steps)
            .map(|k| {
                use rand::Rng;
                let mut rng = seeding::stream_indexed(args.seed, "cli.conv.es", k as u64);
                let draws: Vec<f64> = (0..50usize << k)
                    .map(|_| target.sample_inverse(rng.random_range(0.0..1.0)))
                    .collect();
                DiscreteDistribution::from_samples(&draws).map_err(stringify)
            })
            .collect::<Result<_, _>>()?,
    };
    let report = es_convergence_experiment(&seq, &target, &args.ps).map_err(stringify)?;
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut header = vec!["n".to_string()];
            header.extend(report.ps.iter().map(|p| format!("err_{p}")));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = report
                .rows
                .iter()
                .map(|(n, errs)| {
                    let mut row = vec![n.to_string()];
                    row.extend(errs.iter().map(|e| e.to_string()));
                    row
                })
                .collect();
            to_csv(&header_refs, rows)
        }
    };
    emit(&args.out, &text)
}

fn conv_subseq(args: ConvSubseqArgs) -> Result<(), String> {
    let family = resolve_family(&args.family, args.horizon)?;
    let report = subsequence_extract(&family).map_err(stringify)?;
    emit(&args.out, &to_json(&report))
}

fn invest_solve(args: InvestSolveArgs) -> Result<(), String> {
    let prob = load_problem(args.spec.as_deref())?;
    let decision = solve_eps(&prob, &prob.y, args.eps, args.seed).map_err(stringify)?;
    let text = match args.format {
        Format::Json => to_json(&decision),
        Format::Csv => {
            let n = decision.x.len() as f64;
            let rows = decision
                .x
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![((i as f64 + 0.5) / n).to_string(), v.to_string()])
                .collect();
            to_csv(&["level", "quantile"], rows)
        }
    };
    emit(&args.out, &text)
}

fn invest_prop61(args: InvestProp61Args) -> Result<(), String> {
    let prob = load_problem(args.spec.as_deref())?;
    let report = prop61_experiment(&prob, args.rounds, None, None, args.seed).map_err(stringify)?;
    emit(&args.out, &to_json(&report))
}

fn gallery(args: GalleryArgs) -> Result<(), String> {
    emit(&args.out, &to_json(&counterexample_gallery()))
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
fn load_spec<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, String> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        read(Path::new(arg))?
    };
    serde_json::from_str(&text).map_err(|e| format!("bad {what} spec: {e}"))
}

fn load_dist(path: &Path) -> Result<DiscreteDistribution, String> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        DiscreteDistribution::from_csv(&text).map_err(stringify)
    } else {
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn load_problem(spec: Option<&Path>) -> Result<InvestProblem, String> {
    match spec {
        None => Ok(InvestProblem::default_instance()),
        Some(path) => {
            let text = read(path)?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}

fn resolve_family(name: &str, horizon: usize) -> Result<DistributionFamily, String> {
    let fam = match name {
        "nbern" => DistributionFamily::n_bernoulli(horizon),
        "shift" => DistributionFamily::generated("shrinking shift", horizon, |n| {
            DiscreteDistribution::uniform(&[-1.0, 0.0, 1.0])
                .expect("fixed atoms")
                .shift(1.0 / n as f64)
                .expect("finite shift")
        }),
        "bounded" => DistributionFamily::generated("bounded oscillation", horizon, |n| {
            let x = 2.0 + (n as f64).sin();
            DiscreteDistribution::uniform(&[-x, x]).expect("two atoms")
        }),
        "alt" => DistributionFamily::generated("alternating pair", horizon, |n| {
            let atoms: &[f64] = if n % 2 == 1 { &[-1.0, 1.0] } else { &[-2.0, 2.0] };
            DiscreteDistribution::uniform(atoms).expect("two atoms")
        }),
        "heavy" => Ok(DistributionFamily::single(
            "heavy quadrature",
            DiscreteDistribution::heavy_integrable_quadrature(200).expect("fixed depth"),
        )),
        path if Path::new(path).is_dir() => DistributionFamily::from_csv_dir(Path::new(path)),
        other => {
            return Err(format!(
                "unknown family {other:?}: expected nbern, shift, bounded, alt, heavy, or a directory of CSV laws"
            ))
        }
    };
    fam.map_err(stringify)
}

/// k=4,iters=1e5,seed=7 with any subset of the three keys.
fn parse_search(s: &str) -> Result<SearchConfig, String> {
    let mut config = SearchConfig::default();
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("search term {part:?} is not key=value"))?;
        match key.trim() {
            "k" => config.atoms = parse_count(value)?,
            "iters" => config.iters = parse_count(value)? as u64,
            "seed" => {
                config.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| format!("seed {value:?} is not an integer"))?
            }
            other => return Err(format!("unknown search key {other:?}")),
        }
    }
    Ok(config)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let depth = s
        .strip_prefix("dyadic:")
        .and_then(|k| k.parse::<u32>().ok())
        .filter(|&k| (1..=53).contains(&k))
        .ok_or_else(|| format!("grid {s:?}: expected dyadic:K with 1 <= K <= 53"))?;
    Ok(dyadic_grid(depth))
}

/// Accepts plain integers and exponent forms like 1e5.
fn parse_count(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s
        .parse()
        .map_err(|_| format!("count {s:?} is not a number"))?;
    if x.is_finite() && x >= 1.0 && x.fract() == 0.0 && x <= 2f64.powi(53) {
        Ok(x as usize)
    } else {
        Err(format!("count {s:?} is not a whole number in range"))
    }
}

fn stringify(e: impl Display) -> String {
    e.to_string()
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    text
}

/// Numeric-only tables: no field ever needs quoting.
fn to_csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push_str("\r\n");
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push_str("\r\n");
    }
    text
}

fn emit(out: &OutArg, text: &str) -> Result<(), String> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print_all(text);
            Ok(())
        }
    }
}

/// A closed pipe downstream (e.g. `| head`) is not an error worth a panic.
fn print_all(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}
