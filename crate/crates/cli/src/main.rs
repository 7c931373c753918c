use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pathvar::acceptance::run_all;
use pathvar::calculus::{change_of_variable_residual, FunctionWithDerivatives};
use pathvar::construct::{
    recipe, reference_path, variation_constant, variation_constant_exact, Method, SignRule, UniformMagnitudeSpec,
};
use pathvar::partition::{build_homeomorphism, set_max_intervals, RefiningTable};
use pathvar::schauder::SampledPath;
use pathvar::timechange::{pullback_path, transported_pvar_check};
use pathvar::variation::{coarse_indices, profiles_to_csv, pvar_profile, VariationProfile};

#[derive(Parser)]
#[command(name = "pathvar", version, about = "Paths with prescribed p-th variation along refining partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
enum Command {
    /// Synthesize the reference path of a uniform-magnitude spec.
    Build(BuildArgs),
    /// Level-by-level p-variation profiles of a sampled path.
    Analyze(AnalyzeArgs),
    /// The variation constant C_{p,q,a}.
    Constant(ConstantArgs),
    /// A path whose p-th variation follows a given h.
    Recipe(RecipeArgs),
    /// Change-of-variable residual along a sampled path.
    Ito(ItoArgs),
    /// Pull a q-adic path back to a refining partition.
    Timechange(TimechangeArgs),
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Signs {
    Plus,
    Seeded,
}

#[derive(Args, Serialize)]
struct SpecArgs {
    #[arg(long, default_value_t = 2)]
    q: u32,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    levels: u32,
    #[arg(long, value_enum, default_value_t = Signs::Plus)]
    signs: Signs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Branch weights a_1..a_{q-1}, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
}

impl SpecArgs {
    fn spec(&self) -> pathvar::Result<UniformMagnitudeSpec> {
        let mut spec = UniformMagnitudeSpec::new(self.q, self.p, self.levels);
        if let Some(a) = &self.weights {
            spec = spec.with_weights(a.clone());
        }
        if let Signs::Seeded = self.signs {
            spec = spec.with_signs(SignRule::Seeded(self.seed));
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    spec: SpecArgs,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the coefficient array.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    input: PathBuf,
    #[arg(long)]
    p: f64,
    /// Expected level of the input; a mismatch is an error.
    #[arg(long)]
    levels: Option<u32>,
    /// Expected base of the input; a mismatch is an error.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, default_value_t = 10)]
    eval_level: u32,
    /// CSV, or JSON when the name ends in `.json`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Exact,
    #[value(alias = "monte-carlo")]
    Mc,
    #[value(alias = "closed-form")]
    Closed,
}

#[derive(Args, Serialize)]
struct ConstantArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    q: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// Enumeration depth; chosen from --tail when absent.
    #[arg(long = "J")]
    j: Option<u32>,
    #[arg(long = "N", default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tail: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Target {
    /// h(t) = t
    T,
    /// h(t) = e^t - 1
    Exp,
    /// h(t) = log(1 + t)
    Log,
    /// h(t) = t^2
    Square,
}

impl Target {
    fn h(self, t: f64) -> f64 {
        match self {
            Target::T => t,
            Target::Exp => t.exp() - 1.0,
            Target::Log => t.ln_1p(),
            Target::Square => t * t,
        }
    }

    fn hprime(self, t: f64) -> f64 {
        match self {
            Target::T => 1.0,
            Target::Exp => t.exp(),
            Target::Log => 1.0 / (1.0 + t),
            Target::Square => 2.0 * t,
        }
    }
}

#[derive(Args, Serialize)]
struct RecipeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum)]
    h: Target,
    /// Variation constant; computed by exact enumeration when absent.
    #[arg(long)]
    c_p: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
    /// CSV of the empirical profile next to the target.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FunctionArg {
    Y2,
    Y4,
    Exp,
}

#[derive(Args, Serialize)]
struct ItoArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    f: FunctionArg,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TableKind {
    Qadic,
    Squared,
    Random,
}

#[derive(Args, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["table", "generate"]))]
struct TimechangeArgs {
    input: PathBuf,
    /// Refining table JSON.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum)]
    generate: Option<TableKind>,
    /// Depth of a generated table; defaults to the input level.
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    table_out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Budget(String),
    Suite,
}

impl From<pathvar::Error> for Failure {
    fn from(e: pathvar::Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| io_fail(path, e))
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn read_path(path: &Path) -> Outcome<SampledPath> {
    SampledPath::from_json(&read(path)?).map_err(|e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Echo of the resolved configuration and its hash, written next to each
/// primary artifact.
struct Run {
    config: Value,
    hash: String,
}

impl Run {
    fn new(command: &Command) -> Self {
        let config = serde_json::to_value(command).expect("config serializes");
        let hash = hex::encode(Sha256::digest(config.to_string().as_bytes()));
        Self { config, hash }
    }

    fn finish(&self, primary: &Path, artifacts: &[&Path]) -> Outcome {
        let manifest = json!({
            "tool": "pathvar",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "config_hash": self.hash,
            "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write(&manifest_path(primary), &text)
    }

    fn stamp(&self, path: &mut SampledPath) {
        path.meta.extra.insert("config_hash".into(), self.hash.clone().into());
    }
}

fn build(args: &BuildArgs, run: &Run) -> Outcome {
    let spec = args.spec.spec()?;
    let mut x = reference_path(&spec, spec.levels)?;
    x.meta.extra.insert("spec".into(), serde_json::from_str(&spec.to_json()?).expect("spec json"));
    run.stamp(&mut x);
    write(&args.output, &x.to_json()?)?;
    let mut artifacts = vec![args.output.as_path()];
    if let Some(c) = &args.coefficients {
        write(c, &pathvar::construct::build_reference(&spec)?.to_json()?)?;
        artifacts.push(c);
    }
    println!("wrote {} values at level {} to {}", x.values.len(), x.level(), args.output.display());
    run.finish(&args.output, &artifacts)
}

fn analyze_cmd(args: &AnalyzeArgs, run: &Run) -> Outcome {
    let x = read_path(&args.input)?;
    if let Some(q) = args.q.filter(|&q| q != x.q()) {
        return Err(Failure::Usage(format!("input has q = {}, expected {q}", x.q())));
    }
    if let Some(n) = args.levels.filter(|&n| n != x.level()) {
        return Err(Failure::Usage(format!("input has level {}, expected {n}", x.level())));
    }
    let profiles = (0..=x.level())
        .map(|m| {
            let xm = x.subsample(m)?;
            pvar_profile(&xm, args.p, &coarse_indices(xm.q(), m, args.eval_level))
        })
        .collect::<pathvar::Result<Vec<VariationProfile>>>()?;
    let is_json = args.output.extension().is_some_and(|e| e == "json");
    let text = if is_json {
        let body = json!({ "config_hash": run.hash, "profiles": profiles });
        serde_json::to_string(&body).expect("profiles serialize")
    } else {
        profiles_to_csv(&profiles)
    };
    write(&args.output, &text)?;
    if let Some(v) = profiles.last().and_then(VariationProfile::terminal) {
        println!("level {} total {v:.17e}", x.level());
    }
    run.finish(&args.output, &[&args.output])
}

fn constant(args: &ConstantArgs, run: &Run) -> Outcome {
    let a = args.weights.clone().unwrap_or_default();
    let c = match (args.method, args.j) {
        (MethodArg::Exact, Some(j)) => variation_constant(args.p, args.q, &a, &Method::ExactEnumeration { j })?,
        (MethodArg::Exact, None) => variation_constant_exact(args.p, args.q, &a, args.tail)?,
        (MethodArg::Mc, _) => variation_constant(args.p, args.q, &a, &Method::MonteCarlo { n: args.n, seed: args.seed })?,
        (MethodArg::Closed, _) => variation_constant(args.p, args.q, &a, &Method::ClosedForm)?,
    };
    let mut body = serde_json::to_value(&c).expect("constant serializes");
    body["config_hash"] = run.hash.clone().into();
    let text = serde_json::to_string(&body).expect("constant serializes");
    println!("{text}");
    if let Some(out) = &args.output {
        write(out, &text)?;
        run.finish(out, &[out])?;
    }
    Ok(())
}

fn recipe_cmd(args: &RecipeArgs, run: &Run) -> Outcome {
    let spec = args.spec.spec()?;
    let c_p = match args.c_p {
        Some(c) => c,
        None => variation_constant_exact(spec.p, spec.q, &spec.a, 1e-6)?.value,
    };
    let h = args.h;
    let hp = SampledPath::qadic_fn(spec.q, spec.levels, |t| h.hprime(t))?;
    let out = recipe(&hp, &spec, c_p)?;
    if let Some(w) = &out.warning {
        eprintln!("warning: {w}");
    }
    let mut y = out.y;
    run.stamp(&mut y);
    write(&args.output, &y.to_json()?)?;
    let prof = pvar_profile(&y, spec.p, &out.target.eval_indices)?;
    let gap = prof.eval_points.iter().zip(&prof.values).map(|(&t, v)| (v - h.h(t)).abs()).fold(0.0, f64::max);
    println!("sup |[y](t) - h(t)| = {gap:.6e} at level {}", y.level());
    let mut artifacts = vec![args.output.as_path()];
    if let Some(path) = &args.profile {
        let mut csv = String::from("t,empirical,target\n");
        for (t, v) in prof.eval_points.iter().zip(&prof.values) {
            csv.push_str(&format!("{t:.16e},{v:.16e},{:.16e}\n", h.h(*t)));
        }
        write(path, &csv)?;
        artifacts.push(path);
    }
    run.finish(&args.output, &artifacts)
}

fn ito(args: &ItoArgs, run: &Run) -> Outcome {
    let y = read_path(&args.input)?;
    let order = args.p.round() as usize;
    let f = match args.f {
        FunctionArg::Y2 => FunctionWithDerivatives::monomial(2, order),
        FunctionArg::Y4 => FunctionWithDerivatives::monomial(4, order),
        FunctionArg::Exp => FunctionWithDerivatives::exp(order),
    };
    let r = change_of_variable_residual(&f, &y, args.p)?;
    write(&args.output, &r.to_csv())?;
    println!("sup residual {:.6e} at level {}", r.sup, r.level);
    run.finish(&args.output, &[&args.output])
}

fn timechange(args: &TimechangeArgs, run: &Run) -> Outcome {
    let x = read_path(&args.input)?;
    let depth = args.depth.unwrap_or(x.level());
    let table = match (&args.table, args.generate) {
        (Some(path), _) => RefiningTable::from_json(&read(path)?)?,
        (None, Some(TableKind::Qadic)) => RefiningTable::qadic(x.q(), depth)?,
        (None, Some(TableKind::Squared)) => RefiningTable::squared(x.q(), depth)?,
        (None, Some(TableKind::Random)) => RefiningTable::random(x.q(), depth, args.seed)?,
        (None, None) => unreachable!("clap requires a table source"),
    };
    let phi = build_homeomorphism(&table)?;
    let mut y = pullback_path(&x, &phi)?;
    let gap = transported_pvar_check(&x, &phi, args.p, x.level())?;
    run.stamp(&mut y);
    write(&args.output, &y.to_json()?)?;
    let mut artifacts = vec![args.output.as_path()];
    if let Some(path) = &args.table_out {
        write(path, &table.to_json()?)?;
        artifacts.push(path);
    }
    println!("transport identity gap {gap:.3e} at level {}", x.level());
    run.finish(&args.output, &artifacts)
}

fn selftest() -> Outcome {
    let results = run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        return Err(Failure::Suite);
    }
    Ok(())
}

fn budget_from_env() -> Outcome {
    if let Ok(v) = std::env::var("PVAR_MAX_INTERVALS") {
        let limit = v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&l| l > 0)
            .ok_or_else(|| Failure::Usage(format!("PVAR_MAX_INTERVALS must be a positive integer, got {v:?}")))?;
        set_max_intervals(limit);
    }
    Ok(())
}

fn dispatch(command: &Command) -> Outcome {
    budget_from_env()?;
    let run = Run::new(command);
    match command {
        Command::Build(a) => build(a, &run),
        Command::Analyze(a) => analyze_cmd(a, &run),
        Command::Constant(a) => constant(a, &run),
        Command::Recipe(a) => recipe_cmd(a, &run),
        Command::Ito(a) => ito(a, &run),
        Command::Timechange(a) => timechange(a, &run),
        Command::Selftest => selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(3)
        }
        Err(Failure::Suite) => ExitCode::from(1),
    }
}

