use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing_subscriber::EnvFilter;

use nnverif::analysis::{
    bias_report, read_records_csv, sensitivity_report, write_bias_csv, write_histogram_csv, CeDatabase,
};
use nnverif::bench::{density_trend, noise_sweep, write_bench_csv};
use nnverif::engine::{collect, noise_tolerance, verify, Engine, EngineConfig, Epsilon, GridStep, Verdict};
use nnverif::kripke::{build_explicit_model, build_reduced_model, merge_equilabeled};
use nnverif::property::{
    acas_default_domain, acas_properties, NoiseSpec, Property, PropertyFile, RobustnessProperty,
};
use nnverif::segmentation::{coarse_grid_verify, ris_verify, PlanFile};
use nnverif::{parse_json_net, parse_nnet, Error, Network, OutputConvention, OutputSpace};

const EXIT_ERROR: u8 = 3;
const EXIT_USAGE: u8 = 4;

/// Verify robustness and safety of feed-forward ReLU networks.
///
/// Exit codes: 0 UNSAT or NONE_FOUND, 1 SAT, 2 TIMEOUT, 3 runtime error,
/// 4 usage error. JSON results go to stdout, summaries to stderr.
#[derive(Parser, Debug)]
#[command(name = "nnverif", version)]
struct Cli {
    /// Where to write the run manifest.
    #[arg(long, global = true, default_value = "nnverif-manifest.json")]
    manifest: PathBuf,
    /// Skip writing the run manifest.
    #[arg(long, global = true)]
    no_manifest: bool,
    /// Log verbosity (-v debug, -vv trace). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify one robustness or safety property.
    Verify(VerifyArgs),
    /// Find the largest scheduled noise level at which a seed stays robust.
    Tolerance(ToleranceArgs),
    /// Collect counterexamples for one or more seeds into a database.
    Collect(CollectArgs),
    /// Report training bias or input-node sensitivity from a database.
    Analyze(AnalyzeArgs),
    /// Compare the explicit and reduced engines.
    Bench(BenchArgs),
    /// Print a Kripke structure in GraphViz dot format.
    EmitDot(DotArgs),
    /// Re-run a recorded manifest and check that the result is unchanged.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct NetArgs {
    /// Network file: `.nnet` or JSON.
    #[arg(long)]
    net: PathBuf,
    /// Override the network's output convention (`.nnet` files load as raw).
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ConventionArg {
    Argmax,
    Argmin,
    Raw,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum EngineArg {
    Explicit,
    Reduced,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Explicit => Engine::Explicit,
            EngineArg::Reduced => Engine::Reduced,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "reduced")]
    engine: EngineArg,
    /// Timeout in seconds (per sub-problem under segmentation).
    #[arg(long, env = "NNVERIF_TIMEOUT", default_value_t = 60.0)]
    timeout: f64,
    /// Explicit-engine grid step: one value, or one per input node.
    #[arg(long, value_delimiter = ',', conflicts_with = "divisions")]
    grid_step: Option<Vec<f64>>,
    /// Explicit-engine grid intervals per input node.
    #[arg(long, default_value_t = 20)]
    divisions: u64,
    /// Reduced-engine minimum box width, as a fraction of each node's width.
    #[arg(long, default_value_t = 1e-4, conflicts_with = "epsilon_abs")]
    epsilon: f64,
    /// Reduced-engine minimum box width in input units.
    #[arg(long)]
    epsilon_abs: Option<f64>,
    /// Random seed (segmentation pins).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Work budget: grid points or box pops; exhausting it reports TIMEOUT.
    #[arg(long)]
    max_work: Option<u64>,
}

impl EngineArgs {
    fn config(&self, max_counterexamples: usize) -> Result<EngineConfig, Error> {
        if !(self.timeout >= 0.0) || !self.timeout.is_finite() {
            return Err(Error::Config(format!("timeout must be a finite number of seconds, got {}", self.timeout)));
        }
        let grid_step = match &self.grid_step {
            Some(v) if v.len() == 1 => GridStep::Scalar(v[0]),
            Some(v) => GridStep::PerNode(v.clone()),
            None => GridStep::Divisions(self.divisions),
        };
        let epsilon = match self.epsilon_abs {
            Some(e) => Epsilon::Absolute(e),
            None => Epsilon::Relative(self.epsilon),
        };
        Ok(EngineConfig {
            timeout: Duration::from_secs_f64(self.timeout),
            grid_step,
            epsilon,
            max_counterexamples,
            rng_seed: self.seed,
            max_work: self.max_work,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct SeedArgs {
    /// Seed input: a JSON array, `{"id":..,"input":[..]}`, or a list of those.
    #[arg(long)]
    seed_input: PathBuf,
    /// Nodes receiving noise, e.g. `1,1,0,1`; default all.
    #[arg(long, value_delimiter = ',')]
    mask: Option<Vec<u8>>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Property file (`{"kind":"robustness"|"safety", ...}`).
    #[arg(long, conflicts_with_all = ["acas", "seed_input"])]
    property: Option<PathBuf>,
    /// Built-in ACAS Xu property.
    #[arg(long, value_enum, conflicts_with = "seed_input")]
    acas: Option<AcasArg>,
    /// Seed input for a robustness query (with --noise).
    #[arg(long, requires = "noise")]
    seed_input: Option<PathBuf>,
    /// Noise percent for a robustness query.
    #[arg(long)]
    noise: Option<f64>,
    /// Noisy-node mask for --seed-input.
    #[arg(long, value_delimiter = ',')]
    mask: Option<Vec<u8>>,
    /// Evaluate safety constraints on normalized scores.
    #[arg(long, value_enum)]
    output_space: Option<SpaceArg>,
    /// Segmentation plan (safety only).
    #[arg(long, conflicts_with = "coarse_steps")]
    plan: Option<PathBuf>,
    /// Override the plan's repeats per bin combination.
    #[arg(long, requires = "plan")]
    samples_per_bin: Option<u32>,
    /// Coarse-grain sampling steps per input node (safety only).
    #[arg(long, value_delimiter = ',')]
    coarse_steps: Option<Vec<f64>>,
    /// Worker threads for segmentation.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum AcasArg {
    P1,
    P2,
    P3,
    P4,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SpaceArg {
    Normalized,
    Denormalized,
}

impl From<SpaceArg> for OutputSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Normalized => OutputSpace::Normalized,
            SpaceArg::Denormalized => OutputSpace::Denormalized,
        }
    }
}

#[derive(Args, Debug)]
struct ToleranceArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Strictly decreasing noise percents.
    #[arg(long, value_delimiter = ',', default_value = "40,30,20,11,10,5,1")]
    schedule: Vec<f64>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args, Debug)]
struct CollectArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    noise: f64,
    /// Maximum counterexamples per seed.
    #[arg(long, default_value_t = 1000)]
    max: usize,
    /// Database output path.
    #[arg(long, default_value = "cedb.json")]
    db: PathBuf,
    /// Also export records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ReportArg {
    Bias,
    Sensitivity,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Database (`cedb.json`), or a records CSV.
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_enum)]
    report: ReportArg,
    /// Histogram bins per node.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Bias when out(A)/in(A) falls below this ratio.
    #[arg(long, default_value_t = 0.25)]
    bias_ratio: f64,
    /// Flag a node when a noise sign occurs in fewer than this fraction of records.
    #[arg(long, default_value_t = 0.05)]
    sign_threshold: f64,
    /// Export the report table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Noise percents to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2,5,8,10")]
    sweep: Vec<f64>,
    /// Instead of the sweep, compare engines across grid densities
    /// (intervals per node) at the first sweep level.
    #[arg(long, value_delimiter = ',')]
    density: Option<Vec<u64>>,
    /// Runs per measurement (minimum time is reported).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModelArg {
    Explicit,
    Reduced,
}

#[derive(Args, Debug)]
struct DotArgs {
    #[arg(long, value_enum, default_value = "explicit")]
    model: ModelArg,
    /// Noise options (explicit model).
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Merge equally labeled states first.
    #[arg(long)]
    merge: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    path: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    subcommand: String,
    argv: Vec<String>,
    config: Value,
    /// SHA-256 of every input file.
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    exit_code: u8,
    /// The deterministic part of the result (timings and timestamps removed).
    result: Value,
}

struct Outcome {
    stdout: String,
    summary: String,
    code: u8,
    config: Value,
    seed: Option<u64>,
    result: Value,
}

#[derive(Default)]
struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.0
            .insert(path.display().to_string(), hex::encode(Sha256::digest(text.as_bytes())));
        Ok(text)
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let default = match cli.verbose {
        0 => "warn",
        1 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)))
        .with_writer(std::io::stderr)
        .init();

    match run(cli, &argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<u8, Error> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.path);
    }
    let mut inputs = Inputs::default();
    let name = subcommand_name(&cli.command);
    let out = execute(&cli.command, &mut inputs)?;
    print!("{}", out.stdout);
    if !out.summary.is_empty() {
        eprintln!("{}", out.summary);
    }
    if !cli.no_manifest {
        let manifest = RunManifest {
            tool: "nnverif".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: name.into(),
            argv: argv.to_vec(),
            config: out.config,
            inputs: inputs.0,
            seed: out.seed,
            exit_code: out.code,
            result: out.result,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&cli.manifest, text).map_err(|e| Error::io(&cli.manifest, e))?;
    }
    Ok(out.code)
}

fn replay(path: &Path) -> Result<u8, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let cli = Cli::try_parse_from(&manifest.argv)
        .map_err(|e| Error::Config(format!("manifest argv does not parse: {e}")))?;
    let mut inputs = Inputs::default();
    let out = execute(&cli.command, &mut inputs)?;
    for (file, hash) in &manifest.inputs {
        if inputs.0.get(file) != Some(hash) {
            return Err(Error::Config(format!("input `{file}` changed since the recorded run")));
        }
    }
    print!("{}", out.stdout);
    if out.result != manifest.result || out.code != manifest.exit_code {
        return Err(Error::Config("replayed result differs from the manifest".into()));
    }
    eprintln!("replay: result reproduced (exit code {})", out.code);
    Ok(out.code)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Verify(_) => "verify",
        Command::Tolerance(_) => "tolerance",
        Command::Collect(_) => "collect",
        Command::Analyze(_) => "analyze",
        Command::Bench(_) => "bench",
        Command::EmitDot(_) => "emit-dot",
        Command::Replay(_) => "replay",
    }
}

fn execute(command: &Command, inputs: &mut Inputs) -> Result<Outcome, Error> {
    match command {
        Command::Verify(a) => cmd_verify(a, inputs),
        Command::Tolerance(a) => cmd_tolerance(a, inputs),
        Command::Collect(a) => cmd_collect(a, inputs),
        Command::Analyze(a) => cmd_analyze(a, inputs),
        Command::Bench(a) => cmd_bench(a, inputs),
        Command::EmitDot(a) => cmd_emit_dot(a),
        Command::Replay(_) => unreachable!("handled before dispatch"),
    }
}

fn load_net(args: &NetArgs, inputs: &mut Inputs) -> Result<Network, Error> {
    let text = inputs.read(&args.net)?;
    let is_nnet = args.net.extension().is_some_and(|e| e.eq_ignore_ascii_case("nnet"));
    let net = if is_nnet { parse_nnet(&text)? } else { parse_json_net(&text)? };
    Ok(match args.convention {
        Some(ConventionArg::Argmax) => net.with_convention(OutputConvention::Argmax),
        Some(ConventionArg::Argmin) => net.with_convention(OutputConvention::Argmin),
        Some(ConventionArg::Raw) => net.with_convention(OutputConvention::Raw),
        None => net,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedFile {
    Vector(Vec<f64>),
    One(SeedSpec),
    Many(Vec<SeedSpec>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedSpec {
    id: String,
    input: Vec<f64>,
}

fn load_seeds(path: &Path, inputs: &mut Inputs) -> Result<Vec<SeedSpec>, Error> {
    let text = inputs.read(path)?;
    let parsed: SeedFile = serde_json::from_str(&text).map_err(|_| Error::Schema {
        path: path.display().to_string(),
        message: "expected an array of numbers, {\"id\",\"input\"}, or a list of those".into(),
    })?;
    let seeds = match parsed {
        SeedFile::Vector(v) => vec![SeedSpec { id: "seed".into(), input: v }],
        SeedFile::One(s) => vec![s],
        SeedFile::Many(v) => v,
    };
    if seeds.is_empty() {
        return Err(Error::InvalidProperty("seed file lists no seeds".into()));
    }
    Ok(seeds)
}

fn noise_spec(percent: f64, mask: &Option<Vec<u8>>, nodes: usize) -> Result<NoiseSpec, Error> {
    match mask {
        Some(m) => NoiseSpec::new(percent, m.iter().map(|&b| b != 0).collect()),
        None => NoiseSpec::uniform(percent, nodes),
    }
}

fn robustness_props(
    net: &Network,
    seed: &SeedArgs,
    percent: f64,
    inputs: &mut Inputs,
) -> Result<Vec<RobustnessProperty>, Error> {
    load_seeds(&seed.seed_input, inputs)?
        .into_iter()
        .map(|s| {
            let spec = noise_spec(percent, &seed.mask, s.input.len())?;
            RobustnessProperty::new(net, s.id, s.input, spec)
        })
        .collect()
}

fn summary_of(v: &Verdict) -> String {
    let mut s = format!(
        "{}: {} points, {} boxes, {:.1} ms",
        v.kind.as_str(),
        v.stats.points,
        v.stats.boxes_explored,
        v.stats.wall_ms
    );
    if let Some(n) = v.stats.subproblems {
        s.push_str(&format!(", {n} sub-problems"));
    }
    if let Some(w) = &v.witness {
        s.push_str(&format!("; witness {:?}", w.input));
    }
    s
}

/// Drop timings and timestamps so results compare across runs.
fn deterministic(mut v: Value) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(m) => {
                m.retain(|k, _| !matches!(k.as_str(), "wall_ms" | "timestamp" | "created"));
                m.values_mut().for_each(strip);
            }
            Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}

fn json_outcome(value: Value, summary: String, code: u8, config: Value, seed: Option<u64>) -> Outcome {
    let stdout = format!("{}\n", serde_json::to_string(&value).expect("json"));
    Outcome {
        stdout,
        summary,
        code,
        config,
        seed,
        result: deterministic(value),
    }
}

fn cmd_verify(a: &VerifyArgs, inputs: &mut Inputs) -> Result<Outcome, Error> {
    let net = load_net(&a.net, inputs)?;
    let cfg = a.engine.config(usize::MAX)?;
    let mut prop = if let Some(path) = &a.property {
        PropertyFile::parse(&inputs.read(path)?)?.resolve(&net)?
    } else if let Some(p) = a.acas {
        let domain = net.input_domain().unwrap_or_else(acas_default_domain);
        let idx = match p {
            AcasArg::P1 => 0,
            AcasArg::P2 => 1,
            AcasArg::P3 => 2,
            AcasArg::P4 => 3,
        };
        Property::Safety(acas_properties(&domain)?.swap_remove(idx))
    } else if let (Some(seed_path), Some(noise)) = (&a.seed_input, a.noise) {
        let seed = SeedArgs { seed_input: seed_path.clone(), mask: a.mask.clone() };
        let mut props = robustness_props(&net, &seed, noise, inputs)?;
        if props.len() != 1 {
            return Err(Error::Config("verify takes exactly one seed".into()));
        }
        Property::Robustness(props.remove(0))
    } else {
        return Err(Error::Config("give --property, --acas, or --seed-input with --noise".into()));
    };
    if let (Some(space), Property::Safety(s)) = (a.output_space, &mut prop) {
        s.output_space = space.into();
    }
    let engine: Engine = a.engine.engine.into();
    let verdict = match (&prop, &a.plan, &a.coarse_steps) {
        (Property::Safety(s), Some(plan_path), _) => {
            let mut file = PlanFile::parse(&inputs.read(plan_path)?)?;
            if let Some(k) = a.samples_per_bin {
                file.samples_per_bin = k;
            }
            if a.engine.seed != 0 {
                file.seed = a.engine.seed;
            }
            let plan = file.into_plan(s.input_box.clone())?;
            ris_verify(&net, s, &plan, engine, &cfg, a.parallel)?
        }
        (Property::Safety(s), None, Some(steps)) => coarse_grid_verify(&net, s, steps, &cfg)?,
        (Property::Robustness(_), Some(_), _) | (Property::Robustness(_), _, Some(_)) => {
            return Err(Error::Config("segmentation and coarse-grain sampling apply to safety properties".into()))
        }
        _ => verify(&net, &prop, engine, &cfg)?,
    };
    let config = json!({ "engine": engine, "engine_config": cfg, "property": prop, "parallel": a.parallel });
    let value = serde_json::to_value(&verdict)?;
    Ok(json_outcome(
        value,
        summary_of(&verdict),
        verdict.kind.exit_code() as u8,
        config,
        Some(cfg.rng_seed),
    ))
}

fn cmd_tolerance(a: &ToleranceArgs, inputs: &mut Inputs) -> Result<Outcome, Error> {
    let net = load_net(&a.net, inputs)?;
    let cfg = a.engine.config(usize::MAX)?;
    let first = *a.schedule.first().ok_or_else(|| Error::Config("empty schedule".into()))?;
    let mut props = robustness_props(&net, &a.seed, first, inputs)?;
    if props.len() != 1 {
        return Err(Error::Config("tolerance takes exactly one seed".into()));
    }
    let prop = props.remove(0);
    let engine: Engine = a.engine.engine.into();
    let report = noise_tolerance(&net, &prop, &a.schedule, engine, &cfg)?;
    let summary = match (report.tolerance_percent, report.below_percent) {
        (Some(t), _) => format!("noise tolerance: {t}%"),
        (None, Some(b)) => format!("noise tolerance: < {b}%"),
        _ => String::new(),
    };
    let config = json!({ "engine": engine, "engine_config": cfg, "schedule": a.schedule, "seed": prop.seed });
    Ok(json_outcome(serde_json::to_value(&report)?, summary, 0, config, None))
}

fn cmd_collect(a: &CollectArgs, inputs: &mut Inputs) -> Result<Outcome, Error> {
    let net = load_net(&a.net, inputs)?;
    let cfg = a.engine.config(a.max)?;
    let props = robustness_props(&net, &a.seed, a.noise, inputs)?;
    let engine: Engine = a.engine.engine.into();
    let ids: Vec<Property> = props.iter().cloned().map(Property::Robustness).collect();
    let property_hash = hex::encode(Sha256::digest(serde_json::to_string(&ids)?.as_bytes()));
    let mut db = CeDatabase::with_property_hash(&net, property_hash, &cfg);
    let mut per_seed = Vec::new();
    for prop in &props {
        let c = collect(&net, prop, engine, &cfg)?;
        db.add_collection(&net, prop, &c.counterexamples)?;
        per_seed.push(json!({ "seed_id": prop.id, "found": c.counterexamples.len(), "stop": c.stop }));
    }
    db.save_json(&a.db)?;
    if let Some(csv) = &a.csv {
        db.write_csv(csv)?;
    }
    let value = json!({ "db": a.db, "records": db.records.len(), "seeds": per_seed });
    let summary = format!("collected {} counterexamples from {} seeds", db.records.len(), props.len());
    let config = json!({ "engine": engine, "engine_config": cfg, "noise": a.noise, "max": a.max });
    Ok(json_outcome(value, summary, 0, config, None))
}

fn cmd_analyze(a: &AnalyzeArgs, inputs: &mut Inputs) -> Result<Outcome, Error> {
    let net = load_net(&a.net, inputs)?;
    let text = inputs.read(&a.db)?;
    let is_csv = a.db.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let db = if is_csv {
        let mut db = CeDatabase::with_property_hash(&net, String::new(), &EngineConfig::default());
        db.records = read_records_csv(text.as_bytes(), &net)?;
        db
    } else {
        CeDatabase::from_json(&text, &net)?
    };
    let config = json!({ "report": format!("{:?}", a.report).to_lowercase(), "bins": a.bins,
        "bias_ratio": a.bias_ratio, "sign_threshold": a.sign_threshold });
    let (value, summary) = match a.report {
        ReportArg::Bias => {
            let rep = bias_report(&db, a.bias_ratio);
            if let Some(path) = &a.csv {
                let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
                write_bias_csv(&rep, f)?;
            }
            let summary = format!("bias: {:?} {:?}", rep.verdict, rep.biased_toward);
            (serde_json::to_value(&rep)?, summary)
        }
        ReportArg::Sensitivity => {
            let rep = sensitivity_report(&db, a.bins, a.sign_threshold)?;
            if let Some(path) = &a.csv {
                let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
                write_histogram_csv(&rep, f)?;
            }
            let flagged: Vec<String> = rep
                .nodes
                .iter()
                .filter(|n| n.insensitive_to_positive || n.insensitive_to_negative)
                .map(|n| format!("i{}", n.node + 1))
                .collect();
            (serde_json::to_value(&rep)?, format!("sensitivity: flagged nodes {flagged:?}"))
        }
    };
    Ok(json_outcome(value, summary, 0, config, None))
}

fn cmd_bench(a: &BenchArgs, inputs: &mut Inputs) -> Result<Outcome, Error> {
    let net = load_net(&a.net, inputs)?;
    let cfg = a.engine.config(usize::MAX)?;
    let first = *a.sweep.first().ok_or_else(|| Error::Config("empty sweep".into()))?;
    let mut props = robustness_props(&net, &a.seed, first, inputs)?;
    if props.len() != 1 {
        return Err(Error::Config("bench takes exactly one seed".into()));
    }
    let base = props.remove(0);
    let mut buf = Vec::new();
    let (result, summary) = if let Some(divs) = &a.density {
        let rows = density_trend(&net, &Property::Robustness(base), divs, a.repeats, &cfg)?;
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["divisions", "engine", "wall_ms", "work", "verdict"])?;
        for r in &rows {
            for (engine, ms, work, kind) in [
                ("explicit", r.explicit_ms, r.explicit_points, r.explicit_verdict),
                ("reduced", r.reduced_ms, r.reduced_boxes, r.reduced_verdict),
            ] {
                w.write_record(&[r.divisions.to_string(), engine.into(), format!("{ms:.6}"), work.to_string(), kind.as_str().into()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<stdout>", e))?;
        drop(w);
        (serde_json::to_value(&rows)?, format!("{} density levels", rows.len()))
    } else {
        let rows = noise_sweep(&net, &base, &a.sweep, &cfg)?;
        write_bench_csv(&rows, &mut buf)?;
        (serde_json::to_value(&rows)?, format!("{} rows", rows.len()))
    };
    let csv_text = String::from_utf8(buf).expect("csv is utf-8");
    let stdout = match &a.csv {
        Some(path) => {
            fs::write(path, &csv_text).map_err(|e| Error::io(path, e))?;
            String::new()
        }
        None => csv_text,
    };
    let config = json!({ "engine_config": cfg, "sweep": a.sweep, "density": a.density, "repeats": a.repeats });
    Ok(Outcome {
        stdout,
        summary,
        code: 0,
        config,
        seed: None,
        result: deterministic(result),
    })
}

fn cmd_emit_dot(a: &DotArgs) -> Result<Outcome, Error> {
    let m = match a.model {
        ModelArg::Explicit => build_explicit_model(a.n, a.classes)?,
        ModelArg::Reduced => build_reduced_model(a.classes)?,
    };
    let m = if a.merge { merge_equilabeled(&m) } else { m };
    let dot = m.to_dot();
    Ok(Outcome {
        summary: format!("{} states, {} transitions", m.state_count(), m.transition_count()),
        code: 0,
        config: json!({ "model": format!("{:?}", a.model).to_lowercase(), "n": a.n, "classes": a.classes, "merge": a.merge }),
        seed: None,
        result: Value::String(dot.clone()),
        stdout: dot,
    })
}
