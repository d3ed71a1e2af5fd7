use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use netrand::config::{run_with_settings, TechniqueName, TestSettings};
use netrand::conditioning::epsilon_feasibility;
use netrand::data;
use netrand::exposure::{compute_exposures, exposure_cell_counts};
use netrand::graph::{degree_diagnostics, overlap_check};
use netrand::inference::StatKind;
use netrand::simulation::{run_table, Dgp, SimTechnique, TableId, TablePlan};
use netrand::{cell_label, Comparator, Error, NullFamily, Result};

#[derive(Parser)]
#[command(name = "netrand", version, about = "Randomization tests for effect heterogeneity on networks")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one randomization test on a node table and an edge list.
    Test(TestArgs),
    /// Reproduce a size/power table by Monte Carlo.
    Simulate(SimArgs),
    /// Overlap, sparsity and epsilon-feasibility diagnostics.
    Check(CheckArgs),
    /// Exposure counts per stratum.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct Inputs {
    /// CSV with columns id,y,t and optional x, stratum, weight.
    #[arg(long)]
    nodes: PathBuf,
    /// Edge list CSV (pairs of unit ids). Omit for an edgeless network.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CmpArg {
    Gt,
    Ge,
}

impl From<CmpArg> for Comparator {
    fn from(c: CmpArg) -> Self {
        match c {
            CmpArg::Gt => Comparator::StrictGreater,
            CmpArg::Ge => Comparator::GreaterOrEqual,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// JSON settings file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// h0, hpi or hxpi.
    #[arg(long)]
    family: Option<String>,
    /// multiple or combined.
    #[arg(long)]
    statistic: Option<String>,
    /// oracle, plug_in, ci, ss or permutation.
    #[arg(long)]
    technique: Option<String>,
    /// Effect used by the oracle technique for every parameter.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Per-parameter oracle effects, e.g. `pi=0=1.5,pi=1=2`.
    #[arg(long, value_delimiter = ',')]
    tau_map: Vec<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    comparator: Option<CmpArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid points per parameter for the ci technique.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    grid_budget: Option<usize>,
    #[arg(long)]
    max_attempts: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Args)]
struct SimArgs {
    /// 1-6 or fig2.
    #[arg(long)]
    table: String,
    #[arg(long)]
    seed: u64,
    /// JSON plan file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// normal, log_normal
    #[arg(long, value_delimiter = ',')]
    dgp: Vec<String>,
    /// oracle, plug_in, ci, ss, permutation
    #[arg(long, value_delimiter = ',')]
    techniques: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "gt")]
    comparator: CmpArg,
    /// Overlap margin: treated share must lie in (eta, 1 - eta).
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "gt")]
    comparator: CmpArg,
}

fn parse_json<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidConfig(format!("unknown {what} `{s}`")))
}

fn load(inputs: &Inputs) -> Result<(data::Dataset, netrand::Graph)> {
    data::load(&inputs.nodes, inputs.edges.as_deref())
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn resolve_settings(a: &TestArgs) -> Result<TestSettings> {
    let mut s: TestSettings = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?,
        None => TestSettings::default(),
    };
    if let Some(f) = &a.family {
        s.family = parse_json::<NullFamily>(f, "family")?;
    }
    if let Some(v) = &a.statistic {
        s.statistic = parse_json::<StatKind>(v, "statistic")?;
    }
    if let Some(v) = &a.technique {
        s.technique = v.parse::<TechniqueName>()?;
    }
    if a.tau.is_some() {
        s.tau = a.tau;
    }
    for entry in &a.tau_map {
        let (k, v) = entry
            .rsplit_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("tau map entry `{entry}` is not key=value")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("tau map value `{v}` is not a number")))?;
        s.tau_map.insert(k.to_string(), v);
    }
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag {
                s.$($field)+ = v.into();
            }
        };
    }
    set!(a.threshold => threshold);
    set!(a.comparator => comparator);
    set!(a.epsilon => epsilon);
    set!(a.b => b);
    set!(a.alpha => alpha);
    set!(a.gamma => ci.gamma);
    set!(a.grid => ci.grid_size);
    set!(a.grid_budget => ci.grid_budget);
    set!(a.max_attempts => max_attempts_per_accept);
    s.validate()?;
    Ok(s)
}

#[derive(Serialize)]
struct Resolved<'a, T: Serialize> {
    nodes: &'a Path,
    edges: Option<&'a Path>,
    seed: u64,
    settings: &'a T,
}

fn cmd_test(a: &TestArgs) -> Result<()> {
    let settings = resolve_settings(a)?;
    let (ds, g) = load(&a.inputs)?;
    let report = run_with_settings(&g, &ds, &settings, a.seed)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let out = serde_json::json!({
        "config": Resolved {
            nodes: &a.inputs.nodes,
            edges: a.inputs.edges.as_deref(),
            seed: a.seed,
            settings: &settings,
        },
        "report": report,
    });
    emit(a.output.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn cmd_simulate(a: &SimArgs) -> Result<()> {
    let table: TableId = a.table.parse()?;
    let mut plan = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?,
        None => TablePlan::standard(table),
    };
    if let Some(r) = a.reps {
        plan.base.reps = r;
    }
    if let Some(b) = a.b {
        plan.base.b = b;
    }
    if !a.sigma.is_empty() {
        plan.sigmas = a.sigma.clone();
    }
    if !a.dgp.is_empty() {
        plan.dgps = a.dgp.iter().map(|d| parse_json::<Dgp>(d, "dgp")).collect::<Result<_>>()?;
    }
    if !a.techniques.is_empty() {
        plan.base.techniques = a
            .techniques
            .iter()
            .map(|t| parse_json::<SimTechnique>(t, "technique"))
            .collect::<Result<_>>()?;
    }
    if !a.sizes.is_empty() {
        plan.sizes = a.sizes.clone();
    }
    let result = run_table(table, &plan, a.seed)?;
    let text = match a.format {
        Format::Csv => result.to_csv(),
        Format::Text => result.to_text(),
        Format::Json => {
            let out = serde_json::json!({ "seed": a.seed, "table": result });
            serde_json::to_string_pretty(&out)? + "\n"
        }
    };
    emit(a.output.as_deref(), &text)
}

fn cmd_check(a: &CheckArgs) -> Result<()> {
    let (ds, g) = load(&a.inputs)?;
    let mapping = netrand::ExposureMapping::fraction_threshold(a.threshold, a.comparator.into());
    let values = mapping.values();
    let pi = compute_exposures(&mapping, ds.treatment(), &g)?;
    let overlap = overlap_check(&ds, &pi, &values, a.eta)?;
    let mut eps = BTreeMap::new();
    eps.insert("by_exposure", epsilon_feasibility(&ds, &pi, &values, false)?);
    if ds.covariate().is_some() {
        eps.insert("by_cell", epsilon_feasibility(&ds, &pi, &values, true)?);
    }
    let out = serde_json::json!({
        "degree": degree_diagnostics(&g),
        "symmetrized": g.was_symmetrized(),
        "overlap": overlap,
        "epsilon_upper_bound": eps,
    });
    emit(None, &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let (ds, g) = load(&a.inputs)?;
    let mapping = netrand::ExposureMapping::fraction_threshold(a.threshold, a.comparator.into());
    let values = mapping.values();
    let pi = compute_exposures(&mapping, ds.treatment(), &g)?;
    let counts = exposure_cell_counts(&pi, ds.treatment(), ds.covariate_levels(), &values)?;
    let mut s = format!("units {}  edges {}\n", g.n_units(), g.n_edges());
    for v in &values {
        s += &format!(
            "{:<16} n={:<6} treated={:<6} control={}\n",
            cell_label(*v, None),
            counts.by_exposure[v],
            counts.by_exposure_arm[&(*v, 1)],
            counts.by_exposure_arm[&(*v, 0)]
        );
    }
    if let Some(c) = ds.covariate() {
        for ((v, l), n) in &counts.by_cell {
            s += &format!("{:<16} n={}\n", cell_label(*v, Some(c.label(*l))), n);
        }
    }
    emit(None, &s)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => cmd_check(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
