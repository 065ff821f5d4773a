use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcflow::commodity::DistanceMetric;
use mcflow::lp::{FlowModel, LpBackend};
use mcflow::policy::{PolicyConfig, PolicyKind};
use mcflow::scalar::rational_from_f64;
use mcflow::scenario::{Instance, Scenario};
use mcflow::sim::{self, Axis, RunConfig, SweepSpec, CSV_VERSION};
use mcflow::Error;

#[derive(Parser)]
#[command(name = "mcflow", version, about = "Multicast cloud network flow control: simulator and LP oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its time series.
    Simulate(SimulateArgs),
    /// Sweep one parameter over several values and replications.
    Sweep(SweepArgs),
    /// Stability-region boundaries and minimum cost from the flow LP.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Commodity index within the scenario.
    #[arg(long, default_value_t = 0)]
    commodity: usize,
    /// Multiplier on the scenario arrival rates.
    #[arg(long, default_value_t = 1.0)]
    load: f64,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long = "V", default_value_t = 0.0)]
    v: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Duplication trees for the restricted variants.
    #[arg(long, default_value_t = 1)]
    trees: usize,
    #[arg(long, default_value = "geographic")]
    metric: DistanceMetric,
    /// Normalize backlogs by the cumulative scaling factor.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 100_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    warmup: f64,
    /// Keep every n-th slot in the time series.
    #[arg(long, default_value_t = 100)]
    thinning: u64,
    /// Extra load the randomized policy provisions for.
    #[arg(long, default_value_t = 0.02)]
    headroom: f64,
}

impl PolicyArgs {
    fn config(&self, kind: PolicyKind) -> RunConfig {
        let policy = PolicyConfig {
            kind,
            v: self.v,
            eta: self.eta,
            trees: self.trees,
            metric: self.metric,
            normalize: self.normalize,
            headroom: self.headroom,
            ..PolicyConfig::default()
        };
        let mut cfg = RunConfig::new(policy, self.slots, self.seed);
        cfg.warmup_fraction = self.warmup;
        cfg.thinning = self.thinning;
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "gdcnc")]
    policy: PolicyKind,
    #[command(flatten)]
    run: PolicyArgs,
    /// Time-series CSV; summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    axis: Axis,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', default_value = "gdcnc")]
    policy: Vec<PolicyKind>,
    #[command(flatten)]
    run: PolicyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Exact,
    Float,
    Auto,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    commodity: usize,
    /// Load multipliers at which to report the minimum cost.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    load: Vec<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    backend: Backend,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Selection probabilities of the randomized policy at the first load.
    #[arg(long)]
    beta_out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn instance(common: &Common) -> Result<Instance, Error> {
    let inst = Scenario::load(&common.scenario)?.instance(common.commodity)?;
    let factor = rational_from_f64(common.load)
        .filter(|f| *f.numer() >= 0)
        .ok_or_else(|| Error::Scenario(format!("invalid load {}", common.load)))?;
    Ok(inst.scaled(&factor))
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let inst = instance(&args.common)?;
    let m = sim::run(&inst, &args.run.config(args.policy))?;
    if let Some(path) = &args.out {
        sim::write_series_csv(BufWriter::new(File::create(path)?), &m)?;
    }
    println!("policy={}", m.policy);
    println!("slots={} warmup={} seed={}", m.slots, m.warmup, m.seed);
    println!("avg_cost={} cost_stderr={}", m.avg_cost, m.cost_stderr);
    println!("avg_backlog={}", m.avg_backlog);
    println!("avg_delay_slots={} avg_delay_seconds={}", m.avg_delay, m.avg_delay_seconds);
    println!("delay_estimate_slots={}", m.delay_estimate);
    println!("stranded_weight={}", m.stranded_weight);
    match m.completion_delay {
        Some(c) => println!("completion_delay_slots={c}"),
        None => println!("completion_delay_slots=NA"),
    }
    println!("delivered={} admitted={} dummies={}", m.delivered, m.admitted, m.dummies);
    println!("verdict={} growth={}", m.verdict.name(), m.growth);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let inst = instance(&args.common)?;
    let spec = SweepSpec {
        axis: args.axis,
        values: args.values,
        reps: args.reps,
        policies: args.policy,
        base: args.run.config(PolicyKind::Gdcnc),
    };
    let rows = sim::sweep(&inst, &spec)?;
    sim::write_sweep_csv(output(&args.out)?, &rows)
}

fn analyze(args: AnalyzeArgs) -> Result<bool, Error> {
    let inst = Scenario::load(&args.scenario)?.instance(args.commodity)?;
    let backend = match args.backend {
        Backend::Exact => LpBackend::Exact,
        Backend::Float => LpBackend::Float,
        Backend::Auto => LpBackend::Auto,
    };
    let rates = inst.rates();
    let multicast = FlowModel::multicast(&inst.network, &inst.service, &rates)?;
    let unicast = FlowModel::unicast(&inst.network, &inst.service, &rates)?;
    let m = multicast.boundary(backend)?;
    let u = unicast.boundary(backend)?;
    let mut out = output(&args.out)?;
    let fmt = |x: Option<f64>| x.map_or("inf".to_string(), |v| v.to_string());
    writeln!(out, "# {CSV_VERSION} analyze")?;
    writeln!(out, "quantity,load,value")?;
    writeln!(out, "lp_variables,,{}", multicast.vars().len())?;
    writeln!(out, "multicast_boundary,,{}", fmt(m))?;
    writeln!(out, "unicast_boundary,,{}", fmt(u))?;
    let ratio = match (m, u) {
        (Some(m), Some(u)) if u > 0.0 => (m / u).to_string(),
        _ => "NA".to_string(),
    };
    writeln!(out, "ratio,,{ratio}")?;
    let mut all_feasible = true;
    for (idx, &load) in args.load.iter().enumerate() {
        let factor = rational_from_f64(load)
            .filter(|f| *f.numer() >= 0)
            .ok_or_else(|| Error::Scenario(format!("invalid load {load}")))?;
        match multicast.min_cost_f64(&factor, backend) {
            Ok(sol) => {
                writeln!(out, "min_cost,{load},{}", sol.cost)?;
                if idx == 0 {
                    if let Some(path) = &args.beta_out {
                        write_beta(path, &inst, &multicast.beta(&sol.flows)?)?;
                    }
                }
            }
            Err(Error::Infeasible) => {
                writeln!(out, "min_cost,{load},infeasible")?;
                all_feasible = false;
            }
            Err(e) => return Err(e),
        }
    }
    out.flush()?;
    Ok(all_feasible)
}

fn write_beta(path: &PathBuf, inst: &Instance, beta: &mcflow::lp::Beta) -> Result<(), Error> {
    let d = inst.network.destination_count();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {CSV_VERSION} beta")?;
    writeln!(out, "resource,from,to,stage,q,s,probability")?;
    for (e, list) in beta.links.iter().enumerate() {
        let edge = inst.network.edge(e);
        for (m, c, p) in list {
            let (from, to) = (&inst.network.node(edge.from).name, &inst.network.node(edge.to).name);
            writeln!(out, "link,{from},{to},{m},{},{},{p}", c.q.to_vector(d), c.s.to_vector(d))?;
        }
    }
    for (i, list) in beta.processors.iter().enumerate() {
        let name = &inst.network.node(i).name;
        for (m, c, p) in list {
            writeln!(out, "processor,{name},{name},{m},{},{},{p}", c.q.to_vector(d), c.s.to_vector(d))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Exit status 2 marks bad input or an infeasible load; 1 is reserved for
/// internal failures.
fn status(e: &Error) -> u8 {
    match e {
        Error::Decision(_) | Error::Lp(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status(&e))
        }
    }
}
