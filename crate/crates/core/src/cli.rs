//! The `qpd` command-line tool.
//!
//! Every command reads one JSON config, writes its data files to the output
//! directory together with `run.json` (command, config hash, seed) and a
//! `timing.json` sidecar holding wall-clock data.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{optimize_budget, BudgetAllocation};
use crate::channel::{choi_from_operator, ChoiMatrix, DensityMatrix};
use crate::error::{QpdError, Result};
use crate::gates::{paulis, Circuit, GateSpec};
use crate::linalg::{self, kron, ComplexMatrix};
use crate::noise::{standard_basis, NoiseMode, NoiseModel, NoiseOracle};
use crate::qpd::{
    approximate_qpd, diamond_distance, exact_qpd, min_gamma_qpd, tradeoff_curve, LabeledChannel,
    PhysicalityFlags, QuasiprobabilityDecomposition,
};
use crate::sampler::{sample_circuit, EstimateReport, GateQpd, GateQpdAssignment, ObservableSpec, OutputMode};
use crate::stinespring::{run_stinespring, RunStatus, StinespringConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qpd", version, about = "Noise-aware quasiprobability decompositions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error-versus-γ curve of the target over the noisy standard basis.
    Tradeoff(CommonArgs),
    /// QPD of the target over the noisy standard basis.
    Decompose(CommonArgs),
    /// Iterative construction of a decomposition set for the target.
    Stinespring(CommonArgs),
    /// Monte Carlo estimate of an observable through the mitigated circuit.
    Sample(CommonArgs),
    /// γ budget allocation across the target's gates.
    Budget(CommonArgs),
    /// Diamond distance between the ideal target and its noisy realization.
    Diamond(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Tradeoff(_) => "tradeoff",
            Command::Decompose(_) => "decompose",
            Command::Stinespring(_) => "stinespring",
            Command::Sample(_) => "sample",
            Command::Budget(_) => "budget",
            Command::Diamond(_) => "diamond",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Tradeoff(a)
            | Command::Decompose(a)
            | Command::Stinespring(a)
            | Command::Sample(a)
            | Command::Budget(a)
            | Command::Diamond(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Noise parameters as they appear in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub p2: f64,
    /// Defaults to `0.1·p2`.
    pub p1: Option<f64>,
    pub gamma_ad: f64,
    pub gamma_pd: f64,
    pub measurement_error: f64,
    pub mode: NoiseMode,
}

impl NoiseConfig {
    pub fn model(&self) -> NoiseModel {
        NoiseModel {
            p2: self.p2,
            p1: self.p1.unwrap_or(0.1 * self.p2),
            gamma_ad: self.gamma_ad,
            gamma_pd: self.gamma_pd,
            measurement_error: self.measurement_error,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Defaults to one more than the largest qubit index used.
    #[serde(default)]
    pub n_qubits: Option<usize>,
    pub gates: Vec<GateSpec>,
}

impl TargetConfig {
    pub fn circuit(&self) -> Result<Circuit> {
        let used = self.gates.iter().flat_map(|g| g.qubits.iter()).map(|q| q + 1).max().unwrap_or(1);
        let n = self.n_qubits.unwrap_or(used);
        Circuit::from_gates(n, n, self.gates.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagsConfig {
    None,
    Cp,
    Tp,
    #[default]
    Tpcp,
}

impl FlagsConfig {
    pub fn flags(self) -> PhysicalityFlags {
        PhysicalityFlags {
            enforce_cp: matches!(self, FlagsConfig::Cp | FlagsConfig::Tpcp),
            enforce_tp: matches!(self, FlagsConfig::Tp | FlagsConfig::Tpcp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TradeoffOptions {
    pub points: usize,
    pub flags: FlagsConfig,
}

impl Default for TradeoffOptions {
    fn default() -> Self {
        Self { points: 21, flags: FlagsConfig::Tpcp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecomposeMethod {
    #[default]
    Exact,
    Approximate,
    MinGamma,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeOptions {
    pub method: DecomposeMethod,
    /// Budget for `approximate`.
    pub budget: Option<f64>,
    /// Error bound for `min_gamma`.
    pub max_error: Option<f64>,
    pub flags: FlagsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleQpd {
    /// Exact QPD of every gate over `{noisy gate} ∪ noisy standard basis`.
    #[default]
    Exact,
    /// Run the noisy gates as they are.
    Unmitigated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleOptions {
    pub shots: u64,
    pub mode: OutputMode,
    /// Pauli string; character `i` acts on qubit `i`.
    pub observable: String,
    /// Computational basis state; character `i` is qubit `i`.
    pub initial_state: Option<String>,
    pub qpd: SampleQpd,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { shots: 100_000, mode: OutputMode::Expectation, observable: String::new(), initial_state: None, qpd: SampleQpd::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetOptions {
    pub gamma_totals: Vec<f64>,
    pub points: usize,
}

impl Default for BudgetOptions {
    fn default() -> Self {
        Self { gamma_totals: vec![1.0], points: 21 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiamondOptions {
    /// Compare against the ideal reference circuit instead of the noisy target.
    pub reference: Option<Vec<GateSpec>>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub target: TargetConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub tradeoff: Option<TradeoffOptions>,
    #[serde(default)]
    pub decompose: Option<DecomposeOptions>,
    /// Stinespring settings; `depth` is required.
    #[serde(default)]
    pub stinespring: Option<serde_json::Value>,
    #[serde(default)]
    pub sample: Option<SampleOptions>,
    #[serde(default)]
    pub budget: Option<BudgetOptions>,
    #[serde(default)]
    pub diamond: Option<DiamondOptions>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.model().validate()?;
        let c = self.target.circuit()?;
        if !(1..=2).contains(&c.n_qubits()) {
            return Err(QpdError::InvalidInput(format!("targets act on 1 or 2 qubits, got {}", c.n_qubits())));
        }
        if let Some(t) = &self.tradeoff {
            if t.points < 2 {
                return Err(QpdError::InvalidInput("tradeoff needs at least 2 points".into()));
            }
        }
        if let Some(b) = &self.budget {
            if b.points < 2 || b.gamma_totals.is_empty() {
                return Err(QpdError::InvalidInput("budget needs γ totals and at least 2 curve points".into()));
            }
        }
        if let Some(s) = &self.sample {
            if s.shots == 0 {
                return Err(QpdError::InvalidInput("need at least one shot".into()));
            }
        }
        if self.stinespring.is_some() {
            self.stinespring_config()?;
        }
        Ok(())
    }

    /// Stinespring settings with item counts defaulted for the target size.
    pub fn stinespring_config(&self) -> Result<StinespringConfig> {
        let raw = self.stinespring.clone().unwrap_or(serde_json::Value::Null);
        let obj = raw
            .as_object()
            .ok_or_else(|| QpdError::InvalidInput("`stinespring` section with an explicit `depth` is required".into()))?;
        if !obj.contains_key("depth") {
            return Err(QpdError::InvalidInput("`stinespring.depth` is required".into()));
        }
        let n = self.target.circuit()?.n_qubits();
        let mut base = serde_json::to_value(StinespringConfig::for_qubits(n))?;
        merge(&mut base, raw);
        let mut cfg: StinespringConfig = serde_json::from_value(base)?;
        cfg.seed = self.seed;
        cfg.bm.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Exit code for an error.
pub fn exit_code(e: &QpdError) -> i32 {
    match e {
        QpdError::Solver { .. } | QpdError::NotInSpan(_) | QpdError::NonMonotone { .. } => EXIT_SOLVER,
        QpdError::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

/// Hex SHA-256 of the config file bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    started_unix: f64,
    elapsed_seconds: f64,
}


struct Outcome {
    files: Vec<String>,
    exit: i32,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    hash: String,
    out: PathBuf,
}

impl Context<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<String> {
        fs::write(self.out.join(name), contents)?;
        Ok(name.to_string())
    }

    /// Writes `body` with `config_hash` and `seed` keys added; non-object
    /// bodies go under `data`.
    fn write_json<T: Serialize>(&self, name: &str, body: T) -> Result<String> {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), self.hash.clone().into());
        doc.insert("seed".into(), self.cfg.seed.into());
        match serde_json::to_value(body)? {
            serde_json::Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let s = serde_json::to_string_pretty(&doc)?;
        self.write(name, &(s + "\n"))
    }

    fn oracle(&self) -> NoiseModel {
        self.cfg.noise.model()
    }

    fn circuit(&self) -> Result<Circuit> {
        self.cfg.target.circuit()
    }

    fn ideal(&self) -> Result<ChoiMatrix> {
        choi_from_operator(&self.circuit()?.operator())
    }

    fn basis(&self) -> Result<Vec<LabeledChannel>> {
        gate_set(&self.circuit()?, &self.oracle())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    let args = cmd.args();
    let bytes = fs::read(&args.config)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| QpdError::InvalidInput(format!("config is not UTF-8: {e}")))?;
    let mut cfg = RunConfig::from_json(text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(j) = args.jobs {
        cfg.jobs = Some(j);
    }
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(format!("seed={}", cfg.seed));
    let ctx = Context { cfg: &cfg, hash: hex::encode(hasher.finalize()), out };

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| QpdError::InvalidInput(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| match cmd {
        Command::Tradeoff(_) => cmd_tradeoff(&ctx),
        Command::Decompose(_) => cmd_decompose(&ctx),
        Command::Stinespring(_) => cmd_stinespring(&ctx),
        Command::Sample(_) => cmd_sample(&ctx),
        Command::Budget(_) => cmd_budget(&ctx),
        Command::Diamond(_) => cmd_diamond(&ctx),
    })?;
    let record = RunRecord { command: cmd.name(), config_hash: &ctx.hash, seed: cfg.seed, outputs: outcome.files };
    ctx.write("run.json", &(serde_json::to_string_pretty(&record)? + "\n"))?;
    let timing = Timing { started_unix: started, elapsed_seconds: clock.elapsed().as_secs_f64() };
    ctx.write("timing.json", &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    Ok(outcome.exit)
}

fn cmd_tradeoff(ctx: &Context) -> Result<Outcome> {
    let opts = ctx.cfg.tradeoff.clone().unwrap_or_default();
    let target = ctx.ideal()?;
    let set = ctx.basis()?;
    let gamma_opt = exact_qpd(&target, &set)?.gamma;
    let grid = crate::qpd::budget_grid(gamma_opt, opts.points);
    let curve = tradeoff_curve("target", &target, &set, &grid, opts.flags.flags())?;
    Ok(Outcome { files: vec![ctx.write("tradeoff.csv", &curve.to_csv())?], exit: EXIT_OK })
}

fn cmd_decompose(ctx: &Context) -> Result<Outcome> {
    let opts = ctx.cfg.decompose.clone().unwrap_or_default();
    let target = ctx.ideal()?;
    let set = ctx.basis()?;
    let flags = opts.flags.flags();
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| QpdError::InvalidInput(format!("`decompose.{key}` is required")));
    let qpd = match opts.method {
        DecomposeMethod::Exact => exact_qpd(&target, &set)?,
        DecomposeMethod::Approximate => approximate_qpd(&target, &set, need(opts.budget, "budget")?, flags)?,
        DecomposeMethod::MinGamma => min_gamma_qpd(&target, &set, need(opts.max_error, "max_error")?, flags)?,
    };
    let files = vec![ctx.write_json("qpd.json", qpd.to_json())?, ctx.write_json("chois.json", qpd.choi_bundle())?];
    println!("gamma {:?} residual {:?}", qpd.gamma, qpd.residual);
    Ok(Outcome { files, exit: EXIT_OK })
}

fn cmd_stinespring(ctx: &Context) -> Result<Outcome> {
    let scfg = ctx.cfg.stinespring_config()?;
    let run = run_stinespring(&ctx.circuit()?, &ctx.oracle(), &scfg)?;
    let files = vec![
        ctx.write_json("manifest.json", run.manifest(&scfg))?,
        ctx.write_json("set.json", run.set.to_json())?,
        ctx.write_json("qpd.json", run.qpd.to_json())?,
    ];
    println!("status {:?} gamma {:?} iterations {}", run.status, run.qpd.gamma, run.trace.records.len());
    let exit = match run.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIterations | RunStatus::DecompositionFailed => EXIT_NONCONVERGENCE,
    };
    Ok(Outcome { files, exit })
}

/// Pauli string observable; character `i` acts on qubit `i`.
pub fn pauli_observable(s: &str, n: usize) -> Result<ComplexMatrix> {
    let s = if s.is_empty() { "Z".repeat(n) } else { s.to_uppercase() };
    if s.len() != n {
        return Err(QpdError::InvalidInput(format!("observable `{s}` does not act on {n} qubits")));
    }
    let p = paulis();
    let mut m = linalg::identity(1);
    for ch in s.chars() {
        let k = "IXYZ".find(ch).ok_or_else(|| QpdError::InvalidInput(format!("unknown Pauli `{ch}`")))?;
        m = kron(&p[k], &m);
    }
    Ok(m)
}

/// The noisy realization of `circuit` followed by its noisy standard basis.
pub fn gate_set(circuit: &Circuit, oracle: &dyn NoiseOracle) -> Result<Vec<LabeledChannel>> {
    let mut set = vec![("noisy".to_string(), oracle.realize(circuit)?)];
    set.extend(standard_basis(circuit.n_qubits(), oracle)?);
    Ok(set)
}

/// Computational basis state; character `i` is qubit `i`.
pub fn basis_state(bits: &str, n: usize) -> Result<DensityMatrix> {
    if bits.len() != n || bits.chars().any(|c| c != '0' && c != '1') {
        return Err(QpdError::InvalidInput(format!("initial state `{bits}` is not an {n}-bit string")));
    }
    let index = bits.chars().enumerate().filter(|(_, c)| *c == '1').map(|(i, _)| 1usize << i).sum::<usize>();
    let mut amp = vec![linalg::c(0.0, 0.0); 1 << n];
    amp[index] = linalg::c(1.0, 0.0);
    DensityMatrix::pure(&amp)
}

/// Gate-wise exact QPDs of a circuit, each over its own `gate_set`.
pub fn gate_assignment(circuit: &Circuit, oracle: &dyn NoiseOracle, mitigate: bool) -> Result<GateQpdAssignment> {
    let mut gates = Vec::with_capacity(circuit.gates().len());
    for g in circuit.gates() {
        let k = g.qubits.len();
        let local: Vec<usize> = (0..k).collect();
        let single = Circuit::from_gates(k, k, vec![GateSpec::new(g.kind, &local)?])?;
        let qpd = if mitigate {
            let target = choi_from_operator(&single.operator())?;
            exact_qpd(&target, &gate_set(&single, oracle)?)?
        } else {
            let noisy = oracle.realize(&single)?;
            QuasiprobabilityDecomposition {
                target: noisy.clone(),
                items: vec![crate::qpd::QpdItem { label: g.kind.name().into(), coefficient: 1.0, choi: noisy }],
                gamma: 1.0,
                residual: 0.0,
            }
        };
        gates.push(GateQpd { qubits: g.qubits.clone(), qpd });
    }
    Ok(GateQpdAssignment::new(gates))
}

#[derive(Serialize)]
struct SampleJson {
    report: EstimateReport,
    exact: f64,
}

fn cmd_sample(ctx: &Context) -> Result<Outcome> {
    let opts = ctx.cfg.sample.clone().unwrap_or_default();
    let circuit = ctx.circuit()?;
    let n = circuit.n_qubits();
    let rho = match &opts.initial_state {
        Some(b) => basis_state(b, n)?,
        None => DensityMatrix::zero_state(n),
    };
    let obs = ObservableSpec::new(pauli_observable(&opts.observable, n)?)?;
    let gates = gate_assignment(&circuit, &ctx.oracle(), opts.qpd == SampleQpd::Exact)?;
    let report = sample_circuit(&rho, &gates, &obs, opts.shots, ctx.cfg.seed, opts.mode)?;
    let u = circuit.operator();
    let exact = obs.expectation(&(&u * rho.matrix() * u.adjoint()));
    let csv = ctx.out.join("samples.csv");
    let fresh = !csv.exists();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&csv)?;
    if fresh {
        writeln!(f, "{}", EstimateReport::csv_header())?;
    }
    writeln!(f, "{}", report.csv_row())?;
    println!("mean {:?} stderr {:?} exact {:?}", report.mean, report.stderr, exact);
    let files = vec![ctx.write_json("report.json", SampleJson { report, exact })?, "samples.csv".to_string()];
    Ok(Outcome { files, exit: EXIT_OK })
}

fn cmd_budget(ctx: &Context) -> Result<Outcome> {
    let opts = ctx.cfg.budget.clone().unwrap_or_default();
    let circuit = ctx.circuit()?;
    let oracle = ctx.oracle();
    let mut curves = Vec::new();
    for (i, g) in circuit.gates().iter().enumerate() {
        let k = g.qubits.len();
        let local: Vec<usize> = (0..k).collect();
        let single = Circuit::from_gates(k, k, vec![GateSpec::new(g.kind, &local)?])?;
        let target = choi_from_operator(&single.operator())?;
        let set = gate_set(&single, &oracle)?;
        let gamma_opt = exact_qpd(&target, &set)?.gamma;
        let grid = crate::qpd::budget_grid(gamma_opt, opts.points);
        let label = format!("g{i}_{}", g.kind.name());
        curves.push(tradeoff_curve(&label, &target, &set, &grid, PhysicalityFlags::TPCP)?);
    }
    if curves.is_empty() {
        return Err(QpdError::InvalidInput("budget needs at least one gate".into()));
    }
    let mut csv = format!("{}\n", BudgetAllocation::csv_header());
    for &total in &opts.gamma_totals {
        let alloc = optimize_budget(&curves, total)?;
        if let Some(n) = &alloc.notice {
            eprintln!("note: γ_total {total}: {n}");
        }
        csv.push_str(&alloc.csv_rows());
    }
    Ok(Outcome { files: vec![ctx.write("budget.csv", &csv)?], exit: EXIT_OK })
}

#[derive(Serialize)]
struct DiamondJson {
    diamond_distance: f64,
}

fn cmd_diamond(ctx: &Context) -> Result<Outcome> {
    let opts = ctx.cfg.diamond.clone().unwrap_or_default();
    let circuit = ctx.circuit()?;
    let ideal = ctx.ideal()?;
    let other = match &opts.reference {
        Some(gates) => {
            let n = circuit.n_qubits();
            choi_from_operator(&Circuit::from_gates(n, n, gates.clone())?.operator())?
        }
        None => ctx.oracle().realize(&circuit)?,
    };
    let d = diamond_distance(&ideal, &other)?;
    println!("{d:?}");
    Ok(Outcome { files: vec![ctx.write_json("diamond.json", DiamondJson { diamond_distance: d })?], exit: EXIT_OK })
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_json(&fs::read_to_string(path)?)
}
