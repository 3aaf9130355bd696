use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spanbandit::abs::{compute_policy, report, PolicyFile, SamplingPolicy, VitalSetConfig};
use spanbandit::baselines::{compare_elimination, default_comparison, write_curves_csv, ArmEnv};
use spanbandit::belief::{BeliefSnapshot, BeliefStore, UpdateMode};
use spanbandit::experiment::{
    bench_inference, meta_line, run_experiment, sweep, write_metrics_csv, write_sweep_csv,
    FaultPlacement, RunConfig, SweepParam, TOOL_VERSION,
};
use spanbandit::simulator::closed_loop::learn_epoch;
use spanbandit::simulator::{write_ground_truth, ScenarioSpec, Simulator, WorkloadSpec};
use spanbandit::tags::{build_tag_matrix, correlation_report, DEFAULT_THRESHOLD};
use spanbandit::trace_model::{
    decompose, read_traces, write_traces, JsonlError, OrphanPolicy, SpanIdentity, Trace,
};
use spanbandit::utility::UtilityMeasure;

const SEED_ENV: &str = "SPANBANDIT_SEED";

#[derive(Parser)]
#[command(
    name = "spanbandit",
    version,
    about = "Adaptive span-level sampling for distributed traces"
)]
struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate traces (JSONL) and ground truth from a preset or scenario.
    Simulate(SimulateArgs),
    /// One learning epoch: traces + prior beliefs -> beliefs + policy.
    Learn(LearnArgs),
    /// Ranked spans with confidence from a belief snapshot.
    Report(ReportArgs),
    /// Closed-loop runs across seeds, or a sweep over one knob.
    Experiment(ExperimentArgs),
    /// Tag/latency correlation ranking.
    Tags(TagsArgs),
    /// Per-span self-segment decomposition.
    Decompose(DecomposeArgs),
    /// Surviving-set curves of ABS against elimination baselines.
    CompareBaselines(CompareArgs),
    /// Time one full inference on a synthetic belief store.
    BenchInference(BenchArgs),
}

/// Run-configuration flags. Comma-separated lists are accepted by
/// `experiment` for one knob at a time.
#[derive(Args, Clone, Default)]
struct Knobs {
    #[arg(long)]
    utility: Option<UtilityMeasure>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mode: Option<UpdateMode>,
    #[arg(long, value_delimiter = ',')]
    percentile: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long)]
    mc_rows: Option<usize>,
    /// Sampled traces per epoch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed (default from SPANBANDIT_SEED, else 0).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "request-sampling", value_delimiter = ',')]
    request_sampling: Vec<f64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Epoch at which epsilon sweeps move the fault.
    #[arg(long)]
    shift_epoch: Option<usize>,
    /// Faulty span for preset runs: `random`, `none`, or `service/operation`.
    #[arg(long)]
    fault: Option<String>,
    /// Record per-epoch inference wall-clock (outputs stop being reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    knobs: Knobs,
    /// Scenario JSON (topology, anomalies, workload) instead of a preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    requests: u64,
    /// Policy JSON to record under (default: everything on).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Output directory for traces.jsonl and ground_truth.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    traces: PathBuf,
    /// Prior belief snapshot.
    #[arg(long)]
    beliefs_in: Option<PathBuf>,
    /// Attach spans with a missing parent to the root instead of failing.
    #[arg(long)]
    reparent_orphans: bool,
    /// Output directory for beliefs.json and policy.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    beliefs: PathBuf,
    /// Policy JSON; recomputed from the beliefs when absent.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; the summary goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TagsArgs {
    #[command(flatten)]
    knobs: Knobs,
    /// Traces JSONL; without it a preset is simulated with everything on.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    requests: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    reparent_orphans: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    reparent_orphans: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Skewed,
    Uniform,
    Identical,
    OneDominant,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 50)]
    arms: usize,
    #[arg(long, value_enum, default_value = "skewed")]
    env: EnvKind,
    #[arg(long, default_value_t = 2000)]
    budget: u64,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Curve resolution in samples.
    #[arg(long, default_value_t = 20)]
    step: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 564)]
    spans: usize,
    #[arg(long, default_value_t = 10_000)]
    mc_rows: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": "usage", "message": e.to_string().trim()})
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e) if e.chain().any(broken_pipe) => ExitCode::SUCCESS,
        Err(e) => {
            let mut obj = json!({
                "error": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            if let Some(JsonlError::Parse { line, .. }) = e.downcast_ref::<JsonlError>() {
                obj["line"] = json!(line);
            }
            eprintln!("{obj}");
            ExitCode::FAILURE
        }
    }
}

fn broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    let io = e.downcast_ref::<std::io::Error>().or_else(|| {
        match e.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        }
    });
    io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => simulate(file, a),
        Command::Learn(a) => learn(file, a),
        Command::Report(a) => report_cmd(file, a),
        Command::Experiment(a) => experiment(file, a),
        Command::Tags(a) => tags(file, a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::CompareBaselines(a) => compare(a),
        Command::BenchInference(a) => bench(a),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(s.trim().parse().with_context(|| {
            format!("{SEED_ENV}={s:?} is not an unsigned integer")
        })?)),
        Err(_) => Ok(None),
    }
}

/// Defaults, then the environment seed, then the config file, then flags.
fn base_config(file: Option<&Path>, k: &Knobs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(s) = env_seed()? {
        cfg.base_seed = s;
    }
    if let Some(path) = file {
        let overlay: Value = serde_json::from_reader(BufReader::new(open(path)?))
            .with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(overlay) = overlay else {
            bail!("config {} must be a JSON object", path.display());
        };
        let mut merged = serde_json::to_value(&cfg)?;
        for (key, v) in overlay {
            merged[key] = v;
        }
        cfg = serde_json::from_value(merged)
            .with_context(|| format!("invalid config {}", path.display()))?;
    }
    if let Some(v) = k.utility {
        cfg.utility = v;
    }
    if let Some(v) = k.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = k.mode {
        cfg.mode = v;
    }
    if let Some(v) = k.mc_rows {
        cfg.mc_rows = v;
    }
    if let Some(v) = k.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = k.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = k.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = &k.preset {
        cfg.preset = v.clone();
        // The canary preset carries its own anomaly.
        if cfg.preset == "canary" && k.fault.is_none() {
            cfg.fault = FaultPlacement::None;
        }
    }
    if let Some(f) = &k.fault {
        cfg.fault = match f.as_str() {
            "random" => FaultPlacement::Random,
            "none" => FaultPlacement::None,
            id => FaultPlacement::Fixed(
                id.parse::<SpanIdentity>()
                    .with_context(|| format!("--fault {id:?}"))?,
            ),
        };
    }
    if let Some(v) = k.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = k.shift_epoch {
        cfg.shift_epoch = v;
    }
    cfg.record_timings |= k.timings;
    Ok(cfg)
}

/// Full config for commands that take single values only.
fn single_config(file: Option<&Path>, k: &Knobs) -> Result<RunConfig> {
    let mut cfg = base_config(file, k)?;
    cfg.percentile = single("--percentile", &k.percentile)?.unwrap_or(cfg.percentile);
    cfg.epsilon = single("--epsilon", &k.epsilon)?.unwrap_or(cfg.epsilon);
    cfg.request_sampling_rate =
        single("--request-sampling", &k.request_sampling)?.unwrap_or(cfg.request_sampling_rate);
    cfg.validate()?;
    Ok(cfg)
}

fn single(flag: &str, xs: &[f64]) -> Result<Option<f64>> {
    match xs {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => bail!("{flag} takes a single value here"),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writer for `path`, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `body` as a JSON object with `tool` and `config` added.
fn with_meta(config: &impl serde::Serialize, body: &impl serde::Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(body)?;
    if !v.is_object() {
        v = json!({ "data": v });
    }
    v["tool"] = json!(TOOL_VERSION);
    v["config"] = serde_json::to_value(config)?;
    Ok(v)
}

fn write_json(path: Option<&Path>, v: &Value) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_traces(path: &Path, reparent: bool) -> Result<Vec<Trace>> {
    let orphans = if reparent {
        OrphanPolicy::ReparentToRoot
    } else {
        OrphanPolicy::Reject
    };
    read_traces(BufReader::new(open(path)?), orphans)
        .with_context(|| format!("reading traces {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?))
        .with_context(|| format!("parsing {what} {}", path.display()))
}

fn vital_config(cfg: &RunConfig) -> VitalSetConfig {
    VitalSetConfig {
        percentile_p: cfg.percentile,
        epsilon: cfg.epsilon,
        mc_rows: cfg.mc_rows,
        rng_seed: cfg.base_seed,
    }
}

fn load_spec(path: &Path) -> Result<ScenarioSpec> {
    read_json(path, "scenario")
}

fn simulate(file: Option<&Path>, a: SimulateArgs) -> Result<()> {
    let mut cfg = single_config(file, &a.knobs)?;
    let (sim, workload) = match &a.spec {
        Some(p) => {
            let spec = load_spec(p)?;
            let mut w = spec.workload.clone();
            if a.knobs.seed.is_some() {
                w.rng_seed = cfg.base_seed;
            }
            if !a.knobs.request_sampling.is_empty() {
                w.request_sampling_rate = cfg.request_sampling_rate;
            }
            (spec.validate()?, w)
        }
        None => {
            let (sim, _) = cfg.simulator(None, cfg.base_seed)?;
            let w = WorkloadSpec {
                num_requests: a.requests,
                request_sampling_rate: cfg.request_sampling_rate,
                batch_size: cfg.batch_size,
                rng_seed: cfg.base_seed,
            };
            (sim, w)
        }
    };
    workload.validate()?;
    cfg.seeds = 1;
    let policy = match &a.policy {
        Some(p) => SamplingPolicy::from_file(read_json::<PolicyFile>(p, "policy")?),
        None => SamplingPolicy::all_on(),
    };
    let (traces, truth) = sim.generate(&workload, &policy);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = create(&a.out.join("traces.jsonl"))?;
    write_traces(&mut w, &traces)?;
    w.flush()?;
    let mut gt = Vec::new();
    write_ground_truth(&mut gt, &truth)?;
    let gt: Value = serde_json::from_slice(&gt)?;
    let meta = json!({"run": cfg, "workload": workload, "topology": sim.topology.name, "anomalies": sim.anomalies});
    write_json(
        Some(&a.out.join("ground_truth.json")),
        &with_meta(&meta, &gt)?,
    )?;
    eprintln!(
        "{} traces from {} requests -> {}",
        traces.len(),
        workload.num_requests,
        a.out.display()
    );
    Ok(())
}

fn learn(file: Option<&Path>, a: LearnArgs) -> Result<()> {
    let cfg = single_config(file, &a.knobs)?;
    let traces = load_traces(&a.traces, a.reparent_orphans)?;
    let mut store = match &a.beliefs_in {
        Some(p) => {
            let mut s = BeliefStore::from_snapshot(read_json::<BeliefSnapshot>(p, "beliefs")?)?;
            s.lambda = cfg.lambda;
            s.mode = cfg.mode;
            s
        }
        None => BeliefStore::new(cfg.lambda, cfg.mode)?,
    };
    let policy = learn_epoch(&mut store, &traces, &cfg.utility, &vital_config(&cfg))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(
        Some(&a.out.join("beliefs.json")),
        &with_meta(&cfg, &store.to_snapshot())?,
    )?;
    write_json(
        Some(&a.out.join("policy.json")),
        &with_meta(&cfg, &policy.to_file())?,
    )?;
    eprintln!(
        "epoch {}: {} traces, {} identities -> {}",
        store.epoch,
        traces.len(),
        store.len(),
        a.out.display()
    );
    Ok(())
}

fn report_cmd(file: Option<&Path>, a: ReportArgs) -> Result<()> {
    let cfg = single_config(file, &a.knobs)?;
    let store = BeliefStore::from_snapshot(read_json::<BeliefSnapshot>(&a.beliefs, "beliefs")?)?;
    let policy = match &a.policy {
        Some(p) => SamplingPolicy::from_file(read_json::<PolicyFile>(p, "policy")?),
        None => compute_policy(&store, &vital_config(&cfg))?,
    };
    let rep = report(&policy, &store, a.top)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(
        out,
        "{:>4}  {:<48} {:>10} {:>10} {:>9}  eliminated",
        "rank", "span", "confidence", "sampling_p", "mean"
    )?;
    for r in rep.top_k() {
        writeln!(
            out,
            "{:>4}  {:<48} {:>10.4} {:>10.4} {:>9.4}  {}",
            r.rank,
            r.identity.to_string(),
            r.confidence,
            r.probability,
            r.posterior_mean,
            r.eliminated
        )?;
    }
    if rep.ambiguous {
        writeln!(out, "note: top-{} membership decided by a tie", rep.k)?;
    }
    out.flush()?;
    if let Some(p) = &a.out {
        write_json(Some(p), &with_meta(&cfg, &rep)?)?;
    }
    Ok(())
}

fn experiment(file: Option<&Path>, a: ExperimentArgs) -> Result<()> {
    let k = &a.knobs;
    let lists = [
        (SweepParam::Percentile, &k.percentile),
        (SweepParam::Epsilon, &k.epsilon),
        (SweepParam::RequestSampling, &k.request_sampling),
    ];
    let swept: Vec<_> = lists.iter().filter(|(_, v)| v.len() > 1).collect();
    if swept.len() > 1 {
        bail!("sweep one knob at a time");
    }
    let mut cfg = base_config(file, k)?;
    for (param, v) in &lists {
        if v.len() == 1 {
            match param {
                SweepParam::Percentile => cfg.percentile = v[0],
                SweepParam::Epsilon => cfg.epsilon = v[0],
                SweepParam::RequestSampling => cfg.request_sampling_rate = v[0],
            }
        }
    }
    if let Some((param, values)) = swept.first() {
        if a.spec.is_some() {
            bail!("sweeps run on presets; drop --spec");
        }
        let s = sweep(&cfg, *param, values)?;
        match &a.out {
            Some(dir) => {
                let mut w = create(&dir.join("sweep.csv"))?;
                write_sweep_csv(&mut w, &s)?;
                w.flush()?;
                write_json(Some(&dir.join("sweep.json")), &serde_json::to_value(&s)?)?;
                eprintln!(
                    "{:?} sweep trend {:?} -> {}",
                    param,
                    s.trend(),
                    dir.display()
                );
            }
            None => write_json(None, &serde_json::to_value(&s)?)?,
        }
        return Ok(());
    }
    let spec = a.spec.as_deref().map(load_spec).transpose()?;
    let exp = run_experiment(&cfg, spec.as_ref())?;
    match &a.out {
        Some(dir) => {
            let mut w = create(&dir.join("metrics.csv"))?;
            write_metrics_csv(&mut w, &exp)?;
            w.flush()?;
            write_json(
                Some(&dir.join("summary.json")),
                &serde_json::to_value(&exp)?,
            )?;
            let s = &exp.summary;
            eprintln!(
                "{} runs: converged {}/{} (mean {:.0} samples), top-5 {:.2}, fraction enabled {:.3} -> {}",
                s.runs,
                s.converged_runs,
                s.runs,
                s.convergence_samples.mean,
                s.top5_accuracy,
                s.fraction_enabled.mean,
                dir.display()
            );
        }
        None => write_json(None, &serde_json::to_value(&exp)?)?,
    }
    Ok(())
}

fn tags(file: Option<&Path>, a: TagsArgs) -> Result<()> {
    let mut k = a.knobs.clone();
    if a.traces.is_none() && k.preset.is_none() {
        k.preset = Some("canary".into());
    }
    let cfg = single_config(file, &k)?;
    let (traces, source) = match &a.traces {
        Some(p) => (load_traces(p, a.reparent_orphans)?, json!({"traces": p})),
        None => {
            let (sim, _): (Simulator, _) = cfg.simulator(None, cfg.base_seed)?;
            let w = WorkloadSpec {
                num_requests: a.requests,
                request_sampling_rate: 1.0,
                batch_size: cfg.batch_size,
                rng_seed: cfg.base_seed,
            };
            let (t, _) = sim.generate(&w, &SamplingPolicy::all_on());
            (
                t,
                json!({"preset": cfg.preset, "fault": cfg.fault, "seed": cfg.base_seed, "requests": a.requests}),
            )
        }
    };
    if !(0.0..=1.0).contains(&a.threshold) {
        bail!("--threshold {} outside [0, 1]", a.threshold);
    }
    let rep = correlation_report(&build_tag_matrix(&traces), a.threshold);
    let mut w = sink(a.out.as_deref())?;
    writeln!(
        w,
        "{}",
        meta_line(&json!({"source": source, "threshold": a.threshold}))?
    )?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    if a.out.is_some() {
        for e in rep.entries.iter().take(5) {
            eprintln!(
                "{:<40} r={:+.3}{}",
                e.column,
                e.r,
                if e.significant { "  *" } else { "" }
            );
        }
    }
    Ok(())
}

fn decompose_cmd(a: DecomposeArgs) -> Result<()> {
    let traces = load_traces(&a.traces, a.reparent_orphans)?;
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "{}", meta_line(&json!({"traces": a.traces}))?)?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record([
        "trace_id",
        "span_id",
        "service",
        "operation",
        "url",
        "duration",
        "child_waiting",
        "self_segment",
    ])?;
    for t in &traces {
        for d in decompose(t) {
            c.write_record([
                t.trace_id.as_str(),
                &d.span_id,
                &d.identity.service,
                &d.identity.operation,
                &d.identity.url,
                &d.duration.to_string(),
                &d.child_waiting.to_string(),
                &d.self_segment.to_string(),
            ])?;
        }
    }
    c.flush()?;
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    if a.arms < 2 {
        bail!("--arms must be at least 2");
    }
    let base = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let env = match a.env {
        EnvKind::Skewed => ArmEnv::skewed(a.arms),
        EnvKind::Uniform => ArmEnv::uniform(a.arms),
        EnvKind::Identical => ArmEnv::identical(a.arms, 0.5),
        EnvKind::OneDominant => ArmEnv::one_dominant(a.arms, 0.9, 0.1),
    };
    let algs = default_comparison(&env, a.budget);
    let seeds: Vec<u64> = (0..a.seeds).map(|i| base.wrapping_add(i)).collect();
    let curves = compare_elimination(&env, &algs, a.budget, &seeds, a.step)?;
    let meta = json!({
        "env": env.name, "arms": a.arms, "budget": a.budget, "seeds": a.seeds, "base_seed": base, "step": a.step,
        "algorithms": algs.iter().map(|x| x.name()).collect::<Vec<_>>(),
    });
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "{}", meta_line(&meta)?)?;
    write_curves_csv(&mut w, &curves)?;
    w.flush()?;
    for c in &curves {
        eprintln!(
            "{:<24} surviving at {}: {:.2}",
            c.algorithm,
            a.budget,
            c.final_mean()
        );
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.spans == 0 || a.mc_rows == 0 {
        bail!("--spans and --mc-rows must be positive");
    }
    let r = bench_inference(a.spans, a.mc_rows, a.runs);
    write_json(a.out.as_deref(), &serde_json::to_value(&r)?)
}
