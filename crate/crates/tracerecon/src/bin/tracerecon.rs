//! Command-line driver: single reconstructions, benchmark sweeps, report
//! aggregation, alignment statistics, and raw trace dumps.

use std::error::Error;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use tracerecon::bitstring::BitString;
use tracerecon::channel::{transmit, RngStream, Streams, TraceSampler};
use tracerecon::desert::{first_desert, tail_string};
use tracerecon::findend::{coarse_estimate, Aligner};
use tracerecon::harness::{
    self, cell_params, emit, generate_string, parse_csv, run_trials, summarize, summary_to_csv,
    EmitFormat, ExperimentConfig, GenKind,
};
use tracerecon::oracles::mc_align_bias;
use tracerecon::params::{derive_params, Overrides, Rate, ReconParams};
use tracerecon::pipeline::{preprocess, reconstruct, ReconOutcome};

#[derive(Parser)]
#[command(
    name = "tracerecon",
    version,
    about = "Trace reconstruction over the deletion channel: simulate, reconstruct, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reconstruct one generated string and print it (or FAILURE)
    Reconstruct(InstanceArgs),
    /// Sweep an (n, delta) grid, one seeded trial set per cell
    Bench(BenchArgs),
    /// Aggregate a bench CSV into per-cell success rates
    Summarize {
        /// Bench CSV to read
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv | json
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Per-trace desert-end alignment outcomes vs the ground-truth oracle
    FindendStats(StatsArgs),
    /// Monte-Carlo bias of the alignment estimator on one instance
    AlignStats(StatsArgs),
    /// Dump raw channel traces as <seed>,<stream>,<bits>
    Simulate(StatsArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Source string length (pre-preprocessing)
    #[arg(long)]
    n: usize,
    /// Deletion probability
    #[arg(long)]
    delta: Option<f64>,
    /// Rate exponent: delta = n^-(1/3+epsilon)
    #[arg(long, conflicts_with = "delta")]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform | desert-free | implant:PAT:LEN:POS | multi-desert:...
    #[arg(long, default_value = "uniform", value_parser = GenKind::from_str)]
    gen: GenKind,
    /// Override a derived constant, e.g. --override m=60 (keys: m, C, N,
    /// alpha, gamma, sigma); repeatable
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(String, usize)>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated source lengths
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = GenKind::from_str)]
    gen: Option<GenKind>,
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(String, usize)>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json | svg-plot
    #[arg(long, value_parser = EmitFormat::from_str)]
    format: Option<EmitFormat>,
    /// Single majority-alignment pass, no end finding (baseline)
    #[arg(long)]
    bma_only: bool,
    /// Record real wall-clock times (breaks byte-identical reruns)
    #[arg(long)]
    timings: bool,
    /// JSON file with an ExperimentConfig; explicit flags win over it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct StatsArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Traces to draw
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(String, usize), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let allowed = ["m", "C", "N", "alpha", "gamma", "sigma"];
    if !allowed.contains(&key) {
        return Err(format!("unknown override {key:?} (one of {allowed:?})"));
    }
    let value: usize = value
        .parse()
        .map_err(|_| format!("override {key}: bad value {value:?}"))?;
    Ok((key.to_string(), value))
}

fn overrides_from_pairs(pairs: &[(String, usize)]) -> Overrides {
    let mut ov = Overrides::default();
    for (key, value) in pairs {
        match key.as_str() {
            "m" => ov.m = Some(*value),
            "C" => ov.c = Some(*value),
            "N" => ov.n_traces = Some(*value),
            "alpha" => ov.alpha = Some(*value),
            "gamma" => ov.gamma = Some(*value),
            "sigma" => ov.sigma = Some(*value),
            _ => unreachable!("validated by parse_override"),
        }
    }
    ov
}

fn instance_rate(args: &InstanceArgs) -> Result<Rate, String> {
    match (args.delta, args.epsilon) {
        (Some(d), None) => Ok(Rate::Delta(d)),
        (None, Some(e)) => Ok(Rate::Epsilon(e)),
        (None, None) => Err("one of --delta / --epsilon is required".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn warn_params(params: &ReconParams) {
    for w in &params.warnings {
        eprintln!("warning: {w}");
    }
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> Result<(), Box<dyn Error>> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| format!("writing {}: {e}", path.display()))?
        }
        None => print_maybe_piped(content),
    }
    Ok(())
}

/// Large outputs routinely get piped into `head`; a closed pipe is an
/// early exit, not a panic.
fn print_maybe_piped(content: &str) {
    use std::io::Write;
    if std::io::stdout().write_all(content.as_bytes()).is_err() {
        std::process::exit(0);
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.cmd {
        Cmd::Reconstruct(args) => cmd_reconstruct(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Summarize { input, out, format } => cmd_summarize(input, out, &format),
        Cmd::FindendStats(args) => cmd_findend_stats(args),
        Cmd::AlignStats(args) => cmd_align_stats(args),
        Cmd::Simulate(args) => cmd_simulate(args),
    }
}

fn cmd_reconstruct(args: InstanceArgs) -> Result<(), Box<dyn Error>> {
    let rate = instance_rate(&args)?;
    let overrides = overrides_from_pairs(&args.overrides);
    let n = args.n;
    let params = cell_params(n, rate, &overrides)?;
    warn_params(&params);

    let mut streams = Streams::new(args.seed);
    let x = generate_string(&args.gen, n, &params.desert_params(), &mut streams.next().rng())?;
    let pre = preprocess(n, params.c, &mut streams.next().rng())?;
    let z = x.concat(&pre.v);
    let sampler = TraceSampler::new(&z, params.delta);
    let report = reconstruct(&sampler, &params, &mut streams);

    match &report.outcome {
        ReconOutcome::Reconstructed(zhat) => {
            let xhat = zhat.subword(0, n - 1);
            print_maybe_piped(&format!("{xhat}\n"));
            eprintln!(
                "reconstructed {n} bits in {} rounds using {} traces; matches source: {}",
                report.rounds,
                report.traces_used,
                xhat == x
            );
        }
        ReconOutcome::Failure { reason, round } => {
            println!("FAILURE: {reason} (round {round})");
            eprintln!("used {} traces", report.traces_used);
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Box<dyn Error>> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("reading {}: {e}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| format!("parsing {}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    // explicit flags win over the config file
    if !args.n.is_empty() {
        cfg.ns = args.n.clone();
    }
    if !args.delta.is_empty() {
        cfg.deltas = args.delta.clone();
        cfg.epsilons.clear();
    }
    if !args.epsilon.is_empty() {
        cfg.epsilons = args.epsilon.clone();
        cfg.deltas.clear();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = args.gen {
        cfg.gen = g;
    }
    if !args.overrides.is_empty() {
        cfg.overrides = overrides_from_pairs(&args.overrides);
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.bma_only |= args.bma_only;
    cfg.timings |= args.timings;

    let reports = run_trials(&cfg)?;
    match &cfg.out {
        Some(path) => {
            emit(&reports, cfg.format, path)?;
            eprintln!("wrote {} rows to {}", reports.len(), path.display());
        }
        None => print_maybe_piped(&harness::render(&reports, cfg.format)),
    }
    for s in summarize(&reports) {
        eprintln!(
            "n={} delta={}: {}/{} ok, mean traces {:.0}",
            s.n, s.delta, s.successes, s.trials, s.mean_traces
        );
    }
    Ok(())
}

fn cmd_summarize(input: PathBuf, out: Option<PathBuf>, format: &str) -> Result<(), Box<dyn Error>> {
    let text = std::fs::read_to_string(&input)
        .map_err(|e| format!("reading {}: {e}", input.display()))?;
    let reports = parse_csv(&text).map_err(|e| format!("parsing {}: {e}", input.display()))?;
    let rows = summarize(&reports);
    let content = match format {
        "csv" => summary_to_csv(&rows),
        "json" => {
            let mut s = serde_json::to_string_pretty(&rows)?;
            s.push('\n');
            s
        }
        other => return Err(format!("unknown summarize format {other:?}").into()),
    };
    write_or_print(out.as_ref(), &content)
}

/// Ground-truth instance shared by the stats modes: the generated string is
/// used directly as the channel source (no preprocessing), and the first
/// desert provides (r, s, end).
struct StatsInstance {
    x: BitString,
    params: ReconParams,
    end: usize,
    aligner: Aligner,
}

fn build_stats_instance(args: &InstanceArgs) -> Result<StatsInstance, Box<dyn Error>> {
    let rate = instance_rate(args)?;
    let overrides = overrides_from_pairs(&args.overrides);
    let params = derive_params(args.n, rate, &overrides)?;
    warn_params(&params);
    let dp = params.desert_params();
    let mut streams = Streams::new(args.seed);
    let x = generate_string(&args.gen, args.n, &dp, &mut streams.next().rng())?;
    let loc = first_desert(&x, &dp)?
        .ok_or("generated string has no desert; use an implant generator")?;
    let (r, s) = (loc.r, loc.pattern);
    let end = loc.end.ok_or("desert has no end before the last position")?;
    tail_string(&x, end, s.k(), params.sigma)?; // fail early if out of range
    let sampler = TraceSampler::new(&x, params.delta);
    let est = coarse_estimate(r, &x.subword(0, r + params.m), &sampler, &params, &mut streams)?;
    eprintln!(
        "instance: n={} delta={} r={r} pattern={s} end={end} end_image={}",
        args.n, params.delta, est.end_image
    );
    let aligner = Aligner::new(&est, &s, &params);
    Ok(StatsInstance {
        x,
        params,
        end,
        aligner,
    })
}

fn cmd_findend_stats(args: StatsArgs) -> Result<(), Box<dyn Error>> {
    let inst = build_stats_instance(&args.instance)?;
    let sampler = TraceSampler::new(&inst.x, inst.params.delta);
    let mut streams = Streams::with_base(args.instance.seed, 1 << 40);
    let mut out = String::from("trace_id,outcome,location,last_oracle\n");
    for trace_id in 0..args.trials {
        let t = sampler.draw(streams.next());
        let mut rng = streams.next().rng();
        let got = inst.aligner.align(&t.bits, &mut rng);
        let _ = writeln!(
            out,
            "{trace_id},{},{},{}",
            if got.is_some() { "ok" } else { "nil" },
            got.map_or(-1, |l| l as i64),
            tracerecon::channel::last_surviving(&t, inst.end)
        );
    }
    write_or_print(args.out.as_ref(), &out)
}

fn cmd_align_stats(args: StatsArgs) -> Result<(), Box<dyn Error>> {
    let inst = build_stats_instance(&args.instance)?;
    let bias = mc_align_bias(
        &inst.x,
        inst.end,
        &inst.params,
        args.trials,
        args.instance.seed.wrapping_add(1 << 32),
    );
    let expected = (1.0 - inst.params.delta) * inst.end as f64;
    let payload = serde_json::json!({
        "trials": args.trials,
        "nonnil": bias.nonnil,
        "nil_rate": bias.nil_rate,
        "mean": bias.mean,
        "stderr": bias.stderr,
        "end": inst.end,
        "expected_mean": expected,
        "bias": bias.mean - expected,
    });
    let content = format!("{}\n", serde_json::to_string_pretty(&payload)?);
    write_or_print(args.out.as_ref(), &content)
}

fn cmd_simulate(args: StatsArgs) -> Result<(), Box<dyn Error>> {
    let rate = instance_rate(&args.instance)?;
    let overrides = overrides_from_pairs(&args.instance.overrides);
    let params = derive_params(args.instance.n, rate, &overrides)?;
    let dp = params.desert_params();
    let mut streams = Streams::new(args.instance.seed);
    let x = generate_string(&args.instance.gen, args.instance.n, &dp, &mut streams.next().rng())?;
    let mut out = String::new();
    for i in 0..args.trials {
        let stream = RngStream::new(args.instance.seed, (1 << 32) + i);
        let t = transmit(&x, params.delta, &mut stream.rng());
        let _ = writeln!(out, "{},{},{}", stream.seed, stream.stream, t.bits);
    }
    write_or_print(args.out.as_ref(), &out)
}
