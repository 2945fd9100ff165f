use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use safebn::platoon::{build_platoon_network, Calibration, ContextSignals, TrafficSignClass};
use safebn::runtime::{
    emit_report, load_reference, run_scenario, step, synthetic, write_trace_jsonl, Frame,
    RunConfig, ScenarioScript,
};
use safebn::stats::{read_channel_file, RngSeed};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 2;
const EXIT_OOD: u8 = 10;

#[derive(Parser)]
#[command(
    name = "safebn",
    version,
    about = "Distribution-shift monitor fused with Bayesian-network risk assessment"
)]
struct Cli {
    /// Print per-channel details and trace records.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a reference directory and summarize it.
    Ingest {
        #[arg(long)]
        reference: PathBuf,
    },
    /// Evaluate a single frame.
    Evaluate(EvaluateArgs),
    /// Run a scenario script and write trace + report files.
    Run(RunArgs),
    /// Write the synthetic reference data, frames and calibration fixtures.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = synthetic::FIXTURE_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct Overrides {
    /// Bootstrap resamples per channel.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bootstrap: Option<u64>,
    /// Significance threshold on the minimum channel p-value, in (0, 1).
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Force SafeML_Status = ID (the test is still computed and logged).
    #[arg(long)]
    disable_safeml: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(b) = self.bootstrap {
            cfg.bootstrap = b as usize;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = self.seed {
            cfg.seed = RngSeed(s);
        }
        cfg.disable_safeml |= self.disable_safeml;
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    /// Calibration file; the built-in calibration when omitted.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Channel sample file (`channel_id,value`) for the observed input.
    #[arg(long)]
    channels: PathBuf,
    /// Predicted traffic-sign class.
    #[arg(long = "class")]
    class: i64,
    /// Speed in km/h.
    #[arg(long)]
    speed: f64,
    #[arg(long, default_value_t = 6.0)]
    distance_follower: f64,
    #[arg(long, default_value_t = 6.0)]
    distance_leader: f64,
    #[arg(long, default_value_t = 5.0)]
    safe_distance: f64,
    #[arg(long, default_value_t = 2.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    allowed_error: f64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's reference directory.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Overrides the scenario's calibration file.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { reference } => ingest(&reference),
        Command::Evaluate(args) => evaluate(args, cli.verbose),
        Command::Run(args) => run(args, cli.verbose),
        Command::Synth { out, seed } => synth(&out, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn ingest(dir: &Path) -> Result<u8> {
    let store = load_reference(dir)?;
    println!("{} classes in {}", store.len(), dir.display());
    for (class, channels) in store.iter() {
        let counts: Vec<String> = channels
            .iter()
            .map(|c| format!("ch{}={}", c.channel_id(), c.len()))
            .collect();
        println!("  class {class:>2}: {}", counts.join(" "));
    }
    Ok(EXIT_OK)
}

fn load_network(calibration: Option<&Path>) -> Result<safebn::bayesnet::Network> {
    let cal = match calibration {
        Some(path) => Calibration::load(path)?,
        None => Calibration::builtin(),
    };
    Ok(build_platoon_network(&cal)?)
}

fn evaluate(args: EvaluateArgs, verbose: u8) -> Result<u8> {
    let store = load_reference(&args.reference)?;
    let net = load_network(args.calibration.as_deref())?;
    let channels = read_channel_file(&args.channels)
        .with_context(|| format!("reading {}", args.channels.display()))?;
    let frame = Frame {
        frame_id: 1,
        channels,
        predicted_class: TrafficSignClass::new(args.class)?,
        true_class: None,
        context: ContextSignals::new(
            args.speed,
            args.distance_follower,
            args.distance_leader,
            args.safe_distance,
            args.threshold,
            args.allowed_error,
        )?,
    };
    let mut cfg = RunConfig::default();
    args.overrides.apply(&mut cfg);
    let record = step(&frame, &store, &net, &cfg)?;

    for c in &record.channels {
        println!(
            "channel {}: distance {:.6} p-value {:.4}",
            c.channel_id, c.distance, c.p_value
        );
    }
    for w in &record.warnings {
        println!("warning: {w:?}");
    }
    let verdict = if record.unreliable { "OOD" } else { "ID" };
    println!(
        "verdict: {verdict} (min p {:.4}, alpha {})",
        record.min_p, cfg.alpha
    );
    if record.safeml_disabled {
        println!("safeml disabled: evidence uses SafeML_Status = ID");
    }
    let posterior: Vec<String> = record
        .posterior
        .iter()
        .enumerate()
        .map(|(k, p)| format!("S{k}={p:.4}"))
        .collect();
    println!("posterior: {}", posterior.join(" "));
    println!("state: {} ({})", record.state, record.state.name());
    println!("action: {}", record.action);
    if verbose > 0 {
        eprint!("{}", write_trace_jsonl(std::slice::from_ref(&record))?);
    }
    Ok(if record.unreliable { EXIT_OOD } else { EXIT_OK })
}

fn run(args: RunArgs, verbose: u8) -> Result<u8> {
    let mut script = ScenarioScript::load(&args.scenario)?;
    args.overrides.apply(&mut script.config);
    if let Some(dir) = args.reference {
        script.reference_dir = dir;
    }
    if let Some(cal) = args.calibration {
        script.calibration = Some(cal);
    }
    let traces = run_scenario(&script)?;
    let report = emit_report(&traces);
    let jsonl = write_trace_jsonl(&traces)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let write = |suffix: &str, text: &str| -> Result<()> {
        let path = args.out.join(format!("{}.{suffix}", script.name));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write("trace.jsonl", &jsonl)?;
    write("report.md", &report.table)?;
    write("report.csv", &report.csv)?;

    print!("{}", report.table);
    if verbose > 0 {
        eprint!("{jsonl}");
    }
    if traces.is_empty() {
        bail!("scenario produced no records");
    }
    Ok(EXIT_OK)
}

fn synth(out: &Path, seed: u64) -> Result<u8> {
    synthetic::write_fixtures(out, RngSeed(seed))?;
    println!("fixtures written to {}", out.display());
    Ok(EXIT_OK)
}
