//! Command-line front end for the majordomo stack.
//!
//! Exit codes follow the scenario statuses so scripts can branch on them:
//! 0 success (or a met expectation), 1 an unmet expectation, 2 a failed or
//! diagnosed task, 3 an operator abort, 64 bad usage or unreadable inputs.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use majordomo::fixtures::fixtures_root;
use majordomo::grammar::GrammarSpec;
use majordomo::hallway::{run_batch, CorridorSpec, HumanModel, SignalPolicy};
use majordomo::hfsm::MachineDefinition;
use majordomo::prism::{annotate_detections, DetectionFile, SemanticMap, VerbatimExtractor};
use majordomo::scenario::{run_scenario_at, Session};
use majordomo::sim::WorldSpec;

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "majordomo", version, about = "Simulated domestic service robot", max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive session: type commands, watch the robot work.
    ///
    /// Besides robot commands, the prompt accepts `:kb` (dump the knowledge
    /// base), `:abort` (interrupt the running task) and `:quit`.
    Repl(ReplArgs),
    /// Run a scenario file and exit with its status.
    Run(RunArgs),
    /// Generate a corpus of random commands with their parsed frames.
    Gen(GenArgs),
    /// Check a task-executive machine definition for structural defects.
    Validate(ValidateArgs),
    /// Read sign detections into a semantic map.
    Prism(PrismArgs),
    /// Monte-Carlo corridor-passing batches under a signalling policy.
    Hallway(HallwayArgs),
}

#[derive(Args)]
struct ReplArgs {
    /// World file; defaults to the bundled apartment.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Write the executor log (JSON Lines) here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Print only the final status line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct GenArgs {
    /// How many commands to emit.
    #[arg(long, default_value_t = 10)]
    count: u64,
    /// Seed of the first command; item `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write JSON Lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    machine: PathBuf,
}

#[derive(Args)]
struct PrismArgs {
    #[command(subcommand)]
    command: PrismCommand,
}

#[derive(Subcommand)]
enum PrismCommand {
    /// Annotate a detection file and merge the results into a map.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    detections: PathBuf,
    /// Map to extend; created empty if the file does not exist yet.
    #[arg(long)]
    map: PathBuf,
    /// Where to write the result; defaults to overwriting --map.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// No signalling at all.
    None,
    /// LED turn signal.
    Signal,
    /// Turn signal plus a passive demonstration at the corridor mouth.
    #[value(name = "signal+demo", alias = "signal-demo")]
    SignalDemo,
}

impl From<PolicyArg> for SignalPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::None => SignalPolicy::None,
            PolicyArg::Signal => SignalPolicy::TurnSignal,
            PolicyArg::SignalDemo => SignalPolicy::TurnSignalWithPassiveDemo,
        }
    }
}

#[derive(Args)]
struct HallwayArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Signal)]
    policy: PolicyArg,
    /// Probability that the human reads and obeys the signal.
    #[arg(long, default_value_t = 0.5)]
    p_comply: f64,
    /// Human reaction time in seconds.
    #[arg(long, default_value_t = 0.5)]
    latency: f64,
    /// Number of trials.
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors; everything else is usage.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Repl(args) => repl(args),
        Command::Run(args) => run(args),
        Command::Gen(args) => gen(args),
        Command::Validate(args) => validate(args),
        Command::Prism(args) => match args.command {
            PrismCommand::Ingest(a) => ingest(a),
        },
        Command::Hallway(args) => hallway(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load_grammar() -> Result<GrammarSpec> {
    let path = fixtures_root().join("grammar.json");
    GrammarSpec::from_file(&path).with_context(|| format!("loading {}", path.display()))
}

fn repl(args: ReplArgs) -> Result<u8> {
    let grammar = load_grammar()?;
    let world_path = args
        .world
        .unwrap_or_else(|| fixtures_root().join("worlds/demo_apartment.json"));
    let world = WorldSpec::from_file(&world_path)
        .with_context(|| format!("loading {}", world_path.display()))?;
    let mut session = Session::new(grammar, &world, args.seed)?;
    let abort = session.abort_handle();

    // A dedicated reader thread so `:abort` can interrupt a running task:
    // it flips the abort flag directly and queues everything else.
    let (tx, rx) = mpsc::channel::<String>();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if line.trim() == ":abort" {
                abort.request();
            } else if tx.send(line).is_err() {
                break;
            }
        }
    });

    println!("{} loaded; the robot is at your service.", world.name);
    prompt();
    while let Ok(line) = rx.recv() {
        let line = line.trim();
        match line {
            "" => {}
            ":quit" | ":q" => break,
            ":kb" => {
                for fact in session.kb().dump() {
                    println!("{fact}");
                }
            }
            _ if line.starts_with(':') => eprintln!("unknown directive {line}"),
            _ => match session.run_utterance(line) {
                Ok(outcome) => {
                    println!("frame: {}", serde_json::to_string(&outcome.frame)?);
                    print!("{}", outcome.result.log_jsonl());
                    println!("status: {} — {}", outcome.status, outcome.summary);
                }
                Err(e) => eprintln!("error: {e}"),
            },
        }
        prompt();
    }
    Ok(0)
}

fn prompt() {
    eprint!("> ");
    let _ = std::io::stderr().flush();
}

fn run(args: RunArgs) -> Result<u8> {
    let run = run_scenario_at(&args.scenario, &fixtures_root())
        .with_context(|| format!("running {}", args.scenario.display()))?;
    if let Some(path) = &args.log {
        std::fs::write(path, run.log_jsonl())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if !args.quiet {
        for line in &run.summaries {
            println!("{line}");
        }
    }
    match run.expected {
        Some(expected) => {
            println!("status: {} (expected {expected})", run.status);
            if run.status == expected {
                Ok(0)
            } else {
                Ok(EXIT_MISMATCH)
            }
        }
        None => {
            println!("status: {}", run.status);
            Ok(run.status.exit_code() as u8)
        }
    }
}

fn gen(args: GenArgs) -> Result<u8> {
    let grammar = load_grammar()?;
    let mut lines = String::new();
    for i in 0..args.count {
        let (utterance, frame) = grammar.generate(args.seed.wrapping_add(i));
        let record = serde_json::json!({ "utterance": utterance, "frame": frame });
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, lines)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{lines}"),
    }
    Ok(0)
}

fn validate(args: ValidateArgs) -> Result<u8> {
    let def = MachineDefinition::from_file(&args.machine)
        .with_context(|| format!("loading {}", args.machine.display()))?;
    let defects = def.validate();
    if defects.is_empty() {
        println!("ok: {} ({} states)", def.name, def.states.len());
        Ok(0)
    } else {
        for d in &defects {
            println!("defect: {d}");
        }
        Ok(EXIT_MISMATCH)
    }
}

fn ingest(args: IngestArgs) -> Result<u8> {
    let file = DetectionFile::from_file(&args.detections)
        .with_context(|| format!("loading {}", args.detections.display()))?;
    let mut map = if args.map.exists() {
        SemanticMap::from_file(&args.map)
            .with_context(|| format!("loading {}", args.map.display()))?
    } else {
        let name = args
            .map
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("--map has no usable file name"))?;
        SemanticMap::empty(name)
    };
    let outcome = annotate_detections(&file, &VerbatimExtractor);
    for (index, reason) in &outcome.skipped {
        eprintln!("skipped detection {index}: {reason}");
    }
    map.ingest(&outcome.annotations);
    let out = args.out.as_deref().unwrap_or(&args.map);
    map.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "annotated {}, skipped {}; {} now holds {} landmarks",
        outcome.annotations.len(),
        outcome.skipped.len(),
        out.display(),
        map.landmarks.len()
    );
    Ok(0)
}

fn hallway(args: HallwayArgs) -> Result<u8> {
    let corridor = CorridorSpec::default();
    let human = HumanModel {
        p_comply: args.p_comply,
        latency_s: args.latency,
        ..Default::default()
    };
    let report = run_batch(&corridor, &human, args.policy.into(), args.n, args.seed)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, format!("{json}\n"))
                .with_context(|| format!("writing {}", path.display()))?;
            println!(
                "{} trials under {}: conflict rate {:.4} [{:.4}, {:.4}]",
                report.n, report.policy, report.rate, report.ci95[0], report.ci95[1]
            );
        }
        None => println!("{json}"),
    }
    Ok(0)
}
