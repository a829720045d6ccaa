//! `scforge`: parse, transform, simulate, check and export statechart
//! networks.
//!
//! Exit codes: 0 success, 1 property or equivalence failure, 2 usage or
//! validation error, 3 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use scforge_core::equivalence::{check_random, project, project_sc, EquivError, ProjectedTrace};
use scforge_core::parser::check_source;
use scforge_core::sc::{EventEnv, ScEngine, Schedule};
use scforge_core::transform::{transform_with, TransformOptions, Transformation, FINAL_STAGE};
use scforge_core::verify::{check_invariant, check_invariant_ta, parse_properties, Outcome, PropertyResult, SafetyProperty};
use scforge_core::{write_queries, write_uppaal_xml, ExportOptions, StatechartNetwork, TaEngine, VerifyOptions};

#[derive(Parser)]
#[command(name = "scforge", version, about = "Statechart to timed-automata transformation toolkit")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, env = "SCFORGE_FORMAT", default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Sc,
    Ta,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate { path: PathBuf },
    /// Apply the transformation rules and print one stage.
    Transform {
        path: PathBuf,
        /// Stage to emit, 1 to 7.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=FINAL_STAGE as i64))]
        emit_stage: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one side on a schedule and print the trace.
    Simulate {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "sc")]
        side: Side,
        /// Schedule file with lines `cycle <k>: event, ...`. Defaults to no events.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, env = "SCFORGE_HORIZON", default_value_t = 10)]
        horizon: u64,
        /// Print chart states and data variables only, in a format shared by both sides.
        #[arg(long)]
        project: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Co-simulate the model and its transformation on random schedules.
    Equiv {
        path: PathBuf,
        #[arg(long, env = "SCFORGE_SCHEDULES", default_value_t = 100)]
        schedules: usize,
        #[arg(long, env = "SCFORGE_HORIZON", default_value_t = 50)]
        horizon: u64,
        /// Random if omitted; the seed used is always reported.
        #[arg(long, env = "SCFORGE_SEED")]
        seed: Option<u64>,
        /// Leave one rule out of the pipeline (2 to 7).
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=FINAL_STAGE as i64))]
        skip_rule: Option<u8>,
        #[arg(long, env = "SCFORGE_JOBS")]
        jobs: Option<usize>,
    },
    /// Check safety properties by bounded exhaustive search.
    Verify {
        path: PathBuf,
        #[arg(long)]
        props: PathBuf,
        #[arg(long, env = "SCFORGE_MAX_CYCLES", default_value_t = 25)]
        max_cycles: u64,
        #[arg(long, value_enum, default_value = "sc")]
        side: Side,
    },
    /// Write the final network as UPPAAL XML plus a query file.
    Export {
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        props: Option<PathBuf>,
        /// Fail instead of warning on constructs UPPAAL may reject.
        #[arg(long)]
        strict: bool,
    },
}

enum Failure {
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

type Run = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn load(path: &Path) -> Result<StatechartNetwork, Failure> {
    let src = read(path)?;
    check_source(&src).map(|(n, _)| n).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        Failure::Usage(lines.join("\n"))
    })
}

fn transform(net: &StatechartNetwork, skip: Option<u8>) -> Result<Transformation, Failure> {
    let opts = skip.map_or_else(TransformOptions::default, TransformOptions::skipping);
    transform_with(net, &opts).map_err(|e| Failure::Usage(e.to_string()))
}

fn validate(path: &Path, format: Format) -> Run {
    let src = read(path)?;
    let diags = check_source(&src).err().unwrap_or_default();
    match format {
        Format::Json => print!("{}", to_json(&json!({ "file": path, "valid": diags.is_empty(), "diagnostics": diags }))),
        Format::Text => {
            for d in &diags {
                println!("{}:{d}", path.display());
            }
            if diags.is_empty() {
                println!("{}: ok", path.display());
            }
        }
    }
    Ok(if diags.is_empty() { 0 } else { 2 })
}

fn cmd_transform(path: &Path, stage: Option<u8>, out: Option<&Path>, format: Format) -> Run {
    let net = load(path)?;
    let t = transform(&net, None)?;
    let k = stage.unwrap_or(FINAL_STAGE) as usize;
    let ta = &t.stages[k - 1];
    let text = match format {
        Format::Text => ta.dump(),
        Format::Json => to_json(&json!({ "stage": k, "network": ta })),
    };
    emit(out, &text)?;
    Ok(0)
}

fn projected_text(t: &ProjectedTrace) -> String {
    let mut out = String::new();
    for (i, s) in t.statuses.iter().enumerate() {
        let label = if i == 0 { "INIT" } else { &t.labels[i - 1] };
        out.push_str(&format!("{i} | {s} | {label}\n"));
    }
    if let Some(e) = &t.terminal {
        out.push_str(&format!("error: {e}\n"));
    }
    out
}

fn simulate(path: &Path, side: Side, schedule: Option<&Path>, horizon: u64, proj: bool, out: Option<&Path>, format: Format) -> Run {
    let net = load(path)?;
    let schedule = match schedule {
        Some(p) => Schedule::parse(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => Schedule::new(),
    };
    let env = EventEnv::new(schedule);
    let (text, failed) = match side {
        Side::Sc => {
            let (trace, err) = ScEngine::new(&net).map_err(|e| Failure::Usage(e.to_string()))?.run_partial(&env, horizon);
            let failed = err.is_some();
            let text = if proj {
                let p = project_sc(&trace, err.as_ref());
                match format {
                    Format::Text => projected_text(&p),
                    Format::Json => to_json(&p),
                }
            } else {
                let error = err.map(|e| e.to_string());
                match format {
                    Format::Text => trace.dump() + &error.map(|e| format!("error: {e}\n")).unwrap_or_default(),
                    Format::Json => to_json(&json!({ "trace": trace, "error": error })),
                }
            };
            (text, failed)
        }
        Side::Ta => {
            let t = transform(&net, None)?;
            let (trace, err) = TaEngine::new(&t.ta).map_err(|e| Failure::Usage(e.to_string()))?.run_partial(&env, horizon);
            let failed = err.is_some();
            let text = if proj {
                let p = project(&trace, &net, &t.ta, &t.map, err.as_ref()).map_err(|e| Failure::Usage(e.to_string()))?;
                match format {
                    Format::Text => projected_text(&p),
                    Format::Json => to_json(&p),
                }
            } else {
                let error = err.map(|e| e.to_string());
                match format {
                    Format::Text => trace.dump() + &error.map(|e| format!("error: {e}\n")).unwrap_or_default(),
                    Format::Json => to_json(&json!({ "trace": trace, "error": error })),
                }
            };
            (text, failed)
        }
    };
    emit(out, &text)?;
    Ok(if failed { 1 } else { 0 })
}

fn fresh_seed() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
}

#[allow(clippy::too_many_arguments)]
fn equiv(path: &Path, schedules: usize, horizon: u64, seed: Option<u64>, skip: Option<u8>, jobs: Option<usize>, format: Format) -> Run {
    if schedules == 0 {
        return Err(Failure::Usage("--schedules must be at least 1".into()));
    }
    let net = load(path)?;
    let t = transform(&net, skip)?;
    let seed = seed.unwrap_or_else(fresh_seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    let report = match pool.install(|| check_random(&net, &t.ta, &t.map, schedules, horizon, seed)) {
        Ok(r) => r,
        Err(e @ (EquivError::Automata(_) | EquivError::Statechart(_) | EquivError::MapMismatch(_))) => {
            if format == Format::Json {
                print!("{}", to_json(&json!({ "seed": seed, "error": e.to_string() })));
            } else {
                println!("seed: {seed}");
            }
            return Err(Failure::Usage(format!("network rejected: {e}")));
        }
    };
    match format {
        Format::Json => print!("{}", to_json(&report)),
        Format::Text => {
            println!("seed: {seed}");
            println!("schedules: {}, horizon: {}", report.schedules_tested, report.horizon);
            match &report.first_divergence {
                None => println!("verdict: equivalent"),
                Some(d) => {
                    println!("verdict: divergent ({} of {} schedules)", report.divergent_schedules, report.schedules_tested);
                    println!("first divergence: schedule {} at status {}", d.schedule_index, d.step);
                    let show = |s: &Option<scforge_core::equivalence::ProjectedStatus>| s.as_ref().map_or("-".to_string(), |s| s.to_string());
                    println!("  statechart: {} via {}", show(&d.statechart), d.statechart_label.as_deref().unwrap_or("-"));
                    println!("  automata:   {} via {}", show(&d.automata), d.automata_label.as_deref().unwrap_or("-"));
                    if d.statechart_terminal.is_some() || d.automata_terminal.is_some() {
                        println!("  terminals: {:?} / {:?}", d.statechart_terminal, d.automata_terminal);
                    }
                    // Cycles after the divergent one do not matter for replay.
                    let width = net.charts.len();
                    let cycle = scforge_core::model::position(d.step, width).0 as u64;
                    let witness = Schedule::parse(&d.schedule).map_or_else(|_| d.schedule.clone(), |s| s.truncated(cycle + 1).to_text());
                    println!("witness schedule (cycles 0..={cycle}):");
                    print!("{witness}");
                }
            }
        }
    }
    Ok(if report.is_equivalent() { 0 } else { 1 })
}

fn verify(path: &Path, props: &Path, max_cycles: u64, side: Side, format: Format) -> Run {
    let net = load(path)?;
    let props: Vec<SafetyProperty> = parse_properties(&read(props)?).map_err(|e| Failure::Usage(format!("{}: {e}", props.display())))?;
    let opts = VerifyOptions::new(max_cycles);
    let t = match side {
        Side::Ta => Some(transform(&net, None)?),
        Side::Sc => None,
    };
    let mut results: Vec<PropertyResult> = Vec::new();
    for p in &props {
        let r = match &t {
            Some(t) => check_invariant_ta(&net, &t.ta, &t.map, p, opts),
            None => check_invariant(&net, p, opts),
        };
        results.push(r.map_err(|e| Failure::Usage(e.to_string()))?);
    }
    match format {
        Format::Json => print!("{}", to_json(&results)),
        Format::Text => {
            for r in &results {
                match &r.outcome {
                    Outcome::Holds => println!("{}: holds ({} statuses, depth {})", r.property, r.explored, r.depth),
                    Outcome::Violated(c) => {
                        println!("{}: violated ({} statuses, depth {})", r.property, r.explored, r.depth);
                        println!("schedule:");
                        print!("{}", c.schedule);
                        println!("trace:");
                        print!("{}", c.trace.dump());
                    }
                }
            }
        }
    }
    Ok(if results.iter().all(PropertyResult::holds) { 0 } else { 1 })
}

fn export(path: &Path, out: &Path, props: Option<&Path>, strict: bool, format: Format) -> Run {
    let net = load(path)?;
    let props = match props {
        Some(p) => parse_properties(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    for p in &props {
        p.check(&net).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let t = transform(&net, None)?;
    let x = write_uppaal_xml(&t.ta, ExportOptions { strict }).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    let (xml, q) = (out.join("model.xml"), out.join("model.q"));
    write(&xml, &x.xml)?;
    write(&q, &write_queries(&props))?;
    match format {
        Format::Json => print!("{}", to_json(&json!({ "files": [xml, q], "warnings": x.warnings }))),
        Format::Text => {
            for w in &x.warnings {
                eprintln!("warning: {}.{}: {}", w.automaton, w.edge, w.message);
            }
            println!("wrote {}", xml.display());
            println!("wrote {}", q.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let f = cli.format;
    let result = match cli.command {
        Command::Validate { path } => validate(&path, f),
        Command::Transform { path, emit_stage, out } => cmd_transform(&path, emit_stage, out.as_deref(), f),
        Command::Simulate { path, side, schedule, horizon, project, out } => {
            simulate(&path, side, schedule.as_deref(), horizon, project, out.as_deref(), f)
        }
        Command::Equiv { path, schedules, horizon, seed, skip_rule, jobs } => equiv(&path, schedules, horizon, seed, skip_rule, jobs, f),
        Command::Verify { path, props, max_cycles, side } => verify(&path, &props, max_cycles, side, f),
        Command::Export { path, out, props, strict } => export(&path, &out, props.as_deref(), strict, f),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let (Failure::Usage(m) | Failure::Io(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}
