//! Command-line front end. Every subcommand prints its main document as JSON
//! on stdout; `--out` also writes JSON and DOT files, and stage timings go to
//! stderr.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::gridworld::{fmt_label_set, Cell, GridMap};
use crate::ltl::{parse_ltl, to_buchi, BuchiAutomaton};
use crate::mvpolicy::{check_trace, render_ascii, unsafe_symbols, Trace, TraceDocument};
use crate::pipeline::{self, Abstraction, Options, PipelineError, Timings};
use crate::tsys::{is_deterministic, TaskMode};

#[derive(Parser, Debug)]
#[command(name = "ltl-compose", version, about = "Plan LTL specifications over compositions of grid-world task policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Abstract a map into its labeled, unpruned transition system.
    Abstract(MapArgs),
    /// Prune the transition system into a deterministic one.
    Prune(MapArgs),
    /// Translate a formula into a Büchi automaton.
    Compile(CompileArgs),
    /// Build the product of the pruned system and the automaton.
    Product(SpecArgs),
    /// Find the shortest accepting plan.
    Plan(SpecArgs),
    /// Plan, execute with minimum-violation policies and check the result.
    Run(RunArgs),
    /// Check a saved trace against a formula.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Primitive,
    Composite,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    /// Map file: ASCII grid or JSON document.
    #[arg(long)]
    pub map: PathBuf,
    /// Directory for JSON and DOT artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write every intermediate stage (requires --out).
    #[arg(long, requires = "out")]
    pub emit_stages: bool,
    /// Drop regions unreachable from the start region.
    #[arg(long)]
    pub drop_unreachable: bool,
    /// Start cell as `x,y`.
    #[arg(long, value_parser = parse_cell)]
    pub start: Option<Cell>,
    /// Task mode; inferred from the map when omitted.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct FormulaArgs {
    /// Formula text, e.g. "F (b & !square) & F p".
    #[arg(long)]
    pub ltl: Option<String>,
    /// File holding one formula.
    #[arg(long)]
    pub ltl_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CompileArgs {
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// Map whose alphabet declares the atoms.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub formula: FormulaArgs,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Repetitions of the plan's cycle.
    #[arg(long, default_value_t = 1)]
    pub cycles: usize,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[command(flatten)]
    pub formula: FormulaArgs,
    #[arg(long)]
    pub map: PathBuf,
    /// Trace document written by `run`.
    #[arg(long)]
    pub trace: PathBuf,
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse().map_err(|_| format!("bad x coordinate {x:?}"))?;
    let y = y.trim().parse().map_err(|_| format!("bad y coordinate {y:?}"))?;
    Ok(Cell::new(x, y))
}

fn io<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", context.display()))
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io(path))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(dir: Option<&PathBuf>) -> Result<Output, PipelineError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(io(d))?;
        }
        Ok(Output { dir: dir.cloned() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), PipelineError> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, contents).map_err(io(&path))?;
        }
        Ok(())
    }
}

fn load_map(path: &Path) -> Result<GridMap, PipelineError> {
    pipeline::load_map(&read(path)?)
}

fn options(args: &MapArgs) -> Options {
    Options {
        mode: args.mode.map(|m| match m {
            ModeArg::Primitive => TaskMode::Primitive,
            ModeArg::Composite => TaskMode::Composite,
        }),
        start: args.start,
        drop_unreachable: args.drop_unreachable,
    }
}

fn formula_text(args: &FormulaArgs) -> Result<String, PipelineError> {
    match (&args.ltl, &args.ltl_file) {
        (Some(t), _) => Ok(t.clone()),
        (None, Some(p)) => Ok(read(p)?.trim().to_string()),
        (None, None) => unreachable!("clap requires one formula source"),
    }
}

fn abstraction(args: &MapArgs, timings: &mut Timings) -> Result<Abstraction, PipelineError> {
    let map = load_map(&args.map)?;
    pipeline::abstract_map(&map, &options(args), timings)
}

fn write_stages(out: &Output, abs: &Abstraction) -> Result<(), PipelineError> {
    out.write("stage0_abstract.json", &to_json(&abs.unpruned.to_document()))?;
    out.write("stage0_abstract.dot", &abs.unpruned.to_dot("abstract"))?;
    let names = ["case1", "case2", "case3", "cleanup"];
    for (i, (ts, name)) in abs.stages.iter().zip(names).enumerate() {
        out.write(&format!("stage{}_{name}.json", i + 1), &to_json(&ts.to_document()))?;
        out.write(&format!("stage{}_{name}.dot", i + 1), &ts.to_dot(name))?;
    }
    out.write("prune_report.json", &to_json(&abs.report.to_document()))
}

fn write_automaton(out: &Output, aut: &BuchiAutomaton) -> Result<(), PipelineError> {
    out.write("buchi.json", &to_json(&aut.to_document()))?;
    out.write("buchi.dot", &aut.to_dot("buchi"))
}

/// Runs a parsed command, returning the stdout document.
pub fn execute(cli: &Cli, timings: &mut Timings) -> Result<String, PipelineError> {
    match &cli.command {
        Command::Abstract(args) => {
            let abs = abstraction(args, timings)?;
            let out = Output::new(args.out.as_ref())?;
            out.write("abstract.json", &to_json(&abs.unpruned.to_document()))?;
            out.write("abstract.dot", &abs.unpruned.to_dot("abstract"))?;
            if args.emit_stages {
                write_stages(&out, &abs)?;
            }
            Ok(to_json(&abs.unpruned.to_document()))
        }
        Command::Prune(args) => {
            let abs = abstraction(args, timings)?;
            let out = Output::new(args.out.as_ref())?;
            out.write("pruned.json", &to_json(&abs.pruned.to_document()))?;
            out.write("pruned.dot", &abs.pruned.to_dot("pruned"))?;
            if args.emit_stages {
                write_stages(&out, &abs)?;
            }
            let det = is_deterministic(&abs.pruned);
            Ok(to_json(&json!({
                "ts": abs.pruned.to_document(),
                "report": abs.report.to_document(),
                "deterministic": det,
            })))
        }
        Command::Compile(args) => {
            let text = formula_text(&args.formula)?;
            let aut = match &args.map {
                Some(m) => pipeline::compile(&text, load_map(m)?.alphabet(), timings)?.1,
                None => to_buchi(&parse_ltl(&text)?),
            };
            write_automaton(&Output::new(args.out.as_ref())?, &aut)?;
            Ok(to_json(&aut.to_document()))
        }
        Command::Product(args) => {
            let abs = abstraction(&args.map, timings)?;
            let (_, aut) = pipeline::compile(&formula_text(&args.formula)?, abs.map.alphabet(), timings)?;
            let pa = crate::product::build_product(&abs.pruned, &aut)?;
            let out = Output::new(args.map.out.as_ref())?;
            if args.map.emit_stages {
                write_stages(&out, &abs)?;
                write_automaton(&out, &aut)?;
            }
            out.write("product.json", &to_json(&pa.to_document()))?;
            out.write("product.dot", &pa.to_dot("product"))?;
            Ok(to_json(&pa.to_document()))
        }
        Command::Plan(args) => {
            let abs = abstraction(&args.map, timings)?;
            let (_, aut) = pipeline::compile(&formula_text(&args.formula)?, abs.map.alphabet(), timings)?;
            let out = Output::new(args.map.out.as_ref())?;
            if args.map.emit_stages {
                write_stages(&out, &abs)?;
                write_automaton(&out, &aut)?;
            }
            let (pa, plan) = pipeline::plan(&abs, &aut, timings)?;
            if args.map.emit_stages {
                out.write("product.json", &to_json(&pa.to_document()))?;
                out.write("product.dot", &pa.to_dot("product"))?;
            }
            out.write("plan.json", &to_json(&plan.to_document()))?;
            Ok(to_json(&plan.to_document()))
        }
        Command::Run(args) => {
            let spec = &args.spec;
            let text = formula_text(&spec.formula)?;
            let abs = abstraction(&spec.map, timings)?;
            let (_, aut) = pipeline::compile(&text, abs.map.alphabet(), timings)?;
            let out = Output::new(spec.map.out.as_ref())?;
            if spec.map.emit_stages {
                write_stages(&out, &abs)?;
                write_automaton(&out, &aut)?;
            }
            let (pa, plan) = pipeline::plan(&abs, &aut, timings)?;
            if spec.map.emit_stages {
                out.write("product.json", &to_json(&pa.to_document()))?;
                out.write("product.dot", &pa.to_dot("product"))?;
            }
            let exec = pipeline::execute(&abs, &aut, &plan, args.cycles, timings)?;
            let trace_doc = exec.trace.to_document();
            out.write("plan.json", &to_json(&plan.to_document()))?;
            out.write("trace.json", &to_json(&trace_doc))?;
            out.write("path.txt", &render_ascii(&abs.map, &exec.trace))?;
            eprintln!(
                "{text} | satisfied: {} | unsafe: {} (forced {}, unforced {})",
                exec.satisfied, exec.unsafe_report.count, exec.unsafe_report.forced, exec.unsafe_report.unforced
            );
            Ok(to_json(&json!({
                "formula": text,
                "plan": plan.to_document(),
                "satisfied": exec.satisfied,
                "unsafe": exec.unsafe_report,
                "word": exec.trace.word.iter().map(fmt_label_set).collect::<Vec<_>>(),
                "trace": trace_doc,
            })))
        }
        Command::Check(args) => {
            let map = load_map(&args.map)?;
            let (_, aut) = pipeline::compile(&formula_text(&args.formula)?, map.alphabet(), timings)?;
            let doc: TraceDocument = serde_json::from_str(&read(&args.trace)?)
                .map_err(|e| PipelineError::Io(format!("{}: {e}", args.trace.display())))?;
            let trace = Trace::from_document(&map, &doc)?;
            Ok(to_json(&json!({
                "satisfied": check_trace(&trace, &aut),
                "unsafe": unsafe_symbols(&trace),
            })))
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut timings = Timings::default();
    let result = execute(&cli, &mut timings);
    for (stage, d) in &timings.0 {
        eprintln!("time {stage}: {:.3} ms", d.as_secs_f64() * 1e3);
    }
    match result {
        Ok(doc) => {
            print!("{doc}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
