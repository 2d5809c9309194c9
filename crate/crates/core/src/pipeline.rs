//! End-to-end wiring: map to pruned TS, formula to automaton, plan, execution.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::gridworld::{extract_regions, parse_map, Cell, GridMap, MapError, RegionGraph};
use crate::ltl::{parse_ltl_with_alphabet, to_buchi, BuchiAutomaton, Formula, LtlError};
use crate::mvpolicy::{check_trace, execute_plan, unsafe_symbols, MvError, Trace, UnsafeReport};
use crate::product::{build_product, find_plan, Plan, ProductAutomaton, ProductError};
use crate::pruner::{prune, prune_stages, PruneReport};
use crate::tsys::{build_initial_ts, generate_ts_labels, TaskMode, TransitionSystem, TsError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("formula: {0}")]
    Ltl(#[from] LtlError),
    #[error("transition system: {0}")]
    Ts(#[from] TsError),
    #[error("product: {0}")]
    Product(#[from] ProductError),
    #[error("specification is infeasible on this map")]
    Infeasible,
    #[error("execution: {0}")]
    Mv(#[from] MvError),
    #[error("start cell {0} is an obstacle or outside the map")]
    BadStart(Cell),
    #[error("{0}")]
    Io(String),
}

impl PipelineError {
    /// Process exit code: 2 parse, 3 infeasible, 4 unreachable, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Map(_) | PipelineError::Ltl(_) | PipelineError::Ts(_) => 2,
            PipelineError::Infeasible | PipelineError::Product(ProductError::AlphabetMismatch(_)) => 3,
            PipelineError::Mv(MvError::Unreachable { .. }) => 4,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Task mode; inferred from the map when absent.
    pub mode: Option<TaskMode>,
    /// Start cell; the map's declared start or first free cell when absent.
    pub start: Option<Cell>,
    pub drop_unreachable: bool,
}

/// Wall-clock time per named stage.
#[derive(Clone, Debug, Default)]
pub struct Timings(pub Vec<(&'static str, Duration)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.push((stage, t.elapsed()));
        out
    }
}

#[derive(Clone, Debug)]
pub struct Abstraction {
    pub map: GridMap,
    pub regions: RegionGraph,
    /// None when the map has no free cell.
    pub start: Option<Cell>,
    pub unpruned: TransitionSystem,
    /// After case 1, case 2, case 3 and cleanup.
    pub stages: [TransitionSystem; 4],
    pub pruned: TransitionSystem,
    pub report: PruneReport,
}

pub fn load_map(text: &str) -> Result<GridMap, PipelineError> {
    Ok(parse_map(text)?)
}

/// Regions, the labeled TS and its pruned form.
pub fn abstract_map(map: &GridMap, opts: &Options, timings: &mut Timings) -> Result<Abstraction, PipelineError> {
    let regions = timings.time("regions", || extract_regions(map));
    let start = match opts.start {
        Some(c) if !map.contains(c) || map.is_obstacle(c) => return Err(PipelineError::BadStart(c)),
        Some(c) => Some(c),
        None => map.default_start(),
    };
    let mode = opts.mode.unwrap_or_else(|| TaskMode::infer(&regions));
    let unpruned = timings.time("abstract", || -> Result<_, PipelineError> {
        let Some(start) = start else {
            return Ok(TransitionSystem {
                states: Default::default(),
                transitions: Default::default(),
                initial: None,
                alphabet: map.alphabet().clone(),
                mode,
                tasks: BTreeSet::new(),
            });
        };
        let initial = regions.region_of(start).expect("free cells belong to regions");
        let mut ts = build_initial_ts(&regions, initial, mode, map.alphabet())?;
        if opts.drop_unreachable {
            ts.drop_unreachable();
        }
        Ok(generate_ts_labels(&ts))
    })?;
    let stages = timings.time("prune", || prune_stages(&unpruned));
    let (pruned, report) = prune(&unpruned);
    debug_assert_eq!(pruned, stages[3]);
    Ok(Abstraction {
        map: map.clone(),
        regions,
        start,
        unpruned,
        stages,
        pruned,
        report,
    })
}

/// Parses against the map alphabet and translates to an automaton.
pub fn compile(text: &str, alphabet: &BTreeSet<crate::gridworld::Symbol>, timings: &mut Timings) -> Result<(Formula, BuchiAutomaton), PipelineError> {
    let formula = timings.time("parse", || parse_ltl_with_alphabet(text, alphabet))?;
    let aut = timings.time("compile", || to_buchi(&formula));
    Ok((formula, aut))
}

pub fn plan(abs: &Abstraction, aut: &BuchiAutomaton, timings: &mut Timings) -> Result<(ProductAutomaton, Plan), PipelineError> {
    let pa = timings.time("product", || build_product(&abs.pruned, aut))?;
    let plan = timings.time("plan", || find_plan(&pa)).ok_or(PipelineError::Infeasible)?;
    Ok((pa, plan))
}

#[derive(Clone, Debug)]
pub struct Execution {
    pub trace: Trace,
    pub satisfied: bool,
    pub unsafe_report: UnsafeReport,
}

pub fn execute(abs: &Abstraction, aut: &BuchiAutomaton, plan: &Plan, cycles: usize, timings: &mut Timings) -> Result<Execution, PipelineError> {
    let start = abs.start.ok_or(PipelineError::Infeasible)?;
    let trace = timings.time("execute", || execute_plan(&abs.map, start, plan, cycles))?;
    let satisfied = timings.time("check", || check_trace(&trace, aut));
    let unsafe_report = unsafe_symbols(&trace);
    Ok(Execution {
        trace,
        satisfied,
        unsafe_report,
    })
}
