//! Minimum-violation policies: an exact stand-in for trained task policies,
//! plan execution on the grid, and the unsafe-symbol metric.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{fmt_label_set, Cell, GridMap, LabelSet, Symbol};
use crate::ltl::{accepts_lasso, BuchiAutomaton};
use crate::product::Plan;
use crate::tsys::Task;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MvError {
    #[error("start cell {0} is an obstacle or outside the map")]
    BlockedStart(Cell),
    #[error("no cell satisfying {spec} is reachable from {start}")]
    Unreachable { spec: String, start: Cell },
    #[error("a plan with a cycle needs at least one repetition")]
    NoRepetitions,
    #[error("bad policy {0:?}")]
    BadPolicy(String),
    #[error("malformed trace: {0}")]
    BadTrace(String),
}

/// Target of a composed policy: a conjunction of primitive literals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolicySpec {
    pub positive: BTreeSet<Symbol>,
    pub negative: BTreeSet<Symbol>,
}

impl PolicySpec {
    pub fn new(positive: BTreeSet<Symbol>, negative: BTreeSet<Symbol>) -> Result<Self, MvError> {
        let spec = PolicySpec { positive, negative };
        if spec.positive.is_empty() {
            return Err(MvError::BadPolicy(format!("{spec} has no positive literal")));
        }
        Ok(spec)
    }

    pub fn satisfied_by(&self, label: &LabelSet) -> bool {
        self.positive.is_subset(label) && self.negative.is_disjoint(label)
    }
}

impl From<&Task> for PolicySpec {
    fn from(task: &Task) -> Self {
        PolicySpec {
            positive: task.symbols().clone(),
            negative: BTreeSet::new(),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.positive.iter().map(|s| s.name().to_string()).collect();
        parts.extend(self.negative.iter().map(|s| format!("!{s}")));
        f.write_str(&parts.join("&"))
    }
}

/// Parses `b&!square`.
impl FromStr for PolicySpec {
    type Err = MvError;

    fn from_str(s: &str) -> Result<Self, MvError> {
        let mut positive = BTreeSet::new();
        let mut negative = BTreeSet::new();
        for lit in s.split('&') {
            let lit = lit.trim();
            let (set, name) = match lit.strip_prefix('!') {
                Some(rest) => (&mut negative, rest.trim()),
                None => (&mut positive, lit),
            };
            set.insert(Symbol::new(name).map_err(|_| MvError::BadPolicy(s.to_string()))?);
        }
        PolicySpec::new(positive, negative)
    }
}

/// Does stepping from `from` into `to` enter a labeled region the policy does not want?
pub fn is_violation(map: &GridMap, spec: &PolicySpec, from: Cell, to: Cell) -> bool {
    let label = map.label(to);
    !label.is_empty() && label != map.label(from) && !spec.satisfied_by(label)
}

/// Number of violating region entries along a cell path.
pub fn count_violations(map: &GridMap, spec: &PolicySpec, path: &[Cell]) -> usize {
    path.windows(2)
        .filter(|w| is_violation(map, spec, w[0], w[1]))
        .count()
}

/// Path to the nearest satisfying cell minimizing (violations, steps). Ties
/// are broken by exploring moves in the order up, down, left, right.
pub fn mv_path(map: &GridMap, start: Cell, spec: &PolicySpec) -> Result<Vec<Cell>, MvError> {
    if !map.contains(start) || map.is_obstacle(start) {
        return Err(MvError::BlockedStart(start));
    }
    let w = map.width();
    let idx = |c: Cell| c.y * w + c.x;
    let n = w * map.height();
    let mut best: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    best[idx(start)] = Some((0, 0));
    heap.push(Reverse(((0usize, 0usize), seq, start.y, start.x)));
    while let Some(Reverse((cost, _, y, x))) = heap.pop() {
        let cell = Cell::new(x, y);
        if done[idx(cell)] {
            continue;
        }
        done[idx(cell)] = true;
        if spec.satisfied_by(map.label(cell)) {
            let mut path = vec![cell];
            let mut cur = cell;
            while let Some(p) = parent[idx(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(path);
        }
        for next in map.neighbors(cell) {
            if map.is_obstacle(next) || done[idx(next)] {
                continue;
            }
            let c = (cost.0 + usize::from(is_violation(map, spec, cell, next)), cost.1 + 1);
            if best[idx(next)].is_none_or(|b| c < b) {
                best[idx(next)] = Some(c);
                parent[idx(next)] = Some(cell);
                seq += 1;
                heap.push(Reverse((c, seq, next.y, next.x)));
            }
        }
    }
    Err(MvError::Unreachable {
        spec: spec.to_string(),
        start,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prefix,
    Cycle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub policy: PolicySpec,
    /// Index into `cells` of the segment's first cell.
    pub start_index: usize,
    /// Index into `word` of the region the segment starts in.
    pub word_index: usize,
    pub phase: Phase,
    /// Which cycle repetition this segment belongs to (0 in the prefix).
    pub repetition: usize,
    /// Fewest violations any path from the segment start can achieve.
    pub optimal_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsafeEntry {
    pub segment: usize,
    pub cell_index: usize,
    pub label: Vec<String>,
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnsafeReport {
    pub count: usize,
    pub forced: usize,
    pub unforced: usize,
    pub entries: Vec<UnsafeEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub cells: Vec<Cell>,
    /// Labels of the regions visited, one per region change, starting with
    /// the start region. Unlabeled regions contribute the empty set.
    pub word: Vec<LabelSet>,
    pub segments: Vec<Segment>,
    // label of every cell, kept so the metric needs no map
    cell_labels: Vec<LabelSet>,
}

impl Trace {
    fn new(map: &GridMap, start: Cell) -> Trace {
        Trace {
            cells: vec![start],
            word: vec![map.label(start).clone()],
            segments: Vec::new(),
            cell_labels: vec![map.label(start).clone()],
        }
    }

    fn extend(&mut self, map: &GridMap, path: &[Cell]) {
        for &c in &path[1..] {
            let label = map.label(c).clone();
            if label != *self.cell_labels.last().unwrap() {
                self.word.push(label.clone());
            }
            self.cells.push(c);
            self.cell_labels.push(label);
        }
    }

    pub fn has_cycle(&self) -> bool {
        self.segments.iter().any(|s| s.phase == Phase::Cycle)
    }

    /// Splits the word into a finite prefix and the period repeated forever:
    /// the last cycle repetition for plans with a cycle, the empty label otherwise.
    pub fn lasso(&self) -> (Vec<LabelSet>, Vec<LabelSet>) {
        let last_rep = self
            .segments
            .iter()
            .filter(|s| s.phase == Phase::Cycle)
            .map(|s| s.repetition)
            .max();
        if let Some(rep) = last_rep {
            let first = self
                .segments
                .iter()
                .find(|s| s.phase == Phase::Cycle && s.repetition == rep)
                .unwrap();
            let split = first.word_index + 1;
            if split < self.word.len() {
                return (self.word[..split].to_vec(), self.word[split..].to_vec());
            }
        }
        (self.word.clone(), vec![LabelSet::new()])
    }

    /// Rebuilds a trace from its document, taking cell labels from `map`.
    pub fn from_document(map: &GridMap, doc: &TraceDocument) -> Result<Trace, MvError> {
        let bad = |m: String| MvError::BadTrace(m);
        let Some(&start) = doc.cells.first() else {
            return Err(bad("no cells".into()));
        };
        for &c in &doc.cells {
            if !map.contains(c) || map.is_obstacle(c) {
                return Err(bad(format!("cell {c} is blocked or outside the map")));
            }
        }
        for w in doc.cells.windows(2) {
            if w[0].x.abs_diff(w[1].x) + w[0].y.abs_diff(w[1].y) != 1 {
                return Err(bad(format!("cells {} and {} are not adjacent", w[0], w[1])));
            }
        }
        let mut trace = Trace::new(map, start);
        trace.extend(map, &doc.cells);
        for s in &doc.segments {
            if s.start_index >= trace.cells.len() || s.word_index >= trace.word.len() {
                return Err(bad(format!("segment {} starts outside the trace", s.policy)));
            }
            trace.segments.push(Segment {
                policy: s.policy.parse()?,
                start_index: s.start_index,
                word_index: s.word_index,
                phase: s.phase,
                repetition: s.repetition,
                optimal_violations: s.optimal_violations,
            });
        }
        Ok(trace)
    }

    pub fn to_document(&self) -> TraceDocument {
        TraceDocument {
            cells: self.cells.clone(),
            word: self
                .word
                .iter()
                .map(|l| l.iter().map(|s| s.name().to_string()).collect())
                .collect(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentDocument {
                    policy: s.policy.to_string(),
                    start_index: s.start_index,
                    word_index: s.word_index,
                    phase: s.phase,
                    repetition: s.repetition,
                    optimal_violations: s.optimal_violations,
                })
                .collect(),
            unsafe_symbols: unsafe_symbols(self),
        }
    }
}

/// Runs each prefix policy to completion, then the cycle `cycles` times.
pub fn execute_plan(map: &GridMap, start: Cell, plan: &Plan, cycles: usize) -> Result<Trace, MvError> {
    if !plan.cycle.is_empty() && cycles < 1 {
        return Err(MvError::NoRepetitions);
    }
    if !map.contains(start) || map.is_obstacle(start) {
        return Err(MvError::BlockedStart(start));
    }
    let mut trace = Trace::new(map, start);
    let reps = if plan.cycle.is_empty() { 0 } else { cycles };
    let steps = plan
        .prefix
        .iter()
        .map(|t| (t, Phase::Prefix, 0))
        .chain((0..reps).flat_map(|r| plan.cycle.iter().map(move |t| (t, Phase::Cycle, r))));
    for (task, phase, repetition) in steps {
        let spec = PolicySpec::from(task);
        let here = *trace.cells.last().unwrap();
        let path = mv_path(map, here, &spec)?;
        trace.segments.push(Segment {
            policy: spec.clone(),
            start_index: trace.cells.len() - 1,
            word_index: trace.word.len() - 1,
            phase,
            repetition,
            optimal_violations: count_violations(map, &spec, &path),
        });
        trace.extend(map, &path);
    }
    Ok(trace)
}

/// Region entries whose label the active policy does not target. Segment end
/// cells are exempt. The first `optimal_violations` entries of a segment are
/// reported as forced.
pub fn unsafe_symbols(trace: &Trace) -> UnsafeReport {
    let mut entries = Vec::new();
    for (k, seg) in trace.segments.iter().enumerate() {
        let end = trace
            .segments
            .get(k + 1)
            .map_or(trace.cells.len() - 1, |s| s.start_index);
        let mut seen = 0;
        for i in seg.start_index + 1..end {
            let label = &trace.cell_labels[i];
            if label.is_empty() || *label == trace.cell_labels[i - 1] || seg.policy.satisfied_by(label) {
                continue;
            }
            entries.push(UnsafeEntry {
                segment: k,
                cell_index: i,
                label: label.iter().map(|s| s.name().to_string()).collect(),
                forced: seen < seg.optimal_violations,
            });
            seen += 1;
        }
    }
    let forced = entries.iter().filter(|e| e.forced).count();
    UnsafeReport {
        count: entries.len(),
        forced,
        unforced: entries.len() - forced,
        entries,
    }
}

/// Does the executed word satisfy the automaton? Finite runs are extended
/// with the empty label forever; runs with a cycle repeat the last executed
/// repetition.
pub fn check_trace(trace: &Trace, aut: &BuchiAutomaton) -> bool {
    let (prefix, period) = trace.lasso();
    accepts_lasso(aut, &prefix, &period).unwrap_or(false)
}

/// Draws the path over the map: `S` start, `E` end, `*` visited, `#` obstacle,
/// and the first character of each label elsewhere.
pub fn render_ascii(map: &GridMap, trace: &Trace) -> String {
    let visited: BTreeMap<Cell, char> = trace
        .cells
        .iter()
        .map(|&c| (c, '*'))
        .chain([(trace.cells[0], 'S'), (*trace.cells.last().unwrap(), 'E')])
        .collect();
    let mut out = String::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            let c = Cell::new(x, y);
            let ch = if let Some(&v) = visited.get(&c) {
                v
            } else if map.is_obstacle(c) {
                '#'
            } else {
                map.label(c)
                    .iter()
                    .next()
                    .and_then(|s| s.name().chars().next())
                    .unwrap_or('.')
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDocument {
    pub policy: String,
    pub start_index: usize,
    pub word_index: usize,
    pub phase: Phase,
    pub repetition: usize,
    pub optimal_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub cells: Vec<Cell>,
    pub word: Vec<Vec<String>>,
    pub segments: Vec<SegmentDocument>,
    #[serde(rename = "unsafe")]
    pub unsafe_symbols: UnsafeReport,
}

/// Label sets formatted like `{a,c}`, for reports.
pub fn fmt_word(word: &[LabelSet]) -> String {
    let parts: Vec<String> = word.iter().map(fmt_label_set).collect();
    parts.join(" ")
}
