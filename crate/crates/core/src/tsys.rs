//! Transition systems over regions, with transitions labeled by the task
//! policies that move the agent across them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{fmt_label_set, DistanceMatrix, LabelSet, RegionGraph, RegionId, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl From<RegionId> for StateId {
    fn from(r: RegionId) -> Self {
        StateId(r.0)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

impl FromStr for StateId {
    type Err = TsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('q')
            .and_then(|n| n.parse().ok())
            .map(StateId)
            .ok_or_else(|| TsError::Document(format!("bad state id {s:?}")))
    }
}

/// A task policy: a conjunction of primitive propositions. A primitive task
/// is the singleton conjunction.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Task(BTreeSet<Symbol>);

impl Task {
    pub fn new(symbols: BTreeSet<Symbol>) -> Option<Self> {
        (!symbols.is_empty()).then_some(Task(symbols))
    }

    pub fn primitive(symbol: Symbol) -> Self {
        Task(BTreeSet::from([symbol]))
    }

    pub fn symbols(&self) -> &BTreeSet<Symbol> {
        &self.0
    }

    /// A label produces this task when it contains every conjunct.
    pub fn satisfied_by(&self, label: &LabelSet) -> bool {
        self.0.is_subset(label)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(Symbol::name).collect();
        f.write_str(&names.join("&"))
    }
}

impl fmt::Debug for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Task {
    type Err = TsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s
            .split('&')
            .map(|p| Symbol::new(p.trim()))
            .collect::<Result<BTreeSet<_>, _>>()
            .map_err(|e| TsError::Document(e.to_string()))?;
        Task::new(symbols).ok_or_else(|| TsError::Document("empty task".into()))
    }
}

/// One element of a transition label: a task, or the empty-policy sentinel
/// contributed by unlabeled states.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelElem {
    Empty,
    Task(Task),
}

impl fmt::Display for LabelElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelElem::Empty => f.write_str("{}"),
            LabelElem::Task(t) => write!(f, "{t}"),
        }
    }
}

impl fmt::Debug for LabelElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for LabelElem {
    type Err = TsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "{}" {
            Ok(LabelElem::Empty)
        } else {
            s.parse().map(LabelElem::Task)
        }
    }
}

pub type TaskLabel = BTreeSet<LabelElem>;

pub fn fmt_task_label(label: &TaskLabel) -> String {
    let parts: Vec<String> = label.iter().map(ToString::to_string).collect();
    parts.join(",")
}

/// How region labels become task symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    /// Every proposition is its own task.
    Primitive,
    /// Every distinct non-empty region label is one conjunctive task.
    Composite,
}

impl TaskMode {
    /// Composite when some region carries more than one proposition.
    pub fn infer(regions: &RegionGraph) -> Self {
        if regions.regions.iter().any(|r| r.label.len() > 1) {
            TaskMode::Composite
        } else {
            TaskMode::Primitive
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub id: StateId,
    pub label: LabelSet,
    /// Tasks whose policies terminate in this state.
    pub tasks: BTreeSet<Task>,
    /// Regions represented by this state (more than one after merging).
    pub regions: Vec<RegionId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TsError {
    #[error("initial region {0} is not a region of the map")]
    UnknownInitial(RegionId),
    #[error("adjacency is not symmetric between {0} and {1}")]
    AsymmetricAdjacency(RegionId, RegionId),
    #[error("malformed transition system document: {0}")]
    Document(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub states: BTreeMap<StateId, State>,
    /// Keyed by (source, target); self-loops are never stored.
    pub transitions: BTreeMap<(StateId, StateId), TaskLabel>,
    pub initial: Option<StateId>,
    pub alphabet: BTreeSet<Symbol>,
    pub mode: TaskMode,
    /// The task catalog (the action set).
    pub tasks: BTreeSet<Task>,
}

impl TransitionSystem {
    pub fn state(&self, id: StateId) -> &State {
        &self.states[&id]
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = (StateId, &TaskLabel)> + '_ {
        self.transitions
            .range((s, StateId(0))..=(s, StateId(usize::MAX)))
            .map(|(&(_, t), l)| (t, l))
    }

    /// Dense index lists over the current transition graph, treated as
    /// undirected, plus the id of each dense index.
    pub fn undirected_adjacency(&self) -> (Vec<StateId>, Vec<Vec<usize>>) {
        let ids: Vec<StateId> = self.states.keys().copied().collect();
        let pos: BTreeMap<StateId, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut adj = vec![BTreeSet::new(); ids.len()];
        for &(a, b) in self.transitions.keys() {
            adj[pos[&a]].insert(pos[&b]);
            adj[pos[&b]].insert(pos[&a]);
        }
        (ids, adj.into_iter().map(|n| n.into_iter().collect()).collect())
    }

    /// State containing the given region.
    pub fn state_of_region(&self, region: RegionId) -> Option<StateId> {
        self.states
            .values()
            .find(|s| s.regions.contains(&region))
            .map(|s| s.id)
    }

    /// Removes states that cannot be reached from the initial state.
    pub fn drop_unreachable(&mut self) {
        let Some(init) = self.initial else {
            return;
        };
        let mut seen = BTreeSet::from([init]);
        let mut stack = vec![init];
        while let Some(s) = stack.pop() {
            let next: Vec<StateId> = self.outgoing(s).map(|(t, _)| t).collect();
            for t in next {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        self.states.retain(|id, _| seen.contains(id));
        self.transitions
            .retain(|(a, b), _| seen.contains(a) && seen.contains(b));
    }
}

fn tasks_of(label: &LabelSet, mode: TaskMode, catalog: &BTreeSet<Task>) -> BTreeSet<Task> {
    match mode {
        TaskMode::Primitive => label.iter().cloned().map(Task::primitive).collect(),
        TaskMode::Composite => catalog
            .iter()
            .filter(|t| t.satisfied_by(label))
            .cloned()
            .collect(),
    }
}

/// One state per region and one unlabeled transition per ordered adjacent pair.
pub fn build_initial_ts(
    regions: &RegionGraph,
    initial: RegionId,
    mode: TaskMode,
    alphabet: &BTreeSet<Symbol>,
) -> Result<TransitionSystem, TsError> {
    if initial.0 >= regions.len() {
        return Err(TsError::UnknownInitial(initial));
    }
    let catalog: BTreeSet<Task> = match mode {
        TaskMode::Primitive => alphabet.iter().cloned().map(Task::primitive).collect(),
        TaskMode::Composite => regions
            .regions
            .iter()
            .filter_map(|r| Task::new(r.label.clone()))
            .collect(),
    };
    let mut states = BTreeMap::new();
    for r in &regions.regions {
        states.insert(
            r.id.into(),
            State {
                id: r.id.into(),
                label: r.label.clone(),
                tasks: tasks_of(&r.label, mode, &catalog),
                regions: vec![r.id],
            },
        );
    }
    let mut transitions = BTreeMap::new();
    for (a, ns) in regions.adjacency.iter().enumerate() {
        for &b in ns {
            if !regions.adjacency[b.0].contains(&RegionId(a)) {
                return Err(TsError::AsymmetricAdjacency(RegionId(a), b));
            }
            transitions.insert((StateId(a), b.into()), TaskLabel::new());
        }
    }
    Ok(TransitionSystem {
        states,
        transitions,
        initial: Some(initial.into()),
        alphabet: alphabet.clone(),
        mode,
        tasks: catalog,
    })
}

/// Labels each transition with the tasks of every state it approaches: a state
/// `s` contributes to `start -> end` when `d(start, s) > d(end, s)`, with the
/// empty-policy sentinel standing in for an unlabeled `s`.
pub fn generate_ts_labels(ts: &TransitionSystem) -> TransitionSystem {
    let (ids, adj) = ts.undirected_adjacency();
    let dist = DistanceMatrix::new(&adj);
    let pos: BTreeMap<StateId, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut out = ts.clone();
    for (&(start, end), label) in out.transitions.iter_mut() {
        label.clear();
        let (si, ei) = (pos[&start], pos[&end]);
        for (k, s) in ids.iter().enumerate() {
            let (Some(d_start), Some(d_end)) = (dist.get(si, k), dist.get(ei, k)) else {
                continue;
            };
            if d_start > d_end {
                let state = &ts.states[s];
                if state.tasks.is_empty() {
                    label.insert(LabelElem::Empty);
                } else {
                    label.extend(state.tasks.iter().cloned().map(LabelElem::Task));
                }
            }
        }
    }
    out
}

/// A state with one label element on several outgoing transitions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub state: String,
    pub symbol: String,
    pub targets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Determinism {
    pub deterministic: bool,
    pub violations: Vec<Violation>,
}

/// Deterministic iff no state has two outgoing transitions sharing a label element.
pub fn is_deterministic(ts: &TransitionSystem) -> Determinism {
    let mut violations = Vec::new();
    for &s in ts.states.keys() {
        let mut by_elem: BTreeMap<&LabelElem, Vec<StateId>> = BTreeMap::new();
        for (t, label) in ts.outgoing(s) {
            for e in label {
                by_elem.entry(e).or_default().push(t);
            }
        }
        for (e, targets) in by_elem {
            if targets.len() > 1 {
                violations.push(Violation {
                    state: s.to_string(),
                    symbol: e.to_string(),
                    targets: targets.iter().map(ToString::to_string).collect(),
                });
            }
        }
    }
    Determinism {
        deterministic: violations.is_empty(),
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsDocument {
    pub states: Vec<StateDocument>,
    pub transitions: Vec<TransitionDocument>,
    pub initial: Option<String>,
    #[serde(default = "default_mode")]
    pub mode: TaskMode,
}

fn default_mode() -> TaskMode {
    TaskMode::Primitive
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDocument {
    pub id: String,
    pub label: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDocument {
    pub from: String,
    pub to: String,
    pub label: Vec<String>,
}

impl TransitionSystem {
    pub fn to_document(&self) -> TsDocument {
        TsDocument {
            states: self
                .states
                .values()
                .map(|s| StateDocument {
                    id: s.id.to_string(),
                    label: s.label.iter().map(|x| x.name().to_string()).collect(),
                    tasks: s.tasks.iter().map(ToString::to_string).collect(),
                    regions: if s.regions == [RegionId(s.id.0)] {
                        Vec::new()
                    } else {
                        s.regions.iter().map(ToString::to_string).collect()
                    },
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|(&(a, b), l)| TransitionDocument {
                    from: a.to_string(),
                    to: b.to_string(),
                    label: l.iter().map(ToString::to_string).collect(),
                })
                .collect(),
            initial: self.initial.map(|s| s.to_string()),
            mode: self.mode,
        }
    }

    pub fn from_document(doc: &TsDocument) -> Result<Self, TsError> {
        let sym = |n: &String| Symbol::new(n).map_err(|e| TsError::Document(e.to_string()));
        let mut states = BTreeMap::new();
        let mut alphabet = BTreeSet::new();
        let mut catalog = BTreeSet::new();
        for s in &doc.states {
            let id: StateId = s.id.parse()?;
            let label = s.label.iter().map(sym).collect::<Result<LabelSet, _>>()?;
            alphabet.extend(label.iter().cloned());
            let tasks = if s.tasks.is_empty() {
                match doc.mode {
                    TaskMode::Primitive => label.iter().cloned().map(Task::primitive).collect(),
                    TaskMode::Composite => Task::new(label.clone()).into_iter().collect(),
                }
            } else {
                s.tasks
                    .iter()
                    .map(|t| t.parse())
                    .collect::<Result<BTreeSet<Task>, _>>()?
            };
            catalog.extend(tasks.iter().cloned());
            let regions = if s.regions.is_empty() {
                vec![RegionId(id.0)]
            } else {
                s.regions
                    .iter()
                    .map(|r| r.parse::<StateId>().map(|x| RegionId(x.0)))
                    .collect::<Result<_, _>>()?
            };
            if states
                .insert(
                    id,
                    State {
                        id,
                        label,
                        tasks,
                        regions,
                    },
                )
                .is_some()
            {
                return Err(TsError::Document(format!("duplicate state {id}")));
            }
        }
        let mut transitions = BTreeMap::new();
        for t in &doc.transitions {
            let (a, b): (StateId, StateId) = (t.from.parse()?, t.to.parse()?);
            if !states.contains_key(&a) || !states.contains_key(&b) || a == b {
                return Err(TsError::Document(format!("bad transition {a} -> {b}")));
            }
            let label = t
                .label
                .iter()
                .map(|e| e.parse())
                .collect::<Result<TaskLabel, _>>()?;
            transitions.insert((a, b), label);
        }
        let initial = match &doc.initial {
            Some(i) => {
                let id: StateId = i.parse()?;
                if !states.contains_key(&id) {
                    return Err(TsError::Document(format!("unknown initial state {id}")));
                }
                Some(id)
            }
            None => None,
        };
        Ok(TransitionSystem {
            states,
            transitions,
            initial,
            alphabet,
            mode: doc.mode,
            tasks: catalog,
        })
    }

    /// DOT rendering: state label above each node, task label on each edge.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n  node [shape=circle];\n");
        if let Some(init) = self.initial {
            out.push_str(&format!(
                "  __start [shape=point];\n  __start -> {init};\n"
            ));
        }
        for s in self.states.values() {
            out.push_str(&format!(
                "  {} [xlabel=\"{}\"];\n",
                s.id,
                escape(&fmt_label_set(&s.label))
            ));
        }
        for (&(a, b), l) in &self.transitions {
            out.push_str(&format!(
                "  {a} -> {b} [label=\"{}\"];\n",
                escape(&fmt_task_label(l))
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
