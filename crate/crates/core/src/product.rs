//! Product of a pruned transition system with a Büchi automaton, and the
//! shortest accepting plan over it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::LabelSet;
use crate::ltl::BuchiAutomaton;
use crate::tsys::{escape, is_deterministic, LabelElem, StateId, Task, TransitionSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProductError {
    #[error("automaton atoms missing from the transition system alphabet: {}", .0.join(", "))]
    AlphabetMismatch(Vec<String>),
    #[error("transition system has no initial state")]
    NoInitial,
    #[error("transition system is not deterministic ({0} violations); prune it first")]
    Nondeterministic(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductState {
    pub ts: StateId,
    pub buchi: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductEdge {
    pub from: usize,
    pub to: usize,
    pub task: Task,
    /// The target state produces the task, so its policy terminates there.
    pub completes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductAutomaton {
    states: Vec<ProductState>,
    initial: Vec<usize>,
    accepting: BTreeSet<usize>,
    // states whose automaton component accepts the empty word forever
    terminal: BTreeSet<usize>,
    // sorted by source, then in construction order
    edges: Vec<ProductEdge>,
}

impl ProductAutomaton {
    /// Assembles a product from explicit parts. `terminal` marks states where a
    /// finite plan may stop.
    pub fn from_parts(
        states: Vec<ProductState>,
        initial: Vec<usize>,
        accepting: BTreeSet<usize>,
        terminal: BTreeSet<usize>,
        mut edges: Vec<ProductEdge>,
    ) -> ProductAutomaton {
        let n = states.len();
        assert!(initial.iter().all(|&i| i < n), "initial state out of range");
        assert!(edges.iter().all(|e| e.from < n && e.to < n), "edge endpoint out of range");
        edges.sort_by_key(|e| e.from);
        ProductAutomaton {
            states,
            initial,
            accepting,
            terminal,
            edges,
        }
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn terminal(&self) -> &BTreeSet<usize> {
        &self.terminal
    }

    pub fn edges(&self) -> &[ProductEdge] {
        &self.edges
    }

    pub fn outgoing(&self, p: usize) -> impl Iterator<Item = &ProductEdge> {
        let start = self.edges.partition_point(|e| e.from < p);
        self.edges[start..].iter().take_while(move |e| e.from == p)
    }

    pub fn index_of(&self, state: ProductState) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }

    pub fn to_document(&self) -> ProductDocument {
        ProductDocument {
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, s)| ProductStateDocument {
                    id,
                    ts: s.ts.to_string(),
                    buchi: s.buchi,
                })
                .collect(),
            initial: self.initial.clone(),
            accepting: self.accepting.iter().copied().collect(),
            terminal: self.terminal.iter().copied().collect(),
            transitions: self
                .edges
                .iter()
                .map(|e| ProductEdgeDocument {
                    from: e.from,
                    to: e.to,
                    policy: e.task.to_string(),
                    completes: e.completes,
                })
                .collect(),
        }
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
        out.push_str("  rankdir=LR;\n");
        for (i, s) in self.states.iter().enumerate() {
            let shape = if self.accepting.contains(&i) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  p{i} [shape={shape}, label=\"({}, b{})\"];", s.ts, s.buchi);
        }
        for (k, &i) in self.initial.iter().enumerate() {
            let _ = writeln!(out, "  __start{k} [shape=point];\n  __start{k} -> p{i};");
        }
        for e in &self.edges {
            let style = if e.completes { "" } else { ", style=dashed" };
            let _ = writeln!(
                out,
                "  p{} -> p{} [label=\"{}\"{style}];",
                e.from,
                e.to,
                escape(&e.task.to_string())
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Synchronizes TS moves with automaton moves that read the target state's label.
pub fn build_product(ts: &TransitionSystem, aut: &BuchiAutomaton) -> Result<ProductAutomaton, ProductError> {
    let missing: Vec<String> = aut
        .atoms()
        .difference(&ts.alphabet)
        .map(|s| s.name().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ProductError::AlphabetMismatch(missing));
    }
    let det = is_deterministic(ts);
    if !det.deterministic {
        return Err(ProductError::Nondeterministic(det.violations.len()));
    }
    let init = ts.initial.ok_or(ProductError::NoInitial)?;

    let mut index: BTreeMap<ProductState, usize> = BTreeMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |s: ProductState, states: &mut Vec<ProductState>, queue: &mut VecDeque<usize>| {
        *index.entry(s).or_insert_with(|| {
            states.push(s);
            queue.push_back(states.len() - 1);
            states.len() - 1
        })
    };

    let init_label = &ts.state(init).label;
    let mut initial = Vec::new();
    for q in aut.step(aut.initial(), init_label).collect::<BTreeSet<_>>() {
        let i = intern(ProductState { ts: init, buchi: q }, &mut states, &mut queue);
        initial.push(i);
    }

    let mut edges = Vec::new();
    while let Some(p) = queue.pop_front() {
        let ProductState { ts: s, buchi: q } = states[p];
        for (t, label) in ts.outgoing(s) {
            let target_label = &ts.state(t).label;
            let next: BTreeSet<usize> = aut.step(q, target_label).collect();
            for elem in label {
                let LabelElem::Task(task) = elem else { continue };
                for &q2 in &next {
                    let to = intern(ProductState { ts: t, buchi: q2 }, &mut states, &mut queue);
                    edges.push(ProductEdge {
                        from: p,
                        to,
                        task: task.clone(),
                        completes: task.satisfied_by(target_label),
                    });
                }
            }
        }
    }

    let empty = LabelSet::new();
    let terminal_buchi: BTreeSet<usize> = (0..aut.num_states())
        .filter(|&q| aut.accepts_lasso_from(q, &[], std::slice::from_ref(&empty)) == Ok(true))
        .collect();
    let accepting = (0..states.len())
        .filter(|&i| aut.is_accepting(states[i].buchi))
        .collect();
    let terminal = (0..states.len())
        .filter(|&i| terminal_buchi.contains(&states[i].buchi))
        .collect();
    Ok(ProductAutomaton::from_parts(states, initial, accepting, terminal, edges))
}

/// A policy sequence: `prefix` then `cycle` repeated forever. An empty cycle
/// means the plan is finite and the agent stays put afterwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub prefix: Vec<Task>,
    pub cycle: Vec<Task>,
    /// Visited product states: the start, then one per policy step.
    pub pa_path: Vec<ProductState>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_document(&self) -> PlanDocument {
        PlanDocument {
            prefix: self.prefix.iter().map(ToString::to_string).collect(),
            cycle: self.cycle.iter().map(ToString::to_string).collect(),
            pa_path: self
                .pa_path
                .iter()
                .map(|s| PlanStepDocument {
                    ts: s.ts.to_string(),
                    buchi: s.buchi,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &PlanDocument) -> Result<Plan, crate::tsys::TsError> {
        let tasks = |v: &[String]| v.iter().map(|t| t.parse()).collect::<Result<Vec<Task>, _>>();
        Ok(Plan {
            prefix: tasks(&doc.prefix)?,
            cycle: tasks(&doc.cycle)?,
            pa_path: doc
                .pa_path
                .iter()
                .map(|s| Ok(ProductState { ts: s.ts.parse()?, buchi: s.buchi }))
                .collect::<Result<_, crate::tsys::TsError>>()?,
        })
    }
}

// Search graph over (product state, unfinished policy). A policy that has not
// reached a producing state keeps running, so the next step must reuse it.
struct PolicyGraph<'a> {
    pa: &'a ProductAutomaton,
    nodes: Vec<(usize, Option<Task>)>,
    succ: Vec<Vec<(Task, usize)>>,
    pred: Vec<Vec<usize>>,
    initial: Vec<usize>,
    index: BTreeMap<(usize, Option<Task>), usize>,
}

impl<'a> PolicyGraph<'a> {
    fn new(pa: &'a ProductAutomaton) -> Self {
        let mut g = PolicyGraph {
            pa,
            nodes: Vec::new(),
            succ: Vec::new(),
            pred: Vec::new(),
            initial: Vec::new(),
            index: BTreeMap::new(),
        };
        let mut index: BTreeMap<(usize, Option<Task>), usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        let mut intern = |key: (usize, Option<Task>), g: &mut PolicyGraph, queue: &mut VecDeque<usize>| {
            *index.entry(key.clone()).or_insert_with(|| {
                g.nodes.push(key);
                g.succ.push(Vec::new());
                g.pred.push(Vec::new());
                queue.push_back(g.nodes.len() - 1);
                g.nodes.len() - 1
            })
        };
        for &p in pa.initial() {
            let n = intern((p, None), &mut g, &mut queue);
            g.initial.push(n);
        }
        while let Some(n) = queue.pop_front() {
            let (p, pending) = g.nodes[n].clone();
            for e in pa.outgoing(p) {
                if pending.as_ref().is_some_and(|t| *t != e.task) {
                    continue;
                }
                let carry = (!e.completes).then(|| e.task.clone());
                let m = intern((e.to, carry), &mut g, &mut queue);
                g.succ[n].push((e.task.clone(), m));
                g.pred[m].push(n);
            }
        }
        g.index = index;
        g
    }

    fn state(&self, n: usize) -> ProductState {
        self.pa.states()[self.nodes[n].0]
    }

    fn step_key(&self, n: usize, task: Option<&Task>) -> StepKey {
        let s = self.state(n);
        (s.ts, s.buchi, task.map(ToString::to_string).unwrap_or_default())
    }

    fn bfs(&self, sources: &[usize], backward: bool) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap() + 1;
            let next: Vec<usize> = if backward {
                self.pred[u].clone()
            } else {
                self.succ[u].iter().map(|&(_, m)| m).collect()
            };
            for v in next {
                if dist[v].is_none() {
                    dist[v] = Some(d);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    fn closing_nodes(&self, p: usize, task: &Task) -> Vec<usize> {
        [None, Some(task.clone())]
            .into_iter()
            .filter_map(|pending| self.index.get(&(p, pending)).copied())
            .collect()
    }

    // Lexicographically least walk of exactly `len` steps from `from` whose
    // remaining distance to the target (per `to_target`) shrinks every step.
    fn greedy(&self, from: usize, len: usize, to_target: &[Option<usize>], out: &mut Walk) {
        let mut cur = from;
        for remaining in (0..len).rev() {
            let (task, next) = self.succ[cur]
                .iter()
                .filter(|&&(_, m)| to_target[m] == Some(remaining))
                .min_by(|a, b| self.step_key(a.1, Some(&a.0)).cmp(&self.step_key(b.1, Some(&b.0))))
                .expect("a successor on a shortest path exists");
            out.keys.push(self.step_key(*next, Some(task)));
            out.tasks.push(task.clone());
            out.nodes.push(*next);
            cur = *next;
        }
    }

    fn walk_to(&self, target: usize, len: usize, to_target: &[Option<usize>]) -> Walk {
        let start = *self
            .initial
            .iter()
            .filter(|&&i| to_target[i] == Some(len))
            .min_by_key(|&&i| self.step_key(i, None))
            .expect("an initial node at the prefix distance exists");
        let mut walk = Walk {
            keys: vec![self.step_key(start, None)],
            tasks: Vec::new(),
            nodes: vec![start],
        };
        self.greedy(start, len, to_target, &mut walk);
        debug_assert_eq!(*walk.nodes.last().unwrap(), target);
        walk
    }
}

type StepKey = (StateId, usize, String);

struct Walk {
    keys: Vec<StepKey>,
    tasks: Vec<Task>,
    nodes: Vec<usize>,
}

struct Candidate {
    lasso: bool,
    walk: Walk,
    prefix_len: usize,
}

impl Candidate {
    fn cmp_key(&self) -> (bool, &Vec<StepKey>, usize) {
        (self.lasso, &self.walk.keys, self.prefix_len)
    }
}

/// Shortest accepting plan by number of policy steps, or `None` when the
/// specification cannot be met. A finite plan may stop where the automaton
/// accepts the empty label forever; otherwise the plan ends in a cycle through
/// an accepting state. Equal-length finite plans win over lassos, and remaining
/// ties go to the lexicographically least sequence of (TS state, automaton
/// state, policy name) steps.
pub fn find_plan(pa: &ProductAutomaton) -> Option<Plan> {
    let g = PolicyGraph::new(pa);
    let dist = g.bfs(&g.initial, false);

    let mut best: Option<usize> = None;
    let mut finite = Vec::new();
    let mut lassos = Vec::new();
    // distance to the nodes that close a cycle at product state p whose first
    // step runs task t: p with no unfinished policy, or with t still running
    let mut closing: BTreeMap<(usize, Task), Vec<Option<usize>>> = BTreeMap::new();
    for n in 0..g.nodes.len() {
        let Some(d) = dist[n] else { continue };
        let (p, pending) = &g.nodes[n];
        if pending.is_none() && pa.terminal().contains(p) {
            finite.push((n, d));
            best = Some(best.map_or(d, |b| b.min(d)));
        }
        if pa.accepting().contains(p) {
            for (t, m) in &g.succ[n] {
                let back = closing
                    .entry((*p, t.clone()))
                    .or_insert_with(|| g.bfs(&g.closing_nodes(*p, t), true));
                if let Some(r) = back[*m] {
                    lassos.push((n, d, t.clone(), *m, r + 1));
                    best = Some(best.map_or(d + r + 1, |b| b.min(d + r + 1)));
                }
            }
        }
    }
    let best = best?;

    let mut chosen: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        let better = match &chosen {
            None => true,
            Some(cur) => c.cmp_key().cmp(&cur.cmp_key()) == Ordering::Less,
        };
        if better {
            chosen = Some(c);
        }
    };
    for (n, d) in finite {
        if d == best {
            let back = g.bfs(&[n], true);
            let walk = g.walk_to(n, d, &back);
            consider(Candidate {
                lasso: false,
                walk,
                prefix_len: d,
            });
        }
    }
    for (n, d, t, m, c) in lassos {
        if d + c == best {
            let back = g.bfs(&[n], true);
            let mut walk = g.walk_to(n, d, &back);
            walk.keys.push(g.step_key(m, Some(&t)));
            walk.tasks.push(t.clone());
            walk.nodes.push(m);
            g.greedy(m, c - 1, &closing[&(g.nodes[n].0, t)], &mut walk);
            consider(Candidate {
                lasso: true,
                walk,
                prefix_len: d,
            });
        }
    }

    let c = chosen.expect("a candidate of minimal length exists");
    let (prefix, cycle) = c.walk.tasks.split_at(c.prefix_len);
    Some(Plan {
        prefix: prefix.to_vec(),
        cycle: cycle.to_vec(),
        pa_path: c.walk.nodes.iter().map(|&n| g.state(n)).collect(),
    })
}

/// The infinite word of TS-state labels a plan produces, as prefix and period.
/// A finite plan's period is the empty label.
pub fn plan_word(ts: &TransitionSystem, plan: &Plan) -> (Vec<LabelSet>, Vec<LabelSet>) {
    let labels: Vec<LabelSet> = plan
        .pa_path
        .iter()
        .map(|s| ts.state(s.ts).label.clone())
        .collect();
    if plan.cycle.is_empty() {
        (labels, vec![LabelSet::new()])
    } else {
        let split = plan.prefix.len() + 1;
        (labels[..split].to_vec(), labels[split..].to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductStateDocument {
    pub id: usize,
    pub ts: String,
    pub buchi: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductEdgeDocument {
    pub from: usize,
    pub to: usize,
    pub policy: String,
    pub completes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductDocument {
    pub states: Vec<ProductStateDocument>,
    pub initial: Vec<usize>,
    pub accepting: Vec<usize>,
    pub terminal: Vec<usize>,
    pub transitions: Vec<ProductEdgeDocument>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStepDocument {
    pub ts: String,
    pub buchi: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub prefix: Vec<String>,
    pub cycle: Vec<String>,
    pub pa_path: Vec<PlanStepDocument>,
}
