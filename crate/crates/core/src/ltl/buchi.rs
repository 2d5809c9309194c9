//! Tableau (GPVW) translation to a generalized Büchi automaton, counter
//! degeneralization, trimming and a bisimulation quotient.
//!
//! The automaton reads a letter on every edge: an edge `p -> q` with guard `g`
//! consumes one letter satisfying `g`. An infinite word is accepted when some run
//! from the initial state visits an accepting state infinitely often.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::guard::{Conjunction, Guard};
use super::{Formula, Letter, LtlError};
use crate::gridworld::Symbol;
use crate::tsys::escape;

/// Negation-normal-form formulas with release, used only by the tableau.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Nf {
    True,
    False,
    Lit(Symbol, bool),
    And(Box<Nf>, Box<Nf>),
    Or(Box<Nf>, Box<Nf>),
    Until(Box<Nf>, Box<Nf>),
    Release(Box<Nf>, Box<Nf>),
}

impl Nf {
    fn from_formula(f: &Formula) -> Nf {
        let b = |f: &Formula| Box::new(Nf::from_formula(f));
        match f {
            Formula::True => Nf::True,
            Formula::Atom(s) => Nf::Lit(s.clone(), true),
            Formula::NegAtom(s) => Nf::Lit(s.clone(), false),
            Formula::And(x, y) => Nf::And(b(x), b(y)),
            Formula::Or(x, y) => Nf::Or(b(x), b(y)),
            Formula::Until(x, y) => Nf::Until(b(x), b(y)),
            Formula::Eventually(x) => Nf::Until(Box::new(Nf::True), b(x)),
            Formula::Always(x) => Nf::Release(Box::new(Nf::False), b(x)),
        }
    }

    fn untils(&self, out: &mut BTreeSet<Nf>) {
        match self {
            Nf::True | Nf::False | Nf::Lit(..) => {}
            Nf::And(a, b) | Nf::Or(a, b) | Nf::Release(a, b) => {
                a.untils(out);
                b.untils(out);
            }
            Nf::Until(a, b) => {
                out.insert(self.clone());
                a.untils(out);
                b.untils(out);
            }
        }
    }
}

const INIT: usize = usize::MAX;

struct TableauNode {
    incoming: BTreeSet<usize>,
    old: BTreeSet<Nf>,
    next: BTreeSet<Nf>,
}

struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Nf>,
    old: BTreeSet<Nf>,
    next: BTreeSet<Nf>,
}

fn expand(start: Pending, nodes: &mut Vec<TableauNode>) {
    let mut stack = vec![start];
    while let Some(mut node) = stack.pop() {
        let Some(eta) = node.new.pop_first() else {
            if let Some(existing) = nodes
                .iter_mut()
                .find(|n| n.old == node.old && n.next == node.next)
            {
                existing.incoming.extend(node.incoming);
                continue;
            }
            let id = nodes.len();
            let next = node.next.clone();
            nodes.push(TableauNode {
                incoming: node.incoming,
                old: node.old,
                next: node.next,
            });
            stack.push(Pending {
                incoming: [id].into(),
                new: next,
                old: BTreeSet::new(),
                next: BTreeSet::new(),
            });
            continue;
        };
        if node.old.contains(&eta) {
            stack.push(node);
            continue;
        }
        let add_new = |node: &mut Pending, fs: Vec<&Nf>| {
            for f in fs {
                if !node.old.contains(f) {
                    node.new.insert(f.clone());
                }
            }
        };
        match &eta {
            Nf::False => {}
            Nf::Lit(s, pos) if node.old.contains(&Nf::Lit(s.clone(), !pos)) => {}
            Nf::True | Nf::Lit(..) => {
                node.old.insert(eta);
                stack.push(node);
            }
            Nf::And(a, b) => {
                add_new(&mut node, vec![a, b]);
                node.old.insert(eta);
                stack.push(node);
            }
            Nf::Or(a, b) | Nf::Until(a, b) | Nf::Release(a, b) => {
                let mut first = Pending {
                    incoming: node.incoming.clone(),
                    new: node.new.clone(),
                    old: node.old.clone(),
                    next: node.next.clone(),
                };
                let mut second = node;
                match &eta {
                    Nf::Or(..) => {
                        add_new(&mut first, vec![a]);
                        add_new(&mut second, vec![b]);
                    }
                    Nf::Until(..) => {
                        add_new(&mut first, vec![a]);
                        first.next.insert(eta.clone());
                        add_new(&mut second, vec![b]);
                    }
                    _ => {
                        add_new(&mut first, vec![b]);
                        first.next.insert(eta.clone());
                        add_new(&mut second, vec![a, b]);
                    }
                }
                first.old.insert(eta.clone());
                second.old.insert(eta);
                // second is explored after first
                stack.push(second);
                stack.push(first);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuchiEdge {
    pub from: usize,
    pub to: usize,
    pub guard: Guard,
}

/// A Büchi automaton with guard-labeled edges. States are `0..num_states`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuchiAutomaton {
    num_states: usize,
    initial: usize,
    accepting: BTreeSet<usize>,
    // sorted by (from, to); at most one edge per pair
    edges: Vec<BuchiEdge>,
    atoms: BTreeSet<Symbol>,
}

impl BuchiAutomaton {
    /// Builds an automaton from explicit parts. Parallel edges are merged by
    /// disjunction and `false` edges dropped.
    pub fn new(
        num_states: usize,
        initial: usize,
        accepting: BTreeSet<usize>,
        edges: impl IntoIterator<Item = BuchiEdge>,
    ) -> BuchiAutomaton {
        assert!(initial < num_states, "initial state out of range");
        let mut merged: BTreeMap<(usize, usize), Guard> = BTreeMap::new();
        for e in edges {
            assert!(e.from < num_states && e.to < num_states, "edge endpoint out of range");
            let g = merged.entry((e.from, e.to)).or_insert_with(Guard::ff);
            *g = g.or(&e.guard);
        }
        let edges: Vec<BuchiEdge> = merged
            .into_iter()
            .filter(|(_, g)| !g.is_false())
            .map(|((from, to), guard)| BuchiEdge { from, to, guard })
            .collect();
        let atoms = edges.iter().flat_map(|e| e.guard.atoms()).collect();
        BuchiAutomaton {
            num_states,
            initial,
            accepting: accepting.into_iter().filter(|&q| q < num_states).collect(),
            edges,
            atoms,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(&q)
    }

    pub fn edges(&self) -> &[BuchiEdge] {
        &self.edges
    }

    /// Atoms referenced by some guard.
    pub fn atoms(&self) -> &BTreeSet<Symbol> {
        &self.atoms
    }

    pub fn outgoing(&self, q: usize) -> impl Iterator<Item = &BuchiEdge> {
        let start = self.edges.partition_point(|e| e.from < q);
        self.edges[start..].iter().take_while(move |e| e.from == q)
    }

    /// States reachable from `q` in one step reading `letter`.
    pub fn step<'a>(&'a self, q: usize, letter: &'a Letter) -> impl Iterator<Item = usize> + 'a {
        self.outgoing(q)
            .filter(move |e| e.guard.satisfied_by(letter))
            .map(|e| e.to)
    }

    /// Acceptance of `prefix · cycle^ω` starting from state `q`.
    pub fn accepts_lasso_from(&self, q: usize, prefix: &[Letter], cycle: &[Letter]) -> Result<bool, LtlError> {
        if cycle.is_empty() {
            return Err(LtlError::EmptyCycle);
        }
        let word: Vec<&Letter> = prefix.iter().chain(cycle).collect();
        let n = word.len();
        let next_pos = |i: usize| if i + 1 < n { i + 1 } else { prefix.len() };
        let idx = |q: usize, i: usize| q * n + i;
        let succ = |node: usize| -> Vec<usize> {
            let (q, i) = (node / n, node % n);
            self.step(q, word[i]).map(|q2| idx(q2, next_pos(i))).collect()
        };
        let reachable = bfs(&[idx(q, 0)], self.num_states * n, &succ);
        for node in 0..self.num_states * n {
            if !reachable[node] || !self.is_accepting(node / n) {
                continue;
            }
            let from_succ = bfs(&succ(node), self.num_states * n, &succ);
            if from_succ[node] {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn to_document(&self) -> BuchiDocument {
        BuchiDocument {
            states: (0..self.num_states).collect(),
            initial: self.initial,
            accepting: self.accepting.iter().copied().collect(),
            transitions: self
                .edges
                .iter()
                .map(|e| BuchiEdgeDocument {
                    from: e.from,
                    to: e.to,
                    guard: e.guard.to_string(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &BuchiDocument) -> Result<BuchiAutomaton, LtlError> {
        let n = doc.states.iter().max().map_or(0, |m| m + 1).max(doc.initial + 1);
        let mut edges = Vec::new();
        for t in &doc.transitions {
            if t.from >= n || t.to >= n {
                return Err(LtlError::Syntax {
                    column: 1,
                    message: format!("transition {} -> {} references an unknown state", t.from, t.to),
                });
            }
            edges.push(BuchiEdge {
                from: t.from,
                to: t.to,
                guard: t.guard.parse()?,
            });
        }
        Ok(BuchiAutomaton::new(n, doc.initial, doc.accepting.iter().copied().collect(), edges))
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
        out.push_str("  rankdir=LR;\n  __start [shape=point];\n");
        for q in 0..self.num_states {
            let shape = if self.is_accepting(q) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  b{q} [shape={shape}];");
        }
        let _ = writeln!(out, "  __start -> b{};", self.initial);
        for e in &self.edges {
            let _ = writeln!(out, "  b{} -> b{} [label=\"{}\"];", e.from, e.to, escape(&e.guard.to_string()));
        }
        out.push_str("}\n");
        out
    }

    // Keeps states reachable from the initial state that can also reach an
    // accepting cycle. The initial state is always kept.
    fn trimmed(&self) -> BuchiAutomaton {
        let n = self.num_states;
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for e in &self.edges {
            fwd[e.from].push(e.to);
            bwd[e.to].push(e.from);
        }
        let reach = bfs(&[self.initial], n, &|q| fwd[q].clone());
        let on_accepting_cycle: Vec<usize> = self
            .accepting
            .iter()
            .copied()
            .filter(|&q| reach[q] && bfs(&fwd[q], n, &|p| fwd[p].clone())[q])
            .collect();
        let live = bfs(&on_accepting_cycle, n, &|q| bwd[q].clone());
        let keep: Vec<usize> = (0..n)
            .filter(|&q| q == self.initial || (reach[q] && live[q]))
            .collect();
        self.restricted(&keep)
    }

    fn restricted(&self, keep: &[usize]) -> BuchiAutomaton {
        let index: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let edges = self.edges.iter().filter_map(|e| {
            Some(BuchiEdge {
                from: *index.get(&e.from)?,
                to: *index.get(&e.to)?,
                guard: e.guard.clone(),
            })
        });
        BuchiAutomaton::new(
            keep.len(),
            index[&self.initial],
            self.accepting.iter().filter_map(|q| index.get(q).copied()).collect(),
            edges,
        )
    }

    // Merges bisimilar states: same acceptance and, for every block, the same
    // disjunction of guards leading into it. States are renumbered in BFS order
    // from the initial state.
    fn quotient(&self) -> BuchiAutomaton {
        let n = self.num_states;
        let mut block: Vec<usize> = (0..n).map(|q| usize::from(self.is_accepting(q))).collect();
        let mut count = block.iter().collect::<BTreeSet<_>>().len();
        loop {
            let mut sigs: BTreeMap<(usize, BTreeMap<usize, Guard>), usize> = BTreeMap::new();
            let mut next = vec![0; n];
            for q in 0..n {
                let mut sig: BTreeMap<usize, Guard> = BTreeMap::new();
                for e in self.outgoing(q) {
                    let g = sig.entry(block[e.to]).or_insert_with(Guard::ff);
                    *g = g.or(&e.guard);
                }
                let fresh = sigs.len();
                next[q] = *sigs.entry((block[q], sig)).or_insert(fresh);
            }
            block = next;
            if sigs.len() == count {
                break;
            }
            count = sigs.len();
        }
        // representative = smallest member; renumber by BFS over representatives
        let mut rep = vec![usize::MAX; count];
        for q in (0..n).rev() {
            rep[block[q]] = q;
        }
        let mut order = vec![usize::MAX; count];
        let mut queue = VecDeque::from([block[self.initial]]);
        order[block[self.initial]] = 0;
        let mut seen = 1;
        while let Some(b) = queue.pop_front() {
            for e in self.outgoing(rep[b]) {
                let t = block[e.to];
                if order[t] == usize::MAX {
                    order[t] = seen;
                    seen += 1;
                    queue.push_back(t);
                }
            }
        }
        let kept: Vec<usize> = (0..count).filter(|&b| order[b] != usize::MAX).collect();
        let mut edges = Vec::new();
        for &b in &kept {
            for e in self.outgoing(rep[b]) {
                edges.push(BuchiEdge {
                    from: order[b],
                    to: order[block[e.to]],
                    guard: e.guard.clone(),
                });
            }
        }
        let accepting = kept
            .iter()
            .filter(|&&b| self.is_accepting(rep[b]))
            .map(|&b| order[b])
            .collect();
        BuchiAutomaton::new(kept.len(), 0, accepting, edges)
    }
}

fn bfs(sources: &[usize], n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for v in succ(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Translates a formula into a Büchi automaton accepting exactly its models.
pub fn to_buchi(formula: &Formula) -> BuchiAutomaton {
    let root = Nf::from_formula(formula);
    let mut nodes = Vec::new();
    expand(
        Pending {
            incoming: [INIT].into(),
            new: [root.clone()].into(),
            old: BTreeSet::new(),
            next: BTreeSet::new(),
        },
        &mut nodes,
    );

    let mut untils = BTreeSet::new();
    root.untils(&mut untils);
    // acceptance set i: nodes that do not owe the i-th until or fulfil it now
    let fair: Vec<Vec<bool>> = untils
        .iter()
        .map(|u| {
            let Nf::Until(_, b) = u else { unreachable!() };
            nodes
                .iter()
                .map(|n| !n.old.contains(u) || n.old.contains(b.as_ref()))
                .collect()
        })
        .collect();
    let k = fair.len();

    let guard_into: Vec<Guard> = nodes
        .iter()
        .map(|n| {
            let conj: Conjunction = n
                .old
                .iter()
                .filter_map(|f| match f {
                    Nf::Lit(s, pos) => Some((s.clone(), *pos)),
                    _ => None,
                })
                .collect();
            Guard::from_conjunction(conj)
        })
        .collect();

    // degeneralized state (node, counter); node None is the initial state
    let advance = |node: usize, counter: usize| {
        let mut c = if counter == k { 0 } else { counter };
        while c < k && fair[c][node] {
            c += 1;
        }
        c
    };
    let mut ids: BTreeMap<(Option<usize>, usize), usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut edges = Vec::new();
    let mut accepting = BTreeSet::new();
    ids.insert((None, 0), 0);
    queue.push_back((None, 0));
    if k == 0 {
        accepting.insert(0);
    }
    while let Some((node, counter)) = queue.pop_front() {
        let from = ids[&(node, counter)];
        let src = node.unwrap_or(INIT);
        for (target, t) in nodes.iter().enumerate() {
            if !t.incoming.contains(&src) {
                continue;
            }
            let key = (Some(target), advance(target, counter));
            let fresh = ids.len();
            let to = *ids.entry(key).or_insert_with(|| {
                queue.push_back(key);
                fresh
            });
            if key.1 == k {
                accepting.insert(to);
            }
            edges.push(BuchiEdge {
                from,
                to,
                guard: guard_into[target].clone(),
            });
        }
    }
    BuchiAutomaton::new(ids.len(), 0, accepting, edges)
        .trimmed()
        .quotient()
}

/// Does the automaton accept `prefix · cycle^ω`?
pub fn accepts_lasso(aut: &BuchiAutomaton, prefix: &[Letter], cycle: &[Letter]) -> Result<bool, LtlError> {
    aut.accepts_lasso_from(aut.initial(), prefix, cycle)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuchiEdgeDocument {
    pub from: usize,
    pub to: usize,
    pub guard: String,
}

/// Serialized automaton; guards are DNF strings such as `"b & !square | p"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuchiDocument {
    pub states: Vec<usize>,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub transitions: Vec<BuchiEdgeDocument>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{eval_ltl_on_lasso, parse_ltl};

    fn l(names: &[&str]) -> Letter {
        names.iter().map(|n| Symbol::new(n).unwrap()).collect()
    }

    fn aut(text: &str) -> BuchiAutomaton {
        to_buchi(&parse_ltl(text).unwrap())
    }

    #[test]
    fn true_is_one_state() {
        let a = aut("true");
        assert_eq!(a.num_states(), 1);
        assert!(a.is_accepting(0));
        assert_eq!(a.edges().len(), 1);
        assert!(a.edges()[0].guard.is_true());
    }

    #[test]
    fn eventually_is_two_states() {
        let a = aut("F a");
        assert_eq!(a.num_states(), 2);
        assert_eq!(a.accepting().len(), 1);
        let sink = *a.accepting().iter().next().unwrap();
        assert_ne!(sink, a.initial());
        let doc = a.to_document();
        let find = |from, to| {
            doc.transitions
                .iter()
                .find(|t| t.from == from && t.to == to)
                .map(|t| t.guard.clone())
        };
        assert_eq!(find(a.initial(), sink).as_deref(), Some("a"));
        assert_eq!(find(sink, sink).as_deref(), Some("true"));
        assert!(accepts_lasso(&a, &[l(&["a"])], &[l(&[])]).unwrap());
        assert!(!accepts_lasso(&a, &[], &[l(&[])]).unwrap());
    }

    #[test]
    fn always_not_rejects_a() {
        let a = aut("G !a");
        assert!(!accepts_lasso(&a, &[], &[l(&["a"])]).unwrap());
        assert!(accepts_lasso(&a, &[], &[l(&["b"])]).unwrap());
    }

    #[test]
    fn recurrence() {
        let a = aut("G F a");
        assert!(accepts_lasso(&a, &[], &[l(&["a"]), l(&[])]).unwrap());
        assert!(!accepts_lasso(&a, &[], &[l(&[])]).unwrap());
    }

    #[test]
    fn alternating_patrol() {
        let a = aut("G (F (b & square)) & G (F (p & circle))");
        let cycle = [l(&["b", "square"]), l(&["p", "circle"])];
        assert!(accepts_lasso(&a, &[], &cycle).unwrap());
        assert!(!accepts_lasso(&a, &[], &cycle[..1]).unwrap());
    }

    #[test]
    fn unsatisfiable_formula_has_no_accepting_state() {
        let a = aut("a & !a");
        assert!(a.accepting().is_empty() || a.edges().is_empty());
        assert!(!accepts_lasso(&a, &[], &[l(&["a"])]).unwrap());
    }

    #[test]
    fn empty_cycle_is_an_error() {
        assert_eq!(accepts_lasso(&aut("true"), &[], &[]), Err(LtlError::EmptyCycle));
    }

    #[test]
    fn document_round_trip() {
        let a = aut("(a U b) | G c");
        let back = BuchiAutomaton::from_document(&a.to_document()).unwrap();
        assert_eq!(back, a);
    }

    // every lasso with |prefix| + |cycle| <= 4 over two atoms
    #[test]
    fn exhaustive_small_lassos_match_semantics() {
        let letters = [l(&[]), l(&["a"]), l(&["b"]), l(&["a", "b"])];
        let mut words: Vec<Vec<Letter>> = vec![vec![]];
        for len in 1..=4 {
            let mut next = Vec::new();
            for w in words.iter().filter(|w| w.len() == len - 1) {
                for x in &letters {
                    let mut v = w.clone();
                    v.push(x.clone());
                    next.push(v);
                }
            }
            words.extend(next);
        }
        for text in ["F a", "G a", "a U b", "G F a & F G b", "!a U (b | G a)", "F (a & F b)"] {
            let f = parse_ltl(text).unwrap();
            let a = to_buchi(&f);
            for w in words.iter().filter(|w| !w.is_empty()) {
                for split in 0..w.len() {
                    let (p, c) = w.split_at(split);
                    assert_eq!(
                        accepts_lasso(&a, p, c).unwrap(),
                        eval_ltl_on_lasso(&f, p, c).unwrap(),
                        "{text} on {p:?} {c:?}"
                    );
                }
            }
        }
    }
}
