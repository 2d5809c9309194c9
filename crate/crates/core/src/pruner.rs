//! Pruning of a labeled transition system into a deterministic one:
//! equivalent-state merging, ambiguity resolution, removal of ineffectual
//! symbols and cleanup of the empty policy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gridworld::DistanceMatrix;
use crate::tsys::{LabelElem, State, StateId, Task, TaskLabel, TransitionSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PruneCase {
    #[serde(rename = "case1")]
    Case1,
    #[serde(rename = "case2")]
    Case2,
    #[serde(rename = "case3")]
    Case3,
    #[serde(rename = "emptyCleanup")]
    EmptyCleanup,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolRemoval {
    pub from: StateId,
    pub to: StateId,
    pub symbol: LabelElem,
    pub case: PruneCase,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionRemoval {
    pub from: StateId,
    pub to: StateId,
    pub label: TaskLabel,
    pub case: PruneCase,
}

/// Audit trail of a prune run. Replaying it on the unpruned system
/// reproduces the pruned one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub merged_state_groups: Vec<Vec<StateId>>,
    pub removed_symbols: Vec<SymbolRemoval>,
    pub removed_transitions: Vec<TransitionRemoval>,
}

/// Distances between states of a fixed transition-system graph.
pub struct StateDistances {
    pos: BTreeMap<StateId, usize>,
    matrix: DistanceMatrix,
}

impl StateDistances {
    pub fn new(ts: &TransitionSystem) -> Self {
        let (ids, adj) = ts.undirected_adjacency();
        StateDistances {
            pos: ids.iter().enumerate().map(|(i, s)| (*s, i)).collect(),
            matrix: DistanceMatrix::new(&adj),
        }
    }

    pub fn get(&self, a: StateId, b: StateId) -> Option<usize> {
        self.matrix.get(self.pos[&a], self.pos[&b])
    }
}

/// Coarsest partition of the states that agrees on state labels and on the
/// multiset-free sets of (transition label, neighbour block) pairs, both
/// outgoing and incoming. Blocks are listed by smallest member.
pub fn equivalence_classes(ts: &TransitionSystem) -> Vec<Vec<StateId>> {
    let ids: Vec<StateId> = ts.states.keys().copied().collect();
    let mut block: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut labels: BTreeMap<_, usize> = BTreeMap::new();
    for &s in &ids {
        let n = labels.len();
        let b = *labels.entry(ts.states[&s].label.clone()).or_insert(n);
        block.insert(s, b);
    }
    let mut count = labels.len();
    loop {
        type Sig<'a> = (usize, BTreeSet<(&'a TaskLabel, usize)>, BTreeSet<(&'a TaskLabel, usize)>);
        let mut sigs: BTreeMap<StateId, Sig> = ids
            .iter()
            .map(|&s| (s, (block[&s], BTreeSet::new(), BTreeSet::new())))
            .collect();
        for (&(a, b), l) in &ts.transitions {
            let bb = block[&b];
            let ba = block[&a];
            sigs.get_mut(&a).unwrap().1.insert((l, bb));
            sigs.get_mut(&b).unwrap().2.insert((l, ba));
        }
        let mut numbering: BTreeMap<&Sig, usize> = BTreeMap::new();
        let mut next = BTreeMap::new();
        for &s in &ids {
            let n = numbering.len();
            let b = *numbering.entry(&sigs[&s]).or_insert(n);
            next.insert(s, b);
        }
        let new_count = numbering.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let mut groups: BTreeMap<usize, Vec<StateId>> = BTreeMap::new();
    for &s in &ids {
        groups.entry(block[&s]).or_default().push(s);
    }
    let mut groups: Vec<Vec<StateId>> = groups.into_values().collect();
    groups.sort();
    groups
}

/// Collapses each group onto its smallest member. Transitions are mapped
/// onto representatives and their labels united; self-loops disappear.
pub fn quotient(ts: &TransitionSystem, groups: &[Vec<StateId>]) -> TransitionSystem {
    let mut rep: BTreeMap<StateId, StateId> = ts.states.keys().map(|&s| (s, s)).collect();
    for g in groups {
        let r = *g.iter().min().expect("empty group");
        for &s in g {
            rep.insert(s, r);
        }
    }
    let mut states: BTreeMap<StateId, State> = BTreeMap::new();
    for s in ts.states.values() {
        let r = rep[&s.id];
        match states.get_mut(&r) {
            Some(existing) => {
                existing.regions.extend(s.regions.iter().copied());
                existing.regions.sort();
            }
            None => {
                let mut st = ts.states[&r].clone();
                if r != s.id {
                    st.regions.extend(s.regions.iter().copied());
                    st.regions.sort();
                }
                states.insert(r, st);
            }
        }
    }
    let mut transitions: BTreeMap<(StateId, StateId), TaskLabel> = BTreeMap::new();
    for (&(a, b), l) in &ts.transitions {
        let (ra, rb) = (rep[&a], rep[&b]);
        if ra != rb {
            transitions
                .entry((ra, rb))
                .or_default()
                .extend(l.iter().cloned());
        }
    }
    TransitionSystem {
        states,
        transitions,
        initial: ts.initial.map(|i| rep[&i]),
        alphabet: ts.alphabet.clone(),
        mode: ts.mode,
        tasks: ts.tasks.clone(),
    }
}

/// Merges equivalent states. Returns the quotient, the non-trivial groups and
/// the transitions that vanished with the merged states.
pub fn case1_merge_equivalent(
    ts: &TransitionSystem,
) -> (TransitionSystem, Vec<Vec<StateId>>, Vec<TransitionRemoval>) {
    let groups: Vec<Vec<StateId>> = equivalence_classes(ts)
        .into_iter()
        .filter(|g| g.len() > 1)
        .collect();
    let merged = quotient(ts, &groups);
    let removed = ts
        .transitions
        .iter()
        .filter(|(&(a, b), _)| !merged.states.contains_key(&a) || !merged.states.contains_key(&b))
        .map(|(&(a, b), l)| TransitionRemoval {
            from: a,
            to: b,
            label: l.clone(),
            case: PruneCase::Case1,
        })
        .collect();
    (merged, groups, removed)
}

/// For every task on two or more outgoing transitions of `state`, keeps it
/// only on the transition whose target is strictly closest to a state
/// producing that task; on a tie the task is removed from all of them.
pub fn case2_disambiguate(
    ts: &mut TransitionSystem,
    state: StateId,
    dist: &StateDistances,
) -> Vec<SymbolRemoval> {
    let mut removals = Vec::new();
    let tasks: Vec<Task> = ts.tasks.iter().cloned().collect();
    for task in tasks {
        let elem = LabelElem::Task(task.clone());
        let carriers: Vec<StateId> = ts
            .outgoing(state)
            .filter(|(_, l)| l.contains(&elem))
            .map(|(t, _)| t)
            .collect();
        if carriers.len() < 2 {
            continue;
        }
        let producers: Vec<StateId> = ts
            .states
            .values()
            .filter(|s| s.tasks.contains(&task))
            .map(|s| s.id)
            .collect();
        let scores: Vec<Option<usize>> = carriers
            .iter()
            .map(|&end| producers.iter().filter_map(|&z| dist.get(end, z)).min())
            .collect();
        // None (no producer reachable) ranks last
        let key = |d: &Option<usize>| d.unwrap_or(usize::MAX);
        let best = scores.iter().map(key).min().unwrap();
        let winners = scores.iter().filter(|d| key(d) == best).count();
        for (&end, score) in carriers.iter().zip(&scores) {
            if winners == 1 && key(score) == best {
                continue;
            }
            ts.transitions.get_mut(&(state, end)).unwrap().remove(&elem);
            removals.push(SymbolRemoval {
                from: state,
                to: end,
                symbol: elem.clone(),
                case: PruneCase::Case2,
            });
        }
    }
    removals
}

/// Removes the tasks a state already produces from its outgoing transitions.
pub fn case3_remove_ineffectual(ts: &mut TransitionSystem, state: StateId) -> Vec<SymbolRemoval> {
    let own: Vec<LabelElem> = ts.states[&state]
        .tasks
        .iter()
        .cloned()
        .map(LabelElem::Task)
        .collect();
    let targets: Vec<StateId> = ts.outgoing(state).map(|(t, _)| t).collect();
    let mut removals = Vec::new();
    for end in targets {
        let label = ts.transitions.get_mut(&(state, end)).unwrap();
        for e in &own {
            if label.remove(e) {
                removals.push(SymbolRemoval {
                    from: state,
                    to: end,
                    symbol: e.clone(),
                    case: PruneCase::Case3,
                });
            }
        }
    }
    removals
}

/// Strips the empty-policy sentinel and deletes transitions left without a label.
pub fn empty_cleanup(ts: &mut TransitionSystem) -> (Vec<SymbolRemoval>, Vec<TransitionRemoval>) {
    let mut symbols = Vec::new();
    for (&(a, b), label) in ts.transitions.iter_mut() {
        if label.remove(&LabelElem::Empty) {
            symbols.push(SymbolRemoval {
                from: a,
                to: b,
                symbol: LabelElem::Empty,
                case: PruneCase::EmptyCleanup,
            });
        }
    }
    let mut transitions = Vec::new();
    ts.transitions.retain(|&(a, b), label| {
        if label.is_empty() {
            transitions.push(TransitionRemoval {
                from: a,
                to: b,
                label: TaskLabel::new(),
                case: PruneCase::EmptyCleanup,
            });
            false
        } else {
            true
        }
    });
    (symbols, transitions)
}

/// Full pruning pass: case 1 over the whole system, then cases 2 and 3 state
/// by state in ascending id order, then the empty cleanup.
pub fn prune(ts: &TransitionSystem) -> (TransitionSystem, PruneReport) {
    let (mut out, groups, mut removed_transitions) = case1_merge_equivalent(ts);
    let dist = StateDistances::new(&out);
    let mut removed_symbols = Vec::new();
    let ids: Vec<StateId> = out.states.keys().copied().collect();
    for s in ids {
        removed_symbols.extend(case2_disambiguate(&mut out, s, &dist));
        removed_symbols.extend(case3_remove_ineffectual(&mut out, s));
    }
    let (syms, trans) = empty_cleanup(&mut out);
    removed_symbols.extend(syms);
    removed_transitions.extend(trans);
    (
        out,
        PruneReport {
            merged_state_groups: groups,
            removed_symbols,
            removed_transitions,
        },
    )
}

/// The system after each pruning stage: case 1, case 2, case 3 and cleanup.
/// Cases 2 and 3 only touch the outgoing labels of the state they run on, so
/// running each over all states in turn gives the same result as `prune`.
pub fn prune_stages(ts: &TransitionSystem) -> [TransitionSystem; 4] {
    let (stage1, _, _) = case1_merge_equivalent(ts);
    let dist = StateDistances::new(&stage1);
    let ids: Vec<StateId> = stage1.states.keys().copied().collect();
    let mut stage2 = stage1.clone();
    for &s in &ids {
        case2_disambiguate(&mut stage2, s, &dist);
    }
    let mut stage3 = stage2.clone();
    for &s in &ids {
        case3_remove_ineffectual(&mut stage3, s);
    }
    let mut stage4 = stage3.clone();
    empty_cleanup(&mut stage4);
    [stage1, stage2, stage3, stage4]
}

impl PruneReport {
    /// Applies the recorded merges and removals to the unpruned system.
    pub fn replay(&self, unpruned: &TransitionSystem) -> TransitionSystem {
        let mut ts = quotient(unpruned, &self.merged_state_groups);
        for r in &self.removed_symbols {
            if let Some(label) = ts.transitions.get_mut(&(r.from, r.to)) {
                label.remove(&r.symbol);
            }
        }
        for r in &self.removed_transitions {
            if r.case != PruneCase::Case1 {
                ts.transitions.remove(&(r.from, r.to));
            }
        }
        ts
    }

    pub fn to_document(&self) -> PruneReportDocument {
        PruneReportDocument {
            merged_state_groups: self
                .merged_state_groups
                .iter()
                .map(|g| g.iter().map(ToString::to_string).collect())
                .collect(),
            removed_symbols: self
                .removed_symbols
                .iter()
                .map(|r| SymbolRemovalDocument {
                    from: r.from.to_string(),
                    to: r.to.to_string(),
                    symbol: r.symbol.to_string(),
                    case: r.case,
                })
                .collect(),
            removed_transitions: self
                .removed_transitions
                .iter()
                .map(|r| TransitionRemovalDocument {
                    from: r.from.to_string(),
                    to: r.to.to_string(),
                    label: r.label.iter().map(ToString::to_string).collect(),
                    case: r.case,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReportDocument {
    pub merged_state_groups: Vec<Vec<String>>,
    pub removed_symbols: Vec<SymbolRemovalDocument>,
    pub removed_transitions: Vec<TransitionRemovalDocument>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRemovalDocument {
    pub from: String,
    pub to: String,
    pub symbol: String,
    pub case: PruneCase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRemovalDocument {
    pub from: String,
    pub to: String,
    pub label: Vec<String>,
    pub case: PruneCase,
}
