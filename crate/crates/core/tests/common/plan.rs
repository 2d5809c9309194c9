use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltl_compose::ltl::{parse_ltl, to_buchi};
use ltl_compose::mvpolicy::{check_trace, execute_plan};
use ltl_compose::product::{build_product, find_plan, Plan, ProductAutomaton, ProductEdge, ProductState};
use ltl_compose::tsys::{StateId, Task};
use std::collections::BTreeSet;

use super::{abstraction, random_map, sym};

pub fn task(s: &str) -> Task {
    s.parse().unwrap()
}

/// Random product automaton; whether an edge completes depends only on its
/// task and target, as in a real product.
pub fn random_pa(rng: &mut ChaCha8Rng, max_states: usize) -> ProductAutomaton {
    let n = rng.gen_range(2..=max_states);
    let tasks = [task("a"), task("b"), task("c")];
    let states: Vec<ProductState> = (0..n)
        .map(|i| ProductState {
            ts: StateId(i),
            buchi: rng.gen_range(0..3),
        })
        .collect();
    let completes: Vec<[bool; 3]> = (0..n).map(|_| [rng.gen_bool(0.6), rng.gen_bool(0.6), rng.gen_bool(0.6)]).collect();
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for from in 0..n {
        for _ in 0..rng.gen_range(0..=3) {
            let to = rng.gen_range(0..n);
            let k = rng.gen_range(0..3);
            if seen.insert((from, to, k)) {
                edges.push(ProductEdge {
                    from,
                    to,
                    task: tasks[k].clone(),
                    completes: completes[to][k],
                });
            }
        }
    }
    let accepting = (0..n).filter(|_| rng.gen_bool(0.25)).collect();
    let terminal = (0..n).filter(|_| rng.gen_bool(0.1)).collect();
    let initial = if rng.gen_bool(0.8) { vec![0] } else { vec![0, 1] };
    ProductAutomaton::from_parts(states, initial, accepting, terminal, edges)
}

/// Shortest plan length by enumerating every edge sequence up to `bound`.
pub fn brute_min(pa: &ProductAutomaton, bound: usize) -> Option<usize> {
    struct Search<'a> {
        pa: &'a ProductAutomaton,
        bound: usize,
        states: Vec<usize>,
        tasks: Vec<Task>,
        best: Option<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, pending: Option<Task>) {
            let len = self.tasks.len();
            if self.best.is_some_and(|b| b <= len) {
                return;
            }
            let here = *self.states.last().unwrap();
            let mut ok = pending.is_none() && self.pa.terminal().contains(&here);
            for j in 0..len {
                if self.states[j] == here
                    && self.pa.accepting().contains(&here)
                    && pending.as_ref().is_none_or(|t| *t == self.tasks[j])
                {
                    ok = true;
                }
            }
            if ok {
                self.best = Some(len);
                return;
            }
            if len == self.bound {
                return;
            }
            let out: Vec<ProductEdge> = self.pa.outgoing(here).cloned().collect();
            for e in out {
                if pending.as_ref().is_some_and(|t| *t != e.task) {
                    continue;
                }
                self.states.push(e.to);
                self.tasks.push(e.task.clone());
                self.go((!e.completes).then_some(e.task));
                self.states.pop();
                self.tasks.pop();
            }
        }
    }
    let mut best = None;
    for &i in pa.initial() {
        let mut s = Search {
            pa,
            bound,
            states: vec![i],
            tasks: Vec::new(),
            best,
        };
        s.go(None);
        best = s.best;
    }
    best
}

/// Independent replay of a plan through the product.
pub fn replay_ok(pa: &ProductAutomaton, plan: &Plan) -> Result<(), String> {
    let idx: Vec<usize> = plan
        .pa_path
        .iter()
        .map(|s| pa.index_of(*s).ok_or(format!("{s:?} not in product")))
        .collect::<Result<_, _>>()?;
    if idx.len() != plan.len() + 1 {
        return Err("path length".into());
    }
    if !pa.initial().contains(&idx[0]) {
        return Err("does not start initially".into());
    }
    let tasks: Vec<&Task> = plan.prefix.iter().chain(&plan.cycle).collect();
    let mut pending: Option<&Task> = None;
    for (k, t) in tasks.iter().enumerate() {
        if pending.is_some_and(|p| p != *t) {
            return Err(format!("step {k} abandons a running policy"));
        }
        let e = pa
            .outgoing(idx[k])
            .find(|e| e.to == idx[k + 1] && e.task == **t)
            .ok_or(format!("no edge for step {k}"))?;
        pending = (!e.completes).then_some(&e.task);
    }
    let end = *idx.last().unwrap();
    if plan.cycle.is_empty() {
        if pending.is_some() || !pa.terminal().contains(&end) {
            return Err("finite plan does not stop at a terminal state".into());
        }
    } else {
        let anchor = idx[plan.prefix.len()];
        if anchor != end || !pa.accepting().contains(&anchor) {
            return Err("cycle does not close at an accepting state".into());
        }
        if pending.is_some_and(|p| *p != plan.cycle[0]) {
            return Err("cycle cannot wrap around".into());
        }
    }
    Ok(())
}

/// (instances compared, mismatches) for the minimality oracle.
pub fn minimality(seed: u64, instances: usize) -> (usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    let mut bad = Vec::new();
    let bound = 9;
    while compared < instances {
        let pa = random_pa(&mut rng, if compared % 2 == 0 { 10 } else { 40 });
        let got = find_plan(&pa);
        let want = brute_min(&pa, bound);
        match (&got, want) {
            (Some(p), _) if p.len() > bound => {
                if want.is_some() {
                    bad.push(format!("found {} but brute force has {want:?}", p.len()));
                }
                continue;
            }
            (None, None) => {}
            (Some(p), Some(w)) if p.len() == w => {
                if let Err(e) = replay_ok(&pa, p) {
                    bad.push(e);
                }
            }
            _ => bad.push(format!("find_plan {:?} vs brute force {want:?}", got.map(|p| p.len()))),
        }
        compared += 1;
    }
    (compared, bad)
}

pub const TEMPLATES: [&str; 7] = [
    "F a",
    "F a & F b",
    "!b U a",
    "F (a & F b)",
    "G F a & G F b",
    "G F a",
    "F b & G !c",
];

/// Theorem 3: executing the plan on the map yields an accepted word.
/// Returns (plans executed, failures).
pub fn soundness(seed: u64, maps: usize) -> (usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut executed = 0;
    let mut bad = Vec::new();
    for _ in 0..maps {
        let mut map = random_map(&mut rng, 8, 3);
        for s in ["a", "b", "c"] {
            map.declare_symbol(sym(s));
        }
        let abs = abstraction(&map);
        let Some(start) = abs.start else { continue };
        for f in TEMPLATES {
            let aut = to_buchi(&parse_ltl(f).unwrap());
            let Ok(pa) = build_product(&abs.pruned, &aut) else { continue };
            let Some(plan) = find_plan(&pa) else { continue };
            executed += 1;
            match execute_plan(&abs.map, start, &plan, 2) {
                Ok(trace) if check_trace(&trace, &aut) => {}
                Ok(trace) => bad.push(format!("{f}: word {:?} rejected", trace.word)),
                Err(e) => bad.push(format!("{f}: {e}")),
            }
        }
    }
    (executed, bad)
}

