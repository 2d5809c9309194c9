#![allow(dead_code)]

pub mod plan;

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use ltl_compose::gridworld::{parse_map, Cell, GridMap, LabelSet, Symbol};
use ltl_compose::ltl::{accepts_lasso, eval_ltl_on_lasso, to_buchi, Formula};
use ltl_compose::mvpolicy::PolicySpec;
use ltl_compose::pipeline::{abstract_map, Abstraction, Options, Timings};
use ltl_compose::tsys::{LabelElem, StateId, TransitionSystem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYMBOLS: [&str; 4] = ["a", "b", "c", "d"];

pub fn maps_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

pub fn load(name: &str) -> GridMap {
    let text = std::fs::read_to_string(maps_dir().join(name)).expect("map file");
    parse_map(&text).expect("valid map")
}

pub fn abstraction(map: &GridMap) -> Abstraction {
    abstract_map(map, &Options::default(), &mut Timings::default()).expect("abstraction")
}

pub fn sym(s: &str) -> Symbol {
    Symbol::new(s).unwrap()
}

pub fn label(names: &[&str]) -> LabelSet {
    names.iter().map(|n| sym(n)).collect()
}

/// Transition label as strings, `{}` for the empty sentinel.
pub fn edge(ts: &TransitionSystem, a: usize, b: usize) -> Option<BTreeSet<String>> {
    ts.transitions
        .get(&(StateId(a), StateId(b)))
        .map(|l| l.iter().map(LabelElem::to_string).collect())
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Random map: labeled rectangles over free space, some obstacles, and
/// occasionally two-symbol labels.
pub fn random_map(rng: &mut ChaCha8Rng, max_side: usize, max_symbols: usize) -> GridMap {
    let w = rng.gen_range(2..=max_side);
    let h = rng.gen_range(2..=max_side);
    let n_sym = rng.gen_range(1..=max_symbols.min(SYMBOLS.len()));
    let composite = n_sym > 1 && rng.gen_bool(0.3);
    // None marks an obstacle
    let mut grid: Vec<Option<LabelSet>> = vec![Some(LabelSet::new()); w * h];
    let rects = rng.gen_range(1..=(w * h / 8).max(2));
    for _ in 0..rects {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (rw, rh) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let mut names: Vec<&str> = SYMBOLS[..n_sym].to_vec();
        names.shuffle(rng);
        let k = if composite && rng.gen_bool(0.4) { 2 } else { 1 };
        let l = label(&names[..k]);
        for y in y0..(y0 + rh).min(h) {
            for x in x0..(x0 + rw).min(w) {
                grid[y * w + x] = Some(l.clone());
            }
        }
    }
    if rng.gen_bool(0.5) {
        for _ in 0..rng.gen_range(1..=3) {
            let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
            let (rw, rh) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            for y in y0..(y0 + rh).min(h) {
                for x in x0..(x0 + rw).min(w) {
                    grid[y * w + x] = None;
                }
            }
        }
    }
    if grid.iter().all(Option::is_none) {
        grid[0] = Some(LabelSet::new());
    }
    let mut map = GridMap::new(w, h).unwrap();
    for (i, g) in grid.into_iter().enumerate() {
        let c = Cell::new(i % w, i / w);
        match g {
            Some(l) => map.set_label(c, l).unwrap(),
            None => map.set_obstacle(c).unwrap(),
        }
    }
    map
}

/// Plain BFS hop distances, kept separate from the library's.
pub fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; adj.len()];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

fn violation(map: &GridMap, spec: &PolicySpec, from: Cell, to: Cell) -> bool {
    let l = map.label(to);
    !l.is_empty() && l != map.label(from) && !spec.satisfied_by(l)
}

fn free_neighbors(map: &GridMap, c: Cell) -> Vec<Cell> {
    let mut out = Vec::new();
    if c.y > 0 {
        out.push(Cell::new(c.x, c.y - 1));
    }
    if c.y + 1 < map.height() {
        out.push(Cell::new(c.x, c.y + 1));
    }
    if c.x > 0 {
        out.push(Cell::new(c.x - 1, c.y));
    }
    if c.x + 1 < map.width() {
        out.push(Cell::new(c.x + 1, c.y));
    }
    out.retain(|&n| !map.is_obstacle(n));
    out
}

/// Optimal (violations, steps) by layered relaxation over walk length.
pub fn mv_cost_layers(map: &GridMap, start: Cell, spec: &PolicySpec) -> Option<(usize, usize)> {
    let w = map.width();
    let n = w * map.height();
    let idx = |c: Cell| c.y * w + c.x;
    let mut layer: Vec<Option<usize>> = vec![None; n];
    layer[idx(start)] = Some(0);
    let mut best: Option<(usize, usize)> = None;
    for k in 0..=n {
        for c in map.cells() {
            if let Some(v) = layer[idx(c)] {
                if spec.satisfied_by(map.label(c)) && best.is_none_or(|b| (v, k) < b) {
                    best = Some((v, k));
                }
            }
        }
        let mut next: Vec<Option<usize>> = vec![None; n];
        for c in map.cells() {
            let Some(v) = layer[idx(c)] else { continue };
            // walks continue only from non-target cells
            if spec.satisfied_by(map.label(c)) {
                continue;
            }
            for m in free_neighbors(map, c) {
                let nv = v + usize::from(violation(map, spec, c, m));
                if next[idx(m)].is_none_or(|o| nv < o) {
                    next[idx(m)] = Some(nv);
                }
            }
        }
        layer = next;
    }
    best
}

/// Optimal (violations, steps) by enumerating every simple path. Small maps only.
pub fn mv_cost_exhaustive(map: &GridMap, start: Cell, spec: &PolicySpec) -> Option<(usize, usize)> {
    fn go(
        map: &GridMap,
        spec: &PolicySpec,
        path: &mut Vec<Cell>,
        viol: usize,
        best: &mut Option<(usize, usize)>,
    ) {
        let here = *path.last().unwrap();
        if spec.satisfied_by(map.label(here)) {
            let c = (viol, path.len() - 1);
            if best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
            return;
        }
        for m in free_neighbors(map, here) {
            if path.contains(&m) {
                continue;
            }
            let v = viol + usize::from(violation(map, spec, here, m));
            path.push(m);
            go(map, spec, path, v, best);
            path.pop();
        }
    }
    let mut best = None;
    go(map, spec, &mut vec![start], 0, &mut best);
    best
}

/// Random formula of exactly the given size over the given atoms.
pub fn random_formula(rng: &mut ChaCha8Rng, size: usize, atoms: &[&str]) -> Formula {
    let atom = |rng: &mut ChaCha8Rng| {
        let a = atoms[rng.gen_range(0..atoms.len())];
        match rng.gen_range(0..5) {
            0 => Formula::True,
            1 | 2 => Formula::neg_atom(a),
            _ => Formula::atom(a),
        }
    };
    if size <= 1 {
        return atom(rng);
    }
    if size == 2 {
        let inner = atom(rng);
        return if rng.gen_bool(0.5) {
            Formula::eventually(inner)
        } else {
            Formula::always(inner)
        };
    }
    match rng.gen_range(0..5) {
        0 => Formula::eventually(random_formula(rng, size - 1, atoms)),
        1 => Formula::always(random_formula(rng, size - 1, atoms)),
        op => {
            let left = rng.gen_range(1..=size - 2);
            let a = random_formula(rng, left, atoms);
            let b = random_formula(rng, size - 1 - left, atoms);
            match op {
                2 => Formula::and(a, b),
                3 => Formula::or(a, b),
                _ => Formula::until(a, b),
            }
        }
    }
}

pub fn random_letter(rng: &mut ChaCha8Rng, atoms: &[&str]) -> LabelSet {
    atoms.iter().filter(|_| rng.gen_bool(0.5)).map(|a| sym(a)).collect()
}

/// Random lasso with total length between 1 and `max_len`, cycle non-empty.
pub fn random_lasso(rng: &mut ChaCha8Rng, atoms: &[&str], max_len: usize) -> (Vec<LabelSet>, Vec<LabelSet>) {
    let total = rng.gen_range(1..=max_len);
    let cyc = rng.gen_range(1..=total);
    let prefix = (0..total - cyc).map(|_| random_letter(rng, atoms)).collect();
    let cycle = (0..cyc).map(|_| random_letter(rng, atoms)).collect();
    (prefix, cycle)
}

/// Sample of up to `k` cells of a TS state, spread over its cells.
pub fn sample_cells(abs: &Abstraction, s: StateId, k: usize, rng: &mut ChaCha8Rng) -> Vec<Cell> {
    let mut cells: Vec<Cell> = abs
        .pruned
        .state(s)
        .regions
        .iter()
        .flat_map(|r| abs.regions.region(*r).cells.iter().copied())
        .collect();
    cells.shuffle(rng);
    cells.truncate(k);
    cells.sort();
    cells
}

/// Environments shared by the Theorem 1 and Theorem 2 suites.
pub fn theorem_maps(count: usize, seed: u64) -> Vec<GridMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_map(&mut rng, 12, 4)).collect()
}

/// One Theorem 2 failure: running `task` from `cell` in state `from` first
/// leaves for some state other than `to`.
#[derive(Debug)]
pub struct Counterexample {
    pub from: StateId,
    pub to: StateId,
    pub task: String,
    pub cell: Cell,
    pub landed: Option<StateId>,
    /// First state with a non-empty label the path enters.
    pub first_labeled: Option<StateId>,
}

/// Checks every pruned transition against the MV oracle from up to
/// `samples` cells of its source state.
pub fn realizability(abs: &Abstraction, samples: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<Counterexample>) {
    use ltl_compose::mvpolicy::mv_path;
    let mut checked = 0;
    let mut bad = Vec::new();
    for (&(s, t), l) in &abs.pruned.transitions {
        for elem in l {
            let LabelElem::Task(task) = elem else { continue };
            let spec = PolicySpec::from(task);
            for cell in sample_cells(abs, s, samples, rng) {
                checked += 1;
                let home = abs.regions.region_of(cell);
                let states: Vec<Option<StateId>> = match mv_path(&abs.map, cell, &spec) {
                    Ok(path) => path
                        .iter()
                        .map(|c| abs.regions.region_of(*c))
                        .skip_while(|r| *r == home)
                        .map(|r| r.and_then(|r| abs.pruned.state_of_region(r)))
                        .collect(),
                    Err(_) => Vec::new(),
                };
                let landed = states.first().copied().flatten();
                let first_labeled = states
                    .iter()
                    .flatten()
                    .copied()
                    .find(|s| !abs.pruned.state(*s).label.is_empty());
                if landed != Some(t) {
                    bad.push(Counterexample {
                        from: s,
                        to: t,
                        task: task.to_string(),
                        cell,
                        landed,
                        first_labeled,
                    });
                }
            }
        }
    }
    (checked, bad)
}

/// Agreement count over `formulas` random formulas with `lassos` words each.
pub fn oracle_agreement(seed: u64, formulas: usize, lassos: usize) -> (usize, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools: [&[&str]; 3] = [&["a"], &["a", "b"], &["a", "b", "c"]];
    let mut pairs = 0;
    let mut bad = Vec::new();
    for _ in 0..formulas {
        let atoms = pools[rng.gen_range(0..3)];
        let size = rng.gen_range(1..=8);
        let f = random_formula(&mut rng, size, atoms);
        assert!(f.size() <= 8);
        let aut = to_buchi(&f);
        for _ in 0..lassos {
            let (prefix, cycle) = random_lasso(&mut rng, atoms, 8);
            pairs += 1;
            let got = accepts_lasso(&aut, &prefix, &cycle).unwrap();
            let want = eval_ltl_on_lasso(&f, &prefix, &cycle).unwrap();
            if got != want {
                bad.push(format!("{f} on {prefix:?} ({cycle:?})^w: automaton {got}, semantics {want}"));
            }
        }
    }
    (pairs, bad)
}
