//! Labeled grid environments: map loading, region extraction and the
//! hop distance on the region-adjacency graph.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An atomic proposition. Symbols compare by name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Result<Self, MapError> {
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(MapError::InvalidSymbol(name.to_string()));
        }
        Ok(Symbol(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Label of a cell, region or state. The empty set is the unlabeled case.
pub type LabelSet = BTreeSet<Symbol>;

/// Formats a label set the way the figures do: `{a,c}` or `{}`.
pub fn fmt_label_set(label: &LabelSet) -> String {
    let names: Vec<&str> = label.iter().map(Symbol::name).collect();
    format!("{{{}}}", names.join(","))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown symbol character {ch:?} at line {line}, column {column}")]
    UnknownCharacter { ch: char, line: usize, column: usize },
    #[error("non-rectangular grid: line {line} has width {found}, expected {expected}")]
    NonRectangular {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid symbol name {0:?}")]
    InvalidSymbol(String),
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("cell {0} is both an obstacle and labeled")]
    LabeledObstacle(Cell),
    #[error("cell {0} is listed more than once")]
    DuplicateCell(Cell),
    #[error("map must be at least 1x1")]
    Empty,
}

/// A rectangular grid of label sets with blocked cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    labels: Vec<LabelSet>,
    obstacles: Vec<bool>,
    alphabet: BTreeSet<Symbol>,
    start: Option<Cell>,
}

impl GridMap {
    /// An unlabeled, obstacle-free map.
    pub fn new(width: usize, height: usize) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        Ok(GridMap {
            width,
            height,
            labels: vec![LabelSet::new(); width * height],
            obstacles: vec![false; width * height],
            alphabet: BTreeSet::new(),
            start: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn label(&self, cell: Cell) -> &LabelSet {
        &self.labels[self.index(cell)]
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.is_obstacle(cell)
    }

    pub fn set_label(&mut self, cell: Cell, label: LabelSet) -> Result<(), MapError> {
        if !self.contains(cell) {
            return Err(MapError::OutOfBounds(cell));
        }
        if self.is_obstacle(cell) && !label.is_empty() {
            return Err(MapError::LabeledObstacle(cell));
        }
        self.alphabet.extend(label.iter().cloned());
        let i = self.index(cell);
        self.labels[i] = label;
        Ok(())
    }

    pub fn set_obstacle(&mut self, cell: Cell) -> Result<(), MapError> {
        if !self.contains(cell) {
            return Err(MapError::OutOfBounds(cell));
        }
        if !self.label(cell).is_empty() {
            return Err(MapError::LabeledObstacle(cell));
        }
        let i = self.index(cell);
        self.obstacles[i] = true;
        Ok(())
    }

    /// Declared propositions: every symbol used by a cell plus any declared explicitly.
    pub fn alphabet(&self) -> &BTreeSet<Symbol> {
        &self.alphabet
    }

    pub fn declare_symbol(&mut self, symbol: Symbol) {
        self.alphabet.insert(symbol);
    }

    /// Start cell stored in the map document, if any.
    pub fn start(&self) -> Option<Cell> {
        self.start
    }

    pub fn set_start(&mut self, cell: Cell) -> Result<(), MapError> {
        if !self.contains(cell) {
            return Err(MapError::OutOfBounds(cell));
        }
        self.start = Some(cell);
        Ok(())
    }

    /// Start cell to use when none is given: the stored one, else the first free
    /// cell in row-major order.
    pub fn default_start(&self) -> Option<Cell> {
        self.start.or_else(|| self.cells().find(|c| !self.is_obstacle(*c)))
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |c| self.is_obstacle(*c))
    }

    /// In-bounds 4-neighbours in action order: up, down, left, right.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let Cell { x, y } = cell;
        let up = (y > 0).then(|| Cell::new(x, y - 1));
        let down = (y + 1 < self.height).then(|| Cell::new(x, y + 1));
        let left = (x > 0).then(|| Cell::new(x - 1, y));
        let right = (x + 1 < self.width).then(|| Cell::new(x + 1, y));
        [up, down, left, right].into_iter().flatten()
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            width: self.width,
            height: self.height,
            cells: self
                .cells()
                .filter(|c| !self.label(*c).is_empty())
                .map(|c| CellDocument {
                    x: c.x,
                    y: c.y,
                    labels: self.label(c).iter().map(|s| s.name().to_string()).collect(),
                })
                .collect(),
            obstacles: self.obstacles().collect(),
            symbols: self.alphabet.iter().map(|s| s.name().to_string()).collect(),
            start: self.start,
        }
    }

    /// Renders the map as ASCII if every label is a single one-character symbol.
    pub fn to_ascii(&self) -> Option<String> {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if self.is_obstacle(c) {
                    out.push('#');
                    continue;
                }
                let label = self.label(c);
                match label.len() {
                    0 => out.push('.'),
                    1 => {
                        let name = label.iter().next().unwrap().name();
                        let mut chars = name.chars();
                        match (chars.next(), chars.next()) {
                            (Some(ch), None) if ch != '.' && ch != '#' => out.push(ch),
                            _ => return None,
                        }
                    }
                    _ => return None,
                }
            }
            out.push('\n');
        }
        Some(out)
    }
}

/// Structured map document, the canonical interchange format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub cells: Vec<CellDocument>,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
    /// Extra propositions to declare even if no cell carries them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbols: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Cell>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDocument {
    pub x: usize,
    pub y: usize,
    pub labels: Vec<String>,
}

impl MapDocument {
    pub fn into_map(self) -> Result<GridMap, MapError> {
        let mut map = GridMap::new(self.width, self.height)?;
        let mut seen = BTreeSet::new();
        for cell in &self.obstacles {
            if !seen.insert(*cell) {
                return Err(MapError::DuplicateCell(*cell));
            }
            map.set_obstacle(*cell)?;
        }
        for doc in self.cells {
            let cell = Cell::new(doc.x, doc.y);
            if !seen.insert(cell) {
                return Err(if map.contains(cell) && map.is_obstacle(cell) {
                    MapError::LabeledObstacle(cell)
                } else {
                    MapError::DuplicateCell(cell)
                });
            }
            let label = doc
                .labels
                .iter()
                .map(|n| Symbol::new(n))
                .collect::<Result<LabelSet, _>>()?;
            map.set_label(cell, label)?;
        }
        for name in &self.symbols {
            map.declare_symbol(Symbol::new(name)?);
        }
        if let Some(start) = self.start {
            map.set_start(start)?;
        }
        Ok(map)
    }
}

/// Parses either a structured (JSON) map document or an ASCII grid.
///
/// ASCII rows use `.` for unlabeled cells, `#` for obstacles and any other
/// printable character as a single-symbol label named after that character.
pub fn parse_map(text: &str) -> Result<GridMap, MapError> {
    if text.trim_start().starts_with('{') {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| MapError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        doc.into_map()
    } else {
        parse_ascii(text)
    }
}

fn parse_ascii(text: &str) -> Result<GridMap, MapError> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    // trailing blank lines are tolerated
    let last = rows.iter().rposition(|r| !r.is_empty()).map_or(0, |i| i + 1);
    let rows = &rows[..last];
    if rows.is_empty() {
        return Err(MapError::Empty);
    }
    let width = rows[0].chars().count();
    if width == 0 {
        return Err(MapError::Syntax {
            line: 1,
            column: 1,
            message: "empty row".into(),
        });
    }
    let mut map = GridMap::new(width, rows.len())?;
    for (y, row) in rows.iter().enumerate() {
        let found = row.chars().count();
        if found != width {
            return Err(MapError::NonRectangular {
                line: y + 1,
                found,
                expected: width,
            });
        }
        for (x, ch) in row.chars().enumerate() {
            let cell = Cell::new(x, y);
            match ch {
                '.' => {}
                '#' => map.set_obstacle(cell)?,
                c if c.is_whitespace() || c.is_control() => {
                    return Err(MapError::UnknownCharacter {
                        ch: c,
                        line: y + 1,
                        column: x + 1,
                    })
                }
                c => {
                    let sym = Symbol::new(&c.to_string())?;
                    map.set_label(cell, LabelSet::from([sym]))?;
                }
            }
        }
    }
    Ok(map)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId(pub usize);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub id: RegionId,
    /// Cells in row-major order; the first one is the topmost-leftmost.
    pub cells: Vec<Cell>,
    pub label: LabelSet,
}

/// Regions of a map together with their adjacency relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionGraph {
    pub regions: Vec<Region>,
    /// Symmetric adjacency, indexed by region id.
    pub adjacency: Vec<BTreeSet<RegionId>>,
    cell_region: Vec<Option<RegionId>>,
    width: usize,
}

impl RegionGraph {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, id: RegionId) -> &Region {
        &self.regions[id.0]
    }

    pub fn region_of(&self, cell: Cell) -> Option<RegionId> {
        self.cell_region.get(cell.y * self.width + cell.x).copied().flatten()
    }

    pub fn are_adjacent(&self, a: RegionId, b: RegionId) -> bool {
        self.adjacency[a.0].contains(&b)
    }

    /// Adjacency as plain index lists, the form `hop_distance` works on.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        self.adjacency
            .iter()
            .map(|n| n.iter().map(|r| r.0).collect())
            .collect()
    }
}

/// Splits the non-obstacle cells into maximal 4-connected components of equal
/// label. Ids follow the row-major order of each region's topmost-leftmost cell.
pub fn extract_regions(map: &GridMap) -> RegionGraph {
    let mut cell_region: Vec<Option<RegionId>> = vec![None; map.width * map.height];
    let mut regions = Vec::new();
    for seed in map.cells() {
        if map.is_obstacle(seed) || cell_region[map.index(seed)].is_some() {
            continue;
        }
        let id = RegionId(regions.len());
        let label = map.label(seed).clone();
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([seed]);
        cell_region[map.index(seed)] = Some(id);
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            for n in map.neighbors(c) {
                let ni = map.index(n);
                if !map.is_obstacle(n) && cell_region[ni].is_none() && *map.label(n) == label {
                    cell_region[ni] = Some(id);
                    queue.push_back(n);
                }
            }
        }
        cells.sort_by_key(|c| (c.y, c.x));
        regions.push(Region { id, cells, label });
    }

    let mut adjacency = vec![BTreeSet::new(); regions.len()];
    for c in map.cells() {
        let Some(a) = cell_region[map.index(c)] else {
            continue;
        };
        for n in map.neighbors(c) {
            if let Some(b) = cell_region[map.index(n)] {
                if a != b {
                    adjacency[a.0].insert(b);
                    adjacency[b.0].insert(a);
                }
            }
        }
    }

    RegionGraph {
        regions,
        adjacency,
        cell_region,
        width: map.width,
    }
}

/// Unweighted single-source distances over an undirected adjacency list.
pub fn hop_distances_from(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Shortest-path hop count between two nodes; `None` when disconnected.
pub fn hop_distance(adjacency: &[Vec<usize>], a: usize, b: usize) -> Option<usize> {
    hop_distances_from(adjacency, a)[b]
}

/// All-pairs hop distances, computed once per graph.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    dist: Vec<Vec<Option<usize>>>,
}

impl DistanceMatrix {
    pub fn new(adjacency: &[Vec<usize>]) -> Self {
        DistanceMatrix {
            dist: (0..adjacency.len())
                .map(|s| hop_distances_from(adjacency, s))
                .collect(),
        }
    }

    pub fn get(&self, a: usize, b: usize) -> Option<usize> {
        self.dist[a][b]
    }
}
