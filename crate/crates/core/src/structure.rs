//! Words, cells and the quotient vertex sets `V_m` of a p.c.f. self-similar
//! structure, described combinatorially by a gluing table.
//!
//! A structure is given by `N` contraction symbols, a boundary `V_0` of
//! `n0` points, and two pieces of finite data:
//!
//! * gluing rules `(i, a) ~ (j, b)`: the point `psi_i(q_a)` coincides with
//!   `psi_j(q_b)`;
//! * a boundary embedding `a -> (i, b)`: the boundary point `q_a` equals
//!   `psi_i(q_b)`. An anchor `a -> i` is the special case `b = a`, i.e.
//!   `q_a` is the fixed point of `psi_i`.
//!
//! The embedding is what lets a level-`t` identification be transported to
//! any deeper level: the glued point `psi_{w i}(q_a)` is also the vertex
//! `psi_{w i k}(q_c)` for `(k, c)` the embedding of `a`, and so on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `N^m` cells per level.
pub const DEFAULT_LEVEL_CAP: usize = 10_000_000;

/// A finite word over the symbols, stored 0-based. Displayed 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from 0-based symbols.
    pub fn from_zero_based(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    /// Builds a word from 1-based symbols, checking them against `n_symbols`.
    pub fn from_one_based(symbols: &[usize], n_symbols: usize) -> Result<Self> {
        symbols
            .iter()
            .map(|&s| {
                if s == 0 || s > n_symbols {
                    Err(Error::InvalidSymbolIndex {
                        index: s,
                        n_symbols,
                    })
                } else {
                    Ok((s - 1) as u8)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// 0-based symbols.
    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut s = self.0.clone();
        s.extend_from_slice(&other.0);
        Word(s)
    }

    /// `w·i` for a 0-based symbol `i`.
    pub fn child(&self, symbol: usize) -> Word {
        let mut s = self.0.clone();
        s.push(symbol as u8);
        Word(s)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn suffix_from(&self, start: usize) -> Word {
        Word(self.0[start..].to_vec())
    }

    pub fn starts_with(&self, prefix: &Word) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Position of the word in the lexicographic enumeration of `W_m`.
    pub fn index(&self, n_symbols: usize) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, &s| acc * n_symbols + s as usize)
    }

    pub fn from_index(mut index: usize, level: usize, n_symbols: usize) -> Word {
        let mut s = vec![0u8; level];
        for slot in s.iter_mut().rev() {
            *slot = (index % n_symbols) as u8;
            index /= n_symbols;
        }
        Word(s)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&s| s < 9) {
            for s in &self.0 {
                write!(f, "{}", s + 1)?;
            }
        } else {
            let parts: Vec<String> = self.0.iter().map(|s| (s + 1).to_string()).collect();
            write!(f, "{}", parts.join("."))?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed: Option<Vec<usize>> = if s.contains('.') {
            s.split('.').map(|p| p.parse().ok()).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
        };
        let symbols = parsed.ok_or_else(|| Error::Parse(format!("bad word {s:?}")))?;
        if symbols.iter().any(|&x| x == 0 || x > 256) {
            return Err(Error::Parse(format!("bad word {s:?}")));
        }
        Ok(Word(symbols.into_iter().map(|x| (x - 1) as u8).collect()))
    }
}

/// `psi_left.0(q_left.1) = psi_right.0(q_right.1)`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GluingRule {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

/// On-disk structure description. Indices are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StructureDescription {
    pub n_symbols: usize,
    pub boundary_size: usize,
    pub gluing: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub anchors: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub embedding: BTreeMap<String, [usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfSimilarStructure {
    n_symbols: usize,
    boundary_size: usize,
    gluing: Vec<GluingRule>,
    embedding: Vec<(usize, usize)>,
    level_cap: usize,
}

/// Validates a description, including level-1 connectivity.
pub fn build_structure(desc: &StructureDescription) -> Result<SelfSimilarStructure> {
    let s = build_structure_unchecked(desc)?;
    let components = s.level1_components();
    if components != 1 {
        return Err(Error::DisconnectedStructure { components });
    }
    Ok(s)
}

/// Like [`build_structure`] but skips the connectivity check, so that
/// degenerate structures can be handed to the solvers that detect them.
pub fn build_structure_unchecked(desc: &StructureDescription) -> Result<SelfSimilarStructure> {
    let n = desc.n_symbols;
    let n0 = desc.boundary_size;
    if n < 2 {
        return Err(Error::InvalidStructure(format!("n_symbols = {n} < 2")));
    }
    if n > 255 {
        return Err(Error::InvalidStructure(format!("n_symbols = {n} > 255")));
    }
    if n0 < 2 {
        return Err(Error::InvalidStructure(format!("boundary_size = {n0} < 2")));
    }
    if desc.gluing.is_empty() {
        return Err(Error::InvalidStructure("empty gluing table".into()));
    }
    let symbol = |i: usize| {
        if i == 0 || i > n {
            Err(Error::InvalidSymbolIndex {
                index: i,
                n_symbols: n,
            })
        } else {
            Ok(i - 1)
        }
    };
    let boundary = |a: usize| {
        if a == 0 || a > n0 {
            Err(Error::InvalidBoundaryIndex {
                index: a,
                boundary_size: n0,
            })
        } else {
            Ok(a - 1)
        }
    };

    let mut gluing: Vec<GluingRule> = Vec::with_capacity(desc.gluing.len());
    for &[i, a, j, b] in &desc.gluing {
        let left = (symbol(i)?, boundary(a)?);
        let right = (symbol(j)?, boundary(b)?);
        if left.0 == right.0 {
            return Err(Error::DuplicateGluing(format!(
                "[{i},{a},{j},{b}] glues a cell to itself"
            )));
        }
        let key = if left <= right { (left, right) } else { (right, left) };
        if gluing.iter().any(|g| {
            let k = if g.left <= g.right {
                (g.left, g.right)
            } else {
                (g.right, g.left)
            };
            k == key
        }) {
            return Err(Error::DuplicateGluing(format!("[{i},{a},{j},{b}]")));
        }
        gluing.push(GluingRule { left, right });
    }

    let mut embedding: Vec<Option<(usize, usize)>> = vec![None; n0];
    let parse_key = |k: &str| {
        k.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad boundary key {k:?}")))
    };
    for (key, &i) in &desc.anchors {
        let a = boundary(parse_key(key)?)?;
        embedding[a] = Some((symbol(i)?, a));
    }
    for (key, &[i, b]) in &desc.embedding {
        let a = boundary(parse_key(key)?)?;
        let target = (symbol(i)?, boundary(b)?);
        match embedding[a] {
            Some(existing) if existing != target => {
                return Err(Error::InvalidStructure(format!(
                    "boundary point {key} has conflicting anchor and embedding"
                )))
            }
            _ => embedding[a] = Some(target),
        }
    }
    let embedding = embedding
        .into_iter()
        .enumerate()
        .map(|(a, e)| e.ok_or(Error::MissingEmbedding(a + 1)))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = embedding.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n0 {
        return Err(Error::InvalidStructure(
            "two boundary points embed into the same cell vertex".into(),
        ));
    }

    Ok(SelfSimilarStructure {
        n_symbols: n,
        boundary_size: n0,
        gluing,
        embedding,
        level_cap: desc.level_cap.unwrap_or(DEFAULT_LEVEL_CAP),
    })
}

impl SelfSimilarStructure {
    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    pub fn gluing(&self) -> &[GluingRule] {
        &self.gluing
    }

    /// `a -> (i, b)` with `q_a = psi_i(q_b)`, 0-based.
    pub fn embedding(&self) -> &[(usize, usize)] {
        &self.embedding
    }

    /// Symbol whose map fixes `q_a`, if any.
    pub fn anchor(&self, a: usize) -> Option<usize> {
        let (i, b) = self.embedding[a];
        (a == b).then_some(i)
    }

    pub fn level_cap(&self) -> usize {
        self.level_cap
    }

    pub fn with_level_cap(mut self, cap: usize) -> Self {
        self.level_cap = cap;
        self
    }

    /// `|W_m| = N^m`, checked against the level cap.
    pub fn n_cells(&self, level: usize) -> Result<usize> {
        let cells = (self.n_symbols as u128).checked_pow(level as u32);
        match cells {
            Some(c) if c <= self.level_cap as u128 => Ok(c as usize),
            other => Err(Error::LevelOverflow {
                level,
                cells: other.unwrap_or(u128::MAX),
                cap: self.level_cap,
            }),
        }
    }

    /// Lexicographic enumeration of `W_m`.
    pub fn words(&self, level: usize) -> Result<impl Iterator<Item = Word> + '_> {
        let count = self.n_cells(level)?;
        let n = self.n_symbols;
        Ok((0..count).map(move |idx| Word::from_index(idx, level, n)))
    }

    /// `{w·i : i ∈ S}` in symbol order.
    pub fn child_cells(&self, w: &Word) -> Vec<Word> {
        (0..self.n_symbols).map(|i| w.child(i)).collect()
    }

    pub fn description(&self) -> StructureDescription {
        let mut anchors = BTreeMap::new();
        let mut embedding = BTreeMap::new();
        for (a, &(i, b)) in self.embedding.iter().enumerate() {
            if a == b {
                anchors.insert((a + 1).to_string(), i + 1);
            } else {
                embedding.insert((a + 1).to_string(), [i + 1, b + 1]);
            }
        }
        StructureDescription {
            n_symbols: self.n_symbols,
            boundary_size: self.boundary_size,
            gluing: self
                .gluing
                .iter()
                .map(|g| [g.left.0 + 1, g.left.1 + 1, g.right.0 + 1, g.right.1 + 1])
                .collect(),
            anchors,
            embedding,
            level_cap: (self.level_cap != DEFAULT_LEVEL_CAP).then_some(self.level_cap),
        }
    }

    fn level1_components(&self) -> usize {
        let mut uf = UnionFind::new(self.n_symbols);
        for g in &self.gluing {
            uf.union(g.left.0, g.right.0);
        }
        (0..self.n_symbols).filter(|&i| uf.find(i) == i).count()
    }

    /// Raw pair id `cell * n0 + a` at `to_level` of the point
    /// `psi_cell(q_a)` given at `from_level`.
    fn lift(&self, mut cell: usize, mut a: usize, from_level: usize, to_level: usize) -> usize {
        for _ in from_level..to_level {
            let (k, c) = self.embedding[a];
            cell = cell * self.n_symbols + k;
            a = c;
        }
        cell * self.boundary_size + a
    }

    /// `V_m` as a quotient of `W_m × V_0`, built with one union-find pass
    /// over every lifted gluing rule.
    pub fn vertex_set(&self, level: usize) -> Result<VertexSet> {
        let n_cells = self.n_cells(level)?;
        let n0 = self.boundary_size;
        let mut uf = UnionFind::new(n_cells * n0);
        let mut prefixes = 1usize;
        for t in 1..=level {
            for u in 0..prefixes {
                for g in &self.gluing {
                    let left = self.lift(u * self.n_symbols + g.left.0, g.left.1, t, level);
                    let right = self.lift(u * self.n_symbols + g.right.0, g.right.1, t, level);
                    uf.union(left, right);
                }
            }
            prefixes *= self.n_symbols;
        }
        let boundary: Vec<usize> = (0..n0).map(|a| self.lift(0, a, 0, level)).collect();
        Ok(VertexSet::from_classes(level, n_cells, n0, &mut uf, &boundary))
    }

    /// `V_m` built by gluing `N` copies of `V_{m-1}` along the level-1
    /// rules. Agrees with [`Self::vertex_set`]; kept as an independent route.
    pub fn vertex_set_incremental(&self, level: usize) -> Result<VertexSet> {
        let mut current = self.vertex_set(0)?;
        for m in 1..=level {
            let n_cells = self.n_cells(m)?;
            let n0 = self.boundary_size;
            let prev_cells = current.n_cells();
            let prev_vertices = current.n_vertices();
            // Copy i of V_{m-1} occupies ids i*prev_vertices..; every raw pair
            // (i·x, a) is first tied to its copy vertex.
            let copies = self.n_symbols * prev_vertices;
            let mut uf = UnionFind::new(copies + n_cells * n0);
            for i in 0..self.n_symbols {
                for x in 0..prev_cells {
                    for (a, &v) in current.cell_vertices(x).iter().enumerate() {
                        let raw = (i * prev_cells + x) * n0 + a;
                        uf.union(copies + raw, i * prev_vertices + v as usize);
                    }
                }
            }
            for g in &self.gluing {
                let left = g.left.0 * prev_vertices + current.boundary()[g.left.1] as usize;
                let right = g.right.0 * prev_vertices + current.boundary()[g.right.1] as usize;
                uf.union(left, right);
            }
            // Re-root onto raw pairs only.
            let mut raw_uf = UnionFind::new(n_cells * n0);
            let mut first: Vec<Option<usize>> = vec![None; copies + n_cells * n0];
            for raw in 0..n_cells * n0 {
                let root = uf.find(copies + raw);
                match first[root] {
                    Some(r) => {
                        raw_uf.union(r, raw);
                    }
                    None => first[root] = Some(raw),
                }
            }
            let boundary: Vec<usize> = (0..n0).map(|a| self.lift(0, a, 0, m)).collect();
            current = VertexSet::from_classes(m, n_cells, n0, &mut raw_uf, &boundary);
        }
        Ok(current)
    }
}

/// Quotient vertex set `V_m` with per-cell incidence lists.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexSet {
    level: usize,
    boundary_size: usize,
    incidence: Vec<u32>,
    representatives: Vec<usize>,
    boundary: Vec<u32>,
}

impl VertexSet {
    fn from_classes(
        level: usize,
        n_cells: usize,
        n0: usize,
        uf: &mut UnionFind,
        boundary_raw: &[usize],
    ) -> Self {
        // Roots are the minimal raw ids, so numbering roots in increasing
        // order numbers vertices by their lexicographic representative.
        let total = n_cells * n0;
        let mut label = vec![u32::MAX; total];
        let mut representatives = Vec::new();
        let mut incidence = Vec::with_capacity(total);
        for raw in 0..total {
            let root = uf.find(raw);
            if label[root] == u32::MAX {
                label[root] = representatives.len() as u32;
                representatives.push(root);
            }
            incidence.push(label[root]);
        }
        let boundary = boundary_raw.iter().map(|&r| incidence[r]).collect();
        Self {
            level,
            boundary_size: n0,
            incidence,
            representatives,
            boundary,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_vertices(&self) -> usize {
        self.representatives.len()
    }

    pub fn n_cells(&self) -> usize {
        self.incidence.len() / self.boundary_size
    }

    /// Vertices of cell `cell` (lexicographic index) in boundary order.
    pub fn cell_vertices(&self, cell: usize) -> &[u32] {
        &self.incidence[cell * self.boundary_size..(cell + 1) * self.boundary_size]
    }

    /// Vertex ids of `V_0` inside `V_m`, in boundary order.
    pub fn boundary(&self) -> &[u32] {
        &self.boundary
    }

    /// Canonical `(word, boundary index)` of a vertex (0-based index).
    pub fn representative(&self, vertex: usize, n_symbols: usize) -> (Word, usize) {
        let raw = self.representatives[vertex];
        (
            Word::from_index(raw / self.boundary_size, self.level, n_symbols),
            raw % self.boundary_size,
        )
    }
}

/// Disjoint sets whose root is always the smallest member.
#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let ra = self.find(a);
        let rb = self.find(b);
        let (lo, hi) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        lo
    }
}
