//! The related-data relation, computed semi-naively.
//!
//! Pairs are ordered so the symmetric rule has something to do; the
//! relation is still symmetric on output. Each pair keeps the first
//! derivation that produced it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataflow::{EdgeKind, FlowGraph};
use crate::frontend::VarId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Derivation {
    Ref,
    Flow,
    Sym,
    /// Through the map edge at `line`.
    Map {
        line: u32,
    },
    /// Through rows duplicated at `line`.
    Dup {
        line: u32,
    },
}

impl Derivation {
    pub fn edge_line(self) -> Option<u32> {
        match self {
            Derivation::Map { line } | Derivation::Dup { line } => Some(line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RelData {
    /// Dense index per dataset variable.
    index: HashMap<VarId, usize>,
    datasets: Vec<VarId>,
    rows: Vec<Vec<u64>>,
    tags: HashMap<(usize, usize), Derivation>,
}

fn bit(row: &[u64], j: usize) -> bool {
    row[j / 64] >> (j % 64) & 1 == 1
}

impl RelData {
    fn with_datasets(datasets: Vec<VarId>) -> Self {
        let words = datasets.len().div_ceil(64);
        RelData {
            index: datasets.iter().enumerate().map(|(i, &v)| (v, i)).collect(),
            rows: vec![vec![0; words]; datasets.len()],
            datasets,
            tags: HashMap::new(),
        }
    }

    fn insert(&mut self, i: usize, j: usize, tag: Derivation) -> bool {
        let w = &mut self.rows[i][j / 64];
        let mask = 1u64 << (j % 64);
        if *w & mask != 0 {
            return false;
        }
        *w |= mask;
        self.tags.insert((i, j), tag);
        true
    }

    fn related_idx(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.rows[i];
        (0..self.datasets.len()).filter(move |&j| bit(row, j))
    }

    pub fn contains(&self, a: VarId, b: VarId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => bit(&self.rows[i], j),
            _ => false,
        }
    }

    pub fn derivation(&self, a: VarId, b: VarId) -> Option<Derivation> {
        let (i, j) = (*self.index.get(&a)?, *self.index.get(&b)?);
        self.tags.get(&(i, j)).copied()
    }

    pub fn related(&self, a: VarId) -> impl Iterator<Item = VarId> + '_ {
        let i = self.index.get(&a).copied();
        i.into_iter()
            .flat_map(move |i| self.related_idx(i).map(|j| self.datasets[j]))
    }

    pub fn datasets(&self) -> &[VarId] {
        &self.datasets
    }

    /// All ordered pairs, sorted.
    pub fn pairs(&self) -> Vec<(VarId, VarId)> {
        let mut out: Vec<(VarId, VarId)> = (0..self.datasets.len())
            .flat_map(|i| self.related_idx(i).map(move |j| (i, j)))
            .map(|(i, j)| (self.datasets[i], self.datasets[j]))
            .collect();
        out.sort();
        out
    }

    pub fn len(&self) -> usize {
        self.rows
            .iter()
            .flatten()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn compute_reldata(g: &FlowGraph) -> RelData {
    let mut rel = RelData::with_datasets(g.datasets().collect());
    let n = rel.datasets.len();

    // map edges by source, dup targets with the line that produced them
    let mut maps: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    let mut dup_line: Vec<Option<u32>> = vec![None; n];
    for e in g.edges() {
        let (Some(&s), Some(&t)) = (rel.index.get(&e.src), rel.index.get(&e.dst)) else {
            continue;
        };
        match e.kind {
            EdgeKind::Map => maps[s].push((t, e.line)),
            EdgeKind::Dup => {
                dup_line[t].get_or_insert(e.line);
            }
            _ => {}
        }
    }
    let mut map_into: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (a, out) in maps.iter().enumerate() {
        for &(c, line) in out {
            map_into[c].push((a, line));
        }
    }

    let mut delta = Vec::new();
    for i in 0..n {
        if rel.insert(i, i, Derivation::Ref) {
            delta.push((i, i));
        }
    }
    for i in 0..n {
        let reach = g.dataset_flow_from(rel.datasets[i]);
        for j in 0..n {
            if reach[rel.datasets[j].index()] && rel.insert(i, j, Derivation::Flow) {
                delta.push((i, j));
            }
        }
    }

    while !delta.is_empty() {
        let mut next = Vec::new();
        let mut add = |rel: &mut RelData, i: usize, j: usize, tag: Derivation| {
            if rel.insert(i, j, tag) {
                next.push((i, j));
            }
        };
        for (x, y) in std::mem::take(&mut delta) {
            add(&mut rel, y, x, Derivation::Sym);

            // (x,y) as Rel(a,b): every map edge x->c with Rel(x,c)
            for &(c, line) in &maps[x] {
                if bit(&rel.rows[x], c) {
                    add(&mut rel, y, c, Derivation::Map { line });
                }
            }
            // (x,y) as Rel(a,c) with a map edge x->y
            for &(a, line) in &map_into[y] {
                if a == x {
                    let bs: Vec<usize> = rel.related_idx(x).collect();
                    for b in bs {
                        add(&mut rel, b, y, Derivation::Map { line });
                    }
                }
            }
            // (x,y) as either Rel premise of the dup rule
            if let Some(line) = dup_line[x] {
                let cs: Vec<usize> = rel.related_idx(x).collect();
                for c in cs {
                    add(&mut rel, y, c, Derivation::Dup { line });
                    add(&mut rel, c, y, Derivation::Dup { line });
                }
            }
        }
        delta = next;
    }
    rel
}
