use serde::{Deserialize, Serialize};

use super::BlockModelError;
use crate::multinet::{ContractedNetwork, LayeredGraph, NodeKind};

/// One level of a hierarchy. Items are the nodes (level 0) or the blocks
/// of the level below, numbered kind-major; `blocks[i]` is the block id of
/// item `i` within its kind and `counts` the number of blocks per kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub blocks: Vec<u32>,
    pub counts: [usize; 4],
}

impl Level {
    pub fn new(blocks: Vec<u32>, counts: [usize; 4]) -> Self {
        Level { blocks, counts }
    }

    /// Block counts inferred as `max id + 1` per kind.
    pub fn from_blocks(blocks: Vec<u32>, items: [usize; 4]) -> Self {
        let mut counts = [0usize; 4];
        let mut i = 0;
        for k in 0..4 {
            for _ in 0..items[k] {
                counts[k] = counts[k].max(blocks[i] as usize + 1);
                i += 1;
            }
        }
        Level { blocks, counts }
    }

    /// Every item in its own block.
    pub fn identity(items: [usize; 4]) -> Self {
        let blocks = items.iter().flat_map(|&n| 0..n as u32).collect();
        Level {
            blocks,
            counts: items,
        }
    }

    /// One block per non-empty kind.
    pub fn collapse(items: [usize; 4]) -> Self {
        let total = items.iter().sum();
        Level {
            blocks: vec![0; total],
            counts: items.map(|n| n.min(1)),
        }
    }

    pub fn is_top(&self) -> bool {
        self.counts.iter().all(|&c| c <= 1)
    }

    /// Relabels blocks by first occurrence within each kind and returns
    /// the old→new id map per kind.
    fn canonicalize(&mut self, items: [usize; 4]) -> [Vec<u32>; 4] {
        let mut maps: [Vec<u32>; 4] = Default::default();
        let mut i = 0;
        for k in 0..4 {
            let mut map = vec![u32::MAX; self.counts[k]];
            let mut next = 0u32;
            for _ in 0..items[k] {
                let b = self.blocks[i] as usize;
                if map[b] == u32::MAX {
                    map[b] = next;
                    next += 1;
                }
                self.blocks[i] = map[b];
                i += 1;
            }
            maps[k] = map;
        }
        maps
    }
}

pub(crate) fn offsets(counts: [usize; 4]) -> [usize; 5] {
    let mut off = [0usize; 5];
    for k in 0..4 {
        off[k + 1] = off[k] + counts[k];
    }
    off
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchicalPartition {
    pub levels: Vec<Level>,
}

impl HierarchicalPartition {
    pub fn new(levels: Vec<Level>) -> Self {
        HierarchicalPartition { levels }
    }

    pub fn single(level: Level) -> Self {
        HierarchicalPartition {
            levels: vec![level],
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Items per kind entering level `l`.
    pub fn item_counts(&self, graph: &LayeredGraph, l: usize) -> [usize; 4] {
        if l == 0 {
            graph.counts()
        } else {
            self.levels[l - 1].counts
        }
    }

    pub fn is_complete(&self) -> bool {
        self.levels.last().is_some_and(Level::is_top)
    }

    pub fn validate(&self, graph: &LayeredGraph) -> Result<(), BlockModelError> {
        if self.levels.is_empty() {
            return Err(BlockModelError::InvalidPartition("no levels".into()));
        }
        for (l, level) in self.levels.iter().enumerate() {
            let items = self.item_counts(graph, l);
            let n: usize = items.iter().sum();
            if level.blocks.len() != n {
                return Err(BlockModelError::InvalidPartition(format!(
                    "level {l} assigns {} items, expected {n}",
                    level.blocks.len()
                )));
            }
            let mut i = 0;
            for k in 0..4 {
                let b = level.counts[k];
                if (items[k] == 0) != (b == 0) || b > items[k] {
                    return Err(BlockModelError::InvalidPartition(format!(
                        "level {l}: {} {:?} blocks for {} items",
                        b,
                        NodeKind::ALL[k],
                        items[k]
                    )));
                }
                let mut seen = vec![false; b];
                for _ in 0..items[k] {
                    let id = level.blocks[i] as usize;
                    if id >= b {
                        return Err(BlockModelError::InvalidPartition(format!(
                            "level {l}: item {i} uses block {id} of {b} ({:?})",
                            NodeKind::ALL[k]
                        )));
                    }
                    seen[id] = true;
                    i += 1;
                }
                if let Some(gap) = seen.iter().position(|s| !s) {
                    return Err(BlockModelError::InvalidPartition(format!(
                        "level {l}: {:?} block {gap} is empty",
                        NodeKind::ALL[k]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Block of every node at every level (local id within kind).
    pub fn compose(&self, graph: &LayeredGraph) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = Vec::with_capacity(self.levels.len());
        let kinds: Vec<usize> = (0..graph.n_nodes() as u32)
            .map(|v| graph.kind_of(v).index())
            .collect();
        for (l, level) in self.levels.iter().enumerate() {
            let row = if l == 0 {
                level.blocks.clone()
            } else {
                let off = offsets(self.levels[l - 1].counts);
                out[l - 1]
                    .iter()
                    .zip(&kinds)
                    .map(|(&b, &k)| level.blocks[off[k] + b as usize])
                    .collect()
            };
            out.push(row);
        }
        out
    }

    /// Relabels every level by first occurrence in node order.
    pub fn canonicalize(&mut self, graph: &LayeredGraph) {
        for l in 0..self.levels.len() {
            let items = self.item_counts(graph, l);
            let maps = self.levels[l].canonicalize(items);
            if l + 1 < self.levels.len() {
                let counts = self.levels[l].counts;
                let off = offsets(counts);
                let old = self.levels[l + 1].blocks.clone();
                let next = &mut self.levels[l + 1].blocks;
                for k in 0..4 {
                    for (old_id, &new_id) in maps[k].iter().enumerate() {
                        next[off[k] + new_id as usize] = old[off[k] + old_id];
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOrder {
    pub words: Vec<String>,
    pub docs: Vec<String>,
    pub codes: Vec<String>,
    pub categories: Vec<String>,
}

impl NodeOrder {
    pub fn counts(&self) -> [usize; 4] {
        [
            self.words.len(),
            self.docs.len(),
            self.codes.len(),
            self.categories.len(),
        ]
    }
}

/// Hierarchy expressed per original node: `levels[l][i]` is the block of
/// node `i` at level `l`, nodes ordered words, docs, codes, categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedPartition {
    pub node_order: NodeOrder,
    pub levels: Vec<Vec<u32>>,
}

impl ExpandedPartition {
    /// Expands atoms back to their member words.
    pub fn expand(
        network: &ContractedNetwork,
        partition: &HierarchicalPartition,
        node_order: NodeOrder,
    ) -> Self {
        let graph = network.graph();
        let composed = partition.compose(graph);
        let n_atoms = graph.count(NodeKind::Word);
        let levels = composed
            .into_iter()
            .map(|row| {
                let mut out: Vec<u32> = network
                    .atom_map()
                    .iter()
                    .map(|&a| row[a as usize])
                    .collect();
                out.extend_from_slice(&row[n_atoms..]);
                out
            })
            .collect();
        ExpandedPartition { node_order, levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn counts(&self) -> [usize; 4] {
        self.node_order.counts()
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<(), BlockModelError> {
        if level >= self.levels.len() {
            Err(BlockModelError::InvalidLevel {
                level,
                depth: self.levels.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Blocks of one kind at one level, indexed by local node position.
    pub fn kind_slice(&self, kind: NodeKind, level: usize) -> Result<&[u32], BlockModelError> {
        self.check_level(level)?;
        let off = offsets(self.counts());
        Ok(&self.levels[level][off[kind.index()]..off[kind.index() + 1]])
    }

    /// Number of blocks per kind at a level.
    pub fn block_counts(&self, level: usize) -> Result<[usize; 4], BlockModelError> {
        let mut out = [0usize; 4];
        for kind in NodeKind::ALL {
            out[kind.index()] = self
                .kind_slice(kind, level)?
                .iter()
                .map(|&b| b as usize + 1)
                .max()
                .unwrap_or(0);
        }
        Ok(out)
    }

    /// Level-`level` block of the level-`level - 1` block `child`, for a kind.
    pub fn parent_of(
        &self,
        kind: NodeKind,
        level: usize,
        child: u32,
    ) -> Result<Option<u32>, BlockModelError> {
        self.check_level(level)?;
        if level == 0 {
            return Ok(None);
        }
        let lower = self.kind_slice(kind, level - 1)?;
        let upper = self.kind_slice(kind, level)?;
        Ok(lower.iter().position(|&b| b == child).map(|i| upper[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multinet::Edge;

    fn graph() -> LayeredGraph {
        // 3 words, 2 docs
        LayeredGraph::new(
            [3, 2, 0, 0],
            vec![Edge::new(0, 3, 1), Edge::new(1, 3, 1), Edge::new(2, 4, 2)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn validation_catches_gaps_and_mixing() {
        let g = graph();
        let ok = HierarchicalPartition::single(Level::new(vec![0, 0, 1, 0, 1], [2, 2, 0, 0]));
        ok.validate(&g).unwrap();
        let gap = HierarchicalPartition::single(Level::new(vec![0, 0, 2, 0, 1], [3, 2, 0, 0]));
        assert!(gap.validate(&g).is_err());
        let short = HierarchicalPartition::single(Level::new(vec![0, 0], [1, 1, 0, 0]));
        assert!(short.validate(&g).is_err());
        let over = HierarchicalPartition::single(Level::new(vec![0, 0, 1, 0, 3], [2, 2, 0, 0]));
        assert!(over.validate(&g).is_err());
    }

    #[test]
    fn compose_and_canonicalize() {
        let g = graph();
        let mut p = HierarchicalPartition::new(vec![
            Level::new(vec![2, 1, 0, 1, 0], [3, 2, 0, 0]),
            Level::new(vec![1, 0, 1, 0, 0], [2, 1, 0, 0]),
            Level::collapse([2, 1, 0, 0]),
        ]);
        p.validate(&g).unwrap();
        let before = p.compose(&g);
        p.canonicalize(&g);
        p.validate(&g).unwrap();
        let after = p.compose(&g);
        assert_eq!(after[0], vec![0, 1, 2, 0, 1]);
        // same grouping at every level, within each kind
        for l in 0..3 {
            for (a, b) in [(0, 1), (0, 2), (1, 2), (3, 4)] {
                assert_eq!(
                    before[l][a] == before[l][b],
                    after[l][a] == after[l][b],
                    "level {l} nodes {a} {b}: {before:?} {after:?}"
                );
            }
        }
        assert_eq!(after[1][0], 0);
        assert!(p.is_complete());
    }
}
