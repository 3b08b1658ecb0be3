use rustc_hash::FxHashMap;

use super::objective::{description_length, layer_penalty, ln_e1};
use super::partition::{offsets, HierarchicalPartition, Level};
use super::BlockModelError;
use crate::multinet::{Layer, LayeredGraph};
use crate::Scalar;

const NONE: u32 = u32::MAX;

/// Destination of a single-node move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// An existing block of the node's kind (local id in the partition API,
    /// internal id in [`LevelState`]).
    Existing(u32),
    /// A new, empty block of the node's kind.
    Fresh,
}

/// One level of a block model kept up to date under moves and merges.
///
/// Block ids live in the node index space: a block of kind `k` is named
/// by an id in that kind's node range, so singletons start as `block = node`.
#[derive(Clone, Debug)]
pub struct LevelState<'g, S: Scalar> {
    graph: &'g LayeredGraph,
    kind: Vec<u8>,
    block_of: Vec<u32>,
    members: Vec<Vec<u32>>,
    pos: Vec<u32>,
    active: [Vec<u32>; 4],
    active_pos: Vec<u32>,
    free: [Vec<u32>; 4],
    adj: [Vec<FxHashMap<u32, u64>>; 2],
    deg: [Vec<u64>; 2],
    items: [usize; 4],
    ln_e1: [S; 2],
    live: Vec<Layer>,
    scratch: Vec<u64>,
    touched: Vec<u32>,
}

impl<'g, S: Scalar> LevelState<'g, S> {
    /// Every node in its own block.
    pub fn singletons(graph: &'g LayeredGraph) -> Self {
        let block_of: Vec<u32> = (0..graph.n_nodes() as u32).collect();
        Self::build(graph, block_of)
    }

    pub fn from_level(graph: &'g LayeredGraph, level: &Level) -> Result<Self, BlockModelError> {
        HierarchicalPartition::single(level.clone()).validate(graph)?;
        let node_off = offsets(graph.counts());
        let block_of = (0..graph.n_nodes() as u32)
            .map(|v| {
                (node_off[graph.kind_of(v).index()] + level.blocks[v as usize] as usize) as u32
            })
            .collect();
        Ok(Self::build(graph, block_of))
    }

    fn build(graph: &'g LayeredGraph, block_of: Vec<u32>) -> Self {
        let n = graph.n_nodes();
        let kind: Vec<u8> = (0..n as u32)
            .map(|v| graph.kind_of(v).index() as u8)
            .collect();
        let mut members = vec![Vec::new(); n];
        let mut pos = vec![0u32; n];
        for v in 0..n {
            let b = block_of[v] as usize;
            pos[v] = members[b].len() as u32;
            members[b].push(v as u32);
        }
        let mut active: [Vec<u32>; 4] = Default::default();
        let mut free: [Vec<u32>; 4] = Default::default();
        let mut active_pos = vec![NONE; n];
        for b in 0..n {
            let k = kind[b] as usize;
            if members[b].is_empty() {
                free[k].push(b as u32);
            } else {
                active_pos[b] = active[k].len() as u32;
                active[k].push(b as u32);
            }
        }
        for f in free.iter_mut() {
            f.reverse();
        }
        let mut adj: [Vec<FxHashMap<u32, u64>>; 2] =
            [vec![FxHashMap::default(); n], vec![FxHashMap::default(); n]];
        let mut deg: [Vec<u64>; 2] = [vec![0; n], vec![0; n]];
        let mut live = Vec::new();
        for layer in Layer::ALL {
            let li = layer.index();
            if graph.total(layer) > 0 {
                live.push(layer);
            }
            for (u, v, m) in graph.edges(layer) {
                let (a, b) = (block_of[u as usize], block_of[v as usize]);
                *adj[li][a as usize].entry(b).or_insert(0) += m;
                *adj[li][b as usize].entry(a).or_insert(0) += m;
                deg[li][a as usize] += m;
                deg[li][b as usize] += m;
            }
        }
        LevelState {
            graph,
            kind,
            block_of,
            members,
            pos,
            active,
            active_pos,
            free,
            adj,
            deg,
            items: graph.counts(),
            ln_e1: [
                ln_e1(graph.total(Layer::Text)),
                ln_e1(graph.total(Layer::Metadata)),
            ],
            live,
            scratch: vec![0; n],
            touched: Vec::new(),
        }
    }

    pub fn graph(&self) -> &'g LayeredGraph {
        self.graph
    }

    pub fn block_of(&self, v: u32) -> u32 {
        self.block_of[v as usize]
    }

    pub fn kind_index(&self, v: u32) -> usize {
        self.kind[v as usize] as usize
    }

    pub fn members(&self, b: u32) -> &[u32] {
        &self.members[b as usize]
    }

    pub fn block_size(&self, b: u32) -> usize {
        self.members[b as usize].len()
    }

    pub fn active_blocks(&self, kind: usize) -> &[u32] {
        &self.active[kind]
    }

    pub fn is_active(&self, b: u32) -> bool {
        self.active_pos.get(b as usize).is_some_and(|&p| p != NONE)
    }

    pub fn counts(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|k| self.active[k].len())
    }

    /// Block adjacency in one layer: `(neighbor block, e_rs)`.
    pub fn block_neighbors(&self, layer: Layer, b: u32) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.adj[layer.index()][b as usize]
            .iter()
            .map(|(&t, &e)| (t, e))
    }

    pub fn block_degree(&self, layer: Layer, b: u32) -> u64 {
        self.deg[layer.index()][b as usize]
    }

    fn penalty(&self, counts: [usize; 4]) -> S {
        let mut p = S::zero();
        for &layer in &self.live {
            p = p + layer_penalty(layer, counts, self.items, self.ln_e1[layer.index()]);
        }
        p
    }

    /// Fit term per layer, summed over the current block structure.
    pub fn likelihood(&self, layer: Layer) -> S {
        let li = layer.index();
        let mut f = S::zero();
        for k in 0..4 {
            for &b in &self.active[k] {
                for (&t, &e) in &self.adj[li][b as usize] {
                    if t > b {
                        f = f + S::xlnx(e);
                    }
                }
                f = f - S::xlnx(self.deg[li][b as usize]);
            }
        }
        f
    }

    /// Description length of this level alone.
    pub fn description_length(&self) -> S {
        let mut total = self.penalty(self.counts());
        for &layer in &self.live {
            total = total - self.likelihood(layer);
        }
        total
    }

    fn check_target(&self, v: u32, target: Target) -> Result<(), BlockModelError> {
        if v as usize >= self.kind.len() {
            return Err(BlockModelError::InvalidMove(format!(
                "node {v} out of range"
            )));
        }
        if let Target::Existing(s) = target {
            if !self.is_active(s) || self.kind[s as usize] != self.kind[v as usize] {
                return Err(BlockModelError::InvalidMove(format!(
                    "block {s} is not a live block of node {v}'s kind"
                )));
            }
        }
        Ok(())
    }

    pub fn try_move_delta(&mut self, v: u32, target: Target) -> Result<S, BlockModelError> {
        self.check_target(v, target)?;
        Ok(self.move_delta(v, target))
    }

    /// Change in description length if `v` moved to `target`.
    pub fn move_delta(&mut self, v: u32, target: Target) -> S {
        let r = self.block_of[v as usize];
        let k = self.kind[v as usize] as usize;
        let alone = self.members[r as usize].len() == 1;
        let s = match target {
            Target::Existing(s) if s == r => return S::zero(),
            Target::Existing(s) => Some(s),
            Target::Fresh if alone => return S::zero(),
            Target::Fresh => None,
        };
        let counts = self.counts();
        let mut after = counts;
        if alone {
            after[k] -= 1;
        }
        if s.is_none() {
            after[k] += 1;
        }
        let dp = self.penalty(after) - self.penalty(counts);
        let mut df = S::zero();
        for li in 0..self.live.len() {
            let layer = self.live[li];
            let l = layer.index();
            let d = self.graph.degree(layer, v);
            if d == 0 {
                continue;
            }
            self.touched.clear();
            for (u, m) in self.graph.neighbors(layer, v) {
                let t = self.block_of[u as usize];
                if self.scratch[t as usize] == 0 {
                    self.touched.push(t);
                }
                self.scratch[t as usize] += m;
            }
            for &t in &self.touched {
                let kvt = std::mem::take(&mut self.scratch[t as usize]);
                let e_rt = self.adj[l][r as usize].get(&t).copied().unwrap_or(0);
                let e_st = s
                    .and_then(|s| self.adj[l][s as usize].get(&t).copied())
                    .unwrap_or(0);
                df = df + S::xlnx(e_rt - kvt) - S::xlnx(e_rt) + S::xlnx(e_st + kvt) - S::xlnx(e_st);
            }
            let e_r = self.deg[l][r as usize];
            let e_s = s.map_or(0, |s| self.deg[l][s as usize]);
            df = df - (S::xlnx(e_r - d) - S::xlnx(e_r) + S::xlnx(e_s + d) - S::xlnx(e_s));
        }
        dp - df
    }

    fn activate(&mut self, k: usize) -> u32 {
        let b = self.free[k]
            .pop()
            .expect("a kind never has more blocks than nodes");
        self.active_pos[b as usize] = self.active[k].len() as u32;
        self.active[k].push(b);
        b
    }

    fn deactivate(&mut self, b: u32) {
        let k = self.kind[b as usize] as usize;
        let p = self.active_pos[b as usize] as usize;
        self.active[k].swap_remove(p);
        if let Some(&moved) = self.active[k].get(p) {
            self.active_pos[moved as usize] = p as u32;
        }
        self.active_pos[b as usize] = NONE;
        self.free[k].push(b);
    }

    fn bump(map: &mut FxHashMap<u32, u64>, key: u32, add: u64, sub: u64) {
        let e = map.entry(key).or_insert(0);
        *e = *e + add - sub;
        if *e == 0 {
            map.remove(&key);
        }
    }

    /// Moves `v` and returns the block it ends up in.
    pub fn apply_move(&mut self, v: u32, target: Target) -> u32 {
        let r = self.block_of[v as usize];
        let k = self.kind[v as usize] as usize;
        let s = match target {
            Target::Existing(s) => s,
            Target::Fresh if self.members[r as usize].len() == 1 => r,
            Target::Fresh => self.activate(k),
        };
        if s == r {
            return r;
        }
        for layer in Layer::ALL {
            let l = layer.index();
            let d = self.graph.degree(layer, v);
            if d == 0 {
                continue;
            }
            for (u, m) in self.graph.neighbors(layer, v) {
                let t = self.block_of[u as usize];
                Self::bump(&mut self.adj[l][r as usize], t, 0, m);
                Self::bump(&mut self.adj[l][t as usize], r, 0, m);
                Self::bump(&mut self.adj[l][s as usize], t, m, 0);
                Self::bump(&mut self.adj[l][t as usize], s, m, 0);
            }
            self.deg[l][r as usize] -= d;
            self.deg[l][s as usize] += d;
        }
        let p = self.pos[v as usize] as usize;
        let list = &mut self.members[r as usize];
        list.swap_remove(p);
        if let Some(&moved) = list.get(p) {
            self.pos[moved as usize] = p as u32;
        }
        self.pos[v as usize] = self.members[s as usize].len() as u32;
        self.members[s as usize].push(v);
        self.block_of[v as usize] = s;
        if self.members[r as usize].is_empty() {
            self.deactivate(r);
        }
        s
    }

    pub fn try_merge_delta(&self, r: u32, s: u32) -> Result<S, BlockModelError> {
        if r == s
            || !self.is_active(r)
            || !self.is_active(s)
            || self.kind[r as usize] != self.kind[s as usize]
        {
            return Err(BlockModelError::InvalidMove(format!(
                "cannot merge blocks {r} and {s}"
            )));
        }
        Ok(self.merge_delta(r, s))
    }

    /// Change in description length if blocks `r` and `s` merged.
    pub fn merge_delta(&self, r: u32, s: u32) -> S {
        let k = self.kind[r as usize] as usize;
        let counts = self.counts();
        let mut after = counts;
        after[k] -= 1;
        let dp = self.penalty(after) - self.penalty(counts);
        let mut df = S::zero();
        for &layer in &self.live {
            let l = layer.index();
            let (a, b) = if self.adj[l][r as usize].len() <= self.adj[l][s as usize].len() {
                (r, s)
            } else {
                (s, r)
            };
            let big = &self.adj[l][b as usize];
            for (&t, &x) in &self.adj[l][a as usize] {
                let y = big.get(&t).copied().unwrap_or(0);
                df = df + S::xlnx(x + y) - S::xlnx(x) - S::xlnx(y);
            }
            let (er, es) = (self.deg[l][r as usize], self.deg[l][s as usize]);
            df = df - (S::xlnx(er + es) - S::xlnx(er) - S::xlnx(es));
        }
        dp - df
    }

    /// Merges `r` into `s`; `r` becomes free.
    pub fn apply_merge(&mut self, r: u32, s: u32) {
        debug_assert!(r != s && self.kind[r as usize] == self.kind[s as usize]);
        for l in 0..2 {
            let row = std::mem::take(&mut self.adj[l][r as usize]);
            let mut entries: Vec<(u32, u64)> = row.into_iter().collect();
            entries.sort_unstable();
            for (t, e) in entries {
                // t never equals r or s: blocks of one kind are not adjacent.
                Self::bump(&mut self.adj[l][t as usize], r, 0, e);
                Self::bump(&mut self.adj[l][t as usize], s, e, 0);
                Self::bump(&mut self.adj[l][s as usize], t, e, 0);
            }
            self.deg[l][s as usize] += std::mem::take(&mut self.deg[l][r as usize]);
        }
        let moving = std::mem::take(&mut self.members[r as usize]);
        for v in moving {
            self.block_of[v as usize] = s;
            self.pos[v as usize] = self.members[s as usize].len() as u32;
            self.members[s as usize].push(v);
        }
        self.deactivate(r);
    }

    /// Current assignment with block ids renumbered by first occurrence
    /// within each kind.
    pub fn to_level(&self) -> Level {
        let n = self.block_of.len();
        let mut map = vec![NONE; n];
        let mut next = [0u32; 4];
        let mut blocks = Vec::with_capacity(n);
        for v in 0..n {
            let b = self.block_of[v] as usize;
            if map[b] == NONE {
                let k = self.kind[v] as usize;
                map[b] = next[k];
                next[k] += 1;
            }
            blocks.push(map[b]);
        }
        Level::new(blocks, next.map(|c| c as usize))
    }
}

/// Internal id of local block `local` of the kind of node `v`.
fn internal_block(
    state: &LevelState<'_, impl Scalar>,
    level: &Level,
    v: u32,
    local: u32,
) -> Option<u32> {
    let k = state.kind_index(v);
    let g = state.graph();
    let start = g.offset(crate::multinet::NodeKind::ALL[k]);
    (start..start + g.counts()[k])
        .find(|&x| level.blocks[x] == local)
        .map(|x| state.block_of(x as u32))
}

/// Applies a single-node move to a hierarchy. Moving to a fresh block
/// keeps the node under its old parent; emptied blocks are removed at every
/// level they vanish from.
pub fn apply_partition_move(
    graph: &LayeredGraph,
    partition: &HierarchicalPartition,
    node: u32,
    target: Target,
) -> Result<HierarchicalPartition, BlockModelError> {
    partition.validate(graph)?;
    if node as usize >= graph.n_nodes() {
        return Err(BlockModelError::InvalidMove(format!(
            "node {node} out of range"
        )));
    }
    let k = graph.kind_of(node).index();
    let mut p = partition.clone();
    let r = p.levels[0].blocks[node as usize];
    let size_r = p.levels[0].blocks[graph.offset(crate::multinet::NodeKind::ALL[k])..]
        [..graph.counts()[k]]
        .iter()
        .filter(|&&b| b == r)
        .count();
    let s = match target {
        Target::Existing(s) => {
            if s as usize >= p.levels[0].counts[k] {
                return Err(BlockModelError::InvalidMove(format!(
                    "block {s} does not exist"
                )));
            }
            s
        }
        Target::Fresh if size_r == 1 => r,
        Target::Fresh => {
            let s = p.levels[0].counts[k] as u32;
            p.levels[0].counts[k] += 1;
            if p.levels.len() > 1 {
                let off = offsets(p.levels[0].counts);
                let parent_r = p.levels[1].blocks[off[k] + r as usize];
                p.levels[1].blocks.insert(off[k] + s as usize, parent_r);
            }
            s
        }
    };
    if s == r {
        return Ok(p);
    }
    p.levels[0].blocks[node as usize] = s;
    if size_r == 1 {
        remove_block(&mut p, graph, 0, k, r);
    }
    Ok(p)
}

/// Removes the now empty block `b` of kind `k` at level `l` by renaming the
/// last block of that kind to `b`.
fn remove_block(p: &mut HierarchicalPartition, graph: &LayeredGraph, l: usize, k: usize, b: u32) {
    let items = p.item_counts(graph, l);
    let item_off = offsets(items);
    let last = p.levels[l].counts[k] as u32 - 1;
    for x in &mut p.levels[l].blocks[item_off[k]..item_off[k + 1]] {
        if *x == last {
            *x = b;
        }
    }
    let old_off = offsets(p.levels[l].counts);
    p.levels[l].counts[k] -= 1;
    if l + 1 < p.levels.len() {
        let up = &mut p.levels[l + 1].blocks;
        let parent_b = up[old_off[k] + b as usize];
        up[old_off[k] + b as usize] = up[old_off[k] + last as usize];
        up.remove(old_off[k] + last as usize);
        let new_off = offsets(p.levels[l].counts);
        let still_used = p.levels[l + 1].blocks[new_off[k]..new_off[k + 1]].contains(&parent_b);
        if !still_used {
            remove_block(p, graph, l + 1, k, parent_b);
        }
    }
}

/// Change in total description length for moving `node` (local block ids).
///
/// The level-0 part is computed incrementally; the levels above, whose item
/// graph changes with the move, are re-evaluated.
pub fn delta_dl<S: Scalar>(
    graph: &LayeredGraph,
    partition: &HierarchicalPartition,
    node: u32,
    target: Target,
) -> Result<S, BlockModelError> {
    partition.validate(graph)?;
    if node as usize >= graph.n_nodes() {
        return Err(BlockModelError::InvalidMove(format!(
            "node {node} out of range"
        )));
    }
    let mut state = LevelState::<S>::from_level(graph, &partition.levels[0])?;
    let internal = match target {
        Target::Existing(s) => Target::Existing(
            internal_block(&state, &partition.levels[0], node, s)
                .ok_or_else(|| BlockModelError::InvalidMove(format!("block {s} does not exist")))?,
        ),
        Target::Fresh => Target::Fresh,
    };
    let d0 = state.try_move_delta(node, internal)?;
    if partition.depth() == 1 {
        return Ok(d0);
    }
    let moved = apply_partition_move(graph, partition, node, target)?;
    let before: super::ObjectiveValue<S> = description_length(graph, partition)?;
    let after: super::ObjectiveValue<S> = description_length(graph, &moved)?;
    Ok(d0 + after.upper_total(1) - before.upper_total(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multinet::Edge;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, nw: usize, nd: usize, nc: usize) -> LayeredGraph {
        let mut text = Vec::new();
        for d in 0..nd {
            for _ in 0..rng.gen_range(1..6) {
                let w = rng.gen_range(0..nw);
                text.push(Edge::new(w as u32, (nw + d) as u32, rng.gen_range(1..3)));
            }
        }
        let mut meta = Vec::new();
        let code0 = nw + nd;
        let cat0 = code0 + nc;
        for w in 0..nw {
            meta.push(Edge::new(
                w as u32,
                (code0 + rng.gen_range(0..nc)) as u32,
                1,
            ));
        }
        for c in 0..nc {
            meta.push(Edge::new((code0 + c) as u32, cat0 as u32, 1));
        }
        LayeredGraph::new([nw, nd, nc, 1], text, meta).unwrap()
    }

    #[test]
    fn singleton_state_matches_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, 12, 6, 3);
        let st = LevelState::<f64>::singletons(&g);
        let p = HierarchicalPartition::single(st.to_level());
        let scratch: super::super::ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        assert_relative_eq!(st.description_length(), scratch.total, epsilon = 1e-9);
    }

    #[test]
    fn moves_and_merges_stay_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(&mut rng, 15, 8, 3);
        let mut st = LevelState::<f64>::singletons(&g);
        let mut running = st.description_length();
        for step in 0..400 {
            let v = rng.gen_range(0..g.n_nodes() as u32);
            let k = st.kind_index(v);
            if step % 5 == 0 && st.active_blocks(k).len() > 1 {
                let blocks = st.active_blocks(k).to_vec();
                let r = blocks[rng.gen_range(0..blocks.len())];
                let s = blocks[rng.gen_range(0..blocks.len())];
                if r != s {
                    running += st.merge_delta(r, s);
                    st.apply_merge(r, s);
                }
            } else {
                let blocks = st.active_blocks(k).to_vec();
                let target = if rng.gen_bool(0.2) {
                    Target::Fresh
                } else {
                    Target::Existing(blocks[rng.gen_range(0..blocks.len())])
                };
                running += st.move_delta(v, target);
                st.apply_move(v, target);
            }
            let p = HierarchicalPartition::single(st.to_level());
            let scratch: super::super::ObjectiveValue<f64> = description_length(&g, &p).unwrap();
            assert!(
                (running - scratch.total).abs() < 1e-9,
                "step {step}: {running} vs {}",
                scratch.total
            );
        }
    }

    #[test]
    fn identity_moves_cost_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_graph(&mut rng, 6, 3, 2);
        let mut st = LevelState::<f64>::singletons(&g);
        let b = st.block_of(0);
        assert_eq!(st.move_delta(0, Target::Existing(b)), 0.0);
        assert_eq!(st.move_delta(0, Target::Fresh), 0.0);
        assert!(st.try_move_delta(0, Target::Existing(7)).is_err());
    }

    #[test]
    fn hierarchical_delta_matches_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_graph(&mut rng, 8, 4, 2);
        let items = g.counts();
        let l0 = Level::from_blocks(vec![0, 0, 1, 1, 2, 2, 3, 3, 0, 1, 0, 1, 0, 1, 0], items);
        let l1 = Level::from_blocks(vec![0, 0, 1, 1, 0, 0, 0, 0, 0], l0.counts);
        let top = Level::collapse(l1.counts);
        let p = HierarchicalPartition::new(vec![l0, l1, top]);
        p.validate(&g).unwrap();
        let base: super::super::ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        for node in 0..g.n_nodes() as u32 {
            let k = g.kind_of(node).index();
            let mut targets = vec![Target::Fresh];
            targets.extend((0..p.levels[0].counts[k] as u32).map(Target::Existing));
            for t in targets {
                let moved = apply_partition_move(&g, &p, node, t).unwrap();
                moved.validate(&g).unwrap();
                let after: super::super::ObjectiveValue<f64> =
                    description_length(&g, &moved).unwrap();
                let d: f64 = delta_dl(&g, &p, node, t).unwrap();
                assert!(
                    (d - (after.total - base.total)).abs() < 1e-9,
                    "node {node} {t:?}"
                );
            }
        }
    }
}
