use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Word,
    Document,
    Code,
    Category,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [
        NodeKind::Word,
        NodeKind::Document,
        NodeKind::Code,
        NodeKind::Category,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn prefix(self) -> char {
        match self {
            NodeKind::Word => 'w',
            NodeKind::Document => 'd',
            NodeKind::Code => 'c',
            NodeKind::Category => 'k',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Text,
    Metadata,
}

impl Layer {
    pub const ALL: [Layer; 2] = [Layer::Text, Layer::Metadata];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Kind pairs that may carry edges in this layer.
    pub fn kind_pairs(self) -> &'static [(NodeKind, NodeKind)] {
        match self {
            Layer::Text => &[(NodeKind::Word, NodeKind::Document)],
            Layer::Metadata => &[
                (NodeKind::Word, NodeKind::Code),
                (NodeKind::Code, NodeKind::Category),
            ],
        }
    }

    pub fn kinds(self) -> &'static [NodeKind] {
        match self {
            Layer::Text => &[NodeKind::Word, NodeKind::Document],
            Layer::Metadata => &[NodeKind::Word, NodeKind::Code, NodeKind::Category],
        }
    }

    pub fn allows(self, a: NodeKind, b: NodeKind) -> bool {
        self.kind_pairs()
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub mult: u64,
}

impl Edge {
    pub fn new(u: u32, v: u32, mult: u64) -> Self {
        Edge { u, v, mult }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {0} out of range")]
    NodeOutOfRange(u32),
    #[error("{layer:?} layer cannot connect {a:?} to {b:?}")]
    KindMismatch {
        layer: Layer,
        a: NodeKind,
        b: NodeKind,
    },
    #[error("edge ({0}, {1}) has zero multiplicity")]
    ZeroMultiplicity(u32, u32),
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Csr {
    start: Vec<usize>,
    nbr: Vec<u32>,
    mult: Vec<u64>,
    degree: Vec<u64>,
    total: u64,
}

impl Csr {
    fn build(n: usize, mut edges: Vec<(u32, u32, u64)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        edges.sort_unstable_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(u32, u32, u64)> = Vec::with_capacity(edges.len());
        for (u, v, m) in edges {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += m,
                _ => merged.push((u, v, m)),
            }
        }
        let mut count = vec![0usize; n + 1];
        for &(u, v, _) in &merged {
            count[u as usize + 1] += 1;
            count[v as usize + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let start = count.clone();
        let mut fill = count;
        let mut nbr = vec![0u32; merged.len() * 2];
        let mut mult = vec![0u64; merged.len() * 2];
        let mut degree = vec![0u64; n];
        let mut total = 0u64;
        // Sorted (u, v) order keeps every adjacency row sorted by neighbor.
        for &(u, v, m) in &merged {
            let (ui, vi) = (u as usize, v as usize);
            nbr[fill[ui]] = v;
            mult[fill[ui]] = m;
            fill[ui] += 1;
            degree[ui] += m;
            degree[vi] += m;
            total += m;
        }
        for &(u, v, m) in &merged {
            let vi = v as usize;
            nbr[fill[vi]] = u;
            mult[fill[vi]] = m;
            fill[vi] += 1;
        }
        for i in 0..n {
            let (a, b) = (start[i], start[i + 1]);
            let mut row: Vec<(u32, u64)> = nbr[a..b]
                .iter()
                .copied()
                .zip(mult[a..b].iter().copied())
                .collect();
            row.sort_unstable_by_key(|r| r.0);
            for (k, (x, m)) in row.into_iter().enumerate() {
                nbr[a + k] = x;
                mult[a + k] = m;
            }
        }
        Csr {
            start,
            nbr,
            mult,
            degree,
            total,
        }
    }
}

/// Undirected multigraph over typed nodes with one adjacency per layer.
///
/// Nodes are numbered kind-major: all words first, then documents, codes
/// and categories. A node's position within its kind is its local index.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredGraph {
    counts: [usize; 4],
    offsets: [usize; 5],
    layers: [Csr; 2],
}

impl LayeredGraph {
    pub fn new(
        counts: [usize; 4],
        text: Vec<Edge>,
        metadata: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let mut offsets = [0usize; 5];
        for k in 0..4 {
            offsets[k + 1] = offsets[k] + counts[k];
        }
        let n = offsets[4];
        let kind_of = |x: u32| -> Result<NodeKind, GraphError> {
            if (x as usize) >= n {
                return Err(GraphError::NodeOutOfRange(x));
            }
            Ok(NodeKind::ALL[(0..4)
                .rev()
                .find(|&k| offsets[k] <= x as usize)
                .unwrap_or(0)])
        };
        let mut layers: [Csr; 2] = Default::default();
        for (layer, edges) in Layer::ALL.into_iter().zip([text, metadata]) {
            let mut raw = Vec::with_capacity(edges.len());
            for e in edges {
                let (a, b) = (kind_of(e.u)?, kind_of(e.v)?);
                if !layer.allows(a, b) {
                    return Err(GraphError::KindMismatch { layer, a, b });
                }
                if e.mult == 0 {
                    return Err(GraphError::ZeroMultiplicity(e.u, e.v));
                }
                raw.push((e.u, e.v, e.mult));
            }
            layers[layer.index()] = Csr::build(n, raw);
        }
        Ok(LayeredGraph {
            counts,
            offsets,
            layers,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets[4]
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes() == 0
    }

    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.counts[kind.index()]
    }

    pub fn offset(&self, kind: NodeKind) -> usize {
        self.offsets[kind.index()]
    }

    pub fn node(&self, kind: NodeKind, local: usize) -> u32 {
        (self.offsets[kind.index()] + local) as u32
    }

    pub fn kind_of(&self, node: u32) -> NodeKind {
        let x = node as usize;
        NodeKind::ALL[(0..4)
            .rev()
            .find(|&k| self.offsets[k] <= x && self.counts[k] > 0)
            .unwrap_or(0)]
    }

    pub fn local(&self, node: u32) -> usize {
        node as usize - self.offsets[self.kind_of(node).index()]
    }

    pub fn total(&self, layer: Layer) -> u64 {
        self.layers[layer.index()].total
    }

    pub fn degree(&self, layer: Layer, node: u32) -> u64 {
        self.layers[layer.index()].degree[node as usize]
    }

    pub fn neighbors(&self, layer: Layer, node: u32) -> impl Iterator<Item = (u32, u64)> + '_ {
        let csr = &self.layers[layer.index()];
        let (a, b) = (csr.start[node as usize], csr.start[node as usize + 1]);
        csr.nbr[a..b]
            .iter()
            .copied()
            .zip(csr.mult[a..b].iter().copied())
    }

    pub fn neighbor_count(&self, layer: Layer, node: u32) -> usize {
        let csr = &self.layers[layer.index()];
        csr.start[node as usize + 1] - csr.start[node as usize]
    }

    /// `i`-th adjacency entry of `node` in `layer`.
    pub fn neighbor_at(&self, layer: Layer, node: u32, i: usize) -> u32 {
        let csr = &self.layers[layer.index()];
        csr.nbr[csr.start[node as usize] + i]
    }

    /// Every edge once, as `(u, v, multiplicity)` with `u < v`.
    pub fn edges(&self, layer: Layer) -> impl Iterator<Item = (u32, u32, u64)> + '_ {
        (0..self.n_nodes() as u32).flat_map(move |u| {
            self.neighbors(layer, u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, m)| (u, v, m))
        })
    }

    pub fn edge_multiplicity(&self, layer: Layer, u: u32, v: u32) -> u64 {
        let csr = &self.layers[layer.index()];
        let (a, b) = (csr.start[u as usize], csr.start[u as usize + 1]);
        match csr.nbr[a..b].binary_search(&v) {
            Ok(i) => csr.mult[a + i],
            Err(_) => 0,
        }
    }

    /// Block multigraph: each node is replaced by its block. `block_of`
    /// holds local block ids per node; `block_counts` the blocks per kind.
    pub fn quotient(&self, block_of: &[u32], block_counts: [usize; 4]) -> LayeredGraph {
        let mut offsets = [0usize; 5];
        for k in 0..4 {
            offsets[k + 1] = offsets[k] + block_counts[k];
        }
        let global = |x: u32| -> u32 {
            (offsets[self.kind_of(x).index()] + block_of[x as usize] as usize) as u32
        };
        let mut per_layer: Vec<Vec<Edge>> = Vec::new();
        for layer in Layer::ALL {
            let mut agg: FxHashMap<(u32, u32), u64> = FxHashMap::default();
            for (u, v, m) in self.edges(layer) {
                let (a, b) = (global(u), global(v));
                let key = if a <= b { (a, b) } else { (b, a) };
                *agg.entry(key).or_insert(0) += m;
            }
            let mut edges: Vec<Edge> = agg
                .into_iter()
                .map(|((a, b), m)| Edge::new(a, b, m))
                .collect();
            edges.sort_unstable_by_key(|e| (e.u, e.v));
            per_layer.push(edges);
        }
        let meta = per_layer.pop().unwrap_or_default();
        let text = per_layer.pop().unwrap_or_default();
        LayeredGraph::new(block_counts, text, meta).expect("quotient of a valid graph is valid")
    }
}
