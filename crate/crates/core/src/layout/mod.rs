//! Hexagonal treemap: documents placed along a Gosper curve in cluster
//! order, cluster outlines, and annotation pins.

mod gosper;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::{AnnotationStore, CodeFilter};
use crate::blockmodel::{BlockModelError, ExpandedPartition};
use crate::multinet::NodeKind;

pub use gosper::{gosper_curve, order_for, Hex, DIRECTIONS, MAX_ORDER};
use gosper::{lattice_to_plane, CORNERS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("curve order {0} exceeds the maximum of 8")]
    OrderTooLarge(u32),
    #[error("level {level} out of range (depth {depth})")]
    InvalidLevel { level: usize, depth: usize },
}

impl From<BlockModelError> for LayoutError {
    fn from(e: BlockModelError) -> Self {
        match e {
            BlockModelError::InvalidLevel { level, depth } => {
                LayoutError::InvalidLevel { level, depth }
            }
            other => unreachable!("layout only queries levels: {other}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GosperLayout {
    pub order: u32,
    /// The full curve, `7^order` cells.
    pub cells: Vec<Hex>,
    /// Document in each of the first `n` cells.
    pub doc_order: Vec<String>,
    pub doc_cells: BTreeMap<String, usize>,
    /// `clusters[l][i]`: document cluster at level `l` of the document in cell `i`.
    pub clusters: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedDoc {
    pub doc_id: String,
    pub q: i32,
    pub r: i32,
}

/// Closed rings (first vertex not repeated) in plane coordinates.
pub type Rings = Vec<Vec<[f64; 2]>>;

impl GosperLayout {
    pub fn depth(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_order.len()
    }

    pub fn cell_of(&self, doc_id: &str) -> Option<Hex> {
        self.doc_cells.get(doc_id).map(|&i| self.cells[i])
    }

    pub fn placed(&self) -> Vec<PlacedDoc> {
        self.doc_order
            .iter()
            .zip(&self.cells)
            .map(|(d, h)| PlacedDoc {
                doc_id: d.clone(),
                q: h.q,
                r: h.r,
            })
            .collect()
    }

    fn check_level(&self, level: usize) -> Result<(), LayoutError> {
        if level >= self.depth() {
            Err(LayoutError::InvalidLevel {
                level,
                depth: self.depth(),
            })
        } else {
            Ok(())
        }
    }
}

/// Places model documents on the curve in depth-first order of the
/// document-cluster hierarchy: larger clusters first, then lower cluster
/// id; documents within a level-0 cluster by id.
pub fn layout_documents(partition: &ExpandedPartition) -> Result<GosperLayout, LayoutError> {
    let depth = partition.depth();
    let docs = &partition.node_order.docs;
    let n = docs.len();
    let per_level: Vec<&[u32]> = (0..depth)
        .map(|l| partition.kind_slice(NodeKind::Document, l))
        .collect::<Result<_, _>>()?;
    let sizes: Vec<HashMap<u32, usize>> = per_level
        .iter()
        .map(|row| {
            let mut m = HashMap::new();
            for &c in row.iter() {
                *m.entry(c).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let key = |d: usize| -> Vec<(std::cmp::Reverse<usize>, u32)> {
        (0..depth)
            .rev()
            .map(|l| {
                let c = per_level[l][d];
                (std::cmp::Reverse(sizes[l][&c]), c)
            })
            .collect()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(a).cmp(&key(b)).then_with(|| docs[a].cmp(&docs[b])));
    let k = order_for(n);
    let cells = gosper_curve(k)?;
    let doc_order: Vec<String> = order.iter().map(|&d| docs[d].clone()).collect();
    let doc_cells = doc_order
        .iter()
        .enumerate()
        .map(|(i, d)| (d.clone(), i))
        .collect();
    let clusters = per_level
        .iter()
        .map(|row| order.iter().map(|&d| row[d]).collect())
        .collect();
    Ok(GosperLayout {
        order: k,
        cells,
        doc_order,
        doc_cells,
        clusters,
    })
}

type Vertex = (i64, i64);

/// Boundary sides of every cluster at `level`, each as a directed edge
/// running counterclockwise around its own cell.
pub fn boundary_edges(
    layout: &GosperLayout,
    level: usize,
) -> Result<BTreeMap<u32, Vec<(Vertex, Vertex)>>, LayoutError> {
    layout.check_level(level)?;
    let row = &layout.clusters[level];
    let assigned: HashMap<Hex, u32> = layout.cells[..layout.n_docs()]
        .iter()
        .zip(row)
        .map(|(&h, &c)| (h, c))
        .collect();
    let mut out: BTreeMap<u32, Vec<(Vertex, Vertex)>> = BTreeMap::new();
    for (i, &c) in row.iter().enumerate() {
        let h = layout.cells[i];
        let (cx, cy) = h.lattice_center();
        for side in 0..6 {
            if assigned.get(&h.neighbor(side + 1)) == Some(&c) {
                continue;
            }
            let (a, b) = (CORNERS[side], CORNERS[(side + 1) % 6]);
            out.entry(c)
                .or_default()
                .push(((cx + a.0, cy + a.1), (cx + b.0, cy + b.1)));
        }
    }
    Ok(out)
}

fn stitch(mut edges: Vec<(Vertex, Vertex)>) -> Vec<Vec<Vertex>> {
    edges.sort_unstable();
    let next: BTreeMap<Vertex, Vertex> = edges.iter().copied().collect();
    let mut used: BTreeSet<Vertex> = BTreeSet::new();
    let mut rings = Vec::new();
    for &(start, _) in &edges {
        if used.contains(&start) {
            continue;
        }
        let mut ring = Vec::new();
        let mut v = start;
        loop {
            used.insert(v);
            ring.push(v);
            v = next[&v];
            if v == start {
                break;
            }
        }
        rings.push(ring);
    }
    rings
}

/// Outline rings of every document cluster at `level`.
pub fn region_boundaries(
    layout: &GosperLayout,
    level: usize,
) -> Result<BTreeMap<u32, Rings>, LayoutError> {
    Ok(boundary_edges(layout, level)?
        .into_iter()
        .map(|(c, edges)| {
            let rings = stitch(edges)
                .into_iter()
                .map(|ring| ring.into_iter().map(lattice_to_plane).collect())
                .collect();
            (c, rings)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub doc_id: String,
    pub cell: usize,
    pub q: i32,
    pub r: i32,
    /// Distinct categories among the admitted codes; uncategorized codes
    /// count as one category of their own.
    pub unique_category_count: usize,
    pub category_colors: Vec<u32>,
    pub code_ids: Vec<String>,
}

/// One pin per placed document carrying a highlight whose code passes
/// the filter.
pub fn pin_overlay(
    layout: &GosperLayout,
    annotations: &AnnotationStore,
    filter: &CodeFilter,
) -> Vec<Pin> {
    let mut per_doc: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for h in &annotations.highlights {
        if filter.admits(&h.code_id) && layout.doc_cells.contains_key(&h.doc_id) {
            per_doc.entry(&h.doc_id).or_default().insert(&h.code_id);
        }
    }
    let mut pins: Vec<Pin> = per_doc
        .into_iter()
        .map(|(doc, codes)| {
            let mut categories: BTreeSet<Option<&str>> = BTreeSet::new();
            let mut colors: BTreeSet<u32> = BTreeSet::new();
            for c in &codes {
                let cat = annotations.code(c).and_then(|c| c.category_id.as_deref());
                categories.insert(cat);
                if let Some(cat) = cat.and_then(|id| annotations.category(id)) {
                    colors.insert(cat.color_index);
                }
            }
            let cell = layout.doc_cells[doc];
            let h = layout.cells[cell];
            Pin {
                doc_id: doc.to_string(),
                cell,
                q: h.q,
                r: h.r,
                unique_category_count: categories.len(),
                category_colors: colors.into_iter().collect(),
                code_ids: codes.into_iter().map(str::to_string).collect(),
            }
        })
        .collect();
    pins.sort_by_key(|p| p.cell);
    pins
}
