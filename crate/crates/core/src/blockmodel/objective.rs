use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::partition::{offsets, HierarchicalPartition};
use super::BlockModelError;
use crate::multinet::{Layer, LayeredGraph};
use crate::Scalar;

/// Likelihood and penalty of one layer at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<S> {
    pub level: usize,
    pub layer: Layer,
    /// Block-pair fit `F`; the description length subtracts it.
    pub likelihood: S,
    pub penalty: S,
}

impl<S: Scalar> Term<S> {
    pub fn value(&self) -> S {
        self.penalty - self.likelihood
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue<S> {
    pub total: S,
    pub breakdown: Vec<Term<S>>,
}

impl<S: Scalar> ObjectiveValue<S> {
    pub fn level_total(&self, level: usize) -> S {
        self.breakdown
            .iter()
            .filter(|t| t.level == level)
            .map(Term::value)
            .fold(S::zero(), |a, b| a + b)
    }

    /// Sum of the terms at `level` and above.
    pub fn upper_total(&self, level: usize) -> S {
        self.breakdown
            .iter()
            .filter(|t| t.level >= level)
            .map(Term::value)
            .fold(S::zero(), |a, b| a + b)
    }
}

/// Model cost of one layer given block and item counts per kind.
pub(crate) fn layer_penalty<S: Scalar>(
    layer: Layer,
    blocks: [usize; 4],
    items: [usize; 4],
    ln_e1: S,
) -> S {
    let pairs: u64 = layer
        .kind_pairs()
        .iter()
        .map(|&(a, b)| (blocks[a.index()] * blocks[b.index()]) as u64)
        .sum();
    let mut p = S::from_count(pairs) * ln_e1;
    for &k in layer.kinds() {
        let b = blocks[k.index()];
        if b > 1 {
            p = p + S::from_count(items[k.index()] as u64) * S::from_count(b as u64).ln();
        }
    }
    p
}

pub(crate) fn ln_e1<S: Scalar>(total: u64) -> S {
    S::from_count(total + 1).ln()
}

/// Description length of a hierarchical partition, evaluated from scratch.
pub fn description_length<S: Scalar>(
    graph: &LayeredGraph,
    partition: &HierarchicalPartition,
) -> Result<ObjectiveValue<S>, BlockModelError> {
    partition.validate(graph)?;
    let composed = partition.compose(graph);
    let kinds: Vec<usize> = (0..graph.n_nodes() as u32)
        .map(|v| graph.kind_of(v).index())
        .collect();
    let mut breakdown = Vec::new();
    for (l, level) in partition.levels.iter().enumerate() {
        let items = partition.item_counts(graph, l);
        let off = offsets(level.counts);
        let global = |v: u32| (off[kinds[v as usize]] + composed[l][v as usize] as usize) as u32;
        for layer in Layer::ALL {
            let total = graph.total(layer);
            if total == 0 {
                continue;
            }
            let mut pairs: FxHashMap<(u32, u32), u64> = FxHashMap::default();
            let mut block_deg = vec![0u64; off[4]];
            for (u, v, m) in graph.edges(layer) {
                let (a, b) = (global(u), global(v));
                let key = if a <= b { (a, b) } else { (b, a) };
                *pairs.entry(key).or_insert(0) += m;
                block_deg[a as usize] += m;
                block_deg[b as usize] += m;
            }
            let mut pairs: Vec<((u32, u32), u64)> = pairs.into_iter().collect();
            pairs.sort_unstable();
            let mut f = S::zero();
            for (_, e) in &pairs {
                f = f + S::xlnx(*e);
            }
            for &d in &block_deg {
                f = f - S::xlnx(d);
            }
            let penalty = layer_penalty(layer, level.counts, items, ln_e1::<S>(total));
            breakdown.push(Term {
                level: l,
                layer,
                likelihood: f,
                penalty,
            });
        }
    }
    let total = breakdown
        .iter()
        .map(Term::value)
        .fold(S::zero(), |a, b| a + b);
    Ok(ObjectiveValue { total, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::Level;
    use crate::multinet::Edge;
    use approx::assert_relative_eq;

    // Two words, two docs, w0-d0 and w1-d1 twice each.
    fn diagonal() -> LayeredGraph {
        LayeredGraph::new(
            [2, 2, 0, 0],
            vec![Edge::new(0, 2, 2), Edge::new(1, 3, 2)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn singleton_fit_by_hand() {
        let g = diagonal();
        let p = HierarchicalPartition::single(Level::identity([2, 2, 0, 0]));
        let dl: ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        let t = &dl.breakdown[0];
        assert_relative_eq!(t.likelihood, -4.0 * 2f64.ln(), epsilon = 1e-12);
        // 4 block pairs, two kinds with two singleton blocks each
        let expect_p = 4.0 * 5f64.ln() + 2.0 * 2f64.ln() + 2.0 * 2f64.ln();
        assert_relative_eq!(t.penalty, expect_p, epsilon = 1e-12);
        assert_eq!(dl.breakdown.len(), 1);
    }

    #[test]
    fn merged_fit_by_hand() {
        let g = diagonal();
        let p = HierarchicalPartition::single(Level::collapse([2, 2, 0, 0]));
        let dl: ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        assert_relative_eq!(
            dl.breakdown[0].likelihood,
            4.0 * (4.0f64 / 16.0).ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(dl.breakdown[0].penalty, 5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn f32_tracks_f64() {
        let g = diagonal();
        let p = HierarchicalPartition::single(Level::identity([2, 2, 0, 0]));
        let a: ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        let b: ObjectiveValue<f32> = description_length(&g, &p).unwrap();
        assert!((a.total - b.total as f64).abs() < 1e-4);
    }

    #[test]
    fn levels_are_reported_separately() {
        let g = diagonal();
        let p = HierarchicalPartition::new(vec![
            Level::identity([2, 2, 0, 0]),
            Level::collapse([2, 2, 0, 0]),
        ]);
        let dl: ObjectiveValue<f64> = description_length(&g, &p).unwrap();
        assert_eq!(dl.breakdown.len(), 2);
        assert_relative_eq!(
            dl.total,
            dl.level_total(0) + dl.level_total(1),
            epsilon = 1e-12
        );
        assert_relative_eq!(dl.upper_total(1), dl.level_total(1), epsilon = 1e-12);
    }
}
